import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpfingerprint.crypto_rand import SecretKey, gen_fingerprint, internal_id
from dpfingerprint.datamodel import AttributeDomain, RelationalDatabase
from dpfingerprint.errors import ParameterError
from dpfingerprint.fingerprinter import (
    FingerprintParams,
    fingerprint_copy,
    fingerprintable_set,
    insert_fingerprint,
    params_from_epsilon,
    postprocess_domain,
)
from dpfingerprint.synthetic import nursery_full_factorial, random_database
from dpfingerprint.utility_metrics import changed_entry_fraction, fingerprint_density


def test_params_at_table_values():
    one = params_from_epsilon(1, 1)
    assert one.marked_bits == 1
    assert one.flip_probability == pytest.approx(0.2689, abs=5e-5)
    assert params_from_epsilon(2, 1).flip_probability == pytest.approx(0.1192, abs=5e-5)
    wide = params_from_epsilon(1, 4)
    assert wide.marked_bits == 3
    assert wide.flip_probability == pytest.approx(1 / (math.exp(1 / 3) + 1), rel=1e-12)


@pytest.mark.parametrize("delta,bits", [(1, 1), (2, 2), (3, 2), (4, 3), (7, 3), (8, 4)])
def test_marked_bits_follow_log2(delta, bits):
    assert params_from_epsilon(1, delta).marked_bits == bits == math.floor(math.log2(delta)) + 1


def test_params_reject_bad_values():
    with pytest.raises(ParameterError):
        params_from_epsilon(1, 1, flip_probability=0.1)  # below the privacy minimum
    with pytest.raises(ParameterError):
        params_from_epsilon(1, 1, flip_probability=0.5)
    with pytest.raises(ParameterError):
        params_from_epsilon(0, 1)
    with pytest.raises(ParameterError):
        FingerprintParams(1.0, 4, 1, 0.3)


def _db(sizes, n, seed=0):
    return random_database(sizes, n, seed)


def test_fingerprintable_set_sizes():
    assert len(fingerprintable_set(_db([4], 2), 3)) == 4
    assert len(fingerprintable_set(_db([2, 2, 2], 1), 1)) == 3
    nursery = nursery_full_factorial()
    assert len(fingerprintable_set(nursery, 1)) == 103_680


def test_vanishing_probability_marks_nothing(key):
    db = _db([4, 4], 10)
    params = params_from_epsilon(14, 1, flip_probability=1e-6)
    marked, marks = insert_fingerprint(db, params, key, b"sp")
    assert len(marks) == 0
    assert marked.equals(db)


def test_insertion_is_deterministic(key, small_db):
    params = params_from_epsilon(1, 1)
    a = fingerprint_copy(small_db, params, key, b"sp-1")
    b = fingerprint_copy(small_db, params, key, b"sp-1")
    assert np.array_equal(a.codes, b.codes)
    c = fingerprint_copy(small_db, params, key, b"sp-2")
    assert not np.array_equal(a.codes, c.codes)


def test_selection_rate_and_mark_balance(key):
    db = _db([2] * 8, 12_500, seed=3)
    params = params_from_epsilon(2, 1)  # modulus 4
    _, marks = insert_fingerprint(db, params, key, b"sp")
    positions = 8 * 12_500
    assert abs(len(marks) / positions - 1 / params.selection_modulus) < 0.01
    assert abs(float(np.mean(marks.mark)) - 0.5) < 0.01


def test_marks_follow_mask_xor_fingerprint(key, small_db):
    params = params_from_epsilon(1, 1, selection="exact")
    marked, marks = insert_fingerprint(small_db, params, key, b"sp")
    fp = gen_fingerprint(key, b"sp")
    assert np.array_equal(marks.mark, marks.mask ^ fp.bits[marks.index])
    diff = marked.codes ^ small_db.codes
    expected = np.zeros_like(diff)
    for d in marks:
        expected[d.row, d.attribute] |= d.mark << (d.bit - 1)
    assert np.array_equal(diff, expected)
    assert marked.keys == small_db.keys


def test_clamp_examples():
    d = AttributeDomain("a", tuple("abcde"))
    raw = RelationalDatabase([d], ["x", "y"], [[5], [2]], validate=False)
    assert postprocess_domain(raw).codes[:, 0].tolist() == [4, 2]
    inside = RelationalDatabase([d], ["x"], [[3]])
    assert postprocess_domain(inside) is inside


def test_changed_fraction_on_nursery_grid(key):
    # the exact selection rule marks each bit with probability 2p
    db = nursery_full_factorial()
    params = params_from_epsilon(1, 1, selection="exact")
    copy = fingerprint_copy(db, params, key, internal_id(key, 1, 1))
    assert abs(changed_entry_fraction(db, copy) - 0.2138) <= 0.02


def _one_entry_output_law(value, bits, p):
    out = {}
    for pattern in range(2 ** bits):
        flips = bin(pattern).count("1")
        out[value ^ pattern] = out.get(value ^ pattern, 0) + p ** flips * (1 - p) ** (bits - flips)
    return out


@pytest.mark.parametrize("epsilon", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("bits", [1, 2, 3])
def test_entry_level_privacy_ratio(epsilon, bits):
    p = params_from_epsilon(epsilon, 2 ** bits - 1).flip_probability
    delta = 2 ** bits - 1
    worst = 0.0
    for a in range(2 ** bits):
        for b in range(2 ** bits):
            if a != b and abs(a - b) <= delta:
                pa, pb = _one_entry_output_law(a, bits, p), _one_entry_output_law(b, bits, p)
                worst = max(worst, max(pa[o] / pb[o] for o in pa))
    assert worst <= math.exp(epsilon) + 1e-9


@pytest.mark.parametrize("delta,p", [(1, 0.2689)])
def test_expected_error_per_entry(delta, p):
    # single-bit marking: every entry carries one mark opportunity
    size = 2 ** delta.bit_length()
    d = AttributeDomain("a", tuple(str(i) for i in range(size)))
    rng = np.random.default_rng(4)
    db = RelationalDatabase([d], [f"r{i}" for i in range(100_000)], rng.integers(0, size, (100_000, 1)))
    params = FingerprintParams(math.log((1 - p) / p) * delta.bit_length(), delta, delta.bit_length(), p,
                               selection="exact")
    marked, _ = insert_fingerprint(db, params, SecretKey(b"error-check-key-000000"), b"sp")
    errors = np.abs(marked.codes - db.codes).ravel()
    assert errors.mean() <= delta * p + 3 * errors.std(ddof=1) / math.sqrt(errors.size)


def test_density_within_bound(key, small_db):
    params = params_from_epsilon(1, 1, selection="exact")
    bound = params.flip_probability * small_db.n_records * small_db.n_attributes
    dens = []
    for run in range(50):
        copy = fingerprint_copy(small_db, params, key, internal_id(key, 1, run + 1))
        dens.append(fingerprint_density(small_db, copy))
    assert max(dens) <= bound


@settings(max_examples=15, deadline=None)
@given(st.permutations(list(range(12))))
def test_output_does_not_depend_on_row_order(order):
    key = SecretKey(b"permutation-check-key-123")
    db = random_database([3, 4, 2], 12, rng_seed=9)
    shuffled = db.subset(np.array(order))
    params = params_from_epsilon(1, 1, selection="exact")
    a = fingerprint_copy(db, params, key, b"sp")
    b = fingerprint_copy(shuffled, params, key, b"sp")
    index = b.key_index
    assert np.array_equal(a.codes, b.codes[[index[k] for k in a.keys]])
