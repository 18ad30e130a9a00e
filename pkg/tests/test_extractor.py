import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpfingerprint.attacks import random_flipping, subset_attack
from dpfingerprint.crypto_rand import FingerprintBits, SecretKey, gen_fingerprint, internal_id
from dpfingerprint.errors import ParameterError, SchemaError
from dpfingerprint.extractor import (
    UNRESOLVED,
    ExtractionResult,
    UnknownRecordWarning,
    detect_traitor,
    extract_fingerprint,
    match_threshold_D,
)
from dpfingerprint.fingerprinter import fingerprint_copy, params_from_epsilon
from dpfingerprint.synthetic import nursery_full_factorial, random_database

PARAMS = params_from_epsilon(1, 1)


def test_round_trip_recovers_every_bit(key, small_db):
    sp = internal_id(key, 1, 1)
    copy = fingerprint_copy(small_db, PARAMS, key, sp)
    found = extract_fingerprint(small_db, copy, PARAMS, key)
    assert found.resolved.all()
    assert found.matches(gen_fingerprint(key, sp)) == 128


def test_unmarked_leak_agrees_by_chance(key, small_db):
    found = extract_fingerprint(small_db, small_db, PARAMS, key)
    assert found.resolved.all()
    scores = [found.matches(gen_fingerprint(key, internal_id(key, c, 1))) for c in range(1, 51)]
    assert abs(np.mean(scores) - 64) < 4


def test_empty_leak_is_unresolved(key, small_db):
    empty = small_db.subset(np.zeros(len(small_db), dtype=bool))
    found = extract_fingerprint(small_db, empty, PARAMS, key)
    assert (found.bits == UNRESOLVED).all()
    assert found.to_string() == "?" * 128
    assert found.matches(gen_fingerprint(key, b"x")) == 0


def test_ties_resolve_to_zero():
    result = ExtractionResult(np.array([2, 1, 0, 0]), np.array([2, 3, 0, 1]))
    assert result.bits.tolist() == [0, 1, UNRESOLVED, 1]


def test_extraction_serialises(key, small_db):
    found = extract_fingerprint(small_db, small_db, PARAMS, key)
    again = ExtractionResult.from_dict(found.to_dict())
    assert np.array_equal(again.bits, found.bits)


def test_unknown_leaked_rows_warn(key):
    db = random_database([3, 3], 50, 1)
    stranger = random_database([3, 3], 5, 2, key_prefix="zz")
    from dpfingerprint.datamodel import RelationalDatabase
    leak = RelationalDatabase(db.domains, db.keys + stranger.keys, np.vstack([db.codes, stranger.codes]))
    with pytest.warns(UnknownRecordWarning):
        extract_fingerprint(db, leak, PARAMS, key)


def test_schema_mismatch_rejected(key, small_db):
    other = random_database([2, 2], 10, 0)
    with pytest.raises(SchemaError):
        extract_fingerprint(small_db, other, PARAMS, key)


def _fp(n):
    return gen_fingerprint(SecretKey(b"candidate-generator-key!!"), bytes([n]))


def test_exact_copy_is_accused():
    candidates = {f"sp{n}": _fp(n) for n in range(1, 6)}
    exact = candidates["sp3"].bits.astype(np.int64)
    extraction = ExtractionResult(1 - exact, exact)
    verdict = detect_traitor(extraction, candidates, 64)
    assert verdict.accused == "sp3" and verdict.matches["sp3"] == 128


def test_no_accusation_below_threshold():
    candidates = {f"sp{n}": _fp(n) for n in range(1, 6)}
    target = _fp(99).bits.astype(np.int64)
    extraction = ExtractionResult(1 - target, target)
    top = max(extraction.matches(fp) for fp in candidates.values())
    assert detect_traitor(extraction, candidates, top + 1).accused is None


def test_tied_leaders_are_not_accused():
    bits = np.zeros(128, dtype=np.int64)
    fp = FingerprintBits(bits)
    extraction = ExtractionResult(np.ones(128, dtype=np.int64), bits)
    assert detect_traitor(extraction, {"a": fp, "b": fp}, 64).accused is None


def _threshold_oracle(recipients, length):
    for d in range(length // 2 + 1, length + 1):
        tail = Fraction(sum(math.comb(length, k) for k in range(d, length + 1)), 2 ** length)
        if tail <= Fraction(1, recipients):
            return d
    return None


def test_threshold_examples():
    assert match_threshold_D(1, 128) == 65
    assert match_threshold_D(100, 128) == _threshold_oracle(100, 128)
    # L=2: P(>=2 matches) = 1/4 <= 1/2
    assert match_threshold_D(2, 2) == 2


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 200), st.integers(1, 40))
def test_threshold_matches_oracle(recipients, length):
    expected = _threshold_oracle(recipients, length)
    if expected is None:
        with pytest.raises(ParameterError):
            match_threshold_D(recipients, length)
    else:
        assert match_threshold_D(recipients, length) == expected


def test_subset_leak_never_corrupts_surviving_votes(key):
    # power-of-two domains: no mark is erased by clamping, so every vote is right
    db = random_database([2, 4, 2, 4], 2000, 8)
    sp = internal_id(key, 1, 1)
    fp = gen_fingerprint(key, sp)
    copy = fingerprint_copy(db, PARAMS, key, sp)
    for seed in range(5):
        found = extract_fingerprint(db, subset_attack(copy, 0.02, seed), PARAMS, key)
        assert found.zero_votes.sum() + found.one_votes.sum() > 0
        ok = found.resolved
        assert np.array_equal(found.bits[ok], fp.bits[ok].astype(np.int8))


def test_half_row_leaks_recover_threshold(key):
    db = nursery_full_factorial()
    params = params_from_epsilon(1, 1)
    sp = internal_id(key, 1, 1)
    fp = gen_fingerprint(key, sp)
    copy = fingerprint_copy(db, params, key, sp)
    threshold = match_threshold_D(100, 128)
    wins = sum(
        extract_fingerprint(db, subset_attack(copy, 0.5, seed), params, key).matches(fp) >= threshold
        for seed in range(20)
    )
    assert wins / 20 >= 0.95


def test_matches_trend_in_p_and_gamma(key):
    db = random_database([2, 2, 2, 2], 300, 5)
    means = {}
    for p in (0.05, 0.15, 0.27):
        params = params_from_epsilon(6, 1, flip_probability=p, selection="exact")
        for gamma in (0.1, 0.25, 0.4):
            scores = []
            for run in range(20):
                sp = internal_id(key, run + 1, 1)
                copy = fingerprint_copy(db, params, key, sp)
                leak = random_flipping(copy, 1, gamma, [run, 7])
                scores.append(extract_fingerprint(db, leak, params, key).matches(gen_fingerprint(key, sp)))
            means[p, gamma] = np.mean(scores)
    slack = 1.5
    for p in (0.05, 0.15, 0.27):
        assert means[p, 0.1] + slack >= means[p, 0.25] and means[p, 0.25] + slack >= means[p, 0.4]
    for gamma in (0.1, 0.25, 0.4):
        assert means[0.05, gamma] <= means[0.15, gamma] + slack <= means[0.27, gamma] + 2 * slack
