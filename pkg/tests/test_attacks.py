import numpy as np
import pytest

from dpfingerprint.attacks import (
    AttackConfig,
    apply_attack,
    correlation_attack,
    correlation_targets,
    pairwise_joints,
    random_flipping,
    subset_attack,
)
from dpfingerprint.errors import ConfigurationError, ParameterError
from dpfingerprint.experiments import run_key
from dpfingerprint.fingerprinter import fingerprint_copy, params_from_epsilon
from dpfingerprint.synthetic import correlated_database, random_database


@pytest.fixture(scope="module")
def binary_db():
    # 12500 x 8 binary entries = 10^5 single-bit positions, never clamped
    return random_database([2] * 8, 12_500, 21)


@pytest.fixture(scope="module")
def aligned_db():
    return random_database([4, 2, 8, 4], 3000, 22)


def test_zero_gamma_is_identity(aligned_db):
    assert random_flipping(aligned_db, 3, 0.0, 1).equals(aligned_db)


def test_full_gamma_flips_every_last_bit(aligned_db):
    leaked = random_flipping(aligned_db, 1, 1.0, 1, clamp=False)
    assert np.array_equal(leaked.codes ^ aligned_db.codes, np.ones_like(aligned_db.codes))


def test_flip_rate(binary_db):
    leaked = random_flipping(binary_db, 1, 0.8, 2, clamp=False)
    assert abs(float(np.mean(leaked.codes != binary_db.codes)) - 0.8) < 0.01


def test_resample_mode_changes_half_as_often(binary_db):
    leaked = random_flipping(binary_db, 1, 0.8, 2, mode="resample")
    assert abs(float(np.mean(leaked.codes != binary_db.codes)) - 0.4) < 0.01


@pytest.mark.parametrize("q", [0.1, 0.3, 0.8])
def test_double_flip_composes(binary_db, q):
    twice = random_flipping(random_flipping(binary_db, 1, q, 3), 1, q, 4)
    rate = float(np.mean(twice.codes != binary_db.codes))
    assert abs(rate - 2 * q * (1 - q)) < 0.01


def test_flips_stay_in_low_bits(aligned_db):
    leaked = random_flipping(aligned_db, 2, 0.5, 5, clamp=False)
    assert ((leaked.codes ^ aligned_db.codes) < 4).all()


def test_flipping_probability_validated(aligned_db):
    with pytest.raises(ParameterError):
        random_flipping(aligned_db, 1, 1.2)


def test_subset_extremes_and_rate():
    db = random_database([3, 3], 10_000, 23)
    assert subset_attack(db, 1.0, 0).equals(db)
    assert len(subset_attack(db, 0.0, 0)) == 0
    assert abs(len(subset_attack(db, 0.5, 1)) - 5000) <= 150


def test_subset_keeps_rows_unmodified():
    db = random_database([3, 3], 500, 24)
    kept = subset_attack(db, 0.4, 2)
    index = db.key_index
    assert np.array_equal(kept.codes, db.codes[[index[k] for k in kept.keys]])


def test_correlation_threshold_extremes(aligned_db):
    reference = pairwise_joints(aligned_db)
    assert correlation_attack(aligned_db, reference, 1.0, 2, 0).equals(aligned_db)
    assert correlation_targets(aligned_db, reference, 0.0).all()
    leaked = correlation_attack(aligned_db, reference, 0.0, 1, 0, clamp=False)
    assert abs(float(np.mean(leaked.codes != aligned_db.codes)) - 0.5) < 0.02


def test_correlation_needs_reference(aligned_db):
    with pytest.raises(ConfigurationError):
        apply_attack(aligned_db, AttackConfig("correlation", tau=0.1), 1)
    partial = {(0, 1): pairwise_joints(aligned_db)[(0, 1)]}
    with pytest.raises(ConfigurationError):
        correlation_targets(aligned_db, partial, 0.1)


def test_reference_accepts_transposed_pairs(aligned_db):
    full = pairwise_joints(aligned_db)
    half = {k: v for k, v in full.items() if k[0] < k[1]}
    assert np.array_equal(
        correlation_targets(aligned_db, full, 0.001), correlation_targets(aligned_db, half, 0.001)
    )


def test_qualified_fraction_decreases_with_p():
    db = correlated_database([4, 4, 4], 3000, 0.7, 1)
    reference = pairwise_joints(db)
    fractions = []
    for p in (0.05, 0.15, 0.27):
        params = params_from_epsilon(8, 1, flip_probability=p, selection="exact")
        runs = [
            correlation_targets(fingerprint_copy(db, params, run_key(0, "corr", r), b"sp"), reference, 0.001).mean()
            for r in range(5)
        ]
        fractions.append(float(np.mean(runs)))
    assert fractions[0] >= fractions[1] >= fractions[2], fractions


@pytest.mark.parametrize(
    "config",
    [
        AttackConfig("random_flipping", gamma_rnd=0.3, rng_seed=1),
        AttackConfig("subset", gamma_sub=0.6, rng_seed=1),
        AttackConfig("correlation", tau=0.0005, rng_seed=1),
    ],
)
def test_attacks_keep_keys_and_schema(aligned_db, config):
    leaked = apply_attack(aligned_db, config, 2, pairwise_joints(aligned_db))
    assert leaked.same_schema(aligned_db)
    assert set(leaked.keys) <= set(aligned_db.keys)
    assert leaked.in_domain()


def test_attack_config_validation():
    with pytest.raises(ParameterError):
        AttackConfig("superset")
    with pytest.raises(ParameterError):
        AttackConfig("subset", gamma_sub=-0.1)
    with pytest.raises(ParameterError):
        AttackConfig("correlation", tau=-1)
