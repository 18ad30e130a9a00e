"""Seeded simulation runners behind the ``report`` command and the reproduction tests."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .attacks import random_flipping
from .crypto_rand import SecretKey, gen_fingerprint, internal_id
from .datamodel import RelationalDatabase
from .extractor import extract_fingerprint
from .fingerprinter import fingerprint_copy, params_from_epsilon
from .inference import frequency_attack
from .svt_sharing import SvtConfig, share_multi
from .utility_metrics import changed_entry_fraction, two_stage_baseline, variance_change


def run_key(seed, *labels) -> SecretKey:
    """Deterministic per-run owner key derived from a seed and labels."""
    text = ":".join(str(v) for v in (seed,) + labels)
    return SecretKey(hashlib.sha256(text.encode()).digest())


@dataclass(frozen=True)
class RobustnessRow:
    epsilon: float
    flip_probability: float
    changed_fraction: float
    matches: tuple

    @property
    def mean_matches(self) -> float:
        return float(np.mean(self.matches))


def robustness_runs(
    db: RelationalDatabase,
    epsilon: float,
    gamma_rnd: float,
    runs: int,
    seed: int = 0,
    sensitivity: int = 1,
    selection: str = "floor",
    flip_mode: str = "flip",
) -> RobustnessRow:
    """Fingerprint, attack with random flipping and count bits matching the true recipient."""
    params = params_from_epsilon(epsilon, sensitivity, selection=selection)
    matches, changed = [], []
    for run in range(runs):
        key = run_key(seed, "robustness", epsilon, run)
        sp_id = internal_id(key, 1, 1)
        copy = fingerprint_copy(db, params, key, sp_id)
        changed.append(changed_entry_fraction(db, copy))
        leaked = random_flipping(copy, params.marked_bits, gamma_rnd, [seed, run], mode=flip_mode)
        found = extract_fingerprint(db, leaked, params, key)
        matches.append(found.matches(gen_fingerprint(key, sp_id)))
    return RobustnessRow(epsilon, params.flip_probability, float(np.mean(changed)), tuple(matches))


@dataclass(frozen=True)
class InfCapRow:
    epsilon: float
    run: int
    worst_gap: float
    max_infcap: float
    violations: int


def infcap_runs(db, epsilons, runs, seed=0, selection="floor") -> list[InfCapRow]:
    """Frequency attacker against every attribute of independently fingerprinted copies."""
    rows = []
    for eps in epsilons:
        params = params_from_epsilon(eps, 1, selection=selection)
        for run in range(runs):
            # one key per run: its position plan is shared across budgets
            key = run_key(seed, "infcap", run)
            copy = fingerprint_copy(db, params, key, internal_id(key, 1, 1))
            checks = [c for t in range(db.n_attributes) for c in frequency_attack(db, copy, t, eps)]
            rows.append(InfCapRow(
                eps, run,
                max(c.infcap - c.bound for c in checks),
                max(c.infcap for c in checks),
                sum(not c.contained for c in checks),
            ))
    return rows


def svt_trial_counts(
    db: RelationalDatabase,
    ratio: tuple,
    comparison_budget: float,
    epsilon: float,
    recipients: int,
    replications: int,
    seed: int = 0,
    **config_options,
) -> list[int]:
    """Total trials needed to serve ``recipients`` for each replication."""
    share2 = comparison_budget * ratio[0] / (ratio[0] + ratio[1])
    totals = []
    for rep in range(replications):
        config = SvtConfig(
            epsilon=epsilon, epsilon2=share2, epsilon3=comparison_budget - share2,
            recipients=recipients, rng_seed=seed * 1000 + rep, **config_options,
        )
        key = run_key(seed, "svt", rep)
        _, ledger = share_multi(db, config, key)
        totals.append(ledger.total_trials)
    return totals


@dataclass(frozen=True)
class UtilityRow:
    epsilon: float
    ours_variance_change: tuple
    baseline_variance_change: tuple
    ours_changed: float
    baseline_changed: float

    @property
    def attributes_ours_smaller(self) -> int:
        return int(sum(abs(a) < abs(b) for a, b in zip(self.ours_variance_change, self.baseline_variance_change)))


def utility_comparison(db, epsilon, seed=0, sensitivity=1, selection="exact") -> UtilityRow:
    key = run_key(seed, "utility", epsilon)
    sp_id = internal_id(key, 1, 1)
    ours = fingerprint_copy(db, params_from_epsilon(epsilon, sensitivity, selection=selection), key, sp_id)
    base = two_stage_baseline(db, epsilon, key, sp_id, sensitivity=sensitivity,
                              rng_seed=seed, selection=selection)
    return UtilityRow(
        epsilon,
        tuple(variance_change(db, ours).tolist()),
        tuple(variance_change(db, base).tolist()),
        changed_entry_fraction(db, ours),
        changed_entry_fraction(db, base),
    )
