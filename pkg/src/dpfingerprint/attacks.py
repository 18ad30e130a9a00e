"""Simulated attacks a dishonest recipient may run before leaking its copy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .datamodel import RelationalDatabase
from .errors import ConfigurationError, ParameterError

ATTACK_KINDS = ("random_flipping", "subset", "correlation")
FLIP_MODES = ("flip", "resample")

PairwiseJoints = Mapping[tuple, np.ndarray]


@dataclass(frozen=True)
class AttackConfig:
    """Selects one attack; only the parameters of that attack are read.

    ``flip_mode`` chooses how random flipping treats a touched bit:
    ``"flip"`` inverts it, ``"resample"`` replaces it with a fair coin (so it
    changes only half the time).
    """

    kind: str
    gamma_rnd: float = 0.0
    gamma_sub: float = 1.0
    tau: float = 0.0
    rng_seed: int = 0
    flip_mode: str = "flip"

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ParameterError(f"attack kind must be one of {ATTACK_KINDS}")
        if self.kind == "random_flipping":
            _check_probability("gamma_rnd", self.gamma_rnd)
            if self.flip_mode not in FLIP_MODES:
                raise ParameterError(f"flip_mode must be one of {FLIP_MODES}")
        if self.kind == "subset":
            _check_probability("gamma_sub", self.gamma_sub)
        if self.kind == "correlation" and self.tau < 0:
            raise ParameterError("tau must be non-negative")


def _check_probability(name, value):
    if not 0.0 <= value <= 1.0:
        raise ParameterError(f"{name} must lie in [0, 1], got {value}")


def _low_bit_flips(db: RelationalDatabase, marked_bits: int, prob, rng) -> np.ndarray:
    """XOR masks flipping each eligible low bit with probability ``prob``.

    ``prob`` is a scalar or an ``(N, T)`` array of per-entry probabilities.
    """
    n, t = db.codes.shape
    widths = np.minimum(db.bit_widths, marked_bits)
    masks = np.zeros((n, t), dtype=np.int64)
    for k in range(1, int(widths.max(initial=0)) + 1):
        hit = rng.random((n, t)) < prob
        hit &= (widths >= k)[None, :]
        masks |= hit.astype(np.int64) << (k - 1)
    return masks


def _finish(db, codes, clamp):
    if clamp:
        codes = np.clip(codes, 0, db.max_codes)
    return db.with_codes(codes, validate=clamp)


def random_flipping(
    db: RelationalDatabase,
    marked_bits: int,
    gamma_rnd: float,
    rng_seed: int = 0,
    mode: str = "flip",
    clamp: bool = True,
) -> RelationalDatabase:
    """Touch each of the low ``min(K, K_t)`` bits of every entry with probability ``gamma_rnd``."""
    _check_probability("gamma_rnd", gamma_rnd)
    if mode not in FLIP_MODES:
        raise ParameterError(f"mode must be one of {FLIP_MODES}")
    prob = gamma_rnd if mode == "flip" else gamma_rnd / 2.0
    rng = np.random.default_rng(rng_seed)
    flips = _low_bit_flips(db, marked_bits, prob, rng)
    return _finish(db, db.codes ^ flips, clamp)


def subset_attack(db: RelationalDatabase, gamma_sub: float, rng_seed: int = 0) -> RelationalDatabase:
    """Keep each record independently with probability ``gamma_sub``."""
    _check_probability("gamma_sub", gamma_sub)
    rng = np.random.default_rng(rng_seed)
    return db.subset(rng.random(db.n_records) < gamma_sub)


def pairwise_joints(db: RelationalDatabase) -> dict:
    """Empirical joint table for every ordered attribute pair ``(t, z)``, ``t != z``."""
    n, t_count = db.codes.shape
    out = {}
    for t in range(t_count):
        for z in range(t_count):
            if t == z:
                continue
            size_t, size_z = db.domains[t].size, db.domains[z].size
            flat = db.codes[:, t] * size_z + db.codes[:, z]
            table = np.bincount(flat, minlength=size_t * size_z).reshape(size_t, size_z)
            out[(t, z)] = table / n if n else table.astype(float)
    return out


def correlation_targets(
    db: RelationalDatabase, reference: PairwiseJoints, tau: float
) -> np.ndarray:
    """Boolean ``(N, T)`` mask of entries the correlation attacker will modify.

    An entry with value ``v`` in attribute ``t`` qualifies when, for every
    other attribute ``z`` and every value ``w`` of ``z``, the observed joint
    frequency of ``(v, w)`` differs from the reference by at least ``tau``.
    """
    observed = pairwise_joints(db)
    n, t_count = db.codes.shape
    targets = np.zeros((n, t_count), dtype=bool)
    for t in range(t_count):
        ok = np.ones(db.domains[t].size, dtype=bool)
        for z in range(t_count):
            if z == t:
                continue
            ref = _reference_table(reference, t, z, observed[(t, z)].shape)
            gap = np.abs(observed[(t, z)] - ref)
            ok &= (gap >= tau).all(axis=1)
        targets[:, t] = ok[db.codes[:, t]]
    return targets


def _reference_table(reference, t, z, shape):
    if (t, z) in reference:
        table = np.asarray(reference[(t, z)], dtype=float)
    elif (z, t) in reference:
        table = np.asarray(reference[(z, t)], dtype=float).T
    else:
        raise ConfigurationError(f"reference joint distribution for attributes ({t}, {z}) is missing")
    if table.shape != shape:
        raise ConfigurationError(
            f"reference joint for ({t}, {z}) has shape {table.shape}, expected {shape}"
        )
    return table


def correlation_attack(
    db: RelationalDatabase,
    reference: PairwiseJoints,
    tau: float,
    marked_bits: int,
    rng_seed: int = 0,
    clamp: bool = True,
) -> RelationalDatabase:
    """Randomize low bits of entries whose joint frequencies look disturbed."""
    if tau < 0:
        raise ParameterError("tau must be non-negative")
    targets = correlation_targets(db, reference, tau)
    rng = np.random.default_rng(rng_seed)
    flips = _low_bit_flips(db, marked_bits, np.where(targets, 0.5, 0.0), rng)
    return _finish(db, db.codes ^ flips, clamp)


def apply_attack(
    db: RelationalDatabase,
    config: AttackConfig,
    marked_bits: int,
    reference: PairwiseJoints | None = None,
) -> RelationalDatabase:
    if config.kind == "random_flipping":
        return random_flipping(db, marked_bits, config.gamma_rnd, config.rng_seed, config.flip_mode)
    if config.kind == "subset":
        return subset_attack(db, config.gamma_sub, config.rng_seed)
    if reference is None:
        raise ConfigurationError("the correlation attack needs reference joint distributions")
    return correlation_attack(db, reference, config.tau, marked_bits, config.rng_seed)
