"""Task-independent utility measures and the two-stage comparison baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .attacks import pairwise_joints
from .crypto_rand import SecretKey
from .datamodel import RelationalDatabase
from .errors import AlignmentError, ParameterError, PreconditionError, SchemaError
from .fingerprinter import (
    FingerprintParams,
    bits_for_sensitivity,
    fingerprint_copy,
    params_from_epsilon,
)


def _aligned(original: RelationalDatabase, shared: RelationalDatabase) -> np.ndarray:
    """Shared codes reordered to the original row order."""
    if not original.same_schema(shared):
        raise AlignmentError("tables do not share a schema")
    if original.keys == shared.keys:
        return shared.codes
    if set(original.keys) != set(shared.keys) or len(original) != len(shared):
        raise AlignmentError("tables do not hold the same primary keys")
    index = shared.key_index
    return shared.codes[[index[k] for k in original.keys]]


def variance_change(original: RelationalDatabase, shared: RelationalDatabase) -> np.ndarray:
    """Per-attribute population variance of the shared codes minus that of the original."""
    shared_codes = _aligned(original, shared)
    return shared_codes.var(axis=0) - original.codes.var(axis=0)


def fingerprint_density(original: RelationalDatabase, shared: RelationalDatabase) -> float:
    """Sum of absolute code differences over all entries."""
    return float(np.abs(_aligned(original, shared) - original.codes).sum())


def changed_entry_fraction(original: RelationalDatabase, shared: RelationalDatabase) -> float:
    codes = _aligned(original, shared)
    return float((codes != original.codes).mean()) if codes.size else 0.0


@dataclass(frozen=True)
class QuerySpec:
    """Conjunction of ``attribute == value`` predicates projecting primary keys.

    Values are category labels, as written in the schema.
    """

    predicates: tuple

    def __post_init__(self):
        object.__setattr__(self, "predicates", tuple(tuple(p) for p in self.predicates))

    @classmethod
    def from_dict(cls, doc: dict) -> "QuerySpec":
        if "where" in doc:
            return cls(tuple((p["attribute"], p["value"]) for p in doc["where"]))
        return cls(tuple(doc.items()))

    def select(self, db: RelationalDatabase) -> set:
        names = db.attribute_names
        hit = np.ones(len(db), dtype=bool)
        for attr, label in self.predicates:
            if attr not in names:
                raise SchemaError(f"query names unknown attribute {attr!r}")
            t = names.index(attr)
            hit &= db.codes[:, t] == db.domains[t].encode(label)
        return {db.keys[i] for i in np.flatnonzero(hit)}


def query_accuracy(original: RelationalDatabase, shared: RelationalDatabase, query: QuerySpec) -> float:
    """Share of the original answer set that the shared copy also returns.

    An empty original answer scores 1 if the shared answer is empty too, else 0.
    """
    truth = query.select(original)
    found = query.select(shared)
    if not truth:
        return 1.0 if not found else 0.0
    return len(truth & found) / len(truth)


@dataclass(frozen=True)
class Distributions:
    marginals: list
    joints: dict

    def to_dict(self, names=None) -> dict:
        names = names or [str(i) for i in range(len(self.marginals))]
        return {
            "attributes": list(names),
            "marginals": [m.tolist() for m in self.marginals],
            "joints": [
                {"t": t, "z": z, "table": table.tolist()}
                for (t, z), table in sorted(self.joints.items())
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Distributions":
        marginals = [np.asarray(m, dtype=float) for m in doc.get("marginals", [])]
        joints = {(j["t"], j["z"]): np.asarray(j["table"], dtype=float) for j in doc["joints"]}
        return cls(marginals, joints)


def empirical_distributions(db: RelationalDatabase) -> Distributions:
    """Frequency estimates of every marginal and every ordered pairwise joint."""
    if len(db) == 0:
        raise PreconditionError("distributions need a non-empty table")
    marginals = [
        np.bincount(db.codes[:, t], minlength=d.size) / len(db)
        for t, d in enumerate(db.domains)
    ]
    return Distributions(marginals, pairwise_joints(db))


def k_randomized_response(db: RelationalDatabase, epsilon: float, rng_seed: int = 0) -> RelationalDatabase:
    """Keep each entry with probability ``e^eps / (e^eps + k - 1)``, else pick another value uniformly."""
    if not epsilon > 0:
        raise ParameterError("epsilon must be positive")
    rng = np.random.default_rng(rng_seed)
    codes = db.codes.copy()
    for t, domain in enumerate(db.domains):
        k = domain.size
        if k == 1:
            continue
        keep = 1.0 if math.isinf(epsilon) else math.exp(epsilon) / (math.exp(epsilon) + k - 1)
        change = rng.random(len(db)) >= keep
        shift = rng.integers(1, k, size=len(db))
        codes[change, t] = (codes[change, t] + shift[change]) % k
    return db.with_codes(codes, validate=True)


def two_stage_baseline(
    db: RelationalDatabase,
    epsilon: float,
    key: SecretKey,
    sp_id: bytes,
    marking_fraction: float | None = None,
    sensitivity: int = 1,
    rng_seed: int = 0,
    selection: str = "exact",
) -> RelationalDatabase:
    """Local randomized response on every entry, then fingerprinting at a fixed marking rate.

    Args:
        db: original table.
        epsilon: local privacy budget of the randomized-response stage.
        key: owner secret.
        sp_id: recipient internal ID used by the fingerprinting stage.
        marking_fraction: per-bit marking probability of the second stage.
            ``None`` matches the changed-entry fraction our own mechanism
            produces at ``epsilon`` on ``db`` with the same key and ID.
        sensitivity: sensitivity that fixes the number of marked bits.
        rng_seed: seed of the randomized-response stage.
        selection: selection rule of the fingerprinting stage.
    """
    if marking_fraction is None:
        ours = fingerprint_copy(db, params_from_epsilon(epsilon, sensitivity, selection=selection), key, sp_id)
        marking_fraction = float((ours.codes != db.codes).mean())
    perturbed = k_randomized_response(db, epsilon, rng_seed)
    if marking_fraction <= 0:
        return perturbed
    marking = FingerprintParams(
        math.inf, sensitivity, bits_for_sensitivity(sensitivity),
        min(marking_fraction, 0.4999999), selection=selection,
    )
    return fingerprint_copy(perturbed, marking, key, sp_id)
