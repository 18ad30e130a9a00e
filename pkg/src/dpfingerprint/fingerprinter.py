"""Bit-level randomized-response fingerprint insertion for one recipient."""

from __future__ import annotations

import hashlib
import math
import weakref
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from .crypto_rand import FINGERPRINT_BITS, SecretKey, gen_fingerprint, position_streams
from .datamodel import RelationalDatabase
from .errors import ParameterError

SELECTION_RULES = ("floor", "exact")
_TWO64 = 2.0 ** 64


def bits_for_sensitivity(sensitivity: int) -> int:
    """Number of low-order bits that must be randomized to cover ``sensitivity``."""
    if sensitivity < 1:
        raise ParameterError("sensitivity must be at least 1")
    return int(sensitivity).bit_length()


def min_flip_probability(epsilon: float, marked_bits: int) -> float:
    """Smallest per-bit flip probability giving ``epsilon`` over ``marked_bits`` bits."""
    return float(expit(-epsilon / marked_bits))


@dataclass(frozen=True)
class FingerprintParams:
    """Privacy and marking parameters shared by insertion and extraction.

    Attributes:
        epsilon: entry-level privacy budget.
        sensitivity: largest code change between neighbouring entries.
        marked_bits: number of low-order bits eligible for marking.
        flip_probability: per-bit mark probability, at least the privacy minimum.
        length: fingerprint length in bits.
        selection: ``"floor"`` selects a position when its first stream value
            is divisible by ``floor(1 / (2 p))``; ``"exact"`` selects it when the
            value, read as a fraction of 2**64, is below ``2 p``.
    """

    epsilon: float
    sensitivity: int
    marked_bits: int
    flip_probability: float
    length: int = FINGERPRINT_BITS
    selection: str = "floor"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if self.marked_bits != bits_for_sensitivity(self.sensitivity):
            raise ParameterError(
                f"marked_bits={self.marked_bits} does not match sensitivity {self.sensitivity}"
            )
        p = self.flip_probability
        if not 0 < p < 0.5:
            raise ParameterError(f"flip probability must lie in (0, 0.5), got {p}")
        floor_p = min_flip_probability(self.epsilon, self.marked_bits)
        if p < floor_p * (1 - 1e-12):
            raise ParameterError(
                f"flip probability {p} is below the minimum {floor_p} for epsilon={self.epsilon}"
            )
        if self.length < 1:
            raise ParameterError("fingerprint length must be positive")
        if self.selection not in SELECTION_RULES:
            raise ParameterError(f"selection must be one of {SELECTION_RULES}")

    @property
    def selection_modulus(self) -> int:
        return int(math.floor(1.0 / (2.0 * self.flip_probability)))

    @property
    def selection_probability(self) -> float:
        if self.selection == "floor":
            return 1.0 / self.selection_modulus
        return 2.0 * self.flip_probability


def params_from_epsilon(
    epsilon: float,
    sensitivity: int = 1,
    length: int = FINGERPRINT_BITS,
    flip_probability: float | None = None,
    selection: str = "floor",
) -> FingerprintParams:
    """Parameters at the privacy-minimal flip probability, or a larger override."""
    if not epsilon > 0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}")
    marked_bits = bits_for_sensitivity(sensitivity)
    p = min_flip_probability(epsilon, marked_bits) if flip_probability is None else flip_probability
    return FingerprintParams(epsilon, int(sensitivity), marked_bits, p, length, selection)


class Positions(NamedTuple):
    rows: np.ndarray
    attributes: np.ndarray
    bits: np.ndarray

    def __len__(self):
        return len(self.rows)

    def as_set(self) -> set:
        return set(zip(self.rows.tolist(), self.attributes.tolist(), self.bits.tolist()))


def _attr_bits(db: RelationalDatabase, marked_bits: int) -> list[tuple[int, int]]:
    return [
        (t, k)
        for t, width in enumerate(db.bit_widths.tolist())
        for k in range(1, min(marked_bits, width) + 1)
    ]


def fingerprintable_set(db: RelationalDatabase, marked_bits: int) -> Positions:
    """Every (row, attribute, bit) that may carry a mark; bits count from 1 at the LSB."""
    pairs = _attr_bits(db, marked_bits)
    n = db.n_records
    attrs = np.array([t for t, _ in pairs], dtype=np.int64)
    bits = np.array([k for _, k in pairs], dtype=np.int64)
    return Positions(
        np.repeat(np.arange(n, dtype=np.int64), len(pairs)),
        np.tile(attrs, n),
        np.tile(bits, n),
    )


@dataclass(frozen=True)
class MarkPlan:
    """Keyed stream values for every fingerprintable position of a table.

    The values depend only on the key, primary keys and attribute widths,
    not on the recipient, so one plan serves every recipient and extraction.
    """

    positions: Positions
    selector: np.ndarray
    mask: np.ndarray
    index_stream: np.ndarray

    @classmethod
    def build(cls, db: RelationalDatabase, key: SecretKey, marked_bits: int) -> "MarkPlan":
        pairs = _attr_bits(db, marked_bits)
        u1, u2, u3 = position_streams(key, db.keys, [(t + 1, k) for t, k in pairs])
        return cls(
            fingerprintable_set(db, marked_bits),
            u1.reshape(-1),
            (u2.reshape(-1) & np.uint64(1)).astype(np.uint8),
            u3.reshape(-1),
        )

    def selected(self, params: FingerprintParams) -> np.ndarray:
        if params.selection == "floor":
            return self.selector % np.uint64(params.selection_modulus) == 0
        threshold = min(int(2.0 * params.flip_probability * _TWO64), 2 ** 64 - 1)
        return self.selector < np.uint64(threshold)

    def indices(self, length: int) -> np.ndarray:
        return (self.index_stream % np.uint64(length)).astype(np.int64)


_PLAN_CACHE: "weakref.WeakKeyDictionary[RelationalDatabase, dict]" = weakref.WeakKeyDictionary()


def mark_plan(db: RelationalDatabase, key: SecretKey, marked_bits: int) -> MarkPlan:
    """Cached :meth:`MarkPlan.build` keyed on the table object."""
    per_db = _PLAN_CACHE.setdefault(db, {})
    slot = (hashlib.sha256(key.material).digest(), marked_bits)
    plan = per_db.get(slot)
    if plan is None:
        plan = MarkPlan.build(db, key, marked_bits)
        per_db[slot] = plan
    return plan


@dataclass(frozen=True)
class MarkDecision:
    row: int
    attribute: int
    bit: int
    mask: int
    index: int
    mark: int


class MarkSet:
    """Column view over the marks applied to one copy; iterates as MarkDecision."""

    def __init__(self, rows, attributes, bits, mask, index, mark):
        self.rows, self.attributes, self.bits = rows, attributes, bits
        self.mask, self.index, self.mark = mask, index, mark

    def __len__(self):
        return len(self.rows)

    def __getitem__(self, n) -> MarkDecision:
        return MarkDecision(
            int(self.rows[n]), int(self.attributes[n]), int(self.bits[n]),
            int(self.mask[n]), int(self.index[n]), int(self.mark[n]),
        )

    def __iter__(self):
        for n in range(len(self)):
            yield self[n]

    def to_list(self, keys=None) -> list[dict]:
        out = []
        for d in self:
            item = {
                "row": d.row, "attribute": d.attribute, "bit": d.bit,
                "mask": d.mask, "index": d.index, "mark": d.mark,
            }
            if keys is not None:
                item["primary_key"] = keys[d.row]
            out.append(item)
        return out


def insert_fingerprint(
    db: RelationalDatabase,
    params: FingerprintParams,
    key: SecretKey,
    internal_id: bytes,
    plan: MarkPlan | None = None,
) -> tuple[RelationalDatabase, MarkSet]:
    """Mark one recipient's copy.

    Each selected position is XORed with ``mask ^ fingerprint[index]``. The
    returned table is raw mechanism output and may hold codes above a
    domain's largest value; see :func:`postprocess_domain`.
    """
    fingerprint = gen_fingerprint(key, internal_id, params.length)
    if plan is None:
        plan = mark_plan(db, key, params.marked_bits)
    chosen = plan.selected(params)
    pos = plan.positions
    rows, attrs, bits = pos.rows[chosen], pos.attributes[chosen], pos.bits[chosen]
    mask = plan.mask[chosen]
    index = plan.indices(params.length)[chosen]
    mark = mask ^ fingerprint.bits[index]

    flips = np.zeros(db.codes.shape, dtype=np.int64)
    # distinct bits of one entry never overlap, so adding is OR-ing
    np.add.at(flips, (rows, attrs), mark.astype(np.int64) << (bits - 1))
    marked = db.with_codes(db.codes ^ flips)
    return marked, MarkSet(rows, attrs, bits, mask, index, mark)


def postprocess_domain(db: RelationalDatabase) -> RelationalDatabase:
    """Clamp every code into ``0..max_code`` of its attribute."""
    if db.in_domain():
        return db
    clamped = np.clip(db.codes, 0, db.max_codes)
    return db.with_codes(clamped, validate=True)


def fingerprint_copy(
    db: RelationalDatabase,
    params: FingerprintParams,
    key: SecretKey,
    internal_id: bytes,
) -> RelationalDatabase:
    """Insert and clamp in one step; the table a recipient receives."""
    return postprocess_domain(insert_fingerprint(db, params, key, internal_id)[0])
