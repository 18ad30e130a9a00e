"""Majority-vote fingerprint recovery from a leaked copy and recipient accusation."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .crypto_rand import FingerprintBits, SecretKey
from .datamodel import RelationalDatabase
from .errors import ParameterError, SchemaError
from .fingerprinter import FingerprintParams, MarkPlan, mark_plan

UNRESOLVED = -1


class UnknownRecordWarning(UserWarning):
    """A leaked record's primary key is not in the original table."""


@dataclass(frozen=True)
class ExtractionResult:
    zero_votes: np.ndarray
    one_votes: np.ndarray

    @property
    def length(self) -> int:
        return len(self.zero_votes)

    @property
    def resolved(self) -> np.ndarray:
        return (self.zero_votes + self.one_votes) > 0

    @property
    def bits(self) -> np.ndarray:
        """Recovered bits; ties go to 0 and positions without votes are ``UNRESOLVED``."""
        out = (self.one_votes > self.zero_votes).astype(np.int8)
        out[~self.resolved] = UNRESOLVED
        return out

    @property
    def resolved_fraction(self) -> float:
        return float(self.resolved.mean()) if self.length else 0.0

    def matches(self, fingerprint: FingerprintBits) -> int:
        if len(fingerprint) != self.length:
            raise ParameterError("candidate fingerprint length differs from extraction")
        return int(np.count_nonzero(self.bits == fingerprint.bits.astype(np.int8)))

    def to_string(self) -> str:
        return "".join("?" if b == UNRESOLVED else str(b) for b in self.bits.tolist())

    def to_dict(self) -> dict:
        return {
            "length": self.length,
            "zero_votes": self.zero_votes.tolist(),
            "one_votes": self.one_votes.tolist(),
            "bits": self.to_string(),
            "resolved_fraction": self.resolved_fraction,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExtractionResult":
        return cls(
            np.asarray(doc["zero_votes"], dtype=np.int64),
            np.asarray(doc["one_votes"], dtype=np.int64),
        )


def extract_fingerprint(
    original: RelationalDatabase,
    leaked: RelationalDatabase,
    params: FingerprintParams,
    key: SecretKey,
    plan: MarkPlan | None = None,
) -> ExtractionResult:
    """Replay the keyed selection over the leaked rows and vote per index.

    Rows are matched by primary key; rows absent from the leak cast no
    votes and leaked rows unknown to the original are skipped with an
    :class:`UnknownRecordWarning`.
    """
    if not original.same_schema(leaked):
        raise SchemaError("leaked table does not share the original schema")
    leak_row_of = np.full(original.n_records, -1, dtype=np.int64)
    unknown = 0
    index_of = original.key_index
    for j, k in enumerate(leaked.keys):
        i = index_of.get(k)
        if i is None:
            unknown += 1
        else:
            leak_row_of[i] = j
    if unknown:
        warnings.warn(f"skipped {unknown} leaked records with unknown primary keys",
                      UnknownRecordWarning, stacklevel=2)

    if plan is None:
        plan = mark_plan(original, key, params.marked_bits)
    pos = plan.positions
    voting = plan.selected(params) & (leak_row_of[pos.rows] >= 0)
    rows, attrs, bits = pos.rows[voting], pos.attributes[voting], pos.bits[voting]
    leaked_vals = leaked.codes[leak_row_of[rows], attrs]
    original_vals = original.codes[rows, attrs]
    mark = ((leaked_vals ^ original_vals) >> (bits - 1)) & 1
    recovered = plan.mask[voting].astype(np.int64) ^ mark
    index = plan.indices(params.length)[voting]

    ones = np.bincount(index, weights=recovered, minlength=params.length).astype(np.int64)
    total = np.bincount(index, minlength=params.length).astype(np.int64)
    return ExtractionResult(total - ones, ones)


@dataclass(frozen=True)
class AccusationVerdict:
    matches: dict = field(default_factory=dict)
    accused: str | None = None
    threshold: int = 0

    def to_dict(self) -> dict:
        return {"matches": dict(self.matches), "accused": self.accused, "threshold": self.threshold}


def detect_traitor(
    extraction: ExtractionResult,
    candidates: Mapping[str, FingerprintBits],
    threshold: int,
) -> AccusationVerdict:
    """Accuse the single best-matching recipient if it reaches ``threshold``.

    Unresolved bits never match. A tie for the top count means nobody is
    accused.
    """
    matches = {sp: extraction.matches(fp) for sp, fp in candidates.items()}
    accused = None
    if matches:
        best = max(matches.values())
        leaders = [sp for sp, m in matches.items() if m == best]
        if best >= threshold and len(leaders) == 1:
            accused = leaders[0]
    return AccusationVerdict(matches, accused, threshold)


def match_threshold_D(recipients: int, length: int) -> int:
    """Smallest match count an innocent recipient reaches with chance at most 1/C.

    The count is never below a strict majority of ``length``. Uses the
    exact Binomial(length, 1/2) upper tail in integer arithmetic.
    """
    if recipients < 1 or length < 1:
        raise ParameterError("need at least one recipient and one fingerprint bit")
    total = 2 ** length
    tail = 0
    tails = [0] * (length + 2)
    for d in range(length, -1, -1):
        tail += math.comb(length, d)
        tails[d] = tail
    for d in range(length // 2 + 1, length + 1):
        if tails[d] * recipients <= total:
            return d
    raise ParameterError(
        f"a {length}-bit fingerprint cannot keep chance matches below 1/{recipients}"
    )
