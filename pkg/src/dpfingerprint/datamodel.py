"""Integer-encoded categorical tables with immutable primary keys."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import IntegrityError, ParameterError, PreconditionError, SchemaError

SENSITIVITY_MODES = ("global", "restricted")


@dataclass(frozen=True)
class AttributeDomain:
    """Ordered list of category labels for one attribute.

    Labels are encoded as their position in ``values``; the declared order
    is what distances between codes are measured in.
    """

    name: str
    values: tuple

    def __post_init__(self):
        values = tuple(str(v) for v in self.values)
        if not values:
            raise SchemaError(f"attribute {self.name!r} has an empty domain")
        dupes = [v for v, n in Counter(values).items() if n > 1]
        if dupes:
            raise SchemaError(f"attribute {self.name!r} repeats values {dupes}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_lookup", {v: i for i, v in enumerate(values)})

    @property
    def size(self) -> int:
        return len(self.values)

    @property
    def max_code(self) -> int:
        return len(self.values) - 1

    @property
    def bit_width(self) -> int:
        """Number of bits needed to write the largest code (at least 1)."""
        return max(1, self.max_code.bit_length())

    def encode(self, label) -> int:
        try:
            return self._lookup[str(label)]
        except KeyError:
            raise SchemaError(
                f"value {label!r} is not in the domain of attribute {self.name!r}"
            ) from None

    def decode(self, code: int) -> str:
        if not 0 <= code <= self.max_code:
            raise SchemaError(
                f"code {code} is outside the domain of attribute {self.name!r}"
            )
        return self.values[code]


@dataclass(frozen=True)
class Record:
    primary_key: str
    entries: tuple


@dataclass(frozen=True)
class SensitivitySpec:
    delta: int
    mode: str = "global"

    def __post_init__(self):
        if self.mode not in SENSITIVITY_MODES:
            raise ParameterError(f"unknown sensitivity mode {self.mode!r}")
        if int(self.delta) != self.delta or self.delta < 1:
            raise ParameterError(f"sensitivity must be a positive integer, got {self.delta}")


class RelationalDatabase:
    """A table of N records over T categorical attributes.

    Codes are stored column-aligned in a read-only ``(N, T)`` integer array.
    Keys and the optional label column travel with the rows but are never
    fingerprinted. Raw mechanism output may hold codes above an attribute's
    largest code until :func:`~dpfingerprint.fingerprinter.postprocess_domain`
    is applied; build such tables with ``validate=False``.
    """

    def __init__(
        self,
        domains: Sequence[AttributeDomain],
        keys: Sequence[str],
        codes,
        label_column: str | None = None,
        labels: Sequence[str] | None = None,
        validate: bool = True,
    ):
        self.domains = tuple(domains)
        self.keys = tuple(str(k) for k in keys)
        arr = np.array(codes, dtype=np.int64, copy=True)
        if arr.size == 0:
            arr = arr.reshape(len(self.keys), len(self.domains))
        if arr.ndim != 2 or arr.shape != (len(self.keys), len(self.domains)):
            raise SchemaError(
                f"code matrix has shape {arr.shape}, expected "
                f"({len(self.keys)}, {len(self.domains)})"
            )
        arr.setflags(write=False)
        self.codes = arr
        self.label_column = label_column
        if labels is not None:
            labels = tuple(str(v) for v in labels)
            if len(labels) != len(self.keys):
                raise SchemaError("label column length differs from record count")
        self.labels = labels
        self._key_index = None
        if len(set(self.keys)) != len(self.keys):
            dupes = [k for k, n in Counter(self.keys).items() if n > 1][:5]
            raise IntegrityError(f"duplicate primary keys, e.g. {dupes}")
        if validate and not self.in_domain():
            raise SchemaError("some entries fall outside their attribute domain")

    # shape and metadata
    def __len__(self):
        return len(self.keys)

    @property
    def n_records(self) -> int:
        return len(self.keys)

    @property
    def n_attributes(self) -> int:
        return len(self.domains)

    @property
    def attribute_names(self) -> list[str]:
        return [d.name for d in self.domains]

    @property
    def max_codes(self) -> np.ndarray:
        return np.array([d.max_code for d in self.domains], dtype=np.int64)

    @property
    def bit_widths(self) -> np.ndarray:
        return np.array([d.bit_width for d in self.domains], dtype=np.int64)

    @property
    def key_index(self) -> dict:
        if self._key_index is None:
            self._key_index = {k: i for i, k in enumerate(self.keys)}
        return self._key_index

    def in_domain(self) -> bool:
        if self.codes.size == 0:
            return True
        return bool(((self.codes >= 0) & (self.codes <= self.max_codes)).all())

    def record(self, i: int) -> Record:
        return Record(self.keys[i], tuple(int(v) for v in self.codes[i]))

    @property
    def records(self) -> list[Record]:
        return [self.record(i) for i in range(len(self.keys))]

    # derived tables
    def with_codes(self, codes, validate: bool = False) -> "RelationalDatabase":
        """Same keys, labels and schema with a replacement code matrix."""
        return RelationalDatabase(
            self.domains, self.keys, codes, self.label_column, self.labels, validate
        )

    def subset(self, rows) -> "RelationalDatabase":
        """Rows selected by a boolean mask or an index array, order preserved."""
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)
        keys = [self.keys[i] for i in rows]
        labels = None if self.labels is None else [self.labels[i] for i in rows]
        return RelationalDatabase(
            self.domains, keys, self.codes[rows], self.label_column, labels, validate=False
        )

    def same_schema(self, other: "RelationalDatabase") -> bool:
        return self.domains == other.domains

    def equals(self, other: "RelationalDatabase") -> bool:
        return (
            self.domains == other.domains
            and self.keys == other.keys
            and self.labels == other.labels
            and np.array_equal(self.codes, other.codes)
        )

    def __repr__(self):
        return (
            f"RelationalDatabase(n_records={self.n_records}, "
            f"attributes={self.attribute_names})"
        )


def encode_database(
    rows: Iterable[Mapping[str, str]],
    domains: Sequence[AttributeDomain],
    key_column: str,
    label_column: str | None = None,
) -> RelationalDatabase:
    """Encode raw text rows into a :class:`RelationalDatabase`.

    Args:
        rows: mappings from column name to cell text.
        domains: attribute domains in fingerprinting order.
        key_column: name of the primary key column.
        label_column: optional class column carried through unchanged.

    Raises:
        SchemaError: a cell is not in its declared domain or a column is missing.
        IntegrityError: a primary key repeats.
    """
    keys, labels, codes = [], [], []
    for n, row in enumerate(rows):
        try:
            keys.append(str(row[key_column]))
            codes.append([d.encode(row[d.name]) for d in domains])
            if label_column is not None:
                labels.append(str(row[label_column]))
        except KeyError as exc:
            raise SchemaError(f"row {n} is missing column {exc.args[0]!r}") from None
    codes = np.array(codes, dtype=np.int64).reshape(len(keys), len(domains))
    return RelationalDatabase(
        domains, keys, codes, label_column, labels if label_column else None
    )


def decode_database(db: RelationalDatabase, key_column: str = "id") -> list[dict]:
    """Inverse of :func:`encode_database`; requires in-domain codes."""
    out = []
    for i, key in enumerate(db.keys):
        row = {key_column: key}
        for d, code in zip(db.domains, db.codes[i]):
            row[d.name] = d.decode(int(code))
        if db.label_column is not None:
            row[db.label_column] = db.labels[i]
        out.append(row)
    return out


def global_sensitivity(domains: Sequence[AttributeDomain]) -> int:
    return max([1] + [d.max_code for d in domains])


def compute_sensitivity(
    db: RelationalDatabase, mode: str = "global", override: int | None = None
) -> SensitivitySpec:
    """Sensitivity of single-entry changes.

    Global mode takes the widest attribute range. Restricted mode uses a
    caller-supplied value which may not exceed the global one.
    """
    full = global_sensitivity(db.domains)
    if override is None:
        if mode == "restricted":
            raise ParameterError("restricted sensitivity needs an explicit value")
        return SensitivitySpec(full, "global")
    if int(override) != override or override < 1:
        raise ParameterError(f"sensitivity override must be a positive integer, got {override}")
    if override > full:
        raise ParameterError(
            f"sensitivity override {override} exceeds the global value {full}"
        )
    return SensitivitySpec(int(override), "restricted" if override < full else mode)


def make_neighbor(
    db: RelationalDatabase, row: int, attribute: int, new_value: int, delta: int
) -> RelationalDatabase:
    """Copy of ``db`` with one entry replaced, within sensitivity ``delta``."""
    domain = db.domains[attribute]
    if not 0 <= new_value <= domain.max_code:
        raise PreconditionError(
            f"value {new_value} outside domain 0..{domain.max_code} of {domain.name!r}"
        )
    old = int(db.codes[row, attribute])
    if abs(new_value - old) > delta:
        raise PreconditionError(
            f"changing {old} to {new_value} exceeds sensitivity {delta}"
        )
    codes = db.codes.copy()
    codes[row, attribute] = new_value
    return db.with_codes(codes, validate=True)


def pairwise_diff_fractions(
    db: RelationalDatabase, by_label: bool = True
) -> dict[str, dict[int, float]]:
    """Share of each absolute code difference among same-class record pairs.

    For every class and attribute all ordered pairs of records are counted,
    a record paired with itself included, and the counts are pooled over
    attributes. Without labels (or with ``by_label=False``) the whole table
    is one class named ``"*"``.
    """
    if len(db) == 0:
        raise PreconditionError("pairwise differences need a non-empty database")
    if by_label and db.labels is not None:
        groups: dict[str, list[int]] = {}
        for i, lab in enumerate(db.labels):
            groups.setdefault(lab, []).append(i)
    else:
        groups = {"*": list(range(len(db)))}

    result = {}
    for label, rows in groups.items():
        totals = Counter()
        block = db.codes[rows]
        for t, domain in enumerate(db.domains):
            counts = np.bincount(block[:, t], minlength=domain.size).astype(np.int64)
            outer = np.outer(counts, counts)
            for a in range(domain.size):
                for b in range(domain.size):
                    if outer[a, b]:
                        totals[abs(a - b)] += int(outer[a, b])
        n_pairs = sum(totals.values())
        result[label] = {d: totals[d] / n_pairs for d in sorted(totals)}
    return result
