"""Empirical attribute-inference attackers checked against the posterior bound."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamodel import RelationalDatabase
from .errors import PreconditionError
from .theory import infcap_bound


@dataclass(frozen=True)
class InfCapCheck:
    target: int
    alternative: int
    infcap: float
    bound: float

    @property
    def contained(self) -> bool:
        return self.infcap <= self.bound + 1e-12


def _column_pair(original, released, attribute):
    if original.keys != released.keys:
        index = released.key_index
        released_col = released.codes[[index[k] for k in original.keys], attribute]
    else:
        released_col = released.codes[:, attribute]
    if len(original) < 2:
        raise PreconditionError("inference checks need at least two records")
    return original.codes[:, attribute], released_col


def frequency_attack(
    original: RelationalDatabase,
    released: RelationalDatabase,
    attribute: int,
    epsilon: float,
) -> list[InfCapCheck]:
    """Frequency attacker: guesses a target value by its share in the rest of the released column.

    For each target record the attacker's estimate for value ``a`` is the
    frequency of ``a`` among the other released entries, and its prior odds
    of ``a`` against ``b`` are the ratio of their counts among the other
    original entries. Every ordered value pair ``(a, b)`` is checked, and
    for each pair the worst target record is reported.
    """
    orig_col, rel_col = _column_pair(original, released, attribute)
    size = original.domains[attribute].size
    n = len(orig_col)
    orig_counts = np.bincount(orig_col, minlength=size)
    rel_counts = np.bincount(rel_col, minlength=size)
    combos = set(zip(orig_col.tolist(), rel_col.tolist()))

    worst: dict[tuple[int, int], InfCapCheck] = {}
    for own_orig, own_rel in combos:
        prior = orig_counts - np.eye(size, dtype=np.int64)[own_orig]
        estimate = (rel_counts - np.eye(size, dtype=np.int64)[own_rel]) / (n - 1)
        for a in range(size):
            for b in range(size):
                if a == b or prior[a] == 0 or prior[b] == 0:
                    continue
                bound = infcap_bound(prior[a] / prior[b], epsilon)
                check = InfCapCheck(a, b, float(estimate[a]), bound)
                old = worst.get((a, b))
                if old is None or check.infcap - check.bound > old.infcap - old.bound:
                    worst[(a, b)] = check
    return [worst[k] for k in sorted(worst)]


def posterior_attack(
    original: RelationalDatabase,
    released: RelationalDatabase,
    attribute: int,
    epsilon: float,
    sensitivity: int,
) -> list[InfCapCheck]:
    """Two-hypothesis posterior attacker using the release of the target itself.

    The attacker knows every other record's original and released values,
    estimates how often each original value turns into each released value,
    and computes the posterior of ``a`` against a neighbouring value ``b``
    (``|a - b| <= sensitivity``) given the target's released value. The
    prior odds are the ratio of the two values' counts in the rest of the
    original column. Reports the worst target for every ordered pair.
    """
    orig_col, rel_col = _column_pair(original, released, attribute)
    size = original.domains[attribute].size
    out_size = int(max(rel_col.max(initial=0) + 1, size))
    table = np.zeros((size, out_size), dtype=np.int64)
    np.add.at(table, (orig_col, rel_col), 1)
    orig_counts = table.sum(axis=1)

    worst: dict[tuple[int, int], InfCapCheck] = {}
    for own_orig, own_rel in set(zip(orig_col.tolist(), rel_col.tolist())):
        rest = table.copy()
        rest[own_orig, own_rel] -= 1
        prior = orig_counts.copy()
        prior[own_orig] -= 1
        for a in range(size):
            for b in range(size):
                if a == b or abs(a - b) > sensitivity or prior[a] == 0 or prior[b] == 0:
                    continue
                like_a = rest[a, own_rel] / prior[a]
                like_b = rest[b, own_rel] / prior[b]
                weight_a, weight_b = prior[a] * like_a, prior[b] * like_b
                if weight_a + weight_b == 0:
                    continue
                post = weight_a / (weight_a + weight_b)
                check = InfCapCheck(a, b, float(post), infcap_bound(prior[a] / prior[b], epsilon))
                old = worst.get((a, b))
                if old is None or check.infcap - check.bound > old.infcap - old.bound:
                    worst[(a, b)] = check
    return [worst[k] for k in sorted(worst)]
