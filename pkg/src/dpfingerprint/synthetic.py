"""Synthetic categorical tables used by tests, reports and benchmarks."""

from __future__ import annotations

import itertools

import numpy as np

from .datamodel import AttributeDomain, RelationalDatabase

NURSERY_ATTRIBUTES = (
    ("parents", ("usual", "pretentious", "great_pret")),
    ("has_nurs", ("proper", "less_proper", "improper", "critical", "very_crit")),
    ("form", ("complete", "completed", "incomplete", "foster")),
    ("children", ("1", "2", "3", "more")),
    ("housing", ("convenient", "less_conv", "critical")),
    ("finance", ("convenient", "inconv")),
    ("social", ("nonprob", "slightly_prob", "problematic")),
    ("health", ("recommended", "priority", "not_recom")),
)


def nursery_domains() -> list[AttributeDomain]:
    return [AttributeDomain(name, values) for name, values in NURSERY_ATTRIBUTES]


def _nursery_label(row) -> str:
    # Stand-in class rule; the real dataset uses an expert hierarchy.
    if row[7] == 2:
        return "not_recom"
    score = int(row[0]) + int(row[1]) + int(row[4]) + int(row[5]) + int(row[6])
    if row[7] == 1 and score >= 6:
        return "spec_prior"
    return "priority" if score >= 3 else "very_recom"


def nursery_full_factorial(with_labels: bool = True) -> RelationalDatabase:
    """Every combination of the nursery attribute values (12960 rows)."""
    domains = nursery_domains()
    codes = np.array(
        list(itertools.product(*[range(d.size) for d in domains])), dtype=np.int64
    )
    keys = [f"r{i:05d}" for i in range(len(codes))]
    labels = [_nursery_label(r) for r in codes] if with_labels else None
    return RelationalDatabase(
        domains, keys, codes, "class" if with_labels else None, labels
    )


def random_database(
    sizes,
    n_records: int,
    rng_seed: int = 0,
    concentration: float | None = None,
    key_prefix: str = "r",
) -> RelationalDatabase:
    """Independent columns with uniform or Dirichlet-drawn marginals.

    Args:
        sizes: domain size per attribute.
        n_records: number of rows.
        rng_seed: seed for both the marginals and the rows.
        concentration: Dirichlet concentration for skewed marginals;
            ``None`` draws every column uniformly.
    """
    rng = np.random.default_rng(rng_seed)
    domains = [
        AttributeDomain(f"a{t}", tuple(f"v{v}" for v in range(size)))
        for t, size in enumerate(sizes)
    ]
    cols = []
    for size in sizes:
        if concentration is None:
            cols.append(rng.integers(0, size, n_records))
        else:
            probs = rng.dirichlet(np.full(size, concentration))
            cols.append(rng.choice(size, n_records, p=probs))
    codes = np.stack(cols, axis=1) if cols else np.zeros((n_records, 0), np.int64)
    keys = [f"{key_prefix}{i}" for i in range(n_records)]
    return RelationalDatabase(domains, keys, codes)


def skewed_nursery(n_records: int = 12960, rng_seed: int = 0, concentration: float = 0.7):
    """Nursery schema with Dirichlet-skewed independent marginals."""
    base = random_database(
        [d.size for d in nursery_domains()], n_records, rng_seed, concentration
    )
    return RelationalDatabase(nursery_domains(), base.keys, base.codes)


def correlated_database(
    sizes, n_records: int, strength: float = 0.7, rng_seed: int = 0
) -> RelationalDatabase:
    """Columns that copy a shared latent level with probability ``strength``.

    The latent level is drawn uniformly on [0, 1) and scaled to each domain,
    so columns are positively correlated in code order.
    """
    rng = np.random.default_rng(rng_seed)
    latent = rng.random(n_records)
    cols = []
    for size in sizes:
        follow = rng.random(n_records) < strength
        tied = np.minimum((latent * size).astype(np.int64), size - 1)
        cols.append(np.where(follow, tied, rng.integers(0, size, n_records)))
    domains = [
        AttributeDomain(f"a{t}", tuple(f"v{v}" for v in range(size)))
        for t, size in enumerate(sizes)
    ]
    keys = [f"r{i}" for i in range(n_records)]
    return RelationalDatabase(domains, keys, np.stack(cols, axis=1))
