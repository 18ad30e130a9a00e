"""Closed-form privacy, utility and robustness quantities for the mechanism.

Every function here is a pure evaluator. Monte Carlo counterparts that run
the real insertion/extraction code live next to the closed forms so the two
can be compared.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import binom

from .errors import ParameterError, SizeError

GAIN_VARIANTS = ("appendix", "main")
TIE_RULES = ("half_wins", "extraction")


# privacy ------------------------------------------------------------------

def infcap_bound(psi: float, epsilon: float) -> float:
    """Largest posterior an attacker with prior odds ``psi`` can reach."""
    if not psi > 0:
        raise ParameterError("prior odds must be positive")
    if epsilon < 0:
        raise ParameterError("epsilon must be non-negative")
    odds = psi * math.exp(epsilon)
    return odds / (odds + 1.0)


def entry_output_distribution(
    value: int, marked_bits: int, flip_probability: float, max_code: int | None = None
) -> dict[int, float]:
    """Exact output law of one entry when each low bit flips independently.

    With ``max_code`` the output is clamped as in domain post-processing.
    """
    out: dict[int, float] = {}
    p = flip_probability
    for pattern in range(2 ** marked_bits):
        flips = bin(pattern).count("1")
        prob = p ** flips * (1 - p) ** (marked_bits - flips)
        result = value ^ pattern
        if max_code is not None:
            result = min(result, max_code)
        out[result] = out.get(result, 0.0) + prob
    return out


def max_privacy_ratio(
    domain_size: int,
    sensitivity: int,
    marked_bits: int,
    flip_probability: float,
    clamp: bool = False,
) -> float:
    """Worst likelihood ratio between neighbouring single-entry tables.

    Enumerates every pair of in-domain values at most ``sensitivity`` apart
    and every output. Returns ``inf`` when an output is possible under one
    neighbour but not the other.
    """
    max_code = domain_size - 1 if clamp else None
    dists = [
        entry_output_distribution(v, marked_bits, flip_probability, max_code)
        for v in range(domain_size)
    ]
    worst = 1.0
    for a in range(domain_size):
        for b in range(domain_size):
            if a == b or abs(a - b) > sensitivity:
                continue
            for out, pa in dists[a].items():
                pb = dists[b].get(out, 0.0)
                if pa > 0 and pb == 0:
                    return math.inf
                if pb > 0:
                    worst = max(worst, pa / pb)
    return worst


# utility ------------------------------------------------------------------

def expected_error_bound(sensitivity: int, flip_probability: float) -> tuple[float, float]:
    return 0.0, sensitivity * flip_probability


def density_bound(sensitivity: int, flip_probability: float, n_records: int, n_attributes: int):
    return 0.0, sensitivity * flip_probability * n_records * n_attributes


@dataclass(frozen=True)
class JointStats:
    """Original probability of one cell plus the smallest and largest cell of its table."""

    joint: float
    pr_min: float
    pr_max: float

    def __post_init__(self):
        for v in (self.joint, self.pr_min, self.pr_max):
            if not 0.0 <= v <= 1.0:
                raise ParameterError("probabilities must lie in [0, 1]")
        if not self.pr_min <= self.joint <= self.pr_max:
            raise ParameterError("need pr_min <= joint <= pr_max")


def joint_bounds(flip_probability, marked_bits, joint, pr_min, pr_max) -> tuple[float, float]:
    """Interval for a cell probability after marking, from the cell and its table extremes."""
    keep = (1 - flip_probability) ** marked_bits
    base = joint * keep ** 2
    spread = (1 - keep) ** 2
    return base + pr_min * spread, base + pr_max * spread


def marginal_bounds(flip_probability, marked_bits, marginal, pr_min, pr_max) -> tuple[float, float]:
    """Same interval as :func:`joint_bounds` for one attribute's marginal table."""
    return joint_bounds(flip_probability, marked_bits, marginal, pr_min, pr_max)


# robustness: subset attack -------------------------------------------------

def _row_hit_probability(p, length, marked_bits, n_attributes):
    return 1.0 - (1.0 - p / length) ** (marked_bits * n_attributes)


def p_rbst_sub(p, length, marked_bits, n_attributes, n_records, gamma_sub) -> float:
    """Subset-attack robustness, closed form ``1 + x^N - (x + g(1 - x))^N``.

    ``x`` is the chance a row carries a given fingerprint index. Read as an
    event over rows, this is one minus the probability that no row lacking
    the index is dropped while at least one such row is kept; see
    :func:`p_rbst_sub_enumerated`.
    """
    x = _row_hit_probability(p, length, marked_bits, n_attributes)
    return 1.0 + x ** n_records - (x + gamma_sub * (1.0 - x)) ** n_records


def p_rbst_sub_series(p, length, marked_bits, n_attributes, n_records, gamma_sub) -> float:
    """Binomial-sum form ``1 - sum_{n>=1} C(N,n) g^n x^n (1-x)^(N-n)``.

    It simplifies to ``1 + (1-x)^N - (1 - x + g x)^N``, which is not the
    same function as :func:`p_rbst_sub` (the roles of ``x`` and ``1-x``
    are exchanged).
    """
    x = _row_hit_probability(p, length, marked_bits, n_attributes)
    n = n_records
    return 1.0 - sum(
        math.comb(n, k) * gamma_sub ** k * x ** k * (1 - x) ** (n - k) for k in range(1, n + 1)
    )


def subset_survival_probability(p, length, marked_bits, n_attributes, n_records, gamma_sub) -> float:
    """Chance that at least one row carrying a given index survives the subset attack."""
    x = _row_hit_probability(p, length, marked_bits, n_attributes)
    return 1.0 - (1.0 - gamma_sub * x) ** n_records


def p_rbst_sub_enumerated(p, length, marked_bits, n_attributes, n_records, gamma_sub) -> float:
    """Brute-force twin of :func:`p_rbst_sub` over all ``4^N`` row outcomes.

    Each row independently carries the index (probability ``x``) or not,
    and is kept (probability ``g``) or dropped. The event counted is the
    complement of "every row without the index is kept, and there is at
    least one such row".
    """
    n = n_records
    if n > 12:
        raise SizeError("enumeration is limited to 12 rows")
    x = _row_hit_probability(p, length, marked_bits, n_attributes)
    g = gamma_sub
    patterns = np.arange(2 ** n)
    ones = np.array([bin(v).count("1") for v in range(2 ** n)])
    # probability of each carries-index pattern and each kept pattern
    p_carry = x ** ones * (1 - x) ** (n - ones)
    p_keep = g ** ones * (1 - g) ** (n - ones)
    total = 0.0
    for carry, pc in zip(patterns, p_carry):
        lacking = ~carry & (2 ** n - 1)
        kept_lacking = patterns & lacking
        dropped_lacking = lacking & ~patterns
        good = (kept_lacking != 0) & (dropped_lacking == 0)
        total += pc * p_keep[good].sum()
    return 1.0 - total


def p_rbst_sub_monte_carlo(
    p, length, marked_bits, n_attributes, n_records, gamma_sub, trials=100_000, rng_seed=0
):
    """Simulated estimate of the :func:`p_rbst_sub` event; returns ``(estimate, std_error)``.

    Every one of a row's ``K T`` positions is marked with probability ``p``
    and, if marked, points at the tracked index with probability ``1/L``.
    """
    rng = np.random.default_rng(rng_seed)
    hits = np.zeros(trials, dtype=np.int64)
    chunk = max(1, 2_000_000 // max(1, n_records))
    done = 0
    per_row = marked_bits * n_attributes
    while done < trials:
        m = min(chunk, trials - done)
        carries = rng.binomial(per_row, p / length, size=(m, n_records)) > 0
        kept = rng.random((m, n_records)) < gamma_sub
        lacking = ~carries
        good = (lacking & kept).any(axis=1) & ~(lacking & ~kept).any(axis=1)
        hits[done:done + m] = ~good
        done += m
    est = hits.mean()
    return float(est), float(math.sqrt(max(est * (1 - est), 1e-300) / trials))


# robustness: random flipping -----------------------------------------------

def _index_success(votes: int, gamma: float, tie_rule: str) -> float:
    if votes == 0:
        return 0.0
    if tie_rule == "half_wins":
        return float(binom.cdf(votes // 2, votes, gamma))
    below = binom.cdf((votes - 1) // 2, votes, gamma)
    tie = binom.pmf(votes // 2, votes, gamma) if votes % 2 == 0 else 0.0
    return float(below + 0.5 * tie)


def _at_least(probs: Sequence[float], threshold: int) -> float:
    dist = np.zeros(len(probs) + 1)
    dist[0] = 1.0
    for q in probs:
        dist[1:] = dist[1:] * (1 - q) + dist[:-1] * q
        dist[0] *= 1 - q
    return float(dist[threshold:].sum())


def p_rbst_rnd_exact(
    p, gamma_rnd, n_records, marked_bits, n_attributes, length, threshold,
    tie_rule="half_wins", selection_probability=None,
) -> float:
    """Exact chance of at least ``threshold`` correct bits after random flipping.

    The number of marked positions is Binomial(NKT, s) with ``s = 2p``
    unless ``selection_probability`` is given; each mark points at a
    uniform index and is flipped with probability ``gamma_rnd``. An index
    without votes is wrong. Under ``tie_rule="half_wins"`` an index counts as
    correct when at most half its votes are flipped; under
    ``"extraction"`` an exact tie is correct half the time, which is what
    majority voting with ties broken to 0 yields for a uniform fingerprint.
    """
    if tie_rule not in TIE_RULES:
        raise ParameterError(f"tie_rule must be one of {TIE_RULES}")
    positions = n_records * marked_bits * n_attributes
    if positions > 20 or length > 4:
        raise SizeError("exact evaluation needs N*K*T <= 20 and L <= 4")
    s = 2 * p if selection_probability is None else selection_probability
    success = [_index_success(w, gamma_rnd, tie_rule) for w in range(positions + 1)]
    total = 0.0
    for m in range(positions + 1):
        pm = float(binom.pmf(m, positions, s))
        if pm == 0.0:
            continue
        inner = 0.0
        for votes in _compositions(m, length):
            coeff = math.factorial(m)
            for w in votes:
                coeff //= math.factorial(w)
            weight = coeff * length ** (-m)
            inner += weight * _at_least([success[w] for w in votes], threshold)
        total += pm * inner
    return total


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def p_rbst_rnd_monte_carlo(
    p, gamma_rnd, n_records, marked_bits, n_attributes, length, threshold,
    trials=10_000, rng_seed=0, selection="exact",
):
    """End-to-end estimate: insert, flip, extract and count matching bits.

    Runs the library's own insertion, attack and extraction on a table
    whose attributes span exactly ``marked_bits`` bits, with a fresh key per
    trial. Returns ``(estimate, std_error)``.
    """
    from .attacks import random_flipping
    from .crypto_rand import SecretKey, gen_fingerprint, internal_id
    from .datamodel import AttributeDomain, RelationalDatabase
    from .extractor import extract_fingerprint
    from .fingerprinter import FingerprintParams, MarkPlan, insert_fingerprint

    size = 2 ** marked_bits
    domains = [AttributeDomain(f"a{t}", tuple(range(size))) for t in range(n_attributes)]
    rng = np.random.default_rng(rng_seed)
    codes = rng.integers(0, size, (n_records, n_attributes))
    db = RelationalDatabase(domains, [f"r{i}" for i in range(n_records)], codes)
    epsilon = marked_bits * math.log((1 - p) / p)
    params = FingerprintParams(epsilon, size - 1, marked_bits, p, length, selection)
    hits = 0
    for trial in range(trials):
        material = hashlib.sha256(f"{rng_seed}:{trial}".encode()).digest()
        key = SecretKey(material)
        plan = MarkPlan.build(db, key, marked_bits)
        sp_id = internal_id(key, 1, 1)
        marked, _ = insert_fingerprint(db, params, key, sp_id, plan=plan)
        leaked = random_flipping(marked, marked_bits, gamma_rnd, rng_seed=[rng_seed, trial])
        found = extract_fingerprint(db, leaked, params, key, plan=plan)
        hits += found.matches(gen_fingerprint(key, sp_id, length)) >= threshold
    est = hits / trials
    return est, math.sqrt(max(est * (1 - est), 1e-300) / trials)


def p_rbst_rnd(
    p, gamma_rnd, n_records, marked_bits, n_attributes, length, threshold,
    mode="exact", **kwargs,
):
    """Random-flipping robustness in ``"exact"`` (tiny instances) or ``"monte-carlo"`` mode.

    Monte Carlo mode returns the estimate only; call
    :func:`p_rbst_rnd_monte_carlo` for its standard error.
    """
    args = (p, gamma_rnd, n_records, marked_bits, n_attributes, length, threshold)
    if mode == "exact":
        return p_rbst_rnd_exact(*args, **kwargs)
    if mode == "monte-carlo":
        return p_rbst_rnd_monte_carlo(*args, **kwargs)[0]
    raise ParameterError("mode must be 'exact' or 'monte-carlo'")


# robustness: correlation attack --------------------------------------------

def gain_terms(flip_probability, marked_bits, stats: JointStats, variant="appendix"):
    """The two extreme cell shifts ``(A, B)`` used by :func:`confidence_gain`."""
    if variant not in GAIN_VARIANTS:
        raise ParameterError(f"variant must be one of {GAIN_VARIANTS}")
    keep = (1 - flip_probability) ** marked_bits
    lam = 1 - keep
    if variant == "appendix":
        shift = stats.joint * (keep ** 2 + 1) * (-lam)
    else:
        shift = stats.joint * (keep ** 2 - 1)
    return shift + stats.pr_min * lam ** 2, shift + stats.pr_max * lam ** 2


def confidence_gain(
    flip_probability: float,
    marked_bits: int,
    tau: float,
    pair_stats: Sequence[JointStats],
    marginal: float,
    variant: str = "appendix",
) -> float:
    """Correlation attacker's targeting advantage over random flipping.

    Each discrepancy is modelled as uniform on ``[0, max(|A|, |B|)]``.

    Args:
        flip_probability: per-bit mark probability.
        marked_bits: number of marked low bits.
        tau: attacker threshold.
        pair_stats: one entry per (other attribute, value) cell in the row
            of the target value.
        marginal: original probability of the target value.
        variant: ``"appendix"`` or ``"main"`` form of ``A`` and ``B``.

    Raises:
        ParameterError: the gain is undefined (zero flip probability or
            zero marginal).
    """
    lam = 1 - (1 - flip_probability) ** marked_bits
    if lam <= 0 or marginal <= 0:
        raise ParameterError("confidence gain is undefined when p = 0 or Pr(value) = 0")
    prod = 1.0
    for stats in pair_stats:
        a, b = gain_terms(flip_probability, marked_bits, stats, variant)
        width = max(abs(a), abs(b))
        prod *= 1.0 if width == 0 else min(1.0, tau / width)
    return (1.0 - prod) / (lam * marginal)


def pair_stats_for(db, attribute: int, value: int) -> tuple[list[JointStats], float]:
    """Collect :class:`JointStats` for every other attribute cell of ``value``."""
    from .attacks import pairwise_joints

    joints = pairwise_joints(db)
    stats = []
    for z in range(db.n_attributes):
        if z == attribute:
            continue
        table = joints[(attribute, z)]
        lo, hi = float(table.min()), float(table.max())
        stats.extend(JointStats(float(c), lo, hi) for c in table[value])
    marginal = float(np.mean(db.codes[:, attribute] == value))
    return stats, marginal


def binomial_tail(length: int, threshold: int) -> float:
    """P(Binomial(length, 1/2) >= threshold), exact."""
    return sum(math.comb(length, d) for d in range(threshold, length + 1)) / 2 ** length

