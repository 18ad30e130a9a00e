"""Noisy-threshold search for recipient IDs and multi-recipient budget accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

from .crypto_rand import LaplaceSampler, SecretKey, internal_id
from .datamodel import RelationalDatabase
from .errors import BudgetInfeasibleError, NonTerminationError, ParameterError
from .fingerprinter import (
    FINGERPRINT_BITS,
    FingerprintParams,
    insert_fingerprint,
    mark_plan,
    params_from_epsilon,
    postprocess_domain,
)

DENSITY_SOURCES = ("raw", "released")
GAMMA_BASES = ("K", "T")
DEFAULT_MAX_TRIALS = 10_000


def default_gamma(sensitivity: float, flip_probability: float, n_records: int, multiplier: int) -> float:
    """Density threshold ``(1/2 + 1/sqrt(12)) * sensitivity * p * N * multiplier``.

    ``multiplier`` is the number of marked bits in the default configuration
    or the number of attributes in the alternative one.
    """
    return (0.5 + 1.0 / math.sqrt(12.0)) * sensitivity * flip_probability * n_records * multiplier


@dataclass(frozen=True)
class SvtConfig:
    """Settings for the noisy-threshold loop.

    Attributes:
        gamma: density threshold; ``None`` derives it with :func:`default_gamma`.
        epsilon: insertion budget per copy.
        epsilon2: budget of the noise added to the density.
        epsilon3: budget of the noise added to the threshold.
        sensitivity: sensitivity used for marking and for the noise scales.
        recipients: maximum number of copies.
        delta_prime: slack of the advanced composition bound.
        gamma_basis: ``"K"`` or ``"T"`` multiplier for the default threshold.
        density_on: measure density on the ``"raw"`` mechanism output or on
            the ``"released"`` (clamped) copy.
        selection: position selection rule passed to the fingerprinter.
        flip_probability: optional override of the marking probability.
        max_trials: safety cap per recipient.
        rng_seed: root seed of all noise draws.
    """

    epsilon: float
    epsilon2: float
    epsilon3: float
    sensitivity: int = 1
    recipients: int = 1
    delta_prime: float = 1e-3
    gamma: float | None = None
    gamma_basis: str = "K"
    density_on: str = "raw"
    selection: str = "floor"
    flip_probability: float | None = None
    length: int = FINGERPRINT_BITS
    max_trials: int = DEFAULT_MAX_TRIALS
    rng_seed: int = 0

    def __post_init__(self):
        if not (self.epsilon > 0 and self.epsilon2 > 0 and self.epsilon3 > 0):
            raise ParameterError("epsilon, epsilon2 and epsilon3 must be positive")
        if self.recipients < 1:
            raise ParameterError("need at least one recipient")
        if not 0 < self.delta_prime < 1:
            raise ParameterError("delta_prime must lie in (0, 1)")
        if self.gamma is not None and self.gamma < 0:
            raise ParameterError("gamma must be non-negative")
        if self.gamma_basis not in GAMMA_BASES:
            raise ParameterError(f"gamma_basis must be one of {GAMMA_BASES}")
        if self.density_on not in DENSITY_SOURCES:
            raise ParameterError(f"density_on must be one of {DENSITY_SOURCES}")
        if self.max_trials < 1:
            raise ParameterError("max_trials must be positive")

    def fingerprint_params(self) -> FingerprintParams:
        return params_from_epsilon(
            self.epsilon, self.sensitivity, self.length, self.flip_probability, self.selection
        )

    def threshold(self, db: RelationalDatabase) -> float:
        if self.gamma is not None:
            return self.gamma
        params = self.fingerprint_params()
        multiplier = params.marked_bits if self.gamma_basis == "K" else db.n_attributes
        return default_gamma(self.sensitivity, params.flip_probability, db.n_records, multiplier)


@dataclass(frozen=True)
class Trial:
    number: int
    internal_id: str
    density: float
    mu: float
    rho: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "trial": self.number, "internal_id": self.internal_id, "density": self.density,
            "mu": self.mu, "rho": self.rho, "passed": self.passed,
        }


@dataclass
class RecipientRecord:
    recipient: int
    trials: list = field(default_factory=list)
    final_id: bytes | None = None

    @property
    def n_trials(self) -> int:
        return len(self.trials)


@dataclass
class SharingLedger:
    recipients: list = field(default_factory=list)
    epsilon0: float = 0.0
    delta0: float = 0.0

    @property
    def shared(self) -> int:
        return sum(1 for r in self.recipients if r.final_id is not None)

    @property
    def total_trials(self) -> int:
        return sum(r.n_trials for r in self.recipients)

    def registry(self) -> dict:
        """External recipient name to internal ID (hex)."""
        return {f"sp-{r.recipient}": r.final_id.hex() for r in self.recipients if r.final_id}

    def to_dict(self, include_noise: bool = True) -> dict:
        """Full transcript for the owner, or a summary without noise draws and IDs."""
        recs = []
        for r in self.recipients:
            item = {"recipient": r.recipient, "trials": r.n_trials}
            if include_noise:
                item["transcript"] = [t.to_dict() for t in r.trials]
                item["final_id"] = r.final_id.hex() if r.final_id else None
            recs.append(item)
        return {
            "shared": self.shared,
            "total_trials": self.total_trials,
            "epsilon0": self.epsilon0,
            "delta0": self.delta0,
            "recipients": recs,
        }


def _noise_samplers(config: SvtConfig, recipient: int):
    mu_seed, rho_seed = np.random.SeedSequence([config.rng_seed, recipient]).spawn(2)
    return (
        LaplaceSampler(config.sensitivity / config.epsilon2, mu_seed),
        LaplaceSampler(config.sensitivity / config.epsilon3, rho_seed),
    )


def determine_internal_id(
    db: RelationalDatabase, recipient: int, config: SvtConfig, key: SecretKey
) -> tuple[RecipientRecord, RelationalDatabase]:
    """Draw internal IDs until a copy's noisy density clears the noisy threshold.

    Returns the transcript and the released (clamped) copy of the passing
    trial. Noise for recipient ``c`` is seeded from ``(rng_seed, c)`` so
    each recipient's run is reproducible on its own.

    Raises:
        NonTerminationError: no trial passed within ``config.max_trials``.
    """
    params = config.fingerprint_params()
    plan = mark_plan(db, key, params.marked_bits)
    gamma = config.threshold(db)
    mu_noise, rho_noise = _noise_samplers(config, recipient)
    record = RecipientRecord(recipient)
    original = db.codes
    for i in range(1, config.max_trials + 1):
        sp_id = internal_id(key, recipient, i)
        raw, _ = insert_fingerprint(db, params, key, sp_id, plan=plan)
        released = postprocess_domain(raw)
        measured = raw if config.density_on == "raw" else released
        density = float(np.abs(measured.codes - original).sum())
        mu, rho = mu_noise.draw(), rho_noise.draw()
        passed = density + mu >= gamma + rho
        record.trials.append(Trial(i, sp_id.hex(), density, mu, rho, passed))
        if passed:
            record.final_id = sp_id
            return record, released
    raise NonTerminationError(
        f"recipient {recipient}: no internal ID passed the threshold in {config.max_trials} trials"
    )


def share_multi(
    db: RelationalDatabase, config: SvtConfig, key: SecretKey, recipients: int | None = None
) -> tuple[list[RelationalDatabase], SharingLedger]:
    """Release one copy per recipient ``1..C`` and account for the total budget."""
    count = config.recipients if recipients is None else recipients
    if not 1 <= count <= config.recipients:
        raise ParameterError(f"recipient count must lie in 1..{config.recipients}")
    ledger = SharingLedger()
    copies = []
    for c in range(1, count + 1):
        record, released = determine_internal_id(db, c, config, key)
        ledger.recipients.append(record)
        copies.append(released)
    ledger.epsilon0, ledger.delta0 = ledger_privacy(ledger, config)
    return copies, ledger


def advanced_composition(epsilon: float, delta: float, recipients: int, delta_prime: float):
    """Total ``(epsilon, delta)`` of ``recipients`` adaptive uses of one mechanism."""
    if epsilon < 0 or delta < 0 or recipients < 0:
        raise ParameterError("epsilon, delta and the number of uses must be non-negative")
    if not 0 < delta_prime < 1:
        raise ParameterError("delta_prime must lie in (0, 1)")
    spread = math.sqrt(2 * recipients * math.log(1 / delta_prime))
    return (
        spread * epsilon + recipients * epsilon * math.expm1(epsilon),
        recipients * delta + delta_prime,
    )


def sharing_epsilon(epsilon, comparison_budget, recipients, delta_prime) -> float:
    """Total epsilon of ``recipients`` releases with insertion and comparison budgets."""
    spread = math.sqrt(2 * recipients * math.log(1 / delta_prime))
    x = comparison_budget
    return spread * (epsilon + x) + recipients * (epsilon * math.expm1(epsilon) + x * math.expm1(x))


def sequential_epsilon(epsilon: float, comparison_budget: float, trials: int) -> float:
    """Budget of ``trials`` insertions and comparisons under basic sequential composition."""
    return (epsilon + comparison_budget) * trials


def ledger_privacy(ledger: SharingLedger, config: SvtConfig) -> tuple[float, float]:
    """``(epsilon0, delta0)`` for the number of copies actually released."""
    shared = ledger.shared
    eps0 = sharing_epsilon(config.epsilon, config.epsilon2 + config.epsilon3, shared, config.delta_prime)
    return eps0, 2 * config.delta_prime


@dataclass(frozen=True)
class BudgetSplit:
    total: float
    epsilon2: float
    epsilon3: float
    residual: float


def _budget_gap(x, spread, recipients, target):
    return (spread - recipients) * x + recipients * x * math.exp(x) - target


def _increasing_root(func, upper):
    hi = upper
    while func(hi) < 0:
        hi *= 2.0
    return bisect(func, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=2000)


def max_feasible_epsilon(epsilon0: float, delta_prime: float, recipients: int) -> float:
    """Insertion budget at which no comparison budget is left."""
    spread = math.sqrt(2 * recipients * math.log(1 / delta_prime))
    return _increasing_root(lambda e: _budget_gap(e, spread, recipients, epsilon0), max(epsilon0, 1.0))


def solve_budget(epsilon0: float, delta_prime: float, recipients: int, epsilon: float) -> BudgetSplit:
    """Comparison budget left for the noisy threshold, split equally.

    Solves ``(a - C) x + C x e^x = eps0 - (a - C) eps - C eps e^eps`` with
    ``a = sqrt(2 C ln(1/delta'))`` by bisection; the left side is
    increasing in ``x`` so the root is unique.

    Raises:
        BudgetInfeasibleError: the right side is not positive.
    """
    if epsilon0 <= 0 or recipients < 1 or epsilon < 0 or not 0 < delta_prime < 1:
        raise ParameterError("invalid budget parameters")
    spread = math.sqrt(2 * recipients * math.log(1 / delta_prime))
    target = epsilon0 - (spread - recipients) * epsilon - recipients * epsilon * math.exp(epsilon)
    if target <= 0:
        limit = max_feasible_epsilon(epsilon0, delta_prime, recipients)
        raise BudgetInfeasibleError(
            f"total budget {epsilon0} is exhausted by insertion budget {epsilon} over "
            f"{recipients} copies; the largest feasible insertion budget is {limit:.6g}",
            max_feasible_epsilon=limit,
        )
    root = _increasing_root(lambda x: _budget_gap(x, spread, recipients, target), epsilon0)
    residual = abs(_budget_gap(root, spread, recipients, target))
    return BudgetSplit(root, root / 2, root / 2, residual)
