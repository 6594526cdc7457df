"""Domain types shared across the package, spec validation and distribution helpers.

State space is the non-negative integers (customers in system). Every
per-state count vector carries ``max_tracked_state + 2`` cells: states
``0..max_tracked_state`` followed by a single overflow atom.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

NORMALIZATION_ATOL = 1e-12


class SpecError(ValueError):
    """Raised by :func:`validate_spec`; ``errors`` lists every problem found."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class SchedulingRule(enum.Enum):
    EAS = "EAS"
    LAS_IA = "LAS-IA"
    LAS_DA = "LAS-DA"
    LA_AF = "LA-AF"
    LA_DF = "LA-DF"

    @classmethod
    def parse(cls, name: str) -> "SchedulingRule":
        key = str(name).strip().upper().replace("_", "-")
        for rule in cls:
            if rule.value == key:
                return rule
        raise ValueError(f"unknown rule: {name}")

    @property
    def empty_arrival_completes(self) -> bool:
        """True when an arrival to an empty system may complete service in
        its first departure opportunity after the potential-arrival epoch.

        Splits the rules into the two classes with ``beta(0) = beta``
        (EAS, LAS-IA, LA-DF) and ``beta(0) = 0`` (LAS-DA, LA-AF).
        """
        return self in (SchedulingRule.EAS, SchedulingRule.LAS_IA, SchedulingRule.LA_DF)

    def __str__(self) -> str:
        return self.value


# -- arrival laws -----------------------------------------------------------

@dataclass(frozen=True)
class Bernoulli:
    alpha: float


@dataclass(frozen=True)
class Batch:
    """Batch size ``k`` with probability ``pmf[k]``, ``k = 0..K``."""

    pmf: tuple

    def __post_init__(self):
        object.__setattr__(self, "pmf", tuple(float(p) for p in self.pmf))


@dataclass(frozen=True)
class StateDependent:
    """Single arrivals with probability ``alphas[n]`` when ``n`` customers are
    seen at the potential-arrival epoch; ``tail_alpha`` past the vector."""

    alphas: tuple
    tail_alpha: float

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))

    def alpha_at(self, n: int) -> float:
        return self.alphas[n] if n < len(self.alphas) else self.tail_alpha


ArrivalSpec = Union[Bernoulli, Batch, StateDependent]


# -- service laws -----------------------------------------------------------

HAZARD_INDEXING = ("trial", "arrival_epoch")


@dataclass(frozen=True)
class Geometric:
    beta: float

    def completion_probability(self, j: int) -> float:
        return self.beta


@dataclass(frozen=True)
class Hazard:
    """Per-slot completion probability ``betas[j-1]`` with ``j`` customers
    present, ``tail_beta`` for ``j > len(betas)``.

    ``index`` picks the count that selects the hazard at a departure trial:

    ``"trial"``
        number in system at the trial instant (default).
    ``"arrival_epoch"``
        number seen at the most recent potential-arrival epoch, floored at
        one. This is the birth-death indexing in which ``beta(j)`` belongs
        to the state observed just before potential arrivals.

    Both coincide for a constant hazard.
    """

    betas: tuple
    tail_beta: float
    index: str = "trial"

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))

    def completion_probability(self, j: int) -> float:
        if j < 1:
            raise ValueError("hazard is defined for j >= 1")
        return self.betas[j - 1] if j <= len(self.betas) else self.tail_beta


@dataclass(frozen=True)
class IidPmf:
    """I.i.d. service durations, ``pmf[s]`` for ``s = 0..S`` with ``pmf[0] == 0``."""

    pmf: tuple

    def __post_init__(self):
        object.__setattr__(self, "pmf", tuple(float(p) for p in self.pmf))

    @property
    def mean(self) -> float:
        return float(sum(s * p for s, p in enumerate(self.pmf)))


ServiceSpec = Union[Geometric, Hazard, IidPmf]


@dataclass(frozen=True)
class ModelSpec:
    rule: SchedulingRule
    arrival: ArrivalSpec
    service: ServiceSpec
    slots: int
    warmup: int = 10_000
    seed: int = 0
    replications: int = 1
    max_tracked_state: int = 1000


@dataclass(frozen=True)
class ValidatedSpec:
    """A :class:`ModelSpec` that passed validation, with its stability flag.

    ``stable`` is advisory only; sample-path identities hold regardless.
    """

    spec: ModelSpec
    stable: bool
    arrival_rate: float
    service_rate: float

    def __getattr__(self, name):
        # forward ModelSpec fields (rule, slots, seed, ...)
        if name == "spec":
            raise AttributeError(name)
        return getattr(self.spec, name)


def _check_prob(errors: list, label: str, p) -> None:
    try:
        p = float(p)
    except (TypeError, ValueError):
        errors.append(f"{label} is not a number: {p!r}")
        return
    if not (0.0 <= p <= 1.0) or math.isnan(p):
        errors.append(f"{label} = {p} is outside [0, 1]")


def _check_pmf(errors: list, label: str, pmf: Sequence[float]) -> None:
    if len(pmf) == 0:
        errors.append(f"{label} is empty")
        return
    for i, p in enumerate(pmf):
        _check_prob(errors, f"{label}[{i}]", p)
    total = math.fsum(pmf)
    if abs(total - 1.0) > NORMALIZATION_ATOL:
        errors.append(f"{label} sums to {total:.12g}, not 1")


def _effective_arrival_rate(arrival: ArrivalSpec) -> float:
    if isinstance(arrival, Bernoulli):
        return float(arrival.alpha)
    if isinstance(arrival, Batch):
        return math.fsum(k * p for k, p in enumerate(arrival.pmf))
    # state-dependent: what matters for stability is the far tail
    return float(arrival.tail_alpha)


def validate_spec(spec: Union[ModelSpec, ValidatedSpec]) -> ValidatedSpec:
    """Check a model definition and attach the stability flag.

    Raises :class:`SpecError` listing every violation. Validating an already
    validated spec returns it unchanged.
    """
    if isinstance(spec, ValidatedSpec):
        return spec

    errors: list[str] = []
    if not isinstance(spec.rule, SchedulingRule):
        errors.append(f"unknown rule: {spec.rule}")

    arrival = spec.arrival
    if isinstance(arrival, Bernoulli):
        _check_prob(errors, "arrival.alpha", arrival.alpha)
    elif isinstance(arrival, Batch):
        _check_pmf(errors, "arrival.pmf", arrival.pmf)
    elif isinstance(arrival, StateDependent):
        for i, a in enumerate(arrival.alphas):
            _check_prob(errors, f"arrival.alphas[{i}]", a)
        _check_prob(errors, "arrival.tail_alpha", arrival.tail_alpha)
    else:
        errors.append(f"unsupported arrival law: {arrival!r}")

    service = spec.service
    if isinstance(service, Geometric):
        _check_prob(errors, "service.beta", service.beta)
    elif isinstance(service, Hazard):
        for i, b in enumerate(service.betas):
            _check_prob(errors, f"service.betas[{i}]", b)
        _check_prob(errors, "service.tail_beta", service.tail_beta)
        if service.index not in HAZARD_INDEXING:
            errors.append(f"service.index must be one of {HAZARD_INDEXING}, got {service.index!r}")
    elif isinstance(service, IidPmf):
        _check_pmf(errors, "service.pmf", service.pmf)
        if service.pmf and service.pmf[0] != 0.0:
            errors.append("service.pmf[0] must be 0 (services last at least one slot)")
    else:
        errors.append(f"unsupported service law: {service!r}")

    if not isinstance(spec.slots, (int, np.integer)) or spec.slots < 1:
        errors.append(f"slots must be a positive integer, got {spec.slots!r}")
    if not isinstance(spec.warmup, (int, np.integer)) or spec.warmup < 0:
        errors.append(f"warmup must be a non-negative integer, got {spec.warmup!r}")
    elif isinstance(spec.slots, (int, np.integer)) and spec.warmup >= spec.slots:
        errors.append(f"warmup ({spec.warmup}) must be < slots ({spec.slots})")
    if not isinstance(spec.seed, (int, np.integer)) or not (0 <= spec.seed < 2**64):
        errors.append(f"seed must be a 64-bit unsigned integer, got {spec.seed!r}")
    if not isinstance(spec.replications, (int, np.integer)) or spec.replications < 1:
        errors.append(f"replications must be >= 1, got {spec.replications!r}")
    if not isinstance(spec.max_tracked_state, (int, np.integer)) or spec.max_tracked_state < 1:
        errors.append(f"max_tracked_state must be >= 1, got {spec.max_tracked_state!r}")

    if errors:
        raise SpecError(errors)

    lam = _effective_arrival_rate(arrival)
    if isinstance(service, IidPmf):
        mu = 1.0 / service.mean
        stable = lam * service.mean < 1.0
    else:
        mu = service.beta if isinstance(service, Geometric) else service.tail_beta
        stable = lam < mu
    return ValidatedSpec(spec=spec, stable=bool(stable), arrival_rate=lam, service_rate=mu)


# -- empirical report -------------------------------------------------------

def normalize_counts(counts) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if not total > 0:
        raise ValueError("cannot normalize: counts sum to zero")
    return counts / total


def tv_distance(p, q) -> float:
    """Total variation distance, compared over the union of supports."""
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if (p < 0).any() or (q < 0).any():
        raise ValueError("tv_distance: negative entry")
    n = max(p.size, q.size)
    p = np.pad(p, (0, n - p.size))
    q = np.pad(q, (0, n - q.size))
    return float(min(1.0, 0.5 * np.abs(p - q).sum()))


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.int64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EmpiricalReport:
    """Finite-horizon counts for one run (or a merge of replications).

    Index ``n`` of each count vector is a state; the last cell is the
    overflow atom for states above ``spec.max_tracked_state``.
    ``admitted``, ``departures`` and ``final_count`` cover the whole run
    including warmup (summed over replications after a merge).
    """

    spec: ModelSpec
    total_slots_observed: int
    arrival_events: int
    edge_count: np.ndarray
    center_count: np.ndarray
    pa_count: np.ndarray
    prearrival_count: np.ndarray
    admitted: int = 0
    departures: int = 0
    final_count: int = 0
    replication_seeds: tuple = field(default_factory=tuple)

    def __post_init__(self):
        for name in ("edge_count", "center_count", "pa_count", "prearrival_count"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def n_cells(self) -> int:
        return self.edge_count.size

    @property
    def pi_edge(self) -> np.ndarray:
        return normalize_counts(self.edge_count)

    @property
    def pi_center(self) -> np.ndarray:
        return normalize_counts(self.center_count)

    @property
    def pi_pa(self) -> np.ndarray:
        return normalize_counts(self.pa_count)

    @property
    def pi_prearrival(self) -> np.ndarray | None:
        """``None`` when the run saw no arrival events."""
        if self.arrival_events == 0:
            return None
        return normalize_counts(self.prearrival_count)

    @property
    def lambda_hat(self) -> float:
        return self.arrival_events / self.total_slots_observed

    @property
    def lambda_n_hat(self) -> np.ndarray:
        """Per-state arrival frequency; NaN where ``pa_count`` is zero."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.pa_count > 0,
                            self.prearrival_count / np.maximum(self.pa_count, 1), np.nan)

    def counts_equal(self, other: "EmpiricalReport") -> bool:
        return (self.total_slots_observed == other.total_slots_observed
                and self.arrival_events == other.arrival_events
                and all(np.array_equal(getattr(self, k), getattr(other, k))
                        for k in ("edge_count", "center_count", "pa_count", "prearrival_count")))
