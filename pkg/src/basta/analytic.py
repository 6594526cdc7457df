"""Closed-form stationary distributions for birth-death discrete-time queues.

With Bernoulli(alpha) arrivals and completion probabilities ``beta(j)``
(``j`` = customers seen just before a potential arrival), the distribution
seen at potential-arrival epochs has product form with ratios

    gamma(j) = alpha (1 - beta(j)) / (beta(j+1) (1 - alpha)).

``beta(0)`` is never supplied by the caller; it follows from the
scheduling rule: 0 for LAS-DA and LA-AF, ``beta(1)`` for EAS, LAS-IA and
LA-DF.

Infinite sums are truncated once the remaining mass (exact for the
constant-hazard tail) drops below ``tail_tol``; the residual is returned
as ``tail_mass``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .core import Geometric, Hazard, SchedulingRule

SOURCES = ("Eq8", "Thm36i", "Thm36ii", "Eq6", "Eq7", "GeoClosedForm")
DEFAULT_TAIL_TOL = 1e-12
DEFAULT_N_MAX = 10_000


class UnstableError(ValueError):
    pass


@dataclass(frozen=True)
class AnalyticPmf:
    probs: np.ndarray
    tail_mass: float
    source: str

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        if self.source not in SOURCES:
            raise ValueError(f"unknown source label {self.source!r}")
        if (probs < 0).any() or self.tail_mass < 0:
            raise ValueError("negative probability")
        total = math.fsum(probs) + self.tail_mass
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"probabilities sum to {total!r}")

    def folded(self, n_cells: int) -> np.ndarray:
        """Vector of length ``n_cells`` whose last cell holds all remaining mass."""
        out = np.zeros(n_cells)
        head = min(n_cells - 1, self.probs.size)
        out[:head] = self.probs[:head]
        out[-1] = max(0.0, 1.0 - out[:-1].sum())
        return out


@dataclass(frozen=True)
class BirthDeathSpec:
    """Bernoulli(alpha) arrivals, ``beta(j) = betas[j-1]`` for ``j <= len(betas)``,
    ``tail_beta`` beyond."""

    alpha: float
    betas: tuple
    tail_beta: float
    rule: SchedulingRule

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        for b in (*self.betas, self.tail_beta):
            if not 0.0 < b <= 1.0:
                raise ValueError(f"beta(j) must lie in (0, 1] for j >= 1, got {b}")

    @classmethod
    def from_service(cls, alpha: float, service, rule: SchedulingRule) -> "BirthDeathSpec":
        if isinstance(service, Geometric):
            return cls(alpha, (), service.beta, rule)
        if isinstance(service, Hazard):
            return cls(alpha, service.betas, service.tail_beta, rule)
        raise TypeError("no analytic form for general service")

    def beta(self, j: int) -> float:
        if j == 0:
            return self.beta(1) if self.rule.empty_arrival_completes else 0.0
        return self.betas[j - 1] if j <= len(self.betas) else self.tail_beta

    @property
    def gamma_tail(self) -> float:
        return _gamma(self.alpha, self.tail_beta, self.tail_beta)


def _gamma(alpha: float, beta_j: float, beta_next: float) -> float:
    if beta_next == 0:
        raise ZeroDivisionError("gamma(j) undefined: beta(j+1) = 0")
    if alpha == 0:
        return 0.0
    return alpha * (1.0 - beta_j) / (beta_next * (1.0 - alpha))


def gamma_ratio(alpha: float, beta_fn: Union[BirthDeathSpec, Callable[[int], float]],
                j: int, rule: SchedulingRule | None = None) -> float:
    """``gamma(j)``. ``beta_fn`` maps ``j >= 1`` to ``beta(j)``; ``beta(0)``
    comes from ``rule`` (required when ``j == 0`` unless ``beta_fn`` is a
    :class:`BirthDeathSpec`)."""
    if isinstance(beta_fn, BirthDeathSpec):
        b = beta_fn.beta
    else:
        def b(i):
            if i > 0:
                return beta_fn(i)
            if rule is None:
                raise ValueError("beta(0) depends on the scheduling rule; pass rule=")
            return beta_fn(1) if rule.empty_arrival_completes else 0.0
    return _gamma(alpha, b(j), b(j + 1))


def pa_distribution_eq8(spec: BirthDeathSpec, tail_tol: float = DEFAULT_TAIL_TOL,
                        n_max: int = DEFAULT_N_MAX, source: str = "Eq8") -> AnalyticPmf:
    """Product-form distribution at potential-arrival epochs.

    ``pi(0) = [1 + gamma(0) * sum_{k>=1} P_k]^-1`` with ``P_1 = 1`` and
    ``P_k = prod_{j=1}^{k-1} gamma(j)``; ``pi(n) = gamma(0) P_n pi(0)``.
    Once every remaining ratio equals ``gamma_tail`` the leftover series is
    summed in closed form, so ``tail_mass`` is exact rather than a bound.
    """
    if tail_tol <= 0:
        raise ValueError("tail_tol must be positive")
    if spec.alpha == 0:
        return AnalyticPmf(np.array([1.0]), 0.0, source)
    g_tail = spec.gamma_tail
    if g_tail >= 1.0:
        raise UnstableError(f"unstable: gamma >= 1 (tail ratio {g_tail:.6g})")

    g0 = gamma_ratio(spec.alpha, spec, 0)
    J = len(spec.betas)
    products = [1.0]          # P_1
    remaining = math.inf
    k = 1
    while True:
        if k >= J + 1:
            # gamma(j) == g_tail for all j >= k
            remaining = products[-1] * g_tail / (1.0 - g_tail)
            if g0 * remaining < tail_tol or k >= n_max:
                break
        elif k >= n_max:
            raise ValueError(f"n_max={n_max} is below the hazard vector length")
        products.append(products[-1] * gamma_ratio(spec.alpha, spec, k))
        k += 1

    products = np.array(products)
    pi0 = 1.0 / (1.0 + g0 * (math.fsum(products) + remaining))
    probs = np.concatenate(([pi0], g0 * products * pi0))
    tail = g0 * remaining * pi0
    if tail > tail_tol:
        raise ValueError(f"truncated at n_max={n_max} with tail mass {tail:.3g} > {tail_tol:.3g}")
    return AnalyticPmf(probs, tail, source)


def pa_distribution_rule(spec: BirthDeathSpec, tail_tol: float = DEFAULT_TAIL_TOL,
                         n_max: int = DEFAULT_N_MAX) -> AnalyticPmf:
    source = "Thm36ii" if spec.rule.empty_arrival_completes else "Thm36i"
    return pa_distribution_eq8(spec, tail_tol, n_max, source=source)


def geo_closed_form(alpha: float, beta: float, rule: SchedulingRule,
                    tail_tol: float = DEFAULT_TAIL_TOL, n_max: int = DEFAULT_N_MAX) -> AnalyticPmf:
    """Geometric-service distribution at potential-arrival epochs.

    EAS / LAS-IA / LA-DF: ``(1 - g) g**n``. LAS-DA / LA-AF: ``pi(0) =
    [1 + c / (1 - g)]^-1`` and ``pi(n) = c g**(n-1) pi(0)`` with
    ``c = alpha / (beta (1 - alpha))``.
    """
    if alpha == 0:
        return AnalyticPmf(np.array([1.0]), 0.0, "GeoClosedForm")
    g = alpha * (1.0 - beta) / (beta * (1.0 - alpha))
    if g >= 1.0:
        raise UnstableError(f"unstable: gamma = {g:.6g} >= 1")
    if rule.empty_arrival_completes:
        lead, pi0 = g, 1.0 - g
    else:
        lead = alpha / (beta * (1.0 - alpha))
        pi0 = 1.0 / (1.0 + lead / (1.0 - g))
    # pi(n) = lead * pi0 * g**(n-1) for n >= 1 in both classes
    def tail_after(n_top):
        return lead * pi0 * g ** n_top / (1.0 - g)

    n_top = 1
    while tail_after(n_top) > tail_tol and n_top < n_max:
        n_top += 1
    tail = tail_after(n_top)
    if tail > tail_tol:
        raise ValueError(f"truncated at n_max={n_max} with tail mass {tail:.3g}")
    probs = np.concatenate(([pi0], lead * pi0 * g ** np.arange(n_top)))
    return AnalyticPmf(probs, tail, "GeoClosedForm")


def ladf_prearrival_from_edge(alphas: Union[float, Sequence[float]],
                              beta_fn: Callable[[int], float],
                              pi_edge) -> AnalyticPmf:
    """Pre-arrival distribution of an LA-DF birth-death queue from its slot-edge
    distribution.

    ``pi_A(n) = [a(n)(1 - b(n)) pi(n) + a(n+1) b(n+1) pi(n+1)] / sum_k a(k) pi(k)``

    ``b(n)`` is the completion probability with ``n`` customers present at
    the slot edge, so ``b(0) = 0``: an empty system completes nothing
    before the arrival. ``alphas`` is a scalar or a per-state vector (its
    last entry is reused past the end). With a scalar the formula reduces
    to ``(1 - b(n)) pi(n) + b(n+1) pi(n+1)``.
    """
    pi = np.asarray(pi_edge, dtype=float)
    N = pi.size
    b = np.array([0.0] + [beta_fn(j) for j in range(1, N + 1)])
    pi_next = np.append(pi[1:], 0.0)
    if np.ndim(alphas) == 0:
        if float(alphas) == 0:
            raise ValueError("normalizer sum_k alpha(k) pi(k) is zero")
        out = (1.0 - b[:N]) * pi + b[1:] * pi_next
        src = "Eq7"
    else:
        av = np.asarray(alphas, dtype=float)
        a = np.concatenate((av, np.full(max(0, N + 1 - av.size), av[-1])))[: N + 1]
        norm = float(np.dot(a[:N], pi))
        if norm == 0:
            raise ValueError("normalizer sum_k alpha(k) pi(k) is zero")
        out = (a[:N] * (1.0 - b[:N]) * pi + a[1:] * b[1:] * pi_next) / norm
        src = "Eq6"
    out = np.clip(out, 0.0, None)
    # pi_edge may be empirical, off from 1 in the last digits
    return AnalyticPmf(out / out.sum(), 0.0, src)
