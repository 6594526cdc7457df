"""Arrival and service sampling with a fixed RNG consumption contract.

Every sampler consumes exactly one uniform draw. Conventions:

* a Bernoulli-type event occurs iff ``u < p``;
* pmfs are inverted by scanning cumulative sums in index order, returning
  the first index ``k`` with ``u < cdf[k]``.

Bernoulli and Batch arrivals ignore the pre-arrival state (lack of
anticipation); StateDependent arrivals deliberately do not.
"""

from __future__ import annotations

import numpy as np

from .core import (ArrivalSpec, Batch, Bernoulli, Geometric, Hazard, IidPmf,
                   ServiceSpec, StateDependent)


class RngStream:
    """Deterministic uniform stream for one replication.

    Backed by numpy's PCG64 seeded with ``SeedSequence(seed + replication_index)``,
    so a given pair yields the same draws on every platform. ``draws``
    counts how many uniforms have been consumed through :meth:`uniform`
    (the compiled engine adds its own consumption to it).
    """

    def __init__(self, seed: int, replication_index: int = 0):
        self.seed = int(seed)
        self.replication_index = int(replication_index)
        self.generator = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed + self.replication_index)))
        self.draws = 0

    def uniform(self) -> float:
        self.draws += 1
        return self.generator.random()


def inverse_cdf(cdf, u: float) -> int:
    for k, c in enumerate(cdf):
        if u < c:
            return k
    # u landed in the rounding gap above cdf[-1]; take the last supported index
    k = len(cdf) - 1
    while k > 0 and cdf[k] == cdf[k - 1]:
        k -= 1
    return k


def sample_arrival(arrival: ArrivalSpec, pre_state: int, rng) -> int:
    u = rng.uniform()
    if isinstance(arrival, Bernoulli):
        return 1 if u < arrival.alpha else 0
    if isinstance(arrival, StateDependent):
        return 1 if u < arrival.alpha_at(pre_state) else 0
    if isinstance(arrival, Batch):
        return inverse_cdf(np.cumsum(arrival.pmf), u)
    raise TypeError(f"unsupported arrival law: {arrival!r}")


def sample_completion(service: ServiceSpec, current_count: int, rng) -> bool:
    """One departure trial for hazard-type service with ``current_count`` present."""
    if isinstance(service, IidPmf):
        raise TypeError("sample_completion does not apply to IidPmf service; "
                        "durations are tracked by the engine")
    if current_count < 1:
        raise ValueError("departure trial on an empty system")
    return rng.uniform() < service.completion_probability(current_count)


def sample_service_duration(service: ServiceSpec, rng) -> int:
    if not isinstance(service, IidPmf):
        raise TypeError(f"sample_service_duration needs IidPmf service, got {type(service).__name__}")
    return inverse_cdf(np.cumsum(service.pmf), rng.uniform())


def mean_batch_size(arrival: ArrivalSpec) -> float:
    if isinstance(arrival, Bernoulli):
        return float(arrival.alpha)
    if isinstance(arrival, Batch):
        return float(sum(k * p for k, p in enumerate(arrival.pmf)))
    if isinstance(arrival, StateDependent):
        raise TypeError("StateDependent arrivals have no single mean batch size")
    raise TypeError(f"unsupported arrival law: {arrival!r}")


def hazard_function(service: ServiceSpec):
    """Return ``j -> beta(j)`` (``j >= 1``) for Geometric or Hazard service."""
    if isinstance(service, (Geometric, Hazard)):
        return service.completion_probability
    raise TypeError("no state-dependent completion probabilities for IidPmf service")
