"""Slot-stepping simulator for the five scheduling rules.

Slot ``t`` is the interval ``(t-1, t]``. Each rule fixes the order of
observations, the arrival trial and the departure trial inside a slot:

EAS
    edge -> potential arrival (same state) -> arrival at ``(t-1)+``
    -> center -> departure trial at ``t-``. A customer arriving to an idle
    server may leave in the same slot.
LAS-IA
    edge -> departure trial at ``(t-1)+`` -> center -> potential arrival
    (same state) -> arrival at ``t-``; an arrival to an idle server starts
    service at once and faces its first trial at ``t+``.
LAS-DA
    as LAS-IA, but an arrival to an idle server starts service at edge
    ``t`` and the trial at ``t+`` is skipped for it.
LA-AF
    edge = center = potential arrival -> arrival -> departure trial. Only
    customers whose service started in an earlier slot are eligible.
    (This eligibility is inferred from the ``beta(0) = 0`` class, it is not
    stated with the rule itself.)
LA-DF
    edge = center -> departure trial -> potential arrival -> arrival.

Queue discipline is FCFS; a promoted customer starts service at the
instant of promotion. Batch members join together and count as one
arrival event observed once. For IidPmf service the duration is drawn
when service starts and every eligible trial consumes one slot of it.

:func:`advance_slot` is the readable reference; :func:`run_simulation`
uses a compiled kernel with the same RNG consumption order, and the two
are checked against each other in the test suite.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Optional

import numpy as np

from . import _kernel
from .core import (Batch, Bernoulli, EmpiricalReport, Geometric, Hazard, IidPmf,
                   ModelSpec, SchedulingRule, StateDependent, ValidatedSpec,
                   validate_spec)
from .processes import (RngStream, sample_arrival, sample_completion,
                        sample_service_duration)


@dataclass(frozen=True)
class QueueState:
    count: int = 0
    hol_commencement_slot: Optional[int] = None
    hol_remaining: Optional[int] = None
    # state seen at the latest potential-arrival epoch (selects the hazard
    # under Hazard(index="arrival_epoch"))
    last_pa: int = 0


@dataclass(frozen=True)
class EpochRecord:
    slot: int
    z_edge: int
    z_center: int
    z_pa: int
    arrival_event: bool
    batch_size: int
    departed: bool = False


class _Slot:
    """Mutable scratch state for one call of :func:`advance_slot`."""

    def __init__(self, state: QueueState, service, slot: int, rng):
        self.n = state.count
        self.comm = state.hol_commencement_slot
        self.rem = state.hol_remaining
        self.last_pa = state.last_pa
        self.service = service
        self.slot = slot
        self.rng = rng
        self.departed = False

    def commence(self, at_slot: int) -> None:
        self.comm = at_slot
        self.rem = sample_service_duration(self.service, self.rng) if isinstance(self.service, IidPmf) else None

    def trial(self) -> None:
        if isinstance(self.service, IidPmf):
            self.rem -= 1
            done = self.rem == 0
        else:
            if isinstance(self.service, Hazard) and self.service.index == "arrival_epoch":
                j = max(1, self.last_pa)
            else:
                j = self.n
            done = sample_completion(self.service, j, self.rng)
        if done:
            self.departed = True
            self.n -= 1
            if self.n >= 1:
                self.commence(self.slot)
            else:
                self.comm = self.rem = None

    def arrive(self, arrival, defer: bool = False) -> int:
        k = sample_arrival(arrival, self.n, self.rng)
        self.last_pa = self.n
        if k > 0:
            if self.n == 0:
                if defer:
                    self.comm, self.rem = self.slot + 1, None
                else:
                    self.commence(self.slot)
            self.n += k
        return k

    def state(self) -> QueueState:
        if self.n == 0:
            return QueueState(0, None, None, self.last_pa)
        return QueueState(self.n, self.comm, self.rem, self.last_pa)


def advance_slot(state: QueueState, rule: SchedulingRule, arrival, service,
                 slot: int, rng) -> tuple[QueueState, EpochRecord]:
    """Process slot ``(slot-1, slot]`` and report what each observer saw."""
    s = _Slot(state, service, slot, rng)
    z_edge = s.n

    if rule is SchedulingRule.EAS:
        z_pa = s.n
        k = s.arrive(arrival)
        z_center = s.n
        if s.n >= 1:
            s.trial()

    elif rule in (SchedulingRule.LAS_IA, SchedulingRule.LAS_DA):
        if s.n >= 1:
            if rule is SchedulingRule.LAS_DA and s.comm == slot:
                # delayed-access customer starts service at this edge
                if isinstance(service, IidPmf) and s.rem is None:
                    s.rem = sample_service_duration(service, rng)
            else:
                s.trial()
        z_center = z_pa = s.n
        k = s.arrive(arrival, defer=rule is SchedulingRule.LAS_DA)

    elif rule is SchedulingRule.LA_AF:
        z_center = z_pa = s.n
        k = s.arrive(arrival)
        if s.n >= 1 and s.comm < slot:
            s.trial()

    elif rule is SchedulingRule.LA_DF:
        z_center = s.n
        if s.n >= 1:
            s.trial()
        z_pa = s.n
        k = s.arrive(arrival)

    else:  # pragma: no cover
        raise ValueError(f"unknown rule: {rule}")

    record = EpochRecord(slot, z_edge, z_center, z_pa, k > 0, k, s.departed)
    return s.state(), record


def iter_slots(spec: ModelSpec, rng=None, state: QueueState = QueueState()) -> Iterable[tuple[QueueState, EpochRecord]]:
    """Yield ``(state_after, record)`` for slots ``1..spec.slots`` (no warmup cut)."""
    spec = validate_spec(spec).spec
    rng = rng if rng is not None else RngStream(spec.seed)
    for t in range(1, spec.slots + 1):
        state, rec = advance_slot(state, spec.rule, spec.arrival, spec.service, t, rng)
        yield state, rec


# -- full runs ---------------------------------------------------------------

def _report_from_counts(spec, counts, arrival_events, admitted, departures, final_count, seeds):
    edge, center, pa, pre = counts
    return EmpiricalReport(
        spec=spec,
        total_slots_observed=spec.slots - spec.warmup,
        arrival_events=int(arrival_events),
        edge_count=edge, center_count=center, pa_count=pa, prearrival_count=pre,
        admitted=int(admitted), departures=int(departures), final_count=int(final_count),
        replication_seeds=tuple(seeds),
    )


def simulate_reference(spec, replication_index: int = 0) -> EmpiricalReport:
    """Pure-Python run built on :func:`advance_slot`. Slow; used as a cross-check."""
    vspec = validate_spec(spec)
    spec = vspec.spec
    rng = RngStream(spec.seed, replication_index)
    cells = spec.max_tracked_state + 2
    over = cells - 1
    counts = [np.zeros(cells, dtype=np.int64) for _ in range(4)]
    edge, center, pa, pre = counts
    events = admitted = departures = 0
    state = QueueState()
    for t in range(1, spec.slots + 1):
        state, rec = advance_slot(state, spec.rule, spec.arrival, spec.service, t, rng)
        admitted += rec.batch_size
        departures += rec.departed
        if t > spec.warmup:
            edge[min(rec.z_edge, over)] += 1
            center[min(rec.z_center, over)] += 1
            pa[min(rec.z_pa, over)] += 1
            if rec.arrival_event:
                pre[min(rec.z_pa, over)] += 1
                events += 1
    return _report_from_counts(spec, counts, events, admitted, departures, state.count,
                               [spec.seed + replication_index])


_RULE_CODE = {
    SchedulingRule.EAS: _kernel.EAS,
    SchedulingRule.LAS_IA: _kernel.LAS_IA,
    SchedulingRule.LAS_DA: _kernel.LAS_DA,
    SchedulingRule.LA_AF: _kernel.LA_AF,
    SchedulingRule.LA_DF: _kernel.LA_DF,
}


def _pack(spec: ModelSpec):
    arrival, service = spec.arrival, spec.service
    empty = np.zeros(0)
    if isinstance(arrival, Bernoulli):
        arr = (_kernel.ARR_BERNOULLI, float(arrival.alpha), empty, 0.0)
    elif isinstance(arrival, Batch):
        arr = (_kernel.ARR_BATCH, 0.0, np.cumsum(arrival.pmf), 0.0)
    elif isinstance(arrival, StateDependent):
        arr = (_kernel.ARR_STATE, 0.0, np.asarray(arrival.alphas, dtype=float), float(arrival.tail_alpha))
    else:
        raise TypeError(f"unsupported arrival law: {arrival!r}")

    if isinstance(service, Geometric):
        svc = (_kernel.SVC_HAZARD, empty, float(service.beta), _kernel.IDX_TRIAL, empty)
    elif isinstance(service, Hazard):
        mode = _kernel.IDX_ARRIVAL_EPOCH if service.index == "arrival_epoch" else _kernel.IDX_TRIAL
        svc = (_kernel.SVC_HAZARD, np.asarray(service.betas, dtype=float), float(service.tail_beta), mode, empty)
    elif isinstance(service, IidPmf):
        svc = (_kernel.SVC_IID, empty, 0.0, _kernel.IDX_TRIAL, np.cumsum(service.pmf))
    else:
        raise TypeError(f"unsupported service law: {service!r}")
    return arr, svc


def run_replication(spec, replication_index: int = 0, rng: RngStream | None = None) -> EmpiricalReport:
    """One replication with the compiled kernel, stream ``(seed, replication_index)``."""
    spec = validate_spec(spec).spec
    rng = rng if rng is not None else RngStream(spec.seed, replication_index)
    (ak, aalpha, avec, atail), (sk, betas, btail, mode, dcdf) = _pack(spec)
    cells = spec.max_tracked_state + 2
    counts = [np.zeros(cells, dtype=np.int64) for _ in range(4)]
    out = _kernel.run(rng.generator, _RULE_CODE[spec.rule],
                      ak, aalpha, avec, atail, sk, betas, btail, mode, dcdf,
                      spec.slots, spec.warmup, *counts)
    events, admitted, departures, final_count, draws = out
    rng.draws += int(draws)
    return _report_from_counts(spec, counts, events, admitted, departures, final_count,
                               [spec.seed + replication_index])


def _thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("BASTA_THREADS", "1")))
    except ValueError:
        return 1


def run_simulation(spec, threads: int | None = None) -> EmpiricalReport:
    """Run every replication of ``spec`` and merge them.

    Replication ``r`` uses the stream seeded with ``seed + r``. Replications
    may run concurrently (``threads``, default from ``BASTA_THREADS``); the
    merge is order-independent so the result does not depend on scheduling.
    """
    vspec = validate_spec(spec)
    reps = vspec.spec.replications
    threads = threads or _thread_cap()
    if reps == 1 or threads == 1:
        reports = [run_replication(vspec, r) for r in range(reps)]
    else:
        with ThreadPoolExecutor(max_workers=min(threads, reps)) as pool:
            reports = list(pool.map(lambda r: run_replication(vspec, r), range(reps)))
    return merge_reports(reports)


def merge_reports(reports) -> EmpiricalReport:
    reports = list(reports)
    if not reports:
        raise ValueError("merge_reports: nothing to merge")
    first = reports[0]
    for r in reports[1:]:
        if r.n_cells != first.n_cells:
            raise ValueError("merge_reports: mismatched max_tracked_state "
                             f"({first.n_cells - 2} vs {r.n_cells - 2})")
        if (r.spec.rule, r.spec.arrival, r.spec.service) != (first.spec.rule, first.spec.arrival, first.spec.service):
            raise ValueError("merge_reports: reports come from different models")
    if len(reports) == 1:
        return first
    return EmpiricalReport(
        spec=first.spec,
        total_slots_observed=sum(r.total_slots_observed for r in reports),
        arrival_events=sum(r.arrival_events for r in reports),
        edge_count=sum(r.edge_count for r in reports),
        center_count=sum(r.center_count for r in reports),
        pa_count=sum(r.pa_count for r in reports),
        prearrival_count=sum(r.prearrival_count for r in reports),
        admitted=sum(r.admitted for r in reports),
        departures=sum(r.departures for r in reports),
        final_count=sum(r.final_count for r in reports),
        replication_seeds=tuple(sorted(s for r in reports for s in r.replication_seeds)),
    )
