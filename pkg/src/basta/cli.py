"""Command line: ``basta {simulate,analytic,verify,sweep} CONFIG [--out DIR] [--seed N]``.

The configuration is a JSON document::

    {"rule": "LA-DF",
     "arrival": {"type": "bernoulli", "alpha": 0.3},
     "service": {"type": "geometric", "beta": 0.5},
     "slots": 1000000, "seed": 42}

Optional keys: ``warmup`` (10000), ``replications`` (1),
``max_tracked_state`` (1000), ``thresholds`` (``basta``, ``epoch``,
``analytic``), ``out`` and, for ``sweep``, ``grid`` with any of
``alpha`` / ``beta`` / ``rule`` lists.

Arrival types: ``bernoulli {alpha}``, ``batch {pmf}``,
``state_dependent {alphas, tail_alpha}``. Service types:
``geometric {beta}``, ``hazard {betas, tail_beta, index}``, ``iid {pmf}``.

Exit codes: 0 all checks passed, 1 a check failed, 2 I/O error,
3 invalid configuration or no feasible analytic answer.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .analytic import BirthDeathSpec, UnstableError, pa_distribution_rule
from .core import (Batch, Bernoulli, Geometric, Hazard, IidPmf, ModelSpec,
                   SchedulingRule, SpecError, StateDependent, validate_spec)
from .engine import _thread_cap, run_simulation
from .verify import DEFAULT_THRESHOLDS, run_checks

log = logging.getLogger("basta")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_IO, EXIT_INFEASIBLE = 0, 1, 2, 3
DEFAULTS = {"warmup": 10_000, "replications": 1, "max_tracked_state": 1000}
DIST_HEADER = ["n", "pi_edge", "pi_center", "pi_pa", "pi_prearrival", "lambda_n"]
SWEEP_KEYS = ("rule", "alpha", "beta")
KNOWN_KEYS = {"rule", "arrival", "service", "slots", "seed", "warmup", "replications",
              "max_tracked_state", "thresholds", "out", "grid"}


class ConfigError(ValueError):
    pass


def fmt(x) -> str:
    return format(float(x), ".9g")


# -- configuration -------------------------------------------------------------

def _get(d: dict, key: str, where: str, kind=None):
    if key not in d:
        raise ConfigError(f"{where}: missing required key '{key}'")
    value = d[key]
    if kind is not None and (not isinstance(value, kind) or isinstance(value, bool)):
        raise ConfigError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}, got {value!r}")
    return value


def _prob_list(d: dict, key: str, where: str) -> tuple:
    value = _get(d, key, where, list)
    if not value or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise ConfigError(f"{where}.{key}: malformed pmf {value!r}")
    return tuple(float(v) for v in value)


_NUM = (int, float)


def _arrival_from(d) -> object:
    if not isinstance(d, dict):
        raise ConfigError("arrival: expected an object")
    kind = _get(d, "type", "arrival", str)
    if kind == "bernoulli":
        return Bernoulli(float(_get(d, "alpha", "arrival", _NUM)))
    if kind == "batch":
        return Batch(_prob_list(d, "pmf", "arrival"))
    if kind == "state_dependent":
        return StateDependent(_prob_list(d, "alphas", "arrival"),
                              float(_get(d, "tail_alpha", "arrival", _NUM)))
    raise ConfigError(f"arrival.type: unknown arrival type {kind!r}")


def _arrival_to(a) -> dict:
    if isinstance(a, Bernoulli):
        return {"type": "bernoulli", "alpha": a.alpha}
    if isinstance(a, Batch):
        return {"type": "batch", "pmf": list(a.pmf)}
    return {"type": "state_dependent", "alphas": list(a.alphas), "tail_alpha": a.tail_alpha}


def _service_from(d) -> object:
    if not isinstance(d, dict):
        raise ConfigError("service: expected an object")
    kind = _get(d, "type", "service", str)
    if kind == "geometric":
        return Geometric(float(_get(d, "beta", "service", _NUM)))
    if kind == "hazard":
        return Hazard(_prob_list(d, "betas", "service"),
                      float(_get(d, "tail_beta", "service", _NUM)),
                      d.get("index", "trial"))
    if kind == "iid":
        return IidPmf(_prob_list(d, "pmf", "service"))
    raise ConfigError(f"service.type: unknown service type {kind!r}")


def _service_to(s) -> dict:
    if isinstance(s, Geometric):
        return {"type": "geometric", "beta": s.beta}
    if isinstance(s, Hazard):
        return {"type": "hazard", "betas": list(s.betas), "tail_beta": s.tail_beta, "index": s.index}
    return {"type": "iid", "pmf": list(s.pmf)}


@dataclass(frozen=True)
class ExperimentConfig:
    spec: ModelSpec
    thresholds: dict = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))
    out: str = "out"
    grid: dict | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(d) - KNOWN_KEYS
        if unknown:
            raise ConfigError(f"config: unknown key(s) {sorted(unknown)}")
        try:
            rule = SchedulingRule.parse(_get(d, "rule", "config", str))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        ints = {}
        for key in ("slots", "seed", *DEFAULTS):
            if key in d:
                ints[key] = _get(d, key, "config", int)
            elif key in DEFAULTS:
                ints[key] = DEFAULTS[key]
            else:
                _get(d, key, "config")
        spec = ModelSpec(rule=rule, arrival=_arrival_from(_get(d, "arrival", "config")),
                         service=_service_from(_get(d, "service", "config")), **ints)
        try:
            validate_spec(spec)
        except SpecError as exc:
            raise ConfigError("; ".join(exc.errors)) from None

        thresholds = dict(DEFAULT_THRESHOLDS)
        for key, value in (d.get("thresholds") or {}).items():
            if key not in DEFAULT_THRESHOLDS or not isinstance(value, _NUM):
                raise ConfigError(f"thresholds.{key}: unknown key or non-numeric value")
            thresholds[key] = float(value)

        grid = d.get("grid")
        if grid is not None:
            if not isinstance(grid, dict) or set(grid) - set(SWEEP_KEYS):
                raise ConfigError(f"grid: keys must be among {SWEEP_KEYS}")
            grid = {k: list(grid[k]) for k in SWEEP_KEYS if k in grid}
            for k, values in grid.items():
                if not values:
                    raise ConfigError(f"grid.{k}: empty list")
            if "rule" in grid:
                try:
                    grid["rule"] = [SchedulingRule.parse(r).value for r in grid["rule"]]
                except ValueError as exc:
                    raise ConfigError(f"grid.rule: {exc}") from None
        return cls(spec=spec, thresholds=thresholds, out=str(d.get("out", "out")), grid=grid)

    def to_dict(self) -> dict:
        s = self.spec
        d = {
            "rule": s.rule.value,
            "arrival": _arrival_to(s.arrival),
            "service": _service_to(s.service),
            "slots": s.slots, "warmup": s.warmup, "seed": s.seed,
            "replications": s.replications, "max_tracked_state": s.max_tracked_state,
            "thresholds": dict(self.thresholds),
            "out": self.out,
        }
        if self.grid is not None:
            d["grid"] = {k: list(v) for k, v in self.grid.items()}
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def parse_config(path) -> ExperimentConfig:
    """Read and validate a JSON configuration file.

    Raises ``OSError`` when the file cannot be read and :class:`ConfigError`
    (with a line or field diagnostic) when its contents are invalid.
    """
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return ExperimentConfig.from_dict(data)


# -- output writers ----------------------------------------------------------

def write_distributions(report, path: Path) -> None:
    last = report.n_cells - 1
    totals = report.edge_count + report.center_count + report.pa_count + report.prearrival_count
    seen = np.flatnonzero(totals[:last])
    top = int(seen[-1]) if seen.size else 0
    pi = [report.pi_edge, report.pi_center, report.pi_pa, report.pi_prearrival]
    lam = report.lambda_n_hat
    rows = list(range(top + 1)) + ([last] if totals[last] else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DIST_HEADER)
        for n in rows:
            cells = ["overflow" if n == last else str(n)]
            cells += [fmt(v[n]) if v is not None else "" for v in pi]
            cells.append("" if np.isnan(lam[n]) else fmt(lam[n]))
            w.writerow(cells)


def summary_dict(report, vspec) -> dict:
    return {
        "rule": vspec.spec.rule.value,
        "lambda_hat": float(fmt(report.lambda_hat)),
        "arrival_events": report.arrival_events,
        "total_slots": report.total_slots_observed,
        "stable": vspec.stable,
        "seed": vspec.spec.seed,
        "replication_seeds": list(report.replication_seeds),
    }


def write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


CHECK_HEADER = ["name", "statistic", "threshold", "passed"]


def write_checks(results, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CHECK_HEADER)
        for r in results:
            w.writerow([r.name, fmt(r.statistic), fmt(r.threshold), str(r.passed).lower()])


# -- commands ----------------------------------------------------------------

def _out_dir(out) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_simulate(config: ExperimentConfig, out=None) -> int:
    vspec = validate_spec(config.spec)
    report = run_simulation(vspec)
    out = _out_dir(out or config.out)
    write_distributions(report, out / "distributions.csv")
    write_json(summary_dict(report, vspec), out / "summary.json")
    return EXIT_OK


def cmd_analytic(config: ExperimentConfig, out=None) -> int:
    spec = config.spec
    if isinstance(spec.service, IidPmf):
        print("no analytic form for general service", file=sys.stderr)
        return EXIT_INFEASIBLE
    if not isinstance(spec.arrival, Bernoulli):
        print("analytic form needs Bernoulli arrivals", file=sys.stderr)
        return EXIT_INFEASIBLE
    try:
        bd = BirthDeathSpec.from_service(spec.arrival.alpha, spec.service, spec.rule)
        pmf = pa_distribution_rule(bd)
    except UnstableError:
        print(f"unstable: γ ≥ 1 (tail ratio {fmt(bd.gamma_tail)})", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INFEASIBLE
    out = _out_dir(out or config.out)
    with open(out / "analytic.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "pi_pa"])
        for n, p in enumerate(pmf.probs):
            w.writerow([n, fmt(p)])
    write_json({"rule": spec.rule.value, "source": pmf.source, "tail_mass": float(fmt(pmf.tail_mass)),
                "states": int(pmf.probs.size)}, out / "analytic.json")
    return EXIT_OK


def _verify_spec(spec: ModelSpec, thresholds: dict):
    vspec = validate_spec(spec)
    report = run_simulation(vspec, threads=1)
    return vspec, report, run_checks(report, thresholds, stable=vspec.stable)


def cmd_verify(config: ExperimentConfig, out=None) -> int:
    vspec, report, results = _verify_spec(config.spec, config.thresholds)
    out = _out_dir(out or config.out)
    write_distributions(report, out / "distributions.csv")
    summary = summary_dict(report, vspec)
    summary["checks_passed"] = sum(r.passed for r in results)
    summary["checks_total"] = len(results)
    write_json(summary, out / "summary.json")
    write_checks(results, out / "checks.csv")
    for r in results:
        log.info("%-28s %-5s statistic=%s threshold=%s", r.name, "PASS" if r.passed else "FAIL",
                 fmt(r.statistic), fmt(r.threshold))
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


def expand_grid(config: ExperimentConfig) -> list[ModelSpec]:
    """Cells in ``rule x alpha x beta`` order; cell ``i`` gets seed ``seed + i``."""
    grid = config.grid or {}
    if not grid:
        raise ConfigError("sweep needs a non-empty 'grid'")
    base = config.spec
    if "alpha" in grid and not isinstance(base.arrival, Bernoulli):
        raise ConfigError("grid.alpha needs Bernoulli arrivals")
    if "beta" in grid and not isinstance(base.service, Geometric):
        raise ConfigError("grid.beta needs geometric service")
    axes = [grid.get("rule", [base.rule.value]),
            grid.get("alpha", [getattr(base.arrival, "alpha", None)]),
            grid.get("beta", [getattr(base.service, "beta", None)])]
    cells = []
    for i, (rule, alpha, beta) in enumerate(itertools.product(*axes)):
        spec = replace(base, rule=SchedulingRule.parse(rule), seed=base.seed + i)
        if "alpha" in grid:
            spec = replace(spec, arrival=Bernoulli(float(alpha)))
        if "beta" in grid:
            spec = replace(spec, service=Geometric(float(beta)))
        try:
            validate_spec(spec)
        except SpecError as exc:
            raise ConfigError(f"grid cell {i}: {exc}") from None
        cells.append(spec)
    return cells


SWEEP_HEADER = ["cell", "rule", "alpha", "beta", "seed", "stable", "check", "statistic", "threshold", "passed"]


def cmd_sweep(config: ExperimentConfig, out=None) -> int:
    cells = expand_grid(config)
    threads = min(_thread_cap(), len(cells))

    def run_cell(spec):
        return _verify_spec(spec, config.thresholds)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run_cell, cells))
    else:
        outcomes = [run_cell(c) for c in cells]

    out = _out_dir(out or config.out)
    all_passed = True
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for i, (spec, (vspec, _, results)) in enumerate(zip(cells, outcomes)):
            alpha = getattr(spec.arrival, "alpha", "")
            beta = getattr(spec.service, "beta", "")
            for r in results:
                all_passed &= r.passed
                w.writerow([i, spec.rule.value, alpha if alpha == "" else fmt(alpha),
                            beta if beta == "" else fmt(beta), spec.seed,
                            str(vspec.stable).lower(), r.name, fmt(r.statistic),
                            fmt(r.threshold), str(r.passed).lower()])
    return EXIT_OK if all_passed else EXIT_CHECK_FAILED


COMMANDS = {"simulate": cmd_simulate, "analytic": cmd_analytic, "verify": cmd_verify, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="basta", description="Discrete-time queue BASTA laboratory")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config")
        sp.add_argument("--out", default=None, help="output directory (default: config 'out' or ./out)")
        sp.add_argument("--seed", type=int, default=None, help="override the configured seed")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = parse_config(args.config)
        if args.seed is not None:
            config = replace(config, spec=replace(config.spec, seed=args.seed))
            validate_spec(config.spec)
        return COMMANDS[args.command](config, args.out)
    except (ConfigError, SpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
