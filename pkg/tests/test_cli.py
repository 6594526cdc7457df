import csv
import json
import subprocess
import sys

import pytest

from basta import SchedulingRule
from basta.cli import ConfigError, ExperimentConfig, main, parse_config

CANON = {"rule": "LA-DF", "arrival": {"type": "bernoulli", "alpha": 0.3},
         "service": {"type": "geometric", "beta": 0.5}, "slots": 1_000_000, "seed": 42}


def write_config(tmp_path, name="c.json", **over):
    cfg = {**CANON, **over}
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=2))
    return path


def run(cmd, cfg, out, *extra):
    return main([cmd, str(cfg), "--out", str(out), *extra])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# -- parsing ----------------------------------------------------------------------------------------

def test_parse_canonical(tmp_path):
    c = parse_config(write_config(tmp_path))
    s = c.spec
    assert s.rule is SchedulingRule.LA_DF and s.slots == 1_000_000 and s.seed == 42
    assert (s.warmup, s.replications, s.max_tracked_state) == (10_000, 1, 1000)
    assert c.thresholds == {"basta": 0.01, "epoch": 0.01, "analytic": 0.015}


def test_parse_unknown_rule(tmp_path):
    with pytest.raises(ConfigError, match="unknown rule: LIFO"):
        parse_config(write_config(tmp_path, rule="LIFO"))


@pytest.mark.parametrize("over, message", [
    ({"arrival": {"type": "batch", "pmf": [0.7, "x"]}}, "malformed pmf"),
    ({"arrival": {"type": "batch", "pmf": [0.7, 0.2, 0.2]}}, "sums to 1.1"),
    ({"service": {"type": "geometric"}}, "service: missing required key 'beta'"),
    ({"slots": "many"}, "config.slots"),
    ({"colour": "red"}, "unknown key"),
    ({"warmup": 2_000_000}, "warmup"),
    ({"thresholds": {"basta": "tight"}}, "thresholds.basta"),
    ({"grid": {"gamma": [1]}}, "grid"),
])
def test_parse_errors(tmp_path, over, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(write_config(tmp_path, **over))


def test_parse_missing_key(tmp_path):
    cfg = dict(CANON)
    del cfg["slots"]
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    with pytest.raises(ConfigError, match="missing required key 'slots'"):
        parse_config(path)


def test_parse_reports_line_of_syntax_error(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{\n  "rule": "EAS",\n  "slots": ,\n}')
    with pytest.raises(ConfigError, match="line 3"):
        parse_config(path)


@pytest.mark.parametrize("over", [
    {},
    {"arrival": {"type": "batch", "pmf": [0.7, 0.2, 0.1]}, "warmup": 5, "replications": 3},
    {"arrival": {"type": "state_dependent", "alphas": [0.5], "tail_alpha": 0.1}},
    {"service": {"type": "hazard", "betas": [0.5], "tail_beta": 0.75, "index": "arrival_epoch"}},
    {"service": {"type": "iid", "pmf": [0, 0, 1]}, "thresholds": {"basta": 0.02}},
    {"grid": {"alpha": [0.1, 0.2], "rule": ["EAS", "LA-AF"]}, "out": "elsewhere"},
])
def test_config_round_trip(tmp_path, over):
    c = parse_config(write_config(tmp_path, **over))
    again = ExperimentConfig.from_dict(json.loads(c.dumps()))
    assert again == c and again.dumps() == c.dumps()


# -- simulate ----------------------------------------------------------------------------------------

@pytest.mark.slow
def test_simulate_canonical(tmp_path):
    assert run("simulate", write_config(tmp_path), tmp_path / "o") == 0
    rows = read_csv(tmp_path / "o" / "distributions.csv")
    assert rows[0] == ["n", "pi_edge", "pi_center", "pi_pa", "pi_prearrival", "lambda_n"]
    assert rows[1][0] == "0" and abs(float(rows[1][4]) - 4 / 7) <= 0.01
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert {"lambda_hat", "arrival_events", "total_slots", "stable", "seed"} <= set(summary)
    assert summary["total_slots"] == 990_000 and summary["stable"] is True


def test_simulate_without_arrivals(tmp_path):
    cfg = write_config(tmp_path, arrival={"type": "bernoulli", "alpha": 0.0}, slots=20_000)
    assert run("simulate", cfg, tmp_path / "o") == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["arrival_events"] == 0
    rows = read_csv(tmp_path / "o" / "distributions.csv")
    assert rows[1:] == [["0", "1", "1", "1", "", "0"]]


def test_simulate_replication_seeds(tmp_path):
    cfg = write_config(tmp_path, slots=20_000, warmup=100, replications=4, seed=7)
    assert run("simulate", cfg, tmp_path / "o") == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["replication_seeds"] == [7, 8, 9, 10]
    assert summary["total_slots"] == 4 * 19_900


def test_seed_flag_overrides(tmp_path):
    cfg = write_config(tmp_path, slots=20_000, warmup=100)
    assert run("simulate", cfg, tmp_path / "o", "--seed", "5") == 0
    assert json.loads((tmp_path / "o" / "summary.json").read_text())["seed"] == 5


# -- analytic ----------------------------------------------------------------------------------------

@pytest.mark.parametrize("rule, head", [("EAS", [0.571429, 0.244898]), ("LAS-DA", [0.4, 0.342857])])
def test_analytic_rows(tmp_path, rule, head):
    assert run("analytic", write_config(tmp_path, rule=rule), tmp_path / "o") == 0
    rows = read_csv(tmp_path / "o" / "analytic.csv")
    assert rows[0] == ["n", "pi_pa"]
    assert [int(r[0]) for r in rows[1:3]] == [0, 1]
    assert [float(r[1]) for r in rows[1:3]] == pytest.approx(head, abs=5e-7)
    meta = json.loads((tmp_path / "o" / "analytic.json").read_text())
    assert meta["source"] == ("Thm36ii" if rule == "EAS" else "Thm36i")
    assert meta["tail_mass"] <= 1e-12


def test_analytic_unstable(tmp_path, capsys):
    cfg = write_config(tmp_path, arrival={"type": "bernoulli", "alpha": 0.6})
    assert run("analytic", cfg, tmp_path / "o") == 3
    assert "unstable: γ ≥ 1" in capsys.readouterr().err


def test_analytic_general_service(tmp_path, capsys):
    cfg = write_config(tmp_path, service={"type": "iid", "pmf": [0, 0, 1]})
    assert run("analytic", cfg, tmp_path / "o") == 3
    assert "no analytic form for general service" in capsys.readouterr().err


# -- verify ------------------------------------------------------------------------------------------

@pytest.mark.slow
@pytest.mark.parametrize("rule", [r.value for r in SchedulingRule])
def test_verify_canonical_all_rules(tmp_path, rule):
    assert run("verify", write_config(tmp_path, rule=rule), tmp_path / "o") == 0
    rows = read_csv(tmp_path / "o" / "checks.csv")
    assert rows[0] == ["name", "statistic", "threshold", "passed"]
    assert len(rows) >= 4


@pytest.mark.slow
def test_verify_laa_violation(tmp_path):
    cfg = write_config(tmp_path, rule="LA-AF",
                       arrival={"type": "state_dependent", "alphas": [0.5], "tail_alpha": 0.1})
    assert run("verify", cfg, tmp_path / "o") == 1
    checks = {r[0]: r[3] for r in read_csv(tmp_path / "o" / "checks.csv")[1:]}
    assert checks == {"theorem31": "true", "basta": "false"}


def test_verify_short_run_is_well_formed(tmp_path):
    cfg = write_config(tmp_path, slots=100, warmup=10)
    assert run("verify", cfg, tmp_path / "o") in (0, 1)
    rows = read_csv(tmp_path / "o" / "checks.csv")
    assert all(len(r) == 4 and r[3] in ("true", "false") for r in rows[1:])
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["checks_total"] == len(rows) - 1


@pytest.mark.slow
def test_verify_byte_identical(tmp_path):
    cfg = write_config(tmp_path, replications=2, slots=300_000)
    for out in ("a", "b"):
        assert run("verify", cfg, tmp_path / out) == 0
    for name in ("checks.csv", "distributions.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


# -- sweep -------------------------------------------------------------------------------------------

@pytest.mark.slow
def test_sweep_alpha_by_rule(tmp_path):
    cfg = write_config(tmp_path, grid={"alpha": [0.1, 0.2, 0.3], "rule": [r.value for r in SchedulingRule]})
    assert run("sweep", cfg, tmp_path / "o") == 0
    rows = read_csv(tmp_path / "o" / "sweep.csv")
    header, body = rows[0], rows[1:]
    assert header == ["cell", "rule", "alpha", "beta", "seed", "stable", "check", "statistic", "threshold", "passed"]
    basta = [r for r in body if r[6] == "basta"]
    assert len(basta) == 15 and all(float(r[7]) <= 0.01 for r in basta)
    assert sorted({int(r[4]) for r in body}) == list(range(42, 57))


def test_sweep_unstable_cell(tmp_path):
    cfg = write_config(tmp_path, slots=50_000, warmup=1000, grid={"alpha": [0.5]})
    run("sweep", cfg, tmp_path / "o")
    rows = read_csv(tmp_path / "o" / "sweep.csv")[1:]
    assert {r[5] for r in rows} == {"false"}
    assert [r[9] for r in rows if r[6] == "theorem31"] == ["true"]
    assert not any(r[6].startswith("analytic") for r in rows)


def test_single_cell_sweep_matches_verify(tmp_path):
    cfg = write_config(tmp_path, slots=100_000, warmup=1000, grid={"rule": ["LA-DF"]})
    code_sweep = run("sweep", cfg, tmp_path / "s")
    code_verify = run("verify", cfg, tmp_path / "v")
    assert code_sweep == code_verify
    sweep = [(r[6], r[7], r[8], r[9]) for r in read_csv(tmp_path / "s" / "sweep.csv")[1:]]
    verify = [tuple(r) for r in read_csv(tmp_path / "v" / "checks.csv")[1:]]
    assert sweep == verify


def test_sweep_needs_grid(tmp_path, capsys):
    assert run("sweep", write_config(tmp_path), tmp_path / "o") == 3
    assert "grid" in capsys.readouterr().err


# -- exit codes --------------------------------------------------------------------------------------

def test_missing_config_is_io_error(tmp_path):
    assert run("verify", tmp_path / "nope.json", tmp_path / "o") == 2


def test_unwritable_output_is_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = write_config(tmp_path, slots=2000, warmup=10)
    assert run("simulate", cfg, blocker / "sub") == 2


def test_invalid_config_exit_code(tmp_path):
    assert run("simulate", write_config(tmp_path, rule="LIFO"), tmp_path / "o") == 3


def test_module_entry_point(tmp_path):
    cfg = write_config(tmp_path, rule="EAS")
    proc = subprocess.run([sys.executable, "-m", "basta", "analytic", str(cfg), "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "o" / "analytic.csv").exists()
