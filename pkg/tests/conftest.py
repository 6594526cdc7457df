import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from basta import (Batch, Bernoulli, Geometric, Hazard, IidPmf, ModelSpec,
                   SchedulingRule, StateDependent, run_simulation)

RULES = list(SchedulingRule)
ARRIVALS = [Bernoulli(0.3), Batch((0.7, 0.2, 0.1)), StateDependent((0.5,), 0.1)]
SERVICES = [Geometric(0.5), Hazard((0.5,), 0.75), IidPmf((0.0, 0.0, 1.0))]


class ScriptedStream:
    """Stand-in for RngStream that replays fixed uniforms and counts them."""

    def __init__(self, *values):
        self.values = list(values)
        self.draws = 0

    def uniform(self):
        self.draws += 1
        return self.values.pop(0)

    @property
    def exhausted(self):
        return not self.values


@pytest.fixture
def scripted():
    return ScriptedStream


@pytest.fixture(scope="session", autouse=True)
def _compile_kernel():
    # JIT-compile once so per-test timings do not include compilation
    run_simulation(ModelSpec(SchedulingRule.EAS, Bernoulli(0.3), Geometric(0.5), slots=200, warmup=10))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
