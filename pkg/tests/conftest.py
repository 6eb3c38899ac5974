import numpy as np
import pytest

from cgbias import SolverConfig


@pytest.fixture
def cfg():
    return SolverConfig(tolerance=1e-10, max_iters=20000)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for status in ("passed", "failed"):
        for rep in terminalreporter.stats.get(status, []):
            if rep.when != "call":
                continue
            lines += [v for k, v in rep.user_properties if k == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: (int(s.split()[1].rstrip(":")), "informational" in s)):
            terminalreporter.write_line(line)
