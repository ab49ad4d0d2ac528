import numpy as np
import pytest

from crwalk.env import make_environment
from crwalk.tfe import solve_lambda_implicit


@pytest.fixture(scope="session", autouse=True)
def _compile_kernels():
    # numba compiles the cyclic kernels on first use; keep that out of timings
    solve_lambda_implicit(make_environment("periodic", {"values": [0, 1]}), 1.0, 1.0)


@pytest.fixture(scope="session")
def two_periodic():
    return make_environment("periodic", {"values": [0, 1]})


@pytest.fixture(scope="session")
def iid_large():
    """iid Bernoulli(1/2) on a window of 10^5 sites."""
    return make_environment("iid", {"p": 0.5, "half_width": 50_000}, seed=42)


@pytest.fixture(scope="session")
def iid_small():
    return make_environment("iid", {"p": 0.5, "half_width": 5_000}, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


def pytest_configure(config):
    config._criterion_lines = {}


@pytest.fixture
def criterion(request):
    """report(number, ok, detail): record the one-line verdict for a criterion."""
    def report(number, ok, detail=""):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config._criterion_lines[number] = line
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criterion_lines", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
