import numpy as np
import pytest

from sphg.harness import RuleCache, evaluation_rule
from sphg.quadrature import reference_rule

_REPORT = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_REPORT] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    report = config.stash.get(_REPORT, {})
    if not report:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(report):
        terminalreporter.write_line(report[n])


@pytest.fixture(scope="session")
def acceptance_report(request):
    """``report(n, passed, detail)`` records one summary line per criterion."""
    store = request.config.stash[_REPORT]

    def report(n, passed, detail):
        line = f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        store[n] = line
        print(line)
        return passed

    return report


@pytest.fixture(scope="session")
def rules():
    """Quadrature rules shared across the session."""
    return RuleCache()


@pytest.fixture(scope="session")
def bases():
    return {}


@pytest.fixture(scope="session")
def eval_rule():
    return evaluation_rule()


@pytest.fixture(scope="session")
def ref_rule():
    return reference_rule(200_000)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def fib_basis(bases):
    """``fib_basis(n, m=3, variant="global")`` on Fibonacci centers, cached."""
    from sphg.geometry import fibonacci_nodes
    from sphg.harness import ExperimentConfig, make_basis

    def get(n, m=3, variant="global"):
        cfg = ExperimentConfig(m=m, basis=variant)
        return make_basis(fibonacci_nodes(n), cfg, bases)

    return get
