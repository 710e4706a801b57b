import numpy as np
import pytest
from scipy.integrate import quad

from loscov.model import ScenarioParams


@pytest.fixture
def standard():
    return ScenarioParams(lambda_t=0.004, lambda_b=0.02, mu=0.4, d1=10, d2=10, d_star=1500)


def pgfl_joint_los(x_hat, lambda_b, mu):
    """Joint LOS probability by integrating the per-obstacle miss probability.

    Independent of the closed form: each obstacle center y contributes
    ``1 - P(segment around y misses every projection)`` to the exponent.
    """
    x_hat = np.sort(np.asarray(x_hat, dtype=float))
    total = 2.0 / mu  # the two outer half-lines
    for a, b in zip(x_hat[:-1], x_hat[1:]):
        if b > a:
            total += quad(lambda y: 1 - (1 - np.exp(-mu * (y - a))) * (1 - np.exp(-mu * (b - y))),
                          a, b, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    return float(np.exp(-lambda_b * total))


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Collect one verdict line per acceptance criterion for the run summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(criterion, passed, detail):
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} {detail}"
        lines.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
