import numpy as np
import pytest

from fracport.synthetic import random_instance


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_problem(rng):
    return random_instance(rng, n=5, T=40)


def central_diff(f, x, h=1e-6):
    """Central finite-difference gradient of a scalar function of a vector."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record ``(criterion, passed, detail)``; the lines are printed after the run."""
    rows = request.config.stash.setdefault(_VERDICTS, [])

    def record(criterion, passed, detail):
        line = f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        rows.append((criterion, line))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    rows = config.stash.get(_VERDICTS, [])
    if rows:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(rows):
            terminalreporter.write_line(line)
