import numpy as np
import pytest

from problems import EXAMPLE1, example2_data
from wavemap.cauchy import compute_coefficients, solve_grid

SQUARE = (-1.0, 1.0, -1.0, 1.0)


@pytest.fixture(scope="session")
def example1_grid():
    """Example 1 on [-1, 1]^2 at h = 0.01, solved column-wise and row-wise."""
    return solve_grid(EXAMPLE1, SQUARE, 0.01, rtol=1e-10, sweep="both")


@pytest.fixture(scope="session")
def example2_grid():
    data = example2_data(2.0)
    return solve_grid(data, SQUARE, 0.01, rtol=1e-10, sweep="both")


@pytest.fixture(scope="session")
def example1_coefficients():
    return compute_coefficients(EXAMPLE1, (-1.0, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


_CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_CRITERIA] = {}


@pytest.fixture
def criterion(request):
    """``criterion(n, clause, ok, detail)`` records one clause of acceptance criterion ``n``."""
    table = request.config.stash[_CRITERIA]

    def record(n: int, clause: str, ok: bool, detail: str = "") -> bool:
        table.setdefault(n, []).append((clause, bool(ok), detail))
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    table = config.stash.get(_CRITERIA, {})
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(table):
        clauses = table[n]
        ok = all(c[1] for c in clauses)
        failed = [f"{c[0]} ({c[2]})" for c in clauses if not c[1]]
        passed = "; ".join(f"{c[0]}: {c[2]}" for c in clauses if c[1])
        line = f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {passed}"
        if failed:
            line += " | failed: " + "; ".join(failed)
        terminalreporter.write_line(line)
