import itertools

import numpy as np
import pytest


def vertex_enum_min_l1(A, i):
    """Brute-force min ||z||_1 s.t. A.T z = e_i by enumerating basic solutions."""
    m, n = A.shape
    M = np.hstack([A.T, -A.T])
    rhs = np.zeros(n)
    rhs[i] = 1.0
    best = np.inf
    for cols in itertools.combinations(range(2 * m), n):
        B = M[:, cols]
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        w = np.linalg.solve(B, rhs)
        if np.all(w >= -1e-12):
            best = min(best, float(np.abs(w).sum()))
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria register (criterion, passed, detail) here; the summary
# hook prints one line per criterion after the run
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
