import itertools
import math

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")


def brute_defect(adj: np.ndarray) -> float:
    """max_B |e(B) - d C(|B|,2)| / m^2 by plain subset enumeration."""
    m = len(adj)
    pairs = [(u, v) for u in range(m) for v in range(u + 1, m)]
    e_total = sum(bool(adj[u, v]) for u, v in pairs)
    d = e_total / math.comb(m, 2)
    best = 0.0
    for k in range(m + 1):
        for B in itertools.combinations(range(m), k):
            e = sum(bool(adj[u, v]) for u, v in itertools.combinations(B, 2))
            best = max(best, abs(e - d * math.comb(k, 2)) / m**2)
    return best


def random_adjacency(m: int, p: float, rng: np.random.Generator) -> np.ndarray:
    upper = np.triu(rng.random((m, m)) < p, 1)
    return upper | upper.T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        terminalreporter.write_line(results[k])
