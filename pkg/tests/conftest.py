import sys

import numpy as np
import pytest

from anchorgt.graph import UNREACHABLE, from_edge_list


def random_graph(rng, n, p):
    """G(n, p) drawn with a plain upper-triangle mask, independent of the library generator."""
    upper = np.triu(rng.random((n, n)) < p, 1)
    return from_edge_list(np.argwhere(upper), n)


def matrix_power_distances(g):
    """All-pairs hop distances from boolean powers of the dense adjacency matrix."""
    n = g.n
    adj = np.zeros((n, n), dtype=bool)
    for u, v in g.edges():
        adj[u, v] = adj[v, u] = True
    dist = np.full((n, n), UNREACHABLE, dtype=np.int64)
    reach = np.eye(n, dtype=bool)
    dist[reach] = 0
    for step in range(1, n):
        nxt = reach | (reach.astype(np.int64) @ adj.astype(np.int64) > 0)
        dist[nxt & ~reach] = step
        if (nxt == reach).all():
            break
        reach = nxt
    return dist


@pytest.fixture
def rng():
    return np.random.default_rng(20240519)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for num in sorted(results):
            terminalreporter.write_line(results[num])
