from __future__ import annotations

import numpy as np
import pytest

from igbench.graph import Graph, generate_sbm

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def bfs_connected(n: int, edges: np.ndarray) -> bool:
    adj: dict[int, list[int]] = {i: [] for i in range(n)}
    for u, v in edges:
        adj[int(u)].append(int(v))
        adj[int(v)].append(int(u))
    seen, stack = {0}, [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == n


@pytest.fixture
def triangle() -> Graph:
    return Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)], [0, 0, 1], np.eye(3))


@pytest.fixture
def star() -> Graph:
    return Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)], [0, 1, 1, 1], np.eye(4))


@pytest.fixture(scope="session")
def sbm_small() -> Graph:
    return generate_sbm([60, 60], 0.1, 0.02, 8, 1.0, 0, signal_noise=1.0)


@pytest.fixture(scope="session")
def sbm_mid() -> Graph:
    return generate_sbm([500, 500], 0.05, 0.005, 8, 1.0, 1)
