import numpy as np
import pytest
from hypothesis import settings

from qaoa_locality.graphs import Graph, random_graph

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def python_bfs(g: Graph, src: int) -> dict:
    """Plain-list BFS used as an oracle; independent of the CSR code paths."""
    adj = [set() for _ in range(g.n)]
    for a, b in g.edges.tolist():
        adj[a].add(b)
        adj[b].add(a)
    dist = {src: 0}
    queue = [src]
    for v in queue:
        for w in adj[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def cycle(n: int) -> Graph:
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


def path_graph(n: int) -> Graph:
    return Graph(n, [(i, i + 1) for i in range(n - 1)])


@pytest.fixture
def small_graph():
    return random_graph(12, 3, 2024)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
