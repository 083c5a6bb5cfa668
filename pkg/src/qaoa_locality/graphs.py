"""Sparse undirected graphs, random ensembles, BFS neighborhoods.

Vertices are dense 0-based integers and every edge is stored as ``(i, j)``
with ``i < j``. The edge list keeps its sampling order, because interpolation
between two graphs splices edge lists by position.
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import GraphFormatError, ParameterError
from .rng import make_rng


class Graph:
    """Immutable sparse graph with an edge list and a CSR adjacency index.

    ``edges`` may contain repeated pairs only when ``allow_duplicates`` is set
    (interpolation splices); the adjacency, and therefore every simulation,
    sees each pair once.
    """

    __slots__ = ("n", "edges", "indptr", "indices", "_adj", "_unique")

    def __init__(self, n: int, edges, allow_duplicates: bool = False):
        n = int(n)
        if n < 0:
            raise ParameterError("vertex count must be nonnegative")
        arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise ParameterError("edge endpoint out of range")
        if np.any(arr[:, 0] == arr[:, 1]):
            raise ParameterError("self-loops are not allowed")
        arr = np.sort(arr, axis=1)
        uniq = np.unique(arr, axis=0) if len(arr) else arr
        if len(uniq) != len(arr) and not allow_duplicates:
            raise ParameterError("duplicate edges")
        arr.setflags(write=False)
        self.n = n
        self.edges = arr
        self._unique = uniq if len(uniq) != len(arr) else arr
        both = np.concatenate([self._unique, self._unique[:, ::-1]]) if len(arr) else arr
        order = np.lexsort((both[:, 1], both[:, 0])) if len(arr) else np.array([], int)
        both = both[order]
        counts = np.bincount(both[:, 0], minlength=n) if len(arr) else np.zeros(n, int)
        self.indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.indices = both[:, 1].copy() if len(arr) else np.zeros(0, np.int64)
        for a in (self.indptr, self.indices):
            a.setflags(write=False)
        self._adj = None

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def unique_edges(self) -> np.ndarray:
        return self._unique

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def adj(self) -> list[list[int]]:
        """Neighbor lists as Python lists (fast for BFS loops)."""
        if self._adj is None:
            ind = self.indices.tolist()
            ptr = self.indptr.tolist()
            self._adj = [ind[ptr[i] : ptr[i + 1]] for i in range(self.n)]
        return self._adj

    def has_edge(self, i: int, j: int) -> bool:
        nb = self.neighbors(i)
        k = np.searchsorted(nb, j)
        return bool(k < len(nb) and nb[k] == j)

    def with_edge(self, i: int, j: int) -> "Graph":
        if self.has_edge(i, j):
            return self
        return Graph(self.n, np.vstack([self.edges, [[i, j]]]), allow_duplicates=True)

    def induced(self, vertices: Sequence[int]) -> "Graph":
        """Induced subgraph relabelled 0..k-1 in the order given."""
        local = {v: k for k, v in enumerate(vertices)}
        adj = self.adj
        out = []
        for v in vertices:
            a = local[v]
            for u in adj[v]:
                b = local.get(u)
                if b is not None and a < b:
                    out.append((a, b))
        return Graph(len(vertices), out)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Graph)
            and self.n == other.n
            and np.array_equal(self.edges, other.edges)
        )

    def __hash__(self):
        return hash((self.n, self.edges.tobytes()))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"

    # -- edge-list text format ------------------------------------------------

    def to_edgelist(self) -> str:
        lines = [f"{self.n} {self.m}"]
        lines.extend(f"{i} {j}" for i, j in self.edges.tolist())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edgelist(cls, text: str) -> "Graph":
        rows = text.splitlines()
        if not rows:
            raise GraphFormatError("empty input", 1)
        n, m = _parse_pair(rows[0], 1)
        if n < 0 or m < 0:
            raise GraphFormatError("negative header value", 1)
        body = [(k + 2, r) for k, r in enumerate(rows[1:]) if r.strip()]
        if len(body) != m:
            raise GraphFormatError(f"header declares {m} edges, found {len(body)}", 1)
        edges = []
        seen = set()
        for lineno, row in body:
            i, j = _parse_pair(row, lineno)
            if not (0 <= i < n and 0 <= j < n):
                raise GraphFormatError(f"vertex out of range 0..{n - 1}", lineno)
            if i == j:
                raise GraphFormatError("self-loop", lineno)
            key = (min(i, j), max(i, j))
            if key in seen:
                raise GraphFormatError("duplicate edge", lineno)
            seen.add(key)
            edges.append(key)
        return cls(n, edges)

    def save(self, path) -> None:
        Path(path).write_text(self.to_edgelist())

    @classmethod
    def load(cls, path) -> "Graph":
        return cls.from_edgelist(Path(path).read_text())


def _parse_pair(row: str, lineno: int) -> tuple[int, int]:
    parts = row.split()
    if len(parts) != 2:
        raise GraphFormatError(f"expected two integers, got {row!r}", lineno)
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise GraphFormatError(f"expected two integers, got {row!r}", lineno) from None


# -- ensembles ---------------------------------------------------------------


class Model(str, enum.Enum):
    FIXED_EDGE_COUNT = "fixed_edge_count"
    BERNOULLI_EDGES = "bernoulli_edges"


@dataclass(frozen=True)
class EnsembleSpec:
    n: int
    d: float
    model: Model = Model.FIXED_EDGE_COUNT
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "model", Model(self.model))
        if self.n < 0:
            raise ParameterError("n must be nonnegative")
        if not self.d > 0:
            raise ParameterError("average degree must be positive")
        if self.model is Model.FIXED_EDGE_COUNT and self.edge_count > self.n * (self.n - 1) // 2:
            raise ParameterError(
                f"m={self.edge_count} exceeds the {self.n * (self.n - 1) // 2} available pairs"
            )

    @property
    def edge_count(self) -> int:
        return int(round(self.d * self.n / 2))


def _distinct_pairs(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """m distinct uniform unordered pairs, in draw order (collisions rejected)."""
    out = np.empty((0, 2), dtype=np.int64)
    keys_seen: set[int] = set()
    while len(out) < m:
        need = m - len(out)
        batch = rng.integers(0, n, size=(int(need * 1.1) + 16, 2))
        batch = batch[batch[:, 0] != batch[:, 1]]
        batch = np.sort(batch, axis=1)
        keep = []
        for k, key in enumerate((batch[:, 0] * n + batch[:, 1]).tolist()):
            if key not in keys_seen:
                keys_seen.add(key)
                keep.append(k)
                if len(keep) == need:
                    break
        out = np.vstack([out, batch[keep]])
    return out


def sample_graph(spec: EnsembleSpec) -> Graph:
    rng = make_rng(spec.seed)
    n = spec.n
    if spec.model is Model.FIXED_EDGE_COUNT:
        m = spec.edge_count
    else:
        pairs = n * (n - 1) // 2
        m = int(rng.binomial(pairs, min(1.0, spec.d / n))) if n > 1 else 0
    return Graph(n, _distinct_pairs(n, m, rng))


def random_graph(n: int, d: float, seed, model=Model.FIXED_EDGE_COUNT) -> Graph:
    return sample_graph(EnsembleSpec(n, d, model, seed))


# -- neighborhoods -----------------------------------------------------------


@dataclass(frozen=True)
class NeighborhoodQuery:
    center: int
    radius: int
    members: tuple[int, ...]
    distances: dict = field(repr=False, compare=False)

    def __contains__(self, v) -> bool:
        return v in self.distances

    def __len__(self) -> int:
        return len(self.members)


def bfs_distances(g: Graph, sources: Iterable[int], radius: int) -> dict[int, int]:
    """Distances from the nearest source, for vertices within ``radius``."""
    adj = g.adj
    dist = {}
    frontier = []
    for s in sources:
        if s not in dist:
            dist[s] = 0
            frontier.append(s)
    for level in range(1, radius + 1):
        nxt = []
        for v in frontier:
            for u in adj[v]:
                if u not in dist:
                    dist[u] = level
                    nxt.append(u)
        if not nxt:
            break
        frontier = nxt
    return dist


def ball(g: Graph, i: int, r: int) -> NeighborhoodQuery:
    if not 0 <= i < g.n:
        raise ParameterError(f"vertex {i} out of range")
    if r < 0:
        raise ParameterError("radius must be nonnegative")
    dist = bfs_distances(g, (i,), r)
    return NeighborhoodQuery(i, r, tuple(sorted(dist)), dist)


def far_set(g: Graph, i: int, j: int, p: int) -> list[int]:
    """Vertices outside B(i,p) and B(j,p)."""
    near = bfs_distances(g, (i, j), p)
    return [v for v in range(g.n) if v not in near]


def distance(g: Graph, i: int, j: int, limit: int | None = None) -> float:
    """Graph distance, or ``inf`` if unreachable (within ``limit`` when given)."""
    if i == j:
        return 0
    adj = g.adj
    seen = {i}
    frontier = [i]
    level = 0
    while frontier and (limit is None or level < limit):
        level += 1
        nxt = []
        for v in frontier:
            for u in adj[v]:
                if u == j:
                    return level
                if u not in seen:
                    seen.add(u)
                    nxt.append(u)
        frontier = nxt
    return math.inf


def all_pairs_distances(g: Graph) -> np.ndarray:
    """Dense distance matrix (``-1`` for unreachable); small graphs only."""
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import shortest_path

    a = csr_matrix((np.ones(len(g.indices)), g.indices, g.indptr), shape=(g.n, g.n))
    d = shortest_path(a, unweighted=True, directed=False)
    d[np.isinf(d)] = -1
    return d.astype(np.int64)


def ball_sizes(g: Graph, r: int, chunk: int = 4096, method: str = "auto") -> np.ndarray:
    """|B(i, r)| for every vertex.

    ``bits`` propagates bit-packed frontiers (cost ~ n^2 r / 64, quick for small
    n); ``bfs`` runs a truncated vectorized BFS per vertex (cost ~ sum of ball
    volumes). ``auto`` picks bits below 20000 vertices.
    """
    n = g.n
    if method == "auto":
        method = "bits" if n < 20000 else "bfs"
    if method == "bfs":
        return _ball_sizes_bfs(g, r)
    if method != "bits":
        raise ParameterError(f"unknown method {method!r}")
    sizes = np.zeros(n, dtype=np.int64)
    if n == 0:
        return sizes
    deg = g.degrees()
    rows = np.flatnonzero(deg > 0)
    starts = g.indptr[:-1][rows]
    for lo in range(0, n, chunk):
        c = min(chunk, n - lo)
        w = (c + 63) // 64
        x = np.zeros((n, w), dtype=np.uint64)
        k = np.arange(c)
        x[lo + k, k // 64] = np.left_shift(np.uint64(1), (k % 64).astype(np.uint64))
        for _ in range(r):
            if len(rows) == 0:
                break
            spread = np.bitwise_or.reduceat(x[g.indices], starts, axis=0)
            x[rows] |= spread
        counts = np.zeros(w * 64, dtype=np.int64)
        for b in range(64):
            counts[b::64] = ((x >> np.uint64(b)) & np.uint64(1)).sum(axis=0, dtype=np.int64)
        sizes[lo : lo + c] = counts[:c]
    return sizes


def _ball_sizes_bfs(g: Graph, r: int) -> np.ndarray:
    n = g.n
    indptr, indices = g.indptr, g.indices
    deg = np.diff(indptr)
    stamp = np.full(n, -1, dtype=np.int64)
    sizes = np.ones(n, dtype=np.int64)
    for src in range(n):
        stamp[src] = src
        frontier = np.array([src], dtype=np.int64)
        total = 1
        for _ in range(r):
            lens = deg[frontier]
            cnt = int(lens.sum())
            if cnt == 0:
                break
            offs = np.repeat(indptr[frontier] - np.cumsum(lens) + lens, lens)
            nb = indices[offs + np.arange(cnt)]
            nb = nb[stamp[nb] != src]
            if nb.size == 0:
                break
            nb = np.unique(nb)
            stamp[nb] = src
            total += nb.size
            frontier = nb
        sizes[src] = total
    return sizes


# -- interpolation -----------------------------------------------------------


@dataclass(frozen=True)
class InterpolationPath:
    g0: Graph
    gm: Graph

    def __post_init__(self):
        if self.g0.n != self.gm.n:
            raise ParameterError("endpoint graphs must share the vertex count")
        if self.g0.m != self.gm.m:
            raise ParameterError("endpoint graphs must have the same number of edges")

    @property
    def n(self) -> int:
        return self.g0.n

    @property
    def m(self) -> int:
        return self.g0.m

    def graph_at(self, t: int) -> Graph:
        return graph_at(self, t)


def graph_at(path: InterpolationPath, t: int) -> Graph:
    """First m-t edges of g0 followed by the last t edges of gm."""
    m = path.m
    if not 0 <= t <= m:
        raise ParameterError(f"t={t} outside 0..{m}")
    if t == 0:
        return path.g0
    if t == m:
        return path.gm
    edges = np.vstack([path.g0.edges[: m - t], path.gm.edges[m - t :]])
    return Graph(path.n, edges, allow_duplicates=True)


# -- classical baselines -----------------------------------------------------


def greedy_is(g: Graph, seed) -> list[int]:
    """Random-order greedy maximal independent set."""
    rng = make_rng(seed)
    blocked = bytearray(g.n)
    adj = g.adj
    out = []
    for v in rng.permutation(g.n).tolist():
        if not blocked[v]:
            out.append(v)
            blocked[v] = 1
            for u in adj[v]:
                blocked[u] = 1
    return sorted(out)


def as_mask(n: int, s) -> np.ndarray:
    s = np.asarray(list(s) if not isinstance(s, np.ndarray) else s)
    if s.dtype == bool and len(s) == n:
        return s
    mask = np.zeros(n, dtype=bool)
    mask[s.astype(np.int64)] = True
    return mask


def check_independent(g: Graph, s) -> bool:
    mask = as_mask(g.n, s)
    e = g.unique_edges
    if len(e) == 0:
        return True
    return not np.any(mask[e[:, 0]] & mask[e[:, 1]])
