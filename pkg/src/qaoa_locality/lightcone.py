"""Exact local expectations from reverse light cones.

After p layers, ``U^dag b_i U`` is supported on B(i, p), so <b_i> can be read
off a simulation of the subgraph induced on that ball (every gate inside the
ball is kept, every gate outside it cancels). Pair terms use the union
B(i,p) | B(j,p). Nothing here is approximate: a cone over the qubit cap is an
error.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConeOverflowError
from .graphs import Graph, bfs_distances
from .statevector import (
    QaoaParams,
    penalty_diagonal,
    evolve,
    get_q_max,
    hamming_moments,
    initial_for,
    pair_correlation,
    bit_marginals,
    run_qaoa,
)


@dataclass(frozen=True)
class LocalExpectation:
    target: int | tuple[int, int]
    value: float
    cone_size: int


def cone_members(g: Graph, targets: Sequence[int], p: int) -> list[int]:
    """Sorted vertices of the union of B(t, p) over the targets."""
    return sorted(bfs_distances(g, targets, p))


def _induced_local_edges(g: Graph, members: list[int]) -> list[tuple[int, int]]:
    local = {v: k for k, v in enumerate(members)}
    adj = g.adj
    out = []
    for v in members:
        a = local[v]
        for u in adj[v]:
            b = local.get(u)
            if b is not None and a < b:
                out.append((a, b))
    return out


def _cone_state(g: Graph, members: list[int], params: QaoaParams):
    q = len(members)
    state = initial_for(range(q), params, q_max=q)
    diag = penalty_diagonal(q, _induced_local_edges(g, members))
    evolve(state.amplitudes, q, diag, params)
    return state


def _cap(q_max):
    return get_q_max() if q_max is None else q_max


def cone_expectation_bit(g: Graph, params: QaoaParams, i: int,
                         q_max: int | None = None) -> LocalExpectation:
    members = cone_members(g, (i,), params.p)
    if len(members) > _cap(q_max):
        raise ConeOverflowError(i, len(members), _cap(q_max))
    state = _cone_state(g, members, params)
    k = members.index(i)
    probs = state.probabilities().reshape(-1, 2, 1 << k)
    return LocalExpectation(i, float(probs[:, 1, :].sum()), len(members))


def cone_expectation_pair(g: Graph, params: QaoaParams, i: int, j: int,
                          q_max: int | None = None) -> LocalExpectation:
    members = cone_members(g, (i, j), params.p)
    if len(members) > _cap(q_max):
        raise ConeOverflowError((i, j), len(members), _cap(q_max))
    state = _cone_state(g, members, params)
    value = pair_correlation(state, members.index(i), members.index(j))
    return LocalExpectation((i, j), value, len(members))


# -- batched evaluation --------------------------------------------------------

_worker_graph: Graph | None = None


def _init_worker(g: Graph) -> None:
    global _worker_graph
    _worker_graph = g


def _eval_chunk(args):
    params, targets, q_max = args
    g = _worker_graph
    return _eval_targets(g, params, targets, q_max)


def _eval_targets(g: Graph, params: QaoaParams, targets, q_max: int):
    """Values for a list of targets (ints or pairs). Overflowing cones give NaN
    and are reported in the second return value as (target, size)."""
    out = np.empty(len(targets))
    overflow = []
    p = params.p
    for k, t in enumerate(targets):
        pair = isinstance(t, tuple)
        members = cone_members(g, t if pair else (t,), p)
        if len(members) > q_max:
            out[k] = np.nan
            overflow.append((t, len(members)))
            continue
        state = _cone_state(g, members, params)
        if pair:
            out[k] = pair_correlation(state, members.index(t[0]), members.index(t[1]))
        else:
            a = members.index(t)
            out[k] = state.probabilities().reshape(-1, 2, 1 << a)[:, 1, :].sum()
    return out, overflow


def evaluate_targets(g: Graph, params: QaoaParams, targets: Sequence, q_max=None,
                     workers: int = 1) -> np.ndarray:
    """Cone values for many targets, in target order.

    Results do not depend on ``workers``: each value is a pure function of its
    target and reductions happen afterwards on the ordered array.
    """
    cap = _cap(q_max)
    targets = list(targets)
    if workers <= 1 or len(targets) < 256:
        values, overflow = _eval_targets(g, params, targets, cap)
    else:
        size = max(64, len(targets) // (workers * 8))
        chunks = [targets[s : s + size] for s in range(0, len(targets), size)]
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(g,)) as ex:
            parts = list(ex.map(_eval_chunk, [(params, c, cap) for c in chunks]))
        values = np.concatenate([v for v, _ in parts]) if parts else np.empty(0)
        overflow = [o for _, ov in parts for o in ov]
    if overflow:
        worst = max(overflow, key=lambda o: o[1])
        raise ConeOverflowError(worst[0], worst[1], cap)
    return values


def bit_expectations(g: Graph, params: QaoaParams, q_max=None, workers: int = 1) -> np.ndarray:
    return evaluate_targets(g, params, range(g.n), q_max, workers)


def objective_expectation(g: Graph, params: QaoaParams, q_max=None, workers: int = 1) -> float:
    """<C_obj> = sum_i <b_i> - sum_edges <b_i b_j>, assembled from cones."""
    singles = bit_expectations(g, params, q_max, workers)
    edges = [tuple(e) for e in g.unique_edges.tolist()]
    pairs = evaluate_targets(g, params, edges, q_max, workers)
    return float(np.sum(singles) - np.sum(pairs))


def near_pairs(g: Graph, radius: int) -> list[tuple[int, int]]:
    """All i < j with 1 <= dist(i, j) <= radius."""
    out = []
    for i in range(g.n):
        for j in sorted(bfs_distances(g, (i,), radius)):
            if j > i:
                out.append((i, j))
    return out


def hamming_variance(g: Graph, params: QaoaParams, q_max=None, workers: int = 1) -> float:
    """Var(W) from cones; pairs farther apart than 2p contribute exactly zero."""
    singles = bit_expectations(g, params, q_max, workers)
    if params.p == 0:
        # bits are independent in a product state
        return float(np.sum(singles * (1 - singles)))
    pairs = near_pairs(g, 2 * params.p)
    corr = evaluate_targets(g, params, pairs, q_max, workers)
    if pairs:
        idx = np.asarray(pairs)
        cov = corr - singles[idx[:, 0]] * singles[idx[:, 1]]
    else:
        cov = np.zeros(0)
    return float(np.sum(singles * (1 - singles)) + 2 * np.sum(cov))


def default_workers(threads: int | None) -> int:
    if threads is None:
        return 1
    return max(1, min(int(threads), os.cpu_count() or 1))


# -- full-statevector references ---------------------------------------------


def full_statevector_values(g: Graph, params: QaoaParams, pairs: Iterable = (),
                            q_max=None) -> dict:
    """Reference values from one simulation of the whole graph."""
    state = run_qaoa(g, params, q_max=q_max)
    marg = bit_marginals(state)
    pair_vals = {tuple(pr): pair_correlation(state, pr[0], pr[1]) for pr in pairs}
    e = g.unique_edges
    edge_sum = sum(pair_correlation(state, a, b) for a, b in e.tolist())
    w1, w2 = hamming_moments(state)
    return {
        "bits": marg,
        "pairs": pair_vals,
        "objective": float(marg.sum() - edge_sum),
        "variance": w2 - w1 * w1,
        "state": state,
    }


def verify_factorization(g: Graph, params: QaoaParams, pairs=None, q_max=None) -> dict:
    """Covariances of bit pairs from the full state, split by dist > 2p or not.

    The factorization claim is about the far group; the near group is a control
    showing the check can detect correlation.
    """
    from .graphs import all_pairs_distances

    dist = all_pairs_distances(g)
    if pairs is None:
        pairs = [(i, j) for i in range(g.n) for j in range(i + 1, g.n)]
    state = run_qaoa(g, params, q_max=q_max)
    marg = bit_marginals(state)
    far, near = [], []
    for i, j in pairs:
        cov = abs(pair_correlation(state, i, j) - marg[i] * marg[j])
        dij = dist[i, j]
        (far if dij < 0 or dij > 2 * params.p else near).append(((i, j), cov))
    return {
        "p": params.p,
        "far_pairs": len(far),
        "near_pairs": len(near),
        "max_far_residual": max((c for _, c in far), default=0.0),
        "max_near_residual": max((c for _, c in near), default=0.0),
        "far": far,
        "near": near,
    }
