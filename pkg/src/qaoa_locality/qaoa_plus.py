"""QAOA+: measure the QAOA state, then prune to an independent set.

Pruning rule (``rule="independent"``, the default): every edge whose two
endpoints are both 1 in the measured string flips a fair coin and deletes the
chosen endpoint. Each vertex's fate depends only on its own bit, its
neighbors' bits and the coins on its own edges, so pruning is local. This
costs at most N_E vertices while removing all N_E violations, hence
``|sigma| >= W(b) - C_IS(b)``.

``rule="sequential"`` walks the violated edges in sorted order and only acts on
edges that are still violated. It never deletes more than needed, but removals
cascade along runs of ones, so it is not local.

Depth convention: ``params`` always carries the quantum depth. "QAOA+ at depth
p" is quantum depth p-1 followed by pruning.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import EnumerationCapError, ParameterError
from .graphs import Graph, far_set
from .rng import make_rng
from .statevector import QaoaParams, index_to_bits, run_qaoa, sample_bitstrings

RULES = ("independent", "sequential")
MAX_BRANCH_BITS = 20


def mask_from_bits(bits) -> int:
    out = 0
    for k in np.flatnonzero(np.asarray(bits)).tolist():
        out |= 1 << k
    return out


@dataclass(frozen=True)
class BitString:
    n: int
    mask: int

    @classmethod
    def from_bits(cls, bits) -> "BitString":
        return cls(len(bits), mask_from_bits(bits))

    @property
    def weight(self) -> int:
        return self.mask.bit_count()

    def bits(self) -> np.ndarray:
        return np.array([(self.mask >> k) & 1 for k in range(self.n)], dtype=np.uint8)


@dataclass(frozen=True)
class IndependentSet:
    n: int
    mask: int

    @classmethod
    def from_vertices(cls, n: int, vertices) -> "IndependentSet":
        mask = 0
        for v in vertices:
            mask |= 1 << int(v)
        return cls(n, mask)

    @property
    def size(self) -> int:
        return self.mask.bit_count()

    def __len__(self) -> int:
        return self.size

    def vertices(self) -> list[int]:
        m, out, k = self.mask, [], 0
        while m:
            if m & 1:
                out.append(k)
            m >>= 1
            k += 1
        return out

    def __contains__(self, v) -> bool:
        return bool((self.mask >> int(v)) & 1)

    def overlap(self, other: "IndependentSet") -> int:
        return (self.mask & other.mask).bit_count()


@dataclass(frozen=True)
class PruneTrace:
    input: BitString
    violated: tuple[tuple[int, int], ...]
    removed: tuple[int, ...]
    output: IndependentSet

    @property
    def n_violated(self) -> int:
        return len(self.violated)


def canonical_edges(g: Graph) -> np.ndarray:
    e = g.unique_edges
    if len(e) == 0:
        return e
    return e[np.lexsort((e[:, 1], e[:, 0]))]


def _check_rule(rule: str) -> None:
    if rule not in RULES:
        raise ParameterError(f"unknown pruning rule {rule!r}; expected one of {RULES}")


def prune(g: Graph, b, seed, rule: str = "independent"):
    """Delete endpoints of violated edges until ``b`` is an independent set.

    Returns ``(IndependentSet, PruneTrace)``. Under the independent rule one coin
    is drawn per edge of the sorted edge list (unused when the edge is not
    violated), so the coin attached to a given edge does not depend on the rest
    of the string.
    """
    _check_rule(rule)
    rng = make_rng(seed)
    bits = np.asarray(b, dtype=np.uint8).copy()
    if len(bits) != g.n:
        raise ParameterError("bit string length does not match the graph")
    edges = canonical_edges(g)
    violated = [(a, c) for a, c in edges.tolist() if bits[a] and bits[c]]
    removed = []
    if rule == "independent":
        coins = rng.integers(0, 2, size=len(edges))
        hit = {}
        for k, (a, c) in enumerate(edges.tolist()):
            if bits[a] and bits[c]:
                hit[k] = c if coins[k] else a
        for v in hit.values():
            if bits[v]:
                bits[v] = 0
                removed.append(v)
    else:
        for a, c in violated:
            if bits[a] and bits[c]:
                v = c if rng.integers(0, 2) else a
                bits[v] = 0
                removed.append(v)
    out = IndependentSet(g.n, mask_from_bits(bits))
    trace = PruneTrace(BitString.from_bits(b), tuple(violated), tuple(removed), out)
    return out, trace


def prune_batch(g: Graph, samples: np.ndarray, seed) -> np.ndarray:
    """Independent-rule pruning of many strings at once; returns a bool array."""
    rng = make_rng(seed)
    bits = np.asarray(samples, dtype=bool)
    edges = canonical_edges(g)
    if len(edges) == 0:
        return bits.copy()
    coins = rng.integers(0, 2, size=(len(bits), len(edges))).astype(bool)
    drop = np.zeros_like(bits)
    for k, (a, c) in enumerate(edges.tolist()):
        viol = bits[:, a] & bits[:, c]
        drop[:, c] |= viol & coins[:, k]
        drop[:, a] |= viol & ~coins[:, k]
    return bits & ~drop


def qaoa_plus_sample(g: Graph, params: QaoaParams, count: int, seed,
                     rule: str = "independent", q_max=None) -> list[IndependentSet]:
    """``count`` QAOA+ outputs: sample the depth-``params.p`` state, then prune."""
    _check_rule(rule)
    return [IndependentSet(g.n, mask_from_bits(row))
            for row in qaoa_plus_bits(g, params, count, seed, rule, q_max)[1]]


def qaoa_plus_bits(g: Graph, params: QaoaParams, count: int, seed,
                   rule: str = "independent", q_max=None):
    """(measured strings, pruned strings) as (count, n) arrays."""
    root = np.random.SeedSequence(make_rng(seed).integers(0, 2**63))
    s_measure, s_prune = root.spawn(2)
    state = run_qaoa(g, params, q_max=q_max)
    measured = sample_bitstrings(state, count, make_rng(s_measure))
    if rule == "independent":
        pruned = prune_batch(g, measured, make_rng(s_prune))
    else:
        rng = make_rng(s_prune)
        pruned = np.zeros(measured.shape, dtype=bool)
        for k, row in enumerate(measured):
            pruned[k, prune(g, row, rng, rule)[0].vertices()] = True
    return measured.astype(bool), pruned.astype(bool)


# -- exact far-set marginals ---------------------------------------------------


def _state_probs(g: Graph, params: QaoaParams, q_max=None) -> np.ndarray:
    return run_qaoa(g, params, q_max=q_max).probabilities()


def _pattern_key(bits: np.ndarray, far: list[int]) -> tuple[int, ...]:
    return tuple(int(bits[v]) for v in far)


def _pruned_far_distribution(g: Graph, x: np.ndarray, far: list[int], rule: str) -> dict:
    """Exact distribution of the pruned string restricted to ``far`` given input x."""
    edges = canonical_edges(g).tolist()
    violated = [(a, c) for a, c in edges if x[a] and x[c]]
    if rule == "independent":
        far_set_ = set(far)
        # coins on edges away from the far set cannot change it
        relevant = [e for e in violated if e[0] in far_set_ or e[1] in far_set_]
        if len(relevant) > MAX_BRANCH_BITS:
            raise EnumerationCapError(1 << MAX_BRANCH_BITS, 0)
        out: dict = {}
        w = 0.5 ** len(relevant)
        for coins in product((0, 1), repeat=len(relevant)):
            y = x.copy()
            for (a, c), coin in zip(relevant, coins):
                y[c if coin else a] = 0
            key = _pattern_key(y, far)
            out[key] = out.get(key, 0.0) + w
        return out
    out = {}
    budget = [1 << MAX_BRANCH_BITS]

    def walk(y, k, w):
        while k < len(violated) and not (y[violated[k][0]] and y[violated[k][1]]):
            k += 1
        if k == len(violated):
            key = _pattern_key(y, far)
            out[key] = out.get(key, 0.0) + w
            budget[0] -= 1
            if budget[0] < 0:
                raise EnumerationCapError(1 << MAX_BRANCH_BITS, len(out))
            return
        a, c = violated[k]
        for v in (a, c):
            z = y.copy()
            z[v] = 0
            walk(z, k + 1, w / 2)

    walk(x.copy(), 0, 1.0)
    return out


def far_distribution(g: Graph, params: QaoaParams, far, mode: str = "quantum",
                     rule: str = "independent", q_max=None) -> dict:
    """Exact output distribution restricted to ``far`` (pattern tuple -> prob).

    ``mode="quantum"`` uses the measured string; ``mode="pruning"`` the QAOA+
    output.
    """
    if mode not in ("quantum", "pruning"):
        raise ParameterError(f"unknown mode {mode!r}")
    _check_rule(rule)
    far = sorted(int(v) for v in far)
    probs = _state_probs(g, params, q_max)
    support = np.flatnonzero(probs > 0)
    bits = index_to_bits(support, g.n)
    out: dict = {}
    if mode == "quantum":
        keys = bits[:, far] if far else np.zeros((len(support), 0), dtype=np.uint8)
        for key, pr in zip(map(tuple, keys.tolist()), probs[support]):
            out[key] = out.get(key, 0.0) + float(pr)
        return out
    for x, pr in zip(bits, probs[support]):
        for key, w in _pruned_far_distribution(g, x, far, rule).items():
            out[key] = out.get(key, 0.0) + float(pr) * w
    return out


def far_marginal(g: Graph, params: QaoaParams, far, b_far, mode: str = "quantum",
                 rule: str = "independent", q_max=None) -> float:
    """Probability that the output restricted to ``far`` equals ``b_far``."""
    far_sorted = sorted(int(v) for v in far)
    b = dict(zip([int(v) for v in far], [int(x) for x in b_far]))
    key = tuple(b[v] for v in far_sorted)
    return far_distribution(g, params, far_sorted, mode, rule, q_max).get(key, 0.0)


def far_radius(params: QaoaParams, mode: str) -> int:
    """Radius of the protected balls: quantum depth, plus one for the pruning layer."""
    return params.p + (1 if mode == "pruning" else 0)


def verify_far_lemma(g: Graph, edge, params: QaoaParams, modes=("quantum", "pruning"),
                     rule: str = "independent", radius_shift: int = 0, q_max=None) -> dict:
    """Max |P_G - P_G'| over far-set patterns when ``edge`` is added to ``g``.

    A negative ``radius_shift`` shrinks the protected balls for negative
    controls. The stated radius has one unit of slack, so -2 is the first
    shift that reliably exposes a discrepancy.
    """
    i, j = (int(v) for v in edge)
    if i == j:
        raise ParameterError("edge endpoints must differ")
    g2 = g.with_edge(i, j)
    report = {"edge": [i, j], "p": params.p, "rule": rule, "modes": {}}
    for mode in modes:
        r = far_radius(params, mode) + radius_shift
        far = far_set(g, i, j, r) if r >= 0 else list(range(g.n))
        d1 = far_distribution(g, params, far, mode, rule, q_max)
        d2 = far_distribution(g2, params, far, mode, rule, q_max)
        keys = set(d1) | set(d2)
        resid = max((abs(d1.get(k, 0.0) - d2.get(k, 0.0)) for k in keys), default=0.0)
        report["modes"][mode] = {
            "radius": r,
            "far": far,
            "patterns": len(keys),
            "max_discrepancy": resid,
        }
    report["max_discrepancy"] = max(
        (m["max_discrepancy"] for m in report["modes"].values()), default=0.0)
    return report
