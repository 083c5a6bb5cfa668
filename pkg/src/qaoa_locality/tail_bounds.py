"""Branching-process moment bounds, neighborhood growth and weight concentration."""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import mpmath
import numpy as np

from .errors import ParameterError
from .graphs import Graph, ball_sizes, random_graph
from .rng import derive_seed, make_rng

LN2 = math.log(2)


# -- Poisson branching moment generating function ------------------------------


@dataclass
class MgfTable:
    d: float
    k: int
    t: object
    phis: list
    diverged_at: int | None = None

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None


def mgf_recursion(d, k: int, t, dps: int = 50, blowup=mpmath.mpf(10) ** 1000) -> MgfTable:
    """phi_0(t) = e^t, phi_{j+1}(t) = exp(d (phi_j(t) - 1)), in ``dps`` digits.

    Stops and records the generation once a value exceeds ``blowup``.
    """
    if k < 0:
        raise ParameterError("k must be nonnegative")
    with mpmath.workdps(dps):
        d_mp = mpmath.mpf(d)
        t_mp = mpmath.mpf(t)
        phis = [mpmath.exp(t_mp)]
        for j in range(k):
            nxt = mpmath.exp(d_mp * (phis[-1] - 1))
            if not mpmath.isfinite(nxt) or nxt > blowup:
                return MgfTable(d, k, t_mp, phis, diverged_at=j + 1)
            phis.append(nxt)
    return MgfTable(d, k, t_mp, phis)


def mgf_bound_sweep(ds=(2, 3, 5, 10, 50), k_max: int = 30, dps: int = 50) -> dict:
    """Check phi_k((ln2/d)^k) <= e and phi_j((ln2/d)^k) <= exp((ln2/d)^(k-j)).

    Working precision grows with k so that 1 + t stays resolved for tiny t.
    The j = 0 link is an equality, so chain slack is judged relative to the
    bound with tolerance 10^-(dps - 10).
    """
    rows = []
    ok_top = ok_chain = True
    for d in ds:
        for k in range(k_max + 1):
            work = dps + math.ceil(k * math.log10(d / LN2))
            with mpmath.workdps(work):
                ratio = mpmath.log(2) / d
                t = ratio ** k
                tab = mgf_recursion(d, k, t, work)
                if tab.diverged:
                    ok_top = ok_chain = False
                    rows.append({"d": d, "k": k, "diverged": True})
                    continue
                top = tab.phis[k]
                rel = min((ratio ** (k - j) - mpmath.log(tab.phis[j])) / ratio ** (k - j)
                          for j in range(k + 1))
                top_ok = top <= mpmath.e
                chain_ok = rel >= -mpmath.mpf(10) ** (10 - dps)
            ok_top &= bool(top_ok)
            ok_chain &= bool(chain_ok)
            rows.append({
                "d": d,
                "k": k,
                "phi_k": float(top),
                "top_slack": float(1 - mpmath.log(top)),
                "chain_min_rel_slack": float(rel),
                "ok": bool(top_ok and chain_ok),
            })
    return {"bound_ok": ok_top, "chain_ok": ok_chain, "rows": rows}


# -- branching simulation -----------------------------------------------------


@dataclass
class BranchingStats:
    d: float
    generations: np.ndarray  # (replicates, k+1), column 0 is Z_0 = 1

    @property
    def k(self) -> int:
        return self.generations.shape[1] - 1

    @property
    def replicates(self) -> int:
        return self.generations.shape[0]

    @property
    def cumulative(self) -> np.ndarray:
        """B_j = Z_1 + ... + Z_j, shape (replicates, k+1) with B_0 = 0."""
        out = np.cumsum(self.generations, axis=1) - 1
        return out


def branching_simulate(d: float, k: int, replicates: int, seed,
                       max_entries: int = 10**8, max_mean: float = 1e15) -> BranchingStats:
    """Generation totals of a Poisson(d) Galton-Watson process.

    Uses Z_{j+1} ~ Poisson(d * Z_j), exact in distribution, never storing trees.
    """
    if d < 0 or k < 0 or replicates < 1:
        raise ParameterError("need d >= 0, k >= 0, replicates >= 1")
    if replicates * (k + 1) > max_entries or d**k > max_mean:
        raise ParameterError("branching run exceeds the memory/overflow budget")
    rng = make_rng(seed)
    z = np.empty((replicates, k + 1), dtype=np.int64)
    z[:, 0] = 1
    for j in range(k):
        z[:, j + 1] = rng.poisson(d * z[:, j])
    return BranchingStats(float(d), z)


def generation_variance(d: float, k: int) -> float:
    """Var Z_k for Poisson(d) offspring."""
    if k == 0:
        return 0.0
    if d == 1:
        return float(k)
    return d * d ** (k - 1) * (d**k - 1) / (d - 1)


def branching_tail_check(d: float, k: int, replicates: int, seed, us=(5, 10)) -> dict:
    stats = branching_simulate(d, k, replicates, seed)
    zk = stats.generations[:, k]
    mean = float(zk.mean())
    sigma = math.sqrt(generation_variance(d, k) / replicates)
    scale = (d / LN2) ** k
    tails = []
    for u in us:
        frac = float(np.mean(zk >= u * scale))
        bound = math.e * math.exp(-u)
        tails.append({"u": u, "threshold": u * scale, "empirical": frac,
                      "bound": bound, "ok": frac <= bound})
    return {
        "d": d,
        "k": k,
        "replicates": replicates,
        "mean_Zk": mean,
        "expected_Zk": d**k,
        "std_error": sigma,
        "z_score": (mean - d**k) / sigma if sigma > 0 else 0.0,
        "mean_ok": abs(mean - d**k) <= 3 * sigma,
        "mean_Bk": float(stats.cumulative[:, k].mean()),
        "tails": tails,
        "tails_ok": all(t["ok"] for t in tails),
    }


# -- neighborhood growth ---------------------------------------------------------


@dataclass(frozen=True)
class DepthBudget:
    n: int
    d: float
    w: float
    two_p: int

    @property
    def p(self) -> int:
        return self.two_p // 2


def depth_budget(n: int, d: float, w: float) -> DepthBudget:
    """Largest 2p with 2p <= w log n / log(d / ln 2)."""
    if d / LN2 <= 1:
        raise ParameterError("depth budget needs d > ln 2")
    if n < 1:
        raise ParameterError("n must be positive")
    value = w * math.log(n) / math.log(d / LN2)
    return DepthBudget(n, d, w, max(0, math.floor(value + 1e-12)))


def branching_ball_bound(d: float, k: int, s: float) -> float:
    """lambda = d^(s k) (d / ln 2)^k."""
    return d ** (s * k) * (d / LN2) ** k


def neighborhood_tail_experiment(n: int, d: float, w: float, trials: int, seed,
                                 exponents=(0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99),
                                 s: float = 0.1) -> dict:
    """Max ball sizes at radius 2p (and p) on fixed-edge-count graphs.

    The exponents A and the margin s are grid parameters: the existence of some
    A < 1 is the claim, so the output is the curve of exceedance fractions.
    """
    budget = depth_budget(n, d, w)
    per_trial = []
    for t in range(trials):
        g = random_graph(n, d, derive_seed(seed, "neighborhood", t))
        big = ball_sizes(g, budget.two_p)
        small = ball_sizes(g, budget.p) if budget.p != budget.two_p else big
        per_trial.append({
            "max_ball_2p": int(big.max()),
            "max_ball_p": int(small.max()),
            "mean_ball_2p": float(big.mean()),
        })
    max2 = np.array([r["max_ball_2p"] for r in per_trial])
    max1 = np.array([r["max_ball_p"] for r in per_trial])
    curve = []
    for a in exponents:
        curve.append({
            "A": a,
            "n^A": n**a,
            "frac_2p_exceeds": float(np.mean(max2 >= n**a)),
            "frac_p_exceeds_half": float(np.mean(max1 >= n ** (a / 2))),
        })
    lam = branching_ball_bound(d, budget.two_p, s)
    return {
        "n": n,
        "d": d,
        "w": w,
        "two_p": budget.two_p,
        "p": budget.p,
        "trials": per_trial,
        "all_below_n": bool(np.all(max2 < n)),
        "curve": curve,
        "branching": {
            "s": s,
            "k": budget.two_p,
            "bound": lam,
            "mean_max_ball_2p": float(max2.mean()),
            "mean_ball_2p": float(np.mean([r["mean_ball_2p"] for r in per_trial])),
            "note": "graph balls are compared with the Poisson branching bound; the "
                    "Binomial offspring of the graph has the smaller mgf",
        },
    }


# -- Hamming weight concentration --------------------------------------------------


def weight_concentration_experiment(g: Graph, params, shots: int = 0, seed=0,
                                    mode: str = "sampling",
                                    deltas=(0.01, 0.02, 0.05, 0.1), q_max=None,
                                    workers: int = 1) -> dict:
    """Spread of |sigma| over QAOA+ shots, or exact Var(W) from light cones."""
    from . import lightcone
    from .qaoa_plus import qaoa_plus_bits
    from .statevector import hamming_moments, run_qaoa

    n = g.n
    if mode == "sampling":
        measured, pruned = qaoa_plus_bits(g, params, shots, seed, q_max=q_max)
        sizes = pruned.sum(axis=1)
        weights = measured.sum(axis=1)
        w1, w2 = hamming_moments(run_qaoa(g, params, q_max=q_max))
        mean = float(sizes.mean())
        bands = [{"delta": dl,
                  "frac_outside": float(np.mean(np.abs(sizes - mean) >= dl * n))}
                 for dl in deltas]
        return {
            "mode": mode,
            "n": n,
            "shots": shots,
            "mean_size": mean,
            "var_size": float(sizes.var()),
            "mean_weight": float(weights.mean()),
            "var_weight": float(weights.var()),
            "exact_mean_weight": w1,
            "exact_var_weight": w2 - w1 * w1,
            "bands": bands,
        }
    if mode != "variance":
        raise ParameterError(f"unknown mode {mode!r}")
    var = lightcone.hamming_variance(g, params, q_max, workers)
    radius = 2 * params.p
    biggest = int(ball_sizes(g, radius).max()) if n else 0
    a_eff = math.log(biggest) / math.log(n) if n > 1 and biggest > 0 else 0.0
    return {
        "mode": mode,
        "n": n,
        "p": params.p,
        "variance": var,
        "variance_per_n": var / n if n else 0.0,
        "max_ball_2p": biggest,
        "bound_ok": var <= n * biggest + 1e-9 * max(1.0, var),
        "A_effective": a_eff,
        "variance_over_n_1_plus_A": var / n ** (1 + a_eff) if n > 1 else 0.0,
    }


# -- minimal valid graphs -----------------------------------------------------------


def _set_partitions_min2(items):
    """Partitions of ``items`` into blocks of size >= 2."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for r in range(1, len(rest) + 1):
        for mates in combinations(rest, r):
            block = (first,) + mates
            remaining = [x for x in rest if x not in mates]
            for tail in _set_partitions_min2(remaining):
                yield [block] + tail


def minimal_valid_graphs(t: int, max_t: int = 9):
    """Every minimal valid graph on vertices 0..t-1, as a frozenset of edges.

    Each one is a disjoint union of stars covering all vertices; a block of two
    is a single edge and a block of r >= 3 vertices has r possible centers.
    """
    if t > max_t:
        raise ParameterError(f"t={t} exceeds the enumeration limit {max_t}")
    for blocks in _set_partitions_min2(list(range(t))):
        choices = [block[:1] if len(block) == 2 else block for block in blocks]
        stack = [((), 0)]
        while stack:
            edges, k = stack.pop()
            if k == len(blocks):
                yield frozenset(edges)
                continue
            for c in choices[k]:
                star = tuple((min(c, v), max(c, v)) for v in blocks[k] if v != c)
                stack.append((edges + star, k + 1))


def count_minimal_valid_graphs(t: int, max_t: int = 9) -> int:
    return sum(1 for _ in minimal_valid_graphs(t, max_t))


def count_minimal_valid_graphs_bruteforce(t: int, max_t: int = 6) -> int:
    """Filter all graphs on t labelled vertices: no isolated vertex, and deleting
    any edge creates one."""
    if t > max_t:
        raise ParameterError(f"brute force limited to t <= {max_t}")
    pairs = list(combinations(range(t), 2))
    count = 0
    for code in range(1 << len(pairs)):
        deg = [0] * t
        edges = [pairs[k] for k in range(len(pairs)) if (code >> k) & 1]
        for a, b in edges:
            deg[a] += 1
            deg[b] += 1
        if t == 0 or min(deg) == 0:
            continue
        if all(deg[a] == 1 or deg[b] == 1 for a, b in edges):
            count += 1
    return count
