"""Large independent sets on small graphs and their pairwise overlaps.

Sets are Python-int bitmasks (bit v = vertex v). Overlaps between two families
are histogrammed per integer intersection size, so O^Ab / O^Be membership for
any threshold is read off exactly.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .errors import EnumerationCapError, ParameterError
from .graphs import Graph, InterpolationPath, graph_at
from .qaoa_plus import IndependentSet
from .rng import make_rng

ETA_STAR = 0.5 + 1 / (2 * math.sqrt(2))
MAX_EXACT_N = 64
DEFAULT_CAP = 10**7


def _neighbor_masks(g: Graph) -> list[int]:
    out = []
    for nb in g.adj:
        m = 0
        for u in nb:
            m |= 1 << u
        out.append(m)
    return out


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def exact_mis(g: Graph, max_n: int = MAX_EXACT_N) -> IndependentSet:
    """Maximum independent set by branch and bound.

    Vertices of degree <= 1 in the remaining graph are taken greedily (always
    safe); otherwise branch on a maximum-degree vertex. The bound is current
    size plus remaining candidates.
    """
    if g.n > max_n:
        raise ParameterError(f"exact MIS limited to n <= {max_n}, got {g.n}")
    nbr = _neighbor_masks(g)
    best = [0, 0]
    sys.setrecursionlimit(max(sys.getrecursionlimit(), 4 * g.n + 100))

    def rec(cand: int, cur: int, size: int) -> None:
        while cand:
            if size + cand.bit_count() <= best[0]:
                return
            low_v, low_d, hi_v, hi_d = -1, 1 << 30, -1, -1
            for v in _bits(cand):
                dv = (nbr[v] & cand).bit_count()
                if dv < low_d:
                    low_v, low_d = v, dv
                if dv > hi_d:
                    hi_v, hi_d = v, dv
                if low_d <= 1:
                    break
            if low_d <= 1:
                cand &= ~(nbr[low_v] | (1 << low_v))
                cur |= 1 << low_v
                size += 1
                continue
            v = hi_v
            rec(cand & ~(nbr[v] | (1 << v)), cur | (1 << v), size + 1)
            cand &= ~(1 << v)
        if size > best[0]:
            best[0], best[1] = size, cur

    rec((1 << g.n) - 1, 0, 0)
    return IndependentSet(g.n, best[1])


@dataclass
class OgpConfig:
    eta: float
    alpha_mode: str | float = "instance"
    cap: int = DEFAULT_CAP
    tau_grid: int = 50

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise ParameterError("eta must lie in (0, 1)")
        if isinstance(self.alpha_mode, str) and self.alpha_mode not in ("instance", "asymptotic"):
            raise ParameterError("alpha_mode must be 'instance', 'asymptotic' or a number")


def alpha_reference(g: Graph, cfg: OgpConfig) -> float:
    """Independence ratio used to normalise sizes and overlaps."""
    if cfg.alpha_mode == "instance":
        return exact_mis(g).size / g.n if g.n else 0.0
    if cfg.alpha_mode == "asymptotic":
        d = 2 * len(g.unique_edges) / g.n
        if d <= 1:
            raise ParameterError("asymptotic 2 ln d / d needs average degree > 1")
        return 2 * math.log(d) / d
    return float(cfg.alpha_mode)


def size_threshold(n: int, eta: float, alpha: float) -> int:
    return max(0, math.ceil(eta * alpha * n - 1e-9))


def enumerate_independent_sets(g: Graph, min_size: int, cap: int = DEFAULT_CAP) -> list[int]:
    """All independent sets with at least ``min_size`` vertices, as bitmasks."""
    nbr = _neighbor_masks(g)
    out: list[int] = []
    sys.setrecursionlimit(max(sys.getrecursionlimit(), 4 * g.n + 100))

    def rec(cand: int, cur: int, size: int) -> None:
        if size + cand.bit_count() < min_size:
            return
        if not cand:
            out.append(cur)
            if len(out) > cap:
                raise EnumerationCapError(cap, len(out))
            return
        low = cand & -cand
        v = low.bit_length() - 1
        rec(cand & ~(nbr[v] | low), cur | low, size + 1)
        rec(cand & ~low, cur, size)

    rec((1 << g.n) - 1, 0, 0)
    return out


def enumerate_eta_optimal(g: Graph, cfg: OgpConfig, alpha: float | None = None) -> list[IndependentSet]:
    """Every independent set of size >= ceil(eta * alpha * n)."""
    if alpha is None:
        alpha = alpha_reference(g, cfg)
    s = size_threshold(g.n, cfg.eta, alpha)
    return [IndependentSet(g.n, m) for m in enumerate_independent_sets(g, s, cfg.cap)]


def brute_force_independent_masks(g: Graph, min_size: int = 0) -> np.ndarray:
    """Oracle: filter all 2^n strings (n <= 24)."""
    if g.n > 24:
        raise ParameterError("brute force limited to n <= 24")
    idx = np.arange(1 << g.n, dtype=np.int64)
    ok = np.ones(len(idx), dtype=bool)
    for a, b in g.unique_edges.tolist():
        ok &= ((idx >> a) & (idx >> b) & 1) == 0
    ok &= np.bitwise_count(idx) >= min_size
    return idx[ok]


def _as_matrix(sets, n: int) -> np.ndarray:
    masks = [s.mask if isinstance(s, IndependentSet) else int(s) for s in sets]
    mat = np.zeros((len(masks), n), dtype=np.float32)
    for r, m in enumerate(masks):
        mat[r, list(_bits(m))] = 1.0
    return mat


@dataclass
class OverlapHistogram:
    """Counts of cross pairs per integer intersection size."""

    t1: int | None
    t2: int | None
    n: int
    alpha: float
    counts: np.ndarray
    sets1: int
    sets2: int
    min_size: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def scale(self) -> float:
        return self.n * self.alpha

    def total(self) -> int:
        return int(self.counts.sum())

    def bins(self):
        """(bin_lo, bin_hi, count) over normalized overlap |s1 & s2| / (n alpha)."""
        k = np.arange(len(self.counts))
        return k / self.scale, (k + 1) / self.scale, self.counts

    def overlaps_present(self) -> np.ndarray:
        return np.flatnonzero(self.counts)

    def nonempty_above(self, tau: float) -> bool:
        """O^Ab(eta, G1, G2, tau) != empty."""
        ks = self.overlaps_present()
        return bool(np.any(ks >= tau * self.scale - 1e-9))

    def nonempty_below(self, tau: float) -> bool:
        """O^Be(eta, G1, G2, tau) != empty."""
        ks = self.overlaps_present()
        return bool(np.any(ks <= tau * self.scale + 1e-9))

    def middle_nonempty(self, tau1: float, tau2: float) -> bool:
        """O^Ab(tau1) & O^Be(tau2) != empty: some pair with overlap in [tau1, tau2]."""
        ks = self.overlaps_present()
        return bool(np.any((ks >= tau1 * self.scale - 1e-9) & (ks <= tau2 * self.scale + 1e-9)))

    def largest_gap(self):
        """Widest run of empty overlap values between occupied ones.

        Returns (tau1, tau2) at the occupied values bracketing the run, or None.
        """
        ks = self.overlaps_present()
        if len(ks) < 2:
            return None
        steps = np.diff(ks)
        k = int(np.argmax(steps))
        if steps[k] <= 1:
            return None
        return float(ks[k] / self.scale), float(ks[k + 1] / self.scale)

    def csv_rows(self):
        lo, hi, c = self.bins()
        for a, b, x in zip(lo.tolist(), hi.tolist(), c.tolist()):
            yield {"t1": self.t1, "t2": self.t2, "bin_lo": a, "bin_hi": b, "count": int(x)}


def overlap_counts(sets1, sets2, n: int, chunk: int = 2048) -> np.ndarray:
    """Histogram of |s1 & s2| over all cross pairs, chunked over sets1."""
    m2 = _as_matrix(sets2, n)
    counts = np.zeros(n + 1, dtype=np.int64)
    sets1 = list(sets1)
    for lo in range(0, len(sets1), chunk):
        m1 = _as_matrix(sets1[lo : lo + chunk], n)
        ov = np.rint(m1 @ m2.T).astype(np.int64).ravel()
        counts += np.bincount(ov, minlength=n + 1)
    return counts


def overlap_histogram(g1: Graph, g2: Graph, cfg: OgpConfig, alpha: float | None = None,
                      t1=None, t2=None, sets1=None, sets2=None) -> OverlapHistogram:
    if g1.n != g2.n:
        raise ParameterError("graphs must share the vertex set")
    if alpha is None:
        alpha = min(alpha_reference(g1, cfg), alpha_reference(g2, cfg))
    if sets1 is None:
        sets1 = enumerate_eta_optimal(g1, cfg, alpha)
    if sets2 is None:
        sets2 = enumerate_eta_optimal(g2, cfg, alpha)
    counts = overlap_counts(sets1, sets2, g1.n)
    return OverlapHistogram(t1, t2, g1.n, alpha, counts, len(sets1), len(sets2),
                            size_threshold(g1.n, cfg.eta, alpha))


def ogp_scan(path: InterpolationPath, cfg: OgpConfig, t_pairs=None, n_pairs: int = 10,
             seed=0) -> dict:
    """Overlap histograms along an interpolation path.

    With ``alpha_mode="instance"`` a single reference ratio is used for the
    whole scan: the smallest MIS ratio among the graphs involved, so that every
    family is nonempty. Gap candidates are observations on one small instance
    and say nothing about the asymptotic statement.
    """
    m = path.m
    if t_pairs is None:
        rng = make_rng(seed)
        t_pairs = [(0, m)]
        while len(t_pairs) < n_pairs + 1:
            a, b = sorted(int(x) for x in rng.integers(0, m + 1, size=2))
            t_pairs.append((a, b))
    t_pairs = [tuple(int(x) for x in tp) for tp in t_pairs]
    ts = sorted({t for tp in t_pairs for t in tp})
    graphs = {t: graph_at(path, t) for t in ts}
    if cfg.alpha_mode == "instance":
        mis = {t: exact_mis(graphs[t]).size for t in ts}
        alpha = min(mis.values()) / path.n
    else:
        mis = {}
        alpha = alpha_reference(path.g0, cfg)
    families = {t: enumerate_eta_optimal(graphs[t], cfg, alpha) for t in ts}
    pairs = []
    histograms = []
    for t1, t2 in t_pairs:
        h = overlap_histogram(graphs[t1], graphs[t2], cfg, alpha, t1, t2,
                              families[t1], families[t2])
        histograms.append(h)
        gap = h.largest_gap()
        pairs.append({
            "t1": t1,
            "t2": t2,
            "sets1": h.sets1,
            "sets2": h.sets2,
            "pairs": h.total(),
            "mass_conserved": h.total() == h.sets1 * h.sets2,
            "min_overlap": float(h.overlaps_present().min() / h.scale) if h.total() else None,
            "max_overlap": float(h.overlaps_present().max() / h.scale) if h.total() else None,
            "gap_candidate": list(gap) if gap else None,
        })
    end = next(h for h in histograms if (h.t1, h.t2) == (0, m))
    taus = np.linspace(0, cfg.eta, cfg.tau_grid + 1)
    return {
        "status": "EXPLORATORY",
        "note": "gap candidates are finite-n observations, not evidence for or against "
                "the asymptotic overlap gap",
        "n": path.n,
        "m": m,
        "eta": cfg.eta,
        "alpha_ref": alpha,
        "alpha_mode": cfg.alpha_mode if isinstance(cfg.alpha_mode, str) else "fixed",
        "size_threshold": size_threshold(path.n, cfg.eta, alpha),
        "mis_sizes": {str(t): s for t, s in mis.items()},
        "family_sizes": {str(t): len(f) for t, f in families.items()},
        "pairs": pairs,
        "endpoints": {
            "max_overlap": pairs[t_pairs.index((0, m))]["max_overlap"],
            "above_nonempty": [[float(tau), end.nonempty_above(tau)] for tau in taus],
        },
        "_histograms": histograms,
    }
