"""Graph-ensemble average of the p=1.5 objective.

For the circuit U(B,beta) U(C_IS,gamma) U(B,theta)|0> on a graph whose edges
are present independently with probability d/n, the expected objective per
vertex in the large-n limit is

    sum_k Pois_d(k) v(k)  -  (d/2) sum_{k,l} Pois_d(k) Pois_d(l) e(k, l)

where v(k) = <b_0> at the center of a star with k leaves and e(k, l) = <b_i b_j>
across the edge of a double star with k and l extra leaves. Only phase gates
touching the measured qubits survive conjugation, so the leaves enter as
spectators: tracing one out multiplies the coherence between |a> and |a'> of its
hub by F(a - a') = cos^2(theta) + sin^2(theta) exp(-i gamma (a - a')).
That gives v and e in closed form without building 2^(k+1) amplitudes.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import poisson

from .errors import ParameterError

HALF_PI = math.pi / 2


def poisson_cutoff(d: float, tail: float = 1e-10) -> int:
    """Smallest K with P[Pois(d) > K] < tail."""
    k = int(d)
    while poisson.sf(k, d) >= tail:
        k += 1
    return k


def _mixer(beta: float) -> np.ndarray:
    c, s = math.cos(beta), -1j * math.sin(beta)
    return np.array([[c, s], [s, c]])


def _single(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), -1j * math.sin(theta)])


def _leaf_factor(theta: float, gamma: float) -> complex:
    """F(+1); F(-1) is its conjugate and F(0) = 1."""
    return math.cos(theta) ** 2 + math.sin(theta) ** 2 * complex(math.cos(gamma), -math.sin(gamma))


def p15_vertex_term(k, theta: float, gamma: float, beta: float):
    """<b_0> at the center of a star with ``k`` leaves (scalar or array of k)."""
    k_arr = np.asarray(k)
    if np.any(k_arr < 0):
        raise ParameterError("degree must be nonnegative")
    psi = _single(theta)
    f = _leaf_factor(theta, gamma) ** k_arr.astype(float)
    rho = np.empty(k_arr.shape + (2, 2), dtype=complex)
    rho[..., 0, 0] = abs(psi[0]) ** 2
    rho[..., 1, 1] = abs(psi[1]) ** 2
    rho[..., 1, 0] = psi[1] * psi[0].conjugate() * f
    rho[..., 0, 1] = np.conj(rho[..., 1, 0])
    u = _mixer(beta)[1]
    val = np.einsum("x,...xy,y->...", u, rho, u.conj()).real
    return float(val) if np.ndim(val) == 0 else val


_PAIR_INDEX = [(a, b) for a in (0, 1) for b in (0, 1)]


def _pair_coefficients(theta: float, gamma: float, beta: float):
    """Per (x, y) density-matrix entry: prefactor and the hub offsets (a-a', b-b')."""
    psi = _single(theta)
    u = np.kron(_mixer(beta), _mixer(beta))[3]
    coef = np.empty((4, 4), dtype=complex)
    da = np.empty((4, 4), dtype=int)
    db = np.empty((4, 4), dtype=int)
    for x, (a, b) in enumerate(_PAIR_INDEX):
        for y, (a2, b2) in enumerate(_PAIR_INDEX):
            phase = complex(math.cos(gamma * (a * b - a2 * b2)), -math.sin(gamma * (a * b - a2 * b2)))
            amp = psi[a] * psi[b] * (psi[a2] * psi[b2]).conjugate()
            coef[x, y] = u[x] * amp * phase * u[y].conjugate()
            da[x, y] = a - a2
            db[x, y] = b - b2
    return coef, da, db


def p15_edge_term(k, l, theta: float, gamma: float, beta: float):
    """<b_i b_j> on the double star: edge (i, j), k leaves on i, l leaves on j."""
    k_arr, l_arr = np.broadcast_arrays(np.asarray(k), np.asarray(l))
    if np.any(k_arr < 0) or np.any(l_arr < 0):
        raise ParameterError("degrees must be nonnegative")
    f = _leaf_factor(theta, gamma)
    powers = {1: f, -1: f.conjugate(), 0: 1.0}
    coef, da, db = _pair_coefficients(theta, gamma, beta)
    kf, lf = k_arr.astype(float), l_arr.astype(float)
    total = np.zeros(k_arr.shape, dtype=complex)
    for x in range(4):
        for y in range(4):
            total += coef[x, y] * powers[da[x, y]] ** kf * powers[db[x, y]] ** lf
    val = total.real
    return float(val) if np.ndim(val) == 0 else val


@dataclass
class P15Config:
    d: float
    degree_cut: int | None = None
    tail_tol: float = 1e-10
    theta_box: tuple[float, float] = (0.0, HALF_PI)
    gamma_box: tuple[float, float] = (0.0, math.pi)
    beta_box: tuple[float, float] = (0.0, HALF_PI)
    grid: int = 9
    n_starts: int = 20
    value_tol: float = 1e-8

    def __post_init__(self):
        if not self.d > 0:
            raise ParameterError("d must be positive")
        if self.degree_cut is None:
            self.degree_cut = poisson_cutoff(self.d, self.tail_tol)
        for name in ("theta_box", "gamma_box", "beta_box"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise ParameterError(f"{name} is empty")
            setattr(self, name, (float(lo), float(hi)))
        if self.n_starts < 1:
            raise ParameterError("need at least one start")

    @property
    def tail_mass(self) -> float:
        return float(poisson.sf(self.degree_cut, self.d))

    def weights(self) -> np.ndarray:
        return poisson.pmf(np.arange(self.degree_cut + 1), self.d)


def _check_tail(cfg: P15Config, limit: float = 1e-6) -> None:
    if cfg.tail_mass > limit:
        raise ParameterError(
            f"Poisson tail beyond K={cfg.degree_cut} is {cfg.tail_mass:.3g} (> {limit})")


def p15_ensemble_objective(theta: float, gamma: float, beta: float, cfg: P15Config) -> float:
    """Ex<C_obj>/n, with the degree sums truncated at ``cfg.degree_cut``.

    The double sum over (k, l) factorizes entry by entry of the 4x4 density
    matrix, so it is evaluated as products of two truncated single sums.
    """
    _check_tail(cfg)
    w = cfg.weights()
    ks = np.arange(len(w), dtype=float)
    f = _leaf_factor(theta, gamma)
    gen = {0: w.sum(), 1: np.dot(w, f ** ks), -1: np.dot(w, f.conjugate() ** ks)}
    vertex = float(np.dot(w, p15_vertex_term(np.arange(len(w)), theta, gamma, beta)))
    coef, da, db = _pair_coefficients(theta, gamma, beta)
    pair = 0.0 + 0.0j
    for x in range(4):
        for y in range(4):
            pair += coef[x, y] * gen[da[x, y]] * gen[db[x, y]]
    return vertex - cfg.d / 2 * pair.real


def p15_ensemble_objective_tables(theta, gamma, beta, cfg: P15Config) -> float:
    """Same quantity summed term by term over the explicit (k, l) table."""
    w = cfg.weights()
    ks = np.arange(len(w))
    v = p15_vertex_term(ks, theta, gamma, beta)
    e = p15_edge_term(ks[:, None], ks[None, :], theta, gamma, beta)
    return float(w @ v - cfg.d / 2 * (w @ e @ w))


def p15_ensemble_objective_limit(theta, gamma, beta, d: float) -> float:
    """Untruncated value via the Poisson generating function E[F^K] = exp(d(F-1))."""
    f = _leaf_factor(theta, gamma)
    gen = {0: 1.0, 1: np.exp(d * (f - 1)), -1: np.exp(d * (f.conjugate() - 1))}
    psi = _single(theta)
    u = _mixer(beta)[1]
    rho = np.array([[abs(psi[0]) ** 2, psi[0] * psi[1].conjugate() * gen[-1]],
                    [psi[1] * psi[0].conjugate() * gen[1], abs(psi[1]) ** 2]])
    vertex = (u @ rho @ u.conj()).real
    coef, da, db = _pair_coefficients(theta, gamma, beta)
    pair = sum(coef[x, y] * gen[da[x, y]] * gen[db[x, y]] for x in range(4) for y in range(4))
    return float(vertex - d / 2 * pair.real)


@dataclass
class P15Result:
    d: float
    value_per_n: float
    theta: float
    gamma: float
    beta: float
    degree_cut: int
    tail_mass: float
    on_boundary: list[str] = field(default_factory=list)
    starts: int = 0
    evaluations: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _boxes(cfg: P15Config):
    return [cfg.theta_box, cfg.gamma_box, cfg.beta_box]


def p15_optimize(cfg: P15Config) -> P15Result:
    """Grid search over the angle box, then bounded Nelder-Mead from the best
    ``n_starts`` grid points. Degenerate box sides (lo == hi) pin that angle."""
    _check_tail(cfg)
    boxes = _boxes(cfg)
    free = [k for k, (lo, hi) in enumerate(boxes) if hi > lo]
    fixed = np.array([lo for lo, _ in boxes])
    evals = [0]

    def full(x):
        angles = fixed.copy()
        angles[free] = x
        return angles

    def neg(x):
        evals[0] += 1
        return -p15_ensemble_objective(*full(x), cfg)

    if not free:
        best_x = np.zeros(0)
        best_val = -neg(best_x)
        n_starts = 0
    else:
        # rotation optima shrink like 1/sqrt(d): quadratic spacing puts grid
        # points near zero without inflating the grid for small d
        u = np.linspace(0.0, 1.0, cfg.grid)
        axes = [boxes[k][0] + (boxes[k][1] - boxes[k][0]) * (u if k == 1 else u * u)
                for k in free]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(free))
        scores = np.array([neg(x) for x in mesh])
        order = np.argsort(scores, kind="stable")[: cfg.n_starts]
        best_x, best_val = None, -np.inf
        bounds = [boxes[k] for k in free]
        for start in mesh[order]:
            res = minimize(neg, start, method="Nelder-Mead", bounds=bounds,
                           options={"xatol": 1e-10, "fatol": cfg.value_tol * 1e-3,
                                    "maxiter": 4000, "maxfev": 8000})
            if -res.fun > best_val:
                best_val, best_x = -res.fun, np.asarray(res.x)
        n_starts = len(order)
    angles = full(best_x)
    names = ("theta", "gamma", "beta")
    edge = []
    for k in free:
        lo, hi = boxes[k]
        if min(angles[k] - lo, hi - angles[k]) < 1e-6:
            edge.append(names[k])
    return P15Result(
        d=float(cfg.d),
        value_per_n=float(best_val),
        theta=float(angles[0]),
        gamma=float(angles[1]),
        beta=float(angles[2]),
        degree_cut=int(cfg.degree_cut),
        tail_mass=cfg.tail_mass,
        on_boundary=edge,
        starts=n_starts,
        evaluations=evals[0],
    )


SCAN_COLUMNS = ("d", "value_per_n", "d*value", "theta", "gamma", "beta", "K", "tail_mass")


def p15_large_d_scan(ds, **cfg_kwargs) -> list[dict]:
    """Optimum per d, with d*value and the sqrt(d)-rescaled rotation angles."""
    rows = []
    for d in ds:
        r = p15_optimize(P15Config(d=float(d), **cfg_kwargs))
        rows.append({
            "d": r.d,
            "value_per_n": r.value_per_n,
            "d*value": r.d * r.value_per_n,
            "theta": r.theta,
            "gamma": r.gamma,
            "beta": r.beta,
            "K": r.degree_cut,
            "tail_mass": r.tail_mass,
            "sqrt_d_theta": math.sqrt(r.d) * r.theta,
            "sqrt_d_beta": math.sqrt(r.d) * r.beta,
        })
    return rows
