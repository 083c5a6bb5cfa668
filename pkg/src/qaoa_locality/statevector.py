"""Dense statevector simulation of the QAOA circuit.

Bit ordering is little-endian: qubit ``k`` of a state is bit ``k`` of the
amplitude index, and ``state.labels[k]`` is the graph vertex it represents.
Angles are radians; the cost layer is ``exp(-i*gamma*C)`` and the mixer is
``prod_j exp(-i*beta*X_j)``.
"""
from __future__ import annotations

import contextlib
import enum
import functools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ParameterError, QubitLimitError
from .graphs import Graph
from .rng import make_rng

_q_max = 26


def get_q_max() -> int:
    return _q_max


@contextlib.contextmanager
def q_max_override(value: int):
    global _q_max
    old, _q_max = _q_max, int(value)
    try:
        yield
    finally:
        _q_max = old


def _check_size(q: int, q_max: int | None) -> None:
    cap = _q_max if q_max is None else q_max
    if q > cap:
        raise QubitLimitError(q, cap)


class InitialKind(str, enum.Enum):
    ZEROS = "zeros"
    PLUS = "plus"
    ROTATED = "rotated"


@dataclass(frozen=True)
class QaoaParams:
    """Depth-p angles. ``theta`` (if set) rotates |0...0> before the first layer."""

    gammas: tuple[float, ...] = ()
    betas: tuple[float, ...] = ()
    theta: float | None = None
    initial: InitialKind | None = None

    def __post_init__(self):
        object.__setattr__(self, "gammas", tuple(float(x) for x in self.gammas))
        object.__setattr__(self, "betas", tuple(float(x) for x in self.betas))
        if len(self.gammas) != len(self.betas):
            raise ParameterError("gammas and betas must have equal length")
        init = self.initial
        if init is None:
            init = InitialKind.ROTATED if self.theta is not None else InitialKind.ZEROS
        init = InitialKind(init)
        if init is InitialKind.ROTATED and self.theta is None:
            raise ParameterError("rotated initial state needs theta")
        object.__setattr__(self, "initial", init)

    @property
    def p(self) -> int:
        return len(self.gammas)

    @classmethod
    def p15(cls, theta: float, gamma: float, beta: float) -> "QaoaParams":
        """The three-angle circuit U(B,beta) U(C_IS,gamma) U(B,theta)|0>."""
        return cls((gamma,), (beta,), theta=theta)

    def to_dict(self) -> dict:
        return {
            "gammas": list(self.gammas),
            "betas": list(self.betas),
            "theta": self.theta,
            "initial": self.initial.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QaoaParams":
        return cls(
            tuple(data.get("gammas", ())),
            tuple(data.get("betas", ())),
            data.get("theta"),
            data.get("initial"),
        )


@dataclass
class PureState:
    labels: tuple[int, ...]
    amplitudes: np.ndarray = field(repr=False)

    @property
    def q(self) -> int:
        return len(self.labels)

    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def copy(self) -> "PureState":
        return PureState(self.labels, self.amplitudes.copy())


class CostKind(str, enum.Enum):
    HAMMING = "hamming"
    IS_PENALTY = "is_penalty"
    OBJECTIVE = "objective"


@dataclass(frozen=True)
class CostModel:
    """W, C_IS = sum over edges of b_i b_j, or C_obj = W - C_IS on ``graph``."""

    kind: CostKind
    graph: Graph

    def __post_init__(self):
        object.__setattr__(self, "kind", CostKind(self.kind))

    def diagonal(self, labels: Sequence[int]) -> np.ndarray:
        return cost_diagonal(self.graph, labels, self.kind)

    def evaluate(self, bits) -> int:
        """Cost of one bit string given as a length-n 0/1 sequence over vertices."""
        b = np.asarray(bits, dtype=np.int64)
        e = self.graph.unique_edges
        w = int(b.sum())
        c = int((b[e[:, 0]] * b[e[:, 1]]).sum()) if len(e) else 0
        return {CostKind.HAMMING: w, CostKind.IS_PENALTY: c, CostKind.OBJECTIVE: w - c}[self.kind]


def _local_edges(g: Graph, labels: Sequence[int]) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) and (labels.min() < 0 or labels.max() >= g.n):
        raise ParameterError("state label is not a vertex of the cost graph")
    pos = np.full(g.n, -1, dtype=np.int64)
    pos[labels] = np.arange(len(labels))
    e = g.unique_edges
    if len(e) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    local = pos[e]
    if np.any(local < 0):
        raise ParameterError("cost graph has edges on qubits missing from the state")
    return local


def basis_bits(q: int, k: int, idx: np.ndarray | None = None) -> np.ndarray:
    if idx is None:
        idx = np.arange(1 << q, dtype=np.int64)
    return ((idx >> k) & 1).astype(np.int8)


@functools.lru_cache(maxsize=32)
def _popcount(q: int) -> np.ndarray:
    out = np.bitwise_count(np.arange(1 << q, dtype=np.int64)).astype(np.int32)
    out.setflags(write=False)
    return out


@functools.lru_cache(maxsize=17)
def _bits_matrix(q: int) -> np.ndarray:
    idx = np.arange(1 << q, dtype=np.int64)
    out = ((idx[:, None] >> np.arange(q)) & 1).astype(np.float64)
    out.setflags(write=False)
    return out


def penalty_diagonal(q: int, local_edges) -> np.ndarray:
    """C_IS over 2^q basis states for edges given in qubit positions."""
    local_edges = np.asarray(local_edges, dtype=np.int64).reshape(-1, 2)
    if len(local_edges) == 0:
        return np.zeros(1 << q, dtype=np.int32)
    if q <= 16:
        flat = local_edges[:, 0] * q + local_edges[:, 1]
        upper = np.bincount(flat, minlength=q * q).reshape(q, q).astype(np.float64)
        bits = _bits_matrix(q)
        return np.rint(((bits @ upper) * bits).sum(axis=1)).astype(np.int32)
    idx = np.arange(1 << q, dtype=np.int64)
    out = np.zeros(1 << q, dtype=np.int32)
    for a, b in local_edges.tolist():
        out += ((idx >> a) & (idx >> b) & 1).astype(np.int32)
    return out


def cost_diagonal(g: Graph, labels: Sequence[int], kind=CostKind.IS_PENALTY) -> np.ndarray:
    """Cost of every basis state of the labelled qubits (int array, length 2^q)."""
    kind = CostKind(kind)
    q = len(labels)
    if kind is CostKind.HAMMING:
        return _popcount(q).copy()
    out = penalty_diagonal(q, _local_edges(g, labels))
    if kind is CostKind.OBJECTIVE:
        out = _popcount(q) - out
    return out


@functools.lru_cache(maxsize=64)
def _rx_block(angle: float, width: int) -> np.ndarray:
    c, s = np.cos(angle), -1j * np.sin(angle)
    one = np.array([[c, s], [s, c]])
    out = np.ones((1, 1), dtype=complex)
    for _ in range(width):
        out = np.kron(out, one)
    out.setflags(write=False)
    return out


def _rx_all(amps: np.ndarray, q: int, angle: float, block: int = 4) -> None:
    """In place: exp(-i*angle*X) on every qubit, ``block`` qubits per pass."""
    if angle == 0.0 or q == 0:
        return
    k = 0
    while k < q:
        width = min(block, q - k)
        view = amps.reshape(-1, 1 << width, 1 << k)
        view[...] = np.matmul(_rx_block(angle, width), view)
        k += width


def _product_amplitudes(q: int, amp0: complex, amp1: complex) -> np.ndarray:
    w = _popcount(q)
    table = np.array([amp0**(q - k) * amp1**k for k in range(q + 1)], dtype=complex)
    return table[w]


def prepare_initial(labels, kind=InitialKind.ZEROS, theta: float | None = None,
                    q_max: int | None = None) -> PureState:
    labels = tuple(int(v) for v in labels)
    q = len(labels)
    _check_size(q, q_max)
    kind = InitialKind(kind)
    if kind is InitialKind.ZEROS:
        amps = np.zeros(1 << q, dtype=complex)
        amps[0] = 1.0
    elif kind is InitialKind.PLUS:
        amps = np.full(1 << q, 2.0 ** (-q / 2), dtype=complex)
    else:
        if theta is None:
            raise ParameterError("rotated initial state needs theta")
        amps = _product_amplitudes(q, np.cos(theta), -1j * np.sin(theta))
    return PureState(labels, amps)


def initial_for(labels, params: QaoaParams, q_max: int | None = None) -> PureState:
    return prepare_initial(labels, params.initial, params.theta, q_max)


def apply_cost_phase(state: PureState, cost: CostModel, gamma: float) -> PureState:
    diag = cost.diagonal(state.labels)
    return PureState(state.labels, state.amplitudes * np.exp(-1j * gamma * diag))


def apply_mixer(state: PureState, beta: float) -> PureState:
    out = state.amplitudes.copy()
    _rx_all(out, state.q, beta)
    return PureState(state.labels, out)


def evolve(amps: np.ndarray, q: int, diag: np.ndarray, params: QaoaParams) -> np.ndarray:
    """In-place alternating layers on a prepared amplitude vector."""
    top = int(diag.max()) if len(diag) else 0
    for gamma, beta in zip(params.gammas, params.betas):
        if gamma != 0.0:
            amps *= np.exp(-1j * gamma * np.arange(top + 1))[diag]
        _rx_all(amps, q, beta)
    return amps


def run_qaoa(g: Graph, params: QaoaParams, initial=None, q_max: int | None = None,
             labels: Sequence[int] | None = None) -> PureState:
    """U(B,beta_p)U(C_IS,gamma_p)...U(B,beta_1)U(C_IS,gamma_1)|s> on the vertices of g."""
    if labels is None:
        labels = range(g.n)
    labels = tuple(labels)
    _check_size(len(labels), q_max)
    kind = params.initial if initial is None else InitialKind(initial)
    state = prepare_initial(labels, kind, params.theta, q_max)
    diag = cost_diagonal(g, labels, CostKind.IS_PENALTY)
    evolve(state.amplitudes, state.q, diag, params)
    return state


def expectation(state: PureState, cost: CostModel) -> float:
    return float(np.dot(state.probabilities(), cost.diagonal(state.labels)))


def bit_marginals(state: PureState) -> np.ndarray:
    """<b_k> for every qubit k."""
    probs = state.probabilities()
    out = np.empty(state.q)
    for k in range(state.q):
        out[k] = probs.reshape(-1, 2, 1 << k)[:, 1, :].sum()
    return out


def pair_correlation(state: PureState, a: int, b: int) -> float:
    """<b_a b_b> for qubit positions a, b."""
    probs = state.probabilities()
    idx = np.arange(len(probs), dtype=np.int64)
    return float(probs[((idx >> a) & (idx >> b) & 1).astype(bool)].sum())


def hamming_moments(state: PureState) -> tuple[float, float]:
    """(<W>, <W^2>) of the measured Hamming weight."""
    probs = state.probabilities()
    w = np.bitwise_count(np.arange(len(probs), dtype=np.int64)).astype(float)
    return float(probs @ w), float(probs @ (w * w))


def sample_bitstrings(state: PureState, count: int, seed) -> np.ndarray:
    """``count`` computational-basis samples as a (count, q) uint8 array."""
    rng = make_rng(seed)
    probs = state.probabilities()
    probs = probs / probs.sum()
    idx = rng.choice(len(probs), size=int(count), p=probs)
    return index_to_bits(idx, state.q)


def index_to_bits(idx, q: int) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    return ((idx[..., None] >> np.arange(q)) & 1).astype(np.uint8)


def all_cost_values(g: Graph, kind=CostKind.OBJECTIVE) -> np.ndarray:
    """Cost of all 2^n strings on g (brute force; index bit k = vertex k)."""
    _check_size(g.n, None)
    return cost_diagonal(g, range(g.n), kind)
