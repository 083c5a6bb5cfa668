import math
from functools import reduce

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qaoa_locality.errors import ParameterError, QubitLimitError
from qaoa_locality.graphs import Graph, random_graph
from qaoa_locality.ogp import exact_mis
from qaoa_locality.statevector import (
    CostKind, CostModel, InitialKind, PureState, QaoaParams, all_cost_values, apply_cost_phase,
    apply_mixer, expectation, get_q_max, prepare_initial, q_max_override, run_qaoa,
    sample_bitstrings,
)

X = np.array([[0, 1], [1, 0]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def rx(beta):
    return math.cos(beta) * I2 - 1j * math.sin(beta) * X


def dense_mixer(q, beta):
    # qubit k is bit k, so qubit 0 is the rightmost kron factor
    return reduce(np.kron, [rx(beta)] * q)


def dense_cost(g: Graph, kind=CostKind.IS_PENALTY):
    q = g.n
    vals = []
    for idx in range(2**q):
        b = [(idx >> k) & 1 for k in range(q)]
        w = sum(b)
        c = sum(b[a] * b[c_] for a, c_ in g.unique_edges.tolist())
        vals.append({CostKind.HAMMING: w, CostKind.IS_PENALTY: c, CostKind.OBJECTIVE: w - c}[kind])
    return np.array(vals, dtype=float)


def slow_qaoa(g: Graph, params: QaoaParams) -> np.ndarray:
    q = g.n
    psi = np.zeros(2**q, dtype=complex)
    psi[0] = 1
    if params.initial is InitialKind.PLUS:
        psi = np.full(2**q, 2 ** (-q / 2), dtype=complex)
    elif params.initial is InitialKind.ROTATED:
        psi = dense_mixer(q, params.theta) @ psi
    for gamma, beta in zip(params.gammas, params.betas):
        psi = np.diag(np.exp(-1j * gamma * dense_cost(g))) @ psi
        psi = dense_mixer(q, beta) @ psi
    return psi


def random_state(rng, q):
    v = rng.normal(size=2**q) + 1j * rng.normal(size=2**q)
    return PureState(list(range(q)), v / np.linalg.norm(v))


def test_initial_states():
    s = prepare_initial([0, 1], InitialKind.ZEROS)
    assert np.allclose(s.amplitudes, [1, 0, 0, 0])
    assert np.allclose(prepare_initial([0, 1, 2], InitialKind.ROTATED, 0.0).amplitudes,
                       prepare_initial([0, 1, 2], InitialKind.ZEROS).amplitudes)
    theta = 0.37
    probs = prepare_initial([0, 1, 2], InitialKind.ROTATED, theta).probabilities()
    p1 = sum(pr for idx, pr in enumerate(probs) if idx & 1)
    assert abs(p1 - math.sin(theta) ** 2) < 1e-14


def test_qubit_cap_guard():
    with pytest.raises(QubitLimitError):
        prepare_initial(list(range(get_q_max() + 1)))
    with q_max_override(4):
        with pytest.raises(QubitLimitError):
            run_qaoa(random_graph(5, 2, 0), QaoaParams((0.1,), (0.2,)))
    assert get_q_max() == 26


def test_cost_phase_examples(rng):
    g = Graph(2, [(0, 1)])
    s = random_state(rng, 2)
    assert np.allclose(apply_cost_phase(s.copy(), CostModel(CostKind.IS_PENALTY, g), 0.0).amplitudes,
                       s.amplitudes)
    gamma = 0.81
    out = apply_cost_phase(s.copy(), CostModel(CostKind.IS_PENALTY, g), gamma)
    ratio = out.amplitudes / s.amplitudes
    assert np.allclose(ratio, [1, 1, 1, np.exp(-1j * gamma)])
    tri = Graph(3, [(0, 1), (1, 2), (0, 2)])
    s = random_state(rng, 3)
    out = apply_cost_phase(s.copy(), CostModel(CostKind.IS_PENALTY, tri), gamma)
    assert np.allclose(out.amplitudes, np.exp(-1j * gamma * dense_cost(tri)) * s.amplitudes)


def test_cost_phase_label_mismatch():
    g = Graph(3, [(0, 2)])
    s = PureState([0, 1], np.array([1, 0, 0, 0], dtype=complex))
    with pytest.raises(ParameterError):
        apply_cost_phase(s, CostModel(CostKind.IS_PENALTY, g), 0.3)


def test_mixer_examples(rng):
    s = random_state(rng, 3)
    assert np.allclose(apply_mixer(s.copy(), 0.0).amplitudes, s.amplitudes)
    one = apply_mixer(prepare_initial([0]), math.pi / 2)
    assert abs(abs(one.amplitudes[1]) - 1) < 1e-15
    for _ in range(3):
        s = random_state(rng, 3)
        beta = float(rng.uniform(0, 3))
        assert np.allclose(apply_mixer(s.copy(), beta).amplitudes,
                           dense_mixer(3, beta) @ s.amplitudes, atol=1e-14)


@pytest.mark.parametrize("q", [1, 4, 5, 7])
def test_mixer_matches_dense_for_block_sizes(q, rng):
    s = random_state(rng, q)
    assert np.allclose(apply_mixer(s.copy(), 0.3).amplitudes, dense_mixer(q, 0.3) @ s.amplitudes)


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_layer_composition(a, b, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(5, 2, seed)
    cost = CostModel(CostKind.IS_PENALTY, g)
    s = random_state(rng, 5)
    twice = apply_cost_phase(apply_cost_phase(s.copy(), cost, a), cost, b)
    once = apply_cost_phase(s.copy(), cost, a + b)
    assert np.allclose(twice.amplitudes, once.amplitudes, atol=1e-12)
    mm = apply_mixer(apply_mixer(s.copy(), a), b)
    assert np.allclose(mm.amplitudes, apply_mixer(s.copy(), a + b).amplitudes, atol=1e-12)
    assert abs(mm.norm() - 1) < 1e-12 and abs(twice.norm() - 1) < 1e-12


def test_run_qaoa_examples():
    g = random_graph(6, 2, 1)
    s = run_qaoa(g, QaoaParams())
    assert abs(s.amplitudes[0] - 1) < 1e-15
    theta, gamma, beta = 0.4, 1.3, 0.25
    s = run_qaoa(Graph(4, []), QaoaParams.p15(theta, gamma, beta))
    probs = s.probabilities()
    prod = 1.0
    for idx in range(16):
        w = bin(idx).count("1")
        pr = math.sin(theta + beta) ** (2 * w) * math.cos(theta + beta) ** (2 * (4 - w))
        prod = min(prod, 1 - abs(probs[idx] - pr))
    assert prod > 1 - 1e-12


@pytest.mark.parametrize("initial", ["zeros", "plus", "rotated"])
def test_run_qaoa_matches_slow_oracle(initial, rng):
    g = random_graph(10, 3, 17)
    kw = {"theta": 0.3} if initial == "rotated" else {"initial": initial}
    params = QaoaParams(rng.uniform(0, 3, 2), rng.uniform(0, 1.5, 2), **kw)
    fast = run_qaoa(g, params)
    assert abs(fast.norm() - 1) < 1e-12
    slow = slow_qaoa(g, params)
    assert np.allclose(fast.amplitudes, slow, atol=1e-12)
    obj = CostModel(CostKind.OBJECTIVE, g)
    assert abs(expectation(fast, obj) - float(np.abs(slow) ** 2 @ dense_cost(g, CostKind.OBJECTIVE))) < 1e-12


def test_expectation_examples():
    g = Graph(2, [(0, 1)])
    assert expectation(prepare_initial([0, 1]), CostModel(CostKind.HAMMING, g)) == 0
    g5 = Graph(5, [])
    assert abs(expectation(prepare_initial(range(5), InitialKind.PLUS),
                           CostModel(CostKind.HAMMING, g5)) - 2.5) < 1e-12
    theta, beta = 0.5, 0.3
    s = run_qaoa(g, QaoaParams.p15(theta, 0.0, beta))
    s2 = math.sin(theta + beta) ** 2
    assert abs(expectation(s, CostModel(CostKind.OBJECTIVE, g)) - (2 * s2 - s2 * s2)) < 1e-12


@given(st.integers(1, 10), st.integers(0, 2**32))
def test_objective_identity(n, seed):
    g = random_graph(n, min(2.0, n - 1.0), seed) if n > 1 else Graph(1, [])
    w = all_cost_values(g, CostKind.HAMMING)
    c = all_cost_values(g, CostKind.IS_PENALTY)
    assert np.array_equal(all_cost_values(g, CostKind.OBJECTIVE), w - c)
    assert np.array_equal(c, dense_cost(g).astype(c.dtype))


@pytest.mark.parametrize("seed", range(5))
def test_objective_max_is_mis(seed):
    g = random_graph(16 + seed, 2 + seed / 2, seed)
    assert all_cost_values(g, CostKind.OBJECTIVE).max() == exact_mis(g).size


def test_sampling_examples():
    z = sample_bitstrings(prepare_initial([0, 1, 2]), 100, 0)
    assert not z.any()
    one = PureState([0], np.array([0, 1], dtype=complex))
    assert sample_bitstrings(one, 50, 1).all()
    bell = PureState([0, 1], np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2))
    draws = sample_bitstrings(bell, 100_000, 2)
    freq = np.mean(~draws.any(axis=1))
    assert abs(freq - 0.5) <= 3 * math.sqrt(0.25 / 100_000)
    assert np.array_equal(sample_bitstrings(bell, 500, 9), sample_bitstrings(bell, 500, 9))


def test_params_round_trip():
    p = QaoaParams((0.1, 0.2), (0.3, 0.4), theta=0.5)
    assert QaoaParams.from_dict(p.to_dict()) == p
    with pytest.raises(ParameterError):
        QaoaParams((0.1,), ())
