import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qaoa_locality import ensemble, lightcone
from qaoa_locality.ensemble import P15Config, p15_edge_term, p15_vertex_term
from qaoa_locality.graphs import Graph, Model, random_graph
from qaoa_locality.statevector import QaoaParams, bit_marginals, pair_correlation, run_qaoa

angles = st.tuples(st.floats(0, 1.6), st.floats(0, 3.2), st.floats(0, 1.6))


def star(k):
    return Graph(k + 1, [(0, v) for v in range(1, k + 1)])


def double_star(k, l):
    edges = [(0, 1)] + [(0, 2 + a) for a in range(k)] + [(1, 2 + k + b) for b in range(l)]
    return Graph(k + l + 2, edges)


def test_vertex_term_examples():
    th, ga, be = 0.4, 1.7, 0.2
    assert p15_vertex_term(0, th, ga, be) == pytest.approx(math.sin(th + be) ** 2, abs=1e-15)
    for k in range(6):
        assert p15_vertex_term(k, th, 0.0, be) == pytest.approx(math.sin(th + be) ** 2, abs=1e-14)


@settings(max_examples=25)
@given(st.integers(0, 7), angles)
def test_vertex_term_matches_star_statevector(k, a):
    th, ga, be = a
    state = run_qaoa(star(k), QaoaParams.p15(th, ga, be))
    assert abs(p15_vertex_term(k, th, ga, be) - bit_marginals(state)[0]) < 1e-12


def test_edge_term_examples():
    th, ga, be = 0.4, 1.7, 0.2
    assert p15_edge_term(0, 0, th, 0.0, be) == pytest.approx(math.sin(th + be) ** 4, abs=1e-15)
    assert p15_edge_term(2, 5, th, ga, be) == pytest.approx(p15_edge_term(5, 2, th, ga, be), abs=1e-15)


@settings(max_examples=25)
@given(st.integers(0, 4), st.integers(0, 4), angles)
def test_edge_term_matches_double_star_statevector(k, l, a):
    th, ga, be = a
    state = run_qaoa(double_star(k, l), QaoaParams.p15(th, ga, be))
    assert abs(p15_edge_term(k, l, th, ga, be) - pair_correlation(state, 0, 1)) < 1e-12


def test_vectorized_terms_match_scalar():
    ks = np.arange(6)
    vec = p15_vertex_term(ks, 0.3, 1.1, 0.5)
    assert np.allclose(vec, [p15_vertex_term(int(k), 0.3, 1.1, 0.5) for k in ks], atol=1e-15)


@pytest.mark.parametrize("d", [1.5, 3.0, 10.0])
def test_objective_gamma_zero_formula(d):
    cfg = P15Config(d=d)
    for th, be in [(0.2, 0.3), (0.6, 0.1), (0.05, 0.02)]:
        s2 = math.sin(th + be) ** 2
        assert ensemble.p15_ensemble_objective(th, 0.0, be, cfg) == pytest.approx(
            s2 - d / 2 * s2 * s2, abs=1e-9)
    assert ensemble.p15_ensemble_objective(0.0, 0.7, 0.0, cfg) == 0.0


@settings(max_examples=20)
@given(angles, st.sampled_from([2.0, 3.0, 7.5, 20.0]))
def test_three_routes_agree(a, d):
    th, ga, be = a
    cfg = P15Config(d=d)
    v = ensemble.p15_ensemble_objective(th, ga, be, cfg)
    assert abs(v - ensemble.p15_ensemble_objective_tables(th, ga, be, cfg)) < 1e-12
    assert abs(v - ensemble.p15_ensemble_objective_limit(th, ga, be, d)) < 1e-8


@pytest.mark.parametrize("d,tol", [(3.0, 1e-9), (10.0, 1e-9), (30.0, 1e-9), (100.0, 1e-7)])
def test_truncation_stability(d, tol):
    base = P15Config(d=d)
    wider = P15Config(d=d, degree_cut=base.degree_cut + 5)
    assert base.tail_mass < 1e-10
    for a in [(0.3, 1.0, 0.2), (0.1, 2.5, 0.05), (0.7, 0.4, 0.4)]:
        diff = ensemble.p15_ensemble_objective(*a, base) - ensemble.p15_ensemble_objective(*a, wider)
        assert abs(diff) < tol


def test_gradient_is_richardson_consistent():
    rng = np.random.default_rng(0)
    cfg = P15Config(d=3.0)
    f = lambda x: ensemble.p15_ensemble_objective(*x, cfg)  # noqa: E731
    for _ in range(10):
        x = rng.uniform([0.05, 0.1, 0.05], [1.5, 3.0, 1.5])
        for axis in range(3):
            e = np.zeros(3)
            e[axis] = 1

            def central(h):
                return (f(x + h * e) - f(x - h * e)) / (2 * h)

            d1, d2, d4 = central(2e-3), central(1e-3), central(5e-4)
            r12 = (4 * d2 - d1) / 3
            r24 = (4 * d4 - d2) / 3
            # a truncation bug shows up as noise that breaks the h^2 error law
            assert abs(r12 - r24) < 1e-8
            assert abs(d1 - r24) > 3 * abs(d4 - r24) or abs(d1 - r24) < 1e-9


def test_truncation_guard():
    from qaoa_locality.errors import ParameterError
    with pytest.raises(ParameterError):
        ensemble.p15_ensemble_objective(0.3, 0.3, 0.3, P15Config(d=10.0, degree_cut=3))


def test_optimize_d3():
    res = ensemble.p15_optimize(P15Config(d=3.0))
    assert abs(res.value_per_n - 0.969 / 3) <= 0.002
    assert res.value_per_n >= 1 / 6 - 1e-9
    assert not res.on_boundary
    assert res.starts >= 20


@pytest.mark.parametrize("d", [2.0, 10.0])
def test_optimize_gamma_pinned(d):
    res = ensemble.p15_optimize(P15Config(d=d, gamma_box=(0.0, 0.0)))
    assert abs(res.value_per_n - 1 / (2 * d)) < 1e-6
    assert math.sin(res.theta + res.beta) == pytest.approx(1 / math.sqrt(d), abs=1e-3)


@pytest.mark.slow
def test_large_d_scan_rescaled_angles():
    rows = ensemble.p15_large_d_scan([3, 30, 100])
    assert rows[0]["value_per_n"] == pytest.approx(
        ensemble.p15_optimize(P15Config(d=3.0)).value_per_n, abs=1e-15)
    a, b = rows[1], rows[2]
    for key in ("sqrt_d_theta", "sqrt_d_beta"):
        assert abs(a[key] - b[key]) / b[key] < 0.2
    assert 1.0 <= b["d*value"] <= 1.04


def _mc(n, seeds, params):
    vals = [lightcone.objective_expectation(random_graph(n, 3, s, Model.BERNOULLI_EDGES), params) / n
            for s in seeds]
    return np.mean(vals), np.std(vals, ddof=1) / math.sqrt(len(vals))


def test_finite_n_small():
    th, ga, be = 0.5, 0.9, 0.3
    ref = ensemble.p15_ensemble_objective(th, ga, be, P15Config(d=3.0))
    mean, se = _mc(1000, range(5), QaoaParams.p15(th, ga, be))
    assert abs(mean - ref) <= 3 * se


@pytest.mark.slow
def test_monte_carlo_at_n_10000():
    th, ga, be = 0.5, 0.9, 0.3
    ref = ensemble.p15_ensemble_objective(th, ga, be, P15Config(d=3.0))
    mean, se = _mc(10_000, range(100, 150), QaoaParams.p15(th, ga, be))
    assert abs(mean - ref) <= 3 * se
