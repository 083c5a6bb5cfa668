import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qaoa_locality import qaoa_plus
from qaoa_locality.graphs import Graph, check_independent, far_set, random_graph
from qaoa_locality.ogp import exact_mis
from qaoa_locality.qaoa_plus import IndependentSet, prune, prune_batch
from qaoa_locality.statevector import (
    CostKind, CostModel, QaoaParams, all_cost_values, expectation, index_to_bits, run_qaoa,
)

TRIANGLE = Graph(3, [(0, 1), (1, 2), (0, 2)])


def c_obj(g, bits):
    return CostModel(CostKind.OBJECTIVE, g).evaluate(bits)


@pytest.mark.parametrize("rule", qaoa_plus.RULES)
def test_independent_input_is_unchanged(rule):
    g = random_graph(10, 3, 0)
    s = exact_mis(g)
    bits = np.zeros(10, dtype=np.uint8)
    bits[s.vertices()] = 1
    out, trace = prune(g, bits, 5, rule)
    assert out.mask == s.mask and trace.violated == () and trace.removed == ()


@pytest.mark.parametrize("rule", qaoa_plus.RULES)
def test_single_edge_keeps_one_endpoint_fairly(rule):
    g = Graph(2, [(0, 1)])
    kept = [prune(g, [1, 1], seed, rule)[0].vertices() for seed in range(2000)]
    assert all(len(k) == 1 for k in kept)
    frac = np.mean([k[0] == 0 for k in kept])
    assert abs(frac - 0.5) < 3 * math.sqrt(0.25 / 2000)


def test_triangle_sequential_rule_always_keeps_one():
    sizes = {prune(TRIANGLE, [1, 1, 1], s, "sequential")[0].size for s in range(1000)}
    assert sizes == {1}


def test_triangle_independent_rule_distribution():
    # coins on the three edges cover all vertices in 2 of 8 outcomes
    sizes = [prune(TRIANGLE, [1, 1, 1], s, "independent")[0].size for s in range(4000)]
    assert set(sizes) == {0, 1}
    assert abs(np.mean(np.array(sizes) == 0) - 0.25) < 3 * math.sqrt(0.25 * 0.75 / 4000)


@given(st.integers(2, 14), st.integers(0, 2**32), st.sampled_from(qaoa_plus.RULES))
def test_prune_contract(n, seed, rule):
    rng = np.random.default_rng(seed)
    g = random_graph(n, float(rng.uniform(0.5, min(5, n - 1))), seed)
    b = (rng.random(n) < 0.6).astype(np.uint8)
    out, trace = prune(g, b, seed, rule)
    assert check_independent(g, out.vertices())
    assert out.size >= c_obj(g, b)
    assert out.size >= trace.input.weight - trace.n_violated
    assert set(out.vertices()) <= set(np.flatnonzero(b).tolist())


@pytest.mark.parametrize("seed", [1, 2])
def test_exhaustive_contract_n12(seed):
    g = random_graph(12, 3.5, seed)
    every = index_to_bits(np.arange(4096), 12).astype(bool)
    out = prune_batch(g, every, seed)
    e = g.unique_edges
    assert not np.any(out[:, e[:, 0]] & out[:, e[:, 1]])
    assert np.all(out.sum(axis=1) >= all_cost_values(g, CostKind.OBJECTIVE))


def test_batch_and_scalar_rules_have_same_law():
    g = random_graph(6, 3, 8)
    b = np.ones(6, dtype=np.uint8)
    scalar = np.array([sorted(prune(g, b, s)[0].vertices()) == [] for s in range(3000)])
    batch = prune_batch(g, np.ones((3000, 6), dtype=bool), 1).sum(axis=1) == 0
    se = math.sqrt(0.25 / 3000) * 2
    assert abs(scalar.mean() - batch.mean()) < 3 * se + 1e-3


@pytest.mark.parametrize("seed", range(4))
def test_prune_of_argmax_reaches_mis(seed):
    g = random_graph(14, 3, seed)
    vals = all_cost_values(g, CostKind.OBJECTIVE)
    best = int(np.argmax(vals))
    out, _ = prune(g, index_to_bits(best, 14), seed)
    assert out.size == exact_mis(g).size == vals[best]


def test_sample_trivial_cases():
    g = random_graph(8, 2, 0)
    outs = qaoa_plus.qaoa_plus_sample(g, QaoaParams(), 50, 1)
    assert all(s.size == 0 for s in outs)
    measured, pruned = qaoa_plus.qaoa_plus_bits(Graph(6, []), QaoaParams.p15(0.5, 1.0, 0.2), 300, 2)
    assert np.array_equal(measured, pruned)


def test_pruning_lifts_objective_mean():
    g = random_graph(12, 3, 3)
    params = QaoaParams.p15(0.7134, 1.0512, 0.4537)
    measured, pruned = qaoa_plus.qaoa_plus_bits(g, params, 10_000, 4)
    exact = expectation(run_qaoa(g, params), CostModel(CostKind.OBJECTIVE, g))
    sizes = pruned.sum(axis=1)
    assert sizes.mean() >= exact - 3 * sizes.std() / 100
    again = qaoa_plus.qaoa_plus_bits(g, params, 10_000, 4)
    assert np.array_equal(again[1], pruned)


def test_far_marginal_basic_cases():
    g = random_graph(8, 2, 1)
    params = QaoaParams((0.7,), (0.3,), theta=0.5)
    for mode in ("quantum", "pruning"):
        dist = qaoa_plus.far_distribution(g, params, range(8), mode)
        assert abs(sum(dist.values()) - 1) < 1e-12
        assert qaoa_plus.far_marginal(g, QaoaParams(), [1, 4], [0, 0], mode) == pytest.approx(1.0)


def _far_case(seed):
    rng = np.random.default_rng(seed)
    while True:
        g = random_graph(10, float(rng.uniform(1.2, 2.2)), int(rng.integers(2**32)))
        i, j = (int(x) for x in rng.choice(10, 2, replace=False))
        if not g.has_edge(i, j) and far_set(g, i, j, 2):
            params = QaoaParams((float(rng.uniform(0, 3)),), (float(rng.uniform(0, 1.5)),),
                                theta=float(rng.uniform(0.1, 1.4)))
            return g, (i, j), params


@pytest.mark.parametrize("seed", range(5))
def test_far_lemma_holds(seed):
    g, edge, params = _far_case(seed)
    rep = qaoa_plus.verify_far_lemma(g, edge, params)
    assert rep["modes"]["quantum"]["max_discrepancy"] < 1e-10
    assert rep["modes"]["pruning"]["max_discrepancy"] < 1e-10


def test_far_lemma_zero_when_edge_present():
    g = random_graph(10, 2, 3)
    a, b = g.unique_edges[0].tolist()
    rep = qaoa_plus.verify_far_lemma(g, (a, b), QaoaParams((0.4,), (0.9,), theta=0.2))
    assert rep["max_discrepancy"] == 0.0


def test_far_lemma_negative_control_detects_shrunk_far_set():
    worst = 0.0
    for seed in range(6):
        g, edge, params = _far_case(seed)
        rep = qaoa_plus.verify_far_lemma(g, edge, params, modes=("quantum",), radius_shift=-2)
        worst = max(worst, rep["max_discrepancy"])
    assert worst > 1e-6


def test_sequential_rule_is_not_local():
    worst = 0.0
    for seed in range(10):
        g, edge, params = _far_case(seed)
        rep = qaoa_plus.verify_far_lemma(g, edge, params, modes=("pruning",), rule="sequential")
        worst = max(worst, rep["max_discrepancy"])
    assert worst > 1e-6


def test_independent_set_type():
    s = IndependentSet.from_vertices(6, [0, 3, 5])
    assert s.size == 3 and s.vertices() == [0, 3, 5]
    assert s.overlap(IndependentSet.from_vertices(6, [3, 4])) == 1
