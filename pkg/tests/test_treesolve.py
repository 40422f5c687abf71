from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sobex.fractal import FractalParams, build_fractal_set
from sobex.treesolve import (
    TreeProblem,
    leaf_slopes,
    level_weights,
    minimize_tree,
    problem_from_json,
    solve_p2_linear,
    subtree_mean_start,
    tree_seminorm,
)


def simple_problem(depth, p, leaves, weights=None):
    if weights is None:
        weights = np.ones(depth + 1)
        weights[0] = 0.0
    return TreeProblem(depth=depth, p=p, weights=np.asarray(weights, float),
                       leaves=np.asarray(leaves, float))


def test_level_weights_quarter():
    params = FractalParams(4, 2, eps_max=Fraction(1, 4))
    w = level_weights(params, 1.5)
    assert w[1] == pytest.approx(0.25)
    assert w[2] == pytest.approx(0.25)
    params3 = FractalParams(8, 3)
    w3 = level_weights(params3, 1.5)
    eps = 1 / 8
    assert w3[1] == pytest.approx(eps ** 1.0)
    assert w3[2] == pytest.approx(eps ** 1.5)
    assert w3[3] == pytest.approx(eps ** 1.5)
    # the two deepest weights always coincide
    for p in (1.2, 1.5, 1.9):
        for l in (1, 2, 4):
            params_l = FractalParams(8, l)
            wl = level_weights(params_l, p)
            assert wl[-1] == pytest.approx(wl[-2] if l > 1 else wl[-1])


def test_leaf_slopes():
    fset = build_fractal_set(FractalParams(4, 2, eps_max=Fraction(1, 4)))
    pts = fset.points_float()
    f_height = pts[:, 1].copy()
    assert np.allclose(leaf_slopes(f_height, fset), 1.0)
    f_x = pts[:, 0].copy()
    assert np.allclose(leaf_slopes(f_x, fset), 0.0)
    rng = np.random.default_rng(0)
    f = rng.normal(size=fset.n_points)
    slopes = leaf_slopes(f, fset)
    delta = float(fset.params.delta)
    off = fset.e2_offset()
    for j in range(fset.n_e2):
        k = fset.projection_e1_k(j)
        want = (f[off + j] - f[fset.e1_index_of_k(k)]) / delta
        assert slopes[j] == pytest.approx(want, rel=1e-12)


@pytest.mark.parametrize("p", [1.2, 1.5, 1.9, 2.0])
def test_depth1_symmetric(p):
    sol = minimize_tree(simple_problem(1, p, [0.0, 1.0]))
    assert sol.values[0] == pytest.approx(0.5, abs=1e-9)
    assert sol.converged


def test_depth2_hand_case():
    sol = minimize_tree(simple_problem(2, 2.0, [0.0, 0.0, 1.0, 1.0]))
    assert sol.values[1] == pytest.approx(1 / 6, abs=1e-10)
    assert sol.values[2] == pytest.approx(5 / 6, abs=1e-10)
    assert sol.values[0] == pytest.approx(1 / 2, abs=1e-10)


def test_constant_leaves_short_circuit():
    sol = minimize_tree(simple_problem(3, 1.5, np.full(8, 3.25)))
    assert np.all(sol.values == 3.25)
    assert sol.objective == 0.0


@pytest.mark.parametrize("p", [1.2, 1.5, 1.9])
def test_kkt_small_trees(p):
    rng = np.random.default_rng(42)
    for depth in (1, 2, 3, 5):
        leaves = rng.normal(size=2 ** depth) * 3.0
        w = np.concatenate([[0.0], rng.uniform(0.5, 2.0, size=depth)])
        sol = minimize_tree(simple_problem(depth, p, leaves, w))
        assert sol.converged
        assert sol.value_residual <= 1e-10 * sol.value_scale


def test_p2_matches_linear_solve():
    rng = np.random.default_rng(1)
    for depth in (2, 4, 6):
        leaves = rng.normal(size=2 ** depth)
        w = np.concatenate([[0.0], rng.uniform(0.2, 3.0, size=depth)])
        prob = simple_problem(depth, 2.0, leaves, w)
        sol = minimize_tree(prob)
        direct = solve_p2_linear(prob)
        assert np.max(np.abs(sol.values - direct)) < 1e-8


def test_minimizer_dominates_candidates():
    rng = np.random.default_rng(7)
    depth, p = 4, 1.5
    leaves = rng.normal(size=2 ** depth)
    prob = simple_problem(depth, p, leaves)
    sol = minimize_tree(prob)
    from sobex.treesolve import heap_depths
    from sobex.kernels import tree_objective

    depths = heap_depths(prob.n_nodes)
    for _ in range(100):
        cand = sol.values.copy()
        cand[: 2 ** depth - 1] = sol.values[: 2 ** depth - 1] \
            + rng.normal(size=2 ** depth - 1) * rng.uniform(0.001, 1.0)
        other = tree_objective(cand, depths, prob.weights, p)
        assert sol.objective <= other + 1e-12


def test_monotone_envelope():
    # every interior value stays inside the leaf range below it
    rng = np.random.default_rng(3)
    for p in (1.2, 1.7):
        leaves = rng.normal(size=16)
        prob = simple_problem(4, p, leaves)
        sol = minimize_tree(prob)
        L = 4
        for v in range(2 ** L - 1):
            depth = (v + 1).bit_length() - 1
            pos = v - (2 ** depth - 1)
            block = 2 ** (L - depth)
            lo, hi = pos * block, (pos + 1) * block
            assert leaves[lo:hi].min() - 1e-12 <= sol.values[v] <= \
                leaves[lo:hi].max() + 1e-12


@settings(max_examples=25, deadline=None)
@given(
    shift=st.floats(-5, 5, allow_nan=False),
    lam=st.floats(-3, 3, allow_nan=False),
    seed=st.integers(0, 10_000),
)
def test_equivariance(shift, lam, seed):
    rng = np.random.default_rng(seed)
    leaves = rng.normal(size=8)
    prob = simple_problem(3, 1.5, leaves)
    base = minimize_tree(prob)
    shifted = minimize_tree(simple_problem(3, 1.5, leaves + shift))
    assert np.allclose(shifted.values, base.values + shift, atol=1e-7)
    scaled = minimize_tree(simple_problem(3, 1.5, leaves * lam))
    assert np.allclose(scaled.values, base.values * lam, atol=1e-6 * (1 + abs(lam)))


def test_tree_seminorm_cases():
    assert tree_seminorm(np.zeros(7), np.array([0.0, 1.0, 1.0]), 1.5) == 0.0
    vals = np.array([0.5, 0.0, 1.0])
    got = tree_seminorm(vals, np.array([0.0, 1.0]), 1.5)
    assert got == pytest.approx((2 * 0.5 ** 1.5) ** (1 / 1.5))


def test_problem_from_json():
    doc = {"depth": 2, "p": 1.5, "weights": [0.5, 0.25], "leaves": [0, 1, 2, 3]}
    prob = problem_from_json(doc)
    assert prob.weights[1] == 0.5 and prob.weights[2] == 0.25
    sol = minimize_tree(prob)
    assert sol.converged


def test_deep_tree_p12():
    rng = np.random.default_rng(11)
    depth = 10
    leaves = rng.normal(size=2 ** depth)
    w = np.concatenate([[0.0], 0.7 ** np.arange(1, depth + 1)])
    sol = minimize_tree(simple_problem(depth, 1.2, leaves, w))
    assert sol.converged
    assert sol.value_residual <= 1e-10 * sol.value_scale


def test_subtree_mean_start_is_feasible():
    prob = simple_problem(3, 1.5, np.arange(8.0))
    v = subtree_mean_start(prob)
    assert v[0] == pytest.approx(3.5)
    assert np.all(v[7:] == prob.leaves)
