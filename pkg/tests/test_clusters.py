from fractions import Fraction

import numpy as np
import pytest

from sobex.clusters import (
    ClusterConfig,
    assign_all,
    assign_cluster,
    build_cluster_tree,
    verify_separation,
)
from sobex.cz import TYPE_I, TYPE_II, decompose
from sobex.errors import GeometryError
from sobex.fractal import FractalParams, build_fractal_set


def fset(n, l):
    return build_fractal_set(FractalParams(n, l, eps_max=Fraction(1, 4)))


def test_tree_shape_l1():
    tree = build_cluster_tree(fset(8, 1))
    assert tree.n_nodes == 3
    assert tree.clusters[0].prefix == ()
    assert tree.clusters[0].size == 2
    assert tree.ball_radius[0] == Fraction(2) * Fraction(1, 8)
    assert not tree.has_ball(1) and not tree.has_ball(2)
    assert {tree.clusters[1].prefix, tree.clusters[2].prefix} == {(-1,), (1,)}


def test_tree_counts_and_partition():
    tree = build_cluster_tree(fset(4, 3))
    assert tree.n_nodes == 15
    for v, c in enumerate(tree.clusters):
        assert c.size == 2 ** (3 - c.depth)
    rep = verify_separation(tree)
    assert rep.passed, rep.failures
    assert rep.partition_ok and rep.parent_prefix_ok and rep.disjoint_ok
    assert rep.min_gap_over_eps_l > 0


def test_center_abscissas_match_prefixes():
    f = fset(4, 2)
    tree = build_cluster_tree(f)
    eps = f.params.eps
    for v, c in enumerate(tree.clusters):
        assert c.center_x == sum(
            (s * eps ** (k + 1) for k, s in enumerate(c.prefix)), Fraction(0)
        )
        # members cluster around the center
        for j in tree.members(v):
            assert abs(f.e2_x[j] - c.center_x) <= eps ** (c.depth + 1) / (1 - eps) + 1e-18


def test_hat_layer_feasibility():
    # inflated layer with M=1 demands eps <= (A-1)/(100A): infeasible at 1/8
    with pytest.raises(GeometryError):
        build_cluster_tree(fset(8, 3), ClusterConfig(hat_exponent=1))
    # M=0 demands 20*eps + 1 <= 2: still infeasible at eps = 1/8
    with pytest.raises(GeometryError):
        build_cluster_tree(fset(8, 3), ClusterConfig(hat_exponent=0))
    # eps = 1/64 satisfies the M=0 inequalities
    tree = build_cluster_tree(fset(64, 2), ClusterConfig(hat_exponent=0))
    rep = verify_separation(tree)
    assert rep.passed, rep.failures
    assert rep.min_hat_gap_over_eps_l is not None
    assert rep.min_hat_gap_over_eps_l > 0
    # but M=1 fails even at eps = 1/64
    with pytest.raises(GeometryError):
        build_cluster_tree(fset(64, 2), ClusterConfig(hat_exponent=1))


def test_sibling_ball_gap():
    tree = build_cluster_tree(fset(8, 2))
    a, b = 1, 2
    gap = abs(tree.ball_center_x[a] - tree.ball_center_x[b]) \
        - tree.ball_radius[a] - tree.ball_radius[b]
    assert gap > 0


def test_assignment_rules():
    f = fset(4, 2)
    dz = decompose(f)
    tree = build_cluster_tree(f)
    assign = assign_all(dz, tree)
    # boundary squares carry the root cluster
    assert np.all(assign[dz.boundary] == 0)
    # type II squares carry their singleton
    for i in np.flatnonzero(dz.type_of == TYPE_II):
        v = int(assign[i])
        assert tree.clusters[v].depth == tree.depth
        assert list(tree.members(v)) == [int(dz.x_point[i])]
    # the deepest-ball rule agrees with a brute-force scan over all clusters
    for i in range(0, dz.n_leaves, 7):
        if dz.type_of[i] == TYPE_II:
            continue
        best = 0
        best_depth = -1
        from sobex.clusters import _square_in_ball
        for v in range(tree.n_nodes):
            if tree.has_ball(v) and _square_in_ball(i, dz, tree, v):
                if tree.clusters[v].depth > best_depth:
                    best, best_depth = v, tree.clusters[v].depth
        if best_depth < 0:
            best = 0
        assert assign[i] == best


def test_fine_type1_square_under_deep_cluster():
    f = fset(8, 2)
    dz = decompose(f)
    tree = build_cluster_tree(f)
    # a type I square directly below an upper point sits well inside the
    # depth L-1 ball of the point's parent cluster
    j = 0  # leftmost upper point
    x = float(f.e2_x[j])
    i = dz.locate(x, 0.0)
    assert dz.type_of[i] == TYPE_I
    v = assign_cluster(i, dz, tree)
    assert tree.clusters[v].depth == tree.depth - 1
    assert j in tree.members(v)


def test_assignment_monotone_under_shrinking():
    # deeper-contained synthetic squares map to equal-or-deeper clusters
    f = fset(8, 2)
    dz = decompose(f)
    tree = build_cluster_tree(f)
    j = 1
    x = float(f.e2_x[j])
    i_small = dz.locate(x, 0.0)
    depth_small = tree.clusters[assign_cluster(i_small, dz, tree)].depth
    i_big = dz.locate(x + 1.0, 1.0)
    depth_big = tree.clusters[assign_cluster(i_big, dz, tree)].depth
    assert depth_small >= depth_big


def test_json_dump():
    tree = build_cluster_tree(fset(4, 2))
    doc = tree.to_json_dict()
    assert doc["depth"] == 2
    assert len(doc["nodes"]) == 7
    assert doc["nodes"][0]["ball"] is not None
    assert doc["nodes"][3]["ball"] is None
