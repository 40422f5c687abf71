"""Binary cluster tree of the upper row and its ball system.

Upper-row points sharing a sign-vector prefix of length l form the depth-l
clusters; all clusters together form a full binary tree of depth L stored
in heap order (node 0 the root, children of v at 2v+1, 2v+2).  Each cluster
of depth l <= L-1 carries a ball centered between the two rows at the
cluster's center abscissa with radius ``ball_scale * eps**(l+1)``.

An optional second layer of concentric verification balls, inflated by
``10**(M+1)``, can be requested with ``hat_exponent=M``.  The inflated
layer is feasible only for very small eps: nesting inside the parent ball
demands ``10**(M+1) * A * eps + 1 <= A``; at the working scales of this
package that fails for every M >= 0, so the pipeline default builds the
tree without the inflated layer and the checks on it are opt-in.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cz import TYPE_II, CzDecomposition
from .errors import GeometryError
from .fractal import FractalSet

DEFAULT_BALL_SCALE = Fraction(2)


@dataclass(frozen=True)
class ClusterConfig:
    ball_scale: Fraction = DEFAULT_BALL_SCALE
    hat_exponent: int | None = None  # M; None disables the inflated layer


@dataclass(frozen=True)
class Cluster:
    """One prefix cluster: members are e2 indices [lo, hi)."""

    prefix: tuple[int, ...]
    depth: int
    lo: int
    hi: int
    center_x: Fraction

    @property
    def size(self) -> int:
        return self.hi - self.lo


class ClusterTree:
    """Heap-ordered full binary tree of clusters with the ball system."""

    def __init__(self, fset: FractalSet, config: ClusterConfig):
        self.fset = fset
        self.config = config
        L = fset.params.depth
        self.depth = L
        self.n_nodes = 2 ** (L + 1) - 1
        self.leaf_start = 2 ** L - 1
        self.clusters: list[Cluster] = []
        self.node_depth = np.empty(self.n_nodes, dtype=np.int64)
        # exact ball data for depths 0..L-1; floats alongside
        self.ball_center_x: list[Fraction | None] = [None] * self.n_nodes
        self.ball_radius: list[Fraction | None] = [None] * self.n_nodes
        self.ball_center_f = np.full((self.n_nodes, 2), np.nan)
        self.ball_radius_f = np.full(self.n_nodes, np.nan)
        self.hat_radius: list[Fraction | None] = [None] * self.n_nodes

    @staticmethod
    def parent(v: int) -> int:
        return (v - 1) // 2

    def has_ball(self, v: int) -> bool:
        return self.ball_radius[v] is not None

    def leaf_node_of_e2(self, j: int) -> int:
        return self.leaf_start + j

    def members(self, v: int) -> range:
        c = self.clusters[v]
        return range(c.lo, c.hi)

    def to_json_dict(self) -> dict:
        return {
            "depth": self.depth,
            "ball_scale": [self.config.ball_scale.numerator,
                           self.config.ball_scale.denominator],
            "hat_exponent": self.config.hat_exponent,
            "nodes": [
                {
                    "prefix": list(c.prefix),
                    "depth": c.depth,
                    "members": [c.lo, c.hi],
                    "center_x": [c.center_x.numerator, c.center_x.denominator],
                    "ball": None if not self.has_ball(v) else {
                        "center": [float(self.ball_center_x[v]),
                                   float(self.fset.params.delta) / 2.0],
                        "radius": float(self.ball_radius[v]),
                    },
                }
                for v, c in enumerate(self.clusters)
            ],
        }


def build_cluster_tree(fset: FractalSet, config: ClusterConfig | None = None) -> ClusterTree:
    """Construct the tree and verify every ball property at build time.

    Raises :class:`GeometryError` when the configuration is geometrically
    infeasible for the given eps (in particular whenever the inflated
    verification layer is requested at working scales).
    """
    config = config or ClusterConfig()
    tree = ClusterTree(fset, config)
    params = fset.params
    eps = params.eps
    delta = params.delta
    L = params.depth
    A = Fraction(config.ball_scale)

    for v in range(tree.n_nodes):
        depth = (v + 1).bit_length() - 1
        tree.node_depth[v] = depth
        pos = v - (2 ** depth - 1)
        block = 2 ** (L - depth)
        lo, hi = pos * block, (pos + 1) * block
        # prefix from the heap path; left child is sign -1
        prefix = []
        u = v
        while u > 0:
            prefix.append(1 if u % 2 == 0 else -1)
            u = (u - 1) // 2
        prefix.reverse()
        center = sum((s * eps ** (k + 1) for k, s in enumerate(prefix)), Fraction(0))
        tree.clusters.append(Cluster(tuple(prefix), depth, lo, hi, center))
        # every member must carry this prefix
        for j in range(lo, hi):
            if fset.e2_signs[j][:depth] != tuple(prefix):
                raise GeometryError("prefix blocks disagree with the sorted row")
        if depth <= L - 1:
            r = A * eps ** (depth + 1)
            tree.ball_center_x[v] = center
            tree.ball_radius[v] = r
            tree.ball_center_f[v] = (float(center), float(delta) / 2.0)
            tree.ball_radius_f[v] = float(r)
            if config.hat_exponent is not None and 1 <= depth:
                tree.hat_radius[v] = 10 ** (config.hat_exponent + 1) * r

    _check_balls(tree)
    return tree


def _check_balls(tree: ClusterTree) -> None:
    fset = tree.fset
    delta = fset.params.delta
    eps = fset.params.eps
    A = Fraction(tree.config.ball_scale)
    L = tree.depth

    for v, c in enumerate(tree.clusters):
        if not tree.has_ball(v):
            continue
        r = tree.ball_radius[v]
        cx = tree.ball_center_x[v]
        # cluster inside its ball: extreme members suffice (sorted row)
        for j in (c.lo, c.hi - 1):
            dx = fset.e2_x[j] - cx
            if dx * dx + (delta - delta / 2) ** 2 > r * r:
                raise GeometryError(
                    f"cluster at node {v} escapes its ball "
                    f"(A = {A}, eps = {eps})"
                )
        if v > 0:
            pv = tree.parent(v)
            rp = tree.ball_radius[pv]
            off = abs(cx - tree.ball_center_x[pv])
            inner = tree.hat_radius[v] if tree.hat_radius[v] is not None else r
            if off + inner > rp:
                kind = "inflated ball" if tree.hat_radius[v] is not None else "ball"
                raise GeometryError(
                    f"{kind} of node {v} is not nested in its parent ball: "
                    f"requires {'10**(M+1) * ' if tree.hat_radius[v] is not None else ''}"
                    f"A*eps + 1 <= A, i.e. eps small enough; eps = {eps}, A = {A}"
                )

    # same-depth disjointness (exact); centers are ordered within a depth
    for depth in range(0, L):
        nodes = [v for v, c in enumerate(tree.clusters)
                 if c.depth == depth and tree.has_ball(v)]
        nodes.sort(key=lambda v: tree.ball_center_x[v])
        exhaustive = len(nodes) <= 64
        pairs = (
            [(a, b) for i, a in enumerate(nodes) for b in nodes[i + 1:]]
            if exhaustive else list(zip(nodes, nodes[1:]))
        )
        for a, b in pairs:
            gap = abs(tree.ball_center_x[a] - tree.ball_center_x[b]) \
                - tree.ball_radius[a] - tree.ball_radius[b]
            if gap <= 0:
                raise GeometryError(
                    f"balls at depth {depth} overlap (eps = {eps}, A = {A})"
                )
            if tree.hat_radius[a] is not None and tree.hat_radius[b] is not None:
                hgap = abs(tree.ball_center_x[a] - tree.ball_center_x[b]) \
                    - tree.hat_radius[a] - tree.hat_radius[b]
                if hgap <= 0:
                    raise GeometryError(
                        f"inflated balls at depth {depth} overlap "
                        f"(eps = {eps}, A = {A}, M = {tree.config.hat_exponent})"
                    )


def assign_cluster(i: int, dz: CzDecomposition, tree: ClusterTree) -> int:
    """Heap node of the cluster attached to leaf square i."""
    if dz.type_of[i] == TYPE_II:
        return tree.leaf_node_of_e2(int(dz.x_point[i]))
    # descend through nested balls; containment is exact on demand
    v = 0
    if not _square_in_ball(i, dz, tree, 0):
        return 0  # root cluster is the fallback
    L = tree.depth
    while tree.clusters[v].depth < L - 1:
        nxt = -1
        for ch in (2 * v + 1, 2 * v + 2):
            if tree.has_ball(ch) and _square_in_ball(i, dz, tree, ch):
                nxt = ch
                break
        if nxt < 0:
            break
        v = nxt
    return v


def _square_in_ball(i: int, dz: CzDecomposition, tree: ClusterTree, v: int) -> bool:
    """Closed square inside closed ball; float fast path, exact fallback."""
    cx, cy = tree.ball_center_f[v]
    r = tree.ball_radius_f[v]
    x0, y0 = dz.corner_x[i], dz.corner_y[i]
    s = dz.side[i]
    worst = 0.0
    for dx in (x0 - cx, x0 + s - cx):
        for dy in (y0 - cy, y0 + s - cy):
            worst = max(worst, dx * dx + dy * dy)
    r2 = r * r
    if worst < r2 * (1 - 1e-12):
        return True
    if worst > r2 * (1 + 1e-12):
        return False
    # borderline: settle exactly
    sq = dz.square(i)
    cxe = tree.ball_center_x[v]
    cye = tree.fset.params.delta / 2
    re = tree.ball_radius[v]
    for px in (sq.ax, sq.ax + sq.side):
        for py in (sq.ay, sq.ay + sq.side):
            if (px - cxe) ** 2 + (py - cye) ** 2 > re * re:
                return False
    return True


def assign_all(dz: CzDecomposition, tree: ClusterTree) -> np.ndarray:
    """Cluster node per leaf square, with the boundary rule asserted."""
    out = np.empty(dz.n_leaves, dtype=np.int64)
    for i in range(dz.n_leaves):
        out[i] = assign_cluster(i, dz, tree)
        if dz.boundary[i] and out[i] != 0:
            raise GeometryError(f"boundary square {i} was not assigned the root")
    return out


@dataclass
class ClusterSeparationReport:
    """Measured gaps and nesting margins of the ball system."""

    min_gap_over_eps_l: float           # min over depths of gap(B, B') / eps**l
    min_hat_gap_over_eps_l: float | None
    min_nesting_margin: float           # min of (r_parent - off - r) / r_parent
    partition_ok: bool
    parent_prefix_ok: bool
    disjoint_ok: bool
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def verify_separation(tree: ClusterTree) -> ClusterSeparationReport:
    """Re-measure the ball separation and nesting actually achieved."""
    fset = tree.fset
    eps = float(fset.params.eps)
    L = tree.depth
    failures: list[str] = []

    min_gap = np.inf
    min_hat_gap = np.inf if tree.config.hat_exponent is not None else None
    disjoint_ok = True
    for depth in range(0, L):
        nodes = [v for v, c in enumerate(tree.clusters)
                 if c.depth == depth and tree.has_ball(v)]
        scale = eps ** depth
        for a, b in zip(nodes, nodes[1:]):
            gap = float(abs(tree.ball_center_x[a] - tree.ball_center_x[b])
                        - tree.ball_radius[a] - tree.ball_radius[b])
            min_gap = min(min_gap, gap / scale)
            if gap <= 0:
                disjoint_ok = False
            if min_hat_gap is not None and tree.hat_radius[a] is not None:
                hg = float(abs(tree.ball_center_x[a] - tree.ball_center_x[b])
                           - tree.hat_radius[a] - tree.hat_radius[b])
                min_hat_gap = min(min_hat_gap, hg / scale)

    min_margin = np.inf
    for v in range(1, tree.n_nodes):
        if not tree.has_ball(v):
            continue
        pv = tree.parent(v)
        off = abs(tree.ball_center_x[v] - tree.ball_center_x[pv])
        inner = tree.hat_radius[v] if tree.hat_radius[v] is not None \
            else tree.ball_radius[v]
        margin = float((tree.ball_radius[pv] - off - inner) / tree.ball_radius[pv])
        min_margin = min(min_margin, margin)
        if margin < 0:
            failures.append(f"nesting fails at node {v}")

    partition_ok = True
    for depth in range(L + 1):
        nodes = [v for v, c in enumerate(tree.clusters) if c.depth == depth]
        covered = sorted(m for v in nodes for m in tree.members(v))
        if covered != list(range(fset.n_e2)):
            partition_ok = False
            failures.append(f"depth {depth} clusters do not partition the row")

    parent_prefix_ok = all(
        tree.clusters[tree.parent(v)].prefix == tree.clusters[v].prefix[:-1]
        for v in range(1, tree.n_nodes)
    )
    if not parent_prefix_ok:
        failures.append("parent prefixes are not truncations")
    if not disjoint_ok:
        failures.append("same-depth balls overlap")
    if min_hat_gap is not None and min_hat_gap <= 0:
        failures.append("same-depth inflated balls overlap")

    return ClusterSeparationReport(
        min_gap_over_eps_l=float(min_gap),
        min_hat_gap_over_eps_l=None if min_hat_gap is None else float(min_hat_gap),
        min_nesting_margin=float(min_margin),
        partition_ok=partition_ok,
        parent_prefix_ok=parent_prefix_ok,
        disjoint_ok=disjoint_ok,
        failures=failures,
    )
