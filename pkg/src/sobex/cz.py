"""Quadtree decomposition of the base square driven by the point set.

The base square [-4, 4)^2 is bisected recursively; a square survives as a
leaf once its closed 3-fold dilation holds at most one point of the set.
Leaves carry a type (near the lower row, near the upper row, or empty),
boundary flags, and a pair of anchor points on the lower row used later to
fit the horizontal affine pieces.  All stopping-rule and classification
tests are exact rational comparisons; dilations are closed squares, the
partition itself is half-open.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from .errors import GeometryError, ValidationError
from .fractal import FractalSet

ROOT_CORNER = Fraction(-4)
ROOT_SIDE = Fraction(8)

TYPE_I = 1    # one lower-row point in the 1.1-dilation
TYPE_II = 2   # one upper-row point in the 1.1-dilation
TYPE_III = 3  # no point of the set in the 1.1-dilation


@dataclass(frozen=True)
class DyadicSquare:
    """Half-open square [ax, ax+side) x [ay, ay+side) from repeated bisection."""

    ax: Fraction
    ay: Fraction
    generation: int

    @property
    def side(self) -> Fraction:
        return ROOT_SIDE / 2 ** self.generation

    @property
    def center(self) -> tuple[Fraction, Fraction]:
        h = self.side / 2
        return (self.ax + h, self.ay + h)

    def dilation(self, c: Fraction) -> tuple[Fraction, Fraction, Fraction, Fraction]:
        """Closed box (x0, x1, y0, y1) of the c-fold dilation about the center."""
        cx, cy = self.center
        half = Fraction(c) * self.side / 2
        return (cx - half, cx + half, cy - half, cy + half)

    def contains_halfopen(self, x: Fraction, y: Fraction) -> bool:
        s = self.side
        return self.ax <= x < self.ax + s and self.ay <= y < self.ay + s


DILATION_11 = Fraction(11, 10)


def touches(a: DyadicSquare, b: DyadicSquare) -> bool:
    """Whether the closed 1.1-dilations of two squares intersect."""
    for (c1, s1, c2, s2) in (
        (a.center[0], a.side, b.center[0], b.side),
        (a.center[1], a.side, b.center[1], b.side),
    ):
        if abs(c1 - c2) > DILATION_11 * (s1 + s2) / 2:
            return False
    return True


def _count_e1(fset: FractalSet, x0: Fraction, x1: Fraction) -> tuple[int, int, int]:
    """Count lower-row points with abscissa in the closed interval [x0, x1].

    Returns (count, k_lo, k_hi); the k range is meaningful only when count > 0.
    """
    s = fset.params.scale
    lo = max(-s, math.ceil(x0 * s))
    hi = min(s, math.floor(x1 * s))
    return max(0, hi - lo + 1), lo, hi


def _count_e2(fset: FractalSet, x0: Fraction, x1: Fraction) -> tuple[int, int]:
    """Count upper-row points in [x0, x1]; returns (count, first_index)."""
    lo = bisect.bisect_left(fset.e2_x, x0)
    hi = bisect.bisect_right(fset.e2_x, x1)
    return hi - lo, lo


def _count_e_in_box(fset: FractalSet, box, cap: int = 2) -> int:
    """Points of the set in a closed box, early-exiting at ``cap``."""
    x0, x1, y0, y1 = box
    n = 0
    if y0 <= 0 <= y1:
        c, _, _ = _count_e1(fset, x0, x1)
        n += c
        if n >= cap:
            return n
    if y0 <= fset.params.delta <= y1:
        c, _ = _count_e2(fset, x0, x1)
        n += c
    return min(n, cap) if n >= cap else n


class CzDecomposition:
    """The leaf partition plus the walk structure of its quadtree.

    Leaves are indexed 0..n_leaves-1 in construction (depth-first) order.
    Neighbor lists include the square itself (the touch relation is
    reflexive).  Anchor points are stored as integer indices k into the
    lower row, the actual points being (k*delta, 0).
    """

    def __init__(self, fset: FractalSet):
        self.fset = fset
        # quadtree node storage (internal nodes and leaves)
        self.node_ax: list[Fraction] = []
        self.node_ay: list[Fraction] = []
        self.node_gen: list[int] = []
        self.node_child: list[tuple[int, int, int, int] | None] = []
        self.node_leaf: list[int] = []
        # per-leaf data
        self.leaf_node: list[int] = []
        self.neighbors: list[np.ndarray] = []
        self.type_of: np.ndarray | None = None
        self.boundary: np.ndarray | None = None
        self.x_point: np.ndarray | None = None   # e2 index for type II, else -1
        self.anchor_z: np.ndarray | None = None  # lower-row k index
        self.anchor_w: np.ndarray | None = None
        # float shadows, filled after construction
        self.corner_x: np.ndarray | None = None
        self.corner_y: np.ndarray | None = None
        self.side: np.ndarray | None = None
        self.generation: np.ndarray | None = None

    # -- basic accessors -------------------------------------------------

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_node)

    def square(self, i: int) -> DyadicSquare:
        n = self.leaf_node[i]
        return DyadicSquare(self.node_ax[n], self.node_ay[n], self.node_gen[n])

    def squares(self) -> Iterable[DyadicSquare]:
        return (self.square(i) for i in range(self.n_leaves))

    def side_frac(self, i: int) -> Fraction:
        return ROOT_SIDE / 2 ** self.node_gen[self.leaf_node[i]]

    def anchor_points(self, i: int) -> tuple[tuple[Fraction, Fraction], tuple[Fraction, Fraction]]:
        d = self.fset.params.delta
        return ((self.anchor_z[i] * d, Fraction(0)), (self.anchor_w[i] * d, Fraction(0)))

    def locate(self, x: float, y: float) -> int:
        """Leaf index of the half-open square containing (x, y); -1 if outside."""
        if not (-4.0 <= x < 4.0 and -4.0 <= y < 4.0):
            return -1
        n = 0
        while self.node_child[n] is not None:
            ax = float(self.node_ax[n])
            ay = float(self.node_ay[n])
            h = float(ROOT_SIDE / 2 ** (self.node_gen[n] + 1))
            q = (1 if x >= ax + h else 0) + (2 if y >= ay + h else 0)
            n = self.node_child[n][q]
        return self.node_leaf[n]

    def locate_fraction(self, x: Fraction, y: Fraction) -> int:
        if not (-4 <= x < 4 and -4 <= y < 4):
            return -1
        n = 0
        while self.node_child[n] is not None:
            h = ROOT_SIDE / 2 ** (self.node_gen[n] + 1)
            q = (1 if x >= self.node_ax[n] + h else 0) + (2 if y >= self.node_ay[n] + h else 0)
            n = self.node_child[n][q]
        return self.node_leaf[n]

    def squares_at_point(self, x: float, y: float) -> list[int]:
        """All leaves whose closed 1.1-dilation contains (x, y)."""
        out = []
        stack = [0]
        while stack:
            n = stack.pop()
            ax = float(self.node_ax[n])
            ay = float(self.node_ay[n])
            s = 8.0 / 2 ** self.node_gen[n]
            m = 0.05 * s
            if not (ax - m <= x <= ax + s + m and ay - m <= y <= ay + s + m):
                continue
            ch = self.node_child[n]
            if ch is None:
                if (ax - m <= x <= ax + s + m) and (ay - m <= y <= ay + s + m):
                    out.append(self.node_leaf[n])
            else:
                stack.extend(ch)
        return out

    # -- serialization ---------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "n_squares": self.n_leaves,
            "squares": [
                {
                    "corner": [[sq.ax.numerator, sq.ax.denominator],
                               [sq.ay.numerator, sq.ay.denominator]],
                    "generation": sq.generation,
                    "type": int(self.type_of[i]),
                    "boundary": bool(self.boundary[i]),
                    "anchors_k": [int(self.anchor_z[i]), int(self.anchor_w[i])],
                }
                for i, sq in enumerate(self.squares())
            ],
            "neighbors": [[int(j) for j in nb] for nb in self.neighbors],
        }

    def to_svg(self, path: str) -> None:
        """Render the partition, colored by type, with the point set overlaid."""
        scale = 100.0
        fills = {TYPE_I: "#e4707a", TYPE_II: "#6f89d6", TYPE_III: "#e8e4da"}

        def sx(v):
            return (v + 4.0) * scale

        def sy(v):
            return (4.0 - v) * scale

        parts = [
            '<svg xmlns="http://www.w3.org/2000/svg" '
            f'viewBox="0 0 {8 * scale} {8 * scale}">'
        ]
        for i in range(self.n_leaves):
            x = sx(self.corner_x[i])
            y = sy(self.corner_y[i] + self.side[i])
            w = self.side[i] * scale
            stroke = "#222" if self.boundary[i] else "#999"
            parts.append(
                f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{w:.2f}" '
                f'fill="{fills[int(self.type_of[i])]}" stroke="{stroke}" '
                f'stroke-width="{max(0.3, w / 200):.2f}"/>'
            )
        pts = self.fset.points_float()
        r = max(0.6, float(self.fset.params.delta) * scale / 4)
        for px, py in pts:
            parts.append(
                f'<circle cx="{sx(px):.2f}" cy="{sy(py):.2f}" r="{r:.2f}" fill="#111"/>'
            )
        parts.append("</svg>")
        with open(path, "w") as fh:
            fh.write("\n".join(parts))


def decompose(fset: FractalSet) -> CzDecomposition:
    """Build the decomposition: recursion, neighbors, types, anchors."""
    dz = CzDecomposition(fset)
    delta = fset.params.delta
    gen_cap = int(math.log2(72 / delta)) + 2

    def new_node(ax, ay, g):
        dz.node_ax.append(ax)
        dz.node_ay.append(ay)
        dz.node_gen.append(g)
        dz.node_child.append(None)
        dz.node_leaf.append(-1)
        return len(dz.node_ax) - 1

    root = new_node(ROOT_CORNER, ROOT_CORNER, 0)
    root_sq = DyadicSquare(ROOT_CORNER, ROOT_CORNER, 0)
    if _count_e_in_box(fset, root_sq.dilation(Fraction(3))) < 2:
        raise GeometryError("the point set is too small to force any split")

    stack = [root]
    while stack:
        n = stack.pop()
        g = dz.node_gen[n]
        if g > gen_cap:
            raise GeometryError(f"recursion passed the generation bound {gen_cap}")
        sq = DyadicSquare(dz.node_ax[n], dz.node_ay[n], g)
        if _count_e_in_box(fset, sq.dilation(Fraction(3))) <= 1:
            dz.node_leaf[n] = len(dz.leaf_node)
            dz.leaf_node.append(n)
            continue
        h = sq.side / 2
        kids = []
        for q in range(4):
            ax = sq.ax + ((q & 1) * h)
            ay = sq.ay + ((q >> 1) * h)
            kids.append(new_node(ax, ay, g + 1))
        dz.node_child[n] = tuple(kids)
        stack.extend(reversed(kids))

    _fill_float_shadows(dz)
    _build_neighbors(dz)
    classify(dz, fset)
    _assign_anchors(dz, fset)
    return dz


def _fill_float_shadows(dz: CzDecomposition) -> None:
    n = dz.n_leaves
    dz.corner_x = np.empty(n)
    dz.corner_y = np.empty(n)
    dz.side = np.empty(n)
    dz.generation = np.empty(n, dtype=np.int32)
    for i, nd in enumerate(dz.leaf_node):
        dz.corner_x[i] = float(dz.node_ax[nd])
        dz.corner_y[i] = float(dz.node_ay[nd])
        dz.side[i] = 8.0 / 2 ** dz.node_gen[nd]
        dz.generation[i] = dz.node_gen[nd]


def _build_neighbors(dz: CzDecomposition) -> None:
    """Touch lists via tree walks with exact integer interval tests.

    Coordinates are scaled to integer units of the finest side so the
    closed 1.1-dilation overlap test is exact integer arithmetic.
    """
    gmax = max(dz.node_gen[n] for n in dz.leaf_node)
    unitden = 2 ** gmax  # side of generation g is 8 * 2**(gmax-g) units / 8
    n_nodes = len(dz.node_ax)
    ax_u = np.empty(n_nodes, dtype=np.int64)
    ay_u = np.empty(n_nodes, dtype=np.int64)
    s_u = np.empty(n_nodes, dtype=np.int64)
    for n in range(n_nodes):
        g = dz.node_gen[n]
        s_u[n] = 2 ** (gmax - g)
        # corner offset from -4 in units of 8/2**gmax
        ax_u[n] = int((dz.node_ax[n] + 4) * unitden / 8)
        ay_u[n] = int((dz.node_ay[n] + 4) * unitden / 8)

    children = dz.node_child
    leaf_of = dz.node_leaf
    neighbors: list[np.ndarray] = []
    for i in range(dz.n_leaves):
        nq = dz.leaf_node[i]
        qx0 = 20 * ax_u[nq] - s_u[nq]
        qx1 = 20 * (ax_u[nq] + s_u[nq]) + s_u[nq]
        qy0 = 20 * ay_u[nq] - s_u[nq]
        qy1 = 20 * (ay_u[nq] + s_u[nq]) + s_u[nq]
        found = []
        stack = [0]
        while stack:
            n = stack.pop()
            # inflated node box covers the 1.1-dilation of every descendant
            nx0 = 20 * ax_u[n] - s_u[n]
            nx1 = 20 * (ax_u[n] + s_u[n]) + s_u[n]
            ny0 = 20 * ay_u[n] - s_u[n]
            ny1 = 20 * (ay_u[n] + s_u[n]) + s_u[n]
            if nx0 > qx1 or qx0 > nx1 or ny0 > qy1 or qy0 > ny1:
                continue
            ch = children[n]
            if ch is None:
                found.append(leaf_of[n])  # the box test at a leaf IS the touch test
            else:
                stack.extend(ch)
        found.sort()
        neighbors.append(np.array(found, dtype=np.int32))
    dz.neighbors = neighbors


def classify(dz: CzDecomposition, fset: FractalSet) -> np.ndarray:
    """Partition leaves into types; find upper-row witnesses and boundary flags.

    Raises if any 1.1-dilation holds points from both rows, which would
    contradict the stopping rule.
    """
    n = dz.n_leaves
    type_of = np.full(n, TYPE_III, dtype=np.int8)
    boundary = np.zeros(n, dtype=bool)
    x_point = np.full(n, -1, dtype=np.int64)
    delta = fset.params.delta

    for i in range(n):
        sq = dz.square(i)
        x0, x1, y0, y1 = sq.dilation(DILATION_11)
        c1 = c2 = 0
        if y0 <= 0 <= y1:
            c1, k_lo, _ = _count_e1(fset, x0, x1)
        if y0 <= delta <= y1:
            c2, j_lo = _count_e2(fset, x0, x1)
        if c1 + c2 > 1:
            raise GeometryError(
                f"square {i} has {c1}+{c2} points in its 1.1-dilation; "
                "stopping rule violated"
            )
        if c1 == 1:
            type_of[i] = TYPE_I
        elif c2 == 1:
            type_of[i] = TYPE_II
            x_point[i] = j_lo
        # boundary: the closed 1.1-dilation meets the boundary of the base square
        boundary[i] = (
            sq.ax == ROOT_CORNER
            or sq.ay == ROOT_CORNER
            or sq.ax + sq.side == ROOT_CORNER + ROOT_SIDE
            or sq.ay + sq.side == ROOT_CORNER + ROOT_SIDE
        )

    if np.any(boundary & (type_of != TYPE_III)):
        raise GeometryError("a boundary square holds a point of the set")

    dz.type_of = type_of
    dz.boundary = boundary
    dz.x_point = x_point
    return type_of


def _assign_anchors(dz: CzDecomposition, fset: FractalSet) -> None:
    """Two distinct lower-row anchor indices per leaf.

    Type I squares anchor at their witness point, type II below theirs; the
    second anchor is the right neighbor on the lower row, falling back to
    the left at the right end.  Boundary squares anchor at the extreme
    points (-1, 0), (1, 0); remaining squares take the extreme lower-row
    points inside their closed 50-fold dilation.
    """
    n = dz.n_leaves
    scale = fset.params.scale
    z = np.empty(n, dtype=np.int64)
    w = np.empty(n, dtype=np.int64)

    def adjacent(k: int) -> int:
        return k + 1 if k + 1 <= scale else k - 1

    for i in range(n):
        sq = dz.square(i)
        if dz.boundary[i]:
            z[i], w[i] = -scale, scale
            continue
        t = dz.type_of[i]
        if t == TYPE_I:
            x0, x1, y0, y1 = sq.dilation(DILATION_11)
            c, k_lo, k_hi = _count_e1(fset, x0, x1)
            assert c == 1 and k_lo == k_hi
            z[i] = k_lo
            w[i] = adjacent(k_lo)
        elif t == TYPE_II:
            j = dz.x_point[i]
            q = fset.e2_x[j] / fset.params.delta
            assert q.denominator == 1
            z[i] = int(q)
            w[i] = adjacent(z[i])
        else:
            x0, x1, y0, y1 = sq.dilation(Fraction(50))
            if not (y0 <= 0 <= y1):
                raise GeometryError(
                    f"50-dilation of square {i} misses the lower row entirely"
                )
            c, k_lo, k_hi = _count_e1(fset, x0, x1)
            if c < 2:
                raise GeometryError(
                    f"50-dilation of square {i} holds {c} lower-row points, need 2"
                )
            z[i], w[i] = k_lo, k_hi

        # anchors must sit inside the closed 50-dilation
        x0, x1, y0, y1 = sq.dilation(Fraction(50))
        d = fset.params.delta
        for k in (z[i], w[i]):
            if not (x0 <= k * d <= x1 and y0 <= 0 <= y1):
                raise GeometryError(f"anchor {k} of square {i} escapes the 50-dilation")
    assert np.all(z != w)
    dz.anchor_z = z
    dz.anchor_w = w


@dataclass
class GeometryReport:
    """Measured extremes of the decomposition; ``passed`` aggregates the hard checks."""

    n_squares: int
    max_side_ratio: float
    max_neighbor_count: int          # includes the square itself
    max_cover_count: int
    min_side_9_over_delta: float     # must be >= 1
    type12_side_over_delta: tuple[float, float]   # (min, max) over types I, II
    cz3_ratio: tuple[float, float]   # (min, max) of side/(delta + dist(Q, lower row))
    boundary_min_side: float         # must be >= 1
    prop1_ok: bool                   # at most one point per 1.1-dilation
    stopping_minimal_ok: bool        # parent 3-dilations hold >= 2 points
    partition_ok: bool
    anchor_gap_over_side: tuple[float, float]
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def verify_good_geometry(dz: CzDecomposition, n_samples: int = 10_000,
                         seed: int = 0) -> GeometryReport:
    """Measure the graded-partition properties and check the hard bounds."""
    fset = dz.fset
    delta = fset.params.delta
    failures: list[str] = []

    # side ratios over touching pairs (exact: sides are powers of two)
    max_ratio = 1.0
    max_nbrs = 0
    for i in range(dz.n_leaves):
        nb = dz.neighbors[i]
        max_nbrs = max(max_nbrs, len(nb))
        gi = dz.generation[i]
        for j in nb:
            r = 2.0 ** abs(int(dz.generation[j]) - int(gi))
            if r > max_ratio:
                max_ratio = r
    if max_ratio > 2.0:
        failures.append(f"touching sides differ by factor {max_ratio}")

    # smallest side against delta/9, exact
    min_side = min(dz.side_frac(i) for i in range(dz.n_leaves))
    if min_side * 9 < delta:
        failures.append("a side dropped below delta/9")
    min_side_9_over_delta = float(min_side * 9 / delta)

    # stopping-rule properties, exact
    prop1_ok = True
    for i in range(dz.n_leaves):
        if _count_e_in_box(fset, dz.square(i).dilation(DILATION_11)) > 1:
            prop1_ok = False
            failures.append(f"square {i} holds 2+ points in its 1.1-dilation")
            break
    stopping_ok = True
    for i in range(dz.n_leaves):
        sq = dz.square(i)
        if sq.generation == 0:
            continue
        g = sq.generation - 1
        parent_side = ROOT_SIDE / 2 ** g
        pax = ROOT_CORNER + ((sq.ax - ROOT_CORNER) // parent_side) * parent_side
        pay = ROOT_CORNER + ((sq.ay - ROOT_CORNER) // parent_side) * parent_side
        parent = DyadicSquare(pax, pay, g)
        if _count_e_in_box(fset, parent.dilation(Fraction(3))) < 2:
            stopping_ok = False
            failures.append(f"parent of square {i} should not have split")
            break

    # comparability constants
    t12 = dz.type_of != TYPE_III
    sides = dz.side
    if np.any(t12):
        ratios = sides[t12] / float(delta)
        type12_ratio = (float(ratios.min()), float(ratios.max()))
    else:
        type12_ratio = (math.nan, math.nan)
    dist = _dist_to_lower_row(dz)
    cz3 = sides / (float(delta) + dist)
    cz3_ratio = (float(cz3.min()), float(cz3.max()))

    bmin = float(sides[dz.boundary].min()) if np.any(dz.boundary) else math.inf
    if bmin < 1.0:
        failures.append(f"boundary square of side {bmin} < 1")

    # cover counts at structured per-square samples, and the partition property
    from .kernels import cover_counts, locate_points, tree_arrays

    arrays = tree_arrays(dz)
    pts = _cover_samples(dz)
    cover = cover_counts(pts[:, 0].copy(), pts[:, 1].copy(), *arrays)
    max_cover = int(cover.max())

    rng = np.random.default_rng(seed)
    rx = rng.uniform(-4.0, 4.0, size=n_samples)
    ry = rng.uniform(-4.0, 4.0, size=n_samples)
    owners = locate_points(rx, ry, *arrays)
    partition_ok = True
    if np.any(owners < 0):
        partition_ok = False
    else:
        inside = (
            (dz.corner_x[owners] <= rx) & (rx < dz.corner_x[owners] + dz.side[owners])
            & (dz.corner_y[owners] <= ry) & (ry < dz.corner_y[owners] + dz.side[owners])
        )
        partition_ok = bool(np.all(inside))
    area = float(np.sum(dz.side ** 2))
    if abs(area - 64.0) > 1e-9:
        partition_ok = False
    if not partition_ok:
        failures.append("partition property failed on random samples")

    # anchor gap comparability
    gap = np.abs(dz.anchor_z - dz.anchor_w) * float(delta)
    gs = gap / dz.side
    anchor_ratio = (float(gs.min()), float(gs.max()))
    if anchor_ratio[1] > 50 * math.sqrt(2.0):
        failures.append("anchor pair further apart than the 50-dilation diameter")

    return GeometryReport(
        n_squares=dz.n_leaves,
        max_side_ratio=max_ratio,
        max_neighbor_count=max_nbrs,
        max_cover_count=max_cover,
        min_side_9_over_delta=min_side_9_over_delta,
        type12_side_over_delta=type12_ratio,
        cz3_ratio=cz3_ratio,
        boundary_min_side=bmin,
        prop1_ok=prop1_ok,
        stopping_minimal_ok=stopping_ok,
        partition_ok=partition_ok,
        anchor_gap_over_side=anchor_ratio,
        failures=failures,
    )


def _dist_to_lower_row(dz: CzDecomposition) -> np.ndarray:
    """Distance from each closed leaf square to the segment [-1,1] x {0}."""
    x0 = dz.corner_x
    x1 = dz.corner_x + dz.side
    y0 = dz.corner_y
    y1 = dz.corner_y + dz.side
    dx = np.maximum(0.0, np.maximum(x0 - 1.0, -1.0 - x1))
    dy = np.maximum(0.0, np.maximum(y0, -y1))
    return np.hypot(dx, dy)


def _cover_samples(dz: CzDecomposition) -> np.ndarray:
    """Deterministic sample points near square corners, where dilations pile up."""
    c = 0.013  # relative inset, generic so samples avoid dilation boundaries
    xs = []
    x0 = dz.corner_x
    y0 = dz.corner_y
    s = dz.side
    for fx, fy in ((c, c), (1 - c, c), (c, 1 - c), (1 - c, 1 - c),
                   (-c, -c), (1 + c, -c), (-c, 1 + c), (1 + c, 1 + c),
                   (0.5, c), (0.5, 1 - c), (c, 0.5), (1 - c, 0.5)):
        xs.append(np.column_stack((x0 + fx * s, y0 + fy * s)))
    pts = np.concatenate(xs, axis=0)
    keep = (pts[:, 0] > -4) & (pts[:, 0] < 4) & (pts[:, 1] > -4) & (pts[:, 1] < 4)
    return pts[keep]


def dump_json(dz: CzDecomposition, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(dz.to_json_dict(), fh)
