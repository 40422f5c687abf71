"""Whitney bumps subordinate to the decomposition.

Each square carries a tensor-product plateau bump: 1 on the closed square,
0 outside its open 1.1-dilation, with a quintic C2 edge profile living in
a band of width ``margin * side`` (default 0.05) on each side.  Dividing
by the sum over all squares gives the partition; the square owning a point
contributes a full plateau, so the denominator never drops below 1.

This module is the plain-Python reference path; ``kernels`` holds the
compiled batch twin used for large sweeps.  The two are cross-checked in
the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cz import CzDecomposition, DyadicSquare
from .errors import ValidationError

DEFAULT_MARGIN = 0.05


def smoothstep(t: float) -> tuple[float, float, float]:
    """Quintic step on [0,1] with derivatives; clamped outside."""
    if t <= 0.0:
        return 0.0, 0.0, 0.0
    if t >= 1.0:
        return 1.0, 0.0, 0.0
    v = t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    d1 = 30.0 * t * t * (1.0 - t) ** 2
    d2 = 60.0 * t * (2.0 * t - 1.0) * (t - 1.0)
    return v, d1, d2


def _edge1d(x: float, a: float, s: float, margin: float) -> tuple[float, float, float]:
    b = margin * s
    lo, hi = a - b, a + s + b
    if x <= lo or x >= hi:
        return 0.0, 0.0, 0.0
    if x < a:
        v, d1, d2 = smoothstep((x - lo) / b)
        return v, d1 / b, d2 / (b * b)
    if x <= a + s:
        return 1.0, 0.0, 0.0
    v, d1, d2 = smoothstep((hi - x) / b)
    return v, -d1 / b, d2 / (b * b)


def pre_bump(square, x, margin: float = DEFAULT_MARGIN):
    """Un-normalized bump of one square at a point.

    ``square`` is a DyadicSquare or an (ax, ay, side) triple of floats.
    Returns (value, gradient(2,), hessian(2,2)).
    """
    if isinstance(square, DyadicSquare):
        ax, ay, s = float(square.ax), float(square.ay), float(square.side)
    else:
        ax, ay, s = square
    u, dux, ddux = _edge1d(float(x[0]), ax, s, margin)
    v, dvy, ddvy = _edge1d(float(x[1]), ay, s, margin)
    val = u * v
    grad = np.array([dux * v, u * dvy])
    hess = np.array([[ddux * v, dux * dvy], [dux * dvy, u * ddvy]])
    return val, grad, hess


@dataclass
class PouEvaluation:
    """Normalized bump contributions at a query point."""

    point: tuple[float, float]
    ids: list[int]
    values: np.ndarray
    grads: np.ndarray    # (k, 2)
    hessians: np.ndarray  # (k, 2, 2)

    @property
    def value_sum(self) -> float:
        return float(np.sum(self.values))

    @property
    def grad_sum(self) -> np.ndarray:
        return self.grads.sum(axis=0)

    @property
    def hess_sum(self) -> np.ndarray:
        return self.hessians.sum(axis=0)


def pou_eval(dz: CzDecomposition, x, margin: float = DEFAULT_MARGIN) -> PouEvaluation:
    """Evaluate every nonzero normalized bump at a point of the base square."""
    px, py = float(x[0]), float(x[1])
    own = dz.locate(px, py)
    if own < 0:
        raise ValidationError(f"point {x!r} lies outside the base square")
    cand = dz.neighbors[own]
    raw = []
    for j in cand:
        val, g, h = pre_bump((dz.corner_x[j], dz.corner_y[j], dz.side[j]),
                             (px, py), margin)
        if val != 0.0 or np.any(g) or np.any(h):
            raw.append((int(j), val, g, h))
    D = sum(r[1] for r in raw)
    Dg = sum((r[2] for r in raw), np.zeros(2))
    Dh = sum((r[3] for r in raw), np.zeros((2, 2)))
    ids = []
    vals = []
    grads = []
    hesss = []
    for j, ph, g, h in raw:
        th = ph / D
        tg = (g - th * Dg) / D
        thh = (h - np.outer(tg, Dg) - np.outer(Dg, tg) - th * Dh) / D
        ids.append(j)
        vals.append(th)
        grads.append(tg)
        hesss.append(thh)
    return PouEvaluation((px, py), ids, np.array(vals),
                         np.array(grads).reshape(len(ids), 2),
                         np.array(hesss).reshape(len(ids), 2, 2))


@dataclass
class PouReport:
    """Measured partition-of-unity constants and hard checks."""

    max_defect: float
    sup_theta: float
    min_theta: float
    grad_bound: float   # sup |grad theta| * side
    hess_bound: float   # sup |hess theta| * side^2
    support_ok: bool
    n_squares_sampled: int
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def _sample_offsets(margin: float) -> np.ndarray:
    """Relative sample offsets over the dilation, concentrated in the bands."""
    band = np.linspace(0.08, 0.92, 7)
    left = -margin + margin * band
    right = 1.0 + margin * band
    plateau = np.array([0.0, 0.055, 0.25, 0.5, 0.75, 0.945, 1.0])
    return np.unique(np.concatenate([left, plateau, right]))


def verify_pou(dz: CzDecomposition, sample_count: int = 10_000, seed: int = 0,
               margin: float = DEFAULT_MARGIN,
               squares_per_generation: int = 120) -> PouReport:
    """Measure POU constants over band-targeted samples and random points.

    The per-square derivative suprema are sampled on a stratified subset
    (``squares_per_generation`` per generation); the partition defect is
    additionally measured at ``sample_count`` uniform random points.
    """
    from .kernels import pou_sample, tree_arrays

    failures: list[str] = []
    arrays = tree_arrays(dz)
    gens = np.asarray(dz.generation)
    subset = []
    for g in np.unique(gens):
        idx = np.flatnonzero(gens == g)
        take = idx if len(idx) <= squares_per_generation else \
            idx[np.linspace(0, len(idx) - 1, squares_per_generation).astype(int)]
        subset.append(take)
    subset = np.concatenate(subset).astype(np.int64)

    rel = _sample_offsets(margin)
    indptr, indices = _neighbor_csr(dz)
    max_t, max_g, max_h, min_t, max_d = pou_sample(
        subset, rel, *arrays, indptr, indices,
        dz.corner_x, dz.corner_y, dz.side, margin)

    sup_theta = float(max_t.max())
    min_theta = float(min_t.min())
    grad_bound = float(max_g.max())
    hess_bound = float(max_h.max())
    defect = float(max_d.max())

    # random-point partition defect, via the reference path
    rng = np.random.default_rng(seed)
    n_rand = min(sample_count, 2000)  # reference path is pure python
    pts = rng.uniform(-4.0, 4.0, size=(n_rand, 2))
    for q in pts:
        ev = pou_eval(dz, q, margin)
        defect = max(defect, abs(ev.value_sum - 1.0))
        if len(ev.values) and (ev.values.min() < -1e-15 or ev.values.max() > 1 + 1e-12):
            failures.append("a normalized bump escaped [0, 1]")
            break
    # remaining random budget through the compiled path
    if sample_count > n_rand:
        extra = rng.uniform(-4.0, 4.0, size=(sample_count - n_rand, 2))
        from .kernels import eval_extension
        zero = np.zeros(dz.n_leaves)
        one = np.ones(dz.n_leaves)
        val, *_ = eval_extension(
            extra[:, 0].copy(), extra[:, 1].copy(), *arrays, indptr, indices,
            dz.corner_x, dz.corner_y, dz.side, one, zero, zero,
            1.0, 0.0, 0.0, margin)
        # blending the constant 1 returns exactly the partition sum scaled
        defect = max(defect, float(np.abs(val - 1.0).max()))

    # support: the raw bump vanishes on a ring just outside the 1.1-dilation
    # (tested against the dilation itself so a tampered band is caught)
    support_ok = True
    ring = np.linspace(-0.06, 1.06, 9)
    for i in subset[:: max(1, len(subset) // 200)]:
        geom = (dz.corner_x[i], dz.corner_y[i], dz.side[i])
        s = dz.side[i]
        lo = -(0.05 + 1e-3) * s
        hi = (1.05 + 1e-3) * s
        for t in ring:
            for xx, yy in (
                (dz.corner_x[i] + lo, dz.corner_y[i] + t * s),
                (dz.corner_x[i] + hi, dz.corner_y[i] + t * s),
                (dz.corner_x[i] + t * s, dz.corner_y[i] + lo),
                (dz.corner_x[i] + t * s, dz.corner_y[i] + hi),
            ):
                v, g, h = pre_bump(geom, (xx, yy), margin)
                if v != 0.0 or np.any(g != 0.0) or np.any(h != 0.0):
                    support_ok = False
        if not support_ok:
            break
    if not support_ok:
        failures.append("bump support leaks outside the 1.1-dilation")

    if defect > 1e-10:
        failures.append(f"partition defect {defect:.3e} above 1e-10")
    if min_theta < -1e-15 or sup_theta > 1.0 + 1e-12:
        failures.append("normalized bumps escape [0, 1]")

    return PouReport(
        max_defect=defect,
        sup_theta=sup_theta,
        min_theta=min_theta,
        grad_bound=grad_bound,
        hess_bound=hess_bound,
        support_ok=support_ok,
        n_squares_sampled=len(subset),
        failures=failures,
    )


def _neighbor_csr(dz: CzDecomposition) -> tuple[np.ndarray, np.ndarray]:
    """CSR form of the neighbor lists, cached on the decomposition."""
    cached = getattr(dz, "_nbr_csr", None)
    if cached is not None:
        return cached
    counts = np.array([len(nb) for nb in dz.neighbors], dtype=np.int64)
    indptr = np.zeros(dz.n_leaves + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices = np.concatenate(dz.neighbors).astype(np.int64) if dz.n_leaves else \
        np.zeros(0, dtype=np.int64)
    dz._nbr_csr = (indptr, indices)
    return dz._nbr_csr
