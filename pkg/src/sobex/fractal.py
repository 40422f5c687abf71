"""The two-line fractal point set.

The set lives in the square [-4, 4)^2 and consists of two parts: an
equispaced row of points on the x-axis with spacing ``delta``, spanning
[-1, 1], and a fractal row at height ``delta`` whose abscissas are signed
geometric sums ``sum_l s_l * eps**l`` over sign vectors ``s``.  All
coordinates are kept as exact rationals (``fractions.Fraction``) with
float shadows for numeric work, so membership and grid-alignment tests
are never tolerance based.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .errors import ValidationError

# eps = 1/4 is a hard floor: the cluster ball system needs eps <= 1/4 to
# nest with the default ball scale, and several invariants (prefix order =
# abscissa order) are proved only for eps <= 1/4.
ABS_MAX_EPS = Fraction(1, 4)
DEFAULT_MAX_EPS = Fraction(1, 8)


@dataclass(frozen=True)
class FractalParams:
    """Parameters (eps = 1/inv_eps, depth L, delta = eps**L).

    ``eps_max`` is the validity threshold for eps; the default demands
    inv_eps >= 8.  Tests exploring combinatorics only may relax it down
    to the absolute floor of 1/4.
    """

    inv_eps: int
    depth: int
    eps_max: Fraction = DEFAULT_MAX_EPS

    def __post_init__(self):
        if self.depth < 1:
            raise ValidationError(f"depth must be >= 1, got {self.depth}")
        if self.inv_eps < 2:
            raise ValidationError(f"inv_eps must be >= 2, got {self.inv_eps}")
        if self.eps > ABS_MAX_EPS:
            raise ValidationError(
                f"eps = 1/{self.inv_eps} exceeds the absolute floor 1/4; "
                "the construction is undefined this coarse"
            )
        if self.eps > self.eps_max:
            raise ValidationError(
                f"eps = 1/{self.inv_eps} exceeds eps_max = {self.eps_max}; "
                "pass a larger eps_max to override for small-scale tests"
            )

    @property
    def eps(self) -> Fraction:
        return Fraction(1, self.inv_eps)

    @property
    def delta(self) -> Fraction:
        return self.eps ** self.depth

    @property
    def scale(self) -> int:
        """delta = 1/scale; every point abscissa is an integer multiple of delta."""
        return self.inv_eps ** self.depth


def signs_to_point(signs: Sequence[int], params: FractalParams) -> tuple[Fraction, Fraction]:
    """Map a sign vector of length ``depth`` to its point on the upper row."""
    if len(signs) != params.depth:
        raise ValidationError(
            f"sign vector length {len(signs)} != depth {params.depth}"
        )
    if any(s not in (-1, 1) for s in signs):
        raise ValidationError(f"sign entries must be +-1, got {signs!r}")
    eps = params.eps
    x = sum((s * eps ** (l + 1) for l, s in enumerate(signs)), Fraction(0))
    return (x, params.delta)


@dataclass(frozen=True)
class FractalSet:
    """The assembled point set.

    ``e1_k`` holds the integer indices k of the lower-row points (k*delta, 0),
    k = -scale..scale.  ``e2_x`` holds the upper-row abscissas sorted
    increasingly, ``e2_signs`` the matching sign vectors.  Float shadows of
    the abscissas live in ``e1_xf`` / ``e2_xf``.
    """

    params: FractalParams
    e1_k: np.ndarray
    e2_x: tuple[Fraction, ...]
    e2_signs: tuple[tuple[int, ...], ...]
    e1_xf: np.ndarray = field(repr=False)
    e2_xf: np.ndarray = field(repr=False)

    @property
    def n_e1(self) -> int:
        return len(self.e1_k)

    @property
    def n_e2(self) -> int:
        return len(self.e2_x)

    @property
    def n_points(self) -> int:
        return self.n_e1 + self.n_e2

    def e1_point(self, i: int) -> tuple[Fraction, Fraction]:
        return (Fraction(int(self.e1_k[i]), self.params.scale), Fraction(0))

    def e2_point(self, j: int) -> tuple[Fraction, Fraction]:
        return (self.e2_x[j], self.params.delta)

    def points(self) -> Iterator[tuple[Fraction, Fraction]]:
        """All points, lower row first (by abscissa), then upper row."""
        for i in range(self.n_e1):
            yield self.e1_point(i)
        for j in range(self.n_e2):
            yield self.e2_point(j)

    def points_float(self) -> np.ndarray:
        """(n_points, 2) float array in the same order as :meth:`points`."""
        out = np.zeros((self.n_points, 2))
        out[: self.n_e1, 0] = self.e1_xf
        out[self.n_e1:, 0] = self.e2_xf
        out[self.n_e1:, 1] = float(self.params.delta)
        return out

    def e1_index_of_k(self, k: int) -> int:
        """Position in the point ordering of the lower-row point (k*delta, 0)."""
        scale = self.params.scale
        if not -scale <= k <= scale:
            raise ValidationError(f"k = {k} outside [-{scale}, {scale}]")
        return k + scale

    def e2_offset(self) -> int:
        return self.n_e1

    def projection_e1_k(self, j: int) -> int:
        """Integer k with (k*delta, 0) directly below upper-row point j."""
        q = self.e2_x[j] / self.params.delta
        assert q.denominator == 1
        return int(q)

    def to_json_dict(self) -> dict:
        return {
            "inv_eps": self.params.inv_eps,
            "depth": self.params.depth,
            "eps_max": [self.params.eps_max.numerator, self.params.eps_max.denominator],
            "delta": [self.params.delta.numerator, self.params.delta.denominator],
            "e1": [[int(k), self.params.scale] for k in self.e1_k],
            "e2": [
                {"x": [x.numerator, x.denominator], "signs": list(s)}
                for x, s in zip(self.e2_x, self.e2_signs)
            ],
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "FractalSet":
        num, den = doc.get("eps_max", [1, 8])
        params = FractalParams(int(doc["inv_eps"]), int(doc["depth"]),
                               eps_max=Fraction(num, den))
        fset = build_fractal_set(params)
        # cross-check the document against the rebuilt set
        if len(doc["e1"]) != fset.n_e1 or len(doc["e2"]) != fset.n_e2:
            raise ValidationError("serialized point counts do not match parameters")
        for rec, x in zip(doc["e2"], fset.e2_x):
            if Fraction(rec["x"][0], rec["x"][1]) != x:
                raise ValidationError("serialized upper-row abscissas are inconsistent")
        return fset


def build_fractal_set(params: FractalParams) -> FractalSet:
    """Construct the point set and verify its structural invariants."""
    scale = params.scale
    delta = params.delta
    e1_k = np.arange(-scale, scale + 1, dtype=np.int64)

    pairs = []
    for signs in itertools.product((-1, 1), repeat=params.depth):
        x, _ = signs_to_point(signs, params)
        pairs.append((x, signs))
    pairs.sort(key=lambda t: t[0])
    e2_x = tuple(x for x, _ in pairs)
    e2_signs = tuple(s for _, s in pairs)

    if len(set(e2_x)) != len(e2_x):
        raise ValidationError("upper-row abscissas collide; eps too coarse")
    for x in e2_x:
        q = x / delta
        if q.denominator != 1:
            raise ValidationError("upper-row point does not project onto the lower row")
        if abs(x) >= 1:
            raise ValidationError("upper-row point escapes (-1, 1)")

    e1_xf = (e1_k * (1.0 / scale)).astype(np.float64) if _pow2(scale) else \
        np.array([float(Fraction(int(k), scale)) for k in e1_k])
    e2_xf = np.array([float(x) for x in e2_x])

    fset = FractalSet(params, e1_k, e2_x, e2_signs, e1_xf, e2_xf)
    assert fset.n_e1 == 2 * scale + 1
    assert fset.n_e2 == 2 ** params.depth
    return fset


def _pow2(n: int) -> bool:
    return n & (n - 1) == 0


@dataclass
class SeparationReport:
    """Result of :func:`validate_separation`; carries failures, never raises."""

    min_separation: Fraction
    min_e2_gap: Fraction
    projection_ok: bool
    containment_ok: bool
    counts_ok: bool
    nesting_ok: bool
    failures: list[str]

    @property
    def passed(self) -> bool:
        return not self.failures


def validate_separation(fset: FractalSet) -> SeparationReport:
    """Exhaustively check pairwise separation and structural invariants."""
    params = fset.params
    delta = params.delta
    failures: list[str] = []

    # nearest pairs on the lower row are consecutive; on the upper row the
    # gap is checked pairwise below; across rows the vertical gap is delta
    # for projected pairs, so the global minimum never needs a full
    # quadratic scan over the (large) lower row.
    min_e2_gap = min(
        (b - a for a, b in zip(fset.e2_x, fset.e2_x[1:])),
        default=Fraction(2),
    )
    # exhaustive upper-row scan (the sorted consecutive gap is the min, but
    # an independent full scan is cheap for 2**L points and is the oracle)
    for i in range(fset.n_e2):
        for j in range(i + 1, fset.n_e2):
            gap = abs(fset.e2_x[j] - fset.e2_x[i])
            if gap < min_e2_gap:
                min_e2_gap = gap
    min_separation = min(delta, min_e2_gap)
    if min_separation < delta:
        failures.append(f"pairwise separation {min_separation} below delta {delta}")

    projection_ok = True
    for j in range(fset.n_e2):
        q = fset.e2_x[j] / delta
        if q.denominator != 1 or abs(q) > params.scale:
            projection_ok = False
            failures.append(f"upper point {j} does not project into the lower row")

    containment_ok = all(abs(x) <= 1 for x in fset.e2_x) and \
        abs(int(fset.e1_k[0])) * delta <= 1 and abs(int(fset.e1_k[-1])) * delta <= 1
    if not containment_ok:
        failures.append("points escape [-1,1] x [0,delta]")

    counts_ok = (fset.n_e1 == 2 * params.scale + 1) and (fset.n_e2 == 2 ** params.depth)
    if not counts_ok:
        failures.append("cardinalities do not match 2*floor(1/delta)+1 and 2**L")

    # prefix nesting: sorting by abscissa groups sign vectors by shared prefix
    nesting_ok = True
    for ell in range(params.depth + 1):
        block = 2 ** (params.depth - ell)
        for b in range(2 ** ell):
            chunk = fset.e2_signs[b * block: (b + 1) * block]
            prefixes = {s[:ell] for s in chunk}
            if len(prefixes) != 1:
                nesting_ok = False
        if not nesting_ok:
            failures.append(f"abscissa order does not respect prefixes at depth {ell}")
            break

    # float shadows stay within 1e-15 of the exact values
    for i in (0, fset.n_e1 // 2, fset.n_e1 - 1):
        if abs(fset.e1_xf[i] - float(fset.e1_point(i)[0])) > 1e-15:
            failures.append("lower-row float shadow drift")
            break
    for j in range(fset.n_e2):
        if abs(Fraction(fset.e2_xf[j]) - fset.e2_x[j]) > Fraction(1, 10 ** 15):
            failures.append("upper-row float shadow drift")
            break

    return SeparationReport(
        min_separation=min_separation,
        min_e2_gap=min_e2_gap,
        projection_ok=projection_ok,
        containment_ok=containment_ok,
        counts_ok=counts_ok,
        nesting_ok=nesting_ok,
        failures=failures,
    )
