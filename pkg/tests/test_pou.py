from fractions import Fraction

import numpy as np
import pytest

from sobex.cz import decompose
from sobex.fractal import FractalParams, build_fractal_set
from sobex.pou import pou_eval, pre_bump, smoothstep, verify_pou


@pytest.fixture(scope="module")
def dz():
    return decompose(build_fractal_set(FractalParams(4, 2, eps_max=Fraction(1, 4))))


def test_smoothstep_shape():
    assert smoothstep(0.0)[0] == 0.0
    assert smoothstep(1.0)[0] == 1.0
    v, d1, d2 = smoothstep(0.5)
    assert v == pytest.approx(0.5)
    assert d1 == pytest.approx(1.875)
    # symmetry s(t) + s(1-t) = 1
    for t in np.linspace(0, 1, 33):
        assert smoothstep(t)[0] + smoothstep(1 - t)[0] == pytest.approx(1.0, abs=1e-14)
    # derivative bounds for the quintic
    ts = np.linspace(0, 1, 2001)
    assert max(abs(smoothstep(t)[1]) for t in ts) <= 2.0
    assert max(abs(smoothstep(t)[2]) for t in ts) <= 12.0


def test_pre_bump_plateau_and_support():
    geom = (0.0, 0.0, 1.0)
    v, g, h = pre_bump(geom, (0.5, 0.5))
    assert v == 1.0 and not g.any() and not h.any()
    # corners of the closed square are still on the plateau
    v, g, h = pre_bump(geom, (0.0, 1.0))
    assert v == 1.0 and not g.any()
    # outside the 1.1-dilation everything vanishes
    v, g, h = pre_bump(geom, (1.06, 0.5))
    assert v == 0.0 and not g.any() and not h.any()
    # transition midline: value 1/2 in the transverse factor, slope 1.875/band
    v, g, h = pre_bump(geom, (1.025, 0.5))
    assert v == pytest.approx(0.5)
    assert abs(g[0]) == pytest.approx(1.875 / 0.05)


def test_pou_eval_normalization(dz):
    rng = np.random.default_rng(1)
    for _ in range(50):
        x = rng.uniform(-4, 4, size=2)
        ev = pou_eval(dz, x)
        assert ev.value_sum == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(ev.grad_sum, 0.0, atol=1e-10)
        assert np.allclose(ev.hess_sum, 0.0, atol=1e-8)
        assert np.all(ev.values >= 0) and np.all(ev.values <= 1 + 1e-12)


def test_lone_bump_far_from_everything(dz):
    # deep inside a big empty square the owner is the only contributor
    ev = pou_eval(dz, (3.1, -3.1))
    assert len(ev.ids) == 1
    assert ev.values[0] == 1.0
    assert not ev.grads.any() and not ev.hessians.any()


def test_mirror_symmetry(dz):
    # the set is symmetric under x -> -x, so normalized bump values mirror
    for y in (0.037, 0.61, -1.234):
        for t in (0.11, 0.52, 1.7):
            left = sorted(pou_eval(dz, (-t, y)).values)
            right = sorted(pou_eval(dz, (t, y)).values)
            assert np.allclose(left, right, atol=1e-12)


def _clears_profile_junctions(dz, own, x, y, tol=3e-4):
    """True when no contributing square has a band junction within tol."""
    for j in dz.neighbors[own]:
        sj = dz.side[j]
        for r in ((x - dz.corner_x[j]) / sj, (y - dz.corner_y[j]) / sj):
            if min(abs(r - c) for c in (-0.05, 0.0, 1.0, 1.05)) < tol:
                return False
    return True


def test_gradients_match_finite_differences(dz):
    # the derivative scale of a bump of side s is 1/s (gradient) and 1/s^2
    # (Hessian), so relative error is measured against those scales
    rng = np.random.default_rng(3)
    checked = 0
    for gen in np.unique(dz.generation):
        idx = np.flatnonzero(dz.generation == gen)
        for i in idx[:4]:
            s = dz.side[i]
            trials = 0
            while trials < 8 and checked < 200:
                trials += 1
                x = dz.corner_x[i] + rng.uniform(-0.045, 1.045) * s
                y = dz.corner_y[i] + rng.uniform(-0.045, 1.045) * s
                if not (-4 <= x < 4 and -4 <= y < 4):
                    continue
                own = dz.locate(x, y)
                if not _clears_profile_junctions(dz, own, x, y):
                    continue
                step = 1e-5 * s
                ev = pou_eval(dz, (x, y))
                target = {j: k for k, j in enumerate(ev.ids)}
                if i not in target:
                    continue
                k = target[i]

                def theta(px, py):
                    e = pou_eval(dz, (px, py))
                    for kk, jj in enumerate(e.ids):
                        if jj == i:
                            return e.values[kk], e.grads[kk]
                    return 0.0, np.zeros(2)

                fd_x = (theta(x + step, y)[0] - theta(x - step, y)[0]) / (2 * step)
                fd_y = (theta(x, y + step)[0] - theta(x, y - step)[0]) / (2 * step)
                g = ev.grads[k]
                gscale = max(abs(g[0]), abs(g[1]), 40.0 / s)
                assert abs(fd_x - g[0]) / gscale < 1e-6
                assert abs(fd_y - g[1]) / gscale < 1e-6
                # Hessian row against differences of analytic gradients
                hd_xx = (theta(x + step, y)[1][0] - theta(x - step, y)[1][0]) / (2 * step)
                hd_xy = (theta(x, y + step)[1][0] - theta(x, y - step)[1][0]) / (2 * step)
                hexact = ev.hessians[k]
                hscale = max(abs(hexact[0, 0]), abs(hexact[0, 1]), 3000.0 / s ** 2)
                assert abs(hd_xx - hexact[0, 0]) / hscale < 1e-6
                assert abs(hd_xy - hexact[0, 1]) / hscale < 1e-6
                checked += 1
    assert checked >= 30


def test_verify_pou_passes(dz):
    rep = verify_pou(dz, sample_count=3000, squares_per_generation=40)
    assert rep.passed, rep.failures
    assert rep.max_defect < 1e-10
    assert rep.support_ok
    assert 0.99 <= rep.sup_theta <= 1.0 + 1e-12


def test_verify_pou_detects_tampered_margin(dz):
    rep = verify_pou(dz, sample_count=200, squares_per_generation=10, margin=0.5)
    assert not rep.support_ok
    assert not rep.passed


def test_kernel_matches_reference(dz):
    from sobex.kernels import eval_extension, tree_arrays
    from sobex.pou import _neighbor_csr

    rng = np.random.default_rng(11)
    pts = rng.uniform(-4, 4, size=(200, 2))
    n = dz.n_leaves
    rng2 = np.random.default_rng(5)
    a0 = rng2.normal(size=n)
    a1 = rng2.normal(size=n)
    eta = rng2.normal(size=n)
    indptr, indices = _neighbor_csr(dz)
    val, gx, gy, hxx, hxy, hyy = eval_extension(
        pts[:, 0].copy(), pts[:, 1].copy(), *tree_arrays(dz), indptr, indices,
        dz.corner_x, dz.corner_y, dz.side, a0, a1, eta, 0.0, 0.0, 0.0, 0.05)
    for k in range(len(pts)):
        ev = pou_eval(dz, pts[k])
        ref = sum(ev.values[m] * (a0[j] + a1[j] * pts[k, 0] + eta[j] * pts[k, 1])
                  for m, j in enumerate(ev.ids))
        assert val[k] == pytest.approx(ref, rel=1e-12, abs=1e-12)
        ref_gx = sum(
            ev.grads[m][0] * (a0[j] + a1[j] * pts[k, 0] + eta[j] * pts[k, 1])
            + ev.values[m] * a1[j]
            for m, j in enumerate(ev.ids))
        assert gx[k] == pytest.approx(ref_gx, rel=1e-10, abs=1e-10)
        ref_hxx = sum(
            ev.hessians[m][0, 0] * (a0[j] + a1[j] * pts[k, 0] + eta[j] * pts[k, 1])
            + 2 * ev.grads[m][0] * a1[j]
            for m, j in enumerate(ev.ids))
        assert hxx[k] == pytest.approx(ref_hxx, rel=1e-8, abs=1e-8)
