"""Hot numeric kernels.

Every kernel here is written as plain loop code and compiled with numba's
``@njit`` when available.  Setting the environment variable
``SOBEX_DISABLE_NUMBA=1`` (or uninstalling numba) selects the pure-Python /
numpy fallback path: the same loop functions run uncompiled, and the grid
energy additionally has a vectorized numpy twin that the dispatcher prefers
when compilation is off.  ``benchmarks/bench_kernels.py`` times the two
paths against each other.
"""

from __future__ import annotations

import math
import os

import numpy as np

_flag = os.environ.get("SOBEX_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _flag not in ("", "0", "false", "no")

try:
    if NUMBA_DISABLED:
        raise ImportError("numba disabled by SOBEX_DISABLE_NUMBA")
    from numba import njit

    USING_NUMBA = True
except ImportError:
    USING_NUMBA = False

    def njit(*args, **kwargs):  # identity decorator fallback
        if args and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(func):
            return func

        return wrap


def py_func(kernel):
    """The uncompiled version of a (possibly jitted) kernel."""
    return getattr(kernel, "py_func", kernel)


# ----------------------------------------------------------------------
# quadtree walks
# ----------------------------------------------------------------------

def tree_arrays(dz):
    """Flat numpy arrays of the quadtree of a decomposition, cached on it."""
    cached = getattr(dz, "_tree_arrays", None)
    if cached is not None:
        return cached
    n = len(dz.node_ax)
    child = np.full((n, 4), -1, dtype=np.int64)
    ax = np.empty(n)
    ay = np.empty(n)
    sd = np.empty(n)
    leaf = np.asarray(dz.node_leaf, dtype=np.int64)
    for i in range(n):
        ax[i] = float(dz.node_ax[i])
        ay[i] = float(dz.node_ay[i])
        sd[i] = 8.0 / 2 ** dz.node_gen[i]
        ch = dz.node_child[i]
        if ch is not None:
            child[i] = ch
    arrays = (child, ax, ay, sd, leaf)
    dz._tree_arrays = arrays
    return arrays


@njit(cache=True)
def locate_points(xs, ys, child, ax, ay, sd, leaf):
    """Leaf id of the half-open square holding each point; -1 if outside."""
    n = xs.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        x = xs[i]
        y = ys[i]
        if not (-4.0 <= x < 4.0 and -4.0 <= y < 4.0):
            out[i] = -1
            continue
        node = 0
        while child[node, 0] >= 0:
            h = sd[node] * 0.5
            q = 0
            if x >= ax[node] + h:
                q += 1
            if y >= ay[node] + h:
                q += 2
            node = child[node, q]
        out[i] = leaf[node]
    return out


@njit(cache=True)
def cover_counts(xs, ys, child, ax, ay, sd, leaf):
    """Number of leaves whose closed 1.1-dilation contains each point."""
    n = xs.shape[0]
    out = np.zeros(n, dtype=np.int64)
    stack = np.empty(512, dtype=np.int64)
    for i in range(n):
        x = xs[i]
        y = ys[i]
        cnt = 0
        top = 0
        stack[top] = 0
        top += 1
        while top > 0:
            top -= 1
            node = stack[top]
            m = 0.05 * sd[node]
            if (x < ax[node] - m or x > ax[node] + sd[node] + m
                    or y < ay[node] - m or y > ay[node] + sd[node] + m):
                continue
            if child[node, 0] < 0:
                cnt += 1
            else:
                for q in range(4):
                    stack[top] = child[node, q]
                    top += 1
        out[i] = cnt
    return out


# ----------------------------------------------------------------------
# the C2 edge profile and tensor bumps
# ----------------------------------------------------------------------

@njit(cache=True)
def _smooth5(t):
    """Quintic step and two derivatives on [0, 1]."""
    s = t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    d1 = 30.0 * t * t * (1.0 - t) * (1.0 - t)
    d2 = 60.0 * t * (2.0 * t - 1.0) * (t - 1.0)
    return s, d1, d2


@njit(cache=True)
def _bump1d(x, a, s, margin):
    """Plateau profile: 1 on [a, a+s], 0 outside (a-b, a+s+b), b = margin*s."""
    b = margin * s
    lo = a - b
    hi = a + s + b
    if x <= lo or x >= hi:
        return 0.0, 0.0, 0.0
    if x < a:
        t = (x - lo) / b
        v, d1, d2 = _smooth5(t)
        return v, d1 / b, d2 / (b * b)
    if x <= a + s:
        return 1.0, 0.0, 0.0
    t = (hi - x) / b
    v, d1, d2 = _smooth5(t)
    return v, -d1 / b, d2 / (b * b)


@njit(cache=True)
def _blend_at(x, y, nbr, lf_ax, lf_ay, lf_sd, a0, a1, eta, margin):
    """Value/gradient/Hessian of the blended interpolant at one point.

    ``nbr`` is the candidate square list (must cover every square whose
    dilation holds (x, y)).  Uses N/D quotient derivatives of
    N = sum(phi_j P_j), D = sum(phi_j).
    """
    D = 0.0
    Dx = 0.0
    Dy = 0.0
    Dxx = 0.0
    Dxy = 0.0
    Dyy = 0.0
    N = 0.0
    Nx = 0.0
    Ny = 0.0
    Nxx = 0.0
    Nxy = 0.0
    Nyy = 0.0
    for idx in range(nbr.shape[0]):
        j = nbr[idx]
        u, dux, ddux = _bump1d(x, lf_ax[j], lf_sd[j], margin)
        if u == 0.0:
            continue
        v, dvy, ddvy = _bump1d(y, lf_ay[j], lf_sd[j], margin)
        if v == 0.0:
            continue
        ph = u * v
        phx = dux * v
        phy = u * dvy
        phxx = ddux * v
        phxy = dux * dvy
        phyy = u * ddvy
        P = a0[j] + a1[j] * x + eta[j] * y
        Px = a1[j]
        Py = eta[j]
        D += ph
        Dx += phx
        Dy += phy
        Dxx += phxx
        Dxy += phxy
        Dyy += phyy
        N += ph * P
        Nx += phx * P + ph * Px
        Ny += phy * P + ph * Py
        Nxx += phxx * P + 2.0 * phx * Px
        Nxy += phxy * P + phx * Py + phy * Px
        Nyy += phyy * P + 2.0 * phy * Py
    iD = 1.0 / D
    F = N * iD
    Fx = (Nx - F * Dx) * iD
    Fy = (Ny - F * Dy) * iD
    Fxx = (Nxx - 2.0 * Fx * Dx - F * Dxx) * iD
    Fxy = (Nxy - Fx * Dy - Fy * Dx - F * Dxy) * iD
    Fyy = (Nyy - 2.0 * Fy * Dy - F * Dyy) * iD
    return F, Fx, Fy, Fxx, Fxy, Fyy


@njit(cache=True)
def eval_extension(xs, ys, child, ax, ay, sd, leaf,
                   indptr, indices, lf_ax, lf_ay, lf_sd,
                   a0, a1, eta, tail0, tail1, tail_eta, margin):
    """Batch evaluation of the extension: value, gradient, Hessian triple.

    Outside the base square the affine tail applies.  Returns arrays
    (val, gx, gy, hxx, hxy, hyy).
    """
    n = xs.shape[0]
    val = np.empty(n)
    gx = np.empty(n)
    gy = np.empty(n)
    hxx = np.empty(n)
    hxy = np.empty(n)
    hyy = np.empty(n)
    for i in range(n):
        x = xs[i]
        y = ys[i]
        if not (-4.0 <= x < 4.0 and -4.0 <= y < 4.0):
            val[i] = tail0 + tail1 * x + tail_eta * y
            gx[i] = tail1
            gy[i] = tail_eta
            hxx[i] = 0.0
            hxy[i] = 0.0
            hyy[i] = 0.0
            continue
        node = 0
        while child[node, 0] >= 0:
            h = sd[node] * 0.5
            q = 0
            if x >= ax[node] + h:
                q += 1
            if y >= ay[node] + h:
                q += 2
            node = child[node, q]
        own = leaf[node]
        nbr = indices[indptr[own]:indptr[own + 1]]
        F, Fx, Fy, Fxx, Fxy, Fyy = _blend_at(
            x, y, nbr, lf_ax, lf_ay, lf_sd, a0, a1, eta, margin)
        val[i] = F
        gx[i] = Fx
        gy[i] = Fy
        hxx[i] = Fxx
        hxy[i] = Fxy
        hyy[i] = Fyy
    return val, gx, gy, hxx, hxy, hyy


@njit(cache=True)
def seminorm_cells(indptr, indices, lf_ax, lf_ay, lf_sd,
                   a0, a1, eta, margin, subcells, gl_x, gl_w, p):
    """Per-square integral of |second derivative|^p by tensor Gauss rules.

    Each square splits into subcells x subcells cells; cells whose closed
    box meets no other square's dilation are skipped exactly (the blend is
    a single affine piece there).
    """
    n = lf_ax.shape[0]
    q = gl_x.shape[0]
    out = np.zeros(n)
    for i in range(n):
        s = lf_sd[i]
        sub = s / subcells
        nbr = indices[indptr[i]:indptr[i + 1]]
        acc = 0.0
        for si in range(subcells):
            cx0 = lf_ax[i] + si * sub
            cx1 = cx0 + sub
            for sj in range(subcells):
                cy0 = lf_ay[i] + sj * sub
                cy1 = cy0 + sub
                active = False
                for t in range(nbr.shape[0]):
                    jn = nbr[t]
                    if jn == i:
                        continue
                    m = margin * lf_sd[jn]
                    if (cx0 <= lf_ax[jn] + lf_sd[jn] + m and lf_ax[jn] - m <= cx1
                            and cy0 <= lf_ay[jn] + lf_sd[jn] + m
                            and lf_ay[jn] - m <= cy1):
                        active = True
                        break
                if not active:
                    continue
                cell = 0.0
                for a in range(q):
                    x = cx0 + gl_x[a] * sub
                    for b in range(q):
                        y = cy0 + gl_x[b] * sub
                        F, Fx, Fy, Fxx, Fxy, Fyy = _blend_at(
                            x, y, nbr, lf_ax, lf_ay, lf_sd, a0, a1, eta, margin)
                        h2 = Fxx * Fxx + 2.0 * Fxy * Fxy + Fyy * Fyy
                        cell += gl_w[a] * gl_w[b] * h2 ** (p * 0.5)
                acc += cell * sub * sub
        out[i] = acc
    return out


@njit(cache=True)
def pou_sample(leaf_ids, rel, child, ax, ay, sd, leaf,
               indptr, indices, lf_ax, lf_ay, lf_sd, margin):
    """Sample bump statistics over the dilation of chosen squares.

    For each listed square, samples the relative grid ``rel x rel`` over
    its own dilation and records: sup of the normalized bump and its
    scaled derivatives, the bump range, and the worst partition defect.
    Returns (max_t, max_g, max_h, min_t, max_defect) arrays.
    """
    ns = leaf_ids.shape[0]
    nr = rel.shape[0]
    max_t = np.zeros(ns)
    max_g = np.zeros(ns)
    max_h = np.zeros(ns)
    min_t = np.zeros(ns)
    max_d = np.zeros(ns)
    for k in range(ns):
        i = leaf_ids[k]
        s = lf_sd[i]
        worst_t = 0.0
        worst_g = 0.0
        worst_h = 0.0
        worst_d = 0.0
        best_t = 1.0e300
        for ri in range(nr):
            x = lf_ax[i] + rel[ri] * s
            if not (-4.0 <= x < 4.0):
                continue
            for rj in range(nr):
                y = lf_ay[i] + rel[rj] * s
                if not (-4.0 <= y < 4.0):
                    continue
                node = 0
                while child[node, 0] >= 0:
                    h = sd[node] * 0.5
                    qd = 0
                    if x >= ax[node] + h:
                        qd += 1
                    if y >= ay[node] + h:
                        qd += 2
                    node = child[node, qd]
                own = leaf[node]
                nbr = indices[indptr[own]:indptr[own + 1]]
                D = 0.0
                Dx = 0.0
                Dy = 0.0
                Dxx = 0.0
                Dxy = 0.0
                Dyy = 0.0
                ph = 0.0
                phx = 0.0
                phy = 0.0
                phxx = 0.0
                phxy = 0.0
                phyy = 0.0
                for t in range(nbr.shape[0]):
                    jn = nbr[t]
                    u, dux, ddux = _bump1d(x, lf_ax[jn], lf_sd[jn], margin)
                    if u == 0.0:
                        continue
                    v, dvy, ddvy = _bump1d(y, lf_ay[jn], lf_sd[jn], margin)
                    if v == 0.0:
                        continue
                    D += u * v
                    Dx += dux * v
                    Dy += u * dvy
                    Dxx += ddux * v
                    Dxy += dux * dvy
                    Dyy += u * ddvy
                    if jn == i:
                        ph = u * v
                        phx = dux * v
                        phy = u * dvy
                        phxx = ddux * v
                        phxy = dux * dvy
                        phyy = u * ddvy
                iD = 1.0 / D
                th = ph * iD
                thx = (phx - th * Dx) * iD
                thy = (phy - th * Dy) * iD
                thxx = (phxx - 2.0 * thx * Dx - th * Dxx) * iD
                thxy = (phxy - thx * Dy - thy * Dx - th * Dxy) * iD
                thyy = (phyy - 2.0 * thy * Dy - th * Dyy) * iD
                gn = math.sqrt(thx * thx + thy * thy) * s
                hn = math.sqrt(thxx * thxx + 2.0 * thxy * thxy
                               + thyy * thyy) * s * s
                defect = abs(D * iD - 1.0)  # exercises the normalized sum
                # honest defect: re-sum the normalized contributions
                tsum = 0.0
                for t in range(nbr.shape[0]):
                    jn = nbr[t]
                    u, dux, ddux = _bump1d(x, lf_ax[jn], lf_sd[jn], margin)
                    if u == 0.0:
                        continue
                    v, dvy, ddvy = _bump1d(y, lf_ay[jn], lf_sd[jn], margin)
                    if v == 0.0:
                        continue
                    tsum += (u * v) * iD
                defect = abs(tsum - 1.0)
                if th > worst_t:
                    worst_t = th
                if th < best_t:
                    best_t = th
                if gn > worst_g:
                    worst_g = gn
                if hn > worst_h:
                    worst_h = hn
                if defect > worst_d:
                    worst_d = defect
        max_t[k] = worst_t
        max_g[k] = worst_g
        max_h[k] = worst_h
        min_t[k] = best_t
        max_d[k] = worst_d
    return max_t, max_g, max_h, min_t, max_d


# ----------------------------------------------------------------------
# discrete grid energy (second differences, one-sided at the border)
# ----------------------------------------------------------------------

@njit(cache=True)
def grid_energy(g, h, p, mu, grad):
    """Objective sum((D11^2+2 D12^2+D22^2 + mu^2)^(p/2) - mu^p) h^2 and gradient.

    ``grad`` must be a zeroed (n, n) array; it accumulates the gradient.
    """
    n = g.shape[0]
    ih2 = 1.0 / (h * h)
    mu2 = mu * mu
    mup = mu ** p
    obj = 0.0
    for i in range(n):
        if i == 0:
            im, ic, ip = 0, 1, 2
        elif i == n - 1:
            im, ic, ip = n - 3, n - 2, n - 1
        else:
            im, ic, ip = i - 1, i, i + 1
        for j in range(n):
            if j == 0:
                jm, jc, jp = 0, 1, 2
            elif j == n - 1:
                jm, jc, jp = n - 3, n - 2, n - 1
            else:
                jm, jc, jp = j - 1, j, j + 1
            d11 = (g[im, j] - 2.0 * g[ic, j] + g[ip, j]) * ih2
            d22 = (g[i, jm] - 2.0 * g[i, jc] + g[i, jp]) * ih2
            d12 = (g[ip, jp] - g[ip, jm] - g[im, jp] + g[im, jm]) * (0.25 * ih2)
            a = d11 * d11 + 2.0 * d12 * d12 + d22 * d22
            t = a + mu2
            obj += (t ** (p * 0.5) - mup) * h * h
            if t <= 0.0:
                continue
            w = (h * h) * (p * 0.5) * t ** (p * 0.5 - 1.0)
            if w == 0.0:
                continue
            c11 = w * 2.0 * d11 * ih2
            grad[im, j] += c11
            grad[ic, j] -= 2.0 * c11
            grad[ip, j] += c11
            c22 = w * 2.0 * d22 * ih2
            grad[i, jm] += c22
            grad[i, jc] -= 2.0 * c22
            grad[i, jp] += c22
            c12 = w * d12 * ih2
            grad[ip, jp] += c12
            grad[ip, jm] -= c12
            grad[im, jp] -= c12
            grad[im, jm] += c12
    return obj


def _triples(n):
    im = np.arange(-1, n - 1)
    ic = np.arange(n)
    ip = np.arange(1, n + 1)
    im[0], ic[0], ip[0] = 0, 1, 2
    im[-1], ic[-1], ip[-1] = n - 3, n - 2, n - 1
    return im, ic, ip


def grid_energy_numpy(g, h, p, mu, grad):
    """Vectorized twin of :func:`grid_energy`; same stencils, same result."""
    n = g.shape[0]
    ih2 = 1.0 / (h * h)
    im, ic, ip = _triples(n)
    cols = np.arange(n)
    d11 = (g[im, :] - 2.0 * g[ic, :] + g[ip, :]) * ih2
    d22 = (g[:, im] - 2.0 * g[:, ic] + g[:, ip]) * ih2
    d12 = (g[np.ix_(ip, ip)] - g[np.ix_(ip, im)]
           - g[np.ix_(im, ip)] + g[np.ix_(im, im)]) * (0.25 * ih2)
    a = d11 * d11 + 2.0 * d12 * d12 + d22 * d22
    t = a + mu * mu
    obj = float(np.sum((t ** (p * 0.5) - mu ** p))) * h * h
    w = np.where(t > 0.0, (h * h) * (p * 0.5) * t ** (p * 0.5 - 1.0), 0.0)
    c11 = w * 2.0 * d11 * ih2
    np.add.at(grad, (im[:, None], cols[None, :]), c11)
    np.add.at(grad, (ic[:, None], cols[None, :]), -2.0 * c11)
    np.add.at(grad, (ip[:, None], cols[None, :]), c11)
    c22 = w * 2.0 * d22 * ih2
    np.add.at(grad, (cols[:, None], im[None, :]), c22)
    np.add.at(grad, (cols[:, None], ic[None, :]), -2.0 * c22)
    np.add.at(grad, (cols[:, None], ip[None, :]), c22)
    c12 = w * d12 * ih2
    np.add.at(grad, (ip[:, None], ip[None, :]), c12)
    np.add.at(grad, (ip[:, None], im[None, :]), -c12)
    np.add.at(grad, (im[:, None], ip[None, :]), -c12)
    np.add.at(grad, (im[:, None], im[None, :]), c12)
    return obj


def grid_energy_dispatch(g, h, p, mu, grad):
    """Jitted loops when numba is on, vectorized numpy otherwise."""
    if USING_NUMBA:
        return grid_energy(g, h, p, mu, grad)
    return grid_energy_numpy(g, h, p, mu, grad)


# ----------------------------------------------------------------------
# weighted l^p tree minimization (coordinate descent)
# ----------------------------------------------------------------------

@njit(cache=True)
def _sgnpow(d, q):
    if d > 0.0:
        return d ** q
    if d < 0.0:
        return -((-d) ** q)
    return 0.0


@njit(cache=True)
def tree_kkt(values, depth, weights, p):
    """Max absolute stationarity residual over internal nodes."""
    m = values.shape[0]
    n_internal = (m - 1) // 2
    worst = 0.0
    for v in range(n_internal):
        gsum = 0.0
        if v > 0:
            gsum += weights[depth[v]] * p * _sgnpow(values[v] - values[(v - 1) // 2],
                                                    p - 1.0)
        wch = weights[depth[v] + 1] * p
        gsum += wch * _sgnpow(values[v] - values[2 * v + 1], p - 1.0)
        gsum += wch * _sgnpow(values[v] - values[2 * v + 2], p - 1.0)
        if abs(gsum) > worst:
            worst = abs(gsum)
    return worst


@njit(cache=True)
def _node_solve(avals, wvals, m, p, gtol):
    """Minimize sum_i w_i |t - a_i|^p over t; monotone-gradient root find.

    Stops when the gradient passes ``gtol`` or the bisection bracket
    collapses to a few ulps, whichever comes first; the bracket width is
    the value-space accuracy certificate.
    """
    # insertion sort of the (tiny) candidate list
    for i in range(1, m):
        va = avals[i]
        vw = wvals[i]
        j = i - 1
        while j >= 0 and avals[j] > va:
            avals[j + 1] = avals[j]
            wvals[j + 1] = wvals[j]
            j -= 1
        avals[j + 1] = va
        wvals[j + 1] = vw
    if avals[0] == avals[m - 1]:
        return avals[0]

    q = p - 1.0

    def _g(t):
        s = 0.0
        for i in range(m):
            s += wvals[i] * p * _sgnpow(t - avals[i], q)
        return s

    # bracket between consecutive candidates (g is monotone increasing)
    lo = avals[0]
    hi = avals[m - 1]
    glo = _g(lo)
    if glo >= 0.0:
        return lo
    for i in range(1, m):
        gi = _g(avals[i])
        if gi == 0.0:
            return avals[i]
        if gi > 0.0:
            hi = avals[i]
            break
        lo = avals[i]
        glo = gi

    t = 0.5 * (lo + hi)
    for _ in range(200):
        gt = _g(t)
        if abs(gt) <= gtol:
            return t
        if gt > 0.0:
            hi = t
        else:
            lo = t
        if hi - lo <= 4e-16 * (abs(lo) + abs(hi)) + 1e-300:
            break
        # Newton step, safeguarded by the bracket
        dg = 0.0
        for i in range(m):
            d = abs(t - avals[i])
            if d > 1e-300:
                dg += wvals[i] * p * q * d ** (q - 1.0)
        tn = t - gt / dg if dg > 0.0 else 0.5 * (lo + hi)
        if not (lo < tn < hi):
            tn = 0.5 * (lo + hi)
        t = tn
    return 0.5 * (lo + hi)


@njit(cache=True)
def _gather(values, depth, weights, v, avals, wvals):
    cnt = 0
    if v > 0:
        avals[cnt] = values[(v - 1) // 2]
        wvals[cnt] = weights[depth[v]]
        cnt += 1
    wch = weights[depth[v] + 1]
    avals[cnt] = values[2 * v + 1]
    wvals[cnt] = wch
    cnt += 1
    avals[cnt] = values[2 * v + 2]
    wvals[cnt] = wch
    cnt += 1
    return cnt


@njit(cache=True)
def _uf_find(root, x):
    while root[x] != x:
        root[x] = root[root[x]]
        x = root[x]
    return x


@njit(cache=True)
def _tie_group_step(values, depth, weights, p, tau):
    """Block move: snap chains of nearly tied interior nodes to a common value.

    Near-tied pairs create a flat valley that single-coordinate sweeps
    traverse extremely slowly when p is close to 1; moving the whole chain
    to the minimizer of its boundary-edge objective jumps along the valley.
    A move is kept only when it does not increase the objective.
    Returns the largest accepted displacement.
    """
    m = values.shape[0]
    n_internal = (m - 1) // 2
    root = np.arange(n_internal)
    tied = False
    for v in range(1, n_internal):
        u = (v - 1) // 2
        if abs(values[v] - values[u]) <= tau:
            ru = _uf_find(root, u)
            rv = _uf_find(root, v)
            if ru != rv:
                root[rv] = ru
            tied = True
    if not tied:
        return 0.0
    moved = 0.0
    cand_a = np.empty(m)
    cand_w = np.empty(m)
    members = np.empty(n_internal, dtype=np.int64)
    for r in range(n_internal):
        if _uf_find(root, r) != r:
            continue
        nmem = 0
        for v in range(n_internal):
            if _uf_find(root, v) == r:
                members[nmem] = v
                nmem += 1
        if nmem < 2:
            continue
        cnt = 0
        for k in range(nmem):
            v = members[k]
            if v > 0 and _uf_find(root, (v - 1) // 2) != r:
                cand_a[cnt] = values[(v - 1) // 2]
                cand_w[cnt] = weights[depth[v]]
                cnt += 1
            for ch in range(2 * v + 1, 2 * v + 3):
                if ch >= n_internal or _uf_find(root, ch) != r:
                    cand_a[cnt] = values[ch]
                    cand_w[cnt] = weights[depth[ch]]
                    cnt += 1
        t = _node_solve(cand_a, cand_w, cnt, p, 0.0)
        # objective change: boundary edges move to t, interior edges to zero
        delta = 0.0
        for k in range(nmem):
            v = members[k]
            if v > 0:
                u = (v - 1) // 2
                w_e = weights[depth[v]]
                before = abs(values[v] - values[u]) ** p
                after = 0.0 if _uf_find(root, u) == r else abs(t - values[u]) ** p
                delta += w_e * (after - before)
            for ch in range(2 * v + 1, 2 * v + 3):
                if ch < n_internal and _uf_find(root, ch) == r:
                    continue
                w_e = weights[depth[ch]]
                delta += w_e * (abs(t - values[ch]) ** p
                                - abs(values[v] - values[ch]) ** p)
        if delta <= 0.0:
            for k in range(nmem):
                v = members[k]
                d = abs(values[v] - t)
                if d > moved:
                    moved = d
                values[v] = t
    return moved


@njit(cache=True)
def tree_descent(values, depth, weights, p, tol_formula, tol_value, max_sweeps):
    """Gauss-Seidel sweeps over internal nodes of the heap.

    Converges when either the stationarity formula residual passes
    ``tol_formula`` or a verification pass certifies every interior value
    within ``tol_value`` of its exact 1D minimizer (the attainable
    certificate when the minimizer hugs a tie, where the p-1 power makes
    the gradient non-Lipschitz).  Near-tied chains are moved as blocks.
    Returns (formula_residual, value_residual, sweeps).
    """
    m = values.shape[0]
    n_internal = (m - 1) // 2
    avals = np.empty(3)
    wvals = np.empty(3)
    gtol = tol_formula * 0.05
    tau = 10.0 * tol_value
    block = 6
    sweeps = 0
    done = False
    prev_delta = np.zeros(n_internal)
    stash = np.zeros(n_internal)
    snapshot = values[:n_internal].copy()
    have_prev = False
    while sweeps < max_sweeps and not done:
        max_move = 0.0
        for _ in range(block):
            sweeps += 1
            for direction in range(2):
                if direction == 0:
                    start, stop, step = n_internal - 1, -1, -1
                else:
                    start, stop, step = 0, n_internal, 1
                v = start
                while v != stop:
                    cnt = _gather(values, depth, weights, v, avals, wvals)
                    old = values[v]
                    values[v] = _node_solve(avals, wvals, cnt, p, gtol)
                    move = abs(values[v] - old)
                    if move > max_move:
                        max_move = move
                    v += step
            if sweeps >= max_sweeps:
                break
        gm = _tie_group_step(values, depth, weights, p, tau)
        if gm > max_move:
            max_move = gm

        # Aitken extrapolation along the slow mode, kept only if the
        # objective does not increase
        accepted = False
        if have_prev:
            obj_now = tree_objective(values, depth, weights, p)
            extra = False
            for v in range(n_internal):
                d1 = prev_delta[v]
                d2 = values[v] - snapshot[v]
                stash[v] = values[v]
                if d1 != 0.0 and d1 * d2 > 0.0 and abs(d2) < abs(d1):
                    rho = d2 / d1
                    if rho > 0.999999:
                        rho = 0.999999
                    values[v] = values[v] + d2 * rho / (1.0 - rho)
                    extra = True
            if extra:
                obj_ext = tree_objective(values, depth, weights, p)
                if obj_ext > obj_now:
                    for v in range(n_internal):
                        values[v] = stash[v]
                else:
                    accepted = True
        for v in range(n_internal):
            prev_delta[v] = values[v] - snapshot[v]
            snapshot[v] = values[v]
        # deltas polluted by an accepted jump would skew the next estimate
        have_prev = not accepted

        if tree_kkt(values, depth, weights, p) <= tol_formula:
            done = True
        elif max_move <= 2.0 * tol_value or sweeps >= max_sweeps:
            value_res = 0.0
            for v in range(n_internal):
                cnt = _gather(values, depth, weights, v, avals, wvals)
                t = _node_solve(avals, wvals, cnt, p, 0.0)
                d = abs(values[v] - t)
                if d > value_res:
                    value_res = d
            if value_res <= 0.5 * tol_value:
                done = True
    # verification pass: worst distance to the exact coordinate minimizer
    value_res = 0.0
    for v in range(n_internal):
        cnt = _gather(values, depth, weights, v, avals, wvals)
        t = _node_solve(avals, wvals, cnt, p, 0.0)
        d = abs(values[v] - t)
        if d > value_res:
            value_res = d
    return tree_kkt(values, depth, weights, p), value_res, sweeps


@njit(cache=True)
def tree_objective(values, depth, weights, p):
    """Weighted sum of |parent - child|^p over all edges."""
    m = values.shape[0]
    total = 0.0
    for v in range(1, m):
        d = values[(v - 1) // 2] - values[v]
        total += weights[depth[v]] * abs(d) ** p
    return total
