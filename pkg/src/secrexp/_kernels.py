"""Compiled inner loops.

Everything here works in nats on plain float arrays; the public modules
convert to bits and wrap results in dataclasses.

Modes returned by :func:`crd_solve`:

* ``MODE_ZERO``   level reachable with V a function of Y; value 0
* ``MODE_CORNER`` level at the smallest attainable distortion; each x is
  restricted to its distortion-minimizing reconstructions
* ``MODE_SLOPE``  interior point found by root-finding on the slope
* ``MODE_SHARE``  the level falls on a straight segment of the curve; the
  channel is a mixture of the two bracketing slope solutions
"""

import math

import numpy as np
from numba import njit

MODE_ZERO = 0
MODE_CORNER = 1
MODE_SLOPE = 2
MODE_SHARE = 3

D_TOL = 1e-7
WIDTH_TOL = 1e-10
BETA_CEIL = 1e7


@njit(cache=True)
def ba_slice(p, cost, q, W, tol, maxit):
    """Alternating minimization of I(X;V) + E[cost] for one source ``p``.

    ``cost`` may hold ``inf`` (forbidden pairs). ``q`` is the starting output
    law and is overwritten with the final one; ``W`` receives the channel.
    Returns ``(iterations, converged)``.
    """
    nx, nv = cost.shape
    logw = np.empty(nv)
    qn = np.empty(nv)
    prev = np.inf
    for it in range(1, maxit + 1):
        for x in range(nx):
            m = -np.inf
            for v in range(nv):
                if q[v] > 0.0 and cost[x, v] < np.inf:
                    logw[v] = math.log(q[v]) - cost[x, v]
                    if logw[v] > m:
                        m = logw[v]
                else:
                    logw[v] = -np.inf
            s = 0.0
            if m == -np.inf:
                # every allowed output has died out; fall back to the allowed set
                for v in range(nv):
                    W[x, v] = 1.0 if cost[x, v] < np.inf else 0.0
                    s += W[x, v]
            else:
                for v in range(nv):
                    W[x, v] = math.exp(logw[v] - m) if logw[v] > -np.inf else 0.0
                    s += W[x, v]
            for v in range(nv):
                W[x, v] /= s
        for v in range(nv):
            acc = 0.0
            for x in range(nx):
                acc += p[x] * W[x, v]
            qn[v] = acc
        val = 0.0
        for x in range(nx):
            if p[x] <= 0.0:
                continue
            for v in range(nv):
                w = W[x, v]
                # p[x] * w can underflow to a zero marginal for denormal w
                if w > 0.0 and qn[v] > 0.0:
                    val += p[x] * w * (math.log(w / qn[v]) + cost[x, v])
        for v in range(nv):
            q[v] = qn[v]
        if abs(val - prev) <= tol * max(1.0, abs(val)):
            return it, True
        prev = val
    return maxit, False


@njit(cache=True)
def slice_stats(pxy, d, W):
    """Return ``(E d, I(X;V|Y))`` in nats for a channel ``W[y, x, v]``."""
    nx, ny = pxy.shape
    nv = d.shape[1]
    dist = 0.0
    info = 0.0
    wy = np.empty(nv)
    for y in range(ny):
        py = 0.0
        for x in range(nx):
            py += pxy[x, y]
        if py <= 0.0:
            continue
        for v in range(nv):
            acc = 0.0
            for x in range(nx):
                acc += pxy[x, y] * W[y, x, v]
            wy[v] = acc / py
        for x in range(nx):
            if pxy[x, y] <= 0.0:
                continue
            for v in range(nv):
                w = W[y, x, v]
                if w > 0.0:
                    dist += pxy[x, y] * w * d[x, v]
                    if wy[v] > 0.0:
                        info += pxy[x, y] * w * math.log(w / wy[v])
    return dist, max(info, 0.0)


@njit(cache=True)
def _solve_at(pxy, d, beta, mask_mode, Q, W, tol, maxit):
    nx, ny = pxy.shape
    nv = d.shape[1]
    cost = np.empty((nx, nv))
    rowmin = np.empty(nx)
    for x in range(nx):
        m = np.inf
        for v in range(nv):
            if d[x, v] < m:
                m = d[x, v]
        rowmin[x] = m
    for x in range(nx):
        for v in range(nv):
            if mask_mode:
                cost[x, v] = 0.0 if d[x, v] <= rowmin[x] else np.inf
            else:
                cost[x, v] = beta * d[x, v]
    p = np.empty(nx)
    iters = 0
    conv = True
    for y in range(ny):
        py = 0.0
        for x in range(nx):
            py += pxy[x, y]
        if py <= 0.0:
            for x in range(nx):
                for v in range(nv):
                    W[y, x, v] = 1.0 / nv
            continue
        for x in range(nx):
            p[x] = pxy[x, y] / py
        it, ok = ba_slice(p, cost, Q[y], W[y], tol, maxit)
        iters += it
        conv = conv and ok
    dist, info = slice_stats(pxy, d, W)
    return dist, info, iters, conv


@njit(cache=True)
def _warm(Q):
    ny, nv = Q.shape
    out = np.empty_like(Q)
    for y in range(ny):
        for v in range(nv):
            out[y, v] = 0.999 * Q[y, v] + 0.001 / nv
    return out


@njit(cache=True)
def _zero_rate(pxy, d, W):
    nx, ny = pxy.shape
    nv = d.shape[1]
    total = 0.0
    for y in range(ny):
        best = np.inf
        arg = 0
        for v in range(nv):
            acc = 0.0
            for x in range(nx):
                acc += pxy[x, y] * d[x, v]
            if acc < best:
                best = acc
                arg = v
        total += best
        for x in range(nx):
            for v in range(nv):
                W[y, x, v] = 1.0 if v == arg else 0.0
    return total


@njit(cache=True)
def crd_solve(pxy, d, level, tol, maxit, beta_max):
    """Conditional rate-distortion min I(X;V|Y) s.t. E d(X,V) <= level.

    Returns ``(info_nats, W, beta, achieved, iterations, converged, mode)``.
    ``beta`` is the Lagrange slope in nats per unit distortion (``inf`` at the
    corner).
    """
    nx, ny = pxy.shape
    nv = d.shape[1]
    W0 = np.empty((ny, nx, nv))
    d_zero = _zero_rate(pxy, d, W0)
    if level >= d_zero - 1e-14:
        return 0.0, W0, 0.0, d_zero, 0, True, MODE_ZERO

    d_corner = 0.0
    for x in range(nx):
        m = np.inf
        for v in range(nv):
            if d[x, v] < m:
                m = d[x, v]
        for y in range(ny):
            d_corner += pxy[x, y] * m

    Q = np.full((ny, nv), 1.0 / nv)
    Wc = np.empty((ny, nx, nv))
    if level <= d_corner + 1e-13:
        dist, info, it, ok = _solve_at(pxy, d, 0.0, True, Q, Wc, tol, maxit)
        return info, Wc, np.inf, dist, it, ok, MODE_CORNER

    total_it = 0
    all_ok = True
    W_lo = W0.copy()
    d_lo = d_zero
    i_lo = 0.0
    b_lo = 0.0
    W_hi = np.empty((ny, nx, nv))
    b_hi = beta_max
    d_hi, i_hi, it, ok = _solve_at(pxy, d, b_hi, False, Q, W_hi, tol, maxit)
    total_it += it
    all_ok = all_ok and ok
    while d_hi > level + D_TOL and b_hi < BETA_CEIL:
        W_lo[:] = W_hi
        d_lo, i_lo, b_lo = d_hi, i_hi, b_hi
        b_hi *= 4.0
        Q = _warm(Q)
        d_hi, i_hi, it, ok = _solve_at(pxy, d, b_hi, False, Q, W_hi, tol, maxit)
        total_it += it
        all_ok = all_ok and ok
    if d_hi > level + D_TOL:
        Q = np.full((ny, nv), 1.0 / nv)
        dist, info, it, ok = _solve_at(pxy, d, 0.0, True, Q, Wc, tol, maxit)
        return info, Wc, np.inf, dist, total_it + it, all_ok and ok, MODE_CORNER
    if abs(d_hi - level) <= D_TOL:
        return i_hi, W_hi, b_hi, d_hi, total_it, all_ok, MODE_SLOPE

    # false position on f(beta) = D(beta) - level with the Illinois fix,
    # f(lo) > 0 >= f(hi); every third step is a plain bisection
    f_lo = d_lo - level
    f_hi = d_hi - level
    side = 0
    W_mid = np.empty((ny, nx, nv))
    for k in range(400):
        width = b_hi - b_lo
        if width <= WIDTH_TOL:
            break
        if k % 3 == 2:
            b = 0.5 * (b_lo + b_hi)
        else:
            b = (b_lo * f_hi - b_hi * f_lo) / (f_hi - f_lo)
            if not (b_lo + 1e-3 * width < b < b_hi - 1e-3 * width):
                b = 0.5 * (b_lo + b_hi)
        Q = _warm(Q)
        dm, im, it, ok = _solve_at(pxy, d, b, False, Q, W_mid, tol, maxit)
        total_it += it
        all_ok = all_ok and ok
        fm = dm - level
        if abs(fm) <= D_TOL:
            return im, W_mid, b, dm, total_it, all_ok, MODE_SLOPE
        if fm > 0.0:
            b_lo, d_lo, i_lo, f_lo = b, dm, im, fm
            W_lo[:] = W_mid
            if side == -1:
                f_hi *= 0.5
            side = -1
        else:
            b_hi, d_hi, i_hi, f_hi = b, dm, im, fm
            W_hi[:] = W_mid
            if side == 1:
                f_lo *= 0.5
            side = 1
    # straight segment between the two bracketing solutions
    t = (d_lo - level) / (d_lo - d_hi)
    Wm = t * W_hi + (1.0 - t) * W_lo
    dist, info = slice_stats(pxy, d, Wm)
    return info, Wm, b_hi, dist, total_it, all_ok, MODE_SHARE


@njit(cache=True)
def crd_gradient(pxy, d, W, beta, mode):
    """d R / d P(x, y) in nats, by the envelope theorem.

    For an occupied slice y the derivative is ``-ln sum_v q_y(v) exp(-beta d(x,v))``
    (restricted to minimizing reconstructions at the corner). Empty slices get
    ``beta * min_v d(x, v)``.
    """
    nx, ny = pxy.shape
    nv = d.shape[1]
    g = np.zeros((nx, ny))
    if mode == MODE_ZERO:
        return g
    corner = mode == MODE_CORNER
    rowmin = np.empty(nx)
    for x in range(nx):
        m = np.inf
        for v in range(nv):
            if d[x, v] < m:
                m = d[x, v]
        rowmin[x] = m
    qy = np.empty(nv)
    for y in range(ny):
        py = 0.0
        for x in range(nx):
            py += pxy[x, y]
        if py <= 0.0:
            for x in range(nx):
                g[x, y] = 0.0 if corner else beta * rowmin[x]
            continue
        for v in range(nv):
            acc = 0.0
            for x in range(nx):
                acc += pxy[x, y] * W[y, x, v]
            qy[v] = acc / py
        for x in range(nx):
            z = 0.0
            for v in range(nv):
                if qy[v] <= 0.0:
                    continue
                if corner:
                    if d[x, v] <= rowmin[x]:
                        z += qy[v]
                else:
                    z += qy[v] * math.exp(-beta * (d[x, v] - rowmin[x]))
            if z <= 0.0:
                z = 1e-300
            g[x, y] = -math.log(z) + (0.0 if corner else beta * rowmin[x])
    return g


@njit(cache=True)
def project_simplex(v):
    n = v.shape[0]
    u = np.sort(v)[::-1]
    css = 0.0
    theta = 0.0
    for i in range(n):
        css += u[i]
        t = (css - 1.0) / (i + 1)
        if u[i] - t > 0.0:
            theta = t
    out = np.empty(n)
    for i in range(n):
        out[i] = max(v[i] - theta, 0.0)
    s = out.sum()
    for i in range(n):
        out[i] /= s
    return out


@njit(cache=True)
def _rows_project(Z, A, mu):
    nx, ny = Z.shape
    out = np.empty((nx, ny))
    for x in range(nx):
        out[x] = project_simplex(Z[x] - mu * A[x])
    return out


@njit(cache=True)
def project_feasible(Z, A, level):
    """Euclidean projection onto {rows on the simplex, sum(A * C) <= level}."""
    C = _rows_project(Z, A, 0.0)
    if np.sum(A * C) <= level:
        return C
    lo = 0.0
    hi = 1.0
    C = _rows_project(Z, A, hi)
    while np.sum(A * C) > level and hi < 1e12:
        lo = hi
        hi *= 2.0
        C = _rows_project(Z, A, hi)
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        Cm = _rows_project(Z, A, mid)
        if np.sum(A * Cm) > level:
            lo = mid
        else:
            hi = mid
            C = Cm
        if hi - lo <= 1e-14 * max(1.0, hi):
            break
    return C


@njit(cache=True)
def mi_nats(px, C):
    nx, ny = C.shape
    qy = np.zeros(ny)
    for x in range(nx):
        for y in range(ny):
            qy[y] += px[x] * C[x, y]
    val = 0.0
    for x in range(nx):
        for y in range(ny):
            c = C[x, y]
            if c > 0.0 and px[x] > 0.0 and qy[y] > 0.0:
                val += px[x] * c * math.log(c / qy[y])
    return max(val, 0.0)


@njit(cache=True)
def rate_clip(px, C_ok, C_new, cap):
    """Largest step from ``C_ok`` toward ``C_new`` keeping I(X;Y) <= cap."""
    if mi_nats(px, C_new) <= cap:
        return C_new
    lo = 0.0
    hi = 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if mi_nats(px, C_ok + mid * (C_new - C_ok)) <= cap:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-9:
            break
    return C_ok + lo * (C_new - C_ok)


@njit(cache=True)
def blur_objective(px, C, de, de_level, tol, maxit, beta_max):
    nx, ny = C.shape
    pxy = np.empty((nx, ny))
    for x in range(nx):
        for y in range(ny):
            pxy[x, y] = px[x] * C[x, y]
    info, W, beta, ach, it, ok, mode = crd_solve(pxy, de, de_level, tol, maxit, beta_max)
    return info, W, beta, mode, pxy


@njit(cache=True)
def blur_ascent(px, C0, dmat, d_level, de, de_level, rate_cap, eta0, max_steps,
                rtol, tol, maxit, beta_max):
    """Projected gradient ascent of C -> R(px * C, de_level).

    Feasible set: rows of C on the simplex, E d(X,Y) <= d_level and, when
    ``rate_cap`` is finite, I(X;Y) <= rate_cap (nats). ``C0`` must be
    feasible. Steps that do not improve are retried with half the step size.
    Returns ``(C, value_nats, accepted_steps, evaluations)``.
    """
    nx, ny = C0.shape
    A = np.empty((nx, ny))
    for x in range(nx):
        for y in range(ny):
            A[x, y] = px[x] * dmat[x, y]
    C = C0.copy()
    f, W, beta, mode, pxy = blur_objective(px, C, de, de_level, tol, maxit, beta_max)
    evals = 1
    eta = eta0
    accepted = 0
    small = 0
    for step in range(max_steps):
        g = crd_gradient(pxy, de, W, beta, mode)
        G = np.empty((nx, ny))
        for x in range(nx):
            for y in range(ny):
                G[x, y] = px[x] * g[x, y]
        moved = False
        while eta >= 1e-9:
            Cn = project_feasible(C + eta * G, A, d_level)
            if rate_cap < np.inf:
                Cn = rate_clip(px, C, Cn, rate_cap)
            if np.max(np.abs(Cn - C)) <= 1e-13:
                break
            fn, Wn, bn, mn, pn = blur_objective(px, Cn, de, de_level, tol, maxit, beta_max)
            evals += 1
            if fn > f + 1e-13:
                gain = fn - f
                C, f, W, beta, mode, pxy = Cn, fn, Wn, bn, mn, pn
                accepted += 1
                moved = True
                eta = min(eta * 2.0, 64.0)
                if gain <= rtol * max(abs(f), 1e-3):
                    small += 1
                else:
                    small = 0
                break
            eta *= 0.5
        if not moved or small >= 3:
            break
    return C, f, accepted, evals
