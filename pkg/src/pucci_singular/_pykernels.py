"""Pure Python implementations of the hot kernels.

These define the reference behaviour; ``_ckernels.pyx`` mirrors them line for
line. Both expose the same three functions.
"""
import math

import numpy as np
from scipy.linalg import solve_banded

# termination codes shared with the compiled kernels
SPAN_REACHED = 0
BLOW_UP = 1
UNDERFLOW = 2
STEP_FAILURE = 3

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
# fifth minus embedded fourth order weights
_E = (
    71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
)


def _rhs(x, xp, a1, a0, inv_lam, p):
    # grouped so that x = (a0 / inv_lam)^(1/(p-1)) is an exact fixed point
    try:
        return a1 * xp + x * (inv_lam * abs(x) ** (p - 1) - a0)
    except OverflowError:
        # float pow raises where C returns inf; the step is then rejected
        return math.copysign(math.inf, x)


def dopri5_ef(t0, x0, xp0, t_end, a1, a0, inv_lam, p, rtol, atol,
              h0, x_max, x_min, max_steps):
    """Integrate ``x'' = a1 x' - a0 x + inv_lam |x|^(p-1) x`` from ``t0`` to ``t_end``.

    Returns ``(t, x, xp, status, nfev)`` with every accepted step recorded.
    """
    direction = 1.0 if t_end >= t0 else -1.0
    span = abs(t_end - t0)
    h = min(abs(h0), span) if h0 > 0 else min(1e-2, span)
    ts, xs, xps = [t0], [x0], [xp0]
    t, x, xp = t0, x0, xp0
    status = SPAN_REACHED
    nfev = 0
    kx = [0.0] * 7
    kv = [0.0] * 7
    steps = 0
    while direction * (t_end - t) > 0:
        if steps >= max_steps:
            status = STEP_FAILURE
            break
        remaining = abs(t_end - t)
        if h > remaining:
            h = remaining
        if h < 1e-14 * max(1.0, abs(t)):
            status = STEP_FAILURE
            break
        hs = direction * h
        for i in range(7):
            xi, vi = x, xp
            row = _A[i]
            for j in range(len(row)):
                xi += hs * row[j] * kx[j]
                vi += hs * row[j] * kv[j]
            kx[i] = vi
            kv[i] = _rhs(xi, vi, a1, a0, inv_lam, p)
        nfev += 7
        x_new, v_new = x, xp
        ex, ev = 0.0, 0.0
        for i in range(7):
            x_new += hs * _B[i] * kx[i]
            v_new += hs * _B[i] * kv[i]
            ex += hs * _E[i] * kx[i]
            ev += hs * _E[i] * kv[i]
        if not (math.isfinite(x_new) and math.isfinite(v_new)):
            err = math.inf
        else:
            sx = atol + rtol * max(abs(x), abs(x_new))
            sv = atol + rtol * max(abs(xp), abs(v_new))
            qx, qv = ex / sx, ev / sv
            # products overflow to inf where ** would raise
            err = math.sqrt(0.5 * (qx * qx + qv * qv))
        steps += 1
        if err <= 1.0:
            t = t + hs
            x, xp = x_new, v_new
            ts.append(t)
            xs.append(x)
            xps.append(xp)
            fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h *= fac
            if x > x_max:
                status = BLOW_UP
                break
            if x < x_min:
                status = UNDERFLOW
                break
        else:
            fac = 0.2 if not math.isfinite(err) else max(0.2, 0.9 * err ** -0.2)
            h *= fac
    return np.array(ts), np.array(xs), np.array(xps), status, nfev


def tridiag_solve(lower, diag, upper, rhs):
    """Solve a tridiagonal system; ``lower[0]`` and ``upper[-1]`` are ignored."""
    n = diag.size
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return solve_banded((1, 1), ab, rhs)


def scheme_system(v, h, lam, Lam, N, p, r2f, r2):
    """Scaled residual and tridiagonal Jacobian of ``-M+(D^2 v) + |v|^(p-1) v - f``.

    Rows are multiplied by ``r^2`` so that, with ``s = log r`` and step ``h``,
    ``r^2 v'' = v_ss - v_s`` and ``r v' = v_s``. Only interior nodes
    ``1..n-2`` are filled; ``r2f = r^2 f`` and ``r2 = r^2`` per node.

    Returns ``(G, lower, diag, upper, min_offdiag)``; ``min_offdiag`` is the
    smallest off-diagonal coefficient of the linear operator selected at each
    row (must be >= 0 for a monotone scheme).
    """
    n = v.size
    G = np.zeros(n)
    lo = np.zeros(n)
    di = np.zeros(n)
    up = np.zeros(n)
    vm, vc, vp = v[:-2], v[1:-1], v[2:]
    ih2 = 1.0 / (h * h)
    i2h = 0.5 / h
    d1 = (vp - vm) * i2h
    d2 = (vp - 2 * vc + vm) * ih2 - d1
    scale = np.maximum(np.abs(d1), np.abs(d2))
    dz = 1e-14 * scale
    a2 = np.where(d2 > dz, Lam, np.where(d2 < -dz, lam, Lam))
    a1 = (N - 1) * np.where(d1 > dz, Lam, np.where(d1 < -dz, lam, Lam))
    d2c = np.where(np.abs(d2) <= dz, 0.0, d2)
    d1c = np.where(np.abs(d1) <= dz, 0.0, d1)
    m_plus = a2 * d2c + a1 * d1c
    av = np.abs(vc)
    nonlin = av ** (p - 1) * vc
    G[1:-1] = -m_plus + r2[1:-1] * nonlin - r2f[1:-1]
    # coefficients of v_{i-1}, v_i, v_{i+1} in m_plus
    cm = a2 * (ih2 + i2h) - a1 * i2h
    cc = -2 * a2 * ih2
    cp = a2 * (ih2 - i2h) + a1 * i2h
    lo[1:-1] = -cm
    di[1:-1] = -cc + r2[1:-1] * p * av ** (p - 1)
    up[1:-1] = -cp
    min_off = float(min(cm.min(), cp.min())) if n > 2 else 0.0
    return G, lo, di, up, min_off
