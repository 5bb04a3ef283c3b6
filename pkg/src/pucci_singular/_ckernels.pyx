# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, pow, isfinite, INFINITY

cnp.import_array()

cdef double[7] C_B = [35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192,
                      -2187.0 / 6784, 11.0 / 84, 0.0]
cdef double[7] C_E = [71.0 / 57600, 0.0, -71.0 / 16695, 71.0 / 1920,
                      -17253.0 / 339200, 22.0 / 525, -1.0 / 40]
cdef double[7][6] C_A = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40, 9.0 / 40, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45, -56.0 / 15, 32.0 / 9, 0.0, 0.0, 0.0],
    [19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0.0, 0.0],
    [9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0.0],
    [35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84],
]


cdef inline double _rhs(double x, double xp, double a1, double a0,
                        double inv_lam, double p) nogil:
    return a1 * xp + x * (inv_lam * pow(fabs(x), p - 1) - a0)


def dopri5_ef(double t0, double x0, double xp0, double t_end, double a1,
              double a0, double inv_lam, double p, double rtol, double atol,
              double h0, double x_max, double x_min, long max_steps):
    cdef double direction = 1.0 if t_end >= t0 else -1.0
    cdef double span = fabs(t_end - t0)
    cdef double h = min(fabs(h0), span) if h0 > 0 else min(1e-2, span)
    cdef double t = t0, x = x0, xp = xp0
    cdef double hs, xi, vi, x_new, v_new, ex, ev, sx, sv, err, fac, remaining
    cdef double kx[7]
    cdef double kv[7]
    cdef int i, j, status = 0
    cdef long steps = 0, nfev = 0, count = 1, cap = 1024
    ts = np.empty(cap)
    xs = np.empty(cap)
    vs = np.empty(cap)
    cdef double[::1] tv = ts, xv = xs, vv = vs
    tv[0] = t0
    xv[0] = x0
    vv[0] = xp0
    while direction * (t_end - t) > 0:
        if steps >= max_steps:
            status = 3
            break
        remaining = fabs(t_end - t)
        if h > remaining:
            h = remaining
        if h < 1e-14 * max(1.0, fabs(t)):
            status = 3
            break
        hs = direction * h
        for i in range(7):
            xi = x
            vi = xp
            for j in range(i):
                xi += hs * C_A[i][j] * kx[j]
                vi += hs * C_A[i][j] * kv[j]
            kx[i] = vi
            kv[i] = _rhs(xi, vi, a1, a0, inv_lam, p)
        nfev += 7
        x_new = x
        v_new = xp
        ex = 0.0
        ev = 0.0
        for i in range(7):
            x_new += hs * C_B[i] * kx[i]
            v_new += hs * C_B[i] * kv[i]
            ex += hs * C_E[i] * kx[i]
            ev += hs * C_E[i] * kv[i]
        if not (isfinite(x_new) and isfinite(v_new)):
            err = INFINITY
        else:
            sx = atol + rtol * max(fabs(x), fabs(x_new))
            sv = atol + rtol * max(fabs(xp), fabs(v_new))
            err = sqrt(0.5 * ((ex / sx) * (ex / sx) + (ev / sv) * (ev / sv)))
        steps += 1
        if err <= 1.0:
            t = t + hs
            x = x_new
            xp = v_new
            if count == cap:
                cap *= 2
                ts = np.resize(ts, cap)
                xs = np.resize(xs, cap)
                vs = np.resize(vs, cap)
                tv = ts
                xv = xs
                vv = vs
            tv[count] = t
            xv[count] = x
            vv[count] = xp
            count += 1
            if err == 0:
                fac = 5.0
            else:
                fac = min(5.0, max(0.2, 0.9 * pow(err, -0.2)))
            h *= fac
            if x > x_max:
                status = 1
                break
            if x < x_min:
                status = 2
                break
        else:
            if isfinite(err):
                fac = max(0.2, 0.9 * pow(err, -0.2))
            else:
                fac = 0.2
            h *= fac
    return ts[:count].copy(), xs[:count].copy(), vs[:count].copy(), status, nfev


def tridiag_solve(double[::1] lower, double[::1] diag, double[::1] upper,
                  double[::1] rhs):
    cdef Py_ssize_t n = diag.shape[0], i
    cdef double[::1] cp = np.empty(n)
    out = np.empty(n)
    cdef double[::1] x = out
    cdef double m
    cp[0] = upper[0] / diag[0]
    x[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - lower[i] * cp[i - 1]
        cp[i] = upper[i] / m if i < n - 1 else 0.0
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / m
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]
    return out


def scheme_system(double[::1] v, double h, double lam, double Lam, int N,
                  double p, double[::1] r2f, double[::1] r2):
    cdef Py_ssize_t n = v.shape[0], i
    G_ = np.zeros(n)
    lo_ = np.zeros(n)
    di_ = np.zeros(n)
    up_ = np.zeros(n)
    cdef double[::1] G = G_, lo = lo_, di = di_, up = up_
    cdef double ih2 = 1.0 / (h * h), i2h = 0.5 / h
    cdef double d1, d2, dz, a1, a2, av, cm, cc, cpl, mplus
    cdef double min_off = INFINITY
    for i in range(1, n - 1):
        d1 = (v[i + 1] - v[i - 1]) * i2h
        d2 = (v[i + 1] - 2 * v[i] + v[i - 1]) * ih2 - d1
        dz = 1e-14 * max(fabs(d1), fabs(d2))
        if d2 < -dz:
            a2 = lam
        else:
            a2 = Lam
        if d1 < -dz:
            a1 = (N - 1) * lam
        else:
            a1 = (N - 1) * Lam
        mplus = 0.0
        if fabs(d2) > dz:
            mplus += a2 * d2
        if fabs(d1) > dz:
            mplus += a1 * d1
        av = fabs(v[i])
        G[i] = -mplus + r2[i] * pow(av, p - 1) * v[i] - r2f[i]
        cm = a2 * (ih2 + i2h) - a1 * i2h
        cc = -2 * a2 * ih2
        cpl = a2 * (ih2 - i2h) + a1 * i2h
        lo[i] = -cm
        di[i] = -cc + r2[i] * p * pow(av, p - 1)
        up[i] = -cpl
        if cm < min_off:
            min_off = cm
        if cpl < min_off:
            min_off = cpl
    if n <= 2:
        min_off = 0.0
    return G_, lo_, di_, up_, min_off
