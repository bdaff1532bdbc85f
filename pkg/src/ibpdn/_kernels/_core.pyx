# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Douglas-Rachford inner loop; mirrors ``_pure`` function for function."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, INFINITY

cnp.import_array()

DEF MAX_SECULAR_ITERS = 200
DEF SECULAR_RTOL = 1e-13


cdef double _secular_root(const double[::1] a, const double[::1] sigma, double target) noexcept nogil:
    cdef Py_ssize_t r = a.shape[0], i
    cdef double norm_a = 0.0, smin2 = INFINITY, s2, d, f, g, phi, dphi, new, lam = 0.0
    cdef double lo = 0.0, hi, inv_t = 1.0 / target
    cdef int it
    for i in range(r):
        norm_a += a[i] * a[i]
        s2 = sigma[i] * sigma[i]
        if s2 < smin2:
            smin2 = s2
    norm_a = sqrt(norm_a)
    hi = (norm_a / target - 1.0) / smin2
    for it in range(MAX_SECULAR_ITERS):
        f = 0.0
        g = 0.0
        for i in range(r):
            s2 = sigma[i] * sigma[i]
            d = 1.0 + lam * s2
            f += a[i] * a[i] / (d * d)
            g += a[i] * a[i] * s2 / (d * d * d)
        phi = 1.0 / sqrt(f) - inv_t
        if phi < 0:
            lo = lam
        else:
            hi = lam
        dphi = g / (f * sqrt(f))
        new = lam - phi / dphi
        if not (lo <= new <= hi):
            new = 0.5 * (lo + hi)
        if fabs(new - lam) <= SECULAR_RTOL * new or hi - lo <= SECULAR_RTOL * hi:
            return new
        lam = new
    return lam


cdef double _tube_coefficients(const double[::1] c, const double[::1] sigma, const double[::1] b,
                               double rho, double eps, double eps_target,
                               double[::1] a, double[::1] w, bint* ok) noexcept nogil:
    """Fill ``w``; returns the multiplier (0 when ``c`` is already feasible)."""
    cdef Py_ssize_t r = c.shape[0], i
    cdef double res2 = rho * rho, t2, lam
    for i in range(r):
        a[i] = sigma[i] * c[i] - b[i]
        res2 += a[i] * a[i]
    ok[0] = True
    if res2 <= eps * eps:
        for i in range(r):
            w[i] = c[i]
        return 0.0
    t2 = eps_target * eps_target - rho * rho
    if t2 <= 0.0:
        ok[0] = rho <= eps
        for i in range(r):
            w[i] = b[i] / sigma[i]
        return INFINITY
    lam = _secular_root(a, sigma, sqrt(t2))
    for i in range(r):
        w[i] = (b[i] + a[i] / (1.0 + lam * sigma[i] * sigma[i])) / sigma[i]
    return lam


cdef double _project(const double[::1] u, const double[:, ::1] v, const double[::1] sigma,
                     const double[::1] b, double rho, double eps, double eps_target,
                     double[::1] c, double[::1] a, double[::1] w, double[::1] out,
                     bint* ok) noexcept nogil:
    cdef Py_ssize_t n = v.shape[0], r = v.shape[1], i, j
    cdef double acc, lam
    for j in range(r):
        c[j] = 0.0
    for i in range(n):
        for j in range(r):
            c[j] += v[i, j] * u[i]
    lam = _tube_coefficients(c, sigma, b, rho, eps, eps_target, a, w, ok)
    if lam == 0.0:
        for i in range(n):
            out[i] = u[i]
        return lam
    for j in range(r):
        w[j] -= c[j]
    for i in range(n):
        acc = u[i]
        for j in range(r):
            acc += v[i, j] * w[j]
        out[i] = acc
    return lam


def soft_threshold(z, free, double gamma):
    cdef double[::1] zz = np.ascontiguousarray(z, dtype=np.float64)
    cdef cnp.uint8_t[::1] ff = np.ascontiguousarray(free, dtype=np.uint8)
    out_arr = np.empty(zz.shape[0])
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double mag
    for i in range(zz.shape[0]):
        if ff[i]:
            mag = fabs(zz[i]) - gamma
            if mag <= 0.0:
                out[i] = 0.0
            elif zz[i] > 0:
                out[i] = mag
            else:
                out[i] = -mag
        else:
            out[i] = zz[i]
    return out_arr


def secular_root(a, sigma, double target):
    return _secular_root(np.ascontiguousarray(a, dtype=np.float64),
                         np.ascontiguousarray(sigma, dtype=np.float64), target)


def tube_coefficients(c, sigma, b, double rho, double eps, double eps_target):
    cdef double[::1] cc = np.ascontiguousarray(c, dtype=np.float64)
    cdef Py_ssize_t r = cc.shape[0]
    a = np.empty(r)
    w = np.empty(r)
    cdef bint ok
    lam = _tube_coefficients(cc, np.ascontiguousarray(sigma, dtype=np.float64),
                             np.ascontiguousarray(b, dtype=np.float64),
                             rho, eps, eps_target, a, w, &ok)
    return w, lam, bool(ok)


def project(u, v, sigma, b, double rho, double eps, double eps_target):
    cdef double[:, ::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t n = vv.shape[0], r = vv.shape[1]
    out = np.empty(n)
    cdef bint ok
    lam = _project(np.ascontiguousarray(u, dtype=np.float64), vv,
                   np.ascontiguousarray(sigma, dtype=np.float64),
                   np.ascontiguousarray(b, dtype=np.float64), rho, eps, eps_target,
                   np.empty(r), np.empty(r), np.empty(r), out, &ok)
    return out, lam, bool(ok)


def dr_loop(u0, v, sigma, b, double rho, double eps, double eps_target, free,
            double gamma, double alpha, long max_iters, double tol):
    cdef double[:, ::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef const double[::1] ss = np.ascontiguousarray(sigma, dtype=np.float64)
    cdef const double[::1] bb = np.ascontiguousarray(b, dtype=np.float64)
    cdef cnp.uint8_t[::1] ff = np.ascontiguousarray(free, dtype=np.uint8)
    cdef Py_ssize_t n = vv.shape[0], r = vv.shape[1], i
    u_arr = np.array(u0, dtype=np.float64, copy=True, order="C")
    cdef double[::1] u = u_arr
    cdef double[::1] p = np.empty(n)
    cdef double[::1] c = np.empty(r)
    cdef double[::1] a = np.empty(r)
    cdef double[::1] w = np.empty(r)
    cdef double half = 0.5 * alpha, ri, si, mag, st, snorm, unorm, change = INFINITY
    cdef long it
    cdef bint ok
    with nogil:
        for it in range(1, max_iters + 1):
            _project(u, vv, ss, bb, rho, eps, eps_target, c, a, w, p, &ok)
            snorm = 0.0
            unorm = 0.0
            for i in range(n):
                ri = 2.0 * p[i] - u[i]
                if ff[i]:
                    mag = fabs(ri) - gamma
                    if mag <= 0.0:
                        si = 0.0
                    elif ri > 0:
                        si = mag
                    else:
                        si = -mag
                else:
                    si = ri
                st = half * (2.0 * si - ri - u[i])
                snorm += st * st
                unorm += u[i] * u[i]
                p[i] = st
            unorm = sqrt(unorm)
            change = sqrt(snorm) / (unorm if unorm > 1.0 else 1.0)
            for i in range(n):
                u[i] += p[i]
            if change < tol:
                break
    if change < tol:
        return u_arr, it, change, True
    return u_arr, max_iters, change, False
