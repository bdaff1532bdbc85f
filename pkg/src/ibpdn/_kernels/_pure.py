"""Reference numpy implementation of the solver's inner kernels.

The compiled module ``_core`` mirrors these functions one for one; this
file is what runs when the extension is not built.

Tube geometry works in the right singular basis of ``Phi = U S V^T``:
with ``c = V^T u``, ``b = U^T y`` and ``rho = ||y - U b||``, the squared
residual of ``u`` is ``||S c - b||^2 + rho^2`` and the projection changes
only ``c``.
"""

import math

import numpy as np

MAX_SECULAR_ITERS = 200
SECULAR_RTOL = 1e-13


def soft_threshold(z, free, gamma):
    """Shrink ``z`` by ``gamma`` where ``free`` is set, copy it elsewhere."""
    z = np.asarray(z, dtype=float)
    out = z.copy()
    zf = z[free]
    out[free] = np.sign(zf) * np.maximum(np.abs(zf) - gamma, 0.0)
    return out


def secular_root(a, sigma, target):
    """Smallest ``lam >= 0`` with ``sum(a**2 / (1 + lam*sigma**2)**2) == target**2``.

    Requires ``0 < target < ||a||``. Newton on ``1/sqrt(f) - 1/target``,
    which is increasing and concave in ``lam`` so Newton from the left never
    overshoots; bisection guards the bracket anyway.
    """
    s2 = sigma * sigma
    a2 = a * a
    norm_a = math.sqrt(float(np.sum(a2)))
    lo = 0.0
    hi = (norm_a / target - 1.0) / float(np.min(s2))
    lam = 0.0
    inv_t = 1.0 / target
    for _ in range(MAX_SECULAR_ITERS):
        d = 1.0 + lam * s2
        f = float(np.sum(a2 / (d * d)))
        phi = 1.0 / math.sqrt(f) - inv_t
        if phi < 0:
            lo = lam
        else:
            hi = lam
        dphi = float(np.sum(a2 * s2 / (d * d * d))) / (f * math.sqrt(f))
        step = phi / dphi
        new = lam - step
        if not lo <= new <= hi:
            new = 0.5 * (lo + hi)
        if abs(new - lam) <= SECULAR_RTOL * new or hi - lo <= SECULAR_RTOL * hi:
            return new
        lam = new
    return lam


def tube_coefficients(c, sigma, b, rho, eps, eps_target):
    """Project the ``V``-coefficients ``c`` onto the tube.

    Returns ``(w, lam, ok)``: new coefficients, the Lagrange multiplier
    (``inf`` for the affine case) and whether the tube is nonempty.
    """
    a = sigma * c - b
    res2 = float(a @ a) + rho * rho
    if res2 <= eps * eps:
        return c, 0.0, True
    t2 = eps_target * eps_target - rho * rho
    if t2 <= 0.0:
        # tube thinner than the out-of-range residual: affine projection
        return b / sigma, math.inf, rho <= eps
    lam = secular_root(a, sigma, math.sqrt(t2))
    return (b + a / (1.0 + lam * sigma * sigma)) / sigma, lam, True


def project(u, v, sigma, b, rho, eps, eps_target):
    c = v.T @ u
    w, lam, ok = tube_coefficients(c, sigma, b, rho, eps, eps_target)
    if lam == 0.0:
        return u.copy(), lam, ok
    return u + v @ (w - c), lam, ok


def dr_loop(u, v, sigma, b, rho, eps, eps_target, free, gamma, alpha, max_iters, tol):
    """Relaxed Douglas-Rachford on ``||u_free||_1 + indicator(tube)``.

    Returns ``(u, iterations, last_change, converged)``; the caller maps
    the fixed point through the tube projection to get the solution.
    """
    u = np.array(u, dtype=float)
    free = np.asarray(free, dtype=bool)
    half = 0.5 * alpha
    change = math.inf
    for it in range(1, max_iters + 1):
        p = project(u, v, sigma, b, rho, eps, eps_target)[0]
        r = 2.0 * p - u
        s = soft_threshold(r, free, gamma)
        step = half * (2.0 * s - r - u)
        change = math.sqrt(float(step @ step)) / max(math.sqrt(float(u @ u)), 1.0)
        u += step
        if change < tol:
            return u, it, change, True
    return u, max_iters, change, False
