"""Douglas-Rachford solver for l1 minimization outside a known support.

Solves::

    minimize ||u_{T^c}||_1   subject to   ||y - Phi u||_2 <= epsilon

by splitting the objective into the weighted l1 term (prox: soft
thresholding on ``T^c``) and the indicator of the tube
``C = {v : ||y - Phi v|| <= epsilon}`` (prox: orthogonal projection).
With an empty ``T`` this is plain BPDN; :func:`solve_bp_equality` covers
the ``epsilon = 0`` affine case used by cancel-then-recover.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from . import _kernels
from .numerics import DEFAULT_RANK_TOLERANCE, SvdFactorization, as_matrix, least_squares, svd
from .sensing import SensingOperator
from .signals import SupportSet, as_signal

__all__ = [
    "InfeasibleProblemError",
    "SolverConfig",
    "RecoveryResult",
    "OptimalityCertificate",
    "prox_l1_outside",
    "project_tube",
    "solve_ibpdn",
    "solve_bpdn",
    "solve_bp_equality",
    "check_optimality",
]

# relative noise bound below which the tube is treated as the affine constraint:
# a double-precision x fixes the residual direction only to ~1e-16 ||y|| / epsilon
EPSILON_FLOOR = 1e-10


class InfeasibleProblemError(ValueError):
    """The tube ``||y - Phi v|| <= epsilon`` is empty, or a point lies outside it."""


@dataclass(frozen=True)
class SolverConfig:
    """Douglas-Rachford parameters.

    ``polish`` enables the finishing step applied after DR stops (see
    :func:`_polish` and :func:`_homotopy`). ``gamma=None`` selects the scale-aware default: the median of
    ``|pinv(Phi) y|`` over the free (unknown-support) coordinates, floored
    at ``1e-6``.
    """

    gamma: Optional[float] = None
    alpha: float = 1.0
    max_iters: int = 20000
    tolerance: float = 1e-9
    rank_tolerance: float = DEFAULT_RANK_TOLERANCE
    polish: bool = True

    def __post_init__(self):
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not 0 < self.alpha < 2:
            raise ValueError("alpha must lie in (0, 2)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.rank_tolerance < 0:
            raise ValueError("rank_tolerance must be nonnegative")


@dataclass
class RecoveryResult:
    x_star: np.ndarray
    iterations: int
    converged: bool
    final_residual: float
    objective: float
    iterate_change: float
    gamma: float = math.nan
    epsilon: float = 0.0
    polished: bool = False

    def to_dict(self) -> dict:
        return {
            "x_star": [float(v) for v in self.x_star],
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "final_residual": float(self.final_residual),
            "objective": float(self.objective),
            "iterate_change": float(self.iterate_change),
            "gamma": float(self.gamma),
            "epsilon": float(self.epsilon),
            "polished": bool(self.polished),
        }


def _matrix(phi) -> np.ndarray:
    if isinstance(phi, SensingOperator):
        return phi.effective
    return as_matrix(phi)


def _free_mask(t_set: Optional[SupportSet], n: int) -> np.ndarray:
    if t_set is None:
        return np.ones(n, dtype=bool)
    if t_set.ambient_dim != n:
        raise ValueError(f"support lives in dimension {t_set.ambient_dim}, operator has {n} columns")
    return ~t_set.mask


def prox_l1_outside(z, t_set: SupportSet, gamma: float) -> np.ndarray:
    """Proximity operator of ``gamma * ||u_{T^c}||_1``: soft thresholding off ``T``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    z = as_signal(z)
    return _kernels.soft_threshold(z, _free_mask(t_set, z.size), float(gamma))


@dataclass(frozen=True)
class _Tube:
    """Precomputed geometry of ``{v : ||y - Phi v|| <= epsilon}``."""

    factor: SvdFactorization
    v: np.ndarray
    b: np.ndarray
    rho: float
    epsilon: float
    target: float
    feasible: bool

    @classmethod
    def build(cls, a: np.ndarray, y: np.ndarray, epsilon: float,
              factor: Optional[SvdFactorization] = None,
              rank_tolerance: float = DEFAULT_RANK_TOLERANCE) -> "_Tube":
        if epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if y.shape != (a.shape[0],):
            raise ValueError(f"y has shape {y.shape}, expected ({a.shape[0]},)")
        if factor is None:
            factor = svd(a, rank_tolerance)
        elif factor.shape != a.shape:
            raise ValueError("svd_cache does not match the operator shape")
        b = factor.u.T @ y
        rho = float(np.linalg.norm(y - factor.u @ b))
        ynorm = float(np.linalg.norm(y))
        # aim slightly inside the tube so rounding in y - Phi v cannot push it out
        guard = min(1e-4 * epsilon, 1e-13 * (1.0 + ynorm))
        feasible = rho <= epsilon + 1e-10 * max(1.0, ynorm)
        return cls(factor, np.ascontiguousarray(factor.vt.T), b, rho, float(epsilon),
                   float(epsilon - guard), feasible)

    def project(self, u: np.ndarray) -> tuple[np.ndarray, float]:
        if self.factor.rank == 0:
            return np.array(u, dtype=float), 0.0
        v, lam, _ = _kernels.project(u, self.v, self.factor.singular_values, self.b,
                                     self.rho, self.epsilon, self.target)
        return v, lam


def project_tube(u, phi, y, epsilon: float, svd_cache: Optional[SvdFactorization] = None,
                 *, full_output: bool = False):
    """Orthogonal projection of ``u`` onto ``{v : ||y - Phi v||_2 <= epsilon}``.

    Feasible points come back unchanged. For ``epsilon = 0`` this is the
    affine projection ``u + pinv(Phi)(y - Phi u)``; otherwise the Lagrange
    multiplier is found from the scalar secular equation in the SVD basis.

    With ``full_output=True`` returns ``(v, info)`` where ``info`` holds the
    ``multiplier`` (``inf`` for the affine case) and a ``feasible`` flag that
    is false when the tube is empty; ``v`` is then the minimum-residual point.
    """
    a = _matrix(phi)
    u = as_signal(u)
    y = as_signal(y)
    if u.size != a.shape[1]:
        raise ValueError(f"u has length {u.size}, operator has {a.shape[1]} columns")
    tube = _Tube.build(a, y, float(epsilon), svd_cache)
    v, lam = tube.project(u)
    if full_output:
        return v, {"multiplier": lam, "feasible": tube.feasible}
    return v


def _resolvable_epsilon(epsilon: float, y: np.ndarray) -> float:
    """``epsilon``, or 0 when it is below what a double-precision residual can resolve."""
    if epsilon < EPSILON_FLOOR * max(1.0, float(np.linalg.norm(y))):
        return 0.0
    return epsilon


def _default_gamma(u0: np.ndarray, free: np.ndarray) -> float:
    vals = np.abs(u0[free])
    if vals.size == 0:
        return 1.0
    return max(float(np.median(vals)), 1e-6)


def _refine(b_mat, f: SvdFactorization, y, x, rhs, steps: int = 2):
    """Iterative refinement of ``B^T (y - B x) = rhs`` with extended-precision residuals."""
    bl = b_mat.astype(np.longdouble)
    yl = y.astype(np.longdouble)
    for _ in range(steps):
        err = (bl.T @ (yl - bl @ x.astype(np.longdouble)) - rhs).astype(float)
        x = x + (f.vt.T / f.singular_values ** 2) @ (f.vt @ err)
    return x


def _polish(a: np.ndarray, y: np.ndarray, tube: _Tube, free: np.ndarray, x: np.ndarray,
            rank_tolerance: float, support_tol: float = 1e-6) -> Optional[np.ndarray]:
    """Refine an approximate solution by solving the optimality conditions exactly.

    Primal-dual active set seeded with the support of ``x``. For columns
    ``B`` (``T`` plus the active free entries) and subgradient ``c`` (0 on
    ``T``, signs elsewhere) the tube-constrained optimum over that support
    is ``x_ls - kappa * inv(B^T B) c`` with ``kappa`` chosen to put the
    residual on the boundary; its dual is ``nu = (y - B x) / kappa``.
    Entries whose sign flips are dropped, the worst dual violator off the
    support is added, until ``|Phi^T nu| <= 1`` holds. Returns ``None`` if
    that does not happen within ``2n`` steps or ``B`` loses column rank.
    For a zero-radius tube only the least-squares step on the seeded
    support is taken.
    """
    n = a.shape[1]
    thresh = support_tol * max(1.0, float(np.max(np.abs(x))))
    active = free & (np.abs(x) > thresh)
    sgn = np.where(active, np.sign(x), 0.0)
    for _ in range(2 * n):
        cols = np.flatnonzero(~free | active)
        if cols.size > a.shape[0]:
            return None
        if cols.size:
            b_mat = a[:, cols]
            f = svd(b_mat, rank_tolerance)
            if f.rank < cols.size:
                return None
            x_ls = f.pinv() @ y
            r_ls = y - f.u @ (f.u.T @ y)
        else:
            x_ls = np.zeros(0)
            r_ls = y.copy()
        out = np.zeros(n)
        if tube.target == 0:
            if not cols.size:
                return None
            out[cols] = _refine(b_mat, f, y, x_ls, np.zeros(cols.size))
            return out if np.all(np.sign(out[active]) == sgn[active]) else None
        t2 = tube.target ** 2 - float(r_ls @ r_ls)
        if t2 <= 0 or not active.any():
            # current support cannot reach the tube: grow along the residual
            g = a.T @ r_ls
        else:
            z = (f.vt.T / f.singular_values ** 2) @ (f.vt @ sgn[cols])
            q = b_mat @ z
            kappa = math.sqrt(t2) / float(np.linalg.norm(q))
            out[cols] = x_ls - kappa * z
            flipped = active & (np.sign(out) != sgn)
            if flipped.any():
                active &= ~flipped
                sgn[flipped] = 0.0
                continue
            g = a.T @ (q + r_ls / kappa)
        off = free & ~active
        if not off.any():
            return out if active.any() else None
        j = int(np.flatnonzero(off)[np.argmax(np.abs(g[off]))])
        if active.any() and t2 > 0 and abs(g[j]) <= 1.0 + 1e-9:
            out[cols] = _refine(b_mat, f, y, out[cols], kappa * sgn[cols])
            return out
        active[j] = True
        sgn[j] = np.sign(g[j])
    return None


def _homotopy(a: np.ndarray, y: np.ndarray, tube: _Tube, free: np.ndarray,
              rank_tolerance: float) -> Optional[np.ndarray]:
    """Exact solution by following the l1-penalized least-squares path.

    For penalty ``tau`` the path point on columns ``B`` (``T`` plus the
    active set) is ``x_ls - tau z`` with ``z = inv(B^T B) c``, and its
    residual norm grows with ``tau``. Starting from the largest correlation
    with the residual of the fit on ``T``, ``tau`` decreases through add
    and drop events until the residual reaches the tube radius. Used when
    the seeded active set cannot finish (supports that need column swaps).
    Returns ``None`` on rank loss or when the step budget runs out.
    """
    m, n = a.shape
    target2 = tube.target ** 2
    active: list[int] = []
    signs: dict[int, float] = {}
    known = np.flatnonzero(~free)
    free_idx = np.flatnonzero(free)
    tau = math.inf
    banned = -1
    for _ in range(10 * n + 10):
        cols = np.concatenate([known, np.array(active, dtype=int)])
        if cols.size > m:
            return None
        if cols.size:
            b_mat = a[:, cols]
            f = svd(b_mat, rank_tolerance)
            if f.rank < cols.size:
                return None
            x_ls = f.pinv() @ y
            r_ls = y - b_mat @ x_ls
            c = np.concatenate([np.zeros(known.size), [signs[j] for j in active]])
            z = (f.vt.T / f.singular_values ** 2) @ (f.vt @ c)
            q = b_mat @ z
        else:
            x_ls = z = np.zeros(0)
            r_ls = y.copy()
            q = np.zeros(m)
        base = a.T @ r_ls
        slope = a.T @ q
        off = np.setdiff1d(free_idx, active)
        if not active:
            j = int(off[np.argmax(np.abs(base[off]))])
            tau = float(abs(base[j]))
            active.append(j)
            signs[j] = float(np.sign(base[j]))
            continue
        # next event below the current tau
        next_tau, event, kind = 0.0, -1, ""
        for j in off:
            if j == banned:
                continue
            for s in (1.0, -1.0):
                den = s - slope[j]
                if den != 0.0:
                    t = base[j] / den
                    if next_tau < t < tau * (1 - 1e-12):
                        next_tau, event, kind = float(t), int(j), "add"
        for pos, j in enumerate(active):
            zi = z[known.size + pos]
            if zi != 0.0 and j != banned:
                t = x_ls[known.size + pos] / zi
                if next_tau < t < tau * (1 - 1e-12):
                    next_tau, event, kind = float(t), int(j), "drop"
        rls2 = float(r_ls @ r_ls)
        qq = float(q @ q)
        stop = math.sqrt(max(target2 - rls2, 0.0) / qq) if qq > 0 and target2 > rls2 else 0.0
        if stop >= next_tau:
            if target2 <= rls2 and tube.target > 0:
                return None
            out = np.zeros(n)
            out[cols] = _refine(b_mat, f, y, x_ls - stop * z, stop * c)
            return out
        tau = next_tau
        banned = event
        if kind == "add":
            active.append(event)
            signs[event] = float(np.sign(base[event] + tau * slope[event]))
        else:
            active.remove(event)
            del signs[event]
    return None


def _douglas_rachford(a: np.ndarray, y: np.ndarray, epsilon: float, free: np.ndarray,
                      config: SolverConfig) -> RecoveryResult:
    n = a.shape[1]
    tube = _Tube.build(a, y, _resolvable_epsilon(epsilon, y), rank_tolerance=config.rank_tolerance)
    if not tube.feasible:
        raise InfeasibleProblemError(
            f"no point satisfies ||y - Phi u|| <= {epsilon}: minimum residual is {tube.rho:.3e}")
    slack = 1e-9 * max(1.0, float(np.linalg.norm(y)))

    def residual(x):
        return float(np.linalg.norm(y - a @ x))

    def objective(x):
        return float(np.sum(np.abs(x[free])))

    # zero innovation already feasible: objective 0 is optimal
    known = ~free
    x0 = np.zeros(n)
    if known.any():
        x0[known] = least_squares(a[:, known], y, config.rank_tolerance)
    if residual(x0) <= max(epsilon, EPSILON_FLOOR * max(1.0, float(np.linalg.norm(y)))):
        return RecoveryResult(x0, 0, True, residual(x0), 0.0, 0.0, math.nan, float(epsilon))

    u0 = tube.factor.pinv() @ y
    gamma = config.gamma if config.gamma is not None else _default_gamma(u0, free)
    u, iters, change, converged = _kernels.dr_loop(
        u0, tube.v, tube.factor.singular_values, tube.b, tube.rho, tube.epsilon, tube.target,
        free.astype(np.uint8), float(gamma), float(config.alpha), int(config.max_iters),
        float(config.tolerance))
    x, _ = tube.project(u)
    polished = False
    if config.polish:
        bound = objective(x) + 1e-9 * max(1.0, objective(x))
        finishers = (lambda: _polish(a, y, tube, free, x, config.rank_tolerance),
                     lambda: _homotopy(a, y, tube, free, config.rank_tolerance))
        for finish in finishers:
            cand = finish()
            if cand is not None and residual(cand) <= epsilon + slack and objective(cand) <= bound:
                x, polished = cand, True
                break
    return RecoveryResult(x, int(iters), bool(converged), residual(x), objective(x),
                          float(change), float(gamma), float(epsilon), polished)


def solve_ibpdn(phi, y, epsilon: float, t_set: Optional[SupportSet] = None,
                config: Optional[SolverConfig] = None) -> RecoveryResult:
    """Minimize ``||u_{T^c}||_1`` subject to ``||y - Phi u||_2 <= epsilon``.

    Runs relaxed Douglas-Rachford from ``pinv(Phi) y`` and returns the tube
    projection of the final iterate. With ``config.polish`` the result is
    then finished exactly: first an active set seeded by the iterate's
    support, then, if that cannot close, the penalized least-squares path.
    A finished point replaces the iterate only when it is feasible and does
    not raise the objective;
    ``converged`` always reports the Douglas-Rachford stopping rule. An
    empty or missing ``t_set`` gives plain BPDN.
    """
    a = _matrix(phi)
    y = as_signal(y)
    return _douglas_rachford(a, y, float(epsilon), _free_mask(t_set, a.shape[1]),
                             config or SolverConfig())


def solve_bpdn(phi, y, epsilon: float, config: Optional[SolverConfig] = None) -> RecoveryResult:
    """Plain BPDN, ``minimize ||u||_1 s.t. ||y - Phi u||_2 <= epsilon``."""
    a = _matrix(phi)
    y = as_signal(y)
    return _douglas_rachford(a, y, float(epsilon), np.ones(a.shape[1], dtype=bool),
                             config or SolverConfig())


def solve_bp_equality(a_matrix, y_tilde, config: Optional[SolverConfig] = None) -> RecoveryResult:
    """Basis pursuit ``minimize ||u||_1 s.t. A u = y_tilde`` for possibly rank-deficient ``A``.

    The constraint projection is ``v + pinv(A)(y_tilde - A v)`` with the
    pseudoinverse truncated at ``config.rank_tolerance``.
    """
    return solve_bpdn(a_matrix, y_tilde, 0.0, config)


@dataclass
class OptimalityCertificate:
    """First-order optimality audit of a candidate solution.

    ``subgradient`` is ``Phi^T nu``; ``multiplier`` is the fitted
    ``lambda`` with ``nu = lambda (y - Phi x)`` (``None`` for the
    equality-constrained case, where ``nu`` is found by linear programming).
    """

    passed: bool
    worst_violation: float
    nu: np.ndarray
    subgradient: np.ndarray
    multiplier: Optional[float]
    active: SupportSet
    constraint_active: bool
    details: dict = field(default_factory=dict)


def _grade(g, known, active, rest, signs, dual_tol):
    viol = {
        "known": float(np.max(np.abs(g[known]), initial=0.0)),
        "sign": float(np.max(np.abs(g[active] - signs), initial=0.0)),
        "bound": float(np.max(np.abs(g[rest]) - 1.0, initial=0.0)),
    }
    worst = max(viol["known"], viol["sign"], max(viol["bound"], 0.0))
    return worst <= dual_tol, worst, viol


def _equality_dual(a, known, active, rest, signs, dual_tol):
    """Find ``nu`` minimizing ``max|A_rest^T nu|`` with the other rows pinned."""
    m = a.shape[0]
    pinned = np.concatenate([a[:, known].T, a[:, active].T])
    rhs = np.concatenate([np.zeros(int(known.sum())), signs])
    free_rows = a[:, rest].T
    k_rest = free_rows.shape[0]
    # variables (nu, t); minimize t
    cost = np.zeros(m + 1)
    cost[-1] = 1.0
    blocks, bounds_rhs = [], []
    if k_rest:
        blocks += [np.hstack([free_rows, -np.ones((k_rest, 1))]),
                   np.hstack([-free_rows, -np.ones((k_rest, 1))])]
        bounds_rhs += [np.zeros(k_rest), np.zeros(k_rest)]
    if pinned.shape[0]:
        blocks += [np.hstack([pinned, np.zeros((pinned.shape[0], 1))]),
                   np.hstack([-pinned, np.zeros((pinned.shape[0], 1))])]
        bounds_rhs += [rhs + dual_tol, -rhs + dual_tol]
    if not blocks:
        return np.zeros(m)
    a_ub = np.vstack(blocks)
    n_free = 2 * k_rest
    # pin rows tightly first; fall back to the full tolerance for near-degenerate x
    for pin_tol in (1e-10, dual_tol):
        b_ub = np.concatenate(bounds_rhs)
        b_ub[n_free:] += pin_tol - dual_tol
        res = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=[(None, None)] * m + [(0, None)],
                      method="highs")
        if res.status == 0:
            return res.x[:m]
    # pinned rows inconsistent: report the least-squares dual instead
    return least_squares(pinned, rhs)


def check_optimality(x_star, phi, y, epsilon: float, t_set: Optional[SupportSet] = None,
                     dual_tol: float = 1e-5, support_tol: float = 1e-6) -> OptimalityCertificate:
    """Check the KKT conditions of the known-support l1 program at ``x_star``.

    Looks for a dual vector ``nu`` such that ``g = Phi^T nu`` vanishes on
    ``T``, equals ``sign(x_i)`` where ``x`` is nonzero off ``T`` and stays in
    ``[-1, 1]`` elsewhere. For ``epsilon > 0``, ``nu = lambda (y - Phi x)``
    with ``lambda >= 0`` fitted by least squares on the sign pattern
    (``lambda = 0`` if the constraint is inactive). For ``epsilon = 0`` the
    constraint is affine and ``nu`` is free; it is found by a small linear
    program. The same route is used when ``epsilon`` is below
    ``EPSILON_FLOOR * max(1, ||y||)``, where the residual direction is
    rounding noise. Entries with ``|x_i| <= support_tol * max(1, ||x||_inf)`` count
    as zero.

    Raises :class:`InfeasibleProblemError` if ``x_star`` violates the
    constraint.
    """
    a = _matrix(phi)
    x = as_signal(x_star)
    y = as_signal(y)
    n = a.shape[1]
    free = _free_mask(t_set, n)
    known = ~free
    # residual may be many orders below ||y||; form it in extended precision
    resid = (y.astype(np.longdouble) - a.astype(np.longdouble) @ x.astype(np.longdouble)).astype(float)
    rnorm = float(np.linalg.norm(resid))
    slack = 1e-9 * max(1.0, float(np.linalg.norm(y)))
    if rnorm > epsilon * (1 + 1e-6) + slack:
        raise InfeasibleProblemError(f"x_star is infeasible: residual {rnorm:.6e} > epsilon {epsilon:.6e}")

    thresh = support_tol * max(1.0, float(np.max(np.abs(x), initial=0.0)))
    active = free & (np.abs(x) > thresh)
    rest = free & ~active
    signs = np.sign(x[active])
    active_set = SupportSet(tuple(np.flatnonzero(active).tolist()), n)

    if _resolvable_epsilon(epsilon, y) == 0:
        nu = _equality_dual(a, known, active, rest, signs, dual_tol)
        g = a.T @ nu
        ok, worst, viol = _grade(g, known, active, rest, signs, dual_tol)
        return OptimalityCertificate(ok, worst, nu, g, None, active_set, True, viol)

    # the rounding guard keeps solver output within 1e-4 relative of the boundary
    constraint_active = rnorm >= epsilon * (1 - 1e-3)
    lam = 0.0
    if constraint_active and active.any():
        h = a.T @ resid
        denom = float(h[active] @ h[active])
        lam = float(h[active] @ signs) / denom if denom > 0 else 0.0
    nu = lam * resid
    g = a.T @ nu
    ok, worst, viol = _grade(g, known, active, rest, signs, dual_tol)
    if lam < 0:
        ok = False
        viol["multiplier"] = -lam
        worst = max(worst, -lam)
    return OptimalityCertificate(ok, worst, nu, g, lam, active_set, constraint_active, viol)
