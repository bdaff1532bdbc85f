"""Cancel-then-recover: remove the known-support part, then recover the rest.

Projecting the measurements onto the orthogonal complement of
``range(Phi_T)`` annihilates every signal supported on ``T``. The
innovation is then recovered from the projected system by basis pursuit
(or BPDN when the measurements are noisy).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .numerics import DEFAULT_RANK_TOLERANCE, pseudoinverse, nullspace_projector
from .signals import SupportSet, as_signal
from .solver import RecoveryResult, SolverConfig, _matrix, solve_bp_equality, solve_ibpdn

__all__ = ["CtrProblem", "CtrRecovery", "build_ctr", "cancel", "recover_ctr"]


@dataclass(frozen=True)
class CtrProblem:
    phi: np.ndarray
    t_set: SupportSet
    omega: np.ndarray
    omega_pinv: np.ndarray
    p_perp: np.ndarray
    phi_tilde: np.ndarray


@dataclass
class CtrRecovery:
    x_tilde: np.ndarray
    """Innovation estimate; exactly zero on ``T``."""
    x_full_estimate: np.ndarray
    """``x_tilde`` plus least-squares coefficients on ``T`` (not covered by the bound)."""
    y_tilde: np.ndarray
    result: RecoveryResult


def build_ctr(phi, t_set: SupportSet,
              rank_tolerance: float = DEFAULT_RANK_TOLERANCE) -> CtrProblem:
    a = _matrix(phi)
    m, n = a.shape
    if t_set.ambient_dim != n:
        raise ValueError(f"support lives in dimension {t_set.ambient_dim}, operator has {n} columns")
    if len(t_set) == 0:
        raise ValueError("empty known support: nothing to cancel, use the solver directly")
    if len(t_set) >= m:
        raise ValueError(f"need #T < m, got #T={len(t_set)}, m={m}")
    omega = a[:, t_set.array]
    p_perp = nullspace_projector(omega, rank_tolerance)
    phi_tilde = p_perp @ a
    # these columns vanish in exact arithmetic
    phi_tilde[:, t_set.array] = 0.0
    for arr in (omega, p_perp, phi_tilde):
        arr.setflags(write=False)
    return CtrProblem(a, t_set, omega, pseudoinverse(omega, rank_tolerance), p_perp, phi_tilde)


def cancel(ctr: CtrProblem, y) -> np.ndarray:
    """Interference-free measurements ``P_perp y``."""
    y = as_signal(y)
    if y.size != ctr.p_perp.shape[0]:
        raise ValueError(f"y has length {y.size}, expected {ctr.p_perp.shape[0]}")
    return ctr.p_perp @ y


def recover_ctr(ctr: CtrProblem, y, epsilon: float = 0.0,
                config: Optional[SolverConfig] = None) -> CtrRecovery:
    """Recover the innovation from the cancelled measurements.

    ``epsilon = 0`` solves ``min ||u||_1 s.t. Phi~ u = y~``; otherwise BPDN
    with the same tube radius, which is valid since ``||P_perp n|| <= ||n||``.
    The full-signal estimate back-substitutes ``pinv(Phi_T) (y - Phi x~)``
    on ``T``.
    """
    y = as_signal(y)
    y_tilde = cancel(ctr, y)
    if epsilon == 0:
        res = solve_bp_equality(ctr.phi_tilde, y_tilde, config)
    else:
        res = solve_ibpdn(ctr.phi_tilde, y_tilde, epsilon, None, config)
    x_tilde = res.x_star.copy()
    idx = ctr.t_set.array
    x_tilde[idx] = 0.0
    full = x_tilde.copy()
    full[idx] = ctr.omega_pinv @ (y - ctr.phi @ x_tilde)
    return CtrRecovery(x_tilde, full, y_tilde, res)
