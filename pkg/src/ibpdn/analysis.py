"""RIP radius estimates and the stability constants of the recovery bounds.

The closed forms implemented here, for RIP radii ``d2k`` (order ``2k``)
and ``ds2k`` (order ``s + 2k``)::

    mu      = sqrt(ds2k**2 + d2k**2)
    C       = 4 sqrt(1 + ds2k) / (1 - ds2k - mu)
    D       = 2 (1 + mu - ds2k) / (1 - ds2k - mu)
    valid iff d2k**2 + 2 ds2k < 1

and, for cancel-then-recover, ``dp = ds2k / (1 - ds2k)`` with
``D_tilde = 2 (1 + (sqrt2 - 1) dp) / (1 - (sqrt2 + 1) dp)``, valid iff
``dp < sqrt2 - 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np

from .numerics import as_matrix, singular_values_stack
from .sensing import SensingOperator
from .signals import SupportSet, as_signal, compressibility_error, restrict

__all__ = [
    "SQRT2",
    "RipGuardError",
    "RipEstimate",
    "BoundReport",
    "BoundCheck",
    "rip_radius",
    "certified_radii",
    "mu_sk",
    "theorem_constants",
    "ctr_constants",
    "verify_bound",
    "verify_ctr_bound",
]

SQRT2 = math.sqrt(2.0)
MAX_SUPPORTS = 10**6
DEFAULT_SAMPLES = 5000
_CHUNK = 20000


class RipGuardError(ValueError):
    """Exact enumeration would visit more supports than allowed."""


@dataclass(frozen=True)
class RipEstimate:
    order_q: int
    radius: float
    method: str
    is_lower_bound: bool
    samples: Optional[int] = None

    @property
    def at_least_one(self) -> bool:
        return self.radius >= 1.0

    @property
    def report(self):
        """The radius, or the string ``">=1"`` when the RIP does not hold."""
        return ">=1" if self.at_least_one else self.radius

    def to_dict(self) -> dict:
        method = self.method if self.samples is None else f"{self.method}({self.samples})"
        return {
            "order_q": self.order_q,
            "radius": self.report,
            "radius_value": self.radius,
            "method": method,
            "is_lower_bound": self.is_lower_bound,
        }


def _matrix(phi) -> np.ndarray:
    return phi.effective if isinstance(phi, SensingOperator) else as_matrix(phi)


def _support_radius(a: np.ndarray, supports: np.ndarray) -> float:
    worst = 0.0
    for start in range(0, supports.shape[0], _CHUNK):
        chunk = supports[start:start + _CHUNK]
        sv = singular_values_stack(np.transpose(a[:, chunk], (1, 0, 2)))
        hi = sv[:, 0] ** 2 - 1.0
        lo = 1.0 - sv[:, -1] ** 2
        worst = max(worst, float(np.max(hi)), float(np.max(lo)))
    return worst


def rip_radius(phi, q: int, method: str = "exact", samples: int = DEFAULT_SAMPLES,
               rng_seed=None, max_supports: int = MAX_SUPPORTS) -> RipEstimate:
    """Restricted isometry radius of order ``q``.

    For every support ``S`` of size ``q`` the extreme singular values of
    ``Phi_S`` give ``delta_S = max(s_max**2 - 1, 1 - s_min**2)``. ``exact``
    takes the max over all ``C(n, q)`` supports (refused above
    ``max_supports``); ``monte_carlo`` takes it over ``samples`` uniformly
    drawn supports, all drawn from the seed before any evaluation, and is
    therefore a lower bound.
    """
    a = _matrix(phi)
    n = a.shape[1]
    if not 1 <= q <= n:
        raise ValueError(f"order q={q} outside [1, {n}]")
    if method in ("exact", "exact_enumeration"):
        count = math.comb(n, q)
        if count > max_supports:
            raise RipGuardError(f"C({n},{q}) = {count} supports exceeds the guard of {max_supports}")
        supports = np.array(list(combinations(range(n), q)), dtype=np.intp)
        return RipEstimate(q, _support_radius(a, supports), "exact_enumeration", False)
    if method == "monte_carlo":
        if samples < 1:
            raise ValueError("samples must be positive")
        rng = np.random.default_rng(rng_seed)
        supports = np.sort(np.argsort(rng.random((samples, n)), axis=1)[:, :q], axis=1)
        return RipEstimate(q, _support_radius(a, supports), "monte_carlo", True, samples)
    raise ValueError(f"unknown method {method!r}")


def certified_radii(phi, s: int, k: int, max_supports: int = MAX_SUPPORTS) -> tuple[float, float]:
    """Exact ``(delta_2k, delta_{s+2k})`` by enumeration."""
    d2k = rip_radius(phi, 2 * k, "exact", max_supports=max_supports).radius
    ds2k = d2k if s == 0 else rip_radius(phi, s + 2 * k, "exact", max_supports=max_supports).radius
    return d2k, ds2k


def _check_radius(name, value):
    if not 0.0 <= value < 1.0:
        raise ValueError(f"{name} must lie in [0, 1), got {value}")


def mu_sk(delta_s2k: float, delta_2k: float) -> float:
    _check_radius("delta_s2k", delta_s2k)
    _check_radius("delta_2k", delta_2k)
    return math.hypot(delta_s2k, delta_2k)


@dataclass(frozen=True)
class BoundReport:
    delta_2k: float
    delta_s2k: float
    mu: float
    condition_ok: bool
    c_const: Optional[float] = None
    d_const: Optional[float] = None
    d_tilde: Optional[float] = None
    delta_prime: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "delta_2k": self.delta_2k,
            "delta_s2k": self.delta_s2k,
            "mu": self.mu,
            "condition_ok": self.condition_ok,
            "C": self.c_const,
            "D": self.d_const,
            "delta_prime": self.delta_prime,
            "D_tilde": self.d_tilde,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "BoundReport":
        return cls(d["delta_2k"], d["delta_s2k"], d["mu"], bool(d["condition_ok"]),
                   d.get("C"), d.get("D"), d.get("D_tilde"), d.get("delta_prime"))


def ctr_constants(delta_s2k: float) -> tuple[float, Optional[float]]:
    """``(delta_prime, D_tilde)`` for cancel-then-recover; ``D_tilde`` is ``None`` when invalid."""
    _check_radius("delta_s2k", delta_s2k)
    dp = delta_s2k / (1.0 - delta_s2k)
    if not dp < SQRT2 - 1.0:
        return dp, None
    return dp, 2.0 * (1.0 + (SQRT2 - 1.0) * dp) / (1.0 - (SQRT2 + 1.0) * dp)


def theorem_constants(delta_s2k: float, delta_2k: float) -> BoundReport:
    """Stability constants ``C`` and ``D`` (plus the cancel-then-recover pair).

    ``C`` and ``D`` are left as ``None`` when ``delta_2k**2 + 2 delta_s2k >= 1``.
    """
    mu = mu_sk(delta_s2k, delta_2k)
    ok = delta_2k ** 2 + 2.0 * delta_s2k < 1.0
    c = d = None
    if ok:
        denom = 1.0 - delta_s2k - mu
        c = 4.0 * math.sqrt(1.0 + delta_s2k) / denom
        d = 2.0 * (1.0 + mu - delta_s2k) / denom
    dp, dt = ctr_constants(delta_s2k)
    return BoundReport(delta_2k, delta_s2k, mu, ok, c, d, dt, dp)


@dataclass(frozen=True)
class BoundCheck:
    passed: bool
    margin: float
    lhs: float
    rhs: float
    e0: float


def _default_atol(x) -> float:
    # exact-recovery cases have rhs == 0; allow for rounding in the solver output
    return 1e-9 * max(1.0, float(np.linalg.norm(x)))


def verify_bound(x, x_star, epsilon: float, t_set: SupportSet, k: int, report: BoundReport,
                 atol: Optional[float] = None) -> BoundCheck:
    """Check ``||x - x*|| <= C eps + D e0(x - x_T; k)``; ``margin = rhs - lhs``.

    ``passed`` allows ``margin >= -atol`` (default ``1e-9 * max(1, ||x||)``).
    """
    if not report.condition_ok:
        raise ValueError("bound not applicable: RIP condition fails for this report")
    if k < 1:
        raise ValueError("k must be at least 1")
    x = as_signal(x)
    x_star = as_signal(x_star)
    r = x - restrict(x, t_set)
    e0 = compressibility_error(r, k)
    lhs = float(np.linalg.norm(x - x_star))
    rhs = report.c_const * epsilon + report.d_const * e0
    margin = rhs - lhs
    tol = _default_atol(x) if atol is None else atol
    return BoundCheck(margin >= -tol, margin, lhs, rhs, e0)


def verify_ctr_bound(x, x_tilde, t_set: SupportSet, k: int, report: BoundReport,
                     atol: Optional[float] = None) -> BoundCheck:
    """Check ``||x_{T^c} - x~_{T^c}|| <= D_tilde e0(x_{T^c}; k)`` (noiseless)."""
    if report.d_tilde is None:
        raise ValueError("cancel-then-recover bound not applicable for this radius")
    x = as_signal(x)
    x_tilde = as_signal(x_tilde)
    tc = t_set.complement()
    r = restrict(x, tc)
    e0 = compressibility_error(r, k)
    lhs = float(np.linalg.norm(r - restrict(x_tilde, tc)))
    rhs = report.d_tilde * e0
    margin = rhs - lhs
    tol = _default_atol(x) if atol is None else atol
    return BoundCheck(margin >= -tol, margin, lhs, rhs, e0)
