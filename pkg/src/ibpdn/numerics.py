"""Dense linear-algebra kernels: thin SVD, pseudoinverse, projectors.

Everything here operates on small dense ``numpy`` arrays. The SVD itself
is LAPACK's (through :func:`numpy.linalg.svd`); this module adds the
relative rank truncation used everywhere else in the package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DEFAULT_RANK_TOLERANCE",
    "NumericalError",
    "SvdFactorization",
    "as_matrix",
    "svd",
    "pseudoinverse",
    "range_projector",
    "nullspace_projector",
    "least_squares",
    "singular_values_stack",
]

DEFAULT_RANK_TOLERANCE = 1e-10


class NumericalError(ArithmeticError):
    """Raised when a dense kernel fails to converge or sees bad input."""


@dataclass(frozen=True)
class SvdFactorization:
    """Thin, rank-truncated SVD ``a = u @ diag(singular_values) @ vt``."""

    u: np.ndarray
    singular_values: np.ndarray
    vt: np.ndarray
    rank_tolerance: float
    shape: tuple[int, int]

    @property
    def rank(self) -> int:
        return self.singular_values.size

    @property
    def v(self) -> np.ndarray:
        return self.vt.T

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.singular_values) @ self.vt

    def pinv(self) -> np.ndarray:
        return (self.vt.T / self.singular_values) @ self.u.T


def as_matrix(a) -> np.ndarray:
    """Validate ``a`` as a finite, nonempty 2-D float array."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    if a.size == 0:
        raise ValueError("matrix is empty")
    if not np.all(np.isfinite(a)):
        raise NumericalError("matrix has non-finite entries")
    return a


def svd(a, rank_tolerance: float = DEFAULT_RANK_TOLERANCE) -> SvdFactorization:
    """Thin SVD of ``a`` truncated at ``rank_tolerance * sigma_max``.

    Singular values not strictly greater than the relative threshold are
    dropped together with their singular vectors. A zero matrix yields an
    empty (rank 0) factorization.
    """
    if rank_tolerance < 0:
        raise ValueError("rank_tolerance must be nonnegative")
    a = as_matrix(a)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    if s.size and s[0] > 0:
        keep = s > rank_tolerance * s[0]
    else:
        keep = np.zeros(s.shape, dtype=bool)
    r = int(np.count_nonzero(keep))
    return SvdFactorization(
        u=u[:, :r].copy(),
        singular_values=s[:r].copy(),
        vt=vt[:r].copy(),
        rank_tolerance=rank_tolerance,
        shape=a.shape,
    )


def pseudoinverse(a, rank_tolerance: float = DEFAULT_RANK_TOLERANCE) -> np.ndarray:
    """Moore-Penrose pseudoinverse with relative rank truncation."""
    f = svd(a, rank_tolerance)
    if f.rank == 0:
        return np.zeros(f.shape[::-1])
    return f.pinv()


def range_projector(a, rank_tolerance: float = DEFAULT_RANK_TOLERANCE) -> np.ndarray:
    """Orthogonal projector onto the column space of ``a``."""
    f = svd(a, rank_tolerance)
    p = f.u @ f.u.T
    # exact symmetry; idempotence is inherited from orthonormal u
    return 0.5 * (p + p.T)


def nullspace_projector(a, rank_tolerance: float = DEFAULT_RANK_TOLERANCE) -> np.ndarray:
    """Orthogonal projector onto the null space of ``a.T``, i.e. ``I - P_range``."""
    p = range_projector(a, rank_tolerance)
    return np.eye(p.shape[0]) - p


def least_squares(a, b, rank_tolerance: float = DEFAULT_RANK_TOLERANCE) -> np.ndarray:
    """Minimum-norm least-squares solution ``pinv(a) @ b``."""
    a = as_matrix(a)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != a.shape[0]:
        raise ValueError(f"rhs has {b.shape[0]} rows, matrix has {a.shape[0]}")
    f = svd(a, rank_tolerance)
    if f.rank == 0:
        return np.zeros((a.shape[1],) + b.shape[1:])
    return f.vt.T @ ((f.u.T @ b) / f.singular_values.reshape((-1,) + (1,) * (b.ndim - 1)))


def singular_values_stack(stack) -> np.ndarray:
    """Singular values of each matrix in a ``(batch, rows, cols)`` stack, descending."""
    stack = np.asarray(stack, dtype=float)
    try:
        return np.linalg.svd(stack, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"batched SVD did not converge: {exc}") from exc
