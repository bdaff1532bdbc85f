"""Supports, test signals, best k-term approximation and tail errors.

Indices are 0-based. Signals are plain 1-D float arrays; supports are
:class:`SupportSet` instances so that the ambient dimension travels with
the index list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

__all__ = [
    "SupportSet",
    "as_signal",
    "restrict",
    "best_k_term",
    "compressibility_error",
    "generate_signal",
    "known_support",
    "support_from_threshold",
    "read_vector",
    "write_vector",
]

SIGNAL_MODELS = ("exact_sparse", "power_law")


@dataclass(frozen=True)
class SupportSet:
    """A sorted set of indices into ``range(ambient_dim)``."""

    indices: tuple[int, ...]
    ambient_dim: int

    def __post_init__(self):
        if self.ambient_dim < 1:
            raise ValueError("ambient_dim must be positive")
        idx = tuple(int(i) for i in self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("indices must be strictly increasing")
        if idx and (idx[0] < 0 or idx[-1] >= self.ambient_dim):
            raise ValueError(f"indices out of range [0, {self.ambient_dim})")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_indices(cls, indices: Iterable[int], ambient_dim: int) -> "SupportSet":
        return cls(tuple(sorted(set(int(i) for i in indices))), ambient_dim)

    @classmethod
    def empty(cls, ambient_dim: int) -> "SupportSet":
        return cls((), ambient_dim)

    @classmethod
    def full(cls, ambient_dim: int) -> "SupportSet":
        return cls(tuple(range(ambient_dim)), ambient_dim)

    @classmethod
    def of(cls, x) -> "SupportSet":
        """Support of ``x``: indices of its nonzero entries."""
        x = np.asarray(x)
        return cls(tuple(np.flatnonzero(x).tolist()), x.size)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i) -> bool:
        return int(i) in set(self.indices)

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.ambient_dim, dtype=bool)
        m[list(self.indices)] = True
        return m

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.intp)

    def complement(self) -> "SupportSet":
        return SupportSet(tuple(np.flatnonzero(~self.mask).tolist()), self.ambient_dim)

    def union(self, other: "SupportSet") -> "SupportSet":
        self._check_same_dim(other)
        return SupportSet.from_indices(set(self.indices) | set(other.indices), self.ambient_dim)

    def difference(self, other: "SupportSet") -> "SupportSet":
        self._check_same_dim(other)
        return SupportSet.from_indices(set(self.indices) - set(other.indices), self.ambient_dim)

    def intersection(self, other: "SupportSet") -> "SupportSet":
        self._check_same_dim(other)
        return SupportSet.from_indices(set(self.indices) & set(other.indices), self.ambient_dim)

    def _check_same_dim(self, other):
        if other.ambient_dim != self.ambient_dim:
            raise ValueError("supports live in different ambient dimensions")


def as_signal(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"a signal is a 1-D vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("signal has non-finite entries")
    return x


def restrict(x, s: SupportSet) -> np.ndarray:
    """Copy of ``x`` with every entry outside ``s`` set to zero."""
    x = as_signal(x)
    if s.ambient_dim != x.size:
        raise ValueError(f"support dimension {s.ambient_dim} != signal length {x.size}")
    out = np.zeros_like(x)
    idx = s.array
    out[idx] = x[idx]
    return out


def best_k_term(x, k: int) -> np.ndarray:
    """Keep the ``k`` largest-magnitude entries of ``x``, zero the rest.

    Ties are broken in favour of the lowest index.
    """
    x = as_signal(x)
    if not 0 <= k <= x.size:
        raise ValueError(f"k={k} outside [0, {x.size}]")
    out = np.zeros_like(x)
    if k:
        # stable sort on -|x| keeps lower indices first among equal magnitudes
        keep = np.argsort(-np.abs(x), kind="stable")[:k]
        out[keep] = x[keep]
    return out


def compressibility_error(r, k: int) -> float:
    """Scaled l1 tail ``||r - r^k||_1 / sqrt(k)`` of the best k-term approximation."""
    r = as_signal(r)
    if not 1 <= k <= r.size:
        raise ValueError(f"k={k} outside [1, {r.size}]")
    return float(np.sum(np.abs(r - best_k_term(r, k))) / math.sqrt(k))


def generate_signal(n: int, k_true: int, model: str = "exact_sparse", rng_seed=None,
                    exponent: float = 1.0) -> tuple[np.ndarray, SupportSet]:
    """Draw a random test signal and its (significant) support.

    ``exact_sparse``
        ``k_true`` nonzeros with magnitudes uniform in [1, 2] and random
        signs on a uniformly random support.
    ``power_law``
        Every entry is nonzero; the sorted magnitudes are ``i**-exponent``
        (``i = 1..n``), scattered by a random permutation with random
        signs. The returned support holds the ``k_true`` largest entries.

    Uses ``numpy.random.default_rng`` (PCG64), so a seed fixes the output.
    """
    if n < 1 or not 0 <= k_true <= n:
        raise ValueError(f"need n >= 1 and 0 <= k_true <= n, got n={n}, k_true={k_true}")
    rng = np.random.default_rng(rng_seed)
    x = np.zeros(n)
    if model == "exact_sparse":
        supp = np.sort(rng.permutation(n)[:k_true])
        mags = rng.uniform(1.0, 2.0, size=k_true)
        signs = rng.choice((-1.0, 1.0), size=k_true)
        x[supp] = signs * mags
        return x, SupportSet(tuple(supp.tolist()), n)
    if model == "power_law":
        if not exponent > 0:
            raise ValueError("power_law exponent must be positive")
        perm = rng.permutation(n)
        signs = rng.choice((-1.0, 1.0), size=n)
        x[perm] = signs * np.arange(1, n + 1, dtype=float) ** (-exponent)
        return x, SupportSet.from_indices(perm[:k_true].tolist(), n)
    raise ValueError(f"unknown signal model {model!r}; expected one of {SIGNAL_MODELS}")


def known_support(true_support: SupportSet, rho_good: float, n_spurious: int,
                  rng_seed=None) -> SupportSet:
    """Simulated prior support: a fraction of the truth plus wrong indices.

    ``round(rho_good * len(true_support))`` indices are drawn from the true
    support and ``n_spurious`` from outside it.
    """
    if not 0.0 <= rho_good <= 1.0:
        raise ValueError("rho_good must lie in [0, 1]")
    n = true_support.ambient_dim
    outside = true_support.complement().array
    if not 0 <= n_spurious <= outside.size:
        raise ValueError(f"cannot pick {n_spurious} spurious indices out of {outside.size}")
    rng = np.random.default_rng(rng_seed)
    n_good = int(round(rho_good * len(true_support)))
    good = rng.permutation(true_support.array)[:n_good]
    bad = rng.permutation(outside)[:n_spurious]
    return SupportSet.from_indices(np.concatenate([good, bad]).tolist(), n)


def support_from_threshold(x, tau: float) -> SupportSet:
    """Indices where ``|x_i| > tau``."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    x = as_signal(x)
    return SupportSet(tuple(np.flatnonzero(np.abs(x) > tau).tolist()), x.size)


def write_vector(path, x) -> None:
    """Write one decimal value per line, round-trip exact."""
    x = as_signal(x)
    Path(path).write_text("".join(f"{v:.17g}\n" for v in x))


def read_vector(path) -> np.ndarray:
    lines = Path(path).read_text().split()
    return as_signal(np.array([float(v) for v in lines]))
