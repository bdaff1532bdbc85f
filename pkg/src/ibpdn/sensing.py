"""Sensing ensembles and the bounded-noise measurement model ``y = Phi x + n``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .numerics import as_matrix
from .signals import as_signal

__all__ = [
    "ENSEMBLES",
    "SensingOperator",
    "Measurement",
    "make_ensemble",
    "measure",
    "read_matrix_csv",
    "write_matrix_csv",
]

ENSEMBLES = ("gaussian", "bernoulli", "identity", "custom")


@dataclass(frozen=True)
class SensingOperator:
    """An ``m x n`` sensing matrix, optionally composed with an orthonormal basis.

    When ``basis`` is given the operator acting on coefficient vectors is
    ``matrix @ basis`` (see :attr:`effective`).
    """

    matrix: np.ndarray
    ensemble_tag: str = "custom"
    basis: Optional[np.ndarray] = None
    _effective: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.ensemble_tag not in ENSEMBLES:
            raise ValueError(f"unknown ensemble {self.ensemble_tag!r}")
        mat = as_matrix(self.matrix)
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        eff = mat
        if self.basis is not None:
            basis = as_matrix(self.basis)
            n = mat.shape[1]
            if basis.shape != (n, n):
                raise ValueError(f"basis must be {n}x{n}, got {basis.shape}")
            if np.max(np.abs(basis.T @ basis - np.eye(n))) >= 1e-8:
                raise ValueError("basis is not orthonormal")
            basis.setflags(write=False)
            object.__setattr__(self, "basis", basis)
            eff = mat @ basis
            eff.setflags(write=False)
        object.__setattr__(self, "_effective", eff)

    @property
    def effective(self) -> np.ndarray:
        return self._effective

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def __matmul__(self, x):
        return self._effective @ x


def as_operator(phi) -> SensingOperator:
    return phi if isinstance(phi, SensingOperator) else SensingOperator(np.asarray(phi, dtype=float))


def make_ensemble(m: int, n: int, ensemble_tag: str = "gaussian", rng_seed=None,
                  basis=None) -> SensingOperator:
    """Random sensing matrix from one of the standard ensembles.

    ``gaussian`` draws i.i.d. ``N(0, 1/m)`` entries, ``bernoulli`` draws
    ``+-1/sqrt(m)`` with equal probability and ``identity`` needs ``m == n``.
    Randomness comes from ``numpy.random.default_rng(rng_seed)`` (PCG64).
    """
    if m < 1 or n < 1:
        raise ValueError(f"need m, n >= 1, got m={m}, n={n}")
    rng = np.random.default_rng(rng_seed)
    if ensemble_tag == "gaussian":
        mat = rng.standard_normal((m, n)) / math.sqrt(m)
    elif ensemble_tag == "bernoulli":
        mat = rng.choice((-1.0, 1.0), size=(m, n)) / math.sqrt(m)
    elif ensemble_tag == "identity":
        if m != n:
            raise ValueError(f"identity ensemble needs m == n, got {m}x{n}")
        mat = np.eye(n)
    else:
        raise ValueError(f"cannot draw from ensemble {ensemble_tag!r}")
    return SensingOperator(mat, ensemble_tag, basis)


@dataclass(frozen=True)
class Measurement:
    y: np.ndarray
    epsilon: float
    noise_norm: float

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.noise_norm > self.epsilon:
            raise ValueError("noise_norm exceeds the noise bound epsilon")


def measure(phi, x, epsilon: float = 0.0, rng_seed=None) -> Measurement:
    """Noisy measurements ``y = Phi x + n`` with ``||n||_2 <= epsilon``.

    The noise direction is a normalized standard normal draw and its norm
    is uniform in ``[0, epsilon]``.
    """
    phi = as_operator(phi)
    x = as_signal(x)
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    m, n = phi.shape
    if x.size != n:
        raise ValueError(f"signal length {x.size} != {n} columns")
    clean = phi.effective @ x
    if epsilon == 0:
        return Measurement(clean, 0.0, 0.0)
    rng = np.random.default_rng(rng_seed)
    direction = rng.standard_normal(m)
    eta = rng.uniform(0.0, epsilon)
    noise = direction * (eta / np.linalg.norm(direction))
    # the rescaled norm can overshoot eta by one ulp
    actual = min(float(np.linalg.norm(noise)), float(epsilon))
    return Measurement(clean + noise, float(epsilon), actual)


def write_matrix_csv(path, a) -> None:
    a = as_matrix(a)
    Path(path).write_text("".join(",".join(f"{v:.17g}" for v in row) + "\n" for row in a))


def read_matrix_csv(path) -> np.ndarray:
    rows = [line for line in Path(path).read_text().splitlines() if line.strip()]
    return as_matrix(np.array([[float(v) for v in row.split(",")] for row in rows]))
