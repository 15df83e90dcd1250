"""Spectral calculus of F(t) = t - log(1 + t) on symmetric matrices, and sphere averages."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gammaln

from .costs import f_remainder
from .errors import DomainError, InputError, NumericalError

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SymmetricMatrix:
    entries: np.ndarray

    def __post_init__(self):
        A = np.array(self.entries, dtype=float)
        if A.ndim == 0:
            A = A.reshape(1, 1)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InputError("need a square matrix")
        scale = max(1.0, np.max(np.abs(A))) if A.size else 1.0
        if np.max(np.abs(A - A.T), initial=0.0) > SYMMETRY_TOL * scale:
            raise InputError("matrix is not symmetric")
        A = (A + A.T) / 2
        A.setflags(write=False)
        object.__setattr__(self, "entries", A)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def eig(self):
        A = self.entries
        lam, Q = np.linalg.eigh(A)
        res = np.max(np.abs(A @ Q - Q * lam), initial=0.0)
        if res > 1e-10 * max(np.max(np.abs(A), initial=0.0), 1e-300) and res > 1e-300:
            raise NumericalError(f"eigendecomposition residual {res:.3g}")
        return lam, Q

    @property
    def eigen_floor(self) -> float:
        return float(self.eig[0][0])


def _as_sym(A) -> SymmetricMatrix:
    return A if isinstance(A, SymmetricMatrix) else SymmetricMatrix(A)


def matrix_f(A) -> SymmetricMatrix:
    """Q F(Lambda) Q^T."""
    A = _as_sym(A)
    lam, Q = A.eig
    if lam[0] <= -1:
        raise DomainError(f"eigenvalue {lam[0]:.6g} <= -1")
    return SymmetricMatrix((Q * f_remainder(lam)) @ Q.T)


def trace_f(A) -> float:
    A = _as_sym(A)
    lam = A.eig[0]
    if lam[0] <= -1:
        raise DomainError(f"eigenvalue {lam[0]:.6g} <= -1")
    return float(np.sum(f_remainder(lam)))


@dataclass(frozen=True)
class SphereEstimate:
    value: float
    std_error: float
    n_samples: int
    seed: int


def sphere_samples(n: int, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    U = rng.standard_normal((n_samples, n))
    return U / np.linalg.norm(U, axis=1, keepdims=True)


def _shard_values(fn, n, n_samples, seed, shard_size):
    """Evaluate fn on uniform sphere samples, drawn in shards seeded by (seed, shard index)."""
    out = []
    for k, start in enumerate(range(0, n_samples, shard_size)):
        rng = np.random.default_rng([seed, k])
        out.append(fn(sphere_samples(n, min(shard_size, n_samples - start), rng)))
    return np.concatenate(out)


def sphere_average_f(A, n_samples: int = 100_000, seed: int = 0, shard_size: int = 50_000) -> SphereEstimate:
    """Monte Carlo estimate of the sphere average of F(sqrt(n) |A u|)."""
    A = _as_sym(A)
    if n_samples < 10_000:
        raise InputError("sphere_average_f needs at least 1e4 samples")
    n = A.n
    M = A.entries
    vals = _shard_values(lambda U: f_remainder(np.sqrt(n) * np.linalg.norm(U @ M, axis=1)),
                         n, n_samples, seed, shard_size)
    return SphereEstimate(float(vals.mean()), float(vals.std() / np.sqrt(n_samples)), n_samples, seed)


def mean_width_exact(n: int) -> float:
    """sqrt(n) E|u_1| for u uniform on the sphere in R^n."""
    return float(np.sqrt(n) * np.exp(gammaln(n / 2) - gammaln((n + 1) / 2)) / np.sqrt(np.pi))


def mean_width_constants(n: int, n_samples: int = 100_000, seed: int = 0, n_directions: int = 32):
    """Extremes over random X of the Monte Carlo estimate of sqrt(n) E|X.u| / |X|.

    Returns (lower_ratio, upper_ratio, std_error). The ratio does not depend on X,
    so the spread between the extremes is pure sampling noise.
    """
    if n < 1:
        raise InputError("n must be at least 1")
    rng = np.random.default_rng([seed, 1_000_003])
    X = rng.standard_normal((n_directions, n))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    vals = _shard_values(lambda U: np.abs(U @ X.T), n, n_samples, seed, 50_000) * np.sqrt(n)
    means = vals.mean(axis=0)
    se = float(np.max(vals.std(axis=0)) / np.sqrt(n_samples))
    return float(means.min()), float(means.max()), se
