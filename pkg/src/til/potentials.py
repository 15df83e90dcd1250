"""Potentials V on R^n with closed-form value, gradient and Hessian oracles.

All oracles are vectorized: they take an array of points of shape (m, d) and
return arrays of shape (m,), (m, d) and (m, d, d).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InputError, OracleError, TruncationWarning

TAIL_BUDGET = 1e-8

Oracle = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PotentialSpec:
    name: str
    dimension: int
    value_oracle: Oracle
    gradient_oracle: Oracle
    hessian_oracle: Oracle
    declared_convex: bool
    curvature_lower_bound: float | None = None
    params: dict = field(default_factory=dict, compare=False)

    def value(self, x):
        return self.value_oracle(as_points(x, self.dimension))

    def gradient(self, x):
        return self.gradient_oracle(as_points(x, self.dimension))

    def hessian(self, x):
        return self.hessian_oracle(as_points(x, self.dimension))


def as_points(x, dimension: int) -> np.ndarray:
    """Coerce ``x`` to a (m, dimension) float array."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(-1, 1) if dimension == 1 else x.reshape(1, -1)
    if x.shape[-1] != dimension:
        raise InputError(f"expected points of dimension {dimension}, got shape {x.shape}")
    return x


def evaluate(spec: PotentialSpec, x):
    """Return (V(x), grad V(x), D^2 V(x)) at a single point."""
    pt = np.asarray(x, dtype=float).reshape(1, spec.dimension)
    if not np.all(np.isfinite(pt)):
        raise InputError(f"non-finite point {x!r}")
    v = spec.value_oracle(pt)[0]
    g = spec.gradient_oracle(pt)[0]
    H = spec.hessian_oracle(pt)[0]
    for name, out in (("value", v), ("gradient", g), ("hessian", H)):
        if not np.all(np.isfinite(out)):
            raise OracleError(name, x)
    return float(v), g.copy(), H.copy()


# ---------------------------------------------------------------- families


def gaussian(cov=1.0, mean=None, dimension: int | None = None, name: str | None = None) -> PotentialSpec:
    """V(x) = (x - m)^T cov^{-1} (x - m) / 2."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if dimension is not None and cov.shape == (1, 1) and dimension > 1:
        cov = cov[0, 0] * np.eye(dimension)
    d = cov.shape[0]
    if cov.shape != (d, d) or not np.allclose(cov, cov.T):
        raise InputError("covariance must be a symmetric matrix")
    prec = np.linalg.inv(cov)
    prec = (prec + prec.T) / 2
    mean = np.zeros(d) if mean is None else np.broadcast_to(np.asarray(mean, float), (d,)).copy()
    lam = float(np.linalg.eigvalsh(prec)[0])
    if lam <= 0:
        raise InputError("covariance must be positive definite")

    def value(X):
        Z = X - mean
        return 0.5 * np.einsum("mi,ij,mj->m", Z, prec, Z)

    def gradient(X):
        return (X - mean) @ prec

    def hessian(X):
        return np.broadcast_to(prec, (X.shape[0], d, d)).copy()

    if name is None:
        name = "gaussian" if np.allclose(cov, np.eye(d)) and not mean.any() else "gaussian(custom)"
    return PotentialSpec(name, d, value, gradient, hessian, True, lam,
                         {"family": "gaussian", "cov": cov.tolist(), "mean": mean.tolist()})


def quadratic_plus_quartic(a: float, b: float, dimension: int = 1) -> PotentialSpec:
    """V(x) = a|x|^2/2 + b|x|^4/4."""
    if a < 0 or b < 0 or (a == 0 and b == 0):
        raise InputError("need a, b >= 0, not both zero")
    d = dimension

    def value(X):
        r2 = np.sum(X * X, axis=1)
        return a * r2 / 2 + b * r2 * r2 / 4

    def gradient(X):
        r2 = np.sum(X * X, axis=1, keepdims=True)
        return a * X + b * r2 * X

    def hessian(X):
        r2 = np.sum(X * X, axis=1)
        eye = np.eye(d)
        return (a + b * r2)[:, None, None] * eye + 2 * b * np.einsum("mi,mj->mij", X, X)

    return PotentialSpec(f"quadratic_plus_quartic({a:g},{b:g})", d, value, gradient, hessian,
                         True, float(a), {"family": "quadratic_plus_quartic", "a": a, "b": b, "dimension": d})


def even_power(p: int, dimension: int = 1) -> PotentialSpec:
    """V(x) = |x|^p / p for an even integer p >= 2."""
    if int(p) != p or p < 2 or p % 2:
        raise InputError("even_power needs an even integer p >= 2")
    p = int(p)
    d = dimension

    def value(X):
        return np.sum(X * X, axis=1) ** (p // 2) / p

    def gradient(X):
        r2 = np.sum(X * X, axis=1, keepdims=True)
        return r2 ** (p // 2 - 1) * X

    def hessian(X):
        r2 = np.sum(X * X, axis=1)
        out = (r2 ** (p // 2 - 1))[:, None, None] * np.eye(d)
        if p > 2:
            out = out + ((p - 2) * r2 ** (p // 2 - 2))[:, None, None] * np.einsum("mi,mj->mij", X, X)
        return out

    return PotentialSpec(f"even_power({p})", d, value, gradient, hessian, True,
                         1.0 if p == 2 else 0.0, {"family": "even_power", "p": p, "dimension": d})


def perturbed(base: PotentialSpec, amplitude: float, frequency: float = 1.0) -> PotentialSpec:
    """base(x) + amplitude * sum_k cos(frequency * x_k): a bounded C^2 perturbation."""
    A, w = float(amplitude), float(frequency)
    d = base.dimension

    def value(X):
        return base.value_oracle(X) + A * np.sum(np.cos(w * X), axis=1)

    def gradient(X):
        return base.gradient_oracle(X) - A * w * np.sin(w * X)

    def hessian(X):
        H = base.hessian_oracle(X)
        idx = np.arange(d)
        H[:, idx, idx] -= A * w * w * np.cos(w * X)
        return H

    lam = None
    if base.curvature_lower_bound is not None:
        lam = base.curvature_lower_bound - abs(A) * w * w
        if lam < 0:
            lam = None
    convex = base.declared_convex and lam is not None
    return PotentialSpec(f"perturbed({base.name},{A:g},{w:g})", d, value, gradient, hessian, convex,
                         lam, {"family": "perturbed", "base": base.params, "amplitude": A, "frequency": w})


def affine_pushforward(spec: PotentialSpec, matrix, offset=None) -> PotentialSpec:
    """Potential of the image of mu_V under phi(x) = matrix @ x + offset, i.e. V o phi^{-1}."""
    M = np.atleast_2d(np.asarray(matrix, dtype=float))
    d = spec.dimension
    if M.shape != (d, d):
        raise InputError("affine map has the wrong shape")
    b = np.zeros(d) if offset is None else np.asarray(offset, float).reshape(d)
    Minv = np.linalg.inv(M)

    def pull(X):
        return (X - b) @ Minv.T

    def value(X):
        return spec.value_oracle(pull(X))

    def gradient(X):
        return spec.gradient_oracle(pull(X)) @ Minv

    def hessian(X):
        return np.einsum("ki,mkl,lj->mij", Minv, spec.hessian_oracle(pull(X)), Minv)

    lam = None
    if spec.curvature_lower_bound is not None:
        lam = spec.curvature_lower_bound / np.linalg.norm(M, 2) ** 2
    return PotentialSpec(f"affine({spec.name})", d, value, gradient, hessian, spec.declared_convex, lam,
                         {"family": "affine", "base": spec.params, "matrix": M.tolist(), "offset": b.tolist()})


def from_config(cfg: dict) -> PotentialSpec:
    """Build a builtin family from a config table, e.g. {family = "gaussian", dimension = 1}."""
    cfg = dict(cfg)
    family = cfg.pop("family", None)
    dim = int(cfg.pop("dimension", 1))
    if family == "gaussian":
        if "cov" in cfg:
            cov = cfg["cov"]
        else:
            cov = float(cfg.get("sigma", 1.0)) ** 2 * np.eye(dim)
        return gaussian(cov, cfg.get("mean"), dimension=dim)
    if family == "quadratic_plus_quartic":
        return quadratic_plus_quartic(float(cfg.get("a", 1.0)), float(cfg.get("b", 1.0)), dim)
    if family == "even_power":
        return even_power(int(cfg["p"]), dim)
    if family == "perturbed":
        base = cfg.get("base", {"family": "gaussian"})
        base = dict(base)
        base.setdefault("dimension", dim)
        return perturbed(from_config(base), float(cfg.get("amplitude", 1.0)), float(cfg.get("frequency", 1.0)))
    raise InputError(f"unknown potential family {family!r}")


# ---------------------------------------------------------------- probes


@dataclass
class ConvexityReport:
    min_ratio: float
    passed: bool
    n_pairs: int
    n_skipped: int
    worst_pair: tuple | None


def convexity_probe(spec: PotentialSpec, pairs) -> ConvexityReport:
    """Minimum over pairs of (grad V(y) - grad V(x)).(y - x) / |y - x|^2.

    ``pairs`` is an array of shape (m, 2, d) (or (m, 2) in dimension one).
    Coincident pairs are skipped.
    """
    P = np.asarray(pairs, dtype=float)
    if P.size == 0:
        raise InputError("convexity_probe needs at least one pair")
    P = P.reshape(P.shape[0], 2, spec.dimension)
    X, Y = P[:, 0], P[:, 1]
    D = Y - X
    n2 = np.sum(D * D, axis=1)
    keep = n2 > 0
    if not keep.any():
        return ConvexityReport(np.inf, True, len(P), len(P), None)
    Gx = spec.gradient_oracle(X[keep])
    Gy = spec.gradient_oracle(Y[keep])
    ratio = np.sum((Gy - Gx) * D[keep], axis=1) / n2[keep]
    k = int(np.argmin(ratio))
    worst = (X[keep][k].tolist(), Y[keep][k].tolist())
    m = float(ratio[k])
    return ConvexityReport(m, m >= -1e-9, len(P), int((~keep).sum()), worst)


def midpoint_axes(domain, resolution):
    """Cell-midpoint coordinates per axis for a box ``domain`` = [(lo, hi), ...]."""
    domain = normalize_domain(domain)
    res = np.broadcast_to(np.asarray(resolution, dtype=int), (len(domain),))
    axes = []
    for (lo, hi), n in zip(domain, res):
        h = (hi - lo) / n
        axes.append(lo + h * (np.arange(n) + 0.5))
    return domain, tuple(int(n) for n in res), axes


def normalize_domain(domain) -> tuple:
    dom = np.asarray(domain, dtype=float)
    if dom.ndim == 1:
        dom = dom.reshape(1, 2)
    if dom.ndim != 2 or dom.shape[1] != 2 or np.any(dom[:, 1] <= dom[:, 0]):
        raise InputError(f"bad domain {domain!r}")
    return tuple((float(a), float(b)) for a, b in dom)


def grid_points(axes) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def boundary_mask(shape) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    for ax in range(len(shape)):
        sl = [slice(None)] * len(shape)
        sl[ax] = 0
        mask[tuple(sl)] = True
        sl[ax] = -1
        mask[tuple(sl)] = True
    return mask


@dataclass
class IntegrabilityReport:
    mass_integral: float
    second_moment_integral: float
    gradient_square_integral: float
    truncation_estimate: float


def integrability_probe(spec: PotentialSpec, domain, resolution, *, raise_on_truncation=True) -> IntegrabilityReport:
    """Midpoint-rule estimates of the integrals of (1, |x|^2, |grad V|^2) against e^{-V}.

    The truncation estimate is the fraction of mass sitting in boundary cells.
    """
    if np.min(resolution) < 64:
        raise InputError("integrability_probe needs resolution >= 64")
    domain, shape, axes = midpoint_axes(domain, resolution)
    if len(domain) != spec.dimension:
        raise InputError("domain dimension does not match the potential")
    X = grid_points(axes)
    cell = np.prod([(hi - lo) / n for (lo, hi), n in zip(domain, shape)])
    V = spec.value_oracle(X)
    if not np.all(np.isfinite(V)):
        raise OracleError("value", "grid")
    dens = np.exp(-V)
    G = spec.gradient_oracle(X)
    mass = float(dens.sum() * cell)
    m2 = float(np.sum(np.sum(X * X, axis=1) * dens) * cell)
    g2 = float(np.sum(np.sum(G * G, axis=1) * dens) * cell)
    bmask = boundary_mask(shape).ravel()
    trunc = float(dens[bmask].sum() / dens.sum())
    report = IntegrabilityReport(mass, m2, g2, trunc)
    if raise_on_truncation and trunc > TAIL_BUDGET:
        raise TruncationWarning(
            f"boundary-cell mass fraction {trunc:.3g} exceeds {TAIL_BUDGET:g} on {domain}; enlarge the domain")
    return report
