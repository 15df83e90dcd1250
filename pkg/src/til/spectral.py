"""Cheeger and Poincare constants of grid measures, and the curvature-integral bound."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal

from .errors import DimensionError, InputError, NumericalError, SingularHessianError, SizeError
from .measures import GridFunction, GridMeasure, integrate
from .potentials import PotentialSpec, grid_points

EIG_RESIDUAL_TOL = 1e-10
DENSE_EIG_MAX = 4096
# conservative envelope for lambda / h^2 over 1D log-concave laws
RATIO_BRACKET = (0.1, 10.0)
HESSIAN_FLOOR = 1e-12


def _support_1d(w):
    """Index range of the positive part of a 1D weight vector; interior zeros disconnect the chain."""
    pos = np.flatnonzero(w > 0)
    lo, hi = pos[0], pos[-1] + 1
    if np.any(w[lo:hi] <= 0):
        raise InputError("support has interior gaps; the Dirichlet form is disconnected")
    return lo, hi


def cheeger_constant(mu: GridMeasure) -> float:
    """min over cell edges of rho(edge) / min(Phi, 1 - Phi), with rho the average of the adjacent cells.

    This is the isoperimetric (median) form of the L1-Poincare constant. The
    mean-centred functional constant lies between half of it and it; the two
    agree for symmetric laws whose extremal sets are half-lines, such as the Gaussian.
    """
    if mu.dimension != 1:
        raise DimensionError("cheeger_constant is only computed in dimension one")
    w = mu.flat_weights
    lo, hi = _support_1d(w)
    w = w[lo:hi]
    if len(w) < 2:
        raise InputError("need at least two cells of support")
    left = np.cumsum(w)[:-1]
    right = np.cumsum(w[::-1])[::-1][1:]
    rho = (w[:-1] + w[1:]) / (2 * mu.spacing[0])
    return float(np.min(rho / np.minimum(left, right)))


def _dirichlet_1d(w, h):
    """Symmetrized tridiagonal form M^{-1/2} L M^{-1/2} of the weighted Dirichlet form."""
    c = (w[:-1] + w[1:]) / (2 * h * h)
    d = np.zeros_like(w)
    d[:-1] += c
    d[1:] += c
    # square roots first: the product of two tail weights can underflow
    q = np.sqrt(w)
    return d / w, -c / (q[:-1] * q[1:])


def _dirichlet_dense(mu: GridMeasure):
    w = mu.weights
    n = w.size
    idx = np.arange(n).reshape(mu.shape)
    L = np.zeros((n, n))
    for ax, h in enumerate(mu.spacing):
        a = np.take(idx, np.arange(mu.shape[ax] - 1), axis=ax).ravel()
        b = np.take(idx, np.arange(1, mu.shape[ax]), axis=ax).ravel()
        c = (w.ravel()[a] + w.ravel()[b]) / (2 * h * h)
        np.add.at(L, (a, a), c)
        np.add.at(L, (b, b), c)
        L[a, b] -= c
        L[b, a] -= c
    s = 1 / np.sqrt(w.ravel())
    return L * s[:, None] * s[None, :]


def poincare_constant(mu: GridMeasure) -> float:
    """Spectral gap of the grid Dirichlet form sum c_e |grad f|^2 against sum w f^2 on mean-zero f."""
    if mu.dimension == 1:
        w = mu.flat_weights
        lo, hi = _support_1d(w)
        w = w[lo:hi]
        d, e = _dirichlet_1d(w, mu.spacing[0])
        try:
            vals, vecs = eigh_tridiagonal(d, e, select="i", select_range=(0, 1))
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"tridiagonal eigensolver failed: {exc}") from exc
        q = np.sqrt(w)
        # the lowest mode must be the constant one, so the second is the gap on mean-zero functions
        if abs(abs(vecs[:, 0] @ q) - 1) > 1e-8 or abs(vals[0]) > 1e-8 * max(1.0, np.max(np.abs(d))):
            raise NumericalError("lowest mode is not the constant function")
        v = vecs[:, 1]
        Sv = d * v
        Sv[:-1] += e * v[1:]
        Sv[1:] += e * v[:-1]
        res = np.max(np.abs(Sv - vals[1] * v))
        if res > EIG_RESIDUAL_TOL * max(1.0, np.max(np.abs(d))):
            raise NumericalError(f"eigen-residual {res:.3g}")
        return float(vals[1])
    if mu.dimension > 2:
        raise DimensionError("poincare_constant supports dimension 1 or 2")
    if mu.size > DENSE_EIG_MAX:
        raise SizeError(f"2D eigenproblem limited to {DENSE_EIG_MAX} cells")
    if np.any(mu.flat_weights <= 0):
        raise InputError("2D Poincare constant needs strictly positive weights")
    S = _dirichlet_dense(mu)
    q = np.sqrt(mu.flat_weights)
    # Householder reflection sending q to e_1 deflates the constant mode exactly
    u = q.copy()
    u[0] += np.sign(q[0]) if q[0] != 0 else 1.0
    u /= np.linalg.norm(u)
    R = np.eye(len(q)) - 2 * np.outer(u, u)
    B = (R @ S @ R)[1:, 1:]
    B = (B + B.T) / 2
    try:
        vals, vecs = eigh(B, subset_by_index=[0, 0])
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    res = np.max(np.abs(B @ vecs[:, 0] - vals[0] * vecs[:, 0]))
    if res > EIG_RESIDUAL_TOL * max(1.0, np.max(np.abs(B))):
        raise NumericalError(f"eigen-residual {res:.3g}")
    return float(vals[0])


def _edge_points(mu: GridMeasure):
    edges = [lo + h * np.arange(n + 1) for (lo, _), n, h in zip(mu.domain, mu.shape, mu.spacing)]
    return grid_points(edges)


def hessian_extremes(spec: PotentialSpec, X):
    ev = np.linalg.eigvalsh(spec.hessian_oracle(X))
    return ev[:, 0], ev[:, -1]


def poincare_curvature_bound(spec: PotentialSpec, mu: GridMeasure) -> float:
    """sum_i mu_i / lambda_min(D^2 V(x_i)); singular Hessians at nodes or cell corners are rejected."""
    lam, _ = hessian_extremes(spec, mu.points)
    corner, _ = hessian_extremes(spec, _edge_points(mu))
    worst = min(lam.min(), corner.min())
    if worst <= HESSIAN_FLOOR:
        raise SingularHessianError(f"lambda_min(D^2 V) = {worst:.3g} on the grid")
    return float(mu.flat_weights @ (1.0 / lam))


def l1_poincare_check(mu: GridMeasure, g: GridFunction, h: float) -> float:
    """int |grad g| dmu - h int |g - int g| dmu."""
    grad = np.sqrt(np.sum(g.flat_gradient ** 2, axis=1))
    dev = np.abs(g.flat - integrate(mu, g))
    w = mu.flat_weights
    return float(w @ grad - h * (w @ dev))


@dataclass
class CheegerEstimate:
    value: float
    lower: float
    upper: float
    method: str


def cheeger_estimate(mu: GridMeasure, spec: PotentialSpec | None = None, poincare: float | None = None) -> CheegerEstimate:
    """h(mu) by the 1D profile, the Gaussian half-space value, or a bracket from lambda."""
    if mu.dimension == 1:
        h = cheeger_constant(mu)
        return CheegerEstimate(h, h, h, "profile_1d")
    if spec is not None and spec.params.get("family") == "gaussian":
        sig = np.sqrt(np.max(np.linalg.eigvalsh(np.asarray(spec.params["cov"]))))
        h = np.sqrt(2 / np.pi) / sig
        return CheegerEstimate(h, h, h, "gaussian_halfspace")
    lam = poincare_constant(mu) if poincare is None else poincare
    lo, hi = np.sqrt(lam / RATIO_BRACKET[1]), np.sqrt(lam / RATIO_BRACKET[0])
    # geometric midpoint of the bracket; both ends are reported
    return CheegerEstimate(float(np.sqrt(lo * hi)), float(lo), float(hi), "poincare_bracket")


@dataclass
class SpectralReport:
    cheeger: float
    poincare: float
    ratio: float
    lower_bound_integral: float | None
    methods: dict = field(default_factory=dict)
    cheeger_bracket: tuple | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, default=float)


def spectral_report(mu: GridMeasure, spec: PotentialSpec | None = None) -> SpectralReport:
    lam = poincare_constant(mu)
    ch = cheeger_estimate(mu, spec, lam)
    integral = None
    methods = {"cheeger": ch.method, "poincare": "dirichlet_eig_1d" if mu.dimension == 1 else "dirichlet_eig_dense"}
    if spec is not None:
        try:
            integral = poincare_curvature_bound(spec, mu)
            methods["lower_bound_integral"] = "quadrature"
        except SingularHessianError:
            methods["lower_bound_integral"] = "singular_hessian"
    return SpectralReport(ch.value, lam, lam / ch.value ** 2, integral, methods, (ch.lower, ch.upper))
