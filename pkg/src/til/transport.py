"""Optimal transport between grid measures: exact LP, entropic scaling, 1D monotone maps."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.special import logsumexp

from .costs import CostMatrix, CostSpec, bregman, euclidean_p, f_remainder, l1
from .errors import (ConvergenceError, DimensionError, DomainError, InputError, MapDegeneracyError,
                     MarginalError, NumericalError, SizeError)
from .measures import GridMeasure
from .potentials import PotentialSpec

LP_MAX_POINTS = 2000
MARGINAL_TOL = 1e-9

for _var in ("POT_BACKEND_DISABLE_PYTORCH", "POT_BACKEND_DISABLE_JAX",
             "POT_BACKEND_DISABLE_TENSORFLOW", "POT_BACKEND_DISABLE_CUPY"):
    os.environ.setdefault(_var, "1")


@dataclass(eq=False)
class Coupling:
    rows: np.ndarray
    cols: np.ndarray
    mass: np.ndarray
    shape: tuple
    cost_value: float
    solver: str                      # exact_lp | entropic(eps) | monotone_1d
    duality_gap: float | None = None
    marginal_violation: float = 0.0
    certificate: str = ""
    info: dict = field(default_factory=dict)

    @property
    def plan(self) -> sparse.coo_array:
        return sparse.coo_array((self.mass, (self.rows, self.cols)), shape=self.shape)

    def dense(self) -> np.ndarray:
        return self.plan.toarray()

    def marginals(self):
        a = np.bincount(self.rows, self.mass, minlength=self.shape[0])
        b = np.bincount(self.cols, self.mass, minlength=self.shape[1])
        return a, b

    def save(self, path) -> None:
        """Sparse triplet CSV (i, j, mass) plus a JSON sidecar next to it."""
        path = Path(path)
        keep = self.mass > 0
        with open(path, "w") as fh:
            fh.write("i,j,mass\n")
            for i, j, m in zip(self.rows[keep], self.cols[keep], self.mass[keep]):
                fh.write(f"{i},{j},{float(m)!r}\n")
        side = {"cost_value": self.cost_value, "duality_gap": self.duality_gap, "solver": self.solver,
                "shape": list(self.shape), "marginal_violation": self.marginal_violation,
                "certificate": self.certificate}
        path.with_suffix(".json").write_text(json.dumps(side, indent=2, sort_keys=True))


def load_coupling(path) -> Coupling:
    path = Path(path)
    side = json.loads(path.with_suffix(".json").read_text())
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    rows = data[:, 0].astype(int) if len(data) else np.zeros(0, int)
    cols = data[:, 1].astype(int) if len(data) else np.zeros(0, int)
    mass = data[:, 2] if len(data) else np.zeros(0)
    return Coupling(rows, cols, mass, tuple(side["shape"]), side["cost_value"], side["solver"],
                    side["duality_gap"], side["marginal_violation"], side.get("certificate", ""))


# ---------------------------------------------------------------- staircase (north-west corner)


def staircase(a, b):
    """North-west corner basis for sorted 1D supports: a spanning tree of n + m - 1 cells."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n, m = len(a), len(b)
    rows = np.empty(n + m - 1, dtype=np.int64)
    cols = np.empty(n + m - 1, dtype=np.int64)
    mass = np.empty(n + m - 1)
    i = j = 0
    ra, rb = a[0], b[0]
    k = 0
    while True:
        t = ra if ra < rb else rb
        rows[k], cols[k], mass[k] = i, j, t
        k += 1
        ra -= t
        rb -= t
        if i == n - 1 and j == m - 1:
            break
        if i < n - 1 and (ra <= 0 or j == m - 1):
            i += 1
            ra = a[i]
        else:
            j += 1
            rb = b[j]
    return rows[:k], cols[:k], np.maximum(mass[:k], 0.0)


def _tree_duals(rows, cols, cvals, n, m):
    u = np.full(n, np.nan)
    v = np.full(m, np.nan)
    u[rows[0]] = 0.0
    v[cols[0]] = cvals[0]
    for i, j, c in zip(rows[1:], cols[1:], cvals[1:]):
        if np.isnan(u[i]):
            u[i] = c - v[j]
        else:
            v[j] = c - u[i]
    return u, v


def _is_monge_1d(cost: CostSpec | None, X, Y, C=None) -> tuple[bool, str]:
    """Whether the cost matrix on sorted 1D supports has the Monge property."""
    if cost is not None:
        if cost.kind in ("quadratic", "l1") or (cost.kind == "euclidean_p" and cost.p >= 1):
            return True, "monge:convex-difference"
        if cost.kind == "bregman":
            # mixed difference is (V'(x_{i+1}) - V'(x_i)) (y_j - y_{j+1})
            g = cost.potential.gradient_oracle(X)[:, 0]
            ok = bool(np.all(np.diff(g) >= 0))
            return ok, "monge:monotone-gradient" if ok else ""
    if C is not None:
        D = C[:-1, :-1] + C[1:, 1:] - C[:-1, 1:] - C[1:, :-1]
        tol = 1e-12 * (1.0 + np.max(np.abs(C)))
        ok = bool(np.all(D <= tol))
        return ok, "monge:dense-check" if ok else ""
    return False, ""


def _check_masses(a, b):
    if abs(a.sum() - b.sum()) > MARGINAL_TOL:
        raise MarginalError(f"marginal masses differ: {a.sum()!r} vs {b.sum()!r}")


def _solve_staircase(X, a, Y, b, cost: CostSpec | None, C=None, cert="") -> Coupling:
    rows, cols, mass = staircase(a, b)
    if C is not None:
        cvals = C[rows, cols]
    else:
        cvals = cost.pairs(X[rows], Y[cols])
    u, v = _tree_duals(rows, cols, cvals, len(a), len(b))
    primal = float(mass @ cvals)
    dual = float(u @ a + v @ b)
    info = {}
    if C is not None:
        infeas = float(np.max(u[:, None] + v[None, :] - C))
        info["dual_infeasibility"] = max(infeas, 0.0)
        if infeas > 1e-9 * (1 + abs(primal)):
            raise NumericalError(f"staircase duals infeasible by {infeas:.3g}")
        cert += "+dual-feasible"
    cp = Coupling(rows, cols, mass, (len(a), len(b)), primal, "exact_lp", abs(primal - dual),
                  certificate=cert, info=info)
    cp.marginal_violation = _marginal_violation(cp, a, b)
    return cp


def _marginal_violation(cp: Coupling, a, b) -> float:
    ra, rb = cp.marginals()
    return float(max(np.max(np.abs(ra - a)), np.max(np.abs(rb - b))))


def _solve_lp(a, b, C) -> Coupling:
    import ot

    n, m = C.shape
    if max(n, m) > LP_MAX_POINTS:
        raise SizeError(f"LP limited to {LP_MAX_POINTS} points per side, got {n} x {m}")
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float) * (a.sum() / b.sum())
    G, log = ot.emd(a, b, np.ascontiguousarray(C, dtype=float), numItermax=50_000_000, log=True)
    if log.get("warning"):
        raise NumericalError(f"network simplex: {log['warning']}")
    u, v = log["u"], log["v"]
    primal = float(np.sum(G * C))
    dual = float(u @ a + v @ b)
    infeas = float(np.max(u[:, None] + v[None, :] - C))
    gap = abs(primal - dual)
    scale = 1e-9 * (1 + abs(primal))
    if gap > scale or infeas > scale:
        raise NumericalError(f"LP certificate failed: gap {gap:.3g}, dual infeasibility {infeas:.3g}")
    r, c = np.nonzero(G)
    cp = Coupling(r, c, G[r, c], (n, m), primal, "exact_lp", gap, certificate="network-simplex+dual-feasible",
                  info={"dual_infeasibility": max(infeas, 0.0)})
    cp.marginal_violation = _marginal_violation(cp, a, b)
    return cp


def solve_ot_exact(mu: GridMeasure, nu: GridMeasure, C, *, method: str = "auto") -> Coupling:
    """Optimal coupling of mu and nu for the cost C (a CostMatrix or a CostSpec).

    In dimension one, Monge-structured costs are solved on the north-west corner
    basis, whose tree duals certify optimality at any grid size. Everything
    else goes to the network simplex, limited to LP_MAX_POINTS per side.
    """
    a, b = mu.flat_weights, nu.flat_weights
    _check_masses(a, b)
    if isinstance(C, CostMatrix):
        cost, dense = C.cost, C.values
    elif isinstance(C, CostSpec):
        cost, dense = C, None
    else:
        cost, dense = None, np.asarray(C, dtype=float)
    if method not in ("auto", "lp", "monge"):
        raise InputError(f"unknown method {method!r}")
    if method != "lp" and mu.dimension == 1 and nu.dimension == 1:
        ok, cert = _is_monge_1d(cost, mu.points, nu.points, dense)
        if ok:
            return _solve_staircase(mu.points, a, nu.points, b, cost, dense, cert)
        if method == "monge":
            raise InputError("cost is not Monge on these grids")
    if max(mu.size, nu.size) > LP_MAX_POINTS:
        raise SizeError(f"LP limited to {LP_MAX_POINTS} points per side, got {mu.size} x {nu.size}")
    if dense is None:
        dense = cost(mu.points, nu.points)
    return _solve_lp(a, b, dense)


def ot_value(mu: GridMeasure, nu: GridMeasure, cost: CostSpec, **kw) -> float:
    return solve_ot_exact(mu, nu, cost, **kw).cost_value


# ---------------------------------------------------------------- entropic


def solve_ot_entropic(mu: GridMeasure, nu: GridMeasure, C, epsilon: float, max_iter: int = 10_000,
                      tol: float = 1e-9) -> Coupling:
    """Log-domain Sinkhorn scaling. cost_value is <pi, C> of the scaled plan, without entropy."""
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    a, b = mu.flat_weights, nu.flat_weights
    _check_masses(a, b)
    if isinstance(C, CostMatrix):
        C = C.values
    elif isinstance(C, CostSpec):
        C = C(mu.points, nu.points)
    C = np.asarray(C, dtype=float)
    ia, ib = a > 0, b > 0
    Cs = C[np.ix_(ia, ib)]
    la, lb = np.log(a[ia]), np.log(b[ib])
    f = np.zeros(ia.sum())
    g = np.zeros(ib.sum())
    err = np.inf
    for it in range(1, max_iter + 1):
        f = epsilon * (la - logsumexp((g[None, :] - Cs) / epsilon, axis=1))
        g = epsilon * (lb - logsumexp((f[:, None] - Cs) / epsilon, axis=0))
        if it % 10 == 0 or it == max_iter:
            logP = (f[:, None] + g[None, :] - Cs) / epsilon
            err = float(np.abs(np.exp(logsumexp(logP, axis=1)) - a[ia]).sum())
            if err <= tol:
                break
    else:
        raise ConvergenceError(f"Sinkhorn did not converge in {max_iter} iterations (residual {err:.3g})", err)
    P = np.zeros_like(C)
    P[np.ix_(ia, ib)] = np.exp((f[:, None] + g[None, :] - Cs) / epsilon)
    r, c = np.nonzero(P)
    cp = Coupling(r, c, P[r, c], C.shape, float(np.sum(P * C)), f"entropic({epsilon:g})",
                  info={"iterations": it, "dual_value": float(f @ a[ia] + g @ b[ib])})
    cp.marginal_violation = _marginal_violation(cp, a, b)
    return cp


# ---------------------------------------------------------------- one dimension


@dataclass(eq=False)
class MonotoneMap1D:
    points: np.ndarray
    map_values: np.ndarray
    displacement: np.ndarray
    displacement_derivative: np.ndarray   # theta'' = T' - 1
    map_derivative: np.ndarray
    pushforward_w1: float


def monotone_map_1d(mu: GridMeasure, nu: GridMeasure) -> MonotoneMap1D:
    """T = F_nu^{-1} o F_mu on mu's nodes, with nu's CDF inverted piecewise linearly.

    mu's CDF at a node counts half of that node's cell, so T is exactly the monotone
    map between the piecewise-constant densities of the two histograms.
    """
    if mu.dimension != 1 or nu.dimension != 1:
        raise DimensionError("monotone_map_1d is one-dimensional")
    w = mu.flat_weights
    if np.any(w <= 0):
        raise InputError("source measure must have strictly positive weights")
    x = mu.axes[0]
    q = nu.flat_weights
    (lo, hi), hq = nu.domain[0], nu.spacing[0]
    # left CDF below the median, survival function above it, so both tails keep relative precision
    left, kl = _cdf_inverse(w, q, lo, hq)
    right, kr = _cdf_inverse(w[::-1], q[::-1], -hi, hq)
    upper = np.cumsum(w) - w / 2 > 0.5
    T = np.where(upper, -right[::-1], left)
    k = np.where(upper, len(q) - 1 - kr[::-1], kl)
    T = np.maximum.accumulate(T)
    # T is piecewise linear between histograms, with slope rho_mu(x) / rho_nu(T x)
    qk = q[k]
    hm = mu.spacing[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        dT = np.where(qk > 0, (w / hm) / (qk / hq), np.gradient(T, hm, edge_order=1))
    w1 = quantile_cost_1d(T, w, nu.axes[0], q, lambda d: np.abs(d))
    return MonotoneMap1D(x, T, T - x, dT - 1.0, dT, w1)


def _cdf_inverse(w, q, lo, hq):
    t = np.cumsum(w) - w / 2
    cum = np.concatenate([[0.0], np.cumsum(q)])
    t = np.clip(t, 0.0, cum[-1])
    k = np.clip(np.searchsorted(cum, t, side="right") - 1, 0, len(q) - 1)
    qk = q[k]
    frac = np.where(qk > 0, (t - cum[k]) / np.where(qk > 0, qk, 1.0), 0.0)
    return lo + (k + np.clip(frac, 0.0, 1.0)) * hq, k


def quantile_cost_1d(xa, wa, xb, wb, fn) -> float:
    """sum over the monotone coupling of fn(x - y); exact for convex fn of the difference."""
    xa, wa, xb, wb = (np.asarray(v, dtype=float) for v in (xa, wa, xb, wb))
    oa, ob = np.argsort(xa, kind="stable"), np.argsort(xb, kind="stable")
    xa, wa, xb, wb = xa[oa], wa[oa], xb[ob], wb[ob] * (wa.sum() / wb.sum())
    ca, cb = np.cumsum(wa), np.cumsum(wb)
    ca[-1] = cb[-1] = max(ca[-1], cb[-1])
    t = np.union1d(ca, cb)
    dt = np.diff(np.concatenate([[0.0], t]))
    mid = t - dt / 2
    i = np.minimum(np.searchsorted(ca, mid), len(xa) - 1)
    j = np.minimum(np.searchsorted(cb, mid), len(xb) - 1)
    return float(np.sum(dt * fn(xa[i] - xb[j])))


def wasserstein(mu: GridMeasure, nu: GridMeasure, metric=2) -> float:
    """W_1, W_2 (Euclidean) or W_{1,1} (metric="l1")."""
    if metric not in (1, 2, "l1"):
        raise InputError(f"metric must be 1, 2 or 'l1', got {metric!r}")
    p = 1 if metric == "l1" else metric
    if mu.dimension == 1 and nu.dimension == 1:
        val = quantile_cost_1d(mu.axes[0], mu.flat_weights, nu.axes[0], nu.flat_weights,
                               lambda d: np.abs(d) ** p)
    else:
        cost = l1() if metric == "l1" else euclidean_p(p)
        val = solve_ot_exact(mu, nu, cost).cost_value
    return max(val, 0.0) ** (1.0 / p)


@dataclass(eq=False)
class DisplacementRemainder:
    transport_term: float
    remainder_term: float
    excluded_mass: float
    map: MonotoneMap1D


def displacement_remainder_1d(spec: PotentialSpec, mu: GridMeasure, nu: GridMeasure) -> DisplacementRemainder:
    """(sum c_V(x, T x) mu, sum F(theta'') mu) along the monotone map; boundary nodes left out of the second."""
    if spec.dimension != 1:
        raise DimensionError("displacement_remainder_1d is one-dimensional")
    mp = monotone_map_1d(mu, nu)
    w = mu.flat_weights
    x = mp.points[:, None]
    transport = float(w @ bregman(spec).pairs(x, mp.map_values[:, None]))
    d = mp.map_derivative[1:-1]
    if np.any(~(d > 0)):
        bad = int(np.argmin(np.nan_to_num(d, nan=-np.inf))) + 1
        raise MapDegeneracyError(f"theta'' = {mp.displacement_derivative[bad]:.3g} <= -1 at x = {x[bad, 0]:.4g}")
    # F(theta'') = T' - 1 - log T', written in T' so strongly compressive tails keep precision
    remainder = float(w[1:-1] @ np.maximum((d - 1.0) - np.log(d), 0.0))
    return DisplacementRemainder(transport, remainder, float(w[0] + w[-1]), mp)
