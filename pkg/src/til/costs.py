"""Transport costs: the Bregman cost of a potential, the capped quadratic N, and friends."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InputError, SizeError
from .measures import GridFunction, GridMeasure, from_values
from .potentials import PotentialSpec

MAX_DENSE_ENTRIES = 4 * 10**7


# ---------------------------------------------------------------- scalar companions


def f_remainder(t):
    """F(t) = t - log(1 + t) for t > -1."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= -1) or np.any(np.isnan(t)):
        raise DomainError("F(t) = t - log(1+t) needs t > -1")
    out = t - np.log1p(t)
    return float(out) if out.ndim == 0 else out


def f_remainder_prime(t):
    t = np.asarray(t, dtype=float)
    return t / (1 + t)


def capped_quadratic(t):
    """N(t) = min(t^2, t) for t >= 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("N(t) = min(t^2, t) needs t >= 0")
    out = np.minimum(t * t, t)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- cost specs


@dataclass(frozen=True)
class CostSpec:
    """kind is one of bregman, capped_quadratic, combined, quadratic, l1, euclidean_p."""
    kind: str
    potential: PotentialSpec | None = None
    scale: float = 1.0       # h for capped_quadratic / combined, lambda for quadratic
    weight: float = 0.0      # the constant c of the combined cost
    p: float = 1.0
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in {"bregman", "capped_quadratic", "combined", "quadratic", "l1", "euclidean_p"}:
            raise InputError(f"unknown cost kind {self.kind!r}")
        if self.kind in {"bregman", "combined"} and self.potential is None:
            raise InputError(f"{self.kind} cost needs a potential")

    def __call__(self, X, Y) -> np.ndarray:
        """Dense cost matrix between point arrays X (m, d) and Y (k, d)."""
        return _evaluate(self, np.atleast_2d(X), np.atleast_2d(Y), pairwise=False)

    def pairs(self, X, Y) -> np.ndarray:
        """Cost of matched pairs c(X[i], Y[i])."""
        return _evaluate(self, np.atleast_2d(X), np.atleast_2d(Y), pairwise=True)


def bregman(spec: PotentialSpec) -> CostSpec:
    return CostSpec("bregman", spec, label=f"c_V[{spec.name}]")


def quadratic(lam: float = 1.0) -> CostSpec:
    return CostSpec("quadratic", scale=float(lam), label=f"{lam:g}|x-y|^2/2")


def capped(h: float) -> CostSpec:
    return CostSpec("capped_quadratic", scale=float(h), label=f"N({h:g}|x-y|)")


def combined(spec: PotentialSpec, h: float, c: float) -> CostSpec:
    return CostSpec("combined", spec, scale=float(h), weight=float(c), label=f"c_V+{c:g}N({h:g}|x-y|)")


def l1() -> CostSpec:
    return CostSpec("l1", label="||x-y||_1")


def euclidean_p(p: float) -> CostSpec:
    return CostSpec("euclidean_p", p=float(p), label=f"|x-y|^{p:g}")


def _dist(X, Y, pairwise):
    if pairwise:
        D = X - Y
        return np.sqrt(np.sum(D * D, axis=-1))
    if X.shape[1] == 1:
        return np.abs(X[:, 0][:, None] - Y[:, 0][None, :])
    out = np.zeros((X.shape[0], Y.shape[0]))
    for k in range(X.shape[1]):
        out += (X[:, k][:, None] - Y[:, k][None, :]) ** 2
    return np.sqrt(out)


def _bregman(V: PotentialSpec, X, Y, pairwise):
    vx, gx = V.value_oracle(X), V.gradient_oracle(X)
    vy = V.value_oracle(Y)
    if pairwise:
        return vy - vx - np.sum(gx * (Y - X), axis=1)
    return vy[None, :] - (vx - np.sum(gx * X, axis=1))[:, None] - gx @ Y.T


def _evaluate(cost: CostSpec, X, Y, pairwise):
    k = cost.kind
    if k == "bregman":
        return _bregman(cost.potential, X, Y, pairwise)
    if k == "quadratic":
        d = _dist(X, Y, pairwise)
        return cost.scale * d * d / 2
    if k == "capped_quadratic":
        return capped_quadratic(cost.scale * _dist(X, Y, pairwise))
    if k == "combined":
        return _bregman(cost.potential, X, Y, pairwise) + cost.weight * capped_quadratic(cost.scale * _dist(X, Y, pairwise))
    if k == "l1":
        if pairwise:
            return np.sum(np.abs(X - Y), axis=1)
        return np.sum(np.abs(X[:, None, :] - Y[None, :, :]), axis=-1)
    if k == "euclidean_p":
        return _dist(X, Y, pairwise) ** cost.p
    raise InputError(k)


def cost_from_config(cfg: dict, potential: PotentialSpec | None = None, h_auto=None) -> CostSpec:
    """e.g. {cost = "combined", c = 0.05, h = "auto"}; "auto" calls ``h_auto()``."""
    kind = cfg.get("cost", cfg.get("kind"))
    h = cfg.get("h", 1.0)
    if h == "auto":
        if h_auto is None:
            raise InputError("h = 'auto' needs a Cheeger estimate")
        h = h_auto()
    if kind == "bregman":
        return bregman(potential)
    if kind == "combined":
        return combined(potential, float(h), float(cfg.get("c", 0.0)))
    if kind == "capped_quadratic":
        return capped(float(h))
    if kind == "quadratic":
        return quadratic(float(cfg.get("lambda", 1.0)))
    if kind == "l1":
        return l1()
    if kind == "euclidean_p":
        return euclidean_p(float(cfg.get("p", 1.0)))
    raise InputError(f"unknown cost {kind!r}")


# ---------------------------------------------------------------- matrices


@dataclass(frozen=True, eq=False)
class CostMatrix:
    values: np.ndarray
    source: GridMeasure
    target: GridMeasure
    cost: CostSpec | None = None


def bregman_cost(spec: PotentialSpec, x, y) -> float:
    """c_V(x, y) = V(y) - V(x) - grad V(x).(y - x)."""
    X = np.asarray(x, float).reshape(1, spec.dimension)
    Y = np.asarray(y, float).reshape(1, spec.dimension)
    return float(_bregman(spec, X, Y, pairwise=True)[0])


def cost_matrix(cost: CostSpec, source: GridMeasure, target: GridMeasure) -> CostMatrix:
    n = source.size * target.size
    if n > MAX_DENSE_ENTRIES:
        raise SizeError(f"{n} cost entries exceed the dense budget {MAX_DENSE_ENTRIES}; "
                        "use the entropic solver or lazy row evaluation")
    C = cost(source.points, target.points)
    if not np.all(np.isfinite(C)):
        raise InputError("cost matrix has non-finite entries")
    C.setflags(write=False)
    return CostMatrix(C, source, target, cost)


def cost_rows(cost: CostSpec, X, Y, chunk_entries: int = 2**22):
    """Yield (row_slice, block) of the cost matrix without materializing it."""
    step = max(1, chunk_entries // max(1, len(Y)))
    for i in range(0, len(X), step):
        yield slice(i, i + step), cost(X[i:i + step], Y)


def inf_convolution(g: GridFunction, cost: CostSpec, grid: GridMeasure) -> GridFunction:
    """Q_c(g)(y) = min_x {g(x) + c(x, y)} by exhaustive minimization over grid points."""
    gv = g.flat
    if not np.all(np.isfinite(gv)):
        raise InputError("g must be finite on the grid")
    X = grid.points
    Q = np.full(len(X), np.inf)
    # blocks run over targets so each min is over all sources
    for sl, block in cost_rows(cost, X, X):
        Q = np.minimum(Q, np.min(gv[sl, None] + block, axis=0))
    return from_values(grid, Q.reshape(grid.shape))
