"""Discretized probability measures on uniform tensor grids.

Points are cell midpoints; every integral is the midpoint-rule grid sum.
"""
from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from .errors import AlignmentError, GridError, InputError, PerturbationError, TruncationError
from .potentials import PotentialSpec, grid_points, integrability_probe, midpoint_axes

MASS_LOSS_BUDGET = 1e-10


@dataclass(frozen=True, eq=False)
class GridMeasure:
    domain: tuple          # ((lo, hi), ...) per axis
    shape: tuple           # cells per axis
    weights: np.ndarray    # shape == self.shape, sums to one
    source: str = "synthetic"

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(self.shape)
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InputError("weights must be finite and nonnegative")
        total = w.sum()
        if abs(total - 1.0) > 1e-12:
            raise InputError(f"weights sum to {total!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def dimension(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def spacing(self) -> np.ndarray:
        return np.array([(hi - lo) / n for (lo, hi), n in zip(self.domain, self.shape)])

    @cached_property
    def axes(self) -> tuple:
        return tuple(lo + h * (np.arange(n) + 0.5)
                     for (lo, _), n, h in zip(self.domain, self.shape, self.spacing))

    @cached_property
    def points(self) -> np.ndarray:
        """(size, dimension) array of support points in row-major order."""
        return grid_points(self.axes)

    @property
    def flat_weights(self) -> np.ndarray:
        return self.weights.ravel()

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def same_grid(self, other: "GridMeasure") -> bool:
        return self.shape == other.shape and np.allclose(self.domain, other.domain, rtol=0, atol=1e-12)

    def with_weights(self, weights, source=None) -> "GridMeasure":
        return GridMeasure(self.domain, self.shape, weights, self.source if source is None else source)


def _normalized(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    s = w.sum()
    if not s > 0:
        raise InputError("measure has no mass")
    w = w / s
    # one more pass pins the sum to 1 within a couple of ulps
    return w / w.sum()


def discretize(spec: PotentialSpec, domain, resolution, *, check_truncation=True) -> GridMeasure:
    """Grid version of mu_V: weights proportional to exp(-V) at cell midpoints."""
    if np.min(resolution) < 2:
        raise InputError("resolution must be at least 2 cells per axis")
    domain, shape, axes = midpoint_axes(domain, resolution)
    if len(domain) != spec.dimension:
        raise InputError("domain dimension does not match the potential")
    if check_truncation:
        probe_res = tuple(max(n, 64) for n in shape)
        integrability_probe(spec, domain, probe_res)
    V = spec.value_oracle(grid_points(axes))
    w = np.exp(-(V - V.min()))
    return GridMeasure(domain, shape, _normalized(w).reshape(shape), spec.name)


def from_density(density: Callable[[np.ndarray], np.ndarray], domain, resolution, source="synthetic") -> GridMeasure:
    """Grid measure with weights proportional to ``density`` at cell midpoints."""
    domain, shape, axes = midpoint_axes(domain, resolution)
    w = np.asarray(density(grid_points(axes)), dtype=float)
    return GridMeasure(domain, shape, _normalized(w).reshape(shape), source)


def point_mass(domain, resolution, index) -> GridMeasure:
    domain, shape, _ = midpoint_axes(domain, resolution)
    w = np.zeros(shape)
    w[tuple(np.atleast_1d(index))] = 1.0
    return GridMeasure(domain, shape, w, "synthetic")


def _require_same_grid(a: GridMeasure, b: GridMeasure):
    if not a.same_grid(b):
        raise GridError(f"grid mismatch: {a.shape}/{a.domain} vs {b.shape}/{b.domain}")


def relative_entropy(nu: GridMeasure, mu: GridMeasure) -> float:
    """sum nu_i log(nu_i / mu_i), with 0 log 0 = 0 and +inf if nu is not << mu."""
    _require_same_grid(nu, mu)
    n, m = nu.flat_weights, mu.flat_weights
    pos = n > 0
    if np.any(m[pos] == 0):
        return np.inf
    return float(np.sum(n[pos] * np.log(n[pos] / m[pos])))


def moments(mu: GridMeasure):
    """Mean vector and covariance matrix of the grid measure."""
    X, w = mu.points, mu.flat_weights
    mean = w @ X
    Z = X - mean
    cov = (Z * w[:, None]).T @ Z
    return mean, cov


def translate(mu: GridMeasure, v) -> GridMeasure:
    """Shift mu by a grid-aligned vector v (an integer number of cells per axis)."""
    v = np.broadcast_to(np.asarray(v, dtype=float), (mu.dimension,))
    k = v / mu.spacing
    ki = np.rint(k)
    if np.any(np.abs(k - ki) > 1e-9 * np.maximum(1.0, np.abs(k))):
        raise AlignmentError(f"shift {v.tolist()} is not a multiple of the spacing {mu.spacing.tolist()}")
    ki = ki.astype(int)
    if not ki.any():
        return mu
    src, dst = [], []
    for off, n in zip(ki, mu.shape):
        if abs(off) >= n:
            raise TruncationError("shift moves the whole measure off the grid")
        src.append(slice(max(0, -off), n - max(0, off)))
        dst.append(slice(max(0, off), n - max(0, -off)))
    w = np.zeros(mu.shape)
    w[tuple(dst)] = mu.weights[tuple(src)]
    kept = np.zeros(mu.shape, dtype=bool)
    kept[tuple(src)] = True
    lost = float(mu.weights[~kept].sum())
    if lost > MASS_LOSS_BUDGET:
        raise TruncationError(f"translation pushes mass {lost:.3g} off the grid")
    if lost > 0:
        w = _normalized(w)
    return mu.with_weights(w, f"translate({mu.source})")


class Recentered(NamedTuple):
    measure: GridMeasure
    shift: np.ndarray
    residual: np.ndarray


def recenter(nu: GridMeasure, mu: GridMeasure) -> Recentered:
    """Translate nu by the grid-rounded mean difference so its barycenter matches mu's."""
    _require_same_grid(nu, mu)
    target = moments(mu)[0] - moments(nu)[0]
    v = np.rint(target / nu.spacing) * nu.spacing
    out = translate(nu, v)
    residual = moments(out)[0] - moments(mu)[0]
    return Recentered(out, v, residual)


def dilate(mu: GridMeasure, factor: float) -> GridMeasure:
    """Pushforward of mu under x -> factor * x (factor > 0); the grid is scaled with it."""
    if factor <= 0:
        raise InputError("dilation factor must be positive")
    domain = tuple((lo * factor, hi * factor) for lo, hi in mu.domain)
    return GridMeasure(domain, mu.shape, mu.weights, f"dilate({mu.source},{factor:g})")


# ---------------------------------------------------------------- grid functions


@dataclass(frozen=True, eq=False)
class GridFunction:
    values: np.ndarray                    # shape == grid shape
    spacing: tuple
    gradient_values: np.ndarray | None = None   # shape grid + (d,)

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    @property
    def flat_gradient(self) -> np.ndarray:
        g = self.gradient_values
        if g is None:
            g = _central_gradient(self.values, self.spacing)
        return g.reshape(-1, len(self.spacing))


def _central_gradient(values, spacing) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        return np.gradient(values, spacing[0], edge_order=1)[..., None]
    grads = np.gradient(values, *spacing, edge_order=1)
    return np.stack(grads, axis=-1)


def grid_function(mu: GridMeasure, f, *, gradient=True) -> GridFunction:
    """Sample ``f`` (vectorized over (m, d) points) on mu's grid, with central-difference gradient."""
    vals = np.asarray(f(mu.points), dtype=float).reshape(mu.shape)
    return from_values(mu, vals, gradient=gradient)


def from_values(mu: GridMeasure, values, *, gradient=True) -> GridFunction:
    vals = np.array(values, dtype=float).reshape(mu.shape)
    vals.setflags(write=False)
    sp = tuple(float(h) for h in mu.spacing)
    grad = _central_gradient(vals, sp) if gradient else None
    if grad is not None:
        grad.setflags(write=False)
    return GridFunction(vals, sp, grad)


def _require_fn_on(mu: GridMeasure, g: GridFunction):
    if g.values.shape != mu.shape or not np.allclose(g.spacing, mu.spacing, rtol=0, atol=1e-15):
        raise GridError("grid function does not live on the measure's grid")


def integrate(mu: GridMeasure, g: GridFunction) -> float:
    _require_fn_on(mu, g)
    return float(mu.flat_weights @ g.flat)


def center(mu: GridMeasure, g: GridFunction) -> GridFunction:
    """g minus its mu-mean."""
    c = integrate(mu, g)
    return from_values(mu, g.values - c)


def variance_of(mu: GridMeasure, g: GridFunction) -> float:
    _require_fn_on(mu, g)
    w, v = mu.flat_weights, g.flat
    return float(w @ (v - w @ v) ** 2)


def perturb(mu: GridMeasure, g: GridFunction, eps: float) -> GridMeasure:
    """The measure (1 + eps g) mu for a mu-centered g."""
    _require_fn_on(mu, g)
    w, v = mu.flat_weights, g.flat
    mean = float(w @ v)
    if abs(mean) > 1e-10:
        raise PerturbationError(f"g is not centered under mu (mean {mean:.3g})")
    if eps == 0:
        return mu
    factor = 1.0 + eps * v
    if np.any(factor <= 0):
        raise PerturbationError("1 + eps g must stay positive")
    new = w * factor
    total = new.sum()
    if abs(total - 1.0) > 1e-12 + 1e-10 * abs(eps):
        raise PerturbationError(f"renormalization factor {total!r} too far from 1")
    return mu.with_weights(_normalized(new).reshape(mu.shape), f"perturb({mu.source},{eps:g})")


# ---------------------------------------------------------------- serialization

_MAGIC = b"TILGRID1"


def to_csv(mu: GridMeasure, path) -> None:
    """Header lines (dimension, extents, resolution, source) then one weight per row, row-major."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# dimension={mu.dimension}\n")
        fh.write("# extents=" + ";".join(f"{lo!r},{hi!r}" for lo, hi in mu.domain) + "\n")
        fh.write("# resolution=" + ",".join(str(n) for n in mu.shape) + "\n")
        fh.write(f"# source={mu.source}\n")
        wr = csv.writer(fh)
        wr.writerow(["weight"])
        for x in mu.flat_weights:
            wr.writerow([repr(float(x))])


def from_csv(path) -> GridMeasure:
    header = {}
    weights = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                header[key] = val
            elif line.strip() == "weight":
                continue
            elif line.strip():
                weights.append(float(line))
    dim = int(header["dimension"])
    domain = tuple(tuple(float(t) for t in part.split(",")) for part in header["extents"].split(";"))
    shape = tuple(int(n) for n in header["resolution"].split(","))
    if len(domain) != dim or len(shape) != dim or len(weights) != int(np.prod(shape)):
        raise InputError("corrupt grid measure CSV")
    return GridMeasure(domain, shape, np.array(weights).reshape(shape), header.get("source", "synthetic"))


def to_bytes(mu: GridMeasure) -> bytes:
    src = mu.source.encode()
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<I", mu.dimension))
    for (lo, hi), n in zip(mu.domain, mu.shape):
        buf.write(struct.pack("<ddQ", lo, hi, n))
    buf.write(struct.pack("<I", len(src)))
    buf.write(src)
    buf.write(mu.flat_weights.astype("<f8").tobytes())
    return buf.getvalue()


def from_bytes(data: bytes) -> GridMeasure:
    if data[:8] != _MAGIC:
        raise InputError("not a til grid measure")
    off = 8
    (dim,) = struct.unpack_from("<I", data, off)
    off += 4
    domain, shape = [], []
    for _ in range(dim):
        lo, hi, n = struct.unpack_from("<ddQ", data, off)
        off += 24
        domain.append((lo, hi))
        shape.append(int(n))
    (ls,) = struct.unpack_from("<I", data, off)
    off += 4
    source = data[off:off + ls].decode()
    off += ls
    w = np.frombuffer(data, dtype="<f8", offset=off).astype(float)
    return GridMeasure(tuple(domain), tuple(shape), w.reshape(shape), source)


def save(mu: GridMeasure, path) -> None:
    path = Path(path)
    if path.suffix == ".csv":
        to_csv(mu, path)
    else:
        path.write_bytes(to_bytes(mu))


def load(path) -> GridMeasure:
    path = Path(path)
    if path.suffix == ".csv":
        return from_csv(path)
    return from_bytes(path.read_bytes())
