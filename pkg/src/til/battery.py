"""Registry of statement ids and the instance batteries that exercise them."""
from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import harness as hz
from . import potentials as pot
from .config import RunConfig
from .errors import SingularHessianError, TilError
from .measures import GridMeasure, center, discretize, from_density, grid_function, moments, translate

DEFAULT_PARAMS = {
    "n_random": 8,
    "sigma": 1.2,
    "mean_shift": 0.3,
    "v_list": [0.25, -0.25, 0.5, -0.5],
    "eps_list": [0.1, 0.03, 0.01],
    "n_g": 10,
    "n_matrices": 40,
    "n_samples": 100_000,
    "fil_domain": [[-6.0, 6.0], [-6.0, 6.0]],
    "fil_resolution": 32,
    "n_fil": 4,
    "linearization_resolution": 8192,
    "bump_amplitude": 5.0,
}


@dataclass
class Instance:
    spec: pot.PotentialSpec
    mu: GridMeasure
    entry: dict


@dataclass
class Context:
    cfg: RunConfig
    params: dict
    instances: list = field(default_factory=list)

    def rng(self, sid: str) -> np.random.Generator:
        """Per-statement generator derived from (seed, statement id); independent of scheduling."""
        return np.random.default_rng([self.cfg.seed, zlib.crc32(sid.encode())])

    def where(self, pred):
        return [i for i in self.instances if pred(i)]


def build_context(cfg: RunConfig) -> Context:
    params = {**DEFAULT_PARAMS, **cfg.params}
    ctx = Context(cfg, params)
    for entry in cfg.potentials:
        e = dict(entry)
        domain = e.pop("domain", None)
        resolution = e.pop("resolution", None)
        spec = pot.from_config(e)
        if domain is None:
            domain = cfg.domain if len(cfg.domain) == spec.dimension else [cfg.domain[0]] * spec.dimension
        mu = discretize(spec, domain, resolution or cfg.resolution)
        ctx.instances.append(Instance(spec, mu, entry))
    return ctx


# ---------------------------------------------------------------- instance generators


def scale_of(mu: GridMeasure) -> float:
    return float(np.sqrt(np.trace(np.atleast_2d(moments(mu)[1])) / mu.dimension))


def random_mixture(rng: np.random.Generator, mu: GridMeasure, k=(2, 4), label="mixture",
                   centered: bool = False) -> GridMeasure:
    """Gaussian mixture density on mu's grid, sized to mu's spread.

    With centered=True the component means are shifted so that the continuous law has mu's mean;
    the draws are unchanged, so the result is a translate of the uncentered mixture.
    """
    d = mu.dimension
    s = scale_of(mu)
    m0 = moments(mu)[0]
    kk = int(rng.integers(k[0], k[1] + 1))
    means = m0 + rng.uniform(-s, s, (kk, d))
    sig = rng.uniform(0.4 * s, 1.2 * s, (kk, d))
    wts = 0.8 * rng.dirichlet(np.ones(kk)) + 0.2 / kk
    if centered:
        means = means + (m0 - wts @ means)

    def density(X):
        out = np.zeros(len(X))
        for w, m, sg in zip(wts, means, sig):
            out += w * np.exp(-0.5 * np.sum(((X - m) / sg) ** 2, axis=1)) / np.prod(sg)
        return out

    return from_density(density, mu.domain, mu.shape, label)


def dilated_law(spec: pot.PotentialSpec, mu: GridMeasure, sigma: float, shift: float = 0.0) -> GridMeasure:
    """Density proportional to exp(-V((x - shift) / sigma)): N(shift, sigma^2) when V is standard Gaussian."""
    return from_density(lambda X: np.exp(-(spec.value_oracle((X - shift) / sigma)
                                           - spec.value_oracle(np.zeros((1, spec.dimension)))[0])),
                        mu.domain, mu.shape, f"dilated({spec.name},{sigma:g},{shift:g})")


def random_smooth(rng: np.random.Generator, d: int, n_terms: int = 3):
    a = rng.normal(0, 1, n_terms)
    b = rng.uniform(0.3, 2.0, (n_terms, d))
    ph = rng.uniform(0, 2 * np.pi, n_terms)
    return lambda X: np.sin(X @ b.T + ph) @ a


def bump(t):
    out = np.zeros_like(t)
    m = np.abs(t) < 1
    out[m] = np.exp(-1 / (1 - t[m] ** 2))
    return out


def _tagged(report, **tags):
    report.inputs.update(tags)
    return report


# ---------------------------------------------------------------- runners


def run_prop1(ctx: Context):
    rng = ctx.rng("prop1")
    out = []
    for inst in ctx.instances:
        nus = [dilated_law(inst.spec, inst.mu, ctx.params["sigma"])]
        nus += [random_mixture(rng, inst.mu) for _ in range(ctx.params["n_random"])]
        out += [_tagged(hz.check_transport_entropy(inst.spec, inst.mu, nu), instance=k) for k, nu in enumerate(nus)]
    return out


def run_thm2(ctx: Context):
    rng = ctx.rng("thm2")
    out = []
    for inst in ctx.instances:
        nus = [dilated_law(inst.spec, inst.mu, ctx.params["sigma"])]
        nus += [random_mixture(rng, inst.mu, centered=True) for _ in range(ctx.params["n_random"])]
        for k, nu in enumerate(nus):
            out.append(_tagged(hz.check_remainder(inst.spec, inst.mu, nu, ctx.cfg.c_scan), instance=k))
    return out


def run_mainbound(ctx: Context):
    rng = ctx.rng("mainbound")
    out = []
    for inst in ctx.where(lambda i: i.spec.dimension == 1):
        p = ctx.params
        nus = [dilated_law(inst.spec, inst.mu, p["sigma"], p["mean_shift"])]
        nus += [random_mixture(rng, inst.mu) for _ in range(p["n_random"])]
        out += [_tagged(hz.check_mainbound_identity_1d(inst.spec, inst.mu, nu), instance=k) for k, nu in enumerate(nus)]
    return out


def run_translation(ctx: Context):
    out = []
    for inst in ctx.instances:
        nu = dilated_law(inst.spec, inst.mu, ctx.params["sigma"])
        v = [np.full(inst.spec.dimension, x) for x in ctx.params["v_list"]]
        out.append(hz.check_translation_invariance(inst.spec, inst.mu, nu, v))
    return out


def run_ic(ctx: Context):
    rng = ctx.rng("ic")
    out = []
    for inst in ctx.instances:
        for k in range(ctx.params["n_g"]):
            g = random_smooth(rng, inst.spec.dimension)
            out.append(_tagged(hz.check_dual_infconv(inst.spec, inst.mu, g), instance=k))
    return out


def _curved(i):
    return i.spec.declared_convex and (i.spec.curvature_lower_bound or 0) > 0


def run_talagrand(ctx: Context):
    rng = ctx.rng("talagrand")
    out = []
    for inst in ctx.where(_curved):
        lam = inst.spec.curvature_lower_bound
        nus = [translate(inst.mu, np.full(inst.spec.dimension, v)) for v in ctx.params["v_list"]]
        nus.append(dilated_law(inst.spec, inst.mu, ctx.params["sigma"]))
        nus += [random_mixture(rng, inst.mu) for _ in range(ctx.params["n_random"])]
        out += [_tagged(hz.check_talagrand(inst.spec, inst.mu, nu, lam), instance=k) for k, nu in enumerate(nus)]
    return out


def run_qT(ctx: Context):
    rng = ctx.rng("qT")
    out = []
    for inst in ctx.where(_curved):
        lam = inst.spec.curvature_lower_bound
        nus = [dilated_law(inst.spec, inst.mu, ctx.params["sigma"])]
        nus += [random_mixture(rng, inst.mu, centered=True) for _ in range(ctx.params["n_random"])]
        out += [_tagged(hz.check_gaussian_remainder(inst.spec, inst.mu, nu, lam), instance=k)
                for k, nu in enumerate(nus)]
    return out


def run_fil(ctx: Context):
    rng = ctx.rng("fil")
    spec = pot.gaussian(dimension=2)
    mu = discretize(spec, ctx.params["fil_domain"], ctx.params["fil_resolution"])
    nus = [dilated_law(spec, mu, ctx.params["sigma"])]
    nus += [random_mixture(rng, mu) for _ in range(ctx.params["n_fil"])]
    return [_tagged(hz.check_fil(spec, mu, nu), instance=k) for k, nu in enumerate(nus)]


def _bl_functions(inst: Instance, rng):
    spec = inst.spec
    v0 = np.ones(spec.dimension)
    return [("extremizer", lambda X: spec.gradient_oracle(X) @ v0 + 0.5),
            ("square", lambda X: np.sum(X * X, axis=1)),
            ("random", random_smooth(rng, spec.dimension))]


def _positive_hessian(i):
    if not i.spec.declared_convex:
        return False
    try:
        hz.hessians(i.spec, i.mu)
        return True
    except SingularHessianError:
        return False


def run_bl(ctx: Context):
    rng = ctx.rng("bl")
    out = []
    for inst in ctx.where(_positive_hessian):
        for name, g in _bl_functions(inst, rng):
            out.append(_tagged(hz.check_bl_variance(inst.spec, inst.mu, g), g=name))
    return out


def run_rbl(ctx: Context):
    rng = ctx.rng("rbl")
    out = []
    for inst in ctx.where(_positive_hessian):
        for name, g in _bl_functions(inst, rng)[1:]:
            out.append(_tagged(hz.check_rbl(inst.spec, inst.mu, g), g=name))
    return out


def run_qbl(ctx: Context):
    rng = ctx.rng("qbl")
    out = []
    for inst in ctx.where(_positive_hessian):
        for name, g in _bl_functions(inst, rng):
            out.append(_tagged(hz.check_qbl(inst.spec, inst.mu, g), g=name))
    return out


def linearization_functions(amplitude: float):
    return [("odd", lambda X: amplitude * X[:, 0] * bump(X[:, 0] / 2)),
            ("even", lambda X: amplitude * (X[:, 0] ** 2 - 1) * bump(X[:, 0] / 2))]


def run_approx(ctx: Context):
    out = []
    p = ctx.params
    for inst in ctx.where(lambda i: i.spec.dimension == 1 and _positive_hessian(i)):
        mu = discretize(inst.spec, inst.mu.domain, p["linearization_resolution"])
        for name, f in linearization_functions(p["bump_amplitude"]):
            g = center(mu, grid_function(mu, f))
            out.append(_tagged(hz.check_linearization(inst.spec, mu, g, p["eps_list"]), g=name))
    return out


def run_bh(ctx: Context):
    rng = ctx.rng("bh")
    out = []
    for inst in ctx.where(lambda i: i.spec.dimension == 1):
        fs = [("identity", lambda X: X[:, 0]), ("step", lambda X: np.tanh(X[:, 0] / 0.2))]
        fs += [(f"random{k}", random_smooth(rng, 1)) for k in range(3)]
        for name, f in fs:
            out.append(_tagged(hz.check_bh(inst.mu, f), f=name, potential=inst.spec.name))
    return out


def run_affine(ctx: Context):
    out = []
    for inst in ctx.where(_positive_hessian):
        d = inst.spec.dimension
        if d == 1:
            M = [[2.0]]
        else:
            th = np.pi / 6
            M = np.eye(d)
            M[:2, :2] = [[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]]
        out.append(hz.check_affine_invariance(inst.spec, inst.mu, lambda X: np.sum(X * X, axis=1) + X[:, 0], M))
    return out


def run_equality(ctx: Context):
    out = []
    for inst in ctx.instances:
        cands = [inst.mu]
        for v in ctx.params["v_list"]:
            try:
                cands.append(translate(inst.mu, np.full(inst.spec.dimension, v)))
            except TilError:
                pass
        cands.append(dilated_law(inst.spec, inst.mu, ctx.params["sigma"]))
        out.append(hz.check_equality_characterization(inst.spec, inst.mu, cands))
    return out


def run_trace(ctx: Context):
    rng = ctx.rng("trace")
    mats = [hz.random_symmetric(rng, int(rng.integers(2, 9))) for _ in range(ctx.params["n_matrices"])]
    return [hz.check_trace(mats, ctx.params["n_samples"], ctx.cfg.seed)]


def run_spectral(ctx: Context):
    ones = [i.mu for i in ctx.where(lambda i: i.spec.dimension == 1 and i.spec.declared_convex)]
    return [hz.check_spectral_bracket(ones)] if ones else []


def run_poincare_bound(ctx: Context):
    out = []
    for inst in ctx.instances:
        try:
            out.append(hz.check_curvature_bound(inst.spec, inst.mu))
        except SingularHessianError:
            continue
    return out


def run_scalar(ctx: Context):
    return hz.scalar_inequality_suite()


def run_negative_control(ctx: Context):
    return [hz.negative_control()]


REGISTRY = {
    "prop1": run_prop1,
    "thm2": run_thm2,
    "mainbound": run_mainbound,
    "translation": run_translation,
    "ic": run_ic,
    "talagrand": run_talagrand,
    "qT": run_qT,
    "fil": run_fil,
    "bl": run_bl,
    "rbl": run_rbl,
    "qbl": run_qbl,
    "approx": run_approx,
    "bh": run_bh,
    "affine": run_affine,
    "equality": run_equality,
    "trace": run_trace,
    "spectral": run_spectral,
    "poincare_bound": run_poincare_bound,
    "scalar": run_scalar,
    "negative_control": run_negative_control,
}
# the scalar suite and the negative control are opt-in
DEFAULT_BATTERY = [k for k in REGISTRY if k not in ("scalar", "negative_control")]


def expand(battery) -> list:
    out = []
    for b in battery:
        for sid in (DEFAULT_BATTERY if b == "default" else [b]):
            if sid not in out:
                out.append(sid)
    return out


@dataclass
class BatteryResult:
    reports: list
    errors: dict

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.reports)


def worker_count(n_jobs: int) -> int:
    cap = os.environ.get("TIL_THREADS")
    n = os.cpu_count() or 1
    if cap:
        n = max(1, int(cap))
    return max(1, min(n, n_jobs))


def run_battery(cfg: RunConfig, ctx: Context | None = None) -> BatteryResult:
    """Run every statement of the battery in a thread pool; reports come back in registry order."""
    ids = expand(cfg.battery)
    ctx = build_context(cfg) if ctx is None else ctx

    def job(sid):
        try:
            return sid, REGISTRY[sid](ctx), None
        except Exception as exc:
            return sid, [], f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=worker_count(len(ids))) as pool:
        results = list(pool.map(job, ids))
    order = {sid: k for k, sid in enumerate(REGISTRY)}
    results.sort(key=lambda r: order[r[0]])
    reports = [rep for _, reps, _ in results for rep in reps]
    errors = {sid: err for sid, _, err in results if err}
    return BatteryResult(reports, errors)
