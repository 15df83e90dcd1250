"""Empirical constants along one-parameter families.

thm2: smallest admissible c in H - W_cV >= c W_N for Gaussian dilations N(0, sigma^2).
spectral: lambda / h^2 for the quadratic-plus-quartic family as the quartic weight grows.
"""
import argparse
from dataclasses import dataclass, field

from til import harness as hz
from til import potentials as pot
from til import spectral
from til.battery import dilated_law
from til.measures import discretize


@dataclass
class Study:
    sigmas: list = field(default_factory=lambda: [0.6, 0.8, 0.9, 1.1, 1.25, 1.5, 2.0])
    quartic_weights: list = field(default_factory=lambda: [0.0, 0.1, 0.5, 1.0, 5.0, 25.0])
    lp_cells: int = 640
    spectral_cells: int = 2048


def thm2_rows(cfg: Study):
    spec = pot.gaussian()
    mu = discretize(spec, [[-10.0, 10.0]], cfg.lp_cells)
    for s in cfg.sigmas:
        r = hz.check_remainder(spec, mu, dilated_law(spec, mu, s))
        yield s, r.empirical_constant, r.details["W_N"]


def spectral_rows(cfg: Study):
    for b in cfg.quartic_weights:
        spec = pot.quadratic_plus_quartic(1.0, b)
        mu = discretize(spec, [[-8.0, 8.0]], cfg.spectral_cells)
        lam, h = spectral.poincare_constant(mu), spectral.cheeger_constant(mu)
        yield b, lam, h, lam / h ** 2


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lp-cells", type=int, default=Study.lp_cells)
    a = ap.parse_args()
    cfg = Study(lp_cells=a.lp_cells)
    print(f"{'sigma':>6} {'c':>8} {'W_N':>10}")
    for s, c, wn in thm2_rows(cfg):
        print(f"{s:>6.2f} {c:>8.4f} {wn:>10.3e}")
    print(f"\n{'b':>6} {'lambda':>8} {'h':>8} {'lambda/h^2':>11}")
    for b, lam, h, r in spectral_rows(cfg):
        print(f"{b:>6.1f} {lam:>8.4f} {h:>8.4f} {r:>11.4f}")


if __name__ == "__main__":
    main()
