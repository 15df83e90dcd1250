import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from til import potentials as pot
from til.errors import InputError, TruncationWarning

FAMILIES = [
    pot.gaussian(),
    pot.gaussian(np.array([[2.0, 0.3], [0.3, 0.5]])),
    pot.quadratic_plus_quartic(1.0, 1.0),
    pot.quadratic_plus_quartic(0.5, 2.0, dimension=2),
    pot.even_power(4),
    pot.even_power(6, dimension=2),
    pot.perturbed(pot.gaussian(), 0.3, 2.0),
]


def test_evaluate_examples():
    v, g, H = pot.evaluate(pot.gaussian(), 2.0)
    assert (v, g[0], H[0, 0]) == (2.0, 2.0, 1.0)
    v, g, H = pot.evaluate(pot.quadratic_plus_quartic(1, 1), 1.0)
    assert np.allclose([v, g[0], H[0, 0]], [0.75, 2.0, 4.0])
    v, g, H = pot.evaluate(pot.gaussian(dimension=2), [1.0, 1.0])
    assert v == pytest.approx(1.0)
    assert np.allclose(g, [1, 1]) and np.allclose(H, np.eye(2))


def test_evaluate_is_pure():
    spec = pot.quadratic_plus_quartic(1, 1)
    a, b = pot.evaluate(spec, 0.7), pot.evaluate(spec, 0.7)
    assert a[0] == b[0] and np.array_equal(a[1], b[1]) and np.array_equal(a[2], b[2])


def test_evaluate_rejects_non_finite():
    with pytest.raises(InputError):
        pot.evaluate(pot.gaussian(), np.nan)


@pytest.mark.parametrize("spec", FAMILIES, ids=lambda s: s.name)
@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_oracles_match_finite_differences(spec, seed):
    x = np.random.default_rng(seed).uniform(-2, 2, spec.dimension)
    step = 1e-4 * (1 + np.abs(x))
    _, g, H = pot.evaluate(spec, x)
    for i in range(spec.dimension):
        e = np.zeros(spec.dimension)
        e[i] = step[i]
        fd_g = (pot.evaluate(spec, x + e)[0] - pot.evaluate(spec, x - e)[0]) / (2 * step[i])
        fd_H = (pot.evaluate(spec, x + e)[1] - pot.evaluate(spec, x - e)[1]) / (2 * step[i])
        assert abs(fd_g - g[i]) <= 1e-5 * max(1.0, abs(g[i]))
        assert np.allclose(fd_H, H[:, i], rtol=1e-5, atol=1e-5)


def test_convexity_probe_gaussian():
    rng = np.random.default_rng(0)
    rep = pot.convexity_probe(pot.gaussian(), rng.uniform(-3, 3, (200, 2)))
    assert rep.passed and rep.min_ratio == pytest.approx(1.0)


def test_convexity_probe_detects_non_convexity():
    # x^2/2 + 2 cos x has V'' = 1 - 2 cos x < 0 near 0
    spec = pot.perturbed(pot.gaussian(), 2.0, 1.0)
    xs = np.linspace(-1, 1, 41)
    pairs = np.stack([xs[:-1], xs[1:]], axis=1)
    rep = pot.convexity_probe(spec, pairs)
    assert not rep.passed and rep.min_ratio < 0
    assert not spec.declared_convex


def test_convexity_probe_skips_coincident_pairs():
    rep = pot.convexity_probe(pot.gaussian(), [[0.5, 0.5]])
    assert rep.passed and rep.n_skipped == 1


@pytest.mark.parametrize("spec", [s for s in FAMILIES if s.declared_convex], ids=lambda s: s.name)
def test_declared_convex_families_pass_probe(spec):
    rng = np.random.default_rng(1)
    rep = pot.convexity_probe(spec, rng.uniform(-4, 4, (1000, 2, spec.dimension)))
    assert rep.passed


def test_integrability_gaussian():
    rep = pot.integrability_probe(pot.gaussian(), [[-10, 10]], 4096)
    assert rep.mass_integral == pytest.approx(np.sqrt(2 * np.pi), abs=1e-6)
    assert rep.gradient_square_integral == pytest.approx(np.sqrt(2 * np.pi), abs=1e-6)


def test_integrability_truncation_warning():
    with pytest.raises(TruncationWarning):
        pot.integrability_probe(pot.gaussian(), [[-1, 1]], 256)


def test_from_config_families():
    assert pot.from_config({"family": "gaussian", "sigma": 2.0}).hessian(0.0)[0, 0, 0] == pytest.approx(0.25)
    q = pot.from_config({"family": "quadratic_plus_quartic", "a": 1, "b": 1})
    assert q.value(1.0)[0] == pytest.approx(0.75)
    p = pot.from_config({"family": "perturbed", "amplitude": 0.3, "frequency": 2.0})
    assert not p.declared_convex
    p = pot.from_config({"family": "perturbed", "amplitude": 0.1, "frequency": 1.0})
    assert p.declared_convex and p.curvature_lower_bound == pytest.approx(0.9)
    with pytest.raises(InputError):
        pot.from_config({"family": "nope"})
