import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from til import costs as C
from til import potentials as pot
from til import transport as T
from til.battery import random_mixture
from til.errors import DomainError, SizeError
from til.measures import GridMeasure, discretize, point_mass, relative_entropy, translate

GAUSS = pot.gaussian()
QUARTIC = pot.quadratic_plus_quartic(1.0, 1.0)


@pytest.fixture(scope="module")
def gamma():
    return discretize(GAUSS, [[-8, 8]], 1024)


def _random_pair(seed, n=40):
    rng = np.random.default_rng(seed)
    mu = GridMeasure(((-3.0, 3.0),), (n,), rng.dirichlet(np.ones(n)))
    nu = GridMeasure(((-3.0, 3.0),), (n,), rng.dirichlet(np.ones(n)))
    return mu, nu


def test_self_transport_is_free(gamma):
    assert T.solve_ot_exact(gamma, gamma, C.bregman(GAUSS)).cost_value == pytest.approx(0, abs=1e-15)
    mu = discretize(QUARTIC, [[-4, 4]], 300)
    cp = T.solve_ot_exact(mu, mu, C.bregman(QUARTIC), method="lp")
    assert cp.cost_value == pytest.approx(0, abs=1e-12)


def test_two_point_masses():
    a = point_mass([[0, 1]], 2, 0)
    b = point_mass([[0, 1]], 2, 1)
    cp = T.solve_ot_exact(a, b, C.quadratic(1.0))
    assert cp.cost_value == pytest.approx(0.125)      # cell midpoints 0.25 and 0.75
    a = point_mass([[-0.5, 1.5]], 2, 0)
    b = point_mass([[-0.5, 1.5]], 2, 1)
    assert T.solve_ot_exact(a, b, C.quadratic(1.0)).cost_value == pytest.approx(0.5)
    ent = T.solve_ot_entropic(a, b, C.quadratic(1.0), 1e-3)
    assert ent.cost_value == pytest.approx(0.5, abs=5e-3)


def test_translate_quadratic_value(gamma):
    nu = translate(gamma, [0.5])
    assert T.solve_ot_exact(gamma, nu, C.quadratic(1.0)).cost_value == pytest.approx(0.125, abs=1e-3)
    assert T.wasserstein(gamma, nu, 2) == pytest.approx(0.5, abs=1e-3)
    for metric in (1, 2, "l1"):
        assert T.wasserstein(gamma, gamma, metric) == 0.0


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_staircase_matches_lp(seed):
    mu, nu = _random_pair(seed)
    for cost in (C.quadratic(1.0), C.bregman(QUARTIC), C.euclidean_p(1.0)):
        fast = T.solve_ot_exact(mu, nu, cost)
        lp = T.solve_ot_exact(mu, nu, cost, method="lp")
        assert fast.certificate.startswith("monge") and lp.certificate.startswith("network-simplex")
        assert fast.cost_value == pytest.approx(lp.cost_value, rel=1e-9, abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_lp_certificate_and_marginals(seed):
    mu, nu = _random_pair(seed)
    cp = T.solve_ot_exact(mu, nu, C.capped(0.8))
    a, b = cp.marginals()
    assert np.allclose(a, mu.flat_weights, atol=1e-12) and np.allclose(b, nu.flat_weights, atol=1e-12)
    assert abs(cp.duality_gap) <= 1e-9


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_cost_superadditivity(seed):
    mu, nu = _random_pair(seed, 30)
    c1, c2 = C.bregman(QUARTIC), C.capped(0.7)
    M = c1(mu.points, nu.points) + c2(mu.points, nu.points)
    total = T.solve_ot_exact(mu, nu, M).cost_value
    assert total >= T.ot_value(mu, nu, c1) + T.ot_value(mu, nu, c2) - 1e-12


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_jensen_step(seed):
    mu, nu = _random_pair(seed, 30)
    M = C.f_remainder(np.abs(mu.points - nu.points.T))
    assert T.solve_ot_exact(mu, nu, M).cost_value >= C.f_remainder(T.wasserstein(mu, nu, 1)) - 1e-12


def test_exact_below_monotone_plan(gamma):
    nu = random_mixture(np.random.default_rng(5), gamma)
    mp = T.monotone_map_1d(gamma, nu)
    along_map = float(gamma.flat_weights @ C.bregman(GAUSS).pairs(mp.points[:, None], mp.map_values[:, None]))
    assert T.ot_value(gamma, nu, C.bregman(GAUSS)) <= along_map + 1e-4


def test_entropic_trend_and_errors():
    mu = discretize(GAUSS, [[-6, 6]], 120)
    nu = random_mixture(np.random.default_rng(1), mu)
    cost = C.quadratic(1.0)
    exact = T.ot_value(mu, nu, cost)
    vals = [T.solve_ot_entropic(mu, nu, cost, e, max_iter=200_000, tol=1e-7).cost_value for e in (1e-1, 1e-2, 1e-3)]
    gaps = [v - exact for v in vals]
    assert gaps[0] > gaps[1] > gaps[2] >= -1e-9
    with pytest.raises(DomainError):
        T.solve_ot_entropic(mu, nu, cost, 0.0)
    same = [T.solve_ot_entropic(mu, mu, cost, e).cost_value for e in (1e-1, 1e-2)]
    assert same[1] < same[0]


def test_lp_size_limit():
    mu = discretize(GAUSS, [[-8, 8]], 2048)
    with pytest.raises(SizeError):
        T.solve_ot_exact(mu, mu, C.capped(0.8))


def test_monotone_map_examples(gamma):
    same = T.monotone_map_1d(gamma, gamma)
    assert np.allclose(same.map_values, gamma.axes[0], atol=1e-9)
    assert np.allclose(same.displacement_derivative[1:-1], 0, atol=1e-9)
    shifted = T.monotone_map_1d(gamma, translate(gamma, [0.5]))
    inner = np.abs(gamma.axes[0]) < 6
    assert np.allclose(shifted.map_values[inner], gamma.axes[0][inner] + 0.5, atol=gamma.spacing[0])
    nu = discretize(pot.gaussian(1.44), [[-8, 8]], 1024)
    dil = T.monotone_map_1d(gamma, nu)
    inner = np.abs(gamma.axes[0]) < 5
    assert np.allclose(dil.map_values[inner], 1.2 * gamma.axes[0][inner], atol=2 * gamma.spacing[0])


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_quantile_w2_matches_lp(seed):
    mu = discretize(GAUSS, [[-6, 6]], 200)
    nu = random_mixture(np.random.default_rng(seed), mu)
    lp = np.sqrt(T.solve_ot_exact(mu, nu, C.euclidean_p(2.0), method="lp").cost_value)
    assert abs(T.wasserstein(mu, nu, 2) - lp) <= 1e-6 + 2 * mu.spacing[0]


def test_displacement_remainder_examples(gamma):
    dr = T.displacement_remainder_1d(GAUSS, gamma, gamma)
    assert dr.transport_term == pytest.approx(0, abs=1e-12) and dr.remainder_term == pytest.approx(0, abs=1e-12)
    nu = translate(gamma, [0.5])
    dr = T.displacement_remainder_1d(GAUSS, gamma, nu)
    assert dr.transport_term == pytest.approx(0.125, abs=1e-3)
    assert dr.remainder_term <= 1e-6
    assert dr.transport_term + dr.remainder_term == pytest.approx(relative_entropy(nu, gamma), abs=1e-3)


def test_coupling_roundtrip(tmp_path):
    mu, nu = _random_pair(3, 20)
    cp = T.solve_ot_exact(mu, nu, C.capped(0.5))
    cp.save(tmp_path / "plan.csv")
    back = T.load_coupling(tmp_path / "plan.csv")
    assert back.cost_value == cp.cost_value and back.solver == cp.solver
    assert np.allclose(back.dense(), cp.dense(), rtol=0, atol=0)
