import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from til import costs as C
from til import potentials as pot
from til.errors import DomainError, InputError
from til.measures import discretize, from_values, grid_function

GAUSS = pot.gaussian()
S = np.linspace(0, 100, 10_001)


def test_bregman_examples():
    assert C.bregman_cost(GAUSS, 1.0, 3.0) == pytest.approx(2.0)
    assert C.bregman_cost(pot.quadratic_plus_quartic(0, 1), 1.0, 2.0) == pytest.approx(2.75)
    q = pot.quadratic_plus_quartic(1, 1)
    assert C.bregman_cost(q, 0.7, 0.7) == 0.0


def test_f_remainder_examples():
    assert C.f_remainder(0.0) == 0.0
    assert C.f_remainder(1.0) == pytest.approx(0.306853, abs=1e-6)
    assert C.f_remainder(-0.5) == pytest.approx(0.193147, abs=1e-6)
    with pytest.raises(DomainError):
        C.f_remainder(-1.0)


def test_capped_quadratic_examples():
    assert [C.capped_quadratic(t) for t in (0.5, 2.0, 1.0)] == [0.25, 2.0, 1.0]
    with pytest.raises(DomainError):
        C.capped_quadratic(-0.1)


def test_sandwich():
    F, N = C.f_remainder(S), C.capped_quadratic(S)
    assert np.all(N / 4 <= F + 1e-15) and np.all(F <= N + 1e-15)


def test_power_commutation():
    F = C.f_remainder
    assert np.all(F(np.sqrt(S)) <= np.sqrt(F(S)) + 1e-15)
    assert np.all(np.sqrt(F(S)) <= 2 * F(np.sqrt(S)) + 1e-15)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1e3), min_size=1, max_size=16))
def test_family_bound(s):
    s = np.array(s)
    assert C.f_remainder(s).sum() >= C.f_remainder(np.sqrt(np.sum(s * s))) / 4 - 1e-12


def test_derivative_and_doubling():
    F, Fp = C.f_remainder(S), C.f_remainder_prime(S)
    assert np.all(Fp ** 2 <= 4 * F + 1e-15)
    assert np.all(C.f_remainder(2 * S) <= 4 * F + 1e-12)
    # 4F - F'^2 is nondecreasing
    assert np.all(np.diff(4 * F - Fp ** 2) >= -1e-12)


def test_legendre_bound_with_quarter():
    s, t = np.meshgrid(np.linspace(0, 100, 1001), np.linspace(0, 1, 101))
    assert np.all(s * t <= 4 * C.f_remainder(s) + t * t / 4 + 1e-12)


def test_cost_matrix_quadratic_symmetric():
    mu = discretize(GAUSS, [[-3, 3]], 3, check_truncation=False)
    M = C.cost_matrix(C.quadratic(1.0), mu, mu).values
    assert np.allclose(M, M.T) and np.all(np.diag(M) == 0)


@settings(max_examples=20, deadline=None)
@given(c1=st.floats(0, 2), c2=st.floats(0, 2))
def test_combined_cost_is_monotone_in_c(c1, c2):
    X = np.linspace(-3, 3, 13)[:, None]
    lo, hi = sorted((c1, c2))
    assert np.all(C.combined(GAUSS, 0.8, lo)(X, X) <= C.combined(GAUSS, 0.8, hi)(X, X) + 1e-15)


def test_inf_convolution_examples():
    mu = discretize(GAUSS, [[-8, 8]], 512)
    zero = from_values(mu, np.zeros(mu.shape))
    assert np.allclose(C.inf_convolution(zero, C.bregman(GAUSS), mu).flat, 0)
    K = from_values(mu, np.full(mu.shape, 2.5))
    assert np.allclose(C.inf_convolution(K, C.bregman(GAUSS), mu).flat, 2.5)
    g = grid_function(mu, lambda X: X[:, 0])
    Q = C.inf_convolution(g, C.bregman(GAUSS), mu).flat
    y = mu.axes[0]
    inner = np.abs(y) < 6
    assert np.allclose(Q[inner], y[inner] - 0.5, atol=mu.spacing[0] ** 2)
    assert np.all(Q <= g.flat + 1e-15)


def test_cost_from_config():
    c = C.cost_from_config({"cost": "combined", "c": 0.1, "h": "auto"}, GAUSS, h_auto=lambda: 0.8)
    assert c.kind == "combined" and c.scale == 0.8 and c.weight == 0.1
    with pytest.raises(InputError):
        C.cost_from_config({"cost": "combined", "h": "auto"}, GAUSS)
    with pytest.raises(InputError):
        C.cost_from_config({"cost": "nope"})
