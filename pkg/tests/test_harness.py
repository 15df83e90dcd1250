import json
import math

import numpy as np
import pytest

from til import harness as hz
from til import potentials as pot
from til.battery import dilated_law, random_mixture
from til.errors import DimensionError, InputError
from til.measures import discretize, translate

GAUSS = pot.gaussian()
QUARTIC = pot.quadratic_plus_quartic(1.0, 1.0)


@pytest.fixture(scope="module")
def gamma():
    return discretize(GAUSS, [[-8.0, 8.0]], 1024)


@pytest.fixture(scope="module")
def gamma_lp():
    return discretize(GAUSS, [[-10.0, 10.0]], 400)


def test_transport_entropy_translate_is_tight(gamma):
    r = hz.check_transport_entropy(GAUSS, gamma, translate(gamma, [0.5]))
    assert r.passed and abs(r.margin) < 1e-3
    assert r.statement_id == "prop1"


def test_transport_entropy_dilation(gamma):
    r = hz.check_transport_entropy(GAUSS, gamma, dilated_law(GAUSS, gamma, 1.3))
    assert r.passed and r.margin > 1e-3


def test_remainder_on_dilation(gamma_lp):
    nu = dilated_law(GAUSS, gamma_lp, 1.3)
    r = hz.check_remainder(GAUSS, gamma_lp, nu, c_scan=[0.05])
    assert r.passed and r.empirical_constant > 0
    assert r.details["c_scan"][0]["margin"] >= 0
    assert r.details["largest_scanned_c"] == 0.05


def test_remainder_vacuous_and_centering(gamma_lp):
    r = hz.check_remainder(GAUSS, gamma_lp, gamma_lp)
    assert r.passed and r.details["vacuous"]
    with pytest.raises(InputError):
        hz.check_remainder(GAUSS, gamma_lp, translate(gamma_lp, [1.0]), recenter_nu=False)


def test_remainder_sub_grid_is_unresolved(gamma_lp):
    # a mixture within a fraction of a cell of mu in W1
    w = gamma_lp.flat_weights.copy()
    w[len(w) // 2] += 1e-4
    nu = type(gamma_lp)(gamma_lp.domain, gamma_lp.shape, w / w.sum(), source="bump")
    r = hz.check_remainder(GAUSS, gamma_lp, nu)
    assert r.details["vacuous"] and r.details["sub_grid"] and r.empirical_constant is None


def test_mainbound_identity(gamma):
    nu = dilated_law(GAUSS, gamma, 1.2, 0.3)
    r = hz.check_mainbound_identity_1d(GAUSS, gamma, nu)
    assert r.passed and r.lhs == pytest.approx(0.5 * (1.44 + 0.09 - 1 - 2 * math.log(1.2)), abs=1e-3)


def test_talagrand_and_qT(gamma, gamma_lp):
    r = hz.check_talagrand(GAUSS, gamma, translate(gamma, [0.5]))
    assert r.rhs == pytest.approx(0.125, abs=1e-3) and r.passed
    q = hz.check_gaussian_remainder(GAUSS, gamma_lp, dilated_law(GAUSS, gamma_lp, 1.3))
    assert q.passed and q.statement_id == "qT"


def test_dual_infconv(gamma):
    r = hz.check_dual_infconv(GAUSS, gamma, lambda X: np.sin(2 * X[:, 0]))
    assert r.passed and r.margin >= -1e-6


def test_translation_invariance(gamma):
    r = hz.check_translation_invariance(GAUSS, gamma, dilated_law(GAUSS, gamma, 1.2), [np.array([0.25])])
    assert r.passed


def test_fil_two_dimensional():
    spec = pot.gaussian(dimension=2)
    mu = discretize(spec, [[-6, 6], [-6, 6]], 20)
    r = hz.check_fil(spec, mu, dilated_law(spec, mu, 1.2))
    assert r.passed and r.empirical_constant >= 1 - 1e-9


def test_bl_equality_and_strict(gamma):
    lin = hz.check_bl_variance(GAUSS, gamma, lambda X: X[:, 0])
    assert lin.passed and lin.details["relative_deficit"] < 1e-3
    sq = hz.check_bl_variance(GAUSS, gamma, lambda X: X[:, 0] ** 2)
    assert sq.margin == pytest.approx(2.0, abs=5e-2)


def test_rbl(gamma):
    r = hz.check_rbl(GAUSS, gamma, lambda X: X[:, 0] ** 2)
    # Var(x^2) = 2 against int 4x^2 / (1 + c h^2): c h^2 = 1, h^2 = 2/pi
    assert r.passed and r.empirical_constant == pytest.approx(math.pi / 2, rel=2e-2)
    deg = hz.check_rbl(GAUSS, gamma, lambda X: X[:, 0])
    assert deg.passed and deg.details["degenerate"]


def test_qbl(gamma):
    r = hz.check_qbl(GAUSS, gamma, lambda X: X[:, 0] ** 2)
    assert r.passed and r.margin == pytest.approx(2.0, abs=5e-2)


def test_bh(gamma):
    r = hz.check_bh(gamma, lambda X: np.tanh(X[:, 0]))
    assert r.passed and 0 < r.empirical_constant < 1
    with pytest.raises(DimensionError):
        hz.check_bh(discretize(pot.gaussian(dimension=2), [[-7, 7], [-7, 7]], 16), lambda X: X[:, 0])


def test_affine_invariance(gamma):
    r = hz.check_affine_invariance(GAUSS, gamma, lambda X: np.sin(X[:, 0]), [[2.0]], [0.5])
    assert r.passed
    with pytest.raises(InputError):
        hz.check_affine_invariance(GAUSS, gamma, np.zeros(3), [[2.0]])


def test_equality_characterization(gamma):
    rng = np.random.default_rng(0)
    cands = [translate(gamma, [0.25]), random_mixture(rng, gamma)]
    r = hz.check_equality_characterization(GAUSS, gamma, cands)
    rows = r.details["candidates"]
    assert rows[0]["translate"] and rows[0]["expect_equality"] and not rows[1]["translate"]
    assert r.passed


def test_trace():
    rng = np.random.default_rng(1)
    mats = [hz.random_symmetric(rng, 3) for _ in range(5)]
    r = hz.check_trace(mats, 20_000, seed=1)
    assert r.passed and r.details["min_ratio_trace_to_sphere"] > 1 / 8


def test_scalar_suite_flags_known_errors():
    reps = {r.statement_id: r for r in hz.scalar_inequality_suite(2001)}
    assert not reps["scalar.legendre"].passed
    assert not reps["scalar.closed_form"].passed
    assert reps["scalar.legendre_quarter"].passed
    assert reps["scalar.closed_form_corrected"].passed
    for sid in ("scalar.prop0_lower", "scalar.prop0_upper", "scalar.reflection", "scalar.prop1_lower",
                "scalar.prop1_upper", "scalar.doubling", "scalar.fprime_square", "scalar.prop2"):
        assert reps[sid].passed, sid


def test_negative_control_fails():
    r = hz.negative_control(2001)
    assert not r.passed and r.details["violations"] > 0


def test_spectral_bracket_and_curvature(gamma):
    q = discretize(QUARTIC, [[-5, 5]], 1024)
    r = hz.check_spectral_bracket([gamma, q])
    lo, hi = r.details["observed_bracket"]
    assert r.passed and lo <= math.pi / 2 * 1.05 and hi >= lo
    c = hz.check_curvature_bound(QUARTIC, q)
    assert c.passed and c.empirical_constant >= 1 - 1e-3


def test_report_json_round_trip(gamma):
    r = hz.check_bl_variance(GAUSS, gamma, lambda X: X[:, 0] ** 2)
    d = json.loads(json.dumps(r.to_dict()))
    assert d["statement_id"] == "bl" and d["passed"] is True
    assert set(d) >= {"lhs", "rhs", "margin", "tolerance", "inputs", "details"}
