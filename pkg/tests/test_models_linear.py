import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import linalg

import oracles
from fredkit.affine import feld_table
from fredkit.errors import NumericalError, UnsupportedError, ValidationError
from fredkit.models.linear import (CauchyArModel, GaussianVarModel, QuadratureSpec,
                                   cauchy_fekd, cauchy_fekd_term, cauchy_horizon_law,
                                   cauchy_log_moment, mahalanobis, sigma_h, var_fekd,
                                   var_fekd_coefficients, var_fekd_total, var_feld, var_fevd,
                                   var_fevd_table)
from fredkit.simulation import simulate

PHI = [[0.5, 0.1], [0.2, 0.6]]
SIGMA = [[1.0, 0.2], [0.2, 1.0]]


@pytest.fixture
def var_model():
    return GaussianVarModel(PHI, SIGMA)


def test_eigenvalues(var_model):
    assert np.sort(np.linalg.eigvals(var_model.phi).real) == pytest.approx([0.4, 0.7], abs=1e-12)


def test_iid_sigma_h():
    g = GaussianVarModel(np.zeros((2, 2)), SIGMA)
    for h in (1, 2, 5):
        assert sigma_h(g, h) == pytest.approx(np.array(SIGMA))


def test_sigma_h_limit(var_model):
    lyap = linalg.solve_discrete_lyapunov(var_model.phi, var_model.sigma)
    assert sigma_h(var_model, 200) == pytest.approx(lyap, abs=1e-8)
    assert sigma_h(var_model, 7) == pytest.approx(
        oracles.gaussian_forecast_cov(var_model.phi, var_model.sigma, 7), abs=1e-13)


def test_fevd_terms(var_model):
    assert var_fevd(var_model, 1)[0] == pytest.approx(var_model.sigma)
    for h in (2, 6):
        assert sum(var_fevd(var_model, h)) == pytest.approx(sigma_h(var_model, h), abs=1e-12)
        w = np.array([0.3, -1.0])
        tab = var_fevd_table(var_model, [0, 0], h, w)
        assert tab.terms_at(h) == pytest.approx(
            oracles.gaussian_fevd_terms(var_model.phi, var_model.sigma, h, w), abs=1e-12)


def test_fevd_total_matches_simulation(var_model):
    x = simulate(var_model, [1.0, -1.0], 3, 100_000, seed=12).at(3)[:, 0]
    var = x.var(ddof=1)
    se = math.sqrt((np.mean((x - x.mean()) ** 4) - var**2) / x.size)
    assert abs(sigma_h(var_model, 3)[0, 0] - var) < 3 * se


def test_one_step_covariance_matches_simulation(var_model):
    x = simulate(var_model, [0.0, 0.0], 1, 100_000, seed=2).at(1)
    cov = np.cov(x.T)
    # var of a sample covariance entry is roughly (s_ii s_jj + s_ij^2) / n
    s = var_model.sigma
    se = np.sqrt((np.outer(np.diag(s), np.diag(s)) + s**2) / x.shape[0])
    assert np.all(np.abs(cov - s) < 3 * se)


def test_fekd_iid_is_zero():
    g = GaussianVarModel(np.zeros((2, 2)), SIGMA)
    tab, coefs = var_fekd(g, [0.3, 1.0], [2.0, 1.0], 5)
    for key, c in coefs.items():
        assert abs(c.a) < 1e-12 and np.max(np.abs(c.b)) < 1e-12 and np.max(np.abs(c.c)) < 1e-12
    assert tab.totals[5] == pytest.approx(0.0, abs=1e-12)


def test_fekd_terms_match_gaussian_expectations(var_model):
    y, y0, h = np.array([1.0, 0.5]), np.array([2.0, 1.0]), 6
    tab, _ = var_fekd(var_model, y, y0, h)
    phi, sig = var_model.phi, var_model.sigma

    def expected(m, j):
        load = np.linalg.matrix_power(phi, m)
        mean = np.linalg.matrix_power(phi, j) @ y0
        return oracles.gaussian_expected_log_density(
            y, load, oracles.gaussian_forecast_cov(phi, sig, m), mean,
            oracles.gaussian_forecast_cov(phi, sig, j))

    for k in range(h - 1):
        assert tab.terms[(k, h)] == pytest.approx(expected(h - k, k) - expected(h - k - 1, k + 1),
                                                  abs=1e-12)
    total = oracles.gaussian_log_density(y, np.linalg.matrix_power(phi, h) @ y0,
                                         oracles.gaussian_forecast_cov(phi, sig, h)) - expected(1, h - 1)
    assert tab.totals[h] == pytest.approx(total, abs=1e-12)


def test_fekd_quadratic_part_does_not_depend_on_state(var_model):
    a = var_fekd_coefficients(var_model, [2.0, 1.0], 6, 2)
    b = var_fekd_coefficients(var_model, [-3.0, 0.5], 6, 2)
    assert a.c == pytest.approx(b.c, abs=1e-15)


def test_equal_mahalanobis_equal_totals(var_model):
    y0 = np.array([2.0, 1.0])
    p10 = var_model.power(10)
    y1, y2 = p10 @ [2.0, 2.0], p10 @ [2.0, 0.0]
    d1, d2 = mahalanobis(var_model, y1, y0, 10), mahalanobis(var_model, y2, y0, 10)
    assert d1 == pytest.approx(d2, abs=1e-12)
    assert d1 == pytest.approx(0.013889, abs=1e-6)
    t1, t2 = var_fekd_total(var_model, y1, y0, 10), var_fekd_total(var_model, y2, y0, 10)
    assert t1 == pytest.approx(t2, abs=1e-10)
    assert t1 == pytest.approx(0.168281, abs=1e-6)


def test_mahalanobis_properties(var_model):
    y0 = np.array([2.0, 1.0])
    mean = var_model.power(4) @ y0
    assert mahalanobis(var_model, mean, y0, 4) == 0.0
    d = np.array([0.3, -0.8])
    assert mahalanobis(var_model, mean + 2 * d, y0, 4) == pytest.approx(
        2 * mahalanobis(var_model, mean + d, y0, 4), rel=1e-12)


def test_feld(var_model):
    tab = var_feld(var_model, [0.0, 0.0], 4)
    assert all(v == 0 for v in tab.terms.values())
    u = np.array([0.7, -1.2])
    tab = var_feld(var_model, u, 6)
    for h in tab.horizons:
        assert tab.terms_at(h).sum() == pytest.approx(0.5 * u @ sigma_h(var_model, h) @ u, abs=1e-12)
    engine = feld_table(var_model.affine(), u, [0.0, 0.0], 6)
    for key in tab.terms:
        assert tab.terms[key] == pytest.approx(engine.terms[key], abs=1e-12)


def test_singular_covariance_rejected():
    with pytest.raises((ValidationError, NumericalError)):
        GaussianVarModel([[0.5, 0.0], [0.0, 0.5]], [[1.0, 1.0], [1.0, 1.0]])


@settings(max_examples=25, deadline=None)
@given(angle=st.floats(0, 2 * np.pi), h=st.integers(2, 8))
def test_rotation_invariance(angle, h):
    q = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    phi, sig = np.array(PHI), np.array(SIGMA)
    base = GaussianVarModel(phi, sig)
    rot = GaussianVarModel(q @ phi @ q.T, q @ sig @ q.T)
    y, y0 = np.array([0.4, -0.2]), np.array([2.0, 1.0])
    assert var_fekd_total(rot, q @ y, q @ y0, h) == pytest.approx(
        var_fekd_total(base, y, y0, h), abs=1e-10)


def test_var_validation():
    with pytest.raises(ValidationError):
        GaussianVarModel([[1.1, 0.0], [0.0, 0.5]], SIGMA)
    with pytest.raises(ValidationError):
        GaussianVarModel(PHI, [[1.0, 0.3], [0.2, 1.0]])


# -- Cauchy ------------------------------------------------------------------------------

def test_cauchy_horizon_law():
    assert cauchy_horizon_law(CauchyArModel(0.0, 2.0), 5.0, 3) == (0.0, 2.0)
    assert cauchy_horizon_law(CauchyArModel(0.5, 2.0), 3.0, 1) == (1.5, 2.0)
    _, scale = cauchy_horizon_law(CauchyArModel(0.9, 1.5), 0.0, 300)
    assert scale == pytest.approx(1.5 / 0.1, abs=1e-10)


@pytest.mark.parametrize("a,b,s", [(1.0, 0.5, 1.0), (-3.0, 2.0, 0.1), (0.0, 1.0, 1.0), (10.0, 0.01, 2.0)])
def test_cauchy_log_moment_exact(a, b, s):
    value, err = cauchy_log_moment(a, b, s)
    assert value == pytest.approx(oracles.cauchy_log_moment_exact(a, b, s), abs=1e-10)
    assert err < 1e-8


def test_cauchy_iid_terms_vanish():
    tab = cauchy_fekd(CauchyArModel(0.0, 1.0), 0.7, 2.0, 5)
    assert np.max(np.abs(tab.terms_at(5))) < 1e-12
    assert tab.totals[5] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("phi,sigma,y,y0,h,k", [
    (0.5, 1.0, 1.0, 2.0, 3, 0), (0.9, 0.5, -2.0, 4.0, 5, 2), (-0.7, 2.0, 0.0, 1.0, 4, 1),
    (0.3, 1.0, 10.0, -5.0, 6, 4), (0.95, 0.1, 0.2, 0.2, 3, 1), (-0.2, 3.0, 1.0, 0.0, 2, 0),
    (0.6, 1.0, 0.0, 0.0, 6, 0), (0.8, 0.3, 5.0, 5.0, 4, 2), (0.1, 1.0, -1.0, 3.0, 5, 3),
    (0.99, 1.0, 2.0, 1.0, 3, 0)])
def test_cauchy_terms_nonnegative(phi, sigma, y, y0, h, k):
    assert cauchy_fekd_term(CauchyArModel(phi, sigma), y, y0, h, k) >= -1e-8


def test_cauchy_identity():
    tab = cauchy_fekd(CauchyArModel(0.5, 1.0), 1.0, 2.0, 6)
    for h in tab.horizons:
        assert abs(tab.residuals[h]) < 1e-10


def test_cauchy_has_no_moments():
    with pytest.raises(UnsupportedError):
        CauchyArModel(0.5, 1.0).mean(1.0, 2)
    with pytest.raises(UnsupportedError):
        CauchyArModel(0.5, 1.0).log_laplace(1.0, 2, [1.0])


def test_quadrature_budget_floor():
    with pytest.raises(ValidationError):
        QuadratureSpec(nodes=100)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(-20, 20), b=st.floats(0.01, 5), s=st.floats(0.05, 5))
def test_cauchy_log_moment_property(a, b, s):
    value, _ = cauchy_log_moment(a, b, s)
    assert value == pytest.approx(oracles.cauchy_log_moment_exact(a, b, s), abs=1e-9)
