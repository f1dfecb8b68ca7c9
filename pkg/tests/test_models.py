import numpy as np
import pytest
from numpy.testing import assert_allclose

from covdlm import (
    companion_matrix,
    dwr_model,
    dwr_prior,
    linear_trend,
    local_level,
    mvdlm_cov_update,
    run_filter,
    seasonal,
    stationarity_check,
    tvvar_model,
    var_design,
    var_model,
)
from covdlm.dlm import build_designs
from covdlm.errors import DimensionMismatch, InvalidDimension, InvalidDiscount, InvalidScale

from conftest import random_spd


class TestComponentBuilders:
    def test_local_level_structure(self):
        spec = local_level(2)
        assert spec.d == 2
        assert_allclose(spec.design, np.eye(2))
        assert spec.transition is None

    def test_local_level_rejects_bad_dim(self):
        with pytest.raises(InvalidDimension):
            local_level(0)

    def test_linear_trend_univariate(self):
        spec = linear_trend(1)
        assert_allclose(spec.design, [[1.0], [0.0]])
        assert_allclose(spec.transition, [[1.0, 1.0], [0.0, 1.0]])

    def test_linear_trend_block_diagonal(self):
        spec = linear_trend(3)
        assert spec.d == 6
        assert_allclose(spec.transition[2:4, 2:4], [[1.0, 1.0], [0.0, 1.0]])
        assert_allclose(spec.transition[0:2, 2:4], np.zeros((2, 2)))

    def test_seasonal_quarter_rotation(self):
        spec = seasonal(1, 4)
        rot = spec.transition
        assert_allclose(rot, [[0.0, 1.0], [-1.0, 0.0]], atol=1e-15)
        assert_allclose(np.linalg.matrix_power(rot, 4), np.eye(2), atol=1e-12)

    def test_seasonal_full_cycle_identity(self):
        spec = seasonal(2, 12)
        g12 = np.linalg.matrix_power(spec.transition, 12)
        assert_allclose(g12, np.eye(4), atol=1e-10)

    def test_seasonal_rejects_short_period(self):
        with pytest.raises(InvalidDimension):
            seasonal(1, 1)


class TestVarDesign:
    def test_small_example(self):
        F = var_design(np.array([1.0, 2.0]), 2, 1)
        assert_allclose(F.T, [[1, 0, 2, 0], [0, 1, 0, 2]])

    def test_vec_identity(self, rng):
        p, ell = 3, 2
        for _ in range(20):
            phi = rng.standard_normal((p, p * ell))
            x = rng.standard_normal(p * ell)
            F = var_design(x, p, ell)
            assert_allclose(F.T @ phi.flatten(order="F"), phi @ x, atol=1e-12)

    def test_zero_lags(self):
        assert_allclose(var_design(np.zeros(4), 2, 2), np.zeros((8, 2)))

    def test_wrong_length(self):
        with pytest.raises(DimensionMismatch):
            var_design(np.zeros(3), 2, 2)


def simulate_var1(rng, phi, sigma_root, n):
    p = phi.shape[0]
    y = np.zeros((n, p))
    prev = np.zeros(p)
    for t in range(n):
        y[t] = phi @ prev + sigma_root @ rng.standard_normal(p)
        prev = y[t]
    return y


class TestVarModels:
    def test_dimensions(self):
        spec = var_model(2, 1)
        assert spec.d == 4
        assert spec.warmup == 1

    def test_order_zero_rejected(self):
        with pytest.raises(InvalidDimension):
            var_model(2, 0)

    def test_batch_regression_identity(self, rng):
        # with the covariance known and fixed, the filtered posterior mean
        # equals the batch conjugate-regression posterior mean
        p, n = 2, 120
        phi = np.array([[0.5, 0.1], [-0.2, 0.4]])
        sigma = np.array([[1.0, 0.3], [0.3, 0.8]])
        sig_root = np.linalg.cholesky(sigma)
        y = simulate_var1(rng, phi, sig_root, n)

        spec = var_model(p, 1)
        m0 = np.zeros(spec.d)
        P0 = 50.0 * np.eye(spec.d)
        run = run_filter(spec, y, m0, P0, sigma, 1.0, update_s=False)

        designs = build_designs(spec, y)
        sig_inv = np.linalg.inv(sigma)
        prec = np.linalg.inv(P0)
        rhs = prec @ m0
        for i in range(designs.shape[0]):
            F = designs[i]
            prec = prec + F @ sig_inv @ F.T
            rhs = rhs + F @ sig_inv @ y[spec.warmup + i]
        expected = np.linalg.solve(prec, rhs)
        assert_allclose(run.final.mean, expected, rtol=1e-8, atol=1e-8)

    def test_tvvar_unit_discount_equals_static(self, rng):
        y = rng.standard_normal((60, 2)).cumsum(axis=0)
        m0, P0, S0 = np.zeros(4), 100.0 * np.eye(4), np.eye(2)
        a = run_filter(var_model(2, 1), y, m0, P0, S0, 1.0)
        b = run_filter(tvvar_model(2, 1, 1.0), y, m0, P0, S0, 1.0)
        assert np.array_equal(a.means, b.means)
        assert np.array_equal(a.obs_covs, b.obs_covs)

    def test_tvvar_table_configuration(self):
        spec = tvvar_model(4, 2, 0.35)
        assert spec.d == 32
        assert spec.discount == 0.35

    def test_tvvar_rejects_bad_discount(self):
        with pytest.raises(InvalidDiscount):
            tvvar_model(2, 1, 1.5)


class TestStationarity:
    def test_diagonal_stationary(self):
        res = stationarity_check([0.5 * np.eye(2)])
        assert res.stationary
        assert_allclose(res.max_root_modulus, 0.5, atol=1e-12)

    def test_unit_root(self):
        res = stationarity_check([np.eye(2)])
        assert not res.stationary
        assert_allclose(res.max_root_modulus, 1.0, atol=1e-12)

    def test_companion_shape(self):
        c = companion_matrix([np.eye(2), 0.5 * np.eye(2)])
        assert c.shape == (4, 4)
        assert_allclose(c[2:, :2], np.eye(2))

    def test_agrees_with_polynomial_root_oracle(self, rng):
        # reciprocals of companion eigenvalues are the roots of the
        # characteristic matrix polynomial, found by interpolation
        for _ in range(100):
            p = int(rng.integers(1, 4))
            ell = int(rng.integers(1, 4))
            scale = rng.uniform(0.3, 1.4)
            coeffs = [scale * rng.standard_normal((p, p)) / np.sqrt(p * ell)
                      for _ in range(ell)]
            res = stationarity_check(coeffs)

            deg = p * ell
            zs = np.cos(np.pi * (np.arange(deg + 1) + 0.5) / (deg + 1)) * 2.0
            vals = []
            for z in zs:
                m = np.eye(p)
                for i, c in enumerate(coeffs, start=1):
                    m = m - c * z ** i
                vals.append(np.linalg.det(m))
            poly = np.polynomial.polynomial.polyfit(zs, vals, deg)
            roots = np.polynomial.polynomial.polyroots(poly)
            min_root = np.min(np.abs(roots))
            assert abs(res.max_root_modulus - 1.0 / min_root) < 1e-8
            assert res.stationary == (1.0 / min_root < 1.0 - 1e-9)


class TestDwr:
    def test_one_step_forecast_is_last_value(self, rng):
        p = 2
        spec = dwr_model(p, 0.9)
        m0, P0 = dwr_prior(p)
        y = rng.standard_normal((2, p)) * 5.0
        run = run_filter(spec, y, m0, P0, np.eye(p), 1.0)
        # drift prior mean is zero, so the first forecast is y_0
        assert_allclose(run.errors[0], y[1] - y[0], atol=1e-12)

    def test_frozen_component_never_drifts(self, rng):
        p = 3
        spec = dwr_model(p, 0.8)
        m0, P0 = dwr_prior(p)
        y = rng.standard_normal((101, p)).cumsum(axis=0) + 50.0
        run = run_filter(spec, y, m0, P0, np.eye(p), 1.0)
        assert np.max(np.abs(run.means[:, 0] - 1.0)) < 1e-10

    def test_four_series_smoke(self, rng):
        from covdlm.metrics import report

        p = 4
        spec = dwr_model(p, 0.9)
        m0, P0 = dwr_prior(p)
        drift = np.array([0.5, -0.2, 0.3, 0.1])
        y = 100.0 + np.cumsum(drift + rng.standard_normal((120, p)), axis=0)
        run = run_filter(spec, y, m0, P0, np.eye(p), 1.0)
        rep = report(run.errors, run.forecast_covs, y[spec.warmup:])
        assert np.all(np.isfinite(rep.msse))
        assert np.all(np.isfinite(rep.mape))


class TestMvdlmUpdate:
    def test_zero_error(self, rng):
        s = random_spd(rng, 2)
        assert_allclose(mvdlm_cov_update(s, 3.0, np.zeros(2), 1.7), (3.0 / 4.0) * s)

    def test_scalar_by_hand(self):
        out = mvdlm_cov_update(np.array([[2.0]]), 1.0, np.array([3.0]), 1.5)
        assert_allclose(out, [[4.0]])

    def test_rejects_nonpositive_scale(self):
        with pytest.raises(InvalidScale):
            mvdlm_cov_update(np.eye(2), 1.0, np.zeros(2), 0.0)
