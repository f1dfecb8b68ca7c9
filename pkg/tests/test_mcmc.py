import numpy as np
import pytest
from numpy.testing import assert_allclose

from covdlm import (
    GibbsConfig,
    backward_sample,
    filter_step,
    forward_filter,
    gibbs_run,
    init_state,
    invwishart_draw,
    local_level,
    sigma_draw,
)
from covdlm.errors import Singular, ValidationError


def bivariate_ll():
    return local_level(2, evolution=np.eye(2))


class TestForwardFilter:
    def test_diffuse_scalar_posterior_is_sample_mean(self, rng):
        spec = local_level(1, evolution=np.zeros((1, 1)))
        y = rng.standard_normal((200, 1)) + 3.0
        filt = forward_filter(y, spec, np.eye(1), np.zeros(1), 1e8 * np.eye(1))
        assert abs(filt.means[-1, 0] - y.mean()) < 1e-3 * abs(y.mean())

    def test_empty_data_returns_priors(self):
        spec = bivariate_ll()
        filt = forward_filter(np.zeros((0, 2)), spec, np.eye(2), np.zeros(2), 5.0 * np.eye(2))
        assert filt.means.shape == (1, 2)
        assert_allclose(filt.covs[0], 5.0 * np.eye(2))

    def test_matches_frozen_covariance_filter(self, rng):
        spec = bivariate_ll()
        sigma = np.array([[2.0, 3.0], [3.0, 5.0]])
        y = rng.standard_normal((50, 2)).cumsum(axis=0)
        filt = forward_filter(y, spec, sigma, np.zeros(2), 100.0 * np.eye(2))
        st = init_state(spec, np.zeros(2), 100.0 * np.eye(2), sigma, 1.0)
        for t in range(50):
            st = filter_step(st, y[t], spec.design, evolution=spec.evolution,
                             update_s=False)
            assert_allclose(filt.means[t + 1], st.mean, atol=1e-10)
            assert_allclose(filt.covs[t + 1], st.cov, atol=1e-10)


class TestBackwardSample:
    def test_degenerate_no_evolution_noise(self, rng):
        # omega = 0, G = I: every conditional collapses, the trajectory is flat
        spec = local_level(2, evolution=np.zeros((2, 2)))
        y = rng.standard_normal((40, 2))
        filt = forward_filter(y, spec, np.eye(2), np.zeros(2), 10.0 * np.eye(2))
        states = backward_sample(filt, spec, np.random.default_rng(1))
        spread = np.abs(states - states[-1]).max()
        assert spread < 1e-9

    def test_large_evolution_noise_limit(self, rng):
        # huge omega decouples the states: h_t -> m_t and H_t -> P_t
        spec = local_level(2, evolution=1e8 * np.eye(2))
        y, _ = _generate_ll(rng, spec, np.eye(2), 30)
        filt = forward_filter(y, spec, np.eye(2), np.zeros(2), np.eye(2))
        states = backward_sample(filt, spec, np.random.default_rng(7))
        for t in range(29, -1, -1):
            r_inv = np.linalg.inv(filt.prior_covs[t + 1])
            b = filt.covs[t] @ r_inv
            h = filt.means[t] + b @ (states[t + 1] - filt.prior_means[t + 1])
            hcov = filt.covs[t] - b @ filt.covs[t]
            # the residual gain is ~sd/sqrt(omega) = 1e-4 of the conditional
            # sd; a non-degenerate gain would move h by O(sd)
            sd = np.sqrt(np.diag(filt.covs[t]))
            assert np.all(np.abs(h - filt.means[t]) < 1e-3 * (1.0 + sd))
            assert np.linalg.norm(hcov - filt.covs[t]) < 1e-4 * np.linalg.norm(filt.covs[t])

    def test_matches_solve_based_reimplementation(self, rng):
        spec = local_level(2, evolution=0.5 * np.eye(2))
        y = rng.standard_normal((25, 2)).cumsum(axis=0)
        filt = forward_filter(y, spec, np.eye(2), np.zeros(2), 4.0 * np.eye(2))
        seed = 42
        states = backward_sample(filt, spec, np.random.default_rng(seed))

        z = np.random.default_rng(seed).standard_normal((26, 2))
        expect = np.empty_like(states)
        expect[25] = filt.means[25] + _psd_root(filt.covs[25]) @ z[25]
        for t in range(24, -1, -1):
            b = np.linalg.solve(filt.prior_covs[t + 1], filt.covs[t]).T
            h = filt.means[t] + b @ (expect[t + 1] - filt.prior_means[t + 1])
            hcov = filt.covs[t] - b @ filt.covs[t]
            expect[t] = h + _psd_root(hcov) @ z[t]
        assert_allclose(states, expect, atol=1e-8)

    def test_sweep_mean_matches_smoother(self, rng):
        # scalar ten-step model: the average of many sampled trajectories
        # must agree with the fixed-interval smoother mean
        spec = local_level(1, evolution=0.4 * np.eye(1))
        y = rng.standard_normal((10, 1)).cumsum(axis=0)
        sigma = 0.8 * np.eye(1)
        filt = forward_filter(y, spec, sigma, np.zeros(1), 2.0 * np.eye(1))

        sweeps = 5000
        draw_rng = np.random.default_rng(11)
        acc = np.zeros((11, 1))
        sq = np.zeros((11, 1))
        for _ in range(sweeps):
            s = backward_sample(filt, spec, draw_rng)
            acc += s
            sq += s ** 2
        mean = acc / sweeps
        mc_se = np.sqrt((sq / sweeps - mean ** 2) / sweeps)

        smooth = np.empty(11)
        smooth[10] = filt.means[10, 0]
        for t in range(9, -1, -1):
            c = filt.covs[t, 0, 0] / filt.prior_covs[t + 1, 0, 0]
            smooth[t] = filt.means[t, 0] + c * (smooth[t + 1] - filt.prior_means[t + 1, 0])
        assert np.all(np.abs(mean[:, 0] - smooth) < 2.0 * mc_se[:, 0] + 1e-12)


def _psd_root(m):
    w, v = np.linalg.eigh((m + m.T) / 2.0)
    w = np.where(w > 1e-12 * max(1.0, np.abs(w).max()), w, 0.0)
    return (v * np.sqrt(w)) @ v.T


def _generate_ll(rng, spec, sigma, n):
    from covdlm import generate

    return generate(spec, sigma, n, rng, np.zeros(spec.d), np.eye(spec.d))


class TestSigmaDraw:
    def test_analytic_inverted_wishart_mean(self):
        rng = np.random.default_rng(3)
        nu, psi = 10.0, 7.0 * np.eye(2)
        acc = np.zeros((2, 2))
        n = 10_000
        for _ in range(n):
            acc += invwishart_draw(rng, nu, psi)
        mean = acc / n
        expected = psi / (nu - 2 - 1)
        err = np.linalg.norm(mean - expected) / np.linalg.norm(expected)
        assert err < 0.03

    def test_scalar_reduces_to_inverse_gamma(self):
        rng = np.random.default_rng(5)
        nu, psi = 9.0, 5.0
        n = 20_000
        draws = np.array([invwishart_draw(rng, nu, np.array([[psi]]))[0, 0]
                          for _ in range(n)])
        oracle_rng = np.random.default_rng(6)
        oracle = psi / oracle_rng.chisquare(nu, size=n)
        se = np.sqrt(draws.var() / n + oracle.var() / n)
        assert abs(draws.mean() - oracle.mean()) < 2.0 * se
        assert abs(draws.mean() - psi / (nu - 2.0)) < 2.0 * np.sqrt(draws.var() / n)

    def test_concentrates_on_residual_covariance(self, rng):
        spec = bivariate_ll()
        sigma = np.array([[2.0, 3.0], [3.0, 5.0]])
        n = 2000
        y, states = _generate_ll(rng, spec, sigma, n)
        resid = y - states[1:] @ spec.design
        sig_hat = resid.T @ resid / n
        draw = sigma_draw(states, y, spec.design, 1.0, np.eye(2), rng)
        err = np.linalg.norm(draw - sig_hat) / np.linalg.norm(sig_hat)
        assert err < 0.10

    def test_rejects_bad_scale(self, rng):
        with pytest.raises(Singular):
            invwishart_draw(rng, 10.0, np.array([[1.0, 2.0], [2.0, 1.0]]))


class TestGibbsRun:
    def _config(self, iterations=120, burn_in=40, seed=9):
        return GibbsConfig(
            iterations=iterations,
            burn_in=burn_in,
            n0=1.0,
            s0=np.eye(2),
            m0=np.zeros(2),
            p0=1000.0 * np.eye(2),
            seed=seed,
        )

    def test_deterministic_given_seed(self, rng):
        spec = bivariate_ll()
        y, _ = _generate_ll(rng, spec, np.array([[2.0, 3.0], [3.0, 5.0]]), 60)
        a = gibbs_run(y, spec, self._config())
        b = gibbs_run(y, spec, self._config())
        assert np.array_equal(a.sigma_mean, b.sigma_mean)
        assert np.array_equal(a.sigma_draws, b.sigma_draws)
        assert np.array_equal(a.state_means, b.state_means)

    def test_single_draw_summary(self, rng):
        spec = bivariate_ll()
        y, _ = _generate_ll(rng, spec, np.eye(2), 30)
        res = gibbs_run(y, spec, self._config(iterations=41, burn_in=40))
        assert res.kept == 1
        assert_allclose(res.sigma_mean, res.sigma_draws[0])

    def test_recovers_truth_roughly(self, rng):
        spec = bivariate_ll()
        sigma = np.array([[2.0, 3.0], [3.0, 5.0]])
        y, _ = _generate_ll(rng, spec, sigma, 300)
        res = gibbs_run(y, spec, self._config(iterations=300, burn_in=100))
        err = np.linalg.norm(res.sigma_mean - sigma) / np.linalg.norm(sigma)
        assert err < 0.5

    def test_rejects_bad_config(self):
        with pytest.raises(ValidationError):
            GibbsConfig(iterations=10, burn_in=10, n0=1.0, s0=np.eye(2),
                        m0=np.zeros(2), p0=np.eye(2))

    def test_single_sweep_shapes(self, rng):
        from covdlm import gibbs_sweep

        spec = bivariate_ll()
        y, _ = _generate_ll(rng, spec, np.eye(2), 25)
        cfg = self._config()
        draw = gibbs_sweep(y, spec, np.eye(2), cfg, np.random.default_rng(2))
        assert draw.states.shape == (26, 2)
        assert draw.sigma.shape == (2, 2)
        assert np.linalg.eigvalsh(draw.sigma).min() > 0
