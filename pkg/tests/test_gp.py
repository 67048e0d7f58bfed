import numpy as np
import pytest
from scipy.linalg import cho_solve

from reramopt.gp import GpConfig, GpParams, _kernel, fit, posterior, sample_function


def toy_data(seed, n=30, d=2):
    rng = np.random.default_rng(seed)
    x = rng.random((n, d))
    z = rng.random(n)
    y = np.sin(3 * x[:, 0]) + 0.5 * x[:, 1] + 0.3 * z + rng.normal(0, 0.02, n)
    return x, z, y


def direct_inversion_posterior(model, q, qz):
    """Naive Gram-inverse oracle on the standardized scale."""
    xz = model.xz
    k_full = _kernel(xz, xz, model.params) + (model.params.noise_var + model.jitter) * np.eye(
        len(xz)
    )
    k_inv = np.linalg.inv(k_full)
    qq = np.hstack([np.atleast_2d(q), np.asarray(qz, dtype=float).reshape(-1, 1)])
    ks = _kernel(qq, xz, model.params)
    ys = (model.y - model.y_mean) / model.y_std
    mean = model.y_mean + model.y_std * (ks @ k_inv @ ys)
    var = model.params.signal_var - np.sum((ks @ k_inv) * ks, axis=1)
    return mean, model.y_std * np.sqrt(np.maximum(var, 0.0))


class TestFit:
    def test_two_point_closed_form_lml(self):
        # Hand-evaluated 2x2 closed form at fixed hyperparameters.
        x = np.array([[0.2], [0.7]])
        z = np.array([0.0, 1.0])
        y = np.array([1.0, -1.0])  # standardizes to (1, -1)
        params = GpParams(signal_var=1.5, lengthscales=(0.4, 0.8), noise_var=0.01)
        model = fit(x, z, y, optimize=False, init_params=params)
        ys = (y - y.mean()) / y.std()
        d2 = (0.5 / 0.4) ** 2 + (1.0 / 0.8) ** 2
        k01 = 1.5 * np.exp(-0.5 * d2)
        k_mat = np.array([[1.51, k01], [k01, 1.51]])
        expected = (
            -0.5 * ys @ np.linalg.solve(k_mat, ys)
            - 0.5 * np.log(np.linalg.det(k_mat))
            - np.log(2 * np.pi)
        )
        assert model.lml == pytest.approx(expected, abs=1e-10)

    def test_duplicated_point_tiny_noise_fits(self):
        x = np.array([[0.5], [0.5], [0.1]])
        z = np.array([1.0, 1.0, 1.0])
        y = np.array([2.0, 2.0, 1.0])
        params = GpParams(signal_var=1.0, lengthscales=(0.5, 0.5), noise_var=1e-6)
        model = fit(x, z, y, optimize=False, init_params=params)
        mu, _ = posterior(model, np.array([[0.5]]), 1.0)
        assert np.isfinite(mu).all()

    def test_standardization_internal_zero_mean(self):
        x, z, y = toy_data(0)
        model = fit(x, z, y + 100.0)
        ys = (model.y - model.y_mean) / model.y_std
        assert abs(ys.mean()) < 1e-12

    def test_constant_targets_fit(self):
        x, z, _ = toy_data(1, n=10)
        model = fit(x, z, np.full(10, 3.3))
        mu, sd = posterior(model, x[:3], z[:3])
        assert mu == pytest.approx(np.full(3, 3.3), abs=1e-6)

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            fit(np.array([[0.1]]), np.array([1.0]), np.array([1.0]))


class TestPosterior:
    def test_interpolates_with_tiny_noise(self):
        x, z, y = toy_data(2, n=20)
        params = GpParams(signal_var=1.0, lengthscales=(0.5, 0.5, 0.5), noise_var=1e-8)
        model = fit(x, z, y, optimize=False, init_params=params)
        mu, sd = posterior(model, x, z)
        assert np.max(np.abs(mu - y)) < 1e-4
        assert np.max(sd) <= 1e-3

    def test_reverts_to_prior_far_away(self):
        x, z, y = toy_data(3, n=15)
        model = fit(x, z, y)
        _, sd = posterior(model, np.full((1, 2), 60.0), 1.0)
        prior_sd = np.sqrt(model.params.signal_var) * model.y_std
        assert sd[0] == pytest.approx(prior_sd, rel=0.01)

    @pytest.mark.parametrize("seed", [10, 11, 12])
    def test_matches_direct_inversion_oracle(self, seed):
        x, z, y = toy_data(seed)
        model = fit(x, z, y)
        rng = np.random.default_rng(seed + 100)
        q, qz = rng.random((50, 2)), rng.random(50)
        mu, sd = posterior(model, q, qz)
        mu_o, sd_o = direct_inversion_posterior(model, q, qz)
        assert np.max(np.abs(mu - mu_o)) < 1e-8
        assert np.max(np.abs(sd - sd_o)) < 1e-8

    def test_variance_shrinks_when_point_added_there(self):
        x, z, y = toy_data(4, n=12)
        params = GpParams(signal_var=1.0, lengthscales=(0.4, 0.4, 0.4), noise_var=1e-4)
        model = fit(x, z, y, optimize=False, init_params=params)
        q = np.array([[0.42, 0.58]])
        _, sd_before = posterior(model, q, 0.5)
        x2 = np.vstack([x, q])
        z2 = np.append(z, 0.5)
        y2 = np.append(y, 0.0)
        model2 = fit(x2, z2, y2, optimize=False, init_params=params)
        _, sd_after = posterior(model2, q, 0.5)
        assert sd_after[0] <= sd_before[0] * model2.y_std / model.y_std + 1e-9

    def test_training_permutation_invariance(self):
        x, z, y = toy_data(5)
        params = GpParams(signal_var=2.0, lengthscales=(0.3, 0.3, 0.7), noise_var=1e-3)
        m1 = fit(x, z, y, optimize=False, init_params=params)
        perm = np.random.default_rng(0).permutation(len(y))
        m2 = fit(x[perm], z[perm], y[perm], optimize=False, init_params=params)
        q = np.random.default_rng(1).random((20, 2))
        mu1, sd1 = posterior(m1, q, 0.7)
        mu2, sd2 = posterior(m2, q, 0.7)
        assert np.max(np.abs(mu1 - mu2)) < 1e-8
        assert np.max(np.abs(sd1 - sd2)) < 1e-8

    def test_fidelity_continuity_at_z_star(self):
        x, z, y = toy_data(6)
        model = fit(x, z, y)
        q = np.array([[0.3, 0.3]])
        _, sd_star = posterior(model, q, 1.0)
        _, sd_near = posterior(model, q, 1.0 - 1e-7)
        assert sd_near[0] == pytest.approx(sd_star[0], rel=1e-4)


class TestSampledFunctions:
    def test_same_seed_identical(self):
        x, z, y = toy_data(7)
        model = fit(x, z, y)
        pts = np.random.default_rng(2).random((6, 2))
        f1 = sample_function(model, seed=42)
        f2 = sample_function(model, seed=42)
        np.testing.assert_array_equal(f1(pts), f2(pts))

    def test_different_seeds_differ(self):
        x, z, y = toy_data(8)
        model = fit(x, z, y)
        pts = np.random.default_rng(3).random((4, 2))
        assert not np.allclose(sample_function(model, 1)(pts), sample_function(model, 2)(pts))

    def test_finite_everywhere(self):
        x, z, y = toy_data(9)
        model = fit(x, z, y)
        f = sample_function(model, 0)
        grid = np.random.default_rng(4).random((200, 2)) * 3 - 1
        assert np.all(np.isfinite(f(grid)))

    @pytest.mark.slow
    def test_covariance_matches_exact_posterior(self):
        x, z, y = toy_data(10, n=25)
        model = fit(x, z, y)
        pts = np.array([[0.3, 0.4], [0.36, 0.52]])
        qq = np.hstack([pts, np.ones((2, 1))])
        k_full = _kernel(model.xz, model.xz, model.params) + (
            model.params.noise_var + model.jitter
        ) * np.eye(len(model.xz))
        k_inv = np.linalg.inv(k_full)
        ks = _kernel(qq, model.xz, model.params)
        cov_exact = (_kernel(qq, qq, model.params) - ks @ k_inv @ ks.T) * model.y_std**2
        ys = (model.y - model.y_mean) / model.y_std
        mean_exact = model.y_mean + model.y_std * (ks @ k_inv @ ys)

        draws = np.empty((2000, 2))
        for i in range(2000):
            draws[i] = sample_function(model, seed=5000 + i, n_features=2000)(pts)
        cov_emp = np.cov(draws.T)
        assert np.all(
            np.abs(np.diag(cov_emp) - np.diag(cov_exact)) <= 0.10 * np.diag(cov_exact)
        )
        se = np.sqrt(np.diag(cov_exact) / 2000)
        assert np.all(np.abs(draws.mean(axis=0) - mean_exact) <= 3 * se)


class TestJitterPath:
    def test_near_singular_gram_recovers(self):
        x = np.tile([[0.5, 0.5]], (6, 1))
        z = np.ones(6)
        y = np.full(6, 1.0) + np.random.default_rng(0).normal(0, 1e-9, 6)
        params = GpParams(signal_var=1.0, lengthscales=(0.5, 0.5, 0.5), noise_var=1e-6)
        model = fit(x, z, y, optimize=False, init_params=params)
        mu, sd = posterior(model, np.array([[0.5, 0.5]]), 1.0)
        assert np.isfinite(mu).all() and np.isfinite(sd).all()
