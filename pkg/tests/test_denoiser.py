import numpy as np
import pytest

from vbamp.denoiser import (BgDenoiser, EffectiveChannel, bg_denoise, bg_jacobian,
                            conditional_covariance, mmse_oracle)
from vbamp.errors import UnsupportedDimension
from vbamp.model import BgPrior

ORACLE_NODES = {1: 160, 2: 110, 3: 72}


def random_spd(b, rng, lo=0.3, hi=3.0):
    q, _ = np.linalg.qr(rng.standard_normal((b, b)))
    return (q * rng.uniform(lo, hi, b)) @ q.T


def random_config(rng, b=None):
    b = b or int(rng.integers(1, 4))
    prior = BgPrior(epsilon=float(rng.uniform(0.02, 0.98)),
                    sigma_x=random_spd(b, rng))
    channel = EffectiveChannel(sigma_v=random_spd(b, rng) * rng.uniform(0.05, 2.0))
    u = rng.standard_normal(b) * rng.uniform(0.5, 3.0)
    return u, channel, prior


class TestBgDenoise:
    def test_zero_input_zero_output(self):
        prior = BgPrior(0.2, np.eye(3))
        res = bg_denoise(np.zeros(3), EffectiveChannel(np.eye(3)), prior)
        np.testing.assert_array_equal(res.xhat, 0.0)

    def test_scalar_wiener_at_epsilon_one(self):
        # eps = 1 makes the nonzero ratio exactly 1: pure Wiener u/2
        prior = BgPrior(1.0, np.eye(1))
        res = bg_denoise(np.array([2.0]), EffectiveChannel(np.eye(1)), prior)
        np.testing.assert_allclose(res.xhat, [1.0], atol=1e-14)
        assert res.ratio == 1.0

    def test_quadrature_example(self):
        prior = BgPrior(0.1, np.eye(2))
        channel = EffectiveChannel(0.1 * np.eye(2))
        u = np.array([1.0, -0.5])
        res = bg_denoise(u, channel, prior)
        oracle = mmse_oracle(u, channel, prior, nodes_per_dim=110)
        np.testing.assert_allclose(res.xhat, oracle, atol=1e-8)

    def test_oracle_agreement_sample(self):
        rng = np.random.default_rng(42)
        for _ in range(60):
            u, channel, prior = random_config(rng)
            res = bg_denoise(u, channel, prior)
            oracle = mmse_oracle(u, channel, prior, ORACLE_NODES[prior.b])
            np.testing.assert_allclose(res.xhat, oracle, atol=1e-8)

    def test_ratio_in_unit_interval(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            u, channel, prior = random_config(rng)
            res = bg_denoise(u, channel, prior)
            assert 0.0 <= res.ratio <= 1.0

    def test_shrinkage_bound(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            u, channel, prior = random_config(rng)
            res = bg_denoise(u, channel, prior)
            wiener = prior.sigma_x @ np.linalg.solve(
                prior.sigma_x + channel.sigma_v, u)
            assert np.linalg.norm(res.xhat) <= np.linalg.norm(wiener) + 1e-12

    def test_odd_symmetry_exact(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            u, channel, prior = random_config(rng)
            plus = bg_denoise(u, channel, prior).xhat
            minus = bg_denoise(-u, channel, prior).xhat
            assert np.array_equal(plus, -minus)

    def test_nonfinite_rejected(self):
        prior = BgPrior(0.5, np.eye(2))
        with pytest.raises(ValueError):
            bg_denoise(np.array([np.nan, 0.0]), EffectiveChannel(np.eye(2)), prior)


class TestBgJacobian:
    def test_zero_input_equals_wiener_times_ratio(self):
        prior = BgPrior(0.3, np.array([[2.0, 0.3], [0.3, 1.0]]))
        channel = EffectiveChannel(0.5 * np.eye(2))
        res = bg_denoise(np.zeros(2), channel, prior)
        core = BgDenoiser(prior, channel.sigma_v)
        expected = res.ratio * core.wiener
        np.testing.assert_allclose(res.jacobian, expected, atol=1e-14)

    def test_epsilon_one_constant_jacobian(self):
        prior = BgPrior(1.0, np.array([[1.5, 0.2], [0.2, 0.8]]))
        channel = EffectiveChannel(0.4 * np.eye(2))
        wiener = prior.sigma_x @ np.linalg.inv(prior.sigma_x + channel.sigma_v)
        rng = np.random.default_rng(5)
        for _ in range(5):
            u = rng.standard_normal(2) * 3
            np.testing.assert_allclose(bg_jacobian(u, channel, prior), wiener,
                                       atol=1e-12)

    def test_finite_differences(self):
        rng = np.random.default_rng(7)
        h = 1e-6
        for _ in range(100):
            u, channel, prior = random_config(rng)
            b = prior.b
            jac = bg_jacobian(u, channel, prior)
            fd = np.zeros((b, b))
            for j in range(b):
                e = np.zeros(b)
                e[j] = h
                fd[:, j] = (bg_denoise(u + e, channel, prior).xhat
                            - bg_denoise(u - e, channel, prior).xhat) / (2 * h)
            np.testing.assert_allclose(jac, fd, atol=1e-5)


class TestConditionalCovariance:
    def test_posterior_covariance_identity(self):
        # F'(u) sigma_v must equal cov{x | u} for every configuration
        rng = np.random.default_rng(11)
        for _ in range(100):
            u, channel, prior = random_config(rng)
            lhs = bg_jacobian(u, channel, prior) @ channel.sigma_v
            rhs = conditional_covariance(u, channel, prior)
            assert np.abs(lhs - rhs).max() < 1e-9

    def test_epsilon_one_gaussian_posterior(self):
        prior = BgPrior(1.0, np.array([[1.0, 0.5], [0.5, 2.0]]))
        channel = EffectiveChannel(np.eye(2) * 0.3)
        inv_u = np.linalg.inv(prior.sigma_x + channel.sigma_v)
        expected = prior.sigma_x - prior.sigma_x @ inv_u @ prior.sigma_x
        rng = np.random.default_rng(13)
        for _ in range(5):
            u = rng.standard_normal(2)
            np.testing.assert_allclose(conditional_covariance(u, channel, prior),
                                       expected, atol=1e-12)

    def test_symmetric_psd(self):
        rng = np.random.default_rng(17)
        for _ in range(30):
            u, channel, prior = random_config(rng)
            cov = conditional_covariance(u, channel, prior)
            np.testing.assert_allclose(cov, cov.T, atol=1e-12)
            assert np.linalg.eigvalsh(cov).min() > -1e-12


class TestMmseOracle:
    def test_epsilon_one_reduces_to_wiener(self):
        rng = np.random.default_rng(19)
        for b in (1, 2, 3):
            prior = BgPrior(1.0, random_spd(b, rng))
            channel = EffectiveChannel(random_spd(b, rng))
            u = rng.standard_normal(b)
            wiener = prior.sigma_x @ np.linalg.solve(
                prior.sigma_x + channel.sigma_v, u)
            oracle = mmse_oracle(u, channel, prior, ORACLE_NODES[b])
            np.testing.assert_allclose(oracle, wiener, atol=1e-10)

    def test_zero_input(self):
        prior = BgPrior(0.4, np.eye(2))
        oracle = mmse_oracle(np.zeros(2), EffectiveChannel(np.eye(2)), prior, 64)
        np.testing.assert_allclose(oracle, 0.0, atol=1e-12)

    def test_node_count_self_consistency(self):
        prior = BgPrior(0.1, np.eye(2))
        channel = EffectiveChannel(0.1 * np.eye(2))
        u = np.array([1.0, -0.5])
        coarse = mmse_oracle(u, channel, prior, 64)
        fine = mmse_oracle(u, channel, prior, 96)
        np.testing.assert_allclose(coarse, fine, atol=1e-10)

    def test_dimension_limit(self):
        prior = BgPrior(0.5, np.eye(5))
        with pytest.raises(UnsupportedDimension):
            mmse_oracle(np.zeros(5), EffectiveChannel(np.eye(5)), prior, 16)


class TestJitter:
    def test_tiny_sigma_v_is_floored(self):
        prior = BgPrior(0.5, np.eye(2))
        channel = EffectiveChannel(np.diag([1.0, 1e-18]))
        res = bg_denoise(np.array([0.5, 0.5]), channel, prior)
        assert np.all(np.isfinite(res.xhat))
        assert np.all(np.isfinite(res.jacobian))
