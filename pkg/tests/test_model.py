import numpy as np
import pytest

from vbamp.errors import DimensionMismatch, InsufficientSamples
from vbamp.model import (DCS, MMV, BgPrior, MeasurementEnsemble, MeasurementSet,
                         NoiseModel, ProblemInstance, generate_ensemble,
                         generate_matrix, infer_signal_covariance, measure,
                         sample_signal)


class TestGenerateMatrix:
    def test_rademacher_exact_columns(self):
        a = generate_matrix(4, 3, "rademacher", seed=7)
        assert np.all(np.abs(a) == 0.5)
        np.testing.assert_allclose(np.linalg.norm(a, axis=0), 1.0, rtol=0, atol=0)

    def test_gaussian_unit_columns(self):
        a = generate_matrix(100, 50, "gaussian", seed=7)
        np.testing.assert_allclose(np.linalg.norm(a, axis=0), 1.0, atol=1e-12)

    def test_gaussian_column_decorrelation(self):
        # mean off-diagonal column correlation over 100 seeds stays near zero
        means = []
        for seed in range(100):
            a = generate_matrix(100, 50, "gaussian", seed=seed)
            corr = a.T @ a
            off = corr[~np.eye(50, dtype=bool)]
            means.append(off.mean())
        assert abs(np.mean(means)) < 0.05

    def test_seed_determinism(self):
        a = generate_matrix(30, 20, "gaussian", seed=123)
        b = generate_matrix(30, 20, "gaussian", seed=123)
        assert np.array_equal(a, b)
        c = generate_matrix(30, 20, "gaussian", seed=124)
        assert not np.array_equal(a, c)

    def test_zero_dimension_rejected(self):
        with pytest.raises(DimensionMismatch):
            generate_matrix(0, 3, "gaussian", seed=1)
        with pytest.raises(DimensionMismatch):
            generate_matrix(3, 0, "rademacher", seed=1)

    def test_dcs_channels_independent(self):
        ens = generate_ensemble(40, 60, "gaussian", DCS, 3, seed=9)
        assert len({a.tobytes() for a in ens.matrices}) == 3

    def test_mmv_single_matrix(self):
        ens = generate_ensemble(40, 60, "gaussian", MMV, 3, seed=9)
        assert len(ens.matrices) == 1
        assert ens.matrix(0) is ens.matrix(2)


class TestPriorValidation:
    def test_epsilon_range(self):
        with pytest.raises(ValueError):
            BgPrior(epsilon=0.0, sigma_x=np.eye(2))
        with pytest.raises(ValueError):
            BgPrior(epsilon=1.5, sigma_x=np.eye(2))

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            BgPrior(epsilon=0.5, sigma_x=np.array([[1.0, 0.5], [0.1, 1.0]]))

    def test_indefinite_rejected(self):
        with pytest.raises(ValueError):
            BgPrior(epsilon=0.5, sigma_x=np.array([[1.0, 2.0], [2.0, 1.0]]))
        with pytest.raises(ValueError):
            NoiseModel(sigma_w=np.array([[-1.0]]))

    def test_psd_noise_accepted(self):
        NoiseModel(sigma_w=np.zeros((2, 2)))


class TestSampleSignal:
    def test_vanishing_epsilon_gives_zero_signal(self):
        # the all-zero limit; epsilon = 0 itself is outside the prior's domain
        sig = sample_signal(BgPrior(1e-12, np.eye(2)), 10, seed=3)
        assert np.all(sig.x == 0.0)
        assert sig.support.size == 0

    def test_dense_rows_match_covariance(self):
        prior = BgPrior(1.0, np.eye(2))
        sig = sample_signal(prior, 100_000, seed=4)
        emp = sig.x.T @ sig.x / sig.n
        np.testing.assert_allclose(emp, np.eye(2), atol=0.02)

    def test_support_fraction_concentrates(self):
        prior = BgPrior(0.1, np.eye(3))
        sig = sample_signal(prior, 100_000, seed=5)
        frac = sig.support.size / sig.n
        assert abs(frac - 0.1) < 0.005

    def test_rows_outside_support_exactly_zero(self):
        prior = BgPrior(0.3, np.eye(2))
        sig = sample_signal(prior, 500, seed=6)
        mask = np.ones(sig.n, dtype=bool)
        mask[sig.support] = False
        assert np.all(sig.x[mask] == 0.0)

    def test_determinism(self):
        prior = BgPrior(0.3, np.eye(2))
        a = sample_signal(prior, 100, seed=8).x
        b = sample_signal(prior, 100, seed=8).x
        assert np.array_equal(a, b)


class TestMeasure:
    def test_identity_matrix_zero_noise(self):
        n = 16
        ens = MeasurementEnsemble(mode=MMV, matrices=(np.eye(n),), b=2)
        prior = BgPrior(0.5, np.eye(2))
        sig = sample_signal(prior, n, seed=1)
        noise = NoiseModel(np.zeros((2, 2)))
        y = measure(sig, ens, noise, seed=2)
        assert np.array_equal(y.y, sig.x)

    def test_zero_signal(self):
        ens = generate_ensemble(10, 20, "gaussian", MMV, 2, seed=1)
        y = measure(np.zeros((20, 2)), ens, NoiseModel(np.zeros((2, 2))), seed=3)
        assert np.all(y.y == 0.0)

    def test_noise_covariance(self):
        sigma_w = np.array([[2.0, 0.5], [0.5, 1.0]])
        ens = MeasurementEnsemble(mode=MMV, matrices=(np.eye(100_000, 4) / 1.0,), b=2)
        # zero signal isolates the noise rows
        y = measure(np.zeros((4, 2)), ens, NoiseModel(sigma_w), seed=11)
        emp = y.y.T @ y.y / 100_000
        np.testing.assert_allclose(emp, sigma_w, rtol=0.02, atol=0.01)

    def test_dimension_mismatch(self):
        ens = generate_ensemble(10, 20, "gaussian", MMV, 2, seed=1)
        with pytest.raises(DimensionMismatch):
            measure(np.zeros((21, 2)), ens, NoiseModel(np.zeros((2, 2))), seed=0)


class TestInferSignalCovariance:
    def test_noiseless_mmv_recovers_identity(self):
        m, n = 5000, 10_000
        ens = generate_ensemble(m, n, "gaussian", MMV, 2, seed=21)
        prior = BgPrior(1.0, np.eye(2))     # cov{x_n} = I
        sig = sample_signal(prior, n, seed=22)
        noise = NoiseModel(np.zeros((2, 2)))
        y = measure(sig, ens, noise, seed=23)
        est = infer_signal_covariance(y, noise, MMV, m / n)
        np.testing.assert_allclose(est, np.eye(2), atol=0.05)

    def test_zero_measurements(self):
        y = MeasurementSet(y=np.zeros((10, 2)))
        est = infer_signal_covariance(y, NoiseModel(np.zeros((2, 2))), MMV, 0.5)
        assert np.all(est == 0.0)

    def test_dcs_output_diagonal(self):
        rng = np.random.default_rng(0)
        y = MeasurementSet(y=rng.standard_normal((200, 3)))
        est = infer_signal_covariance(y, NoiseModel(np.zeros((3, 3))), DCS, 0.5)
        assert np.array_equal(est, np.diag(np.diag(est)))

    def test_insufficient_rows(self):
        y = MeasurementSet(y=np.zeros((2, 3)))
        with pytest.raises(InsufficientSamples):
            infer_signal_covariance(y, NoiseModel(np.zeros((3, 3))), MMV, 0.5)

    def test_psd_clamp(self):
        # noise larger than the measurement energy forces negative estimates
        y = MeasurementSet(y=np.full((50, 2), 0.01))
        est = infer_signal_covariance(y, NoiseModel(np.eye(2)), MMV, 0.5)
        assert np.linalg.eigvalsh(est).min() >= 0.0


class TestMeasurementCovarianceIdentity:
    def test_mmv_identity_within_sampling_error(self):
        # cov{y_m} = sigma_w + cov{x_n}/R, checked against 3-sigma binomial-ish
        # fluctuation of the empirical covariance at these sizes
        m, n, b = 4000, 8000, 2
        rate = m / n
        prior = BgPrior(0.2, np.array([[1.0, 0.4], [0.4, 2.0]]))
        sigma_w = np.array([[0.05, 0.01], [0.01, 0.08]])
        ens = generate_ensemble(m, n, "gaussian", MMV, b, seed=31)
        sig = sample_signal(prior, n, seed=32)
        y = measure(sig, ens, NoiseModel(sigma_w), seed=33)
        emp = y.y.T @ y.y / m
        cov_x = sig.x.T @ sig.x / n
        expected = sigma_w + cov_x / rate
        # entrywise sampling std of the covariance estimate ~ var/sqrt(M)
        scale = np.sqrt(np.outer(np.diag(expected), np.diag(expected)))
        assert np.all(np.abs(emp - expected) < 3.0 * scale / np.sqrt(m) * 2.0)


class TestProblemInstance:
    def test_channel_mismatch(self):
        ens = generate_ensemble(10, 20, "gaussian", MMV, 2, seed=1)
        with pytest.raises(DimensionMismatch):
            ProblemInstance(ensemble=ens, y=np.zeros((10, 3)),
                            noise=NoiseModel(np.zeros((3, 3))))

    def test_rate(self):
        ens = generate_ensemble(10, 20, "gaussian", MMV, 1, seed=1)
        prob = ProblemInstance(ensemble=ens, y=np.zeros((10, 1)),
                               noise=NoiseModel(np.zeros((1, 1))))
        assert prob.rate == 0.5
