import numpy as np
import pytest

from vbamp.decorrelate import joint_diagonalizer
from vbamp.errors import ConfigError
from vbamp.model import DCS, MMV, BgPrior, NoiseModel
from vbamp.state_evolution import (IntegratorSpec, default_integrator,
                                   initial_sigma_v, se_run, se_step)


def random_spd(b, rng, lo=0.3, hi=3.0):
    q, _ = np.linalg.qr(rng.standard_normal((b, b)))
    return (q * rng.uniform(lo, hi, b)) @ q.T


class TestSeStep:
    def test_vanishing_epsilon_returns_noise(self):
        # estimator vanishes with the signal: the error term contributes ~0
        prior = BgPrior(1e-12, np.eye(2))
        noise = NoiseModel(0.01 * np.eye(2))
        out = se_step(0.5 * np.eye(2), prior, noise, 0.25, MMV)
        np.testing.assert_allclose(out, noise.sigma_w, atol=1e-10)

    def test_scalar_gaussian_closed_form(self):
        # eps = 1, B = 1: sigma_w + (1/R) * wiener MSE
        prior = BgPrior(1.0, np.eye(1))
        noise = NoiseModel(np.array([[1e-3]]))
        sv = 0.5
        out = se_step(np.array([[sv]]), prior, noise, 0.25, MMV)
        expected = 1e-3 + (1 / 0.25) * (sv * 1.0 / (1.0 + sv))
        assert out[0, 0] == pytest.approx(expected, abs=1e-10)

    def test_dcs_output_diagonal_exact(self):
        rng = np.random.default_rng(0)
        prior = BgPrior(0.2, random_spd(2, rng))
        noise = NoiseModel(np.diag([0.01, 0.02]))
        out = se_step(random_spd(2, rng), prior, noise, 0.3, DCS)
        assert np.array_equal(out, np.diag(np.diag(out)))

    def test_mmv_output_symmetric(self):
        rng = np.random.default_rng(1)
        prior = BgPrior(0.2, random_spd(2, rng))
        noise = NoiseModel(0.01 * np.eye(2))
        out = se_step(random_spd(2, rng), prior, noise, 0.3, MMV)
        assert np.array_equal(out, out.T)

    def test_diagonality_preserved_quadrature(self):
        # diagonal signal/noise/state keeps the next state diagonal to 1e-10
        for b in (2, 3):
            prior = BgPrior(0.1, np.diag(np.linspace(1.0, 2.0, b)))
            noise = NoiseModel(np.diag(np.linspace(0.001, 0.003, b)))
            sv = np.diag(np.linspace(0.05, 0.2, b))
            out = se_step(sv, prior, noise, 0.25, MMV)
            off = out - np.diag(np.diag(out))
            assert np.abs(off).max() < 1e-10 * np.diag(out).max()

    def test_diagonality_montecarlo(self):
        # B = 4 falls back to Monte Carlo; off-diagonals stay statistically small
        b = 4
        prior = BgPrior(0.1, np.eye(b))
        noise = NoiseModel(10**-3.5 * np.eye(b))
        sv = np.diag(np.full(b, 0.1))
        integrator = IntegratorSpec(kind="montecarlo", samples=400_000, seed=7)
        out = se_step(sv, prior, noise, 0.25, MMV, integrator)
        off = out - np.diag(np.diag(out))
        assert np.abs(off).max() < 1e-3 * np.diag(out).max()

    def test_mse_prediction_nonnegative(self):
        rng = np.random.default_rng(3)
        prior = BgPrior(0.15, random_spd(2, rng))
        noise = NoiseModel(0.01 * np.eye(2))
        out = se_step(random_spd(2, rng), prior, noise, 0.25, MMV)
        mse = 0.25 * (np.diag(out) - np.diag(noise.sigma_w))
        assert np.all(mse >= 0.0)

    def test_equivariance_under_decorrelation(self):
        # a congruence applied to all inputs maps the SE step congruently
        rng = np.random.default_rng(4)
        sx = random_spd(2, rng)
        sw = random_spd(2, rng) * 0.05
        sv = random_spd(2, rng) * 0.3
        prior = BgPrior(0.2, sx)
        noise = NoiseModel(sw)
        integ = IntegratorSpec(kind="quadrature", nodes_per_dim=32)
        plain = se_step(sv, prior, noise, 0.3, MMV, integ)
        t = joint_diagonalizer(sx, sw, 0.2).t
        mapped = se_step(t @ sv @ t.T, BgPrior(0.2, t @ sx @ t.T),
                         NoiseModel(t @ sw @ t.T), 0.3, MMV, integ)
        expected = t @ plain @ t.T
        assert np.abs(mapped - expected).max() < 1e-8 * np.abs(expected).max()

    def test_zero_sample_budget_rejected(self):
        with pytest.raises(ConfigError):
            IntegratorSpec(kind="montecarlo", samples=0)
        with pytest.raises(ConfigError):
            IntegratorSpec(kind="simpson")


class TestSeRun:
    def test_vanishing_epsilon_converges_immediately(self):
        prior = BgPrior(1e-12, np.eye(1))
        noise = NoiseModel(np.array([[0.01]]))
        traj = se_run(prior, noise, 0.25, MMV, t_max=10, tol=1e-8)
        assert traj.converged
        assert len(traj) <= 3

    def test_initialization(self):
        prior = BgPrior(0.1, 2.0 * np.eye(2))
        noise = NoiseModel(0.01 * np.eye(2))
        np.testing.assert_allclose(initial_sigma_v(prior, noise, 0.25),
                                   0.01 * np.eye(2) + (0.1 / 0.25) * 2 * np.eye(2))

    def test_final_mse_decreases_with_channel_count(self):
        finals = []
        for b in (1, 2, 4):
            prior = BgPrior(0.1, np.eye(b))
            noise = NoiseModel(10**-3.5 * np.eye(b))
            integ = default_integrator(b)
            if integ.kind == "montecarlo":
                integ = IntegratorSpec(kind="montecarlo", samples=100_000, seed=1)
            traj = se_run(prior, noise, 0.25, MMV, integ, t_max=120, tol=1e-8)
            finals.append(traj.mse_db[-1][0])
        assert finals[0] > finals[1] > finals[2]

    def test_scalar_two_phase_descent(self):
        # slow plateau first, then a fast drop to the fixed point
        prior = BgPrior(0.1, np.eye(1))
        noise = NoiseModel(np.array([[10**-3.5]]))
        traj = se_run(prior, noise, 0.25, MMV, t_max=200, tol=1e-10)
        mse = traj.mse_db[:, 0]
        drops = -np.diff(mse)
        early = drops[:3].max()
        late = drops[3:].max()
        assert traj.converged
        assert late > 2.0 * early      # the cliff comes after the plateau
        assert mse[-1] < -35.0

    def test_monotone_in_noise_level(self):
        # raising one channel's noise never lowers its fixed-point MSE
        prior = BgPrior(0.1, np.eye(2))
        integ = IntegratorSpec(kind="quadrature", nodes_per_dim=16)
        finals = []
        for scale in np.logspace(-4, -2, 5):
            noise = NoiseModel(np.diag([1e-4, scale]))
            traj = se_run(prior, noise, 0.3, MMV, integ, t_max=150, tol=1e-9)
            finals.append(0.3 * (traj.final[1, 1] - scale))
        assert np.all(np.diff(finals) >= -1e-12)

    def test_nonconvergence_flagged(self):
        prior = BgPrior(0.1, np.eye(1))
        noise = NoiseModel(np.array([[10**-3.5]]))
        traj = se_run(prior, noise, 0.25, MMV, t_max=3, tol=1e-12)
        assert not traj.converged
        assert len(traj) == 4
