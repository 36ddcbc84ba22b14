import numpy as np
import pytest

from vbamp.errors import DivergenceError
from vbamp.model import (DCS, MMV, BgPrior, MeasurementEnsemble, NoiseModel,
                         ProblemInstance, generate_ensemble, measure,
                         sample_signal)
from vbamp.solver import (EmOptions, RunOptions, initial_state, vbamp_em_run,
                          vbamp_iterate, vbamp_run)


def make_problem(n=2000, b=2, rate=0.4, epsilon=0.1, sigma_x=None, sigma_w=None,
                 mode=MMV, seed=0):
    sigma_x = np.eye(b) if sigma_x is None else sigma_x
    sigma_w = 1e-4 * np.eye(b) if sigma_w is None else sigma_w
    m = int(rate * n)
    prior = BgPrior(epsilon, sigma_x)
    noise = NoiseModel(sigma_w)
    ens = generate_ensemble(m, n, "gaussian", mode, b, seed=seed)
    sig = sample_signal(prior, n, seed=seed + 1)
    y = measure(sig, ens, noise, seed=seed + 2)
    return ProblemInstance(ensemble=ens, y=y.y, noise=noise), prior, sig


class TestRunBasics:
    def test_zero_measurements_fixed_point(self):
        ens = generate_ensemble(50, 100, "gaussian", MMV, 2, seed=1)
        prob = ProblemInstance(ensemble=ens, y=np.zeros((50, 2)),
                               noise=NoiseModel(np.zeros((2, 2))))
        xhat, trace = vbamp_run(prob, BgPrior(0.1, np.eye(2)))
        assert np.all(xhat == 0.0)
        assert len(trace) == 1
        assert trace.converged

    def test_strong_recovery(self):
        prob, prior, sig = make_problem(n=2000, b=1, rate=0.5, epsilon=0.05,
                                        sigma_w=1e-8 * np.eye(1), seed=3)
        xhat, trace = vbamp_run(prob, prior)
        nmse = 10 * np.log10(np.sum((xhat - sig.x) ** 2) / np.sum(sig.x**2))
        assert nmse < -35.0
        assert trace.converged

    def test_options_validation(self):
        with pytest.raises(ValueError):
            RunOptions(t_max=0)
        with pytest.raises(ValueError):
            RunOptions(eps_tol=0.0)

    def test_trace_lengths_and_fields(self):
        prob, prior, _ = make_problem(seed=5)
        _, trace = vbamp_run(prob, prior, RunOptions(t_max=7, eps_tol=1e-30))
        assert len(trace) == 7
        for t, rec in enumerate(trace.records, 1):
            assert rec.t == t
            assert rec.sigma_v.shape == (2, 2)
            assert rec.mse_hat_db.shape == (2,)


class TestIterate:
    def test_equivariance_single_iteration(self):
        # one MMV iteration commutes with any nonsingular channel mixing
        rng = np.random.default_rng(9)
        for b in (2, 3):
            prob, prior, _ = make_problem(n=600, b=b, rate=0.5, seed=10 + b)
            state = initial_state(prob)
            state = vbamp_iterate(state, prob, prior)      # leave the start
            t = rng.standard_normal((b, b)) + 0.5 * np.eye(b)
            assert abs(np.linalg.det(t)) > 1e-3

            plain = vbamp_iterate(state, prob, prior)

            t_prob = ProblemInstance(
                ensemble=prob.ensemble, y=prob.y @ t.T,
                noise=NoiseModel(t @ prob.noise.sigma_w @ t.T))
            t_prior = BgPrior(prior.epsilon, t @ prior.sigma_x @ t.T)
            t_state = type(state)(
                t=state.t, xhat=state.xhat @ t.T, residual=state.residual @ t.T,
                sigma_v=t @ state.sigma_v @ t.T)
            mapped = vbamp_iterate(t_state, t_prob, t_prior)

            scale = np.abs(plain.xhat).max()
            assert np.abs(mapped.xhat - plain.xhat @ t.T).max() < 1e-8 * scale
            rscale = np.abs(plain.residual).max()
            assert np.abs(mapped.residual - plain.residual @ t.T).max() \
                < 1e-8 * rscale
            vscale = np.abs(plain.sigma_v).max()
            assert np.abs(mapped.sigma_v - t @ plain.sigma_v @ t.T).max() \
                < 1e-8 * vscale

    def test_dcs_sigma_v_diagonal(self):
        prob, prior, _ = make_problem(b=3, mode=DCS, seed=21)
        xhat, trace = vbamp_run(prob, prior, RunOptions(t_max=5, eps_tol=1e-30))
        for rec in trace.records:
            off = rec.sigma_v - np.diag(np.diag(rec.sigma_v))
            assert np.all(off == 0.0)

    def test_decoupling_covariance(self):
        # u - x is approximately Gaussian with the tracked covariance
        prob, prior, sig = make_problem(n=10_000, b=2, rate=0.4, seed=31)
        state = initial_state(prob)
        for _ in range(12):
            state = vbamp_iterate(state, prob, prior)
        err = state.pseudo - sig.x
        emp = err.T @ err / err.shape[0]
        rel = np.linalg.norm(emp - state.sigma_v) / np.linalg.norm(state.sigma_v)
        assert rel < 0.10


class TestDivergence:
    def test_unnormalized_matrix_diverges(self):
        prob, prior, _ = make_problem(n=800, b=1, rate=0.5, seed=41)
        bad = MeasurementEnsemble(
            mode=MMV, matrices=(prob.ensemble.matrices[0] * 40.0,), b=1)
        bad_prob = ProblemInstance(ensemble=bad, y=prob.y, noise=prob.noise)
        with pytest.raises(DivergenceError) as err:
            vbamp_run(bad_prob, prior)
        assert err.value.trace is not None
        assert len(err.value.trace) >= 1


class TestEm:
    def test_truth_initialized_em_matches_oracle_run(self):
        prob, prior, sig = make_problem(n=4000, b=2, rate=0.4, epsilon=0.1,
                                        seed=51)
        x_plain, _ = vbamp_run(prob, prior)
        x_em, trace, fitted, fitted_noise = vbamp_em_run(
            prob, prior, RunOptions(em=EmOptions()))
        nmse_plain = 10 * np.log10(np.sum((x_plain - sig.x) ** 2)
                                   / np.sum(sig.x**2))
        nmse_em = 10 * np.log10(np.sum((x_em - sig.x) ** 2) / np.sum(sig.x**2))
        assert abs(nmse_plain - nmse_em) < 0.05

    def test_em_recovers_parameters_from_rough_start(self):
        prob, prior, sig = make_problem(n=6000, b=2, rate=0.4, epsilon=0.1,
                                        seed=53)
        init = BgPrior(0.5, np.eye(2))
        x_em, trace, fitted, fitted_noise = vbamp_em_run(
            prob, init, RunOptions(em=EmOptions()))
        assert abs(fitted.epsilon - 0.1) < 0.02
        np.testing.assert_allclose(fitted.sigma_x, prior.sigma_x, atol=0.15)
        assert np.linalg.eigvalsh(fitted_noise.sigma_w).min() >= 0.0

    def test_em_snapshots_in_trace(self):
        prob, prior, _ = make_problem(n=1000, b=2, seed=55)
        _, trace, _, _ = vbamp_em_run(prob, BgPrior(0.5, np.eye(2)),
                                      RunOptions(t_max=6, em=EmOptions()))
        assert all(rec.em_epsilon is not None for rec in trace.records)


class TestSigmaVTrajectory:
    def test_sigma_v_settles_within_budget(self):
        # run past the estimate-change stop: sigma_v reaches a 1e-6 relative
        # change well inside the 200-iteration budget
        prob, prior, _ = make_problem(n=3000, b=2, rate=0.3, seed=61)
        _, trace = vbamp_run(prob, prior, RunOptions(t_max=200, eps_tol=1e-14))
        rels = [np.abs(b.sigma_v - a.sigma_v).max() / np.abs(a.sigma_v).max()
                for a, b in zip(trace.records[:-1], trace.records[1:])]
        assert len(trace) <= 200
        assert min(rels) < 1e-6
