"""Vector-prior Bayesian AMP iteration for MMV/DCS recovery.

Each iteration forms per-channel pseudo-data ``u = xhat + A^T r``, estimates
the effective-noise covariance from the empirical residual covariance
(diagonal-projected in DCS mode), applies the joint BG denoiser to every
row, and rebuilds the residual with the Onsager correction

    r_m <- y_m - (A xhat)_m + (1/M) [sum_n F'(u_n)] r_m^prev .

The Jacobians are evaluated at the same ``u`` that produced ``xhat`` and
multiply the previous residual; the correction keeps u - x approximately
Gaussian with covariance ``sigma_v`` across iterations.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .denoiser import BgDenoiser
from .errors import DimensionMismatch, DivergenceError
from .model import DCS, MMV, BgPrior, NoiseModel

# Residual-energy growth factor treated as divergence.
_DIVERGENCE_FACTOR = 1e6


@dataclass
class VbampState:
    """Mutable per-iteration state; ``pseudo`` holds the u that produced xhat."""

    t: int
    xhat: np.ndarray
    residual: np.ndarray
    sigma_v: np.ndarray
    pseudo: np.ndarray = None


@dataclass(frozen=True)
class EmOptions:
    """On-the-fly prior refitting: one EM step per iteration after burn-in."""

    burn_in: int = 3
    update_period: int = 1


@dataclass(frozen=True)
class RunOptions:
    t_max: int = 200
    eps_tol: float = 1e-6
    em: EmOptions = None

    def __post_init__(self):
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if self.eps_tol <= 0:
            raise ValueError("eps_tol must be positive")


@dataclass
class TraceRecord:
    t: int
    sigma_v: np.ndarray
    mse_hat_db: np.ndarray
    rel_change: float
    em_epsilon: float = None
    em_sigma_x: np.ndarray = None
    em_fallback: bool = False


@dataclass
class RunTrace:
    records: list = field(default_factory=list)
    converged: bool = False

    def __len__(self):
        return len(self.records)

    @property
    def sigma_v(self):
        return [rec.sigma_v for rec in self.records]

    @property
    def mse_hat_db(self):
        return np.array([rec.mse_hat_db for rec in self.records])


def initial_state(problem):
    """Algorithm start: zero estimate, residual equal to the measurements."""
    n, b = problem.ensemble.n, problem.b
    sigma_v0 = problem.y.T @ problem.y / problem.ensemble.m
    if problem.mode == DCS:
        sigma_v0 = np.diag(np.diag(sigma_v0))
    return VbampState(
        t=0,
        xhat=np.zeros((n, b)),
        residual=problem.y.copy(),
        sigma_v=sigma_v0,
    )


def _residual_covariance(residual, mode):
    # 1/M normalization: this estimates the asymptotic effective-noise covariance
    sigma = residual.T @ residual / residual.shape[0]
    sigma = 0.5 * (sigma + sigma.T)
    if mode == DCS:
        sigma = np.diag(np.diag(sigma))
    return sigma


def _pseudo_data(state, problem):
    ens = problem.ensemble
    if problem.mode == MMV:
        return state.xhat + ens.matrices[0].T @ state.residual
    cols = [state.xhat[:, ch] + ens.matrix(ch).T @ state.residual[:, ch]
            for ch in range(problem.b)]
    return np.column_stack(cols)


def _apply_forward(ens, xhat):
    if ens.mode == MMV:
        return ens.matrices[0] @ xhat
    return np.column_stack([ens.matrix(ch) @ xhat[:, ch] for ch in range(ens.b)])


def vbamp_iterate(state, problem, prior):
    """One iteration of the vector AMP recursion; pure in its inputs."""
    if state.xhat.shape != (problem.ensemble.n, problem.b):
        raise DimensionMismatch("state xhat shape does not match problem")
    u = _pseudo_data(state, problem)
    sigma_v = _residual_covariance(state.residual, problem.mode)
    core = BgDenoiser(prior, sigma_v)
    xhat, jac_sum = core.denoise_with_jacobian_sum(u)
    m = problem.ensemble.m
    onsager = state.residual @ (jac_sum.T / m)
    residual = problem.y - _apply_forward(problem.ensemble, xhat) + onsager
    return VbampState(t=state.t + 1, xhat=xhat, residual=residual,
                      sigma_v=sigma_v, pseudo=u)


def _mse_hat_db(sigma_v, noise, rate):
    mse = rate * (np.diag(sigma_v) - np.diag(noise.sigma_w))
    return np.where(mse > 0, 10.0 * np.log10(np.maximum(mse, 1e-300)), -999.0)


def _check_finite(state, trace, energy0):
    bad = not (np.all(np.isfinite(state.xhat)) and np.all(np.isfinite(state.residual)))
    if not bad and energy0 > 0:
        bad = np.trace(state.sigma_v) > _DIVERGENCE_FACTOR * energy0
    if bad:
        raise DivergenceError(f"iteration {state.t} diverged", trace=trace)


def _run(problem, prior, opts):
    state = initial_state(problem)
    trace = RunTrace()
    energy0 = np.trace(state.sigma_v)
    rate = problem.rate
    em = _EmUpdater(prior, problem, opts.em) if opts.em is not None else None

    for _ in range(opts.t_max):
        prev = state
        if em is not None:
            state, prior = _iterate_with_em(state, problem, prior, em)
        else:
            state = vbamp_iterate(state, problem, prior)
        num = np.sum((state.xhat - prev.xhat) ** 2)
        den = np.sum(prev.xhat ** 2)
        rel = num / den if den > 0 else (0.0 if num == 0 else np.inf)
        rec = TraceRecord(
            t=state.t,
            sigma_v=state.sigma_v.copy(),
            mse_hat_db=_mse_hat_db(state.sigma_v, problem.noise, rate),
            rel_change=rel,
        )
        if em is not None:
            rec.em_epsilon = prior.epsilon
            rec.em_sigma_x = prior.sigma_x.copy()
            rec.em_fallback = em.fell_back
        trace.records.append(rec)
        _check_finite(state, trace, energy0)
        if num <= opts.eps_tol * den:
            trace.converged = True
            break
    return state, trace, prior, em


def vbamp_run(problem, prior, opts=None):
    """Run the AMP recursion to convergence or ``t_max``.

    Stops when the summed squared change of the estimate falls below
    ``eps_tol`` times its previous squared norm.  Returns the final estimate
    and a per-iteration trace (effective-noise covariance, predicted MSE per
    channel, relative change).
    """
    state, trace, _, _ = _run(problem, prior, opts or RunOptions())
    return state.xhat, trace


def vbamp_em_run(problem, structure, opts=None):
    """AMP with on-the-fly EM refitting of the BG prior parameters.

    ``structure`` supplies the channel count and the initial parameter
    guess.  Returns ``(xhat, trace, fitted_prior, fitted_noise)``.
    """
    opts = opts or RunOptions(em=EmOptions())
    if opts.em is None:
        opts = replace(opts, em=EmOptions())
    state, trace, prior, em = _run(problem, structure, opts)
    return state.xhat, trace, prior, em.noise_estimate()


def _iterate_with_em(state, problem, prior, em):
    # same as vbamp_iterate, but the prior is refit between the covariance
    # estimate and the denoising step
    u = _pseudo_data(state, problem)
    sigma_v = _residual_covariance(state.residual, problem.mode)
    prior = em.update(u, sigma_v, state.t + 1)
    core = BgDenoiser(prior, sigma_v)
    xhat, jac_sum = core.denoise_with_jacobian_sum(u)
    m = problem.ensemble.m
    onsager = state.residual @ (jac_sum.T / m)
    residual = problem.y - _apply_forward(problem.ensemble, xhat) + onsager
    new_state = VbampState(t=state.t + 1, xhat=xhat, residual=residual,
                           sigma_v=sigma_v, pseudo=u)
    return new_state, prior


class _EmUpdater:
    """One EM step per iteration on the two-component row mixture.

    The rows ``u_n`` follow ``(1 - eps) N(0, sigma_v) + eps N(0, sigma_u)``.
    E-step responsibilities come from the current fit; the M-step re-estimates
    ``eps`` as the mean responsibility and ``sigma_u`` as the responsibility-
    weighted second moment; the prior covariance is the noise-discounted
    ``sigma_u - sigma_v`` clamped back to PSD.
    """

    _EPS_FLOOR = 1e-6

    def __init__(self, init_prior, problem, options):
        self.prior = init_prior
        self.problem = problem
        self.options = options
        self.fell_back = False
        self._last_sigma_v = None

    def update(self, u, sigma_v, t):
        self._last_sigma_v = sigma_v
        if t <= self.options.burn_in or (t - self.options.burn_in - 1) % self.options.update_period:
            return self.prior
        resp = BgDenoiser(self.prior, sigma_v).ratio(u)
        eps_new = float(resp.mean())
        total = resp.sum()
        self.fell_back = False
        if eps_new < self._EPS_FLOOR or total <= 0:
            self.fell_back = True
            return self.prior
        sigma_u = (u * resp[:, None]).T @ u / total
        sigma_x = _clamp_psd(0.5 * (sigma_u + sigma_u.T) - sigma_v)
        floor = 1e-12 * max(np.trace(sigma_x), 1.0) / sigma_x.shape[0]
        if np.linalg.eigvalsh(sigma_x).min() <= floor:
            self.fell_back = True
            return self.prior
        self.prior = BgPrior(epsilon=min(eps_new, 1.0), sigma_x=sigma_x)
        return self.prior

    def noise_estimate(self):
        """Complement estimate of the measurement-noise covariance.

        Uses ``cov{y} = sigma_w + cov{x}/R`` with the fitted signal
        covariance ``eps * sigma_x``.
        """
        y = self.problem.y
        cov_y = y.T @ y / y.shape[0]
        est = cov_y - self.prior.epsilon * self.prior.sigma_x / self.problem.rate
        if self.problem.mode == DCS:
            est = np.diag(np.diag(est))
        return NoiseModel(sigma_w=_clamp_psd(0.5 * (est + est.T)))


def _clamp_psd(a):
    eigs, vecs = np.linalg.eigh(a)
    return (vecs * np.clip(eigs, 0.0, None)) @ vecs.T
