"""Multivariate Bernoulli-Gauss MMSE denoiser.

Given a pseudo-measurement ``u = x + v`` with ``v ~ N(0, sigma_v)`` and the
BG row prior, the posterior mean is a Wiener estimate followed by a joint
shrinkage,

    F(u) = W u,   W = ratio(u) * sigma_x @ inv(sigma_u),
    sigma_u = sigma_x + sigma_v,

where ``ratio(u)`` is the posterior probability that the row is nonzero.
The Jacobian is the rank-one correction

    F'(u) = W - (1 - ratio(u)) * W u u^T (inv(sigma_u) - inv(sigma_v)),

and the posterior covariance satisfies ``cov{x | u} = F'(u) sigma_v``.

All per-row quantities are evaluated in batch; the expensive factorizations
depend only on ``(sigma_v, sigma_x)`` and are computed once per iteration.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import UnsupportedDimension

# Relative eigenvalue floor below which sigma_v is jittered; inverting
# sigma_u^-1 - sigma_v^-1 needs sigma_v comfortably full rank.
JITTER_REL = 1e-12


def _jitter_spd(sigma):
    sigma = 0.5 * (sigma + sigma.T)
    floor = JITTER_REL * max(np.trace(sigma), 0.0) / sigma.shape[0]
    if floor == 0.0:
        floor = 1e-300
    eigs = np.linalg.eigvalsh(sigma)
    if eigs.min() < floor:
        sigma = sigma + (floor - min(eigs.min(), 0.0)) * np.eye(sigma.shape[0])
    return sigma


@dataclass(frozen=True)
class EffectiveChannel:
    """Effective-noise covariance of the decoupled measurements."""

    sigma_v: np.ndarray

    def __post_init__(self):
        sv = np.asarray(self.sigma_v, dtype=float)
        if sv.ndim != 2 or sv.shape[0] != sv.shape[1]:
            raise ValueError(f"sigma_v must be square, got {sv.shape}")
        object.__setattr__(self, "sigma_v", _jitter_spd(sv))

    @property
    def b(self):
        return self.sigma_v.shape[0]


@dataclass(frozen=True)
class DenoiseResult:
    xhat: np.ndarray
    jacobian: np.ndarray
    ratio: float


class BgDenoiser:
    """Batch BG denoiser with factorizations cached per (sigma_v, prior).

    The cache is read-only after construction, so one instance can serve all
    N rows of an iteration, from any number of threads.
    """

    def __init__(self, prior, sigma_v):
        sigma_v = _jitter_spd(np.asarray(sigma_v, dtype=float))
        b = prior.b
        if sigma_v.shape != (b, b):
            raise ValueError(f"sigma_v shape {sigma_v.shape} does not match prior B={b}")
        sigma_u = prior.sigma_x + sigma_v
        self.prior = prior
        self.sigma_v = sigma_v
        self.sigma_u = sigma_u
        self._cho_v = cho_factor(sigma_v, lower=True)
        self._cho_u = cho_factor(sigma_u, lower=True)
        self.inv_v = cho_solve(self._cho_v, np.eye(b))
        self.inv_u = cho_solve(self._cho_u, np.eye(b))
        self.wiener = prior.sigma_x @ self.inv_u          # sigma_x inv(sigma_u)
        self.inv_diff = self.inv_u - self.inv_v
        self._logdet_v = 2.0 * np.log(np.diag(self._cho_v[0])).sum()
        self._logdet_u = 2.0 * np.log(np.diag(self._cho_u[0])).sum()
        eps = prior.epsilon
        self._log_eps = np.log(eps)
        self._log_1m_eps = np.log1p(-eps) if eps < 1.0 else -np.inf

    def _quad(self, u, inv):
        return np.einsum("nb,bc,nc->n", u, inv, u)

    def log_ratio(self, u):
        """Log posterior nonzero probability, computed stably in the log domain."""
        u = np.atleast_2d(u)
        log_num = self._log_eps - 0.5 * (self._logdet_u + self._quad(u, self.inv_u))
        log_zero = self._log_1m_eps - 0.5 * (self._logdet_v + self._quad(u, self.inv_v))
        return log_num - np.logaddexp(log_zero, log_num)

    def ratio(self, u):
        return np.exp(self.log_ratio(u))

    def denoise(self, u):
        """Posterior means for a batch of rows ``u`` of shape (N, B)."""
        u = np.atleast_2d(u)
        return self.ratio(u)[:, None] * (u @ self.wiener.T)

    def denoise_with_jacobian_sum(self, u):
        """Batch posterior means plus the summed Jacobian over all rows.

        The sum is what the Onsager correction needs; accumulating it here
        avoids a second pass over the N rows.
        """
        u = np.atleast_2d(u)
        pi = self.ratio(u)
        wu = u @ self.wiener.T
        xhat = pi[:, None] * wu
        # sum_n pi (1-pi) * (W u) (u^T (inv_u - inv_v)) as a weighted outer product
        weights = pi * (1.0 - pi)
        rank_one = (wu * weights[:, None]).T @ (u @ self.inv_diff.T)
        jac_sum = pi.sum() * self.wiener - rank_one
        return xhat, jac_sum

    def jacobian(self, u):
        """Jacobian of the denoiser at a single row ``u``."""
        u = np.asarray(u, dtype=float).reshape(-1)
        pi = float(self.ratio(u[None, :])[0])
        wu = self.wiener @ u
        return pi * self.wiener - pi * (1.0 - pi) * np.outer(wu, self.inv_diff @ u)

    def conditional_covariance(self, u):
        """Posterior covariance ``cov{x | u}`` from the two-component mixture.

        With probability ``ratio`` the row is Gaussian with the Wiener
        posterior ``(m, sigma_post)``, otherwise it is the point mass at 0:
        ``cov = ratio * sigma_post + ratio (1 - ratio) m m^T``.
        """
        u = np.asarray(u, dtype=float).reshape(-1)
        pi = float(self.ratio(u[None, :])[0])
        m = self.wiener @ u
        sigma_post = self.prior.sigma_x - self.wiener @ self.prior.sigma_x
        sigma_post = 0.5 * (sigma_post + sigma_post.T)
        return pi * sigma_post + (pi * (1.0 - pi)) * np.outer(m, m)


def bg_denoise(u, channel, prior):
    """Denoise one row; returns the estimate, Jacobian, and nonzero ratio."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if not np.all(np.isfinite(u)):
        raise ValueError("pseudo-measurement contains non-finite entries")
    core = BgDenoiser(prior, channel.sigma_v)
    pi = float(core.ratio(u[None, :])[0])
    return DenoiseResult(xhat=pi * (core.wiener @ u), jacobian=core.jacobian(u), ratio=pi)


def bg_jacobian(u, channel, prior):
    """Jacobian of the BG posterior mean at ``u``."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if not np.all(np.isfinite(u)):
        raise ValueError("pseudo-measurement contains non-finite entries")
    return BgDenoiser(prior, channel.sigma_v).jacobian(u)


def conditional_covariance(u, channel, prior):
    """Posterior covariance ``cov{x | u}`` at ``u``."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if not np.all(np.isfinite(u)):
        raise ValueError("pseudo-measurement contains non-finite entries")
    return BgDenoiser(prior, channel.sigma_v).conditional_covariance(u)


def _tensor_gauss_nodes(b, nodes_per_dim):
    from scipy.special import roots_hermitenorm

    nodes, weights = roots_hermitenorm(nodes_per_dim)
    weights = weights / np.sqrt(2.0 * np.pi)
    grids = np.meshgrid(*([nodes] * b), indexing="ij")
    h = np.stack([g.ravel() for g in grids], axis=1)
    w = np.prod(np.stack(np.meshgrid(*([weights] * b), indexing="ij"), 0), 0).ravel()
    return h, w


def mmse_oracle(u, channel, prior, nodes_per_dim=64):
    """Posterior mean by brute-force integration, independent of the closed form.

    Evaluates the numerator and denominator integrals of the posterior mean
    by tensor Gauss-Hermite quadrature over the Gaussian mixture component;
    the point-mass term is added in closed form.  To keep the integrand
    resolvable, quadrature nodes follow whichever Gaussian factor (prior
    component or likelihood) is narrower; the other factor is evaluated as a
    smooth density on those nodes.  Supports B <= 4 only.
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    b = prior.b
    if u.shape != (b,):
        raise ValueError(f"u must have length {b}")
    if b > 4:
        raise UnsupportedDimension("tensor quadrature oracle supports B <= 4")
    sigma_v = _jitter_spd(np.asarray(channel.sigma_v, dtype=float))
    sigma_x = prior.sigma_x
    eps = prior.epsilon

    h, w = _tensor_gauss_nodes(b, nodes_per_dim)
    if np.linalg.eigvalsh(sigma_v).min() <= np.linalg.eigvalsh(sigma_x).min():
        # nodes under N(u, sigma_v); integrand is the prior component density
        z = u[None, :] + h @ np.linalg.cholesky(sigma_v).T
        log_f = _log_gauss(z, sigma_x)
    else:
        # nodes under N(0, sigma_x); integrand is the likelihood density
        z = h @ np.linalg.cholesky(sigma_x).T
        log_f = _log_gauss(u[None, :] - z, sigma_v)
    log_pm = float(_log_gauss(u[None, :], sigma_v)[0])
    shift = max(log_f.max(), log_pm)
    dens = np.exp(log_f - shift)
    numer = (w * dens) @ z
    denom_gauss = w @ dens
    point_mass = (1.0 - eps) * np.exp(log_pm - shift)
    return eps * numer / (point_mass + eps * denom_gauss)


def _log_gauss(x, sigma):
    cho = cho_factor(sigma, lower=True)
    logdet = 2.0 * np.log(np.diag(cho[0])).sum()
    quad = np.einsum("kb,kb->k", x, cho_solve(cho, x.T).T)
    return -0.5 * (x.shape[1] * np.log(2.0 * np.pi) + logdet + quad)
