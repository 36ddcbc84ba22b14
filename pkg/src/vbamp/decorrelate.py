"""Joint decorrelation of signal and noise covariances.

A congruence ``T`` built from a Cholesky whitening of ``sigma_w`` followed
by an eigendecomposition maps ``sigma_x`` to the identity and ``sigma_w`` to
the diagonal ``1/lambda``; the per-channel SNRs are ``epsilon * lambda``.
Applying ``T`` to the measurements yields an equivalent recovery problem
with uncorrelated BG prior and diagonal noise.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .errors import SingularCovariance
from .model import DCS, BgPrior, NoiseModel, ProblemInstance

_RANK_REL = 1e-12


@dataclass(frozen=True)
class Diagonalizer:
    """Transform ``t``, eigenvalues ``lam`` (descending), per-channel SNRs."""

    t: np.ndarray
    lam: np.ndarray
    snr: np.ndarray

    @property
    def b(self):
        return self.t.shape[0]

    def inverse(self):
        return np.linalg.inv(self.t)


def _check_full_rank(sigma, name):
    eigs = np.linalg.eigvalsh(sigma)
    if eigs.min() <= _RANK_REL * np.trace(sigma) / sigma.shape[0]:
        raise SingularCovariance(name)


def joint_diagonalizer(sigma_x, sigma_w, epsilon):
    """Build the congruence that whitens the signal and diagonalizes the noise.

    Eigenvalues are sorted descending; each eigenvector's largest-magnitude
    entry is made positive so the transform is reproducible across platforms.
    """
    sigma_x = np.asarray(sigma_x, dtype=float)
    sigma_w = np.asarray(sigma_w, dtype=float)
    _check_full_rank(sigma_x, "sigma_x")
    _check_full_rank(sigma_w, "sigma_w")
    p = cholesky(sigma_w, lower=True)
    pinv = solve_triangular(p, np.eye(p.shape[0]), lower=True)
    g = pinv @ sigma_x @ pinv.T
    g = 0.5 * (g + g.T)
    lam, q = np.linalg.eigh(g)
    # descending, ties in first-occurrence order
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    q = q[:, order]
    # column sign convention: largest-magnitude entry positive
    picks = np.abs(q).argmax(axis=0)
    signs = np.sign(q[picks, np.arange(q.shape[1])])
    signs[signs == 0] = 1.0
    q = q * signs
    t = (q / np.sqrt(lam)).T @ pinv
    return Diagonalizer(t=t, lam=lam, snr=epsilon * lam)


def transform_problem(problem, prior, diag):
    """Map a problem to the decorrelated domain: identity prior, diagonal noise.

    Measurement rows become ``T y_m``; the matrices are untouched.  In DCS
    mode the transform is only meaningful when the signal covariance is
    already diagonal (the per-channel matrices would otherwise be mixed).
    """
    if problem.mode == DCS:
        off = prior.sigma_x - np.diag(np.diag(prior.sigma_x))
        if np.abs(off).max() > _RANK_REL * max(np.abs(prior.sigma_x).max(), 1.0):
            raise ValueError("DCS decorrelation requires a diagonal signal covariance")
    y_t = problem.y @ diag.t.T
    new_prior = BgPrior(epsilon=prior.epsilon, sigma_x=np.eye(diag.b))
    new_noise = NoiseModel(sigma_w=np.diag(1.0 / diag.lam))
    new_problem = ProblemInstance(ensemble=problem.ensemble, y=y_t, noise=new_noise)
    return new_problem, new_prior


def snr_bounds(sigma_x, sigma_w, epsilon):
    """Eigenvalue-ratio envelope containing every per-channel SNR.

    Returns ``(epsilon * min eig(sigma_x) / max eig(sigma_w),
    epsilon * max eig(sigma_x) / min eig(sigma_w))``; the upper bound is
    infinite when the noise covariance is rank deficient.
    """
    ex = np.linalg.eigvalsh(np.asarray(sigma_x, dtype=float))
    ew = np.linalg.eigvalsh(np.asarray(sigma_w, dtype=float))
    lower = epsilon * max(ex.min(), 0.0) / ew.max()
    tol = _RANK_REL * ew.sum() / len(ew)
    upper = np.inf if ew.min() <= tol else epsilon * ex.max() / ew.min()
    return lower, upper
