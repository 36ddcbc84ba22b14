"""Measurement model, priors, and deterministic synthetic-data generation.

The measurement model is ``y(b) = A(b) x(b) + w(b)`` for channels
``b = 1..B`` at rate ``R = M/N``.  Rows of the signal matrix are i.i.d.
Bernoulli-Gauss: zero with probability ``1 - epsilon``, otherwise a
zero-mean Gaussian vector with covariance ``sigma_x``.  Noise rows are
i.i.d. ``N(0, sigma_w)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InsufficientSamples
from .rng import stream

MMV = "mmv"
DCS = "dcs"

_SYM_RTOL = 1e-12


def _as_cov(a, name, require_pd):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    scale = max(np.abs(a).max(), 1.0)
    if np.abs(a - a.T).max() > _SYM_RTOL * scale:
        raise ValueError(f"{name} is not symmetric")
    a = 0.5 * (a + a.T)
    eigs = np.linalg.eigvalsh(a)
    if require_pd and eigs.min() <= 0:
        raise ValueError(f"{name} must be positive definite (min eigenvalue {eigs.min():g})")
    if not require_pd and eigs.min() < -_SYM_RTOL * scale:
        raise ValueError(f"{name} must be positive semidefinite (min eigenvalue {eigs.min():g})")
    return a


@dataclass(frozen=True)
class BgPrior:
    """Bernoulli-Gauss row prior: nonzero probability and nonzero-row covariance."""

    epsilon: float
    sigma_x: np.ndarray

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        object.__setattr__(self, "sigma_x", _as_cov(self.sigma_x, "sigma_x", require_pd=True))

    @property
    def b(self):
        return self.sigma_x.shape[0]


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian measurement-noise covariance across channels (PSD)."""

    sigma_w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sigma_w", _as_cov(self.sigma_w, "sigma_w", require_pd=False))

    @property
    def b(self):
        return self.sigma_w.shape[0]


@dataclass(frozen=True)
class MeasurementEnsemble:
    """The B measurement matrices; MMV stores the single shared matrix once."""

    mode: str
    matrices: tuple
    b: int

    def __post_init__(self):
        if self.mode not in (MMV, DCS):
            raise ValueError(f"mode must be '{MMV}' or '{DCS}', got {self.mode!r}")
        mats = tuple(np.asarray(a, dtype=float) for a in self.matrices)
        if self.mode == MMV and len(mats) != 1:
            raise ValueError("MMV ensemble must hold exactly one distinct matrix")
        if self.mode == DCS and len(mats) != self.b:
            raise ValueError(f"DCS ensemble needs {self.b} matrices, got {len(mats)}")
        shapes = {a.shape for a in mats}
        if len(shapes) != 1:
            raise DimensionMismatch(f"matrices disagree in shape: {shapes}")
        object.__setattr__(self, "matrices", mats)

    @property
    def m(self):
        return self.matrices[0].shape[0]

    @property
    def n(self):
        return self.matrices[0].shape[1]

    @property
    def rate(self):
        return self.m / self.n

    def matrix(self, b):
        """Measurement matrix of channel ``b`` (shared one in MMV mode)."""
        return self.matrices[0] if self.mode == MMV else self.matrices[b]


@dataclass(frozen=True)
class JointSparseSignal:
    """N x B signal matrix whose rows outside ``support`` are exactly zero."""

    x: np.ndarray
    support: np.ndarray = field(default=None)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        object.__setattr__(self, "x", x)
        if self.support is None:
            support = np.flatnonzero(np.any(x != 0.0, axis=1))
        else:
            support = np.asarray(self.support, dtype=int)
        object.__setattr__(self, "support", support)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def b(self):
        return self.x.shape[1]


@dataclass(frozen=True)
class MeasurementSet:
    """M x B matrix of acquired measurements."""

    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if not np.all(np.isfinite(y)):
            raise ValueError("measurements contain non-finite entries")
        object.__setattr__(self, "y", y)

    @property
    def m(self):
        return self.y.shape[0]

    @property
    def b(self):
        return self.y.shape[1]


@dataclass(frozen=True)
class ProblemInstance:
    """Everything a recovery run needs: matrices, measurements, noise covariance."""

    ensemble: MeasurementEnsemble
    y: np.ndarray
    noise: NoiseModel

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 2:
            raise DimensionMismatch(f"y must be M x B, got shape {y.shape}")
        if y.shape[0] != self.ensemble.m:
            raise DimensionMismatch(
                f"y has {y.shape[0]} rows but matrices have {self.ensemble.m}")
        if y.shape[1] != self.ensemble.b or self.noise.b != self.ensemble.b:
            raise DimensionMismatch("channel counts of y, ensemble, and noise disagree")
        object.__setattr__(self, "y", y)

    @property
    def mode(self):
        return self.ensemble.mode

    @property
    def b(self):
        return self.ensemble.b

    @property
    def rate(self):
        return self.ensemble.rate


def generate_matrix(m, n, kind, seed):
    """Draw an M x N measurement matrix with unit-norm columns.

    ``kind='gaussian'``: i.i.d. normal entries, then each column rescaled to
    unit norm.  ``kind='rademacher'``: entries +-1/sqrt(m), whose columns have
    unit norm by construction.
    """
    if m < 1 or n < 1:
        raise DimensionMismatch(f"matrix dimensions must be positive, got {m} x {n}")
    rng = stream(seed, 0)
    if kind == "gaussian":
        a = rng.standard_normal((m, n))
        a /= np.linalg.norm(a, axis=0, keepdims=True)
    elif kind == "rademacher":
        a = np.where(rng.random((m, n)) < 0.5, -1.0, 1.0) / np.sqrt(m)
    else:
        raise ValueError(f"unknown matrix kind {kind!r}")
    return a


def generate_ensemble(m, n, kind, mode, b, seed):
    """Draw a measurement ensemble; DCS channels use independent substreams."""
    if mode == MMV:
        mats = (generate_matrix(m, n, kind, seed),)
    else:
        # substream per channel keeps the B matrices mutually independent
        mats = tuple(_channel_matrix(m, n, kind, seed, ch) for ch in range(b))
    return MeasurementEnsemble(mode=mode, matrices=mats, b=b)


def _channel_matrix(m, n, kind, seed, channel):
    rng = stream(seed, channel)
    if kind == "gaussian":
        a = rng.standard_normal((m, n))
        a /= np.linalg.norm(a, axis=0, keepdims=True)
    elif kind == "rademacher":
        a = np.where(rng.random((m, n)) < 0.5, -1.0, 1.0) / np.sqrt(m)
    else:
        raise ValueError(f"unknown matrix kind {kind!r}")
    return a


def sample_signal(prior, n, seed):
    """Draw a jointly sparse signal: rows zero w.p. 1-epsilon, else N(0, sigma_x)."""
    b = prior.b
    active = stream(seed, 0).random(n) < prior.epsilon
    x = np.zeros((n, b))
    k = int(active.sum())
    if k:
        chol = np.linalg.cholesky(prior.sigma_x)
        x[active] = stream(seed, 1).standard_normal((k, b)) @ chol.T
    return JointSparseSignal(x=x, support=np.flatnonzero(active))


def measure(x, ens, noise, seed):
    """Apply the measurement model ``y(b) = A(b) x(b) + w(b)``."""
    xmat = x.x if isinstance(x, JointSparseSignal) else np.asarray(x, dtype=float)
    if xmat.shape != (ens.n, ens.b):
        raise DimensionMismatch(
            f"signal shape {xmat.shape} does not match ensemble ({ens.n}, {ens.b})")
    if noise.b != ens.b:
        raise DimensionMismatch("noise channel count does not match ensemble")
    if ens.mode == MMV:
        y = ens.matrices[0] @ xmat
    else:
        y = np.column_stack([ens.matrix(ch) @ xmat[:, ch] for ch in range(ens.b)])
    y += _noise_rows(noise, ens.m, seed)
    return MeasurementSet(y=y)


def _noise_rows(noise, m, seed):
    # eigendecomposition factor tolerates PSD input (clamps tiny negatives)
    eigs, vecs = np.linalg.eigh(noise.sigma_w)
    root = vecs * np.sqrt(np.clip(eigs, 0.0, None))
    return stream(seed, 0).standard_normal((m, noise.b)) @ root.T


def infer_signal_covariance(y, noise, mode, rate):
    """Estimate ``cov{x_n}`` from the measurement covariance.

    For unit-norm-column matrices ``cov{y_m} = sigma_w + cov{x_n}/R`` (MMV),
    with the diagonal projection applied in DCS mode.  The estimate is
    symmetrized and negative eigenvalues are clamped to zero.
    """
    ymat = y.y if isinstance(y, MeasurementSet) else np.asarray(y, dtype=float)
    m, b = ymat.shape
    if m < b:
        raise InsufficientSamples(f"need at least {b} measurement rows, got {m}")
    cov_y = (ymat.T @ ymat) / m
    est = rate * (cov_y - noise.sigma_w)
    est = 0.5 * (est + est.T)
    if mode == DCS:
        est = np.diag(np.diag(est))
    eigs, vecs = np.linalg.eigh(est)
    return (vecs * np.clip(eigs, 0.0, None)) @ vecs.T
