"""Replica free energy of the decorrelated BG channel and its extrema.

The potential is defined on the per-channel MSE vector ``E`` for the
canonical model (identity signal covariance, diagonal noise, unit-norm
measurement columns):

    F(E) = eps zeta(gamma) + (1 - eps) zeta(gamma / (1 + gamma))
           - (R/2) sum_b [ log(2 pi R / gamma(b)) + gamma(b) sigma_w2(b)
                           - ((1 - eps)/R) gamma(b) / (1 + gamma(b)) ],

    gamma(b) = R / (E(b) + R sigma_w2(b)),

(the zeta of the signal-present mixture branch carries weight eps; carrying
it with weight 1 - eps breaks stationarity at the fixed points of the AMP
recursion, which pins down this assignment),

    zeta(eta) = E_h[ log( eps prod_b (1 + gamma(b))^(-1/2)
                          + (1 - eps) exp(-1/2 sum_b eta(b) h(b)^2) ) ],

with ``h`` standard Gaussian.  Local maxima of F are the stable fixed
points of the AMP recursion; the global maximum is the MMSE.  ``sigma_w2``
is taken in the column-normalized measurement convention (the R-scaling of
the noise term is already folded into the formula above).

Evaluation is by tensor Gauss-Hermite quadrature for B <= 4.  When the
channels share a common ``eta`` the quadratic form collapses onto chi-square
variables, which a generalized Gauss-Laguerre rule integrates in one
dimension; that route is also the independent check used by the tests.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import ConfigError, UnsupportedDimension
from .rng import stream

_DEFAULT_ZETA_NODES = {1: 96, 2: 64, 3: 32, 4: 20}
_DEFAULT_GRID = {1: 200, 2: 200, 3: 64}
_DEFAULT_LAGUERRE_NODES = 160
_DISTINCT_LOG10 = 1e-3          # extrema closer than this in log10(E) coincide
_REFINE_REL = 1e-4              # golden-section stopping width, relative in E
_MSE_FLOOR = 1e-8


@dataclass(frozen=True)
class FreeEnergySpec:
    """Canonical-model parameters plus the quadrature budget."""

    rate: float
    epsilon: float
    sigma_w2: np.ndarray
    nodes_per_dim: int = None
    mc_samples: int = 0
    mc_seed: int = 0

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        sw = np.atleast_1d(np.asarray(self.sigma_w2, dtype=float))
        if np.any(sw < 0):
            raise ValueError("noise variances must be nonnegative")
        object.__setattr__(self, "sigma_w2", sw)

    @property
    def b(self):
        return self.sigma_w2.shape[0]

    @property
    def search_box(self):
        """Per-channel MSE interval [1e-8, eps + R sigma_w2(b)]."""
        return np.stack([np.full(self.b, _MSE_FLOOR),
                         self.epsilon + self.rate * self.sigma_w2])

    def zeta_nodes(self):
        if self.nodes_per_dim:
            return self.nodes_per_dim
        if self.b in _DEFAULT_ZETA_NODES:
            return _DEFAULT_ZETA_NODES[self.b]
        return 0


@dataclass
class FreeEnergyPoint:
    """A classified stationary point of the potential."""

    e: np.ndarray
    value: float
    grad: np.ndarray
    kind: str                    # local-max | local-min | saddle | boundary
    is_global_max: bool = False

    @property
    def e_db(self):
        return 10.0 * np.log10(self.e)


@dataclass
class PerformancePrediction:
    mmse: np.ndarray
    bamp_mse: np.ndarray
    gap: bool
    points: list = field(default_factory=list)


def gamma(e, spec):
    """Per-channel gamma(b) = R / (E(b) + R sigma_w2(b))."""
    e = np.asarray(e, dtype=float)
    denom = e + spec.rate * spec.sigma_w2
    if np.any(denom <= 0):
        raise ZeroDivisionError("E(b) + R sigma_w2(b) must be positive")
    return spec.rate / denom


_H_CAP = 9.0          # standard-Gaussian range beyond which everything is lost in e-36
_LAYER_SLACK = 80.0   # extra q-range kept past the mixture crossover layer


_GL_CACHE = {}


def _gl_nodes(n):
    if n not in _GL_CACHE:
        from numpy.polynomial.legendre import leggauss

        _GL_CACHE[n] = leggauss(n)
    return _GL_CACHE[n]


def _softplus(x):
    out = np.where(x > 36.0, x, 0.0)
    small = x <= 36.0
    out = out + np.where(small, np.log1p(np.exp(np.where(small, x, 0.0))), 0.0)
    return out


def _zeta_batch_gauss(etas, log_a, epsilon, nodes_per_dim, b):
    """zeta for a batch of (eta, log_a) rows via layer-adapted tensor quadrature.

    Writes ``zeta = log_a + E[log1p(exp(ell - q/2))]`` and integrates the
    bounded layer term with a tensor Gauss-Legendre rule whose per-channel
    extent tracks the crossover layer; this stays accurate for gammas up to
    the noise-floor scale where plain Gauss-Hermite nodes straddle the layer.
    """
    if epsilon >= 1.0:
        return log_a.copy()
    if epsilon <= 0.0:
        return -0.5 * etas.sum(axis=1)
    log_1m = np.log1p(-epsilon)
    rows = etas.shape[0]
    x01, w01 = _gl_nodes(nodes_per_dim)
    ell = log_1m - log_a                                     # (rows,)
    qmax = 2.0 * np.maximum(ell, 0.0) + _LAYER_SLACK
    with np.errstate(divide="ignore"):
        radius = np.minimum(np.sqrt(qmax[:, None] / np.maximum(etas, 1e-300)),
                            _H_CAP)                          # (rows, b)
    # per-channel nodes h on [0, radius] with folded Gaussian weight
    hs = 0.5 * radius[..., None] * (x01 + 1.0)               # (rows, b, k)
    ws = 0.5 * radius[..., None] * w01 * np.exp(-0.5 * hs**2) * (2.0 / np.sqrt(2.0 * np.pi))
    q = etas[..., None] * hs**2                              # (rows, b, k)

    out = np.empty(rows)
    k = nodes_per_dim
    step = max(1, int(2_000_000 // max(k**b, 1)))
    for lo in range(0, rows, step):
        hi = min(lo + step, rows)
        if b == 1:
            layer = _softplus(ell[lo:hi, None] - 0.5 * q[lo:hi, 0])
            out[lo:hi] = np.einsum("rk,rk->r", layer, ws[lo:hi, 0])
        elif b == 2:
            expo = q[lo:hi, 0, :, None] + q[lo:hi, 1, None, :]
            layer = _softplus(ell[lo:hi, None, None] - 0.5 * expo)
            out[lo:hi] = np.einsum("rij,ri,rj->r", layer, ws[lo:hi, 0], ws[lo:hi, 1])
        elif b == 3:
            expo = (q[lo:hi, 0, :, None, None] + q[lo:hi, 1, None, :, None]
                    + q[lo:hi, 2, None, None, :])
            layer = _softplus(ell[lo:hi, None, None, None] - 0.5 * expo)
            out[lo:hi] = np.einsum("rijk,ri,rj,rk->r", layer,
                                   ws[lo:hi, 0], ws[lo:hi, 1], ws[lo:hi, 2])
        else:
            expo = (q[lo:hi, 0, :, None, None, None]
                    + q[lo:hi, 1, None, :, None, None]
                    + q[lo:hi, 2, None, None, :, None]
                    + q[lo:hi, 3, None, None, None, :])
            layer = _softplus(ell[lo:hi, None, None, None, None] - 0.5 * expo)
            out[lo:hi] = np.einsum("rijkl,ri,rj,rk,rl->r", layer,
                                   ws[lo:hi, 0], ws[lo:hi, 1],
                                   ws[lo:hi, 2], ws[lo:hi, 3])
    return log_a + out


def _chi2_layer_nodes(dof, eta, ell, n_nodes):
    """Nodes/weights for E[f(eta * s)], s ~ chi-square(dof), layer-adapted.

    Uses the substitution s = t^2, which removes the s^(dof/2 - 1)
    singularity for dof = 1 and keeps the density polynomial * Gaussian.
    """
    qmax = 2.0 * max(ell, 0.0) + _LAYER_SLACK
    t_hi = min(np.sqrt(qmax / max(eta, 1e-300)), np.sqrt(dof) + _H_CAP)
    x01, w01 = _gl_nodes(n_nodes)
    t = 0.5 * t_hi * (x01 + 1.0)
    log_dens = ((dof - 1.0) * np.log(np.maximum(t, 1e-300)) - 0.5 * t**2
                + np.log(2.0) - 0.5 * dof * np.log(2.0) - gammaln(dof / 2.0))
    w = 0.5 * t_hi * w01 * np.exp(log_dens)
    return t**2, w


def _zeta_batch_grouped(etas, log_a, epsilon, n_nodes):
    """zeta for rows whose eta is constant within channel groups.

    Channels sharing an eta collapse onto one chi-square variable, so the
    integral runs over the (few) distinct groups only; the same layer-adapted
    Gauss-Legendre split is applied per group.
    """
    if epsilon >= 1.0:
        return log_a.copy()
    if epsilon <= 0.0:
        return -0.5 * etas.sum(axis=1)
    log_1m = np.log1p(-epsilon)
    out = np.empty(etas.shape[0])
    for i, eta in enumerate(etas):
        values, counts = np.unique(eta, return_counts=True)
        ell = log_1m - log_a[i]
        axes = [_chi2_layer_nodes(int(c), v, ell, n_nodes)
                for v, c in zip(values, counts)]
        grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
        s = np.stack([g.ravel() for g in grids], axis=1)
        w = np.prod(np.stack(np.meshgrid(*[a[1] for a in axes], indexing="ij"), 0),
                    0).ravel()
        layer = _softplus(ell - 0.5 * (s @ values))
        out[i] = log_a[i] + layer @ w
    return out


def _zeta_batch_mc(etas, log_a, epsilon, samples, seed, b):
    log_1m = np.log1p(-epsilon) if epsilon < 1.0 else -np.inf
    rng = stream(seed, 0)
    h2 = rng.standard_normal((samples, b)) ** 2
    out = np.empty(etas.shape[0])
    step = max(1, int(4_000_000 // samples))
    for lo in range(0, etas.shape[0], step):
        hi = min(lo + step, etas.shape[0])
        expo = -0.5 * (etas[lo:hi] @ h2.T)
        out[lo:hi] = np.logaddexp(log_a[lo:hi, None], log_1m + expo).mean(axis=1)
    return out


def zeta(eta, gammas, epsilon, quadrature=None):
    """The Gaussian-mixture entropy integral entering the free energy.

    ``eta`` sets the quadratic form in the exponent; ``gammas`` only enters
    the constant mixture weight.  ``quadrature`` is a node count per
    dimension (tensor Gauss-Hermite, B <= 4); beyond that an isotropy-grouped
    Laguerre rule or, failing that, Monte Carlo via a negative count.
    """
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    if np.any(eta < 0):
        raise ValueError("eta must be nonnegative")
    b = eta.shape[0]
    log_a = np.log(epsilon) - 0.5 * np.sum(np.log1p(gammas)) if epsilon > 0 else -np.inf
    etas = eta[None, :]
    log_as = np.array([log_a])
    if b <= 4:
        nodes = quadrature or _DEFAULT_ZETA_NODES[b]
        return float(_zeta_batch_gauss(etas, log_as, epsilon, nodes, b))
    if np.unique(eta).size <= 3:
        return float(_zeta_batch_grouped(etas, log_as, epsilon,
                                         quadrature or _DEFAULT_LAGUERRE_NODES))
    raise ConfigError("B > 4 with fully anisotropic eta needs a Monte Carlo budget; "
                      "use zeta_mc")


def zeta_mc(eta, gammas, epsilon, samples, seed=0):
    """Monte Carlo fallback for high-dimensional anisotropic eta."""
    if samples <= 0:
        raise ConfigError("Monte Carlo sample budget must be positive")
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    log_a = np.log(epsilon) - 0.5 * np.sum(np.log1p(gammas)) if epsilon > 0 else -np.inf
    return float(_zeta_batch_mc(eta[None, :], np.array([log_a]), epsilon,
                                samples, seed, eta.shape[0]))


def _free_energy_batch(e_rows, spec, zeta_impl=None):
    """Vectorized F over rows of MSE vectors."""
    e_rows = np.atleast_2d(np.asarray(e_rows, dtype=float))
    g = spec.rate / (e_rows + spec.rate * spec.sigma_w2[None, :])
    log1pg = np.log1p(g)
    log_a = np.log(spec.epsilon) - 0.5 * log1pg.sum(axis=1)
    shrunk = g / (1.0 + g)
    if zeta_impl is None:
        if spec.b <= 4:
            nodes = spec.zeta_nodes()
            zeta_impl = lambda etas, la: _zeta_batch_gauss(
                etas, la, spec.epsilon, nodes, spec.b)
        else:
            raise UnsupportedDimension(
                "tensor evaluation supports B <= 4; use the diagonal restriction")
    z1 = zeta_impl(g, log_a)
    z2 = zeta_impl(shrunk, log_a)
    det = (np.log(2.0 * np.pi * spec.rate) - np.log(g)
           + g * spec.sigma_w2[None, :]
           - ((1.0 - spec.epsilon) / spec.rate) * shrunk).sum(axis=1)
    return (spec.epsilon * z1 + (1.0 - spec.epsilon) * z2 - 0.5 * spec.rate * det)


def free_energy(e, spec):
    """F at a single MSE vector inside the search box."""
    e = np.atleast_1d(np.asarray(e, dtype=float))
    box = spec.search_box
    if np.any(e < box[0] * (1 - 1e-9)) or np.any(e > box[1] * (1 + 1e-9)):
        raise ValueError(f"E={e} outside the search box {box}")
    return float(_free_energy_batch(e[None, :], spec)[0])


def free_energy_diagonal(e_scalars, spec, n_nodes=None):
    """F restricted to the isotropic diagonal E * 1, any B.

    Uses the chi-square collapse of the Gaussian integral, so the cost is
    independent of B.  With anisotropic noise the channels keep distinct
    gammas and the rule tensors over the distinct values.
    """
    e_scalars = np.atleast_1d(np.asarray(e_scalars, dtype=float))
    rows = np.repeat(e_scalars[:, None], spec.b, axis=1)
    impl = lambda etas, la: _zeta_batch_grouped(
        etas, la, spec.epsilon, n_nodes or _DEFAULT_LAGUERRE_NODES)
    return _free_energy_batch(rows, spec, zeta_impl=impl)


def log_grid(spec, points_per_channel=None):
    """Log-spaced per-channel MSE grids spanning the search box."""
    pts = points_per_channel or _DEFAULT_GRID.get(min(spec.b, 3), 64)
    box = spec.search_box
    return [np.logspace(np.log10(box[0, b]), np.log10(box[1, b]), pts)
            for b in range(spec.b)]


def _axis_signs(values, idx):
    """Per-axis comparison with the two axis neighbors: +1 max, -1 min, 0 neither."""
    signs = []
    for ax in range(values.ndim):
        lo = list(idx); hi = list(idx)
        lo[ax] -= 1; hi[ax] += 1
        f = values[idx]
        f_lo = values[tuple(lo)]
        f_hi = values[tuple(hi)]
        if f > f_lo and f > f_hi:
            signs.append(1)
        elif f < f_lo and f < f_hi:
            signs.append(-1)
        else:
            signs.append(0)
    return signs


def _golden_max(fun, lo, hi, rel_tol):
    """Golden-section maximization of ``fun`` over log10(E) in [lo, hi]."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while (b - a) > rel_tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


def _refine(point_log10, signs, grids_log10, batch_fun, rel_tol):
    """Coordinate-wise golden-section ascent/descent from a grid candidate."""
    x = np.array(point_log10, dtype=float)
    for _ in range(40):
        moved = 0.0
        for ax, sign in enumerate(signs):
            if sign == 0:
                continue
            g = grids_log10[ax]
            pos = np.searchsorted(g, x[ax])
            lo = g[max(pos - 1, 0)]
            hi = g[min(pos + 1, len(g) - 1)]

            def along(t, ax=ax):
                e = x.copy()
                e[ax] = t
                val = batch_fun(10.0 ** e[None, :])[0]
                return val if sign > 0 else -val

            new = _golden_max(along, lo, hi, rel_tol)
            moved = max(moved, abs(new - x[ax]))
            x[ax] = new
        if moved < rel_tol:
            break
    return x


def stationary_points(spec, grid=None):
    """Locate and classify the extrema of F on a tensor MSE grid.

    Grid-local candidates are found by neighbor comparison, labelled by the
    per-axis pattern (max / min / saddle, boundary when on the box edge), and
    refined by coordinate-wise golden-section search.  For B >= 4 the search
    is restricted to the isotropic diagonal with per-channel line
    refinements; see ``diagonal_stationary_points``.
    """
    if spec.b >= 4:
        return diagonal_stationary_points(spec, grid)
    grids = grid if grid is not None else log_grid(spec)
    grids = [np.asarray(g, dtype=float) for g in grids]
    if any(len(g) < 64 for g in grids):
        raise ConfigError("stationary-point search needs >= 64 grid points per channel")
    mesh = np.meshgrid(*grids, indexing="ij")
    rows = np.stack([m.ravel() for m in mesh], axis=1)
    values = _free_energy_batch(rows, spec).reshape([len(g) for g in grids])
    batch = lambda e_rows: _free_energy_batch(e_rows, spec)
    grids_log10 = [np.log10(g) for g in grids]
    rel_tol = np.log10(1.0 + _REFINE_REL)

    points = []
    for idx in np.ndindex(*values.shape):
        interior = all(0 < i < s - 1 for i, s in zip(idx, values.shape))
        if not interior:
            if _is_boundary_extremum(values, idx):
                e = np.array([grids[ax][i] for ax, i in enumerate(idx)])
                points.append(FreeEnergyPoint(
                    e=e, value=float(values[idx]), grad=_grad(batch, e),
                    kind="boundary"))
            continue
        signs = _axis_signs(values, idx)
        if 0 in signs:
            continue
        if all(s == 1 for s in signs):
            kind = "local-max"
        elif all(s == -1 for s in signs):
            kind = "local-min"
        else:
            kind = "saddle"
        start = [grids_log10[ax][i] for ax, i in enumerate(idx)]
        refined = _refine(start, signs, grids_log10, batch, rel_tol)
        e = 10.0 ** refined
        points.append(FreeEnergyPoint(
            e=e, value=float(batch(e[None, :])[0]), grad=_grad(batch, e), kind=kind))

    points = _dedupe(points)
    _mark_global(points)
    return points


def _is_boundary_extremum(values, idx):
    f = values[idx]
    for ax in range(values.ndim):
        for step in (-1, 1):
            nb = list(idx)
            nb[ax] += step
            if 0 <= nb[ax] < values.shape[ax] and values[tuple(nb)] > f:
                return False
    return True


def _grad(batch_fun, e, rel_step=1e-5):
    g = np.zeros_like(e)
    for ax in range(len(e)):
        h = rel_step * e[ax]
        up = e.copy(); dn = e.copy()
        up[ax] += h; dn[ax] -= h
        g[ax] = (batch_fun(up[None, :])[0] - batch_fun(dn[None, :])[0]) / (2 * h)
    return g


def _dedupe(points):
    kept = []
    for p in sorted(points, key=lambda p: -p.value):
        if any(p.kind == q.kind and
               np.abs(np.log10(p.e) - np.log10(q.e)).max() <= _DISTINCT_LOG10
               for q in kept):
            continue
        kept.append(p)
    return kept


def _mark_global(points):
    maxima = [p for p in points if p.kind == "local-max"]
    if not maxima:
        maxima = [p for p in points if p.kind == "boundary"]
    if maxima:
        best = max(maxima, key=lambda p: p.value)
        best.is_global_max = True


def diagonal_stationary_points(spec, grid=None, points_per_channel=None,
                               line_refine=True):
    """Heuristic extremum search along the isotropic diagonal (any B).

    Classifies the 1-D restriction F(E * 1) on a log grid, refines along the
    diagonal, then optionally line-refines each channel around the diagonal
    point.  Reported kinds describe the diagonal restriction only.
    """
    if grid is not None:
        e_grid = np.asarray(grid[0] if isinstance(grid, (list, tuple)) else grid,
                            dtype=float)
    else:
        pts = points_per_channel or 200
        box = spec.search_box
        e_grid = np.logspace(np.log10(box[0].max()), np.log10(box[1].min()), pts)
    if len(e_grid) < 64:
        raise ConfigError("diagonal search needs >= 64 grid points")
    values = free_energy_diagonal(e_grid, spec)
    log_g = np.log10(e_grid)
    rel_tol = np.log10(1.0 + _REFINE_REL)

    def diag_val(t):
        return float(free_energy_diagonal(np.array([10.0 ** t]), spec)[0])

    points = []
    for i in range(1, len(e_grid) - 1):
        if values[i] > values[i - 1] and values[i] > values[i + 1]:
            kind, sign = "local-max", 1
        elif values[i] < values[i - 1] and values[i] < values[i + 1]:
            kind, sign = "local-min", -1
        else:
            continue
        t = _golden_max(lambda t: sign * diag_val(t), log_g[i - 1], log_g[i + 1],
                        rel_tol)
        e = np.full(spec.b, 10.0 ** t)
        if line_refine and kind == "local-max":
            e = _line_refine(e, spec, rel_tol)
        val = _diag_or_grouped_value(e, spec)
        points.append(FreeEnergyPoint(e=e, value=val, grad=np.full(spec.b, np.nan),
                                      kind=kind))
    for i in (0, len(e_grid) - 1):
        j = 1 if i == 0 else len(e_grid) - 2
        if values[i] > values[j]:
            points.append(FreeEnergyPoint(e=np.full(spec.b, e_grid[i]),
                                          value=float(values[i]),
                                          grad=np.full(spec.b, np.nan),
                                          kind="boundary"))
    points = _dedupe(points)
    _mark_global(points)
    return points


def _diag_or_grouped_value(e, spec):
    impl = lambda etas, la: _zeta_batch_grouped(
        etas, la, spec.epsilon, _DEFAULT_LAGUERRE_NODES)
    return float(_free_energy_batch(e[None, :], spec, zeta_impl=impl)[0])


def _line_refine(e, spec, rel_tol):
    """Golden-section line search per channel around the diagonal point.

    Each channel is refined independently from the same base point, so every
    evaluation keeps at most two distinct eta groups (the perturbed channel
    against the rest); accumulating the refinements instead would add one
    tensor dimension per channel to the grouped rule.
    """
    box = spec.search_box
    base = e.copy()
    out = e.copy()
    for ch in range(spec.b):
        lo = np.log10(max(base[ch] / 2.0, box[0, ch]))
        hi = np.log10(min(base[ch] * 2.0, box[1, ch]))

        def along(t, ch=ch):
            trial = base.copy()
            trial[ch] = 10.0 ** t
            return _diag_or_grouped_value(trial, spec)

        out[ch] = 10.0 ** _golden_max(along, lo, hi, rel_tol)
    return out


def predict_performance(spec, grid=None):
    """MMSE and AMP-attained MSE from the extremum structure of F.

    The MMSE sits at the global maximum; the AMP fixed point is the local
    maximum with the largest total MSE.  ``gap`` is set when the two differ
    beyond the refinement tolerance.
    """
    points = stationary_points(spec, grid)
    maxima = [p for p in points if p.kind == "local-max"]
    if not maxima:
        maxima = [p for p in points if p.kind == "boundary"]
    if not maxima:
        raise RuntimeError("no maxima found on a compact box; grid too coarse?")
    global_max = max(maxima, key=lambda p: p.value)
    bamp = max(maxima, key=lambda p: p.e.sum())
    gap = np.abs(np.log10(global_max.e) - np.log10(bamp.e)).max() > _DISTINCT_LOG10
    return PerformancePrediction(mmse=global_max.e, bamp_mse=bamp.e, gap=gap,
                                 points=points)
