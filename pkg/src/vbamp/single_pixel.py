"""Single-pixel color-imaging pipeline.

Acquisition applies M random 0/1 masks (exactly N/2 ones each) to a square
image and records one noisy intensity per mask and color channel.  With the
image's DCT coefficients as the unknowns the measurement matrix is
``A = Phi D^T``.  That matrix violates the zero-mean unit-norm column
conditions the AMP recursion needs, so the measurements are converted:
the DC coefficient is estimated from the measurement mean, its (constant)
column is subtracted, and the remaining columns are exactly mean-removed
and rescaled to unit norm, recording the per-column scale so estimates can
be mapped back.
"""

from dataclasses import dataclass

import numpy as np
from scipy.fft import dctn, idctn

from .errors import DimensionMismatch
from .rng import stream


@dataclass(frozen=True)
class MaskSet:
    """M binary masks, vectorized row-wise; every row has exactly N/2 ones."""

    phi: np.ndarray

    @property
    def m(self):
        return self.phi.shape[0]

    @property
    def n(self):
        return self.phi.shape[1]


@dataclass(frozen=True)
class DctModel:
    """Orthonormal separable 2-D DCT on column-major vectorized square images."""

    n: int

    @property
    def side(self):
        return int(round(np.sqrt(self.n)))

    def __post_init__(self):
        side = int(round(np.sqrt(self.n)))
        if side * side != self.n:
            raise DimensionMismatch(f"N={self.n} is not a perfect square")

    def coefficients(self, image):
        """DCT coefficient vector (column-major) of an s x s image."""
        return dctn(np.asarray(image, dtype=float), norm="ortho").ravel(order="F")

    def image(self, coeffs):
        """Inverse transform of a coefficient vector back to an s x s image."""
        s = self.side
        return idctn(np.asarray(coeffs, dtype=float).reshape(s, s, order="F"),
                     norm="ortho")

    def dense(self):
        """Materialize the N x N transform matrix (small N only)."""
        s = self.side
        d1 = dctn(np.eye(s), axes=(0,), norm="ortho")
        return np.kron(d1, d1)


@dataclass(frozen=True)
class ConvertedMeasurement:
    """AMP-ready form of single-pixel data.

    ``y_tilde`` and ``a_tilde`` satisfy the zero-mean unit-norm column
    conditions; ``column_scale`` maps recovered coefficients back to the
    original scale, and ``dc_estimate`` re-inserts the DC coefficient.
    """

    y_tilde: np.ndarray
    a_tilde: np.ndarray
    dc_estimate: np.ndarray
    scale: float
    column_scale: np.ndarray
    noise_scale: float

    def restore(self, xhat_tilde):
        """Undo the column scaling and re-insert the DC row."""
        xhat = np.atleast_2d(xhat_tilde)
        full = np.empty((xhat.shape[0] + 1, xhat.shape[1]))
        full[0] = self.dc_estimate
        full[1:] = xhat / self.column_scale[:, None]
        return full


def generate_masks(m, n, seed):
    """Draw M independent masks, each a uniformly random N/2-subset."""
    if n % 2:
        raise DimensionMismatch("mask length must be even")
    phi = np.zeros((m, n), dtype=np.uint8)
    half = n // 2
    for row in range(m):
        # substream per row: mask generation is order-independent
        idx = stream(seed, row).choice(n, size=half, replace=False)
        phi[row, idx] = 1
    return MaskSet(phi=phi)


def build_measurement_matrix(masks, dct):
    """Materialize ``A = Phi D^T`` by batched 2-D DCTs of the mask images."""
    m, n = masks.phi.shape
    s = dct.side
    # row i of A is the DCT of mask i; the C-order reshape transposes each
    # mask image, which the final C-order flatten undoes
    imgs = masks.phi.reshape(m, s, s).astype(float)
    return dctn(imgs, axes=(1, 2), norm="ortho").reshape(m, n)


def acquire(image, masks, noise_std, seed):
    """Mask-and-sum measurements of an s x s x B image, Gaussian noise added."""
    img = np.asarray(image, dtype=float)
    if img.ndim == 2:
        img = img[:, :, None]
    s = img.shape[0]
    if img.shape[0] != img.shape[1] or s * s != masks.n:
        raise DimensionMismatch("image and mask sizes disagree")
    flat = img.reshape(s * s, img.shape[2], order="F")
    y = masks.phi.astype(float) @ flat
    noise_std = np.broadcast_to(np.asarray(noise_std, dtype=float), (img.shape[2],))
    y += stream(seed, 0).standard_normal(y.shape) * noise_std[None, :]
    return y


def convert_measurements(y, masks, dct, a=None):
    """Rewrite single-pixel measurements in AMP-ready form.

    The DC coefficient estimate is ``2/(M sqrt(N)) * sum_i y_i``; its column
    (every entry ``sqrt(N)/2``) is subtracted and everything is divided by
    ``sqrt(M)/2``.  The remaining columns are then exactly mean-removed and
    renormalized, which also cancels the DC-estimation error introduced by
    the finite mask sums.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if y.ndim != 2 or y.shape[0] != masks.m:
        raise DimensionMismatch("measurement shape does not match masks")
    m, n = masks.phi.shape
    if a is None:
        a = build_measurement_matrix(masks, dct)
    scale = np.sqrt(m) / 2.0
    dc = (2.0 / (m * np.sqrt(n))) * y.sum(axis=0)
    y_tilde = (y - (np.sqrt(n) / 2.0) * dc[None, :]) / scale
    a_rest = a[:, 1:] / scale
    col_mean = a_rest.mean(axis=0)
    a_centered = a_rest - col_mean[None, :]
    col_norm = np.linalg.norm(a_centered, axis=0)
    a_tilde = a_centered / col_norm[None, :]
    return ConvertedMeasurement(
        y_tilde=y_tilde,
        a_tilde=a_tilde,
        dc_estimate=dc,
        scale=scale,
        column_scale=col_norm,
        noise_scale=1.0 / scale,
    )


def synth_image(seed, side=100, block=20, dc=20.0):
    """Random jointly sparse test image: correlated low-frequency coefficients.

    The top-left ``block x block`` DCT coefficients of each color channel
    (except the DC term, pinned at ``dc``) are drawn jointly across channels
    with covariance ``4 - |i - j|``; all other coefficients are zero.
    Returns the image stack and the ground-truth coefficient matrix.
    """
    n = side * side
    cov = 4.0 - np.abs(np.subtract.outer(np.arange(3), np.arange(3)))
    chol = np.linalg.cholesky(cov)
    coeffs = np.zeros((n, 3))
    grid = np.zeros((side, side, 3))
    vals = stream(seed, 0).standard_normal((block * block, 3)) @ chol.T
    grid[:block, :block, :] = vals.reshape(block, block, 3, order="F")
    grid[0, 0, :] = dc
    dct = DctModel(n=n)
    image = np.stack([dct.image(grid[:, :, b].ravel(order="F")) for b in range(3)],
                     axis=2)
    coeffs = grid.reshape(n, 3, order="F")
    return image, coeffs


def nmse_db(xhat, x):
    """Per-channel 10 log10(|xhat - x|^2 / |x|^2); -inf for an exact match."""
    xhat = np.atleast_2d(np.asarray(xhat, dtype=float))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if xhat.shape != x.shape:
        raise DimensionMismatch(f"shapes {xhat.shape} and {x.shape} disagree")
    ref = np.sum(x**2, axis=0)
    if np.any(ref == 0):
        raise ValueError("reference signal has a zero-energy channel")
    err = np.sum((xhat - x) ** 2, axis=0)
    out = np.full(ref.shape, -np.inf)
    nz = err > 0
    out[nz] = 10.0 * np.log10(err[nz] / ref[nz])
    return out


def read_ppm(path):
    """Read a binary (P6, maxval 255) image as an s x s x 3 float array."""
    with open(path, "rb") as fh:
        data = fh.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    if fields[0] != b"P6":
        raise ValueError(f"not a binary PPM (P6) file: magic {fields[0]!r}")
    width, height, maxval = (int(f) for f in fields[1:])
    if maxval != 255:
        raise ValueError(f"only maxval 255 supported, got {maxval}")
    if width != height:
        raise ValueError(f"image must be square, got {width} x {height}")
    raw = np.frombuffer(data, dtype=np.uint8, count=width * height * 3, offset=pos)
    if raw.size != width * height * 3:
        raise ValueError("truncated pixel data")
    return raw.reshape(height, width, 3).astype(float)


def write_ppm(image, path):
    """Write an s x s x 3 array as binary PPM, clamping and rounding half-up."""
    import os

    img = np.asarray(image, dtype=float)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] != img.shape[1]:
        raise ValueError(f"expected square s x s x 3 image, got {img.shape}")
    q = np.floor(np.clip(img, 0.0, 255.0) + 0.5).astype(np.uint8)
    header = f"P6\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header + q.tobytes())
    os.replace(tmp, path)
