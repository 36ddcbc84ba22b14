"""CSV serialization for traces, landscapes, and matrix fixtures.

All files are RFC-4180 with LF line endings and 17-significant-digit
decimals.  Files written by the CLI carry a leading comment line naming the
configuration hash (``# config_hash=...``) ahead of the header row.
"""

import csv
import io
import os

import numpy as np

NMSE_SENTINEL_DB = -999.0


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if x == -np.inf:
        return _fmt(NMSE_SENTINEL_DB)
    return format(x, ".17g")


def write_rows(path, header, rows, config_hash=None):
    """Write a CSV atomically; optional config-hash comment line first."""
    buf = io.StringIO()
    if config_hash:
        buf.write(f"# config_hash={config_hash}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([c if isinstance(c, str) else _fmt(c) for c in row])
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, path)


def read_rows(path):
    """Read back a CSV written by this module; skips the config comment."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, [row for row in reader]


def _upper_triangle_labels(b):
    return [f"sigma_v_{i + 1}{j + 1}" for i in range(b) for j in range(i, b)]


def _upper_triangle(mat):
    b = mat.shape[0]
    return [mat[i, j] for i in range(b) for j in range(i, b)]


def write_trace(path, trace, config_hash=None):
    """Per-iteration trace: t, sigma_v upper triangle, MSE prediction, change."""
    if not trace.records:
        raise ValueError("empty trace")
    b = trace.records[0].sigma_v.shape[0]
    header = ["t"] + _upper_triangle_labels(b) + \
        [f"mse_hat_{ch + 1}_dB" for ch in range(b)] + ["rel_change"]
    has_em = any(rec.em_epsilon is not None for rec in trace.records)
    if has_em:
        header += ["em_epsilon"] + [f"em_sigma_x_{i + 1}{j + 1}"
                                    for i in range(b) for j in range(i, b)]
    rows = []
    for rec in trace.records:
        row = [rec.t] + _upper_triangle(rec.sigma_v) + list(rec.mse_hat_db) \
            + [rec.rel_change]
        if has_em:
            row += [rec.em_epsilon if rec.em_epsilon is not None else ""]
            row += _upper_triangle(rec.em_sigma_x) if rec.em_sigma_x is not None \
                else [""] * (b * (b + 1) // 2)
        rows.append(row)
    write_rows(path, header, rows, config_hash)


def write_matrix(path, mat, config_hash=None):
    """Row-major matrix dump used for fixtures."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    header = [f"c{j + 1}" for j in range(mat.shape[1])]
    write_rows(path, header, mat.tolist(), config_hash)


def read_matrix(path):
    _, rows = read_rows(path)
    return np.array([[float(c) for c in row] for row in rows])


def write_landscape(path, grids_db, values, config_hash=None):
    """Tensor free-energy landscape: E per channel in dB plus F."""
    b = len(grids_db)
    header = [f"E_{ch + 1}_dB" for ch in range(b)] + ["F"]
    mesh = np.meshgrid(*grids_db, indexing="ij")
    rows = np.column_stack([m.ravel() for m in mesh] + [np.ravel(values)])
    write_rows(path, header, rows.tolist(), config_hash)


def write_stationary_points(path, points, config_hash=None):
    """Classified extrema report."""
    if points:
        b = len(points[0].e)
    else:
        b = 0
    header = ["kind"] + [f"E_{ch + 1}_dB" for ch in range(b)] + ["F", "is_global_max"]
    rows = [[p.kind] + list(p.e_db) + [p.value, int(p.is_global_max)] for p in points]
    write_rows(path, header, rows, config_hash)


def write_se_trajectory(path, traj, config_hash=None):
    """State-evolution trajectory: t, per-channel MSE in dB, covariance."""
    b = traj.sigma_v[0].shape[0]
    header = ["t"] + [f"mse_hat_{ch + 1}_dB" for ch in range(b)] \
        + _upper_triangle_labels(b)
    mse = traj.mse_db
    rows = [[t] + list(mse[t]) + _upper_triangle(sv)
            for t, sv in enumerate(traj.sigma_v)]
    write_rows(path, header, rows, config_hash)


def write_diagonalizer(path, diag, config_hash=None):
    """Transform rows, eigenvalues, and SNRs in dB."""
    b = diag.b
    header = ["row"] + [f"t_{j + 1}" for j in range(b)] + ["lambda", "snr_dB"]
    rows = [[i + 1] + list(diag.t[i]) + [diag.lam[i], 10 * np.log10(diag.snr[i])]
            for i in range(b)]
    write_rows(path, header, rows, config_hash)


def write_nmse(path, labels, nmse_rows, config_hash=None):
    """NMSE table: one row per method, per-channel dB columns."""
    b = len(nmse_rows[0])
    header = ["method"] + [f"nmse_{ch + 1}_dB" for ch in range(b)]
    rows = [[label] + [v for v in row] for label, row in zip(labels, nmse_rows)]
    write_rows(path, header, rows, config_hash)
