"""Figure rendering for the CLI report paths (written next to the CSVs)."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_free_energy_curves(path, curves, title=None):
    """One F(E) curve per rate; extrema marked.

    ``curves`` maps a rate to ``(e_db, f_values, points)``.
    """
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for rate, (e_db, values, points) in sorted(curves.items()):
        ax.plot(e_db, values, lw=1.2, label=f"R = {rate:g}")
        for p in points:
            if p.kind == "local-max":
                ax.plot(p.e_db[0], p.value, "rs", ms=5, mfc="none")
            elif p.kind == "local-min":
                ax.plot(p.e_db[0], p.value, "kv", ms=5, mfc="none")
    ax.set_xlabel("MSE [dB]")
    ax.set_ylabel("free energy")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_landscape_2d(path, grids_db, values, points=(), arrows=None, title=None):
    """Contour map of a two-channel landscape with extrema and SE arrows."""
    fig, ax = plt.subplots(figsize=(6, 5))
    e1, e2 = np.meshgrid(grids_db[0], grids_db[1], indexing="ij")
    cs = ax.contourf(e1, e2, values, levels=40, cmap="gray")
    fig.colorbar(cs, ax=ax, label="free energy")
    if arrows is not None:
        start, end = arrows
        ax.quiver(start[:, 0], start[:, 1],
                  end[:, 0] - start[:, 0], end[:, 1] - start[:, 1],
                  angles="xy", scale_units="xy", scale=1.0,
                  color="tab:blue", width=0.003)
    for p in points:
        marker, color = {"local-max": ("s", "red"), "local-min": ("v", "black"),
                         "saddle": ("v", "black")}.get(p.kind, ("o", "gray"))
        ax.plot(p.e_db[0], p.e_db[1], marker, color=color, ms=7, mfc="none")
    ax.set_xlabel("MSE(1) [dB]")
    ax.set_ylabel("MSE(2) [dB]")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_se_trajectories(path, trajectories, title=None):
    """Predicted per-channel MSE against iteration for one or more runs."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, traj in trajectories.items():
        mse = traj.mse_db
        for ch in range(mse.shape[1]):
            suffix = f" ch{ch + 1}" if mse.shape[1] > 1 else ""
            ax.plot(np.arange(mse.shape[0]), mse[:, ch], lw=1.2,
                    label=f"{label}{suffix}")
    ax.set_xlabel("iteration")
    ax.set_ylabel("predicted MSE [dB]")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_image_grid(path, images, title=None):
    """Side-by-side reconstructions; ``images`` maps labels to s x s x 3 arrays."""
    n = len(images)
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.6))
    if n == 1:
        axes = [axes]
    for ax, (label, img) in zip(axes, images.items()):
        ax.imshow(np.clip(img, 0, 255).astype(np.uint8))
        ax.set_title(label, fontsize=9)
        ax.axis("off")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
