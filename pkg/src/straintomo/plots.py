"""Figure rendering for CLI reports. Pure: data in, image files out."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .fields import Grid2, ScalarField2, TensorField2


def _extent(grid: Grid2):
    return (
        grid.ox - 0.5 * grid.dx,
        grid.ox + (grid.nx - 0.5) * grid.dx,
        grid.oy - 0.5 * grid.dy,
        grid.oy + (grid.ny - 0.5) * grid.dy,
    )


def _panel(ax, grid, values, label):
    vmax = float(np.max(np.abs(values))) or 1.0
    im = ax.imshow(
        values,
        origin="lower",
        extent=_extent(grid),
        cmap="RdBu_r",
        vmin=-vmax,
        vmax=vmax,
    )
    ax.set_title(label)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    return im


def save_field_heatmaps(f: ScalarField2 | TensorField2, path, title: str | None = None):
    """One panel per component with symmetric diverging colour scales."""
    if isinstance(f, ScalarField2):
        panels = [("value", f.values)]
    else:
        panels = [("c11", f.c11), ("c22", f.c22), ("c12", f.c12)]
    fig, axes = plt.subplots(1, len(panels), figsize=(4.6 * len(panels), 4.2))
    if len(panels) == 1:
        axes = [axes]
    for ax, (label, values) in zip(axes, panels):
        im = _panel(ax, f.grid, values, label)
        fig.colorbar(im, ax=ax, fraction=0.046)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def save_sinogram_heatmap(angles, s_values, data, path, title: str | None = None):
    fig, ax = plt.subplots(figsize=(6.0, 4.4))
    im = ax.imshow(
        data,
        origin="lower",
        aspect="auto",
        extent=(s_values[0], s_values[-1], angles[0], angles[-1]),
        cmap="viridis",
    )
    ax.set_xlabel("ray offset s")
    ax.set_ylabel("angle (rad)")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def save_sweep_plot(n_angles, rows, floor, path, title: str | None = None):
    """Log-log convergence plot. rows maps a label to an error list."""
    fig, ax = plt.subplots(figsize=(6.0, 4.4))
    for label, errors in rows.items():
        ax.loglog(n_angles, errors, "o-", label=label)
    if floor is not None:
        ax.axhline(floor, color="0.4", ls="--", lw=1, label="discretisation floor")
    ax.set_xlabel("number of projections")
    ax.set_ylabel("relative RMS error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
