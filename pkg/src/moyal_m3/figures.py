"""Optional figure rendering for the report path.

Figures are written next to the delimited output when the CLI is given
--figures DIR; the default report stays data-only.  Everything renders
through the Agg backend so the CLI never needs a display.
"""

from __future__ import annotations

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, outdir: str, name: str) -> str:
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, name)
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    return path


def residual_bars(records, outdir: str, name: str) -> str:
    """Log-scale bars of residual vs tolerance, one bar per check."""
    names = [r.name for r in records]
    residuals = [max(r.residual, 1e-18) for r in records]
    tols = [max(r.tolerance, 1e-18) for r in records]
    colors = ["tab:green" if r.passed else "tab:red" for r in records]

    fig, ax = plt.subplots(figsize=(max(6.0, 0.55 * len(names)), 4.0))
    x = np.arange(len(names))
    ax.bar(x, residuals, color=colors, width=0.6, label="residual")
    ax.scatter(x, tols, marker="_", s=300, color="black", label="tolerance")
    ax.set_yscale("log")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=40, ha="right", fontsize=8)
    ax.set_ylabel("residual")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_title("check residuals against tolerances")
    fig.tight_layout()
    return _save(fig, outdir, name)


def fourier_panels(grid, fvals, tvals, target, outdir: str,
                   name: str = "fourier_transform.png") -> str:
    """Input magnitude, transform magnitude, and self-duality error."""
    fig, axes = plt.subplots(1, 3, figsize=(12.0, 3.6))
    extent_s = [-grid.extent, grid.extent, -grid.extent, grid.extent]
    eta_max = float(grid.eta_axis[-1])
    extent_e = [float(grid.eta_axis[0]), eta_max, float(grid.eta_axis[0]), eta_max]

    im0 = axes[0].imshow(np.abs(fvals).T, origin="lower", extent=extent_s)
    axes[0].set_title("|input| on the fiber grid")
    fig.colorbar(im0, ax=axes[0], shrink=0.8)

    im1 = axes[1].imshow(np.abs(tvals).T, origin="lower", extent=extent_e)
    axes[1].set_title("|transform| on the dual grid")
    fig.colorbar(im1, ax=axes[1], shrink=0.8)

    err = np.abs(tvals - target)
    im2 = axes[2].imshow(err.T, origin="lower", extent=extent_e)
    axes[2].set_title("self-duality error")
    fig.colorbar(im2, ax=axes[2], shrink=0.8)
    for ax in axes:
        ax.set_xlabel("first axis")
    fig.tight_layout()
    return _save(fig, outdir, name)


def covariance_heatmap(origin_matrix, basis_names, outdir: str,
                       name: str = "covariance_residuals.png") -> str:
    """6x6 map of chart-origin covariance residual magnitudes."""
    data = np.array(origin_matrix, dtype=float)
    fig, ax = plt.subplots(figsize=(5.4, 4.6))
    shown = np.log10(np.maximum(data, 1e-18))
    im = ax.imshow(shown, cmap="viridis")
    ax.set_xticks(range(6))
    ax.set_yticks(range(6))
    ax.set_xticklabels(basis_names)
    ax.set_yticklabels(basis_names)
    for i in range(6):
        for j in range(6):
            ax.text(j, i, "0" if data[i, j] == 0 else f"{data[i, j]:.0e}",
                    ha="center", va="center", fontsize=7,
                    color="white" if shown[i, j] < -4 else "black")
    fig.colorbar(im, ax=ax, label="log10 |origin residual|")
    ax.set_title("bracket covariance at the chart origin")
    fig.tight_layout()
    return _save(fig, outdir, name)
