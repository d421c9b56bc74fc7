"""Render run diagnostics as figure files next to the CSV logs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Patch

from .segmenter import UNLABELED, IterationRecord

_FIG_DPI = 110


def save_convergence_figure(records: list[IterationRecord], path: str | Path) -> None:
    """Max membership change, tier counts and merges per sweep."""
    fig, (ax_change, ax_tiers) = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
    its = [r.iteration for r in records]
    if records:
        ax_change.semilogy(its, [max(r.max_change, 1e-12) for r in records],
                           color="tab:blue", label="max degree change")
        ax_merge = ax_change.twinx()
        ax_merge.bar(its, [r.n_merges for r in records], color="tab:orange",
                     alpha=0.4, label="merges")
        ax_merge.set_ylabel("merges")
        ax_tiers.stackplot(
            its,
            [r.n_lcd for r in records],
            [r.n_mcd for r in records],
            [r.n_hcd for r in records],
            labels=["LCD", "MCD", "HCD"],
            colors=["0.15", "0.55", "0.9"],
        )
        ax_tiers.legend(loc="upper right", fontsize=8)
    else:
        ax_change.text(0.5, 0.5, "no propagation sweeps ran", ha="center", va="center",
                       transform=ax_change.transAxes)
    ax_change.set_ylabel("max degree change")
    ax_change.set_title("propagation convergence")
    ax_tiers.set_xlabel("sweep")
    ax_tiers.set_ylabel("regions per tier")
    fig.tight_layout()
    fig.savefig(path, dpi=_FIG_DPI)
    plt.close(fig)


def save_class_map_figure(
    label_map: np.ndarray, class_names: tuple[str, ...], path: str | Path
) -> None:
    """Class map with one color per class; unlabeled pixels stay white."""
    k = len(class_names)
    cmap = plt.colormaps["tab10"]
    rgb = np.ones(label_map.shape + (3,))
    for j in range(k):
        rgb[label_map == j] = cmap(j % 10)[:3]
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.imshow(rgb, interpolation="nearest")
    ax.set_axis_off()
    handles = [Patch(color=cmap(j % 10), label=class_names[j]) for j in range(k)]
    if (label_map == UNLABELED).any():
        handles.append(Patch(facecolor="white", edgecolor="0.5", label="unlabeled"))
    ax.legend(handles=handles, loc="lower right", fontsize=8, framealpha=0.9)
    ax.set_title("class map")
    fig.tight_layout()
    fig.savefig(path, dpi=_FIG_DPI)
    plt.close(fig)


def save_tier_map_figure(tier_map: np.ndarray, path: str | Path) -> None:
    """Classification-quality map: HCD white, MCD gray, LCD black."""
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.imshow(tier_map, cmap="gray", vmin=0, vmax=255, interpolation="nearest")
    ax.set_axis_off()
    handles = [
        Patch(facecolor="white", edgecolor="0.5", label="HCD"),
        Patch(facecolor="0.5", label="MCD"),
        Patch(facecolor="black", label="LCD"),
    ]
    ax.legend(handles=handles, loc="lower right", fontsize=8, framealpha=0.9)
    ax.set_title("classification quality")
    fig.tight_layout()
    fig.savefig(path, dpi=_FIG_DPI)
    plt.close(fig)


def save_report_figures(result, class_names: tuple[str, ...], outdir: str | Path) -> list[Path]:
    """Render the standard three figures for a segmentation result."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = [
        outdir / "convergence.png",
        outdir / "class_map.png",
        outdir / "tier_map.png",
    ]
    save_convergence_figure(result.iteration_log, paths[0])
    save_class_map_figure(result.label_map, class_names, paths[1])
    save_tier_map_figure(result.tier_map, paths[2])
    return paths
