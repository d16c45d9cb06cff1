"""Figure rendering for the report path.

Every plot goes straight to a PNG file next to the delimited output; nothing
is ever shown interactively, so the Agg backend is forced before pyplot is
imported.
"""

import math
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .universal import ALGORITHMS, FAST_UAP, UAP

_COLORS = {UAP: "tab:blue", FAST_UAP: "tab:orange"}
_DPI = 150


def _median_finite(values):
    vals = [v for v in values if math.isfinite(v)]
    return float(np.median(vals)) if vals else None


def _grouped_target_bars(ax, records, targets, metric):
    width = 0.38
    xs = np.arange(len(targets))
    for j, alg in enumerate(ALGORITHMS):
        heights, labels = [], []
        for target in targets:
            vals = [getattr(res, metric) for rec in records if rec.algorithm == alg
                    for res in rec.targets if res.target == target]
            med = _median_finite(vals)
            heights.append(med if med is not None else 0.0)
            labels.append("n/a" if med is None else "")
        offset = (j - 0.5) * width
        bars = ax.bar(xs + offset, heights, width, label=alg, color=_COLORS[alg])
        for bar, text in zip(bars, labels):
            if text:
                ax.annotate(text, (bar.get_x() + bar.get_width() / 2, 0),
                            ha="center", va="bottom", fontsize=7)
    ax.set_xticks(xs)
    ax.set_xticklabels([f"{t:.0%}" for t in targets])
    ax.set_xlabel("target fooling rate")


def plot_speed_bars(records, targets, path, metric="seconds"):
    """Median time or image budget to each target, one panel per model."""
    model_ids = sorted({r.model_id for r in records})
    if not model_ids:
        return None
    fig, axes = plt.subplots(1, len(model_ids),
                             figsize=(3.4 * len(model_ids), 3.2), squeeze=False)
    for ax, model_id in zip(axes[0], model_ids):
        _grouped_target_bars(ax, [r for r in records if r.model_id == model_id],
                             targets, metric)
        ax.set_title(model_id, fontsize=9)
        ax.set_ylabel("median seconds" if metric == "seconds" else "median images")
    axes[0][0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def plot_fooling_curves(records, path):
    """Fooling rate against images consumed, thin line per seed."""
    model_ids = sorted({r.model_id for r in records})
    if not model_ids:
        return None
    fig, axes = plt.subplots(1, len(model_ids),
                             figsize=(3.4 * len(model_ids), 3.2), squeeze=False)
    for ax, model_id in zip(axes[0], model_ids):
        for rec in records:
            if rec.model_id != model_id or not rec.trajectory:
                continue
            imgs = [pt[0] for pt in rec.trajectory]
            rates = [pt[2] for pt in rec.trajectory]
            ax.plot(imgs, rates, color=_COLORS[rec.algorithm], alpha=0.55, lw=1.0)
        ax.set_title(model_id, fontsize=9)
        ax.set_xlabel("images consumed")
        ax.set_ylabel("fooling rate")
        ax.set_ylim(0, 1)
    handles = [plt.Line2D([], [], color=_COLORS[a], label=a) for a in ALGORITHMS]
    axes[0][0].legend(handles=handles, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def plot_magnitude_growth(records, path):
    """l2 magnitude of v after every aggregation, per algorithm."""
    model_ids = sorted({r.model_id for r in records})
    if not model_ids:
        return None
    fig, axes = plt.subplots(1, len(model_ids),
                             figsize=(3.4 * len(model_ids), 3.2), squeeze=False)
    for ax, model_id in zip(axes[0], model_ids):
        for rec in records:
            if rec.model_id != model_id or not rec.agg_l2:
                continue
            ax.plot(range(1, len(rec.agg_l2) + 1), rec.agg_l2,
                    color=_COLORS[rec.algorithm], alpha=0.55, lw=1.0)
        ax.set_title(model_id, fontsize=9)
        ax.set_xlabel("aggregation")
        ax.set_ylabel("|v| (l2)")
    handles = [plt.Line2D([], [], color=_COLORS[a], label=a) for a in ALGORITHMS]
    axes[0][0].legend(handles=handles, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def plot_transfer_heatmaps(matrix, path):
    """Three heatmaps: uap cells, fast-uap cells, and their difference.

    Rows are source (generated-for) models, columns are victims; the
    diagonal is the white-box case.
    """
    ids = matrix.model_ids
    n = len(ids)
    grids = []
    for alg in ALGORITHMS:
        grids.append(np.array([[matrix.cell(s, v, alg) for v in ids] for s in ids]))
    grids.append(grids[1] - grids[0])
    titles = [UAP, FAST_UAP, "increment"]
    fig, axes = plt.subplots(1, 3, figsize=(4.0 * 3, 3.6))
    for ax, grid, title in zip(axes, grids, titles):
        if title == "increment":
            vmax = max(abs(grid).max(), 1e-9)
            im = ax.imshow(grid, cmap="RdBu_r", vmin=-vmax, vmax=vmax)
        else:
            im = ax.imshow(grid, cmap="viridis", vmin=0, vmax=1)
        for i in range(n):
            for j in range(n):
                ax.text(j, i, f"{grid[i, j]:.2f}", ha="center", va="center",
                        fontsize=7, color="white" if title != "increment" else "black")
        ax.set_xticks(range(n))
        ax.set_xticklabels(ids, rotation=45, ha="right", fontsize=7)
        ax.set_yticks(range(n))
        ax.set_yticklabels(ids, fontsize=7)
        ax.set_title(title, fontsize=9)
        fig.colorbar(im, ax=ax, fraction=0.046)
    axes[0].set_ylabel("source model")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def plot_generation(state, path):
    """Two-panel view of one generation run: fooling-rate trajectory and the
    per-aggregation magnitude trace."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 3.2))
    if state.trajectory:
        ax1.plot([p[0] for p in state.trajectory], [p[2] for p in state.trajectory],
                 color=_COLORS.get(state.algorithm, "tab:green"))
    ax1.set_xlabel("images consumed")
    ax1.set_ylabel("fooling rate")
    ax1.set_ylim(0, 1)
    ax1.set_title(f"{state.algorithm} on {state.target_model_id}", fontsize=9)
    if state.agg_l2:
        ax2.plot(range(1, len(state.agg_l2) + 1), state.agg_l2,
                 color=_COLORS.get(state.algorithm, "tab:green"))
    ax2.set_xlabel("aggregation")
    ax2.set_ylabel("|v| (l2)")
    ax2.set_title("magnitude growth", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def render_report_figures(records, matrix, outdir):
    """All report figures that the available inputs support; returns paths."""
    written = []
    if records:
        targets = sorted({res.target for rec in records for res in rec.targets})
        for name, metric in (("speed_time.png", "seconds"),
                             ("speed_images.png", "images")):
            out = plot_speed_bars(records, targets, os.path.join(outdir, name), metric)
            if out:
                written.append(out)
        out = plot_fooling_curves(records, os.path.join(outdir, "fooling_curves.png"))
        if out:
            written.append(out)
        out = plot_magnitude_growth(records, os.path.join(outdir, "magnitude_growth.png"))
        if out:
            written.append(out)
    if matrix is not None:
        written.append(plot_transfer_heatmaps(
            matrix, os.path.join(outdir, "transfer_matrix.png")))
    return written
