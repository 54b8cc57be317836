"""Report rendering: tab-separated tables with matplotlib figures beside them."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import torch

from .evaluation import TrialReport
from .training import MetricsTrace


def plot_loss_curves(trace: MetricsTrace, path) -> None:
    """Render l_cgan / l_skd / l_total against the step counter."""
    steps = [r.step for r in trace.records]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(steps, [r.l_cgan for r in trace.records], label="adversarial", lw=0.8)
    ax.plot(steps, [r.l_skd for r in trace.records], label="distribution matching", lw=0.8)
    ax.plot(steps, [r.l_total for r in trace.records], label="total", lw=0.8, alpha=0.7)
    distill_start = next((r.step for r in trace.records if r.arch_id != "-"), None)
    if distill_start is not None and distill_start > steps[0]:
        ax.axvline(distill_start, color="gray", ls="--", lw=0.8)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_image_grid(images: torch.Tensor, path, per_row: int = 10) -> None:
    """Tile a batch of [-1, 1] images into one PNG, row-major."""
    arr = images.detach().clamp(-1, 1).add(1).div(2).numpy()
    n, c, h, w = arr.shape
    rows = (n + per_row - 1) // per_row
    grid = np.ones((rows * (h + 2) + 2, per_row * (w + 2) + 2, c), dtype=np.float32)
    for i in range(n):
        r, col = divmod(i, per_row)
        tile = np.transpose(arr[i], (1, 2, 0))
        grid[2 + r * (h + 2) : 2 + r * (h + 2) + h, 2 + col * (w + 2) : 2 + col * (w + 2) + w] = tile
    fig, ax = plt.subplots(figsize=(per_row * 0.6, rows * 0.6))
    ax.imshow(grid.squeeze(-1) if c == 1 else grid, cmap="gray" if c == 1 else None)
    ax.set_axis_off()
    fig.tight_layout(pad=0.1)
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_trial_reports(reports: dict[str, TrialReport], path) -> None:
    """Tab-separated table, one row per architecture."""
    lines = ["# architecture\tipc\ttrials\tmean\tstd\taccuracies"]
    for arch, report in reports.items():
        accs = ",".join(f"{a:.6f}" for a in report.accuracies)
        lines.append(
            f"{arch}\t{report.ipc}\t{len(report.accuracies)}\t"
            f"{report.mean:.6f}\t{report.std:.6f}\t{accs}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def plot_trial_reports(reports: dict[str, TrialReport], path) -> None:
    """Bar chart of mean accuracy with std error bars, one bar per architecture."""
    archs = list(reports)
    means = [reports[a].mean for a in archs]
    stds = [reports[a].std for a in archs]
    fig, ax = plt.subplots(figsize=(1.2 + 1.1 * len(archs), 3.5))
    ax.bar(archs, means, yerr=stds, capsize=4, color="#4878b0")
    ax.set_ylabel("test accuracy")
    ax.set_ylim(0, 1)
    for i, m in enumerate(means):
        ax.text(i, m + 0.02, f"{m:.3f}", ha="center", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_summary_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def reports_to_payload(reports: dict[str, TrialReport]) -> dict:
    return {
        arch: {
            "accuracies": report.accuracies,
            "mean": report.mean,
            "std": report.std,
            "ipc": report.ipc,
            "single_trial": report.single_trial,
        }
        for arch, report in reports.items()
    }
