"""Render run figures from the emitted CSVs.

Reads the metrics CSV of a training run (and optionally a shortcut-index
CSV from the diagnose command) and writes PNG figures next to them.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

METRICS_NAME = "metrics.csv"


def _read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="ascii") as handle:
        return list(csv.DictReader(handle))


def _column(rows: list[dict], key: str) -> list[float]:
    return [float(row[key]) for row in rows]


def render_metrics_figures(metrics_csv, out_dir=None) -> list[Path]:
    """Plot loss and SI-SNR trajectories from a run's metrics CSV.

    Writes loss_curve.png and sisnr_curve.png into out_dir (default: next
    to the CSV) and returns the created paths.
    """
    metrics_csv = Path(metrics_csv)
    rows = _read_csv(metrics_csv)
    if not rows:
        raise ValueError(f"no checkpoint rows in {metrics_csv}")
    out = Path(out_dir) if out_dir else metrics_csv.parent
    out.mkdir(parents=True, exist_ok=True)
    objective = rows[0]["objective"]
    steps = _column(rows, "step")

    created = []
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(steps, _column(rows, "train_loss"), label="train", lw=1.5)
    for key, label in (("eval_loss_seen", "held-out (seen noise)"), ("eval_loss_unseen", "held-out (unseen noise)")):
        values = _column(rows, key)
        if not all(math.isnan(v) for v in values):
            ax.plot(steps, values, label=label, lw=1.2, ls="--")
    ax.set_xlabel("optimizer step")
    ax.set_ylabel("loss")
    ax.set_title(f"{objective}: loss vs. step")
    ax.legend(fontsize=8)
    fig.tight_layout()
    loss_path = out / "loss_curve.png"
    fig.savefig(loss_path, dpi=150)
    plt.close(fig)
    created.append(loss_path)

    seen = _column(rows, "sisnr_seen_db")
    unseen = _column(rows, "sisnr_unseen_db")
    if not all(math.isnan(v) for v in seen + unseen):
        fig, ax = plt.subplots(figsize=(6.0, 3.6))
        if not all(math.isnan(v) for v in seen):
            ax.plot(steps, seen, label="seen noise", lw=1.5)
        if not all(math.isnan(v) for v in unseen):
            ax.plot(steps, unseen, label="unseen noise", lw=1.5, ls="--")
        ax.axhline(0.0, color="gray", lw=0.8)
        ax.set_xlabel("optimizer step")
        ax.set_ylabel("SI-SNR improvement (dB)")
        ax.set_title(f"{objective}: held-out SI-SNR improvement")
        ax.legend(fontsize=8)
        fig.tight_layout()
        sisnr_path = out / "sisnr_curve.png"
        fig.savefig(sisnr_path, dpi=150)
        plt.close(fig)
        created.append(sisnr_path)
    return created


def render_shortcut_figure(diagnose_csv, out_dir=None) -> Path:
    """Plot shortcut index against positional scale from a diagnose CSV."""
    diagnose_csv = Path(diagnose_csv)
    rows = _read_csv(diagnose_csv)
    if not rows:
        raise ValueError(f"no rows in {diagnose_csv}")
    out = Path(out_dir) if out_dir else diagnose_csv.parent
    out.mkdir(parents=True, exist_ok=True)
    betas = _column(rows, "beta")
    indices = _column(rows, "shortcut_index")

    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(betas, indices, marker="o", lw=1.5)
    ax.set_xlabel("positional scale beta")
    ax.set_ylabel("shortcut index")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title("positional-shortcut diagnostic")
    fig.tight_layout()
    path = out / "shortcut_index.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_run_figures(run_dir, out_dir=None) -> list[Path]:
    """Render every known figure for a run directory."""
    run_dir = Path(run_dir)
    metrics_csv = run_dir / METRICS_NAME
    if not metrics_csv.is_file():
        raise FileNotFoundError(f"no {METRICS_NAME} in {run_dir}")
    created = render_metrics_figures(metrics_csv, out_dir)
    diagnose_csv = run_dir / "diagnose.csv"
    if diagnose_csv.is_file():
        created.append(render_shortcut_figure(diagnose_csv, out_dir))
    return created
