"""Figure rendering for reports and traces.

Every CLI report path drops a PNG next to its structured output: training
curves for train/selfplay/greedy-iterate, outcome bars for eval, and per-node
occupancy timelines for traces.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_train_report(report: dict, path) -> None:
    fig, (ax_loss, ax_rate) = plt.subplots(1, 2, figsize=(9.5, 3.6))
    curve = report.get("loss_curve") or []
    if curve:
        steps, losses = zip(*curve)
        ax_loss.plot(steps, losses, lw=1.2, color="#444444")
        ax_loss.set_yscale("log")
    ax_loss.set_xlabel("environment step")
    ax_loss.set_ylabel("loss")
    ax_loss.set_title(f"{report.get('algo', 'train')} loss")

    pts = report.get("eval_points") or []
    if pts:
        steps = [p["step"] for p in pts]
        for key, color, label in (("wins", "#1f77b4", "win"),
                                  ("losses", "#d62728", "loss"),
                                  ("draws", "#7f7f7f", "draw")):
            rates = [p[key] / p["episodes"] for p in pts]
            ax_rate.plot(steps, rates, marker="o", ms=3.5, color=color, label=label)
        ax_rate.set_ylim(-0.02, 1.02)
        ax_rate.legend(fontsize=8)
    ax_rate.set_xlabel("environment step")
    ax_rate.set_ylabel("rate")
    ax_rate.set_title("evaluation checkpoints")
    fig.suptitle(f"seed {report.get('seed')}  config {report.get('config_hash', '')[:12]}",
                 fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_matchup(stats: dict, path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    labels = ["p1 wins", "p2 wins", "draws"]
    counts = [stats["wins_p1"], stats["wins_p2"], stats["draws"]]
    colors = ["#1f77b4", "#d62728", "#7f7f7f"]
    bars = ax.bar(labels, counts, color=colors)
    for bar, c in zip(bars, counts):
        ax.annotate(f"{c / stats['episodes']:.1%}", (bar.get_x() + bar.get_width() / 2, c),
                    ha="center", va="bottom", fontsize=9)
    ax.set_ylabel(f"episodes (of {stats['episodes']})")
    ax.set_title(title or f"matchup, mean length {stats['mean_length']:.1f}")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_trace(episodes: list[dict], n_nodes: int, path, max_panels: int = 4) -> None:
    """Signed occupancy heatmaps over time, one panel per rendered episode:
    red cells are player 1 surplus, blue cells player 2 surplus."""
    shown = episodes[:max_panels]
    if not shown:
        raise ValueError("trace has no episodes to render")
    fig, axes = plt.subplots(len(shown), 1, figsize=(7.5, 2.3 * len(shown)), squeeze=False)
    for ax, ep in zip(axes[:, 0], shown):
        d1_seq = [ep["d1"]] + [s["d1"] for s in ep["steps"]]
        d2_seq = [ep["d2"]] + [s["d2"] for s in ep["steps"]]
        diff = np.array(d1_seq, dtype=float) - np.array(d2_seq, dtype=float)
        peak = max(np.abs(diff).max(), 1.0)
        im = ax.imshow(diff.T, aspect="auto", cmap="RdBu_r", vmin=-peak, vmax=peak,
                       interpolation="nearest")
        ax.set_yticks(range(n_nodes))
        ax.set_ylabel("node")
        ax.set_xlabel("step")
        ax.set_title(f"episode {ep['episode']}  outcome {ep.get('outcome')}", fontsize=9)
        fig.colorbar(im, ax=ax, label="d1 - d2", shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
