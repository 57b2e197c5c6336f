"""Vector-graphics plots of trajectory logs.

Two views: the XY plane with group-colored robot paths and formation
snapshots, and the per-level error norms against log-scaled time (which
spreads the fast, medium and slow convergence phases apart).  Output is
deterministic SVG: the hash salt is pinned and no timestamps are embedded.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .sim import TrajectoryLog

__all__ = ["plot_trajectories", "plot_error_norms"]

_GROUP_COLORS = ("tab:red", "tab:green", "tab:blue", "tab:orange", "tab:purple", "tab:brown")

_SVG_RC = {"svg.hashsalt": "formscale", "svg.fonttype": "none"}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _group_color(layout, robot_idx):
    for g in range(layout.m):
        if robot_idx in layout.robot_indices(g):
            return _GROUP_COLORS[g % len(_GROUP_COLORS)]
    return "k"


def plot_trajectories(log: TrajectoryLog, path) -> None:
    """XY paths with formation snapshots at a few sample times."""
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(8, 5))
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.set_title(f"robot trajectories: {log.name}")
        lay = log.layout
        if log.n_samples:
            for i in range(lay.n_robots):
                color = _group_color(lay, i)
                ax.plot(
                    log.positions[:, i, 0],
                    log.positions[:, i, 1],
                    color=color,
                    linewidth=0.7,
                    alpha=0.6,
                )
            snap_rows = sorted({0, log.n_samples // 3, 2 * log.n_samples // 3, log.n_samples - 1})
            for row in snap_rows:
                for g in range(lay.m):
                    idx = list(lay.robot_indices(g))
                    pts = log.positions[row, idx]
                    ring = np.vstack([pts, pts[:1]])
                    ax.plot(ring[:, 0], ring[:, 1], color=_GROUP_COLORS[g % len(_GROUP_COLORS)],
                            linewidth=1.2)
                ax.plot(
                    log.positions[row, :, 0],
                    log.positions[row, :, 1],
                    ">",
                    color="k",
                    markersize=4,
                    linestyle="none",
                )
            centroid = log.positions.mean(axis=1)
            ax.plot(centroid[:, 0], centroid[:, 1], "k--", linewidth=1.0, label="centroid")
            ax.legend(loc="best")
        ax.set_aspect("equal", adjustable="datalim")
        _save(fig, path)


def plot_error_norms(log: TrajectoryLog, path) -> None:
    """Per-level error norms on a log time axis."""
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(8, 5))
        ax.set_xlabel("time [s]")
        ax.set_ylabel("error norm")
        ax.set_title(f"per-level convergence: {log.name}")
        if log.n_samples:
            norms = log.error_norms()
            positive = log.times > 0
            if positive.any():
                t = log.times[positive]
                styles = {"inter": "--", "centroid": ":"}
                for name, series in norms.items():
                    style = styles.get(name, "-")
                    ax.loglog(t, np.maximum(series[positive], 1e-16), style, label=name)
                ax.legend(loc="best")
        _save(fig, path)
