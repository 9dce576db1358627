"""Figure rendering for CLI report paths.

Every CLI command that writes delimited output can also drop a PNG next to
it; these helpers keep that rendering in one place. The Agg backend is
forced so figures render in headless environments.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .beamform import BeamPattern
from .bench import BenchResult
from .pipeline import DoaResult


def figure_path_for(out_path: str | Path) -> Path:
    """PNG sibling of a data file: same directory, same stem."""
    out = Path(out_path)
    return out.with_suffix(".png")


def save_pattern_figure(
    path: str | Path,
    pattern: BeamPattern,
    marks_deg: Sequence[tuple[float, str]] = (),
    title: str = "Beam pattern",
) -> Path:
    """Line plot of the normalized pattern with optional angle markers."""
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    ax.plot(pattern.az_deg, pattern.power_db, lw=1.4)
    for az, label in marks_deg:
        ax.axvline(az, color="crimson", ls="--", lw=0.9, alpha=0.7)
        ax.annotate(
            label,
            xy=(az, ax.get_ylim()[0]),
            xytext=(az + 0.5, -55),
            fontsize=8,
            color="crimson",
        )
    ax.set_xlabel("azimuth (deg)")
    ax.set_ylabel("power (dB)")
    ax.set_ylim(max(-90.0, float(pattern.power_db.min()) - 5.0), 3.0)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return Path(path)


def save_sweep_figure(path: str | Path, result: BenchResult, log_y: bool = False) -> Path:
    """Metric-vs-sweep line plot for a bench result."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    x = list(result.sweep_values)
    numeric = all(isinstance(v, (int, float)) for v in x)
    xs = x if numeric else range(len(x))
    ax.plot(xs, result.metric_values, marker="o", lw=1.4)
    if not numeric:
        ax.set_xticks(list(xs))
        ax.set_xticklabels([str(v) for v in x])
    if log_y:
        ax.set_yscale("log")
    ax.set_xlabel(result.sweep_name)
    ax.set_ylabel(result.metric_name)
    ax.set_title(f"{result.name}: {result.metric_name} vs {result.sweep_name}")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return Path(path)


def save_datapath_figure(path: str | Path, result: BenchResult) -> Path:
    """Latency and throughput against pipeline stages on twin axes."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    stages = list(result.sweep_values)
    ax.plot(stages, result.metric_values, marker="o", lw=1.4, label="latency (cycles)")
    ax.set_xlabel("pipeline stages")
    ax.set_ylabel("latency (cycles)")
    ax2 = ax.twinx()
    ax2.plot(
        stages,
        result.extra.get("throughput", []),
        marker="s",
        lw=1.4,
        color="darkorange",
        label="throughput (1/II)",
    )
    ax2.set_ylabel("throughput (results/cycle)")
    lines, labels = ax.get_legend_handles_labels()
    lines2, labels2 = ax2.get_legend_handles_labels()
    ax.legend(lines + lines2, labels + labels2, loc="center right", fontsize=8)
    ax.set_title("Fixed-point datapath: stages trade latency for throughput")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return Path(path)


def save_votes_figure(path: str | Path, result: DoaResult) -> Path:
    """Bar chart of first-round vote tallies with estimate markers."""
    fig, ax = plt.subplots(figsize=(6.8, 4.0))
    angles = list(result.class_angles_az_deg)
    width = 0.8 * (angles[1] - angles[0] if len(angles) > 1 else 1.0)
    tally = result.vote_rounds[0]
    ax.bar(angles, tally, width=width, alpha=0.8)
    for az in result.estimates_az_deg:
        ax.axvline(az, color="crimson", ls="--", lw=1.0)
    ax.set_xlabel("class azimuth (deg)")
    ax.set_ylabel("pairwise votes (round 1)")
    ax.set_title("Direction classes and estimates")
    ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return Path(path)
