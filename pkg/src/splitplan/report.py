"""Figure rendering for sweep and simulation outputs.

Reads the CSV files the other commands emit and writes PNG trend figures
next to them: offload fraction and improvement-over-greedy against deadline
and bandwidth, and cumulative queue wait per variant.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .evaluator import mean_over, read_sweep_csv  # noqa: E402

_PNG_META = {"Software": "splitplan"}  # keep savefig output reproducible


def _style(ax, xlabel: str, ylabel: str, title: str) -> None:
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata=_PNG_META)
    plt.close(fig)
    return path


def _trend_figure(cells, axis: str, value: str, planners, xlabel, ylabel, title,
                  path: Path, logx: bool) -> Path | None:
    fig, ax = plt.subplots(figsize=(6, 4))
    plotted = False
    for name in planners:
        series = mean_over(cells, axis, value, planner=name)
        if not series:
            continue
        xs = sorted(series)
        ax.plot(xs, [series[x] for x in xs], marker="o", label=name)
        plotted = True
    if not plotted:
        plt.close(fig)
        return None
    if logx:
        ax.set_xscale("log")
    _style(ax, xlabel, ylabel, title)
    ax.legend()
    return _save(fig, path)


def plot_sweep(csv_path, out_dir) -> list[Path]:
    """Render the four sweep trend figures from a results CSV."""
    cells = read_sweep_csv(csv_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [
        ("deadline_s", "offload_fraction", ("dp", "greedy"),
         "deadline (s)", "mean offload fraction",
         "Offload vs. latency requirement", "offload_vs_deadline.png", True),
        ("deadline_s", "improvement_pp", ("dp",),
         "deadline (s)", "mean improvement over greedy (pp of total)",
         "Improvement vs. latency requirement", "improvement_vs_deadline.png", True),
        ("uplink_bps", "offload_fraction", ("dp", "greedy"),
         "uplink (bit/s)", "mean offload fraction",
         "Offload vs. bandwidth", "offload_vs_bandwidth.png", True),
        ("uplink_bps", "improvement_pp", ("dp",),
         "uplink (bit/s)", "mean improvement over greedy (pp of total)",
         "Improvement vs. bandwidth", "improvement_vs_bandwidth.png", True),
    ]
    written = []
    for axis, value, planners, xl, yl, title, fname, logx in jobs:
        path = _trend_figure(cells, axis, value, planners, xl, yl, title,
                             out_dir / fname, logx)
        if path is not None:
            written.append(path)
    return written


def plot_sim(sim_dir, out_dir) -> list[Path]:
    """Render cumulative wait-time curves from a simulation output directory."""
    import csv as _csv

    sim_dir = Path(sim_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    plotted = False
    for series_file in sorted(sim_dir.glob("cumulative_*.csv")):
        variant = series_file.stem.removeprefix("cumulative_")
        with open(series_file, newline="") as fh:
            rows = list(_csv.DictReader(fh))
        if not rows:
            continue
        xs = [int(r["request_id"]) for r in rows]
        ys = [float(r["cumulative_wait_ms"]) / 1000.0 for r in rows]
        ax.plot(xs, ys, label=variant)
        plotted = True
    if not plotted:
        plt.close(fig)
        return []
    _style(ax, "request index", "cumulative wait (s)", "Cumulative queue wait")
    ax.legend()
    return [_save(fig, out_dir / "cumulative_wait.png")]
