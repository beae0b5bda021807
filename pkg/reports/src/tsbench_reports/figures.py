"""Figure rendering.

Four figure kinds plus a text table (tables.py). All plots are written
as SVG with a fixed hash salt and no embedded date, so the same inputs
always produce byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "tsbench-reports"

import matplotlib.pyplot as plt

from .readers import ResultsDir

_SAVE_KWARGS = {"format": "svg", "metadata": {"Date": None}}


class RenderError(Exception):
    pass


def _save(fig, output: Path) -> Path:
    output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output, **_SAVE_KWARGS)
    plt.close(fig)
    return output


def latency_box_plot(results: ResultsDir, output: Path) -> Path:
    """Insert-latency box plot per batch size, latency on a log scale,
    with the means drawn as markers."""
    groups: dict[int, list[float]] = {}
    for run in results.runs:
        for sample in run.samples:
            if sample.kind == "insert" and not sample.failed:
                groups.setdefault(sample.batch_size, []).append(sample.elapsed_s * 1000)
    if not groups:
        raise RenderError("no successful insert samples to plot")
    sizes = sorted(groups)
    data = [groups[size] for size in sizes]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.boxplot(data, tick_labels=[str(s) for s in sizes], whis=(5, 95))
    means = [sum(d) / len(d) for d in data]
    ax.plot(range(1, len(sizes) + 1), means, "D-", color="tab:orange",
            markersize=5, label="mean")
    ax.set_yscale("log")
    ax.set_xlabel("batch size (records)")
    ax.set_ylabel("insert latency (ms)")
    ax.set_title(f"Batch ingestion latency by batch size ({results.target_database})")
    ax.legend()
    ax.grid(True, which="both", axis="y", alpha=0.3)
    return _save(fig, output)


def rate_per_clients(results: ResultsDir, output: Path) -> Path:
    """Overall ingestion rate as a function of the client count."""
    points: list[tuple[int, float]] = []
    for run in results.runs:
        plan = run.summary.get("plan", {})
        ingestion = run.summary.get("ingestion", {})
        if "overall_rate_rps" in ingestion:
            points.append(
                (int(plan.get("client_count", "1")), float(ingestion["overall_rate_rps"]))
            )
    if not points:
        raise RenderError("no ingestion summaries to plot")
    points.sort()
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot([c for c, _ in points], [r for _, r in points], "o-")
    ax.set_xlabel("concurrent clients")
    ax.set_ylabel("ingestion rate (records/s)")
    ax.set_title(f"Ingestion rate by number of clients ({results.target_database})")
    ax.grid(True, alpha=0.3)
    return _save(fig, output)


def scaling_rate_series(results: ResultsDir, output: Path) -> Path:
    """Rolling one-minute ingestion rate over the course of each run."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    plotted = False
    for run in results.runs:
        rolling = run.summary.get("rolling_rate_rps", {})
        if not rolling:
            continue
        series = sorted((int(minute), float(rate)) for minute, rate in rolling.items())
        ax.plot(
            [m for m, _ in series],
            [r for _, r in series],
            marker="o",
            label=f"run {run.ordinal}",
        )
        plotted = True
    if not plotted:
        raise RenderError("no rolling-rate series to plot")
    ax.set_xlabel("run minute")
    ax.set_ylabel("ingestion rate (records/s)")
    ax.set_title(f"Rolling ingestion rate ({results.target_database})")
    ax.grid(True, alpha=0.3)
    ax.legend()
    return _save(fig, output)


def resource_timeline(results: ResultsDir, output: Path) -> Path:
    """Three stacked panels: CPU iowait %, used memory %, swap bytes."""
    panels = [
        ("cpu_iowait_pct", "CPU iowait (%)"),
        ("mem_used_pct", "used memory (%)"),
        ("swap_used_bytes", "swap used (bytes)"),
    ]
    fig, axes = plt.subplots(3, 1, figsize=(7, 7), sharex=True)
    plotted = False
    for ax, (field, label) in zip(axes, panels):
        for run in results.runs:
            rows = [
                (r["wall_unix"], r[field])
                for r in run.resources
                if r.get(field) is not None and r.get("wall_unix") is not None
            ]
            if not rows:
                continue
            t0 = rows[0][0]
            ax.plot(
                [(t - t0) for t, _ in rows],
                [v for _, v in rows],
                label=f"run {run.ordinal}",
            )
            plotted = True
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
    if not plotted:
        raise RenderError("no resource snapshots to plot")
    axes[-1].set_xlabel("seconds since run start")
    axes[0].set_title(f"Server resources over time ({results.target_database})")
    axes[0].legend(loc="upper right", fontsize="small")
    return _save(fig, output)
