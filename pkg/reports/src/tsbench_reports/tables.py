"""Query-latency statistics tables.

The numbers shown are recomputed from samples.csv with the same
definitions the harness documents: nearest-rank 95th percentile and the
sample (n-1) standard deviation, displayed in milliseconds to three
decimals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from .readers import ResultsDir

DISPLAY_DECIMALS = 3


@dataclass(frozen=True)
class StatsRow:
    run: int
    query_type: str
    n: int
    min_ms: float
    mean_ms: float
    p95_ms: float
    max_ms: float
    stddev_ms: float


def stats_from_durations(durations_s: list[float]) -> tuple[float, float, float, float, float]:
    ordered = sorted(durations_s)
    n = len(ordered)
    mean = sum(ordered) / n
    stddev = math.sqrt(sum((x - mean) ** 2 for x in ordered) / (n - 1)) if n > 1 else 0.0
    p95 = ordered[math.ceil(0.95 * n) - 1]
    return ordered[0], mean, p95, ordered[-1], stddev


def query_stats_rows(results: ResultsDir) -> list[StatsRow]:
    rows = []
    for run in results.runs:
        durations = [
            s.elapsed_s for s in run.samples if s.kind == "query" and not s.failed
        ]
        if not durations:
            continue
        query_type = next(
            (s.query_type for s in run.samples if s.kind == "query"), "?"
        )
        lo, mean, p95, hi, stddev = stats_from_durations(durations)
        ms = 1000.0
        rows.append(
            StatsRow(
                run=run.ordinal,
                query_type=query_type,
                n=len(durations),
                min_ms=round(lo * ms, DISPLAY_DECIMALS),
                mean_ms=round(mean * ms, DISPLAY_DECIMALS),
                p95_ms=round(p95 * ms, DISPLAY_DECIMALS),
                max_ms=round(hi * ms, DISPLAY_DECIMALS),
                stddev_ms=round(stddev * ms, DISPLAY_DECIMALS),
            )
        )
    return rows


def render_query_stats_table(results: ResultsDir, output: Path) -> Path:
    """Plain-text latency table: Min. Mean 95% Max. Std. Dev. in ms."""
    rows = query_stats_rows(results)
    header = f"{'Run':>4} {'Query':>6} {'N':>6} {'Min.':>12} {'Mean':>12} {'95%':>12} {'Max.':>12} {'Std. Dev.':>12}"
    lines = [
        f"Query latency statistics (ms) - {results.target_database}",
        header,
        "-" * len(header),
    ]
    for r in rows:
        lines.append(
            f"{r.run:>4} {r.query_type:>6} {r.n:>6} "
            f"{r.min_ms:>12.3f} {r.mean_ms:>12.3f} {r.p95_ms:>12.3f} "
            f"{r.max_ms:>12.3f} {r.stddev_ms:>12.3f}"
        )
    if not rows:
        lines.append("(no query runs in this results directory)")
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return output
