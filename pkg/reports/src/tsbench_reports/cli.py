"""tsbench-report: turn a results directory into figures and tables.

Figure kinds: latency-box (insert latency per batch size),
rate-per-clients, scaling-rate (rolling per-minute rates),
resource-timeline, and query-stats-table (plain text).
``all`` renders every kind the directory has data for.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import figures, tables
from .readers import SchemaMismatchError, load_results

RENDERERS = {
    "latency-box": ("latency_box.svg", figures.latency_box_plot),
    "rate-per-clients": ("rate_per_clients.svg", figures.rate_per_clients),
    "scaling-rate": ("scaling_rate.svg", figures.scaling_rate_series),
    "resource-timeline": ("resource_timeline.svg", figures.resource_timeline),
    "query-stats-table": ("query_stats.txt", tables.render_query_stats_table),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsbench-report",
        description="Render benchmark figures and tables from a tsbench results directory.",
    )
    parser.add_argument(
        "kind",
        choices=sorted(RENDERERS) + ["all"],
        help="figure kind to render, or 'all'",
    )
    parser.add_argument("results_dir", type=Path, help="directory with manifest.json")
    parser.add_argument(
        "--out",
        type=Path,
        default=Path("figures"),
        help="output directory (default: figures)",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        results = load_results(args.results_dir)
    except SchemaMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    kinds = sorted(RENDERERS) if args.kind == "all" else [args.kind]
    wrote = []
    for kind in kinds:
        filename, renderer = RENDERERS[kind]
        try:
            wrote.append(renderer(results, args.out / filename))
        except figures.RenderError as exc:
            if args.kind != "all":
                print(f"error: {kind}: {exc}", file=sys.stderr)
                return 1
            print(f"skipped {kind}: {exc}")
    for path in wrote:
        print(f"wrote {path}")
    if not wrote:
        print("error: nothing to render", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
