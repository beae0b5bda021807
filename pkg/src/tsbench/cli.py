"""Command-line entry point.

``tsbench run <definition.xml>`` loads a workload file, expands it into
its run plans, executes them in order (never overlapping, so resource
metrics stay attributable), and persists per-run CSVs plus a manifest.

Exit codes: 0 success, 1 configuration error, 2 backend or monitor
connectivity, 3 run aborted midway (partial outputs are kept and the
manifest is flagged).
"""

from __future__ import annotations

import sys
from datetime import datetime, timezone
from pathlib import Path

import click

from . import __version__, engine, results
from .adapters import create_adapter
from .adapters.base import AdapterError
from .durations import DurationError, parse_duration_ms
from .stats import compute_stats, throughput_mb_per_s
from .sysmon import MonitorStartupError, start_monitor
from .workload import (
    RunPlan,
    WorkloadConfigError,
    WorkloadKind,
    expand_runs,
    load_workload,
    with_seed,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CONNECTIVITY = 2
EXIT_ABORTED = 3


@click.group()
@click.version_option(version=__version__)
def main():
    """Benchmark harness for time-series databases."""


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def print_ingestion_line(plan: RunPlan, summary: engine.IngestionSummary) -> None:
    click.echo(
        f"run {plan.ordinal}: batch={plan.batch_size} clients={plan.client_count} "
        f"records={summary.total_records} wall={summary.wall_time_s:.3f}s "
        f"rate={summary.overall_rate_rps:.1f} rec/s "
        f"throughput={throughput_mb_per_s(summary.overall_rate_rps):.2f} MB/s"
    )


def print_query_line(plan: RunPlan, stats) -> None:
    ms = 1000.0
    click.echo(
        f"run {plan.ordinal}: {plan.query_type.value} n={stats.n} "
        f"min={stats.min * ms:.3f} mean={stats.mean * ms:.3f} "
        f"p95={stats.p95 * ms:.3f} max={stats.max * ms:.3f} "
        f"stddev={stats.stddev * ms:.3f} (ms)"
    )


@main.command("run")
@click.argument("definition_file", type=click.Path(path_type=Path))
@click.option(
    "--out",
    "out_dir",
    type=click.Path(path_type=Path),
    default=Path("results"),
    show_default=True,
    help="Directory for CSVs and the manifest.",
)
@click.option("--monitor", "monitor_url", default=None, help="Resource-monitor REST endpoint.")
@click.option(
    "--monitor-period",
    default="1s",
    show_default=True,
    help="Polling period for the resource monitor.",
)
@click.option("--reset-hook", default=None, help="Shell command executed between runs.")
@click.option("--dry-run", is_flag=True, help="Print the expanded run plans and write nothing.")
@click.option("--seed", type=int, default=None, help="Override the definition's seed.")
@click.option(
    "--no-schema-reset",
    is_flag=True,
    help="Recreate the table only before the first ingestion run instead of before each one.",
)
@click.option(
    "--warmup-batches",
    type=int,
    default=0,
    show_default=True,
    help="Leading batches per client to discard from the results.",
)
def run_command(
    definition_file: Path,
    out_dir: Path,
    monitor_url: str | None,
    monitor_period: str,
    reset_hook: str | None,
    dry_run: bool,
    seed: int | None,
    no_schema_reset: bool,
    warmup_batches: int,
):
    """Execute every run of one workload definition file."""
    try:
        definition = load_workload(definition_file)
    except OSError as exc:
        _fail(EXIT_CONFIG, f"cannot read {definition_file}: {exc}")
    except WorkloadConfigError as exc:
        _fail(EXIT_CONFIG, f"{definition_file}: {exc}")
    if seed is not None:
        definition = with_seed(definition, seed)
    try:
        period_s = parse_duration_ms(monitor_period) / 1000.0
    except DurationError as exc:
        _fail(EXIT_CONFIG, str(exc))

    plans = expand_runs(definition)
    if dry_run:
        click.echo(f"{definition_file}: {len(plans)} run(s)")
        for plan in plans:
            click.echo("  " + plan.describe())
        return

    def adapter_factory(_ordinal: int):
        return create_adapter(definition.target_database, definition.connection)

    # connectivity first, before any file is created
    try:
        with adapter_factory(0) as probe:
            if not probe.health_probe():
                _fail(EXIT_CONNECTIVITY, f"{definition.target_database.value}: probe query failed")
            server_version = probe.server_version()
    except AdapterError as exc:
        _fail(EXIT_CONNECTIVITY, f"{definition.target_database.value}: {exc}")

    if monitor_url is not None:
        try:
            start_monitor(monitor_url, period_s).stop()
        except MonitorStartupError as exc:
            _fail(EXIT_CONNECTIVITY, str(exc))

    try:
        results.check_output_dir(out_dir)
    except results.PersistError as exc:
        _fail(EXIT_ABORTED, str(exc))

    manifest = results.new_manifest(
        definition_path=definition_file,
        started_utc=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        target_database=definition.target_database.value,
        server_version=server_version,
        seed=definition.seed,
        monitor=monitor_url or "off",
    )

    click.echo(
        f"target {definition.target_database.value} ({server_version}), "
        f"{len(plans)} run(s), output in {out_dir}"
    )

    exit_code = EXIT_OK
    for plan in plans:
        monitor = None
        try:
            if plan.ordinal > 0:
                hook_output = engine.between_runs_reset(reset_hook, adapter_factory)
                if hook_output:
                    click.echo(f"reset hook output:\n{hook_output.rstrip()}")
            if plan.workload_kind is WorkloadKind.INGESTION and (
                plan.ordinal == 0 or not no_schema_reset
            ):
                with adapter_factory(0) as admin:
                    admin.init_schema(definition.sensor_number)
            if monitor_url is not None:
                monitor = start_monitor(monitor_url, period_s)

            if plan.workload_kind is WorkloadKind.INGESTION:
                summary, samples = engine.run_ingestion(
                    plan,
                    definition.stop_condition,
                    adapter_factory,
                    warmup_batches=warmup_batches,
                )
                snapshots = monitor.stop() if monitor else None
                monitor = None
                entry = results.persist_run(
                    out_dir, plan, samples, ingestion=summary, snapshots=snapshots
                )
                print_ingestion_line(plan, summary)
            else:
                samples = engine.run_query(plan, adapter_factory)
                snapshots = monitor.stop() if monitor else None
                monitor = None
                ok = [s.elapsed_s for s in samples if not s.failed]
                stats = compute_stats(ok) if ok else None
                entry = results.persist_run(
                    out_dir, plan, samples, latency=stats, snapshots=snapshots
                )
                if stats is not None:
                    print_query_line(plan, stats)
                else:
                    click.echo(f"run {plan.ordinal}: every repetition failed")
            manifest.runs.append(entry)
        except engine.WorkerAbortError as exc:
            snapshots = monitor.stop() if monitor else None
            if plan.workload_kind is WorkloadKind.INGESTION:
                entry = results.persist_run(
                    out_dir,
                    plan,
                    exc.samples,
                    ingestion=exc.summary,
                    snapshots=snapshots,
                    status="aborted",
                )
            else:
                ok = [s.elapsed_s for s in exc.samples if not s.failed]
                entry = results.persist_run(
                    out_dir,
                    plan,
                    exc.samples,
                    latency=compute_stats(ok) if ok else None,
                    snapshots=snapshots,
                    status="aborted",
                )
            manifest.runs.append(entry)
            manifest.status = "aborted"
            click.echo(f"run {plan.ordinal} aborted: {exc}", err=True)
            exit_code = EXIT_ABORTED
            break
        except (engine.ResetHookError, engine.HealthTimeoutError) as exc:
            if monitor:
                monitor.stop()
            manifest.status = "aborted"
            click.echo(f"run {plan.ordinal} aborted: {exc}", err=True)
            exit_code = EXIT_ABORTED
            break

    results.write_manifest(out_dir, manifest)
    if exit_code != EXIT_OK:
        sys.exit(exit_code)


if __name__ == "__main__":
    main()
