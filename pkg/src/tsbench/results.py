"""Result persistence: per-run CSV files plus a run manifest.

Each run produces up to three CSVs in its own directory:

- ``samples.csv``   one row per timed operation (insert or query)
- ``summary.csv``   derived metrics in long form (run, section, key, value)
- ``resources.csv`` one row per resource snapshot (only when monitoring)

plus one ``manifest.json`` at the output root describing the whole
invocation. Schemas are versioned and documented column by column in
``docs/output-files.md``; the header test in the suite guards them.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .engine import IngestionSummary, LatencySample
from .stats import QueryStats, throughput_mb_per_s
from .sysmon import SNAPSHOT_FIELDS, ResourceSnapshot
from .workload import RunPlan

OUTPUT_SCHEMA_VERSION = 1

SAMPLES_HEADER = [
    "run",
    "client",
    "kind",
    "batch_size",
    "query_type",
    "start_offset_s",
    "elapsed_s",
    "records",
    "failed",
    "error",
    "wall_unix",
]

SUMMARY_HEADER = ["run", "section", "key", "value"]

RESOURCES_HEADER = list(SNAPSHOT_FIELDS)

# samples.csv columns that vary between identical reruns
TIMING_COLUMNS = ("start_offset_s", "elapsed_s", "wall_unix")

MANIFEST_NAME = "manifest.json"


class PersistError(Exception):
    pass


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_samples_csv(path: Path, samples: list[LatencySample]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SAMPLES_HEADER)
        for s in samples:
            writer.writerow(
                [
                    s.run_ordinal,
                    s.client_ordinal,
                    s.kind.value,
                    _cell(s.batch_size),
                    _cell(s.query_type.value if s.query_type else None),
                    _cell(s.start_offset_s),
                    _cell(s.elapsed_s),
                    s.records,
                    _cell(s.failed),
                    s.error,
                    _cell(s.wall_unix),
                ]
            )


def summary_rows(
    plan: RunPlan,
    ingestion: IngestionSummary | None = None,
    latency: QueryStats | None = None,
    failed_count: int = 0,
) -> list[tuple[int, str, str, str]]:
    """The long-form summary rows for one run."""
    run = plan.ordinal
    rows: list[tuple[int, str, str, str]] = [
        (run, "plan", "kind", plan.workload_kind.value),
        (run, "plan", "batch_size", _cell(plan.batch_size)),
        (run, "plan", "client_count", str(plan.client_count)),
        (run, "plan", "query_type", _cell(plan.query_type.value if plan.query_type else None)),
        (run, "plan", "seed", str(plan.definition.seed)),
    ]
    if ingestion is not None:
        rows += [
            (run, "ingestion", "total_records", str(ingestion.total_records)),
            (run, "ingestion", "wall_time_s", _cell(ingestion.wall_time_s)),
            (run, "ingestion", "overall_rate_rps", _cell(ingestion.overall_rate_rps)),
            (
                run,
                "ingestion",
                "throughput_mb_s",
                _cell(throughput_mb_per_s(ingestion.overall_rate_rps)),
            ),
        ]
        for bucket in ingestion.rolling.buckets:
            rows.append((run, "rolling_rate_rps", str(bucket.minute_index), _cell(bucket.rate)))
            rows.append((run, "rolling_records", str(bucket.minute_index), str(bucket.records)))
    if latency is not None:
        rows += [
            (run, "latency", "n", str(latency.n)),
            (run, "latency", "min_s", _cell(latency.min)),
            (run, "latency", "mean_s", _cell(latency.mean)),
            (run, "latency", "p95_s", _cell(latency.p95)),
            (run, "latency", "max_s", _cell(latency.max)),
            (run, "latency", "stddev_s", _cell(latency.stddev)),
            (run, "latency", "failed_count", str(failed_count)),
        ]
    return rows


def write_summary_csv(path: Path, rows: list[tuple[int, str, str, str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_HEADER)
        writer.writerows(rows)


def write_resources_csv(path: Path, snapshots: list[ResourceSnapshot]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESOURCES_HEADER)
        for snap in snapshots:
            record = asdict(snap)
            writer.writerow([_cell(record[name]) for name in RESOURCES_HEADER])


@dataclass
class RunFileSet:
    """Relative paths of one run's persisted files."""

    ordinal: int
    samples: str
    summary: str
    resources: str | None = None
    status: str = "complete"


@dataclass
class RunManifest:
    """Reproducibility envelope for one harness invocation."""

    benchmark_version: str
    definition_path: str
    definition_sha256: str
    started_utc: str
    target_database: str
    server_version: str
    seed: int
    monitor: str  # endpoint URL or "off"
    status: str = "complete"  # or "aborted"
    output_schema_version: int = OUTPUT_SCHEMA_VERSION
    runs: list[RunFileSet] = field(default_factory=list)

    def to_json(self) -> str:
        payload = asdict(self)
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def check_output_dir(out_dir: Path) -> None:
    """Create the output directory and verify it is writable."""
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write-probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise PersistError(f"output directory {out_dir} is not writable: {exc}") from None


def run_dir(out_dir: Path, ordinal: int) -> Path:
    path = out_dir / f"run-{ordinal:03d}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def persist_run(
    out_dir: Path,
    plan: RunPlan,
    samples: list[LatencySample],
    *,
    ingestion: IngestionSummary | None = None,
    latency: QueryStats | None = None,
    snapshots: list[ResourceSnapshot] | None = None,
    status: str = "complete",
) -> RunFileSet:
    """Write one run's CSVs; returns their manifest entry."""
    directory = run_dir(out_dir, plan.ordinal)
    samples_path = directory / "samples.csv"
    summary_path = directory / "summary.csv"
    write_samples_csv(samples_path, samples)
    failed = sum(1 for s in samples if s.failed)
    write_summary_csv(summary_path, summary_rows(plan, ingestion, latency, failed))
    entry = RunFileSet(
        ordinal=plan.ordinal,
        samples=str(samples_path.relative_to(out_dir)),
        summary=str(summary_path.relative_to(out_dir)),
        status=status,
    )
    if snapshots is not None:
        resources_path = directory / "resources.csv"
        write_resources_csv(resources_path, snapshots)
        entry.resources = str(resources_path.relative_to(out_dir))
    return entry


def write_manifest(out_dir: Path, manifest: RunManifest) -> Path:
    path = out_dir / MANIFEST_NAME
    path.write_text(manifest.to_json(), encoding="utf-8")
    return path


def new_manifest(
    definition_path: Path,
    started_utc: str,
    target_database: str,
    server_version: str,
    seed: int,
    monitor: str,
) -> RunManifest:
    return RunManifest(
        benchmark_version=__version__,
        definition_path=str(definition_path),
        definition_sha256=file_sha256(definition_path),
        started_utc=started_utc,
        target_database=target_database,
        server_version=server_version,
        seed=seed,
        monitor=monitor,
    )
