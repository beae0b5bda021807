"""Readers for the tsbench output directory.

The CSV schemas are versioned through the manifest's
``output_schema_version`` and by fixed headers; anything unexpected
raises SchemaMismatchError naming expected vs found, instead of
producing a silently wrong figure.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

SUPPORTED_SCHEMA_VERSION = 1

SAMPLES_HEADER = [
    "run", "client", "kind", "batch_size", "query_type",
    "start_offset_s", "elapsed_s", "records", "failed", "error", "wall_unix",
]
SUMMARY_HEADER = ["run", "section", "key", "value"]
RESOURCES_HEADER = [
    "wall_unix", "cpu_user_pct", "cpu_system_pct", "cpu_iowait_pct",
    "ctx_switches_per_s", "mem_used_pct", "mem_cached_bytes", "swap_used_bytes",
    "disk_read_bytes_per_s", "disk_write_bytes_per_s", "disk_io_ops_per_s",
    "net_sent_bytes_per_s", "net_recv_bytes_per_s",
]


class SchemaMismatchError(Exception):
    def __init__(self, where: str, expected, found):
        super().__init__(f"{where}: expected {expected!r}, found {found!r}")


@dataclass
class Sample:
    run: int
    client: int
    kind: str
    batch_size: int | None
    query_type: str
    start_offset_s: float
    elapsed_s: float
    records: int
    failed: bool


@dataclass
class RunData:
    ordinal: int
    samples: list[Sample]
    summary: dict[str, dict[str, str]]  # section -> key -> value
    resources: list[dict[str, float | None]]


@dataclass
class ResultsDir:
    path: Path
    manifest: dict
    runs: list[RunData]

    @property
    def target_database(self) -> str:
        return self.manifest.get("target_database", "unknown")


def _check_header(path: Path, expected: list[str], found: list[str]) -> None:
    if found != expected:
        raise SchemaMismatchError(str(path), expected, found)


def read_samples(path: Path) -> list[Sample]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        _check_header(path, SAMPLES_HEADER, next(reader))
        samples = []
        for row in reader:
            record = dict(zip(SAMPLES_HEADER, row))
            samples.append(
                Sample(
                    run=int(record["run"]),
                    client=int(record["client"]),
                    kind=record["kind"],
                    batch_size=int(record["batch_size"]) if record["batch_size"] else None,
                    query_type=record["query_type"],
                    start_offset_s=float(record["start_offset_s"]),
                    elapsed_s=float(record["elapsed_s"]),
                    records=int(record["records"]),
                    failed=record["failed"] == "true",
                )
            )
    return samples


def read_summary(path: Path) -> dict[str, dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        _check_header(path, SUMMARY_HEADER, next(reader))
        sections: dict[str, dict[str, str]] = {}
        for _run, section, key, value in reader:
            sections.setdefault(section, {})[key] = value
    return sections


def read_resources(path: Path) -> list[dict[str, float | None]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        _check_header(path, RESOURCES_HEADER, next(reader))
        rows = []
        for row in reader:
            rows.append(
                {
                    name: (float(cell) if cell else None)
                    for name, cell in zip(RESOURCES_HEADER, row)
                }
            )
    return rows


def load_results(results_dir: Path) -> ResultsDir:
    """Load a whole output directory via its manifest."""
    manifest_path = results_dir / "manifest.json"
    if not manifest_path.exists():
        raise SchemaMismatchError(str(results_dir), "manifest.json", "missing")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    version = manifest.get("output_schema_version")
    if version != SUPPORTED_SCHEMA_VERSION:
        raise SchemaMismatchError(
            str(manifest_path),
            f"output_schema_version {SUPPORTED_SCHEMA_VERSION}",
            f"output_schema_version {version}",
        )
    runs = []
    for entry in manifest.get("runs", []):
        samples = read_samples(results_dir / entry["samples"])
        summary = read_summary(results_dir / entry["summary"])
        resources = (
            read_resources(results_dir / entry["resources"])
            if entry.get("resources")
            else []
        )
        runs.append(
            RunData(
                ordinal=entry["ordinal"],
                samples=samples,
                summary=summary,
                resources=resources,
            )
        )
    return ResultsDir(path=results_dir, manifest=manifest, runs=runs)
