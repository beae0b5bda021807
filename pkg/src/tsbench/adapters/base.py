"""Database abstraction: one adapter per backend, one shared contract.

All adapters expose schema setup, single-operation bulk inserts, and the
five benchmark queries. Results are normalized so any two backends (and
the in-memory reference) can be compared row for row:

- timestamps and bucket starts are epoch milliseconds (UTC integers)
- buckets are aligned to the Unix epoch: start = t - t % width
- rows are sorted by (timestamp/bucket, sensor_id); sorting happens
  client-side after the timed section so it cannot skew latency
- Q1 uses exclusive time bounds (start < t < end); Q2-Q5 use inclusive
  bounds (start <= t <= end)
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

from ..generator import SensorRecord
from ..workload import AggFunc, CompFunc, ConnectionInfo, QueryType

TABLE_NAME = "sensor_data"


class AdapterError(Exception):
    """Base class for backend failures.

    retryable distinguishes transport hiccups (worth retrying) from
    server-side rejections (not worth retrying).
    """

    retryable = False


class ConnectivityError(AdapterError):
    retryable = True


class SchemaError(AdapterError):
    pass


class InsertError(AdapterError):
    pass


class QueryError(AdapterError):
    pass


class QuerySpecError(ValueError):
    """The query parameters are inconsistent."""


@dataclass(frozen=True)
class InsertReceipt:
    """Acknowledgment of one bulk insert."""

    records_written: int
    elapsed_s: float  # monotonic, submission to acknowledgment


@dataclass(frozen=True)
class QuerySpec:
    """Parameters of one query execution."""

    query_type: QueryType
    t_start_ms: int
    t_end_ms: int
    sensors: tuple[int, ...]
    bucket_width_ms: int | None = None  # Q2-Q5
    agg_func: AggFunc = AggFunc.AVERAGE  # Q3-Q5
    comp_func: CompFunc = CompFunc.SUBTRACT  # Q5
    min_value: float | None = None  # Q2
    max_value: float | None = None  # Q2

    def __post_init__(self):
        if self.t_start_ms >= self.t_end_ms:
            raise QuerySpecError(
                f"time range is empty: [{self.t_start_ms}, {self.t_end_ms})"
            )
        if not self.sensors:
            raise QuerySpecError("at least one sensor id is required")
        qt = self.query_type
        if qt in (QueryType.Q2, QueryType.Q4, QueryType.Q5):
            if self.bucket_width_ms is None or self.bucket_width_ms <= 0:
                raise QuerySpecError(f"{qt.value} needs a positive bucket width")
        if qt is QueryType.Q2:
            if len(self.sensors) != 1:
                raise QuerySpecError("Q2 filters on exactly one sensor")
            if self.min_value is None or self.max_value is None:
                raise QuerySpecError("Q2 needs min and max boundaries")
        if qt is QueryType.Q5 and len(self.sensors) != 2:
            raise QuerySpecError("Q5 compares exactly two sensors")


RESULT_COLUMNS: dict[QueryType, tuple[str, ...]] = {
    QueryType.Q1: ("timestamp_ms", "sensor_id", "value"),
    QueryType.Q2: ("interval_start_ms", "max_value", "min_value"),
    QueryType.Q3: ("agg_value",),
    QueryType.Q4: ("interval_start_ms", "sensor_id", "agg_value"),
    QueryType.Q5: ("interval_start_ms", "combined_value"),
}

# how many leading columns form the sort key, per query type
_SORT_KEY_WIDTH = {
    QueryType.Q1: 2,
    QueryType.Q2: 1,
    QueryType.Q3: 0,
    QueryType.Q4: 2,
    QueryType.Q5: 1,
}


@dataclass(frozen=True)
class ResultSet:
    """Normalized query result: named columns, sorted tuples."""

    query_type: QueryType
    rows: tuple[tuple, ...]

    @property
    def columns(self) -> tuple[str, ...]:
        return RESULT_COLUMNS[self.query_type]


def make_result(query_type: QueryType, rows) -> ResultSet:
    """Sort rows on their key columns and freeze them into a ResultSet."""
    width = _SORT_KEY_WIDTH[query_type]
    ordered = sorted(rows, key=lambda row: row[:width]) if width else list(rows)
    return ResultSet(query_type=query_type, rows=tuple(tuple(r) for r in ordered))


def bucket_start(timestamp_ms: int, width_ms: int) -> int:
    """Epoch-aligned bucket start containing the timestamp."""
    return timestamp_ms - timestamp_ms % width_ms


def _cell_equal(a, b, rel_tol: float) -> bool:
    if a is None or b is None:
        return a is None and b is None
    if isinstance(a, float) or isinstance(b, float):
        return math.isclose(a, b, rel_tol=rel_tol, abs_tol=0.0)
    return a == b


def results_equal(a: ResultSet, b: ResultSet, rel_tol: float = 1e-9) -> bool:
    """Semantic equality: ids/timestamps exact, floats to relative tolerance."""
    if a.query_type is not b.query_type or len(a.rows) != len(b.rows):
        return False
    return all(
        len(ra) == len(rb) and all(_cell_equal(x, y, rel_tol) for x, y in zip(ra, rb))
        for ra, rb in zip(a.rows, b.rows)
    )


def diff_results(a: ResultSet, b: ResultSet, rel_tol: float = 1e-9, limit: int = 5) -> str:
    """Human-readable mismatch summary for test failures."""
    if a.query_type is not b.query_type:
        return f"query types differ: {a.query_type} vs {b.query_type}"
    problems = []
    if len(a.rows) != len(b.rows):
        problems.append(f"row counts differ: {len(a.rows)} vs {len(b.rows)}")
    for i, (ra, rb) in enumerate(zip(a.rows, b.rows)):
        if len(ra) != len(rb) or not all(_cell_equal(x, y, rel_tol) for x, y in zip(ra, rb)):
            problems.append(f"row {i}: {ra} vs {rb}")
        if len(problems) >= limit:
            break
    return "; ".join(problems) if problems else "results equal"


class DatabaseAdapter(ABC):
    """One live backend connection. Single-owner: never share an instance
    between worker threads; construct one per client instead."""

    @abstractmethod
    def init_schema(self, sensor_number: int) -> None:
        """Drop and recreate the measurements table (timestamp, sensor_id,
        value) with the combined (timestamp, sensor_id) index. Idempotent."""

    @abstractmethod
    def insert_batch(self, records: list[SensorRecord]) -> InsertReceipt:
        """Write a non-empty batch in one backend bulk operation,
        all-or-nothing, timing submission to acknowledgment."""

    @abstractmethod
    def execute_query(self, spec: QuerySpec) -> tuple[ResultSet, float]:
        """Run one query; elapsed covers send to full materialization."""

    @abstractmethod
    def count_records(self) -> int:
        """Total rows currently in the measurements table."""

    @abstractmethod
    def health_probe(self) -> bool:
        """True when a trivial query succeeds."""

    @abstractmethod
    def server_version(self) -> str:
        """Human-readable backend version string."""

    def close(self) -> None:  # noqa: B027 - optional hook
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def check_batch(records: list[SensorRecord]) -> None:
    if not records:
        raise InsertError("empty batch: nothing to insert")


def require_connection_fields(conn: ConnectionInfo, *fields: str) -> None:
    for name in fields:
        if not getattr(conn, name):
            raise ConnectivityError(f"connection is missing required field {name!r}")
