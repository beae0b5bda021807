"""In-memory reference backend and brute-force query oracle.

The oracle evaluates the five queries literally over a columnar record
store, mirroring their SQL shape:

- Q1  raw rows with start < t < end and sensor_id in filter
- Q2  per-bucket (max, min) of one sensor, keeping buckets whose
      min < lower bound OR max > upper bound
- Q3  one aggregate over every filtered sensor's values together
      (no per-sensor grouping), start <= t <= end
- Q4  aggregate per (bucket, sensor)
- Q5  two single-sensor bucket aggregates inner-joined on bucket,
      combined with the comparison function

Aggregate edge cases follow SQL: an aggregate over zero rows is NULL
(None), and the sample standard deviation of one row is NULL.

The reference backend wraps a named store so several adapter instances
(one per simulated client) share one dataset, like connections to one
server. Appends are locked; queries take a consistent snapshot.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .. import __version__
from ..generator import SensorRecord
from ..workload import AggFunc, CompFunc, ConnectionInfo, QueryType
from .base import (
    DatabaseAdapter,
    InsertReceipt,
    QueryError,
    QuerySpec,
    ResultSet,
    check_batch,
    make_result,
)


class RecordStore:
    """Columnar in-memory store of (timestamp, sensor_id, value) rows."""

    def __init__(self):
        self._lock = threading.Lock()
        self._pending: list[list[SensorRecord]] = []
        self._timestamps = np.empty(0, dtype=np.int64)
        self._sensor_ids = np.empty(0, dtype=np.int64)
        self._values = np.empty(0, dtype=np.float64)

    @classmethod
    def from_records(cls, records) -> "RecordStore":
        store = cls()
        store.append(list(records))
        return store

    def append(self, records: list[SensorRecord]) -> None:
        with self._lock:
            self._pending.append(records)

    def clear(self) -> None:
        with self._lock:
            self._pending.clear()
            self._timestamps = np.empty(0, dtype=np.int64)
            self._sensor_ids = np.empty(0, dtype=np.int64)
            self._values = np.empty(0, dtype=np.float64)

    def _consolidate_locked(self) -> None:
        if not self._pending:
            return
        chunks = self._pending
        self._pending = []
        ts = [self._timestamps] + [
            np.fromiter((r.timestamp_ms for r in c), dtype=np.int64, count=len(c))
            for c in chunks
        ]
        ids = [self._sensor_ids] + [
            np.fromiter((r.sensor_id for r in c), dtype=np.int64, count=len(c))
            for c in chunks
        ]
        vals = [self._values] + [
            np.fromiter((r.value for r in c), dtype=np.float64, count=len(c))
            for c in chunks
        ]
        self._timestamps = np.concatenate(ts)
        self._sensor_ids = np.concatenate(ids)
        self._values = np.concatenate(vals)

    def columns(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Snapshot of (timestamps, sensor_ids, values)."""
        with self._lock:
            self._consolidate_locked()
            return self._timestamps, self._sensor_ids, self._values

    def __len__(self) -> int:
        with self._lock:
            self._consolidate_locked()
            return len(self._timestamps)


def _aggregate(values: np.ndarray, func: AggFunc) -> float | None:
    if len(values) == 0:
        return None
    if func is AggFunc.AVERAGE:
        return float(np.mean(values))
    if func is AggFunc.STDDEV:
        if len(values) < 2:
            return None  # sample stddev of one row is NULL in SQL
        return float(np.std(values, ddof=1))
    if func is AggFunc.MIN:
        return float(np.min(values))
    if func is AggFunc.MAX:
        return float(np.max(values))
    raise QueryError(f"unsupported aggregation {func}")


def _combine(left: float | None, right: float | None, func: CompFunc) -> float | None:
    if left is None or right is None:
        return None
    if func is CompFunc.SUBTRACT:
        return left - right
    raise QueryError(f"unsupported comparison {func}")


def _bucket_aggregates(
    timestamps: np.ndarray,
    values: np.ndarray,
    width_ms: int,
    func: AggFunc,
) -> dict[int, float | None]:
    """Aggregate values grouped by epoch-aligned bucket start."""
    if len(timestamps) == 0:
        return {}
    buckets = timestamps - timestamps % width_ms
    order = np.argsort(buckets, kind="stable")
    buckets = buckets[order]
    values = values[order]
    starts, first_index = np.unique(buckets, return_index=True)
    boundaries = list(first_index) + [len(buckets)]
    return {
        int(starts[i]): _aggregate(values[boundaries[i]:boundaries[i + 1]], func)
        for i in range(len(starts))
    }


def reference_evaluate(data, spec: QuerySpec) -> ResultSet:
    """Answer a query by brute-force scan of an in-memory store.

    ``data`` is a RecordStore or any iterable of SensorRecord.
    """
    store = data if isinstance(data, RecordStore) else RecordStore.from_records(data)
    timestamps, sensor_ids, values = store.columns()
    qt = spec.query_type
    sensors = np.asarray(spec.sensors, dtype=np.int64)

    if qt is QueryType.Q1:
        mask = (
            (timestamps > spec.t_start_ms)
            & (timestamps < spec.t_end_ms)
            & np.isin(sensor_ids, sensors)
        )
        t, s, v = timestamps[mask], sensor_ids[mask], values[mask]
        rows = [
            (int(a), int(b), float(c))
            for a, b, c in zip(t.tolist(), s.tolist(), v.tolist())
        ]
        return make_result(qt, rows)

    in_range = (timestamps >= spec.t_start_ms) & (timestamps <= spec.t_end_ms)

    if qt is QueryType.Q2:
        mask = in_range & (sensor_ids == spec.sensors[0])
        t, v = timestamps[mask], values[mask]
        highs = _bucket_aggregates(t, v, spec.bucket_width_ms, AggFunc.MAX)
        lows = _bucket_aggregates(t, v, spec.bucket_width_ms, AggFunc.MIN)
        rows = [
            (start, highs[start], lows[start])
            for start in highs
            if lows[start] < spec.min_value or highs[start] > spec.max_value
        ]
        return make_result(qt, rows)

    if qt is QueryType.Q3:
        mask = in_range & np.isin(sensor_ids, sensors)
        return make_result(qt, [(_aggregate(values[mask], spec.agg_func),)])

    if qt is QueryType.Q4:
        rows = []
        for sensor in spec.sensors:
            mask = in_range & (sensor_ids == sensor)
            per_bucket = _bucket_aggregates(
                timestamps[mask], values[mask], spec.bucket_width_ms, spec.agg_func
            )
            rows.extend((start, int(sensor), agg) for start, agg in per_bucket.items())
        return make_result(qt, rows)

    if qt is QueryType.Q5:
        sides = []
        for sensor in spec.sensors:
            mask = in_range & (sensor_ids == sensor)
            sides.append(
                _bucket_aggregates(
                    timestamps[mask], values[mask], spec.bucket_width_ms, spec.agg_func
                )
            )
        left, right = sides
        rows = [
            (start, _combine(left[start], right[start], spec.comp_func))
            for start in left
            if start in right
        ]
        return make_result(qt, rows)

    raise QueryError(f"unsupported query type {qt}")


# Named stores shared by all reference adapters in this process, so N
# simulated clients of one "server" observe the same data.
_STORES: dict[str, RecordStore] = {}
_STORES_LOCK = threading.Lock()


def shared_store(name: str) -> RecordStore:
    with _STORES_LOCK:
        store = _STORES.get(name)
        if store is None:
            store = _STORES[name] = RecordStore()
        return store


def reset_shared_stores() -> None:
    """Drop every named store (test isolation)."""
    with _STORES_LOCK:
        _STORES.clear()


@dataclass
class ReferenceAdapter(DatabaseAdapter):
    """Backend-shaped wrapper around a shared in-memory store.

    Lets every workload run end to end (and deterministically) without a
    database server; queries are answered by the oracle itself.
    """

    connection: ConnectionInfo
    store: RecordStore = field(init=False)

    def __post_init__(self):
        self.store = shared_store(self.connection.database)

    def init_schema(self, sensor_number: int) -> None:
        self.store.clear()

    def insert_batch(self, records: list[SensorRecord]) -> InsertReceipt:
        check_batch(records)
        started = time.perf_counter()
        self.store.append(records)
        return InsertReceipt(
            records_written=len(records),
            elapsed_s=time.perf_counter() - started,
        )

    def execute_query(self, spec: QuerySpec) -> tuple[ResultSet, float]:
        started = time.perf_counter()
        result = reference_evaluate(self.store, spec)
        return result, time.perf_counter() - started

    def count_records(self) -> int:
        return len(self.store)

    def health_probe(self) -> bool:
        return True

    def server_version(self) -> str:
        return f"reference {__version__}"
