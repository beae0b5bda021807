"""ClickHouse adapter over the native TCP protocol.

Schema follows the single-node tuning used throughout the harness docs:
a MergeTree table partitioned by day, ordered (and thereby sparse-
indexed) by (timestamp, sensor_id), index granularity 8192. Batches are
sent as one native block per insert, which the server applies as one
part: the all-or-nothing bulk path.

Buckets are computed as intDiv on epoch milliseconds, so results align
with the reference oracle exactly.
"""

from __future__ import annotations

import time

import numpy as np

from ..generator import SensorRecord
from ..workload import AggFunc, ConnectionInfo, QueryType
from .base import (
    ConnectivityError,
    DatabaseAdapter,
    InsertError,
    InsertReceipt,
    QueryError,
    QuerySpec,
    ResultSet,
    SchemaError,
    TABLE_NAME,
    check_batch,
    make_result,
)
from .chwire import ChError, ChServerError, ClickHouseConnection

_AGG_SQL = {
    AggFunc.AVERAGE: "avg",
    AggFunc.STDDEV: "stddevSamp",
    AggFunc.MIN: "min",
    AggFunc.MAX: "max",
}

_TS_MS = f"toUnixTimestamp64Milli(timestamp)"


def schema_statements() -> list[str]:
    return [
        f"DROP TABLE IF EXISTS {TABLE_NAME}",
        f"CREATE TABLE {TABLE_NAME} ("
        f"timestamp DateTime64(3, 'UTC'), "
        f"sensor_id UInt64, "
        f"value Float64"
        f") ENGINE = MergeTree "
        f"PARTITION BY toDate(timestamp) "
        f"ORDER BY (timestamp, sensor_id) "
        f"SETTINGS index_granularity = 8192",
    ]


def _ts_literal(ms: int) -> str:
    return f"fromUnixTimestamp64Milli({ms})"


def _sensor_set(sensors) -> str:
    return "(" + ",".join(str(int(s)) for s in sensors) + ")"


def bucket_sql(width_ms: int) -> str:
    return f"intDiv({_TS_MS}, {width_ms}) * {width_ms}"


def build_query_sql(spec: QuerySpec) -> str:
    qt = spec.query_type
    start = _ts_literal(spec.t_start_ms)
    end = _ts_literal(spec.t_end_ms)
    sensors = _sensor_set(spec.sensors)
    if qt is QueryType.Q1:
        return (
            f"SELECT {_TS_MS} AS ts_ms, sensor_id, value "
            f"FROM {TABLE_NAME} "
            f"WHERE timestamp > {start} AND timestamp < {end} "
            f"AND sensor_id IN {sensors}"
        )
    bucket = bucket_sql(spec.bucket_width_ms) if spec.bucket_width_ms else None
    if qt is QueryType.Q2:
        return (
            f"SELECT {bucket} AS interval_start, max(value), min(value) "
            f"FROM {TABLE_NAME} "
            f"WHERE timestamp >= {start} AND timestamp <= {end} "
            f"AND sensor_id = {int(spec.sensors[0])} "
            f"GROUP BY interval_start "
            f"HAVING min(value) < {spec.min_value!r} OR max(value) > {spec.max_value!r}"
        )
    agg = _AGG_SQL[spec.agg_func]
    if qt is QueryType.Q3:
        return (
            f"SELECT {agg}(value) FROM {TABLE_NAME} "
            f"WHERE timestamp >= {start} AND timestamp <= {end} "
            f"AND sensor_id IN {sensors}"
        )
    if qt is QueryType.Q4:
        return (
            f"SELECT {bucket} AS interval_start, sensor_id, {agg}(value) "
            f"FROM {TABLE_NAME} "
            f"WHERE timestamp >= {start} AND timestamp <= {end} "
            f"AND sensor_id IN {sensors} "
            f"GROUP BY interval_start, sensor_id"
        )
    if qt is QueryType.Q5:
        sides = [
            f"(SELECT {bucket} AS interval_start, {agg}(value) AS val "
            f"FROM {TABLE_NAME} "
            f"WHERE timestamp >= {start} AND timestamp <= {end} "
            f"AND sensor_id IN {_sensor_set([sensor])} "
            f"GROUP BY interval_start)"
            for sensor in spec.sensors
        ]
        return (
            f"SELECT s1.interval_start, s1.val - s2.val "
            f"FROM {sides[0]} AS s1 "
            f"INNER JOIN {sides[1]} AS s2 ON s1.interval_start = s2.interval_start"
        )
    raise QueryError(f"unsupported query type {qt}")


def batch_block(records: list[SensorRecord]) -> list[tuple[str, str, bytes]]:
    """Native column encodings for one batch."""
    timestamps = np.fromiter(
        (r.timestamp_ms for r in records), dtype="<i8", count=len(records)
    )
    sensor_ids = np.fromiter(
        (r.sensor_id for r in records), dtype="<u8", count=len(records)
    )
    values = np.fromiter((r.value for r in records), dtype="<f8", count=len(records))
    return [
        ("timestamp", "DateTime64(3, 'UTC')", timestamps.tobytes()),
        ("sensor_id", "UInt64", sensor_ids.tobytes()),
        ("value", "Float64", values.tobytes()),
    ]


class ClickHouseAdapter(DatabaseAdapter):
    def __init__(self, connection: ConnectionInfo, query_timeout_s: float | None = None):
        self.connection = connection
        self._query_timeout_s = query_timeout_s
        try:
            self._conn = self._connect()
        except ChError as exc:
            raise ConnectivityError(str(exc)) from None

    def _connect(self) -> ClickHouseConnection:
        connection = self.connection
        return ClickHouseConnection(
            host=connection.host,
            port=connection.port or 9000,
            user=connection.user or "default",
            password=connection.password,
            database=connection.database,
        )

    def _reconnect(self) -> None:
        """Drop a possibly-desynced connection and dial a fresh one."""
        try:
            self._conn.close()
        except Exception:
            pass
        try:
            self._conn = self._connect()
        except ChError:
            pass  # the original error matters more; next use will retry

    def _run(self, sql: str) -> list[tuple]:
        try:
            return self._conn.execute_rows(sql)
        except ChServerError as exc:
            raise QueryError(str(exc)) from None
        except ChError as exc:
            self._reconnect()
            raise ConnectivityError(str(exc)) from None

    def init_schema(self, sensor_number: int) -> None:
        for statement in schema_statements():
            try:
                self._run(statement)
            except QueryError as exc:
                raise SchemaError(f"schema setup failed on {statement!r}: {exc}") from None

    def insert_batch(self, records: list[SensorRecord]) -> InsertReceipt:
        check_batch(records)
        block = batch_block(records)  # encode outside the timed section
        started = time.perf_counter()
        try:
            self._conn.insert_native(TABLE_NAME, block, len(records))
        except ChServerError as exc:
            # a failed insert leaves the stream mid-exchange; start clean
            self._reconnect()
            raise InsertError(str(exc)) from None
        except ChError as exc:
            self._reconnect()
            raise ConnectivityError(str(exc)) from None
        return InsertReceipt(
            records_written=len(records), elapsed_s=time.perf_counter() - started
        )

    def execute_query(self, spec: QuerySpec) -> tuple[ResultSet, float]:
        sql = build_query_sql(spec)
        if self._query_timeout_s is not None:
            sql += f" SETTINGS max_execution_time = {int(self._query_timeout_s)}"
        started = time.perf_counter()
        rows = self._run(sql)
        elapsed = time.perf_counter() - started
        if spec.query_type is QueryType.Q1:
            rows = [(int(t), int(s), float(v)) for t, s, v in rows]
        return make_result(spec.query_type, rows), elapsed

    def count_records(self) -> int:
        rows = self._run(f"SELECT count() FROM {TABLE_NAME}")
        return int(rows[0][0])

    def health_probe(self) -> bool:
        try:
            return self._conn.ping()
        except ChError as exc:
            raise ConnectivityError(str(exc)) from None

    def server_version(self) -> str:
        try:
            rows = self._run("SELECT version()")
            return f"ClickHouse {rows[0][0]}"
        except QueryError:
            return f"ClickHouse {self._conn.server.version}"

    def close(self) -> None:
        self._conn.close()
