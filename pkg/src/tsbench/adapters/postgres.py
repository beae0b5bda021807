"""PostgreSQL and TimescaleDB adapters.

Bulk ingestion goes through COPY ... FROM STDIN (text format), one COPY
per batch, which is atomic: either every row of the batch lands or none
does. Query results are normalized in SQL: timestamps and bucket starts
come back as epoch-millisecond bigints, values as double precision.

Plain PostgreSQL buckets with integer epoch arithmetic; TimescaleDB uses
its native time_bucket pinned to the epoch origin, so both agree with
the reference oracle bucket for bucket.
"""

from __future__ import annotations

import time
from datetime import datetime, timezone

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
from .pgwire import PgConnection, PgError, PgServerError

_AGG_SQL = {
    AggFunc.AVERAGE: "avg",
    AggFunc.STDDEV: "stddev_samp",
    AggFunc.MIN: "min",
    AggFunc.MAX: "max",
}

_EPOCH_MS = '(extract(epoch from "timestamp") * 1000)::bigint'

COPY_CHUNK_ROWS = 5000


def timestamp_literal(ms: int) -> str:
    dt = datetime.fromtimestamp(ms // 1000, tz=timezone.utc)
    return f"TIMESTAMPTZ '{dt:%Y-%m-%d %H:%M:%S}.{ms % 1000:03d}+00'"


def sensor_list_sql(sensors) -> str:
    return "ANY(ARRAY[" + ",".join(str(int(s)) for s in sensors) + "]::bigint[])"


def epoch_bucket_sql(width_ms: int) -> str:
    """Epoch-aligned bucket start in ms via integer arithmetic."""
    return f"({_EPOCH_MS} / {width_ms}) * {width_ms}"


def time_bucket_sql(width_ms: int) -> str:
    """TimescaleDB native bucketing, pinned to the epoch origin."""
    return (
        f"(extract(epoch from time_bucket(INTERVAL '{width_ms} milliseconds', "
        f"\"timestamp\", origin => TIMESTAMPTZ '1970-01-01 00:00:00+00')) * 1000)::bigint"
    )


def build_query_sql(spec: QuerySpec, bucket_sql_for) -> str:
    qt = spec.query_type
    start = timestamp_literal(spec.t_start_ms)
    end = timestamp_literal(spec.t_end_ms)
    sensors = sensor_list_sql(spec.sensors)
    if qt is QueryType.Q1:
        return (
            f"SELECT {_EPOCH_MS} AS ts_ms, sensor_id, value "
            f"FROM {TABLE_NAME} "
            f'WHERE "timestamp" > {start} AND "timestamp" < {end} '
            f"AND sensor_id = {sensors}"
        )
    bucket = bucket_sql_for(spec.bucket_width_ms) if spec.bucket_width_ms else None
    if qt is QueryType.Q2:
        return (
            f"SELECT {bucket} AS interval_start, max(value), min(value) "
            f"FROM {TABLE_NAME} "
            f'WHERE "timestamp" >= {start} AND "timestamp" <= {end} '
            f"AND sensor_id = {int(spec.sensors[0])} "
            f"GROUP BY interval_start "
            f"HAVING min(value) < {spec.min_value!r} OR max(value) > {spec.max_value!r}"
        )
    agg = _AGG_SQL[spec.agg_func]
    if qt is QueryType.Q3:
        return (
            f"SELECT {agg}(value) FROM {TABLE_NAME} "
            f'WHERE "timestamp" >= {start} AND "timestamp" <= {end} '
            f"AND sensor_id = {sensors}"
        )
    if qt is QueryType.Q4:
        return (
            f"SELECT {bucket} AS interval_start, sensor_id, {agg}(value) "
            f"FROM {TABLE_NAME} "
            f'WHERE "timestamp" >= {start} AND "timestamp" <= {end} '
            f"AND sensor_id = {sensors} "
            f"GROUP BY interval_start, sensor_id"
        )
    if qt is QueryType.Q5:
        sides = []
        for sensor in spec.sensors:
            sides.append(
                f"(SELECT {bucket} AS interval_start, {agg}(value) AS val "
                f"FROM {TABLE_NAME} "
                f'WHERE "timestamp" >= {start} AND "timestamp" <= {end} '
                f"AND sensor_id = {sensor_list_sql([sensor])} "
                f"GROUP BY interval_start)"
            )
        return (
            f"SELECT s1.interval_start, s1.val - s2.val "
            f"FROM {sides[0]} s1 "
            f"INNER JOIN {sides[1]} s2 ON s1.interval_start = s2.interval_start"
        )
    raise QueryError(f"unsupported query type {qt}")


def copy_payload(records: list[SensorRecord]):
    """Text-format COPY chunks for one batch."""
    lines = []
    for i, r in enumerate(records, start=1):
        dt = datetime.fromtimestamp(r.timestamp_ms // 1000, tz=timezone.utc)
        lines.append(
            f"{dt:%Y-%m-%d %H:%M:%S}.{r.timestamp_ms % 1000:03d}+00\t{r.sensor_id}\t{r.value!r}\n"
        )
        if i % COPY_CHUNK_ROWS == 0:
            yield "".join(lines).encode("ascii")
            lines = []
    if lines:
        yield "".join(lines).encode("ascii")


class PostgresAdapter(DatabaseAdapter):
    """Vanilla PostgreSQL with a combined (timestamp, sensor_id) B-tree index."""

    def __init__(self, connection: ConnectionInfo, query_timeout_s: float | None = None):
        self.connection = connection
        try:
            self._conn = PgConnection(
                host=connection.host,
                port=connection.port or 5432,
                user=connection.user,
                password=connection.password,
                database=connection.database,
            )
        except PgError as exc:
            raise ConnectivityError(str(exc)) from None
        if query_timeout_s is not None:
            self._run(f"SET statement_timeout = {int(query_timeout_s * 1000)}")

    def _run(self, sql: str) -> list[tuple]:
        try:
            return self._conn.query(sql)
        except PgServerError as exc:
            raise QueryError(str(exc)) from None
        except PgError as exc:
            raise ConnectivityError(str(exc)) from None

    def _bucket_sql(self, width_ms: int) -> str:
        return epoch_bucket_sql(width_ms)

    def _schema_statements(self, sensor_number: int) -> list[str]:
        return [
            f"DROP TABLE IF EXISTS {TABLE_NAME}",
            f'CREATE TABLE {TABLE_NAME} ('
            f'"timestamp" timestamptz NOT NULL, '
            f"sensor_id bigint NOT NULL, "
            f"value double precision NOT NULL)",
            f"CREATE INDEX {TABLE_NAME}_time_sensor_idx "
            f'ON {TABLE_NAME} ("timestamp", sensor_id)',
        ]

    def init_schema(self, sensor_number: int) -> None:
        for statement in self._schema_statements(sensor_number):
            try:
                self._run(statement)
            except QueryError as exc:
                raise SchemaError(f"schema setup failed on {statement!r}: {exc}") from None

    def insert_batch(self, records: list[SensorRecord]) -> InsertReceipt:
        check_batch(records)
        sql = f'COPY {TABLE_NAME} ("timestamp", sensor_id, value) FROM STDIN'
        chunks = list(copy_payload(records))  # build outside the timed section
        started = time.perf_counter()
        try:
            copied = self._conn.copy_in(sql, chunks)
        except PgServerError as exc:
            raise InsertError(str(exc)) from None
        except PgError as exc:
            raise ConnectivityError(str(exc)) from None
        elapsed = time.perf_counter() - started
        if copied != len(records):
            raise InsertError(f"COPY wrote {copied} of {len(records)} rows")
        return InsertReceipt(records_written=copied, elapsed_s=elapsed)

    def execute_query(self, spec: QuerySpec) -> tuple[ResultSet, float]:
        sql = build_query_sql(spec, self._bucket_sql)
        started = time.perf_counter()
        rows = self._run(sql)
        elapsed = time.perf_counter() - started
        return make_result(spec.query_type, rows), elapsed

    def count_records(self) -> int:
        return int(self._run(f"SELECT count(*) FROM {TABLE_NAME}")[0][0])

    def health_probe(self) -> bool:
        return self._run("SELECT 1") == [(1,)]

    def server_version(self) -> str:
        version = self._conn.parameters.get("server_version", "unknown")
        return f"PostgreSQL {version}"

    def close(self) -> None:
        self._conn.close()


class TimescaleAdapter(PostgresAdapter):
    """TimescaleDB: hypertable with 12-hour chunks, native time_bucket."""

    CHUNK_INTERVAL = "12 hours"

    def _bucket_sql(self, width_ms: int) -> str:
        return time_bucket_sql(width_ms)

    def _schema_statements(self, sensor_number: int) -> list[str]:
        return [
            f"DROP TABLE IF EXISTS {TABLE_NAME}",
            "CREATE EXTENSION IF NOT EXISTS timescaledb",
            f'CREATE TABLE {TABLE_NAME} ('
            f'"timestamp" timestamptz NOT NULL, '
            f"sensor_id bigint NOT NULL, "
            f"value double precision NOT NULL)",
            f"SELECT create_hypertable('{TABLE_NAME}', 'timestamp', "
            f"chunk_time_interval => INTERVAL '{self.CHUNK_INTERVAL}')",
            f"CREATE INDEX {TABLE_NAME}_time_sensor_idx "
            f'ON {TABLE_NAME} ("timestamp", sensor_id)',
        ]

    def server_version(self) -> str:
        rows = self._run(
            "SELECT extversion FROM pg_extension WHERE extname = 'timescaledb'"
        )
        base = super().server_version()
        if rows:
            return f"{base} + TimescaleDB {rows[0][0]}"
        return base
