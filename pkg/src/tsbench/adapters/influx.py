"""InfluxDB (v2 API) adapter.

Writes use the line protocol over HTTP with millisecond precision;
sensor_id travels as a tag and the reading as the ``value`` field, so
the server indexes by time and sensor. Queries are built in Flux and
fetched as annotated CSV.

Connection mapping: ``user`` holds the organization, ``password`` the
API token, ``database`` the bucket name.

Flux windows (aggregateWindow / window) align to the Unix epoch for the
bucket widths the harness uses, matching the oracle's bucket starts.
Flux ranges are start-inclusive/stop-exclusive, so the benchmark's
boundary conventions are mapped by shifting one millisecond where
needed: strictly-greater becomes start+1ms, inclusive-end becomes
stop+1ms.
"""

from __future__ import annotations

import csv
import io
import time
from datetime import datetime, timezone

import requests

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

MEASUREMENT = TABLE_NAME

_AGG_FLUX = {
    AggFunc.AVERAGE: "mean",
    AggFunc.STDDEV: "stddev",
    AggFunc.MIN: "min",
    AggFunc.MAX: "max",
}


def _ns(ms: int) -> int:
    return ms * 1_000_000


def _time_literal(ms: int) -> str:
    return f"time(v: {_ns(ms)})"


def _duration_literal(ms: int) -> str:
    return f"duration(v: {_ns(ms)})"


def _sensor_predicate(sensors) -> str:
    return " or ".join(f'r.sensor_id == "{int(s)}"' for s in sensors)


def _agg_call(func: AggFunc) -> str:
    if func is AggFunc.STDDEV:
        return 'stddev(mode: "sample")'
    return f"{_AGG_FLUX[func]}()"


def _base_stream(bucket: str, start_ms: int, stop_ms: int, sensors) -> str:
    return (
        f'from(bucket: "{bucket}")\n'
        f"  |> range(start: {_time_literal(start_ms)}, stop: {_time_literal(stop_ms)})\n"
        f'  |> filter(fn: (r) => r._measurement == "{MEASUREMENT}" and r._field == "value")\n'
        f"  |> filter(fn: (r) => {_sensor_predicate(sensors)})"
    )


def build_flux(spec: QuerySpec, bucket: str) -> str:
    """Flux equivalent of one benchmark query."""
    qt = spec.query_type
    if qt is QueryType.Q1:
        # strictly-inside bounds on millisecond data
        stream = _base_stream(bucket, spec.t_start_ms + 1, spec.t_end_ms, spec.sensors)
        return f'{stream}\n  |> keep(columns: ["_time", "sensor_id", "_value"])\n'

    start = spec.t_start_ms
    stop = spec.t_end_ms + 1  # inclusive end
    if qt is QueryType.Q2:
        window = _duration_literal(spec.bucket_width_ms)
        stream = _base_stream(bucket, start, stop, spec.sensors)
        return (
            f"base = {stream}\n"
            f"hi = base |> aggregateWindow(every: {window}, fn: max, "
            f'timeSrc: "_start", createEmpty: false)\n'
            f"lo = base |> aggregateWindow(every: {window}, fn: min, "
            f'timeSrc: "_start", createEmpty: false)\n'
            f'join(tables: {{hi: hi, lo: lo}}, on: ["_time", "sensor_id"])\n'
            f"  |> filter(fn: (r) => r._value_lo < {spec.min_value!r} "
            f"or r._value_hi > {spec.max_value!r})\n"
            f'  |> keep(columns: ["_time", "_value_hi", "_value_lo"])\n'
        )
    if qt is QueryType.Q3:
        stream = _base_stream(bucket, start, stop, spec.sensors)
        return (
            f"{stream}\n"
            f"  |> group()\n"
            f"  |> {_agg_call(spec.agg_func)}\n"
            f'  |> keep(columns: ["_value"])\n'
        )
    if qt is QueryType.Q4:
        window = _duration_literal(spec.bucket_width_ms)
        stream = _base_stream(bucket, start, stop, spec.sensors)
        return (
            f"{stream}\n"
            f'  |> group(columns: ["sensor_id"])\n'
            f"  |> aggregateWindow(every: {window}, fn: {_AGG_FLUX[spec.agg_func]}, "
            f'timeSrc: "_start", createEmpty: false)\n'
            f'  |> keep(columns: ["_time", "sensor_id", "_value"])\n'
        )
    if qt is QueryType.Q5:
        window = _duration_literal(spec.bucket_width_ms)
        sides = [
            f"s{i} = {_base_stream(bucket, start, stop, [sensor])}\n"
            f'  |> group(columns: ["sensor_id"])\n'
            f"  |> aggregateWindow(every: {window}, fn: {_AGG_FLUX[spec.agg_func]}, "
            f'timeSrc: "_start", createEmpty: false)\n'
            f"  |> group()\n"
            for i, sensor in enumerate(spec.sensors, start=1)
        ]
        return (
            f"{sides[0]}"
            f"{sides[1]}"
            f'join(tables: {{s1: s1, s2: s2}}, on: ["_time"])\n'
            f"  |> map(fn: (r) => ({{_time: r._time, _value: r._value_s1 - r._value_s2}}))\n"
            f'  |> keep(columns: ["_time", "_value"])\n'
        )
    raise QueryError(f"unsupported query type {qt}")


def encode_lines(records: list[SensorRecord]) -> bytes:
    """Line protocol body for one batch (millisecond timestamps)."""
    return "\n".join(
        f"{MEASUREMENT},sensor_id={r.sensor_id} value={r.value!r} {r.timestamp_ms}"
        for r in records
    ).encode("ascii")


def _parse_rfc3339_ms(text: str) -> int:
    # the server may emit up to nanosecond fractions; normalize to the
    # microseconds fromisoformat accepts
    text = text.replace("Z", "+00:00")
    if "." in text:
        head, rest = text.split(".", 1)
        digits = ""
        while rest and rest[0].isdigit():
            digits += rest[0]
            rest = rest[1:]
        text = f"{head}.{digits[:6].ljust(6, '0')}{rest}"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return round(dt.timestamp() * 1000)


def parse_annotated_csv(text: str) -> list[dict[str, str]]:
    """Flatten Influx annotated CSV into dict rows keyed by column name."""
    rows: list[dict[str, str]] = []
    header: list[str] | None = None
    for row in csv.reader(io.StringIO(text)):
        if not row or all(cell == "" for cell in row):
            header = None  # table boundary
            continue
        if row[0].startswith("#"):
            continue
        if header is None:
            header = row
            continue
        rows.append(dict(zip(header, row)))
    return rows


class InfluxAdapter(DatabaseAdapter):
    def __init__(self, connection: ConnectionInfo, request_timeout_s: float = 300.0):
        self.connection = connection
        self._base = f"http://{connection.host}:{connection.port or 8086}"
        self._org = connection.user
        self._bucket = connection.database
        self._timeout = request_timeout_s
        self._session = requests.Session()
        if connection.password:
            self._session.headers["Authorization"] = f"Token {connection.password}"

    def _request(self, method: str, path: str, **kwargs) -> requests.Response:
        kwargs.setdefault("timeout", self._timeout)
        try:
            return self._session.request(method, self._base + path, **kwargs)
        except requests.RequestException as exc:
            raise ConnectivityError(f"influx request failed: {exc}") from None

    def _org_id(self) -> str:
        response = self._request("GET", "/api/v2/orgs", params={"org": self._org})
        if response.status_code != 200:
            raise SchemaError(f"cannot list orgs: {response.status_code} {response.text}")
        orgs = response.json().get("orgs", [])
        if not orgs:
            raise SchemaError(f"organization {self._org!r} not found")
        return orgs[0]["id"]

    def init_schema(self, sensor_number: int) -> None:
        # drop-and-recreate the bucket: same contract as the SQL backends
        response = self._request("GET", "/api/v2/buckets", params={"name": self._bucket})
        if response.status_code == 200:
            for bucket in response.json().get("buckets", []):
                delete = self._request("DELETE", f"/api/v2/buckets/{bucket['id']}")
                if delete.status_code not in (204, 404):
                    raise SchemaError(
                        f"cannot delete bucket: {delete.status_code} {delete.text}"
                    )
        elif response.status_code != 404:
            raise SchemaError(f"cannot list buckets: {response.status_code} {response.text}")
        create = self._request(
            "POST",
            "/api/v2/buckets",
            json={"orgID": self._org_id(), "name": self._bucket, "retentionRules": []},
        )
        if create.status_code != 201:
            raise SchemaError(f"cannot create bucket: {create.status_code} {create.text}")

    def insert_batch(self, records: list[SensorRecord]) -> InsertReceipt:
        check_batch(records)
        body = encode_lines(records)  # encode outside the timed section
        started = time.perf_counter()
        response = self._request(
            "POST",
            "/api/v2/write",
            params={"org": self._org, "bucket": self._bucket, "precision": "ms"},
            data=body,
            headers={"Content-Type": "text/plain; charset=utf-8"},
        )
        elapsed = time.perf_counter() - started
        if response.status_code != 204:
            raise InsertError(f"write rejected: {response.status_code} {response.text}")
        return InsertReceipt(records_written=len(records), elapsed_s=elapsed)

    def _query_csv(self, flux: str) -> tuple[str, float]:
        started = time.perf_counter()
        response = self._request(
            "POST",
            "/api/v2/query",
            params={"org": self._org},
            json={
                "query": flux,
                "dialect": {"annotations": ["datatype"], "header": True},
            },
            headers={"Accept": "application/csv"},
        )
        text = response.text  # materialize fully before stopping the clock
        elapsed = time.perf_counter() - started
        if response.status_code != 200:
            raise QueryError(f"query rejected: {response.status_code} {text}")
        return text, elapsed

    def execute_query(self, spec: QuerySpec) -> tuple[ResultSet, float]:
        flux = build_flux(spec, self._bucket)
        text, elapsed = self._query_csv(flux)
        rows = self._rows_from_csv(spec, parse_annotated_csv(text))
        return make_result(spec.query_type, rows), elapsed

    @staticmethod
    def _rows_from_csv(spec: QuerySpec, records: list[dict[str, str]]) -> list[tuple]:
        def value(cell: str) -> float | None:
            return None if cell in ("", None) else float(cell)

        qt = spec.query_type
        if qt is QueryType.Q1:
            return [
                (_parse_rfc3339_ms(r["_time"]), int(r["sensor_id"]), float(r["_value"]))
                for r in records
            ]
        if qt is QueryType.Q2:
            return [
                (_parse_rfc3339_ms(r["_time"]), value(r["_value_hi"]), value(r["_value_lo"]))
                for r in records
            ]
        if qt is QueryType.Q3:
            if not records:
                return [(None,)]
            return [(value(r["_value"]),) for r in records]
        if qt is QueryType.Q4:
            return [
                (_parse_rfc3339_ms(r["_time"]), int(r["sensor_id"]), value(r["_value"]))
                for r in records
            ]
        if qt is QueryType.Q5:
            return [(_parse_rfc3339_ms(r["_time"]), value(r["_value"])) for r in records]
        raise QueryError(f"unsupported query type {qt}")

    def count_records(self) -> int:
        flux = (
            f'from(bucket: "{self._bucket}")\n'
            f"  |> range(start: 0)\n"
            f'  |> filter(fn: (r) => r._measurement == "{MEASUREMENT}" and r._field == "value")\n'
            f"  |> group()\n"
            f"  |> count()\n"
        )
        text, _ = self._query_csv(flux)
        records = parse_annotated_csv(text)
        if not records:
            return 0
        return int(records[0]["_value"])

    def health_probe(self) -> bool:
        response = self._request("GET", "/health")
        return response.status_code == 200 and response.json().get("status") == "pass"

    def server_version(self) -> str:
        response = self._request("GET", "/health")
        if response.status_code == 200:
            version = response.json().get("version", "unknown")
            return f"InfluxDB {version}"
        raise ConnectivityError(f"health endpoint returned {response.status_code}")

    def close(self) -> None:
        self._session.close()
