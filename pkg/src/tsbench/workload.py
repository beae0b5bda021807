"""Workload definition files: parsing, validation, and run expansion.

A workload is described by one XML file with a versioned ``<workload>``
root. Every parameter is one element; unknown elements are a hard error
so a typo cannot silently change a benchmark. The full format is
documented in ``docs/workload-format.md``.

One file describes either an ingestion workload or a query workload,
never both. Option lists (batch sizes, client counts) expand into an
ordered list of runs, executed one after the other without touching the
configuration in between.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, replace
from enum import Enum
from itertools import product

from .durations import (
    MS_PER_DAY,
    MS_PER_MINUTE,
    DurationError,
    format_duration_ms,
    format_utc_ms,
    parse_duration_ms,
    parse_utc_ms,
)

SCHEMA_VERSION = "1"

DEFAULT_GRANULARITY_MS = 1_000
DEFAULT_SEED = 1
DEFAULT_AGG_INTERVAL_MS = 3_600_000  # 1h buckets unless the file says otherwise


class WorkloadConfigError(Exception):
    """Base class for workload file problems."""


class WorkloadParseError(WorkloadConfigError):
    """The document is malformed or contains unknown/duplicate elements."""


class WorkloadValidationError(WorkloadConfigError):
    """A parsed value violates a field constraint."""

    def __init__(self, field_name: str, constraint: str):
        self.field_name = field_name
        self.constraint = constraint
        super().__init__(f"{field_name}: {constraint}")


class TargetDatabase(str, Enum):
    CLICKHOUSE = "ClickHouse"
    INFLUXDB = "InfluxDB"
    TIMESCALEDB = "TimescaleDB"
    POSTGRESQL = "PostgreSQL"
    REFERENCE = "Reference"


class WorkloadKind(str, Enum):
    INGESTION = "Ingestion"
    QUERY = "Query"


class QueryType(str, Enum):
    Q1 = "Q1"  # raw values of sensors over a time range
    Q2 = "Q2"  # buckets where one sensor left a value range
    Q3 = "Q3"  # single aggregate over a range
    Q4 = "Q4"  # down-sample sensors into fixed buckets
    Q5 = "Q5"  # subtract two down-sampled sensors bucket by bucket


class AggFunc(str, Enum):
    AVERAGE = "Average"
    STDDEV = "StdDev"
    MIN = "Min"
    MAX = "Max"


class CompFunc(str, Enum):
    SUBTRACT = "Subtract"


@dataclass(frozen=True)
class ConnectionInfo:
    """Where and how to reach the target server.

    For InfluxDB, ``user`` carries the organization name, ``password`` the
    API token, and ``database`` the bucket name.
    """

    host: str = "localhost"
    port: int = 0
    user: str = ""
    password: str = ""
    database: str = "tsbench"


@dataclass(frozen=True)
class BatchCount:
    """Stop after each client has inserted this many batches."""

    batches_per_client: int


@dataclass(frozen=True)
class TotalRecords:
    """Stop once at least this many records were inserted across all clients."""

    records: int


@dataclass(frozen=True)
class RunDuration:
    """Stop once the run has lasted this long (wall clock)."""

    seconds: float


StopCondition = BatchCount | TotalRecords | RunDuration


@dataclass(frozen=True)
class WorkloadDefinition:
    """One parsed and validated workload file."""

    target_database: TargetDatabase
    connection: ConnectionInfo
    workload_kind: WorkloadKind
    day_span: int  # days covered by the generated/queried series
    start_time_ms: int  # epoch ms, UTC
    sensor_number: int
    timestamp_granularity_ms: int = DEFAULT_GRANULARITY_MS
    seed: int = DEFAULT_SEED

    # ingestion parameters
    batch_size_options: tuple[int, ...] = ()
    client_number_options: tuple[int, ...] = ()
    stop_condition: StopCondition | None = None

    # query parameters
    query_type: QueryType | None = None
    test_retries: int = 1
    duration_minutes: int = 0
    aggregation_interval_ms: int = DEFAULT_AGG_INTERVAL_MS
    aggregation_function: AggFunc = AggFunc.AVERAGE
    comparison_function: CompFunc = CompFunc.SUBTRACT
    sensors_filter: tuple[int, ...] = ()
    min_value: float | None = None
    max_value: float | None = None

    @property
    def span_ms(self) -> int:
        return self.day_span * MS_PER_DAY

    @property
    def end_time_ms(self) -> int:
        return self.start_time_ms + self.span_ms


@dataclass(frozen=True)
class RunPlan:
    """One concrete run: a single batch size and client count plus the
    definition it came from. Ordinals are contiguous from 0 in expansion
    order."""

    ordinal: int
    batch_size: int | None
    client_count: int
    definition: WorkloadDefinition

    @property
    def workload_kind(self) -> WorkloadKind:
        return self.definition.workload_kind

    @property
    def query_type(self) -> QueryType | None:
        return self.definition.query_type

    def describe(self) -> str:
        if self.workload_kind is WorkloadKind.INGESTION:
            return (
                f"run {self.ordinal}: ingestion batch_size={self.batch_size} "
                f"clients={self.client_count} stop={self.definition.stop_condition}"
            )
        d = self.definition
        return (
            f"run {self.ordinal}: query {d.query_type.value} retries={d.test_retries} "
            f"window={d.duration_minutes}min sensors={list(d.sensors_filter)}"
        )


# element name -> required for which kinds
_COMMON_ELEMENTS = {
    "target-database",
    "connection",
    "kind",
    "day-span",
    "start-time",
    "sensor-number",
    "timestamp-granularity",
    "seed",
}
_INGESTION_ELEMENTS = {"batch-size-options", "client-number-options", "stop"}
_QUERY_ELEMENTS = {
    "query-type",
    "test-retries",
    "duration-minutes",
    "aggregation-interval",
    "aggregation-function",
    "comparison-function",
    "sensors-filter",
    "min-value",
    "max-value",
    "batch-size-options",
    "client-number-options",
}


def _parse_int_list(text: str, element: str) -> tuple[int, ...]:
    """Comma-separated integers; whitespace around items is tolerated."""
    items = [part.strip() for part in text.split(",")]
    if items == [""]:
        return ()
    try:
        return tuple(int(part) for part in items)
    except ValueError:
        raise WorkloadParseError(
            f"element <{element}>: expected comma-separated integers, got {text!r}"
        ) from None


def _child_text(elem: ET.Element) -> str:
    return (elem.text or "").strip()


def parse_workload(document: str) -> WorkloadDefinition:
    """Parse a workload XML document into a validated definition.

    Raises WorkloadParseError for malformed documents and unknown
    elements, WorkloadValidationError for constraint violations.
    """
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        raise WorkloadParseError(f"not well-formed XML: {exc}") from None

    if root.tag != "workload":
        raise WorkloadParseError(f"root element must be <workload>, got <{root.tag}>")
    version = root.get("version")
    if version != SCHEMA_VERSION:
        raise WorkloadParseError(
            f"unsupported workload schema version {version!r} (expected {SCHEMA_VERSION!r})"
        )

    seen: dict[str, ET.Element] = {}
    for child in root:
        if not isinstance(child.tag, str):
            continue  # comment or processing instruction
        if child.tag in seen:
            raise WorkloadParseError(f"duplicate element <{child.tag}>")
        seen[child.tag] = child

    known = _COMMON_ELEMENTS | _INGESTION_ELEMENTS | _QUERY_ELEMENTS
    for tag in seen:
        if tag not in known:
            raise WorkloadParseError(f"unknown element <{tag}>")

    def require(tag: str) -> ET.Element:
        if tag not in seen:
            raise WorkloadParseError(f"missing required element <{tag}>")
        return seen[tag]

    def optional_text(tag: str) -> str | None:
        return _child_text(seen[tag]) if tag in seen else None

    def parse_enum(tag: str, enum_cls, value: str):
        try:
            return enum_cls(value)
        except ValueError:
            allowed = ", ".join(m.value for m in enum_cls)
            raise WorkloadParseError(
                f"element <{tag}>: unknown value {value!r} (allowed: {allowed})"
            ) from None

    def parse_int(tag: str, text: str) -> int:
        try:
            return int(text)
        except ValueError:
            raise WorkloadParseError(
                f"element <{tag}>: expected an integer, got {text!r}"
            ) from None

    def parse_float(tag: str, text: str) -> float:
        try:
            return float(text)
        except ValueError:
            raise WorkloadParseError(
                f"element <{tag}>: expected a number, got {text!r}"
            ) from None

    target = parse_enum("target-database", TargetDatabase, _child_text(require("target-database")))
    kind = parse_enum("kind", WorkloadKind, _child_text(require("kind")))

    conn_elem = require("connection")
    conn_attrs = dict(conn_elem.attrib)
    for attr in conn_attrs:
        if attr not in {"host", "port", "user", "password", "database"}:
            raise WorkloadParseError(f"element <connection>: unknown attribute {attr!r}")
    connection = ConnectionInfo(
        host=conn_attrs.get("host", "localhost"),
        port=parse_int("connection", conn_attrs.get("port", "0")),
        user=conn_attrs.get("user", ""),
        password=conn_attrs.get("password", ""),
        database=conn_attrs.get("database", "tsbench"),
    )

    day_span = parse_int("day-span", _child_text(require("day-span")))
    try:
        start_ms = parse_utc_ms(_child_text(require("start-time")))
    except DurationError as exc:
        raise WorkloadParseError(f"element <start-time>: {exc}") from None
    sensor_number = parse_int("sensor-number", _child_text(require("sensor-number")))

    granularity_ms = DEFAULT_GRANULARITY_MS
    if (text := optional_text("timestamp-granularity")) is not None:
        try:
            granularity_ms = parse_duration_ms(text)
        except DurationError as exc:
            raise WorkloadParseError(f"element <timestamp-granularity>: {exc}") from None

    seed = DEFAULT_SEED
    if (text := optional_text("seed")) is not None:
        seed = parse_int("seed", text)

    batch_sizes: tuple[int, ...] = ()
    client_numbers: tuple[int, ...] = ()
    if (text := optional_text("batch-size-options")) is not None:
        batch_sizes = _parse_int_list(text, "batch-size-options")
    if (text := optional_text("client-number-options")) is not None:
        client_numbers = _parse_int_list(text, "client-number-options")

    stop: StopCondition | None = None
    if kind is WorkloadKind.INGESTION:
        stop_elem = require("stop")
        stop_attrs = dict(stop_elem.attrib)
        if len(stop_attrs) != 1:
            raise WorkloadParseError(
                "element <stop>: exactly one of batches-per-client, total-records, duration"
            )
        (attr, value), = stop_attrs.items()
        if attr == "batches-per-client":
            stop = BatchCount(parse_int("stop", value))
        elif attr == "total-records":
            stop = TotalRecords(parse_int("stop", value))
        elif attr == "duration":
            try:
                stop = RunDuration(parse_duration_ms(value) / 1000.0)
            except DurationError as exc:
                raise WorkloadParseError(f"element <stop>: {exc}") from None
        else:
            raise WorkloadParseError(f"element <stop>: unknown attribute {attr!r}")
    elif "stop" in seen:
        raise WorkloadParseError("element <stop> is only valid for ingestion workloads")

    query_type: QueryType | None = None
    test_retries = 1
    duration_minutes = 0
    agg_interval_ms = DEFAULT_AGG_INTERVAL_MS
    agg_func = AggFunc.AVERAGE
    comp_func = CompFunc.SUBTRACT
    sensors_filter: tuple[int, ...] = ()
    min_value: float | None = None
    max_value: float | None = None

    if kind is WorkloadKind.QUERY:
        query_type = parse_enum("query-type", QueryType, _child_text(require("query-type")))
        test_retries = parse_int("test-retries", _child_text(require("test-retries")))
        duration_minutes = parse_int("duration-minutes", _child_text(require("duration-minutes")))
        sensors_filter = _parse_int_list(
            _child_text(require("sensors-filter")), "sensors-filter"
        )
        if (text := optional_text("aggregation-interval")) is not None:
            try:
                agg_interval_ms = parse_duration_ms(text)
            except DurationError as exc:
                raise WorkloadParseError(f"element <aggregation-interval>: {exc}") from None
        if (text := optional_text("aggregation-function")) is not None:
            agg_func = parse_enum("aggregation-function", AggFunc, text)
        if (text := optional_text("comparison-function")) is not None:
            comp_func = parse_enum("comparison-function", CompFunc, text)
        if (text := optional_text("min-value")) is not None:
            min_value = parse_float("min-value", text)
        if (text := optional_text("max-value")) is not None:
            max_value = parse_float("max-value", text)
    else:
        for tag in ("query-type", "test-retries", "duration-minutes", "sensors-filter",
                    "aggregation-interval", "aggregation-function", "comparison-function",
                    "min-value", "max-value"):
            if tag in seen:
                raise WorkloadParseError(
                    f"element <{tag}> is only valid for query workloads"
                )

    definition = WorkloadDefinition(
        target_database=target,
        connection=connection,
        workload_kind=kind,
        day_span=day_span,
        start_time_ms=start_ms,
        sensor_number=sensor_number,
        timestamp_granularity_ms=granularity_ms,
        seed=seed,
        batch_size_options=batch_sizes,
        client_number_options=client_numbers,
        stop_condition=stop,
        query_type=query_type,
        test_retries=test_retries,
        duration_minutes=duration_minutes,
        aggregation_interval_ms=agg_interval_ms,
        aggregation_function=agg_func,
        comparison_function=comp_func,
        sensors_filter=sensors_filter,
        min_value=min_value,
        max_value=max_value,
    )
    validate_definition(definition)
    return definition


def validate_definition(d: WorkloadDefinition) -> None:
    """Check every field constraint; raises WorkloadValidationError."""

    def check(ok: bool, field_name: str, constraint: str) -> None:
        if not ok:
            raise WorkloadValidationError(field_name, constraint)

    check(d.day_span >= 1, "day-span", "must be a positive number of days")
    check(d.sensor_number >= 1, "sensor-number", "must be positive")
    check(d.timestamp_granularity_ms >= 1, "timestamp-granularity", "must be positive")

    if d.workload_kind is WorkloadKind.INGESTION:
        check(len(d.batch_size_options) >= 1, "batch-size-options", "must list at least one batch size")
        check(len(d.client_number_options) >= 1, "client-number-options", "must list at least one client count")
        check(all(b >= 1 for b in d.batch_size_options), "batch-size-options", "every batch size must be >= 1")
        check(all(c >= 1 for c in d.client_number_options), "client-number-options", "every client count must be >= 1")
        check(
            max(d.client_number_options) <= d.sensor_number,
            "client-number-options",
            "client count cannot exceed sensor-number (each client needs sensors to own)",
        )
        if isinstance(d.stop_condition, BatchCount):
            check(d.stop_condition.batches_per_client >= 1, "stop", "batches-per-client must be >= 1")
        elif isinstance(d.stop_condition, TotalRecords):
            check(d.stop_condition.records >= 1, "stop", "total-records must be >= 1")
        elif isinstance(d.stop_condition, RunDuration):
            check(d.stop_condition.seconds > 0, "stop", "duration must be positive")
        else:
            check(False, "stop", "ingestion workloads need a stop condition")
        return

    # query workload
    check(all(b >= 1 for b in d.batch_size_options), "batch-size-options", "every batch size must be >= 1")
    check(all(c >= 1 for c in d.client_number_options), "client-number-options", "every client count must be >= 1")
    check(d.query_type is not None, "query-type", "required for query workloads")
    check(d.test_retries >= 1, "test-retries", "must be positive")
    check(d.duration_minutes >= 1, "duration-minutes", "must be positive")
    check(
        d.duration_minutes * MS_PER_MINUTE <= d.span_ms,
        "duration-minutes",
        "queried interval must fit inside day-span",
    )
    check(d.aggregation_interval_ms >= 1, "aggregation-interval", "must be positive")
    check(len(d.sensors_filter) >= 1, "sensors-filter", "query workloads need at least one sensor")
    check(
        all(0 <= s < d.sensor_number for s in d.sensors_filter),
        "sensors-filter",
        f"sensor ids must lie in [0, {d.sensor_number})",
    )
    check(
        len(set(d.sensors_filter)) == len(d.sensors_filter),
        "sensors-filter",
        "sensor ids must be distinct",
    )
    if d.query_type is QueryType.Q2:
        check(len(d.sensors_filter) == 1, "sensors-filter", "Q2 filters on exactly one sensor")
        check(d.min_value is not None, "min-value", "required for Q2")
        check(d.max_value is not None, "max-value", "required for Q2")
        check(
            d.min_value is not None and d.max_value is not None and d.min_value < d.max_value,
            "min-value",
            "must be strictly below max-value",
        )
    if d.query_type is QueryType.Q5:
        check(len(d.sensors_filter) == 2, "sensors-filter", "Q5 compares exactly two sensors")


def expand_runs(definition: WorkloadDefinition) -> list[RunPlan]:
    """Expand a definition into its ordered, contiguous run plans.

    Ingestion: the cartesian product of batch sizes and client counts, in
    declaration order (all client counts for the first batch size, then
    the next batch size). Query: exactly one plan.
    """
    if definition.workload_kind is WorkloadKind.INGESTION:
        return [
            RunPlan(ordinal=i, batch_size=b, client_count=c, definition=definition)
            for i, (b, c) in enumerate(
                product(definition.batch_size_options, definition.client_number_options)
            )
        ]
    return [RunPlan(ordinal=0, batch_size=None, client_count=1, definition=definition)]


def serialize_workload(d: WorkloadDefinition) -> str:
    """Render a definition back to its XML form.

    Re-parsing the output yields a field-for-field equal definition.
    """
    root = ET.Element("workload", version=SCHEMA_VERSION)

    def add(tag: str, text: str) -> None:
        ET.SubElement(root, tag).text = text

    add("target-database", d.target_database.value)
    conn = d.connection
    ET.SubElement(
        root,
        "connection",
        host=conn.host,
        port=str(conn.port),
        user=conn.user,
        password=conn.password,
        database=conn.database,
    )
    add("kind", d.workload_kind.value)
    add("day-span", str(d.day_span))
    add("start-time", format_utc_ms(d.start_time_ms))
    add("sensor-number", str(d.sensor_number))
    add("timestamp-granularity", format_duration_ms(d.timestamp_granularity_ms))
    add("seed", str(d.seed))

    if d.batch_size_options:
        add("batch-size-options", ",".join(str(b) for b in d.batch_size_options))
    if d.client_number_options:
        add("client-number-options", ",".join(str(c) for c in d.client_number_options))

    if d.workload_kind is WorkloadKind.INGESTION:
        stop = d.stop_condition
        if isinstance(stop, BatchCount):
            ET.SubElement(root, "stop", {"batches-per-client": str(stop.batches_per_client)})
        elif isinstance(stop, TotalRecords):
            ET.SubElement(root, "stop", {"total-records": str(stop.records)})
        elif isinstance(stop, RunDuration):
            ET.SubElement(root, "stop", {"duration": format_duration_ms(round(stop.seconds * 1000))})
    else:
        add("query-type", d.query_type.value)
        add("test-retries", str(d.test_retries))
        add("duration-minutes", str(d.duration_minutes))
        add("aggregation-interval", format_duration_ms(d.aggregation_interval_ms))
        add("aggregation-function", d.aggregation_function.value)
        add("comparison-function", d.comparison_function.value)
        add("sensors-filter", ",".join(str(s) for s in d.sensors_filter))
        if d.min_value is not None:
            add("min-value", repr(d.min_value))
        if d.max_value is not None:
            add("max-value", repr(d.max_value))

    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


def load_workload(path) -> WorkloadDefinition:
    """Read and parse a workload file from disk."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_workload(fh.read())


def with_seed(d: WorkloadDefinition, seed: int) -> WorkloadDefinition:
    """Copy of the definition with the seed replaced (CLI override)."""
    return replace(d, seed=seed)
