"""Backend adapter registry.

Credentials can be overridden without editing workload files through the
environment variables TSBENCH_DB_USER and TSBENCH_DB_PASSWORD.
"""

from __future__ import annotations

import os
from dataclasses import replace

from ..workload import ConnectionInfo, TargetDatabase
from .base import (
    AdapterError,
    ConnectivityError,
    DatabaseAdapter,
    InsertError,
    InsertReceipt,
    QueryError,
    QuerySpec,
    QuerySpecError,
    ResultSet,
    make_result,
    results_equal,
)
from .reference import RecordStore, ReferenceAdapter, reference_evaluate

ENV_USER = "TSBENCH_DB_USER"
ENV_PASSWORD = "TSBENCH_DB_PASSWORD"


def resolve_credentials(connection: ConnectionInfo) -> ConnectionInfo:
    user = os.environ.get(ENV_USER)
    password = os.environ.get(ENV_PASSWORD)
    if user is not None:
        connection = replace(connection, user=user)
    if password is not None:
        connection = replace(connection, password=password)
    return connection


def create_adapter(target: TargetDatabase, connection: ConnectionInfo) -> DatabaseAdapter:
    """Construct a fresh single-owner adapter for one worker."""
    connection = resolve_credentials(connection)
    if target is TargetDatabase.REFERENCE:
        return ReferenceAdapter(connection)
    if target in (TargetDatabase.POSTGRESQL, TargetDatabase.TIMESCALEDB):
        from .postgres import PostgresAdapter, TimescaleAdapter

        cls = TimescaleAdapter if target is TargetDatabase.TIMESCALEDB else PostgresAdapter
        return cls(connection)
    if target is TargetDatabase.CLICKHOUSE:
        from .clickhouse import ClickHouseAdapter

        return ClickHouseAdapter(connection)
    if target is TargetDatabase.INFLUXDB:
        from .influx import InfluxAdapter

        return InfluxAdapter(connection)
    raise AdapterError(f"no adapter registered for {target}")


__all__ = [
    "AdapterError",
    "ConnectivityError",
    "DatabaseAdapter",
    "InsertError",
    "InsertReceipt",
    "QueryError",
    "QuerySpec",
    "QuerySpecError",
    "RecordStore",
    "ReferenceAdapter",
    "ResultSet",
    "create_adapter",
    "make_result",
    "reference_evaluate",
    "resolve_credentials",
    "results_equal",
]
