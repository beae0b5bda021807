"""Benchmark harness for time-series databases.

Drives parameterizable ingestion workloads (batching, concurrency, scaling)
and five query workloads against pluggable database backends, measures
insert/query latency and ingestion rates, polls server resource usage, and
validates query results against an in-memory reference backend.
"""

__version__ = "0.1.0"
