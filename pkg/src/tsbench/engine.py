"""Run execution: concurrent ingestion workers and repeated-query loops.

One worker thread per simulated client, each owning its own generator
stream and its own backend connection. Workers push latency samples into
a queue; a single collector thread is the only writer to the sample
list, and the engine joins everything before returning, so no sample is
ever lost on a clean shutdown.

Latency clocks are monotonic (perf_counter); wall-clock timestamps are
recorded separately on each sample for correlating with resource
snapshots.
"""

from __future__ import annotations

import queue
import subprocess
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .adapters.base import AdapterError, DatabaseAdapter, QuerySpec
from .generator import SensorStream, SpanExhaustedError, seed_entropy
from .stats import RollingRateSeries, rolling_rate
from .workload import (
    BatchCount,
    QueryType,
    RunDuration,
    RunPlan,
    StopCondition,
    TotalRecords,
    WorkloadKind,
)

_QUERY_WINDOW_KEY = 1  # spawn-key namespace (0 = data streams)

DEFAULT_FAILURE_THRESHOLD = 3
DEFAULT_HEALTH_TIMEOUT_S = 120.0

AdapterFactory = Callable[[int], DatabaseAdapter]


class OpKind(str, Enum):
    INSERT = "insert"
    QUERY = "query"


@dataclass
class LatencySample:
    """One timed operation as observed by a worker."""

    run_ordinal: int
    client_ordinal: int
    kind: OpKind
    batch_size: int | None
    query_type: QueryType | None
    start_offset_s: float  # monotonic offset from run start
    elapsed_s: float
    records: int  # 0 for queries
    failed: bool = False
    error: str = ""
    wall_unix: float = 0.0  # wall clock at operation start


@dataclass(frozen=True)
class IngestionSummary:
    total_records: int
    wall_time_s: float
    overall_rate_rps: float
    rolling: RollingRateSeries


class EngineError(Exception):
    pass


class WorkerAbortError(EngineError):
    """One or more workers gave up; partial results are attached."""

    def __init__(self, message: str, samples: list[LatencySample], summary: IngestionSummary | None = None):
        super().__init__(message)
        self.samples = samples
        self.summary = summary


class ResetHookError(EngineError):
    def __init__(self, command: str, returncode: int, output: str):
        super().__init__(
            f"reset hook {command!r} exited with {returncode}:\n{output}"
        )
        self.returncode = returncode
        self.output = output


class HealthTimeoutError(EngineError):
    pass


def batch_budgets(stop: StopCondition, batch_size: int, client_count: int) -> list[int] | None:
    """Per-client batch counts for count-based stop conditions.

    Fixing the split up front keeps the generated record multiset a pure
    function of (definition, stop condition), independent of thread
    timing. Returns None for duration-based stops, which are inherently
    wall-clock bound.
    """
    if isinstance(stop, BatchCount):
        return [stop.batches_per_client] * client_count
    if isinstance(stop, TotalRecords):
        total_batches = -(-stop.records // batch_size)  # ceil: reach at least n
        base, extra = divmod(total_batches, client_count)
        return [base + (1 if i < extra else 0) for i in range(client_count)]
    if isinstance(stop, RunDuration):
        return None
    raise EngineError(f"unsupported stop condition {stop!r}")


@dataclass
class _WorkerOutcome:
    aborted: bool = False
    error: str = ""


def _drain_collector(
    sample_queue: "queue.Queue[LatencySample | None]",
    sink: list[LatencySample],
) -> None:
    while True:
        item = sample_queue.get()
        if item is None:
            return
        sink.append(item)


def run_ingestion(
    plan: RunPlan,
    stop: StopCondition,
    adapter_factory: AdapterFactory,
    *,
    failure_threshold: int = DEFAULT_FAILURE_THRESHOLD,
    warmup_batches: int = 0,
) -> tuple[IngestionSummary, list[LatencySample]]:
    """Run one ingestion plan to its stop condition.

    Each of plan.client_count workers generates and bulk-inserts batches
    of plan.batch_size. A worker aborts after failure_threshold
    consecutive insert failures or when the generator's day span runs
    out; if any worker aborted, WorkerAbortError carries the partial
    summary and samples. The first warmup_batches samples of every
    client are discarded from the results (default: keep everything).
    """
    if plan.workload_kind is not WorkloadKind.INGESTION:
        raise EngineError("run_ingestion needs an ingestion plan")
    budgets = batch_budgets(stop, plan.batch_size, plan.client_count)
    duration_s = stop.seconds if isinstance(stop, RunDuration) else None

    sample_queue: queue.Queue[LatencySample | None] = queue.Queue()
    samples: list[LatencySample] = []
    collector = threading.Thread(
        target=_drain_collector, args=(sample_queue, samples), name="sample-collector"
    )
    outcomes = [_WorkerOutcome() for _ in range(plan.client_count)]
    run_start = time.perf_counter()

    def worker(ordinal: int) -> None:
        outcome = outcomes[ordinal]
        emitted = 0
        consecutive_failures = 0
        try:
            stream = SensorStream.for_client(plan.definition, ordinal, plan.client_count)
            with adapter_factory(ordinal) as adapter:
                while True:
                    if budgets is not None and emitted >= budgets[ordinal]:
                        return
                    if duration_s is not None and time.perf_counter() - run_start >= duration_s:
                        return
                    batch = stream.next_batch(plan.batch_size)
                    wall = time.time()
                    offset = time.perf_counter() - run_start
                    sample = LatencySample(
                        run_ordinal=plan.ordinal,
                        client_ordinal=ordinal,
                        kind=OpKind.INSERT,
                        batch_size=plan.batch_size,
                        query_type=None,
                        start_offset_s=offset,
                        elapsed_s=0.0,
                        records=0,
                        wall_unix=wall,
                    )
                    try:
                        receipt = adapter.insert_batch(batch)
                    except AdapterError as exc:
                        sample.elapsed_s = time.perf_counter() - run_start - offset
                        sample.failed = True
                        sample.error = str(exc)
                        consecutive_failures += 1
                    else:
                        sample.elapsed_s = receipt.elapsed_s
                        sample.records = receipt.records_written
                        consecutive_failures = 0
                    emitted += 1
                    if emitted > warmup_batches:
                        sample_queue.put(sample)
                    if consecutive_failures >= failure_threshold:
                        outcome.aborted = True
                        outcome.error = (
                            f"client {ordinal}: {consecutive_failures} consecutive insert failures"
                        )
                        return
        except SpanExhaustedError as exc:
            outcome.aborted = True
            outcome.error = f"client {ordinal}: {exc}"
        except AdapterError as exc:
            outcome.aborted = True
            outcome.error = f"client {ordinal}: {exc}"
        except Exception as exc:  # a worker must never die silently
            outcome.aborted = True
            outcome.error = f"client {ordinal}: unexpected {type(exc).__name__}: {exc}"

    workers = [
        threading.Thread(target=worker, args=(i,), name=f"ingest-client-{i}")
        for i in range(plan.client_count)
    ]
    collector.start()
    for w in workers:
        w.start()
    for w in workers:
        w.join()
    sample_queue.put(None)
    collector.join()

    samples.sort(key=lambda s: (s.client_ordinal, s.start_offset_s))
    summary = summarize_ingestion(samples)
    aborted = [o.error for o in outcomes if o.aborted]
    if aborted:
        raise WorkerAbortError("; ".join(aborted), samples, summary)
    return summary, samples


def summarize_ingestion(samples: list[LatencySample]) -> IngestionSummary:
    ok = [s for s in samples if not s.failed]
    total = sum(s.records for s in ok)
    wall = max((s.start_offset_s + s.elapsed_s) for s in ok) if ok else 0.0
    rate = total / wall if wall > 0 else 0.0
    return IngestionSummary(
        total_records=total,
        wall_time_s=wall,
        overall_rate_rps=rate,
        rolling=rolling_rate(samples),
    )


def query_windows(plan: RunPlan) -> list[tuple[int, int]]:
    """The run's random query windows, derived only from the definition.

    Every repetition draws a fresh window of duration_minutes uniformly
    inside [start, start + day span]; seeding from the definition makes
    query runs replayable.
    """
    d = plan.definition
    duration_ms = d.duration_minutes * 60_000
    max_offset = d.span_ms - duration_ms
    seq = np.random.SeedSequence(
        seed_entropy(d.seed), spawn_key=(_QUERY_WINDOW_KEY, plan.ordinal)
    )
    rng = np.random.Generator(np.random.PCG64(seq))
    offsets = rng.integers(0, max_offset + 1, size=d.test_retries, dtype=np.int64)
    return [
        (d.start_time_ms + int(off), d.start_time_ms + int(off) + duration_ms)
        for off in offsets
    ]


def build_query_spec(plan: RunPlan, window: tuple[int, int]) -> QuerySpec:
    d = plan.definition
    bucket = d.aggregation_interval_ms if d.query_type is not QueryType.Q1 else None
    return QuerySpec(
        query_type=d.query_type,
        t_start_ms=window[0],
        t_end_ms=window[1],
        sensors=d.sensors_filter,
        bucket_width_ms=bucket,
        agg_func=d.aggregation_function,
        comp_func=d.comparison_function,
        min_value=d.min_value,
        max_value=d.max_value,
    )


def run_query(
    plan: RunPlan,
    adapter_factory: AdapterFactory,
    *,
    failure_threshold: int = DEFAULT_FAILURE_THRESHOLD,
) -> list[LatencySample]:
    """Execute a query plan: test_retries repetitions, one fresh random
    window each, against a pre-populated backend."""
    if plan.workload_kind is not WorkloadKind.QUERY:
        raise EngineError("run_query needs a query plan")
    samples: list[LatencySample] = []
    consecutive_failures = 0
    run_start = time.perf_counter()
    with adapter_factory(0) as adapter:
        for window in query_windows(plan):
            spec = build_query_spec(plan, window)
            wall = time.time()
            offset = time.perf_counter() - run_start
            sample = LatencySample(
                run_ordinal=plan.ordinal,
                client_ordinal=0,
                kind=OpKind.QUERY,
                batch_size=None,
                query_type=plan.query_type,
                start_offset_s=offset,
                elapsed_s=0.0,
                records=0,
                wall_unix=wall,
            )
            try:
                _, elapsed = adapter.execute_query(spec)
            except AdapterError as exc:
                sample.elapsed_s = time.perf_counter() - run_start - offset
                sample.failed = True
                sample.error = str(exc)
                consecutive_failures += 1
            else:
                sample.elapsed_s = elapsed
                consecutive_failures = 0
            samples.append(sample)
            if consecutive_failures >= failure_threshold:
                raise WorkerAbortError(
                    f"{consecutive_failures} consecutive query failures", samples
                )
    return samples


def between_runs_reset(
    hook: str | None,
    adapter_factory: AdapterFactory | None = None,
    *,
    health_timeout_s: float = DEFAULT_HEALTH_TIMEOUT_S,
    poll_interval_s: float = 1.0,
) -> str | None:
    """Run the operator-supplied reset command, then wait for the backend.

    No-op when no hook is configured. A nonzero exit aborts the run with
    the captured output. After the hook, the backend is polled with a
    trivial probe until it answers or health_timeout_s passes.
    Returns the hook's combined output (None when unconfigured).
    """
    if not hook:
        return None
    proc = subprocess.run(
        hook, shell=True, capture_output=True, text=True
    )
    output = (proc.stdout or "") + (proc.stderr or "")
    if proc.returncode != 0:
        raise ResetHookError(hook, proc.returncode, output)
    if adapter_factory is not None:
        deadline = time.monotonic() + health_timeout_s
        while True:
            try:
                with adapter_factory(0) as adapter:
                    if adapter.health_probe():
                        break
            except AdapterError:
                pass
            if time.monotonic() >= deadline:
                raise HealthTimeoutError(
                    f"backend did not answer a probe within {health_timeout_s:.0f}s "
                    "after the reset hook"
                )
            time.sleep(poll_interval_s)
    return output
