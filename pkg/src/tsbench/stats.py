"""Latency statistics and ingestion-rate computations.

Conventions, fixed here and relied on by the CSV consumers:

- p95 is nearest-rank on the sorted samples: element ceil(0.95 * n) of
  the sorted list (1-based). Exact and unambiguous; a constant series
  has p95 equal to the constant.
- Standard deviation is the sample estimator (n - 1 denominator); a
  single sample has stddev 0.
- Rolling rates bucket records into run minutes by completion offset.
  Buckets close on the right: a batch acknowledged exactly at 60.0 s
  still counts toward minute 0. Full minutes divide by 60 s; the
  trailing bucket divides by its actual length. Each bucket keeps its
  integer record count, so rate x length reconstructs the totals
  exactly (see ``RateBucket.rate_exact``).
- Throughput megabytes are 10^6 bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Protocol, Sequence

# timestamp + sensor id + value, 8 bytes each
RECORD_SIZE_BYTES = 24

SECONDS_PER_BUCKET = 60.0


class StatsError(ValueError):
    """Raised for empty inputs or non-positive denominators."""


@dataclass(frozen=True)
class QueryStats:
    """Summary of repeated timed operations, in seconds."""

    n: int
    min: float
    mean: float
    p95: float
    max: float
    stddev: float


def compute_stats(durations: Sequence[float]) -> QueryStats:
    """Min/mean/p95/max and sample standard deviation of a duration list."""
    n = len(durations)
    if n == 0:
        raise StatsError("cannot summarize zero samples")
    ordered = sorted(durations)
    mean = math.fsum(ordered) / n
    # the true mean lies in [min, max]; clamp away the last-ulp rounding
    # of the division so the invariant holds and constant series get an
    # exactly zero deviation
    mean = min(max(mean, ordered[0]), ordered[-1])
    if n > 1:
        variance = math.fsum((x - mean) ** 2 for x in ordered) / (n - 1)
        stddev = math.sqrt(variance)
    else:
        stddev = 0.0
    rank = math.ceil(0.95 * n)  # 1-based nearest rank
    return QueryStats(
        n=n,
        min=ordered[0],
        mean=mean,
        p95=ordered[rank - 1],
        max=ordered[-1],
        stddev=stddev,
    )


def ingestion_rate(total_records: int, wall_time_s: float) -> float:
    """Records per second over a whole run."""
    if wall_time_s <= 0:
        raise StatsError(f"wall time must be positive, got {wall_time_s}")
    return total_records / wall_time_s


def throughput_mb_per_s(rate_rps: float, record_size_bytes: int = RECORD_SIZE_BYTES) -> float:
    """Ingestion rate converted to megabytes (10^6 bytes) per second."""
    if record_size_bytes <= 0:
        raise StatsError(f"record size must be positive, got {record_size_bytes}")
    return rate_rps * record_size_bytes / 1_000_000


@dataclass(frozen=True)
class RateBucket:
    """One minute of a run: records acknowledged with completion offset in
    (60*index, 60*(index+1)], except bucket 0 which starts closed at 0."""

    minute_index: int
    records: int
    length_s: float

    @property
    def rate_exact(self) -> Fraction:
        """records / length as an exact rational; rate_exact * length_s
        recovers the record count with no rounding."""
        return Fraction(self.records) / Fraction(self.length_s)

    @property
    def rate(self) -> float:
        return self.records / self.length_s


@dataclass(frozen=True)
class RollingRateSeries:
    buckets: tuple[RateBucket, ...]

    @property
    def points(self) -> list[tuple[int, float]]:
        """(minute_index, records/second) pairs, contiguous from 0."""
        return [(b.minute_index, b.rate) for b in self.buckets]

    @property
    def total_records(self) -> int:
        return sum(b.records for b in self.buckets)


class _CompletedSample(Protocol):
    start_offset_s: float
    elapsed_s: float
    records: int
    failed: bool


def rolling_rate(samples: Iterable[_CompletedSample]) -> RollingRateSeries:
    """Resample insert latencies into per-minute ingestion rates.

    Records are attributed to the minute containing the sample's
    completion offset (start + elapsed). Failed samples are skipped.
    Buckets are contiguous from minute 0; minutes with no completions
    have rate 0.
    """
    completed = [
        (s.start_offset_s + s.elapsed_s, s.records) for s in samples if not s.failed
    ]
    if not completed:
        return RollingRateSeries(buckets=())
    max_offset = max(offset for offset, _ in completed)
    last_index = _bucket_index(max_offset)
    counts = [0] * (last_index + 1)
    for offset, records in completed:
        counts[_bucket_index(offset)] += records
    trailing = max_offset - SECONDS_PER_BUCKET * last_index
    if trailing <= 0.0:
        trailing = SECONDS_PER_BUCKET  # all completions at offset 0 exactly
    buckets = tuple(
        RateBucket(
            minute_index=i,
            records=counts[i],
            length_s=SECONDS_PER_BUCKET if i < last_index else trailing,
        )
        for i in range(last_index + 1)
    )
    return RollingRateSeries(buckets=buckets)


def _bucket_index(completion_offset_s: float) -> int:
    if completion_offset_s <= 0.0:
        return 0
    index = math.ceil(completion_offset_s / SECONDS_PER_BUCKET) - 1
    return index
