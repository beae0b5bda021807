"""Deterministic synthetic sensor data.

Each concurrent client owns one stream. A stream walks round-robin over
a contiguous slice of the sensor id space; every time the cycle wraps,
the timestamp advances by the configured granularity. Values are drawn
uniformly from [0, 2^31 - 1] as doubles.

Reproducibility: the PRNG is numpy's PCG64 seeded with
``SeedSequence(definition.seed, spawn_key=(0, client_ordinal))``, so the
same (seed, client) pair always produces the same byte-identical stream,
and different clients never share a stream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .workload import WorkloadDefinition

VALUE_MAX = float(2**31 - 1)

_DATA_STREAM_KEY = 0  # spawn-key namespace for data streams (1 = query windows)


def seed_entropy(seed: int) -> int:
    """Signed 64-bit seeds as unsigned entropy (two's-complement view);
    the seeding machinery only accepts non-negative integers."""
    return seed & (2**64 - 1)


class GeneratorConfigError(ValueError):
    """The run's client layout cannot cover the sensor space."""


class SpanExhaustedError(RuntimeError):
    """Generating the next batch would step past the configured day span."""


class SensorRecord(NamedTuple):
    timestamp_ms: int  # epoch ms, UTC
    sensor_id: int
    value: float


def sensor_slice(sensor_number: int, client_count: int, client_ordinal: int) -> range:
    """Contiguous sensor ids owned by one client.

    Slices have width ceil(sensor_number / client_count); the last slice
    is clipped. Together they partition [0, sensor_number) without
    overlap, so no two clients can ever emit the same (timestamp,
    sensor_id) pair.
    """
    if client_ordinal < 0 or client_ordinal >= client_count:
        raise GeneratorConfigError(
            f"client ordinal {client_ordinal} outside [0, {client_count})"
        )
    width = -(-sensor_number // client_count)  # ceil division
    start = client_ordinal * width
    end = min(start + width, sensor_number)
    if start >= end:
        # happens when sensor_number < client_count (and for some nearby
        # degenerate splits): the trailing client would own nothing
        raise GeneratorConfigError(
            f"{client_count} clients cannot each own a non-empty slice of "
            f"{sensor_number} sensors"
        )
    return range(start, end)


@dataclass
class SensorStream:
    """Single-owner generator state for one client. Not thread-safe; each
    worker must own exactly one stream."""

    slice_start: int
    slice_width: int
    granularity_ms: int
    start_time_ms: int
    end_time_ms: int  # exclusive: timestamps stay in [start, end)
    _rng: np.random.Generator
    _position: int = 0  # records emitted so far

    @classmethod
    def for_client(
        cls,
        definition: WorkloadDefinition,
        client_ordinal: int,
        client_count: int,
    ) -> "SensorStream":
        ids = sensor_slice(definition.sensor_number, client_count, client_ordinal)
        seq = np.random.SeedSequence(
            seed_entropy(definition.seed), spawn_key=(_DATA_STREAM_KEY, client_ordinal)
        )
        return cls(
            slice_start=ids.start,
            slice_width=len(ids),
            granularity_ms=definition.timestamp_granularity_ms,
            start_time_ms=definition.start_time_ms,
            end_time_ms=definition.end_time_ms,
            _rng=np.random.Generator(np.random.PCG64(seq)),
        )

    @property
    def next_timestamp_ms(self) -> int:
        return self.start_time_ms + (self._position // self.slice_width) * self.granularity_ms

    def next_batch(self, batch_size: int) -> list[SensorRecord]:
        """Generate the next batch_size records, advancing the stream.

        Raises SpanExhaustedError (without consuming anything) if the
        batch would produce a timestamp at or past start + day span.
        """
        if batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        last = self._position + batch_size - 1
        last_ts = self.start_time_ms + (last // self.slice_width) * self.granularity_ms
        if last_ts >= self.end_time_ms:
            raise SpanExhaustedError(
                f"batch of {batch_size} would reach {last_ts}, past the span end "
                f"{self.end_time_ms}"
            )
        positions = np.arange(self._position, self._position + batch_size, dtype=np.int64)
        timestamps = self.start_time_ms + (positions // self.slice_width) * self.granularity_ms
        sensor_ids = self.slice_start + (positions % self.slice_width)
        values = self._rng.uniform(0.0, VALUE_MAX, batch_size)
        self._position += batch_size
        return [
            SensorRecord(int(t), int(s), float(v))
            for t, s, v in zip(timestamps.tolist(), sensor_ids.tolist(), values.tolist())
        ]


def generate_run_records(
    definition: WorkloadDefinition,
    client_count: int,
    batch_size: int,
    batches_per_client: Iterable[int] | int,
) -> list[SensorRecord]:
    """All records an ingestion run will produce, client by client.

    ``batches_per_client`` is either one count for every client or one
    count per client. Useful for oracles and determinism checks: the
    result depends only on (definition, layout), never on timing.
    """
    if isinstance(batches_per_client, int):
        counts = [batches_per_client] * client_count
    else:
        counts = list(batches_per_client)
        if len(counts) != client_count:
            raise ValueError("need one batch count per client")
    records: list[SensorRecord] = []
    for ordinal in range(client_count):
        stream = SensorStream.for_client(definition, ordinal, client_count)
        for _ in range(counts[ordinal]):
            records.extend(stream.next_batch(batch_size))
    return records


def dump_records(records: Iterable[SensorRecord]) -> bytes:
    """Canonical byte dump of a record sequence (for determinism checks).

    Floats are rendered with repr so equal streams compare byte-equal.
    """
    lines = ["timestamp_ms,sensor_id,value"]
    lines.extend(f"{r.timestamp_ms},{r.sensor_id},{r.value!r}" for r in records)
    return ("\n".join(lines) + "\n").encode("ascii")
