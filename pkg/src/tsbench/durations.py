"""Duration strings and timestamp helpers shared across the harness.

Durations in workload files and CLI flags are written as an integer or
decimal count with a unit suffix: ``250ms``, ``90s``, ``30m``, ``1h``,
``15d``. Internally everything is integer milliseconds.
"""

from __future__ import annotations

import re
from datetime import datetime, timezone

MS_PER_SECOND = 1_000
MS_PER_MINUTE = 60 * MS_PER_SECOND
MS_PER_HOUR = 60 * MS_PER_MINUTE
MS_PER_DAY = 24 * MS_PER_HOUR

_UNIT_MS = {
    "ms": 1,
    "s": MS_PER_SECOND,
    "m": MS_PER_MINUTE,
    "h": MS_PER_HOUR,
    "d": MS_PER_DAY,
}

_DURATION_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(ms|s|m|h|d)\s*$")


class DurationError(ValueError):
    """Raised for text that is not a valid duration."""


def parse_duration_ms(text: str) -> int:
    """Parse a duration string like ``"30m"`` into integer milliseconds.

    The value must resolve to a whole number of milliseconds (``0.5ms`` is
    rejected) and must be positive.
    """
    match = _DURATION_RE.match(text)
    if not match:
        raise DurationError(
            f"invalid duration {text!r}: expected <number><ms|s|m|h|d>"
        )
    count, unit = match.groups()
    ms = float(count) * _UNIT_MS[unit]
    if ms != int(ms):
        raise DurationError(f"duration {text!r} is not a whole number of milliseconds")
    ms = int(ms)
    if ms <= 0:
        raise DurationError(f"duration {text!r} must be positive")
    return ms


def format_duration_ms(ms: int) -> str:
    """Render milliseconds in the largest unit that divides them evenly."""
    if ms <= 0:
        raise DurationError(f"cannot format non-positive duration {ms}")
    for unit in ("d", "h", "m", "s", "ms"):
        size = _UNIT_MS[unit]
        if ms % size == 0:
            return f"{ms // size}{unit}"
    raise AssertionError("unreachable: ms divides 1")


def parse_utc_ms(text: str) -> int:
    """Parse an ISO-8601 timestamp into epoch milliseconds (UTC).

    A trailing ``Z`` is accepted; timestamps without an offset are taken
    as UTC.
    """
    try:
        dt = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    except ValueError as exc:
        raise DurationError(f"invalid timestamp {text!r}: {exc}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp() * 1000)


def format_utc_ms(ms: int) -> str:
    """Render epoch milliseconds as an ISO-8601 UTC timestamp with a Z suffix."""
    dt = datetime.fromtimestamp(ms // 1000, tz=timezone.utc)
    if ms % 1000 == 0:
        return dt.strftime("%Y-%m-%dT%H:%M:%SZ")
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{ms % 1000:03d}Z"
