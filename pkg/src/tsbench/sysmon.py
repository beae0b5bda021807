"""Polling client for a Glances-compatible REST status endpoint.

The monitored server runs the agent; this side only issues periodic GET
requests against its ``/api/<v>/all`` document and extracts the resource
fields recorded next to every run: CPU user/system/iowait and context
switches, memory used/cached, swap, disk read/write/ops, network
sent/received.

Counter-style plugin values (context switches, disk, network) arrive as
deltas since the agent's last refresh together with a
``time_since_update`` seconds field; they are converted to per-second
rates here. Missing sections or fields are recorded as absent (None),
never as zero.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, fields

import requests

DEFAULT_PERIOD_S = 1.0
DEFAULT_API_PATH = "/api/3/all"

_PROBE_TIMEOUT_S = 5.0


class MonitorError(Exception):
    pass


class MonitorStartupError(MonitorError):
    """The endpoint did not answer the initial probe."""


class SnapshotParseError(MonitorError):
    """The response body is not a usable status document."""


@dataclass(frozen=True)
class ResourceSnapshot:
    """One poll of the server's resource usage. None = not reported."""

    wall_unix: float
    cpu_user_pct: float | None = None
    cpu_system_pct: float | None = None
    cpu_iowait_pct: float | None = None
    ctx_switches_per_s: float | None = None
    mem_used_pct: float | None = None
    mem_cached_bytes: float | None = None
    swap_used_bytes: float | None = None
    disk_read_bytes_per_s: float | None = None
    disk_write_bytes_per_s: float | None = None
    disk_io_ops_per_s: float | None = None
    net_sent_bytes_per_s: float | None = None
    net_recv_bytes_per_s: float | None = None


SNAPSHOT_FIELDS = tuple(f.name for f in fields(ResourceSnapshot))


def _number(section: dict, key: str) -> float | None:
    value = section.get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return None
    return float(value)


def _percent(section: dict, key: str, where: str) -> float | None:
    value = _number(section, key)
    if value is None:
        return None
    if not 0.0 <= value <= 100.0:
        raise SnapshotParseError(f"{where}.{key} out of range [0, 100]: {value}")
    return value


def _per_second(section: dict, key: str) -> float | None:
    """Delta counter divided by the agent's refresh interval."""
    delta = _number(section, key)
    interval = _number(section, "time_since_update")
    if delta is None or interval is None or interval <= 0:
        return None
    return delta / interval


def _sum_rates(entries, keys: tuple[str, ...]) -> float | None:
    """Aggregate per-device delta counters into one per-second rate."""
    total = None
    for entry in entries:
        if not isinstance(entry, dict):
            continue
        for key in keys:
            rate = _per_second(entry, key)
            if rate is not None:
                total = (total or 0.0) + rate
    return total


def parse_snapshot(body, wall_unix: float | None = None) -> ResourceSnapshot:
    """Extract a ResourceSnapshot from a status document.

    ``body`` may be the raw JSON text/bytes or an already-decoded dict.
    """
    if isinstance(body, (str, bytes)):
        try:
            body = json.loads(body)
        except json.JSONDecodeError as exc:
            raise SnapshotParseError(f"body is not valid JSON: {exc}") from None
    if not isinstance(body, dict):
        raise SnapshotParseError(f"expected a JSON object, got {type(body).__name__}")

    cpu = body.get("cpu") if isinstance(body.get("cpu"), dict) else {}
    mem = body.get("mem") if isinstance(body.get("mem"), dict) else {}
    swap = body.get("memswap") if isinstance(body.get("memswap"), dict) else {}
    diskio = body.get("diskio") if isinstance(body.get("diskio"), list) else []
    network = body.get("network") if isinstance(body.get("network"), list) else []

    return ResourceSnapshot(
        wall_unix=time.time() if wall_unix is None else wall_unix,
        cpu_user_pct=_percent(cpu, "user", "cpu"),
        cpu_system_pct=_percent(cpu, "system", "cpu"),
        cpu_iowait_pct=_percent(cpu, "iowait", "cpu"),
        ctx_switches_per_s=_per_second(cpu, "ctx_switches"),
        mem_used_pct=_percent(mem, "percent", "mem"),
        mem_cached_bytes=_number(mem, "cached"),
        swap_used_bytes=_number(swap, "used"),
        disk_read_bytes_per_s=_sum_rates(diskio, ("read_bytes",)),
        disk_write_bytes_per_s=_sum_rates(diskio, ("write_bytes",)),
        disk_io_ops_per_s=_sum_rates(diskio, ("read_count", "write_count")),
        net_sent_bytes_per_s=_sum_rates(network, ("tx",)),
        net_recv_bytes_per_s=_sum_rates(network, ("rx",)),
    )


class ResourceMonitor:
    """Background poller. Owns its HTTP session; the snapshot list has a
    single writer (the poll thread) and is safe to read after stop()."""

    def __init__(self, url: str, period_s: float):
        self.url = url
        self.period_s = period_s
        self.snapshots: list[ResourceSnapshot] = []
        self.gaps = 0  # polls that failed or did not parse
        self._stop = threading.Event()
        self._session = requests.Session()
        self._thread = threading.Thread(target=self._loop, name="resource-monitor", daemon=True)

    def _poll_once(self) -> None:
        try:
            response = self._session.get(
                self.url, timeout=max(self.period_s, _PROBE_TIMEOUT_S)
            )
            response.raise_for_status()
            snapshot = parse_snapshot(response.text, wall_unix=time.time())
        except (requests.RequestException, SnapshotParseError):
            self.gaps += 1
            return
        self.snapshots.append(snapshot)

    def _loop(self) -> None:
        started = time.monotonic()
        tick = 0
        while not self._stop.is_set():
            self._poll_once()
            tick += 1
            next_deadline = started + tick * self.period_s
            delay = next_deadline - time.monotonic()
            if delay > 0 and self._stop.wait(timeout=delay):
                return

    def stop(self) -> list[ResourceSnapshot]:
        """Stop polling and return everything captured so far."""
        self._stop.set()
        self._thread.join()
        self._session.close()
        return self.snapshots


def normalize_endpoint(endpoint: str) -> str:
    """Accept either a bare host base URL or a full status-document URL."""
    stripped = endpoint.rstrip("/")
    if stripped.endswith("/all"):
        return stripped
    return stripped + DEFAULT_API_PATH


def start_monitor(endpoint: str, period_s: float = DEFAULT_PERIOD_S) -> ResourceMonitor:
    """Probe the endpoint once, then start background sampling.

    Raises MonitorStartupError when the first probe fails; transient
    failures after startup only increment the monitor's gap counter.
    """
    if period_s <= 0:
        raise MonitorError(f"period must be positive, got {period_s}")
    url = normalize_endpoint(endpoint)
    try:
        response = requests.get(url, timeout=_PROBE_TIMEOUT_S)
        response.raise_for_status()
        parse_snapshot(response.text)
    except (requests.RequestException, SnapshotParseError) as exc:
        raise MonitorStartupError(f"monitor endpoint {url} not usable: {exc}") from None
    monitor = ResourceMonitor(url, period_s)
    monitor._thread.start()
    return monitor
