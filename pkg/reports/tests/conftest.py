"""Builds real result directories by invoking the tsbench CLI, which is
the boundary this package consumes (plus the documented file formats)."""

import json
import shutil
import subprocess
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

STATUS_BODY = json.dumps(
    {
        "cpu": {"user": 21.0, "system": 7.5, "iowait": 3.25,
                "ctx_switches": 52100, "time_since_update": 1.0},
        "mem": {"percent": 41.5, "cached": 2147483648},
        "memswap": {"used": 1048576},
        "diskio": [{"disk_name": "sda", "read_count": 10, "write_count": 90,
                    "read_bytes": 65536, "write_bytes": 9437184,
                    "time_since_update": 1.0}],
        "network": [{"interface_name": "eth0", "rx": 1500000, "tx": 250000,
                     "time_since_update": 1.0}],
    }
)


class _StatusHandler(BaseHTTPRequestHandler):
    def do_GET(self):
        payload = STATUS_BODY.encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture(scope="session")
def tsbench_cli():
    path = shutil.which("tsbench")
    if path is None:
        pytest.skip("tsbench CLI not installed (pip install -e '.[dev]')")
    return path


def run_cli(cli, definition, out_dir, extra=()):
    result = subprocess.run(
        [cli, "run", str(definition), "--out", str(out_dir), *extra],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stderr + result.stdout
    return result


@pytest.fixture(scope="session")
def ingestion_results(tsbench_cli, tmp_path_factory):
    """Four ingestion runs (2 batch sizes x 2 client counts) with
    resource monitoring against a stub status endpoint."""
    out_dir = tmp_path_factory.mktemp("results-ingest")
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StatusHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        host, port = server.server_address
        run_cli(
            tsbench_cli,
            FIXTURES / "ingest.xml",
            out_dir,
            extra=["--monitor", f"http://{host}:{port}/api/3/all",
                   "--monitor-period", "100ms"],
        )
    finally:
        server.shutdown()
        server.server_close()
        thread.join()
    return out_dir


@pytest.fixture(scope="session")
def query_results(tsbench_cli, tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("results-query")
    run_cli(tsbench_cli, FIXTURES / "query.xml", out_dir)
    return out_dir
