"""Stub InfluxDB v2 HTTP API for adapter tests."""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse


class _Handler(BaseHTTPRequestHandler):
    def _reply(self, status, body=b"", content_type="application/json"):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _body(self):
        length = int(self.headers.get("Content-Length", "0"))
        return self.rfile.read(length)

    def do_GET(self):
        server = self.server
        url = urlparse(self.path)
        if url.path == "/health":
            self._reply(200, json.dumps(
                {"status": "pass", "version": "2.1.1", "name": "influxdb"}
            ).encode())
        elif url.path == "/api/v2/orgs":
            self._reply(200, json.dumps(
                {"orgs": [{"id": "org-1", "name": "bench-org"}]}
            ).encode())
        elif url.path == "/api/v2/buckets":
            name = parse_qs(url.query).get("name", [None])[0]
            buckets = [
                {"id": bucket_id, "name": bucket_name}
                for bucket_id, bucket_name in server.buckets.items()
                if name in (None, bucket_name)
            ]
            self._reply(200, json.dumps({"buckets": buckets}).encode())
        else:
            self._reply(404)

    def do_DELETE(self):
        server = self.server
        url = urlparse(self.path)
        if url.path.startswith("/api/v2/buckets/"):
            bucket_id = url.path.rsplit("/", 1)[1]
            if server.buckets.pop(bucket_id, None) is not None:
                self._reply(204)
            else:
                self._reply(404)
        else:
            self._reply(404)

    def do_POST(self):
        server = self.server
        url = urlparse(self.path)
        params = parse_qs(url.query)
        if url.path == "/api/v2/write":
            server.writes.append(
                {
                    "org": params.get("org", [""])[0],
                    "bucket": params.get("bucket", [""])[0],
                    "precision": params.get("precision", [""])[0],
                    "auth": self.headers.get("Authorization", ""),
                    "body": self._body().decode(),
                }
            )
            if server.reject_writes:
                self._reply(400, json.dumps({"message": "rejected"}).encode())
            else:
                self._reply(204)
        elif url.path == "/api/v2/buckets":
            payload = json.loads(self._body())
            bucket_id = f"bucket-{len(server.buckets)}"
            server.buckets[bucket_id] = payload["name"]
            self._reply(201, json.dumps({"id": bucket_id, "name": payload["name"]}).encode())
        elif url.path == "/api/v2/query":
            payload = json.loads(self._body())
            server.queries.append(payload["query"])
            csv_text = server.query_handler(payload["query"])
            self._reply(200, csv_text.encode(), content_type="application/csv")
        else:
            self._reply(404)

    def log_message(self, *args):
        pass


class FakeInfluxServer:
    def __init__(self, query_handler=None, buckets=None, reject_writes=False):
        self.server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        self.server.writes = []
        self.server.queries = []
        self.server.buckets = dict(buckets or {})
        self.server.reject_writes = reject_writes
        self.server.query_handler = query_handler or (lambda flux: "\r\n")
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def writes(self):
        return self.server.writes

    @property
    def queries(self):
        return self.server.queries

    @property
    def buckets(self):
        return self.server.buckets

    @property
    def address(self):
        return self.server.server_address

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()
        self._thread.join()
