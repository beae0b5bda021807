"""Scripted PostgreSQL server for protocol tests.

Speaks just enough of the v3 wire protocol to exercise the client:
startup, the four auth flows (trust, cleartext, md5, SCRAM-SHA-256),
simple queries against canned responses, and COPY FROM STDIN.
"""

import base64
import hashlib
import hmac
import secrets
import socket
import struct
import threading


def _recv_exact(conn, n):
    data = b""
    while len(data) < n:
        chunk = conn.recv(n - len(data))
        if not chunk:
            raise ConnectionError("client went away")
        data += chunk
    return data


def _send(conn, kind: bytes, payload: bytes = b""):
    conn.sendall(kind + struct.pack("!i", len(payload) + 4) + payload)


def _read_typed(conn):
    header = _recv_exact(conn, 5)
    length = struct.unpack("!i", header[1:])[0]
    return header[:1], _recv_exact(conn, length - 4) if length > 4 else b""


class FakePgServer:
    """One-connection-at-a-time scripted server.

    query_handler(sql) returns None (CommandComplete only) or a tuple
    (columns, rows) with columns as (name, type_oid) pairs and rows as
    tuples of str/None. A sql of COPY triggers the copy-in flow; received
    payloads land in self.copy_payloads.
    """

    def __init__(self, auth="trust", user="bench", password="pw", query_handler=None):
        self.auth = auth
        self.user = user
        self.password = password
        self.query_handler = query_handler or (lambda sql: None)
        self.copy_payloads: list[bytes] = []
        self.startup_params: dict[str, str] = {}
        self.errors: list[str] = []
        self._sock = socket.socket()
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind(("127.0.0.1", 0))
        self._sock.listen(4)
        self._sock.settimeout(0.1)  # lets the serve loop notice _stop
        self._stop = threading.Event()
        self._active = None
        self._thread = threading.Thread(target=self._serve, daemon=True)

    @property
    def address(self):
        return self._sock.getsockname()

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._stop.set()
        if self._active is not None:
            try:
                self._active.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
        self._thread.join(timeout=5)
        self._sock.close()

    def _serve(self):
        while not self._stop.is_set():
            try:
                conn, _ = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            conn.settimeout(10)
            self._active = conn
            try:
                self._handle(conn)
            except (ConnectionError, socket.timeout):
                pass
            except Exception as exc:  # surface handler bugs in tests
                self.errors.append(repr(exc))
            finally:
                self._active = None
                conn.close()

    # --- session ---

    def _handle(self, conn):
        length = struct.unpack("!i", _recv_exact(conn, 4))[0]
        body = _recv_exact(conn, length - 4)
        protocol = struct.unpack("!i", body[:4])[0]
        assert protocol == 196608, f"unexpected protocol {protocol}"
        parts = body[4:].split(b"\x00")
        pairs = [p.decode() for p in parts if p]
        self.startup_params = dict(zip(pairs[::2], pairs[1::2]))

        if not self._authenticate(conn):
            return
        _send(conn, b"R", struct.pack("!i", 0))
        _send(conn, b"S", b"server_version\x0013.5\x00")
        _send(conn, b"K", struct.pack("!ii", 1234, 5678))
        _send(conn, b"Z", b"I")

        while True:
            kind, payload = _read_typed(conn)
            if kind == b"X":
                return
            if kind != b"Q":
                self.errors.append(f"unexpected message {kind!r}")
                return
            sql = payload.rstrip(b"\x00").decode()
            if sql.upper().startswith("COPY "):
                self._handle_copy(conn)
            else:
                self._handle_query(conn, sql)

    def _fail_auth(self, conn, message):
        payload = b"SFATAL\x00C28P01\x00M" + message.encode() + b"\x00\x00"
        _send(conn, b"E", payload)

    def _authenticate(self, conn) -> bool:
        if self.auth == "trust":
            return True
        if self.auth == "cleartext":
            _send(conn, b"R", struct.pack("!i", 3))
            kind, payload = _read_typed(conn)
            assert kind == b"p"
            if payload.rstrip(b"\x00").decode() != self.password:
                self._fail_auth(conn, "password authentication failed")
                return False
            return True
        if self.auth == "md5":
            salt = b"\x01\x02\x03\x04"
            _send(conn, b"R", struct.pack("!i", 5) + salt)
            kind, payload = _read_typed(conn)
            assert kind == b"p"
            inner = hashlib.md5(
                self.password.encode() + self.user.encode()
            ).hexdigest()
            expected = "md5" + hashlib.md5(inner.encode() + salt).hexdigest()
            if payload.rstrip(b"\x00").decode() != expected:
                self._fail_auth(conn, "password authentication failed")
                return False
            return True
        if self.auth == "scram":
            return self._scram(conn)
        raise AssertionError(f"unknown auth mode {self.auth}")

    def _scram(self, conn) -> bool:
        _send(conn, b"R", struct.pack("!i", 10) + b"SCRAM-SHA-256\x00\x00")
        kind, payload = _read_typed(conn)
        assert kind == b"p"
        zero = payload.index(b"\x00")
        mechanism = payload[:zero].decode()
        assert mechanism == "SCRAM-SHA-256", mechanism
        (length,) = struct.unpack_from("!i", payload, zero + 1)
        client_first = payload[zero + 5:zero + 5 + length].decode()
        assert client_first.startswith("n,,")
        client_first_bare = client_first[3:]
        client_nonce = dict(
            item.split("=", 1) for item in client_first_bare.split(",")
        )["r"]

        salt = secrets.token_bytes(16)
        iterations = 4096
        full_nonce = client_nonce + base64.b64encode(secrets.token_bytes(12)).decode()
        server_first = (
            f"r={full_nonce},s={base64.b64encode(salt).decode()},i={iterations}"
        )
        _send(conn, b"R", struct.pack("!i", 11) + server_first.encode())

        kind, payload = _read_typed(conn)
        assert kind == b"p"
        client_final = payload.decode()
        parts = dict(item.split("=", 1) for item in client_final.split(","))
        assert parts["c"] == "biws"
        assert parts["r"] == full_nonce
        proof = base64.b64decode(parts["p"])
        without_proof = client_final[: client_final.rindex(",p=")]

        salted = hashlib.pbkdf2_hmac(
            "sha256", self.password.encode(), salt, iterations
        )
        client_key = hmac.digest(salted, b"Client Key", "sha256")
        stored_key = hashlib.sha256(client_key).digest()
        auth_message = f"{client_first_bare},{server_first},{without_proof}".encode()
        signature = hmac.digest(stored_key, auth_message, "sha256")
        recovered = bytes(a ^ b for a, b in zip(proof, signature))
        if hashlib.sha256(recovered).digest() != stored_key:
            self._fail_auth(conn, "SCRAM proof mismatch")
            return False
        server_key = hmac.digest(salted, b"Server Key", "sha256")
        server_sig = base64.b64encode(
            hmac.digest(server_key, auth_message, "sha256")
        ).decode()
        _send(conn, b"R", struct.pack("!i", 12) + f"v={server_sig}".encode())
        return True

    # --- statements ---

    def _handle_query(self, conn, sql):
        try:
            response = self.query_handler(sql)
        except RuntimeError as exc:  # scripted server-side error
            payload = b"SERROR\x00C42601\x00M" + str(exc).encode() + b"\x00\x00"
            _send(conn, b"E", payload)
            _send(conn, b"Z", b"I")
            return
        if response is None:
            _send(conn, b"C", b"OK\x00")
            _send(conn, b"Z", b"I")
            return
        columns, rows = response
        description = struct.pack("!h", len(columns))
        for name, oid in columns:
            description += name.encode() + b"\x00"
            description += struct.pack("!ihihih", 0, 0, oid, 8, -1, 0)
        _send(conn, b"T", description)
        for row in rows:
            body = struct.pack("!h", len(row))
            for cell in row:
                if cell is None:
                    body += struct.pack("!i", -1)
                else:
                    raw = str(cell).encode()
                    body += struct.pack("!i", len(raw)) + raw
            _send(conn, b"D", body)
        _send(conn, b"C", f"SELECT {len(rows)}\x00".encode())
        _send(conn, b"Z", b"I")

    def _handle_copy(self, conn):
        _send(conn, b"G", struct.pack("!bh", 0, 3) + struct.pack("!hhh", 0, 0, 0))
        received = b""
        while True:
            kind, payload = _read_typed(conn)
            if kind == b"d":
                received += payload
            elif kind == b"c":
                break
            elif kind == b"f":
                _send(conn, b"Z", b"I")
                return
            else:
                self.errors.append(f"unexpected {kind!r} during COPY")
                return
        self.copy_payloads.append(received)
        rows = received.count(b"\n")
        _send(conn, b"C", f"COPY {rows}\x00".encode())
        _send(conn, b"Z", b"I")
