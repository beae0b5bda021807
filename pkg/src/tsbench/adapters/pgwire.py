"""Minimal PostgreSQL wire-protocol (v3) client.

Implements just what the benchmark needs over a plain TCP socket: startup
and authentication (trust, cleartext, md5, SCRAM-SHA-256), the simple
query protocol with text-format results, and COPY ... FROM STDIN for
bulk ingestion. No TLS, no extended protocol, no prepared statements.

The adapter layer always casts result columns to bigint/double in SQL,
so the type decoding here stays small.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import secrets
import socket
import struct
from dataclasses import dataclass

__all__ = ["PgConnection", "PgError", "PgServerError", "PgProtocolError"]


class PgError(Exception):
    pass


class PgProtocolError(PgError):
    """Unexpected bytes or message ordering."""


class PgServerError(PgError):
    """An ErrorResponse from the server."""

    def __init__(self, fields: dict[str, str]):
        self.severity = fields.get("S", "ERROR")
        self.code = fields.get("C", "")
        self.message_text = fields.get("M", "")
        super().__init__(f"{self.severity} {self.code}: {self.message_text}")


# type OIDs we decode; everything else stays text
_OID_INT = {20, 21, 23, 26}
_OID_FLOAT = {700, 701, 1700}
_OID_BOOL = {16}


def _decode_cell(raw: bytes | None, oid: int):
    if raw is None:
        return None
    text = raw.decode("utf-8")
    if oid in _OID_INT:
        return int(text)
    if oid in _OID_FLOAT:
        return float(text)
    if oid in _OID_BOOL:
        return text == "t"
    return text


@dataclass(frozen=True)
class ColumnDescription:
    name: str
    type_oid: int


class _MessageReader:
    def __init__(self, payload: bytes):
        self._buf = payload
        self._pos = 0

    def int32(self) -> int:
        value = struct.unpack_from("!i", self._buf, self._pos)[0]
        self._pos += 4
        return value

    def int16(self) -> int:
        value = struct.unpack_from("!h", self._buf, self._pos)[0]
        self._pos += 2
        return value

    def byte(self) -> int:
        value = self._buf[self._pos]
        self._pos += 1
        return value

    def take(self, n: int) -> bytes:
        value = self._buf[self._pos:self._pos + n]
        self._pos += n
        return value

    def cstring(self) -> str:
        end = self._buf.index(b"\x00", self._pos)
        value = self._buf[self._pos:end].decode("utf-8")
        self._pos = end + 1
        return value

    def remainder(self) -> bytes:
        return self._buf[self._pos:]


def _scram_sha256(password: str, username: str):
    """Client side of SCRAM-SHA-256 (RFC 7677, no channel binding)."""
    nonce = base64.b64encode(secrets.token_bytes(18)).decode("ascii")
    client_first_bare = f"n=,r={nonce}"

    def continue_with(server_first: str) -> tuple[str, bytes]:
        params = dict(item.split("=", 1) for item in server_first.split(","))
        full_nonce = params["r"]
        if not full_nonce.startswith(nonce):
            raise PgProtocolError("server SCRAM nonce does not extend ours")
        salt = base64.b64decode(params["s"])
        iterations = int(params["i"])
        salted = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, iterations)
        client_key = hmac.digest(salted, b"Client Key", "sha256")
        stored_key = hashlib.sha256(client_key).digest()
        without_proof = f"c=biws,r={full_nonce}"
        auth_message = f"{client_first_bare},{server_first},{without_proof}".encode("utf-8")
        signature = hmac.digest(stored_key, auth_message, "sha256")
        proof = bytes(a ^ b for a, b in zip(client_key, signature))
        client_final = f"{without_proof},p={base64.b64encode(proof).decode('ascii')}"
        server_key = hmac.digest(salted, b"Server Key", "sha256")
        expected_server_sig = hmac.digest(server_key, auth_message, "sha256")
        return client_final, expected_server_sig

    return f"n,,{client_first_bare}", continue_with


class PgConnection:
    """One blocking connection; single-owner, not thread-safe."""

    def __init__(
        self,
        host: str,
        port: int,
        user: str,
        password: str,
        database: str,
        connect_timeout_s: float = 10.0,
    ):
        self.parameters: dict[str, str] = {}
        self._user = user
        self._password = password
        try:
            self._sock = socket.create_connection((host, port or 5432), timeout=connect_timeout_s)
        except OSError as exc:
            raise PgError(f"cannot connect to {host}:{port or 5432}: {exc}") from None
        self._sock.settimeout(None)
        try:
            self._startup(user, database)
        except Exception:
            self._sock.close()
            raise

    # --- low-level framing ---

    def _recv_exact(self, n: int) -> bytes:
        chunks = []
        while n:
            try:
                chunk = self._sock.recv(n)
            except OSError as exc:
                raise PgProtocolError(f"socket receive failed: {exc}") from None
            if not chunk:
                raise PgProtocolError("server closed the connection")
            chunks.append(chunk)
            n -= len(chunk)
        return b"".join(chunks)

    def _read_message(self) -> tuple[bytes, _MessageReader]:
        header = self._recv_exact(5)
        kind = header[:1]
        length = struct.unpack("!i", header[1:])[0]
        payload = self._recv_exact(length - 4) if length > 4 else b""
        if kind == b"E":
            raise PgServerError(self._parse_notice_fields(payload))
        return kind, _MessageReader(payload)

    @staticmethod
    def _parse_notice_fields(payload: bytes) -> dict[str, str]:
        fields = {}
        reader = _MessageReader(payload)
        while True:
            code = reader.byte()
            if code == 0:
                return fields
            fields[chr(code)] = reader.cstring()

    def _send(self, kind: bytes, payload: bytes) -> None:
        try:
            self._sock.sendall(kind + struct.pack("!i", len(payload) + 4) + payload)
        except OSError as exc:
            raise PgProtocolError(f"socket send failed: {exc}") from None

    # --- startup & authentication ---

    def _startup(self, user: str, database: str) -> None:
        params = f"user\x00{user}\x00database\x00{database}\x00\x00".encode("utf-8")
        body = struct.pack("!i", 196608) + params  # protocol 3.0
        self._sock.sendall(struct.pack("!i", len(body) + 4) + body)
        scram_continue = None
        expected_server_sig = None
        while True:
            kind, reader = self._read_message()
            if kind == b"R":
                code = reader.int32()
                if code == 0:
                    continue  # AuthenticationOk
                if code == 3:  # cleartext password
                    self._send(b"p", self._password.encode("utf-8") + b"\x00")
                elif code == 5:  # md5
                    salt = reader.take(4)
                    inner = hashlib.md5(
                        self._password.encode("utf-8") + self._user.encode("utf-8")
                    ).hexdigest()
                    digest = hashlib.md5(inner.encode("ascii") + salt).hexdigest()
                    self._send(b"p", b"md5" + digest.encode("ascii") + b"\x00")
                elif code == 10:  # SASL mechanism negotiation
                    mechanisms = []
                    while True:
                        name = reader.cstring()
                        if not name:
                            break
                        mechanisms.append(name)
                    if "SCRAM-SHA-256" not in mechanisms:
                        raise PgError(f"unsupported SASL mechanisms: {mechanisms}")
                    first, scram_continue = _scram_sha256(self._password, self._user)
                    payload = first.encode("utf-8")
                    self._send(
                        b"p",
                        b"SCRAM-SHA-256\x00" + struct.pack("!i", len(payload)) + payload,
                    )
                elif code == 11:  # SASL continue
                    if scram_continue is None:
                        raise PgProtocolError("SASL continue before SASL start")
                    final, expected_server_sig = scram_continue(
                        reader.remainder().decode("utf-8")
                    )
                    self._send(b"p", final.encode("utf-8"))
                elif code == 12:  # SASL final
                    body = reader.remainder().decode("utf-8")
                    if expected_server_sig is not None:
                        sent = dict(item.split("=", 1) for item in body.split(","))
                        if base64.b64decode(sent.get("v", "")) != expected_server_sig:
                            raise PgError("server failed SCRAM verification")
                else:
                    raise PgError(f"unsupported authentication method {code}")
            elif kind == b"S":
                name = reader.cstring()
                self.parameters[name] = reader.cstring()
            elif kind == b"K":
                pass  # BackendKeyData: cancellation unused
            elif kind == b"Z":
                return
            elif kind == b"N":
                pass
            else:
                raise PgProtocolError(f"unexpected message {kind!r} during startup")

    # --- simple queries ---

    def query(self, sql: str) -> list[tuple]:
        """Run one statement, return decoded rows (empty for DDL)."""
        rows, _ = self.query_with_columns(sql)
        return rows

    def query_with_columns(self, sql: str) -> tuple[list[tuple], list[ColumnDescription]]:
        self._send(b"Q", sql.encode("utf-8") + b"\x00")
        columns: list[ColumnDescription] = []
        rows: list[tuple] = []
        error: PgServerError | None = None
        while True:
            try:
                kind, reader = self._read_message()
            except PgServerError as exc:
                error = exc  # keep draining until ReadyForQuery
                continue
            if kind == b"T":
                columns = []
                for _ in range(reader.int16()):
                    name = reader.cstring()
                    reader.int32()
                    reader.int16()
                    type_oid = reader.int32()
                    reader.int16()
                    reader.int32()
                    reader.int16()
                    columns.append(ColumnDescription(name, type_oid))
            elif kind == b"D":
                cells = []
                count = reader.int16()
                for index in range(count):
                    length = reader.int32()
                    raw = reader.take(length) if length >= 0 else None
                    oid = columns[index].type_oid if index < len(columns) else 25
                    cells.append(_decode_cell(raw, oid))
                rows.append(tuple(cells))
            elif kind in (b"C", b"I", b"N", b"S", b"A"):
                continue
            elif kind == b"Z":
                if error is not None:
                    raise error
                return rows, columns
            else:
                raise PgProtocolError(f"unexpected message {kind!r} during query")

    def copy_in(self, sql: str, chunks) -> int:
        """COPY ... FROM STDIN with the given byte chunks; returns row count."""
        self._send(b"Q", sql.encode("utf-8") + b"\x00")
        # wait for CopyInResponse; on an immediate rejection, drain to
        # ReadyForQuery so the connection stays usable
        error: PgServerError | None = None
        while True:
            try:
                kind, _reader = self._read_message()
            except PgServerError as exc:
                error = exc
                continue
            if kind == b"G":
                break
            if kind == b"Z":
                raise error or PgProtocolError("COPY produced no CopyInResponse")
            if kind in (b"N", b"S", b"A", b"C", b"I"):
                continue
            raise PgProtocolError(f"expected CopyInResponse, got {kind!r}")
        try:
            for chunk in chunks:
                if chunk:
                    self._send(b"d", chunk)
        except PgError:
            raise
        except Exception as exc:
            self._send(b"f", str(exc).encode("utf-8", "replace")[:200] + b"\x00")
            raise
        self._send(b"c", b"")
        copied = 0
        error: PgServerError | None = None
        while True:
            try:
                kind, reader = self._read_message()
            except PgServerError as exc:
                error = exc
                continue
            if kind == b"C":
                tag = reader.cstring()
                if tag.startswith("COPY "):
                    copied = int(tag.split()[1])
            elif kind == b"Z":
                if error is not None:
                    raise error
                return copied
            elif kind in (b"N", b"S", b"A"):
                continue
            else:
                raise PgProtocolError(f"unexpected message {kind!r} after COPY")

    def close(self) -> None:
        try:
            self._send(b"X", b"")
        except OSError:
            pass
        finally:
            self._sock.close()
