"""Minimal ClickHouse native TCP protocol client.

Speaks the uncompressed native protocol directly over a socket: Hello
handshake, Query, and Data blocks with fixed-width numeric columns. The
client advertises protocol revision 54450 and serializes everything
against min(server revision, 54450), which keeps the feature surface
small and stable: no compression, no custom column serialization, no
profile-event streams.

Only the column types the benchmark schema needs are implemented:
integers, floats, DateTime/DateTime64, and String.
"""

from __future__ import annotations

import socket
import struct
from dataclasses import dataclass

import numpy as np

CLIENT_NAME = "tsbench"
CLIENT_VERSION = (1, 0, 0)
CLIENT_REVISION = 54450

# revision thresholds that matter at or below our claimed revision
REV_TEMPORARY_TABLES = 50264
REV_TOTAL_ROWS_IN_PROGRESS = 51554
REV_BLOCK_INFO = 51903
REV_CLIENT_INFO = 54032
REV_SERVER_TIMEZONE = 54058
REV_QUOTA_KEY = 54060
REV_SERVER_DISPLAY_NAME = 54372
REV_VERSION_PATCH = 54401
REV_TABLE_COLUMNS = 54410
REV_CLIENT_WRITE_INFO = 54420
REV_SETTINGS_AS_STRINGS = 54429
REV_INTERSERVER_SECRET = 54441
REV_OPENTELEMETRY = 54442
REV_DISTRIBUTED_DEPTH = 54448
REV_INITIAL_QUERY_START_TIME = 54449


class ClientPacket:
    HELLO = 0
    QUERY = 1
    DATA = 2
    CANCEL = 3
    PING = 4


class ServerPacket:
    HELLO = 0
    DATA = 1
    EXCEPTION = 2
    PROGRESS = 3
    PONG = 4
    END_OF_STREAM = 5
    PROFILE_INFO = 6
    TOTALS = 7
    EXTREMES = 8
    TABLES_STATUS = 9
    LOG = 10
    TABLE_COLUMNS = 11


QUERY_STAGE_COMPLETE = 2
COMPRESSION_DISABLED = 0


class ChError(Exception):
    pass


class ChProtocolError(ChError):
    pass


class ChServerError(ChError):
    """An Exception packet from the server."""

    def __init__(self, code: int, name: str, message: str):
        self.code = code
        self.name = name
        super().__init__(f"{name} (code {code}): {message}")


_FIXED_DTYPES = {
    "UInt8": "<u1",
    "UInt16": "<u2",
    "UInt32": "<u4",
    "UInt64": "<u8",
    "Int8": "<i1",
    "Int16": "<i2",
    "Int32": "<i4",
    "Int64": "<i8",
    "Float32": "<f4",
    "Float64": "<f8",
}


def column_dtype(type_name: str) -> str | None:
    """Numpy dtype for fixed-width native columns, None for String."""
    if type_name.startswith("DateTime64"):
        return "<i8"
    if type_name.startswith("DateTime"):
        return "<u4"
    if type_name.startswith("Nullable("):
        raise ChProtocolError(f"unsupported column type {type_name}")
    if type_name in _FIXED_DTYPES:
        return _FIXED_DTYPES[type_name]
    if type_name == "String":
        return None
    raise ChProtocolError(f"unsupported column type {type_name}")


@dataclass(frozen=True)
class ServerInfo:
    name: str
    version: str
    revision: int
    timezone: str
    display_name: str


@dataclass(frozen=True)
class Column:
    name: str
    type_name: str
    values: list


class _Stream:
    """Buffered varint/string/raw IO over one socket."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._buf = b""
        self._out: list[bytes] = []

    # reading

    def read(self, n: int) -> bytes:
        while len(self._buf) < n:
            try:
                chunk = self._sock.recv(max(4096, n - len(self._buf)))
            except OSError as exc:
                raise ChProtocolError(f"socket receive failed: {exc}") from None
            if not chunk:
                raise ChProtocolError("server closed the connection")
            self._buf += chunk
        value, self._buf = self._buf[:n], self._buf[n:]
        return value

    def read_varint(self) -> int:
        shift = 0
        value = 0
        while True:
            byte = self.read(1)[0]
            value |= (byte & 0x7F) << shift
            if not byte & 0x80:
                return value
            shift += 7

    def read_str(self) -> str:
        return self.read(self.read_varint()).decode("utf-8")

    def read_uint8(self) -> int:
        return self.read(1)[0]

    def read_int32(self) -> int:
        return struct.unpack("<i", self.read(4))[0]

    def read_uint64(self) -> int:
        return struct.unpack("<Q", self.read(8))[0]

    # writing (buffered until flush)

    def write(self, data: bytes) -> None:
        self._out.append(data)

    def write_varint(self, value: int) -> None:
        out = bytearray()
        while True:
            byte = value & 0x7F
            value >>= 7
            if value:
                out.append(byte | 0x80)
            else:
                out.append(byte)
                break
        self.write(bytes(out))

    def write_str(self, text: str) -> None:
        raw = text.encode("utf-8")
        self.write_varint(len(raw))
        self.write(raw)

    def write_uint8(self, value: int) -> None:
        self.write(bytes([value]))

    def write_int32(self, value: int) -> None:
        self.write(struct.pack("<i", value))

    def write_uint64(self, value: int) -> None:
        self.write(struct.pack("<Q", value))

    def flush(self) -> None:
        if self._out:
            payload = b"".join(self._out)
            self._out = []
            try:
                self._sock.sendall(payload)
            except OSError as exc:
                raise ChProtocolError(f"socket send failed: {exc}") from None


class ClickHouseConnection:
    """One native-protocol connection; single-owner, not thread-safe."""

    def __init__(
        self,
        host: str,
        port: int,
        user: str,
        password: str,
        database: str,
        connect_timeout_s: float = 10.0,
    ):
        try:
            sock = socket.create_connection((host, port or 9000), timeout=connect_timeout_s)
        except OSError as exc:
            raise ChError(f"cannot connect to {host}:{port or 9000}: {exc}") from None
        sock.settimeout(None)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._io = _Stream(sock)
        self._sock = sock
        try:
            self.server = self._hello(user or "default", password, database)
        except Exception:
            sock.close()
            raise
        self.revision = min(self.server.revision, CLIENT_REVISION)

    # --- handshake ---

    def _hello(self, user: str, password: str, database: str) -> ServerInfo:
        io = self._io
        io.write_varint(ClientPacket.HELLO)
        io.write_str(f"ClickHouse {CLIENT_NAME}")
        io.write_varint(CLIENT_VERSION[0])
        io.write_varint(CLIENT_VERSION[1])
        io.write_varint(CLIENT_REVISION)
        io.write_str(database)
        io.write_str(user)
        io.write_str(password)
        io.flush()

        packet = io.read_varint()
        if packet == ServerPacket.EXCEPTION:
            raise self._read_exception()
        if packet != ServerPacket.HELLO:
            raise ChProtocolError(f"expected server hello, got packet {packet}")
        name = io.read_str()
        major = io.read_varint()
        minor = io.read_varint()
        server_revision = io.read_varint()
        effective = min(server_revision, CLIENT_REVISION)
        timezone = io.read_str() if effective >= REV_SERVER_TIMEZONE else ""
        display_name = io.read_str() if effective >= REV_SERVER_DISPLAY_NAME else ""
        patch = io.read_varint() if effective >= REV_VERSION_PATCH else 0
        return ServerInfo(
            name=name,
            version=f"{major}.{minor}.{patch}",
            revision=server_revision,
            timezone=timezone,
            display_name=display_name,
        )

    # --- packet pieces ---

    def _read_exception(self) -> ChServerError:
        io = self._io
        code = io.read_int32()
        name = io.read_str()
        message = io.read_str()
        io.read_str()  # stack trace
        if io.read_uint8():  # nested exception
            nested = self._read_exception()
            message = f"{message}; {nested}"
        return ChServerError(code, name, message)

    def _write_client_info(self) -> None:
        io = self._io
        io.write_uint8(1)  # initial query
        io.write_str("")  # initial user
        io.write_str("")  # initial query id
        io.write_str("0.0.0.0:0")  # initial address
        if self.revision >= REV_INITIAL_QUERY_START_TIME:
            io.write_uint64(0)
        io.write_uint8(1)  # interface: TCP
        io.write_str("")  # os user
        io.write_str("")  # hostname
        io.write_str(CLIENT_NAME)
        io.write_varint(CLIENT_VERSION[0])
        io.write_varint(CLIENT_VERSION[1])
        io.write_varint(CLIENT_REVISION)
        if self.revision >= REV_QUOTA_KEY:
            io.write_str("")
        if self.revision >= REV_DISTRIBUTED_DEPTH:
            io.write_varint(0)
        if self.revision >= REV_VERSION_PATCH:
            io.write_varint(CLIENT_VERSION[2])
        if self.revision >= REV_OPENTELEMETRY:
            io.write_uint8(0)  # no trace context

    def _send_query(self, query: str) -> None:
        io = self._io
        io.write_varint(ClientPacket.QUERY)
        io.write_str("")  # query id: let the server assign one
        if self.revision >= REV_CLIENT_INFO:
            self._write_client_info()
        io.write_str("")  # end of settings (none set)
        if self.revision >= REV_INTERSERVER_SECRET:
            io.write_str("")
        io.write_varint(QUERY_STAGE_COMPLETE)
        io.write_varint(COMPRESSION_DISABLED)
        io.write_str(query)
        self._send_block([], 0)  # end of external tables
        io.flush()

    def _send_block(self, columns: list[tuple[str, str, bytes | list]], n_rows: int) -> None:
        io = self._io
        io.write_varint(ClientPacket.DATA)
        if self.revision >= REV_TEMPORARY_TABLES:
            io.write_str("")
        # block info
        io.write_varint(1)
        io.write_uint8(0)  # is_overflows
        io.write_varint(2)
        io.write_int32(-1)  # bucket_num
        io.write_varint(0)
        io.write_varint(len(columns))
        io.write_varint(n_rows)
        for name, type_name, data in columns:
            io.write_str(name)
            io.write_str(type_name)
            if isinstance(data, bytes):
                io.write(data)
            else:  # String column
                for text in data:
                    io.write_str(text)

    def _read_block(self) -> tuple[list[Column], int]:
        io = self._io
        if self.revision >= REV_TEMPORARY_TABLES:
            io.read_str()  # external table name
        if self.revision >= REV_BLOCK_INFO:
            while True:
                field = io.read_varint()
                if field == 0:
                    break
                if field == 1:
                    io.read_uint8()
                elif field == 2:
                    io.read_int32()
                else:
                    raise ChProtocolError(f"unknown block info field {field}")
        n_columns = io.read_varint()
        n_rows = io.read_varint()
        columns = []
        for _ in range(n_columns):
            name = io.read_str()
            type_name = io.read_str()
            dtype = column_dtype(type_name)
            if dtype is None:
                values = [io.read_str() for _ in range(n_rows)]
            else:
                width = np.dtype(dtype).itemsize
                values = np.frombuffer(io.read(width * n_rows), dtype=dtype).tolist()
            columns.append(Column(name, type_name, values))
        return columns, n_rows

    def _skip_progress(self) -> None:
        io = self._io
        io.read_varint()  # rows
        io.read_varint()  # bytes
        if self.revision >= REV_TOTAL_ROWS_IN_PROGRESS:
            io.read_varint()
        if self.revision >= REV_CLIENT_WRITE_INFO:
            io.read_varint()
            io.read_varint()

    def _skip_profile_info(self) -> None:
        io = self._io
        io.read_varint()  # rows
        io.read_varint()  # blocks
        io.read_varint()  # bytes
        io.read_uint8()  # applied limit
        io.read_varint()  # rows before limit
        io.read_uint8()  # calculated rows before limit

    def _dispatch_informational(self, packet: int) -> bool:
        """Consume progress/log/etc packets; True when handled."""
        if packet == ServerPacket.PROGRESS:
            self._skip_progress()
        elif packet == ServerPacket.PROFILE_INFO:
            self._skip_profile_info()
        elif packet in (ServerPacket.TOTALS, ServerPacket.EXTREMES, ServerPacket.LOG):
            self._read_block()
        elif packet == ServerPacket.TABLE_COLUMNS:
            self._io.read_str()
            self._io.read_str()
        else:
            return False
        return True

    # --- public operations ---

    def execute(self, query: str) -> list[Column]:
        """Run a statement to completion; returns result columns (DDL: [])."""
        self._send_query(query)
        result: list[Column] | None = None
        total_rows = 0
        while True:
            packet = self._io.read_varint()
            if packet == ServerPacket.DATA:
                columns, n_rows = self._read_block()
                if n_rows:
                    if result is None:
                        result = columns
                    else:
                        for held, new in zip(result, columns):
                            held.values.extend(new.values)
                    total_rows += n_rows
                elif result is None and columns:
                    result = columns  # header block: names and types
            elif packet == ServerPacket.END_OF_STREAM:
                return result or []
            elif packet == ServerPacket.EXCEPTION:
                raise self._read_exception()
            elif not self._dispatch_informational(packet):
                raise ChProtocolError(f"unexpected packet {packet} during query")

    def execute_rows(self, query: str) -> list[tuple]:
        columns = self.execute(query)
        if not columns:
            return []
        return list(zip(*(c.values for c in columns)))

    def insert_native(
        self, table: str, columns: list[tuple[str, str, bytes | list]], n_rows: int
    ) -> None:
        """INSERT one block: send query, await the table header, stream data."""
        names = ", ".join(name for name, _, _ in columns)
        self._send_query(f"INSERT INTO {table} ({names}) VALUES")
        while True:  # wait for the sample/header block
            packet = self._io.read_varint()
            if packet == ServerPacket.DATA:
                self._read_block()
                break
            if packet == ServerPacket.EXCEPTION:
                raise self._read_exception()
            if not self._dispatch_informational(packet):
                raise ChProtocolError(f"unexpected packet {packet} before insert")
        self._send_block(columns, n_rows)
        self._send_block([], 0)  # end of data
        self._io.flush()
        while True:
            packet = self._io.read_varint()
            if packet == ServerPacket.END_OF_STREAM:
                return
            if packet == ServerPacket.EXCEPTION:
                raise self._read_exception()
            if packet == ServerPacket.DATA:
                self._read_block()
                continue
            if not self._dispatch_informational(packet):
                raise ChProtocolError(f"unexpected packet {packet} after insert")

    def ping(self) -> bool:
        self._io.write_varint(ClientPacket.PING)
        self._io.flush()
        while True:
            packet = self._io.read_varint()
            if packet == ServerPacket.PONG:
                return True
            if packet == ServerPacket.EXCEPTION:
                raise self._read_exception()
            if not self._dispatch_informational(packet):
                raise ChProtocolError(f"unexpected packet {packet} for ping")

    def close(self) -> None:
        self._sock.close()
