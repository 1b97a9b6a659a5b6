"""OSC 1.0 codec and UDP transport for source positioning commands.

Implements exactly the wire subset the render control path needs: single
messages with int32 / float32 / string / blob arguments, sent as one UDP
datagram each, fire and forget.  Bundles, time tags and pattern matching are
out of scope.

The address layout defaults to ``/source/<id>/position`` and
``/source/<id>/trajectory`` but can be remapped through a plain ``key=value``
file, since the receiving renderer's schema is deployment-specific.
"""

from __future__ import annotations

import socket
import struct
import threading
from dataclasses import dataclass, field

OscArg = int | float | str | bytes


class OscEncodeError(Exception):
    pass


class OscDecodeError(Exception):
    def __init__(self, offset: int, reason: str):
        super().__init__(f"offset {offset}: {reason}")
        self.offset = offset
        self.reason = reason


class TransportError(Exception):
    pass


@dataclass(frozen=True)
class OscMessage:
    address: str
    args: tuple[OscArg, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class PositionCommand:
    source_id: int
    x: float
    y: float

    def __post_init__(self):
        if self.source_id < 0:
            raise ValueError("source_id must be >= 0")
        if not (_finite(self.x) and _finite(self.y)):
            raise ValueError("coordinates must be finite")


def _finite(v: float) -> bool:
    return v == v and abs(v) != float("inf")


def _padded_string(s: bytes) -> bytes:
    # null terminator plus zero padding to the next multiple of four
    return s + b"\x00" * (4 - len(s) % 4)


def encode(msg: OscMessage) -> bytes:
    """OSC 1.0 byte layout: padded address, padded ",<tags>", packed args."""
    if not msg.address or not msg.address.startswith("/"):
        raise OscEncodeError(f"address must start with '/': {msg.address!r}")
    try:
        addr = msg.address.encode("ascii")
    except UnicodeEncodeError as exc:
        raise OscEncodeError(f"address is not ASCII: {msg.address!r}") from exc
    tags = b","
    payload = b""
    for arg in msg.args:
        if isinstance(arg, bool):
            raise OscEncodeError("bool is not an OSC 1.0 argument type")
        if isinstance(arg, int):
            tags += b"i"
            if not -(2**31) <= arg < 2**31:
                raise OscEncodeError(f"int out of int32 range: {arg}")
            payload += struct.pack(">i", arg)
        elif isinstance(arg, float):
            tags += b"f"
            payload += struct.pack(">f", arg)
        elif isinstance(arg, str):
            tags += b"s"
            try:
                payload += _padded_string(arg.encode("ascii"))
            except UnicodeEncodeError as exc:
                raise OscEncodeError(f"string argument is not ASCII: {arg!r}") from exc
        elif isinstance(arg, bytes):
            tags += b"b"
            padding = (4 - len(arg) % 4) % 4
            payload += struct.pack(">i", len(arg)) + arg + b"\x00" * padding
        else:
            raise OscEncodeError(f"unsupported argument type: {type(arg).__name__}")
    return _padded_string(addr) + _padded_string(tags) + payload


def _read_padded_string(data: bytes, offset: int) -> tuple[str, int]:
    end = data.find(b"\x00", offset)
    if end < 0:
        raise OscDecodeError(offset, "unterminated string")
    raw = data[offset:end]
    next_offset = offset + ((end - offset) // 4 + 1) * 4
    if next_offset > len(data):
        raise OscDecodeError(offset, "string padding runs past the packet end")
    if data[end:next_offset].strip(b"\x00"):
        raise OscDecodeError(end, "non-zero bytes in string padding")
    try:
        return raw.decode("ascii"), next_offset
    except UnicodeDecodeError as exc:
        raise OscDecodeError(offset, "string is not ASCII") from exc


def decode(data: bytes) -> OscMessage:
    """Inverse of :func:`encode`; raises :class:`OscDecodeError` with the
    byte offset of the first problem."""
    if len(data) == 0:
        raise OscDecodeError(0, "empty packet")
    if len(data) % 4 != 0:
        raise OscDecodeError(len(data), "packet length not a multiple of 4")
    address, offset = _read_padded_string(data, 0)
    if not address.startswith("/"):
        raise OscDecodeError(0, f"address must start with '/': {address!r}")
    tags, offset = _read_padded_string(data, offset)
    if not tags.startswith(","):
        raise OscDecodeError(offset, f"type tag string must start with ',': {tags!r}")
    args: list[OscArg] = []
    for tag in tags[1:]:
        if tag == "i":
            if offset + 4 > len(data):
                raise OscDecodeError(offset, "truncated int32")
            args.append(struct.unpack(">i", data[offset : offset + 4])[0])
            offset += 4
        elif tag == "f":
            if offset + 4 > len(data):
                raise OscDecodeError(offset, "truncated float32")
            args.append(struct.unpack(">f", data[offset : offset + 4])[0])
            offset += 4
        elif tag == "s":
            value, offset = _read_padded_string(data, offset)
            args.append(value)
        elif tag == "b":
            if offset + 4 > len(data):
                raise OscDecodeError(offset, "truncated blob length")
            length = struct.unpack(">i", data[offset : offset + 4])[0]
            if length < 0:
                raise OscDecodeError(offset, f"negative blob length {length}")
            offset += 4
            padded = (length + 3) // 4 * 4
            if offset + padded > len(data):
                raise OscDecodeError(offset, "truncated blob payload")
            args.append(data[offset : offset + length])
            offset += padded
        else:
            raise OscDecodeError(offset, f"unknown type tag {tag!r}")
    if offset != len(data):
        raise OscDecodeError(offset, "trailing bytes after the last argument")
    return OscMessage(address=address, args=tuple(args))


DEFAULT_POSITION_PATTERN = "/source/{id}/position"
DEFAULT_TRAJECTORY_PATTERN = "/source/{id}/trajectory"


@dataclass(frozen=True)
class AddressSchema:
    position_pattern: str = DEFAULT_POSITION_PATTERN
    trajectory_pattern: str = DEFAULT_TRAJECTORY_PATTERN

    def position_address(self, source_id: int) -> str:
        return self.position_pattern.format(id=source_id)

    def trajectory_address(self, source_id: int) -> str:
        return self.trajectory_pattern.format(id=source_id)


def load_address_schema(path) -> AddressSchema:
    """Read a ``key=value`` mapping file; unknown keys are rejected."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in ("position_pattern", "trajectory_pattern"):
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = value
    return AddressSchema(**values)


def position_message(cmd: PositionCommand, schema: AddressSchema = AddressSchema()) -> OscMessage:
    return OscMessage(
        address=schema.position_address(cmd.source_id),
        args=(float(cmd.x), float(cmd.y)),
    )


def trajectory_message(
    source_id: int,
    start: tuple[float, float],
    end: tuple[float, float],
    duration: float,
    schema: AddressSchema = AddressSchema(),
) -> OscMessage:
    if duration <= 0.0:
        raise ValueError(f"trajectory duration must be positive, got {duration}")
    return OscMessage(
        address=schema.trajectory_address(source_id),
        args=(float(start[0]), float(start[1]), float(end[0]), float(end[1]), float(duration)),
    )


@dataclass
class OscSender:
    """One UDP socket per sender; sends are serialized with a lock so
    cross-thread callers keep per-sender ordering."""

    host: str
    port: int
    schema: AddressSchema = field(default_factory=AddressSchema)

    def __post_init__(self):
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._lock = threading.Lock()

    def send(self, msg: OscMessage) -> int:
        """Send one encoded datagram; returns the byte count."""
        data = encode(msg)
        try:
            with self._lock:
                self._sock.sendto(data, (self.host, self.port))
        except OSError as exc:
            raise TransportError(f"UDP send to {self.host}:{self.port} failed: {exc}") from exc
        return len(data)

    def send_position(self, cmd: PositionCommand) -> int:
        return self.send(position_message(cmd, self.schema))

    def send_trajectory(self, source_id, start, end, duration) -> int:
        return self.send(trajectory_message(source_id, start, end, duration, self.schema))

    def close(self):
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def send_position(cmd: PositionCommand, endpoint: tuple[str, int], schema=AddressSchema()) -> int:
    """One-shot position datagram; returns bytes sent, raises TransportError."""
    with OscSender(endpoint[0], endpoint[1], schema) as sender:
        return sender.send_position(cmd)


def send_trajectory(
    source_id: int, start, end, duration: float, endpoint: tuple[str, int], schema=AddressSchema()
) -> int:
    with OscSender(endpoint[0], endpoint[1], schema) as sender:
        return sender.send_trajectory(source_id, start, end, duration)
