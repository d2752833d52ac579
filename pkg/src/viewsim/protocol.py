"""Binary wire protocol: framing, request/response codecs, view packing.

Everything on the wire is little-endian. A connection opens with a 5-byte
hello (magic "SAIL" plus a version byte) that the server echoes back.
After that, both directions speak length-prefixed messages:

    opcode u8 | body_length u32 | body

Responses reuse the request opcode with the high bit set. Frame payloads
are raw pixel buffers in row-major order, optionally gzip-compressed per
view. Every decoder here is total: malformed or truncated input raises
ProtocolError (or its TruncatedError subclass), never anything else.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"SAIL"
VERSION = 1
HELLO = MAGIC + bytes([VERSION])
MAX_BODY = 64 * 1024 * 1024
MAX_DIMENSION = 4096

# requests
OP_REGISTER = 0x01
OP_CHANGE_SCENE = 0x02
OP_GET_FRAME = 0x03
OP_SET_POSITION = 0x04
OP_SET_ROTATION = 0x05
OP_TOGGLE_FOLLOW = 0x06
OP_DELETE = 0x07
RESPONSE_FLAG = 0x80
OP_ERROR = 0xFF

REQUEST_OPS = (
    OP_REGISTER,
    OP_CHANGE_SCENE,
    OP_GET_FRAME,
    OP_SET_POSITION,
    OP_SET_ROTATION,
    OP_TOGGLE_FOLLOW,
    OP_DELETE,
)

ERR_BAD_REQUEST = 1
ERR_UNKNOWN_SCENE = 2
ERR_INTERNAL = 3

COMPRESSION_RAW = 0
COMPRESSION_GZIP = 1

VIEW_IDS = {"main": 1, "category": 2, "object": 3, "flow": 4, "depth": 5}
VIEW_NAMES = {v: k for k, v in VIEW_IDS.items()}
VIEW_ORDER = ("main", "category", "object", "flow", "depth")
ALL_VIEWS_MASK = 0x1F


class ProtocolError(Exception):
    """Structurally invalid bytes for the declared message."""


class TruncatedError(ProtocolError):
    """Input ended before the declared length; more bytes might fix it."""


class _Cursor:
    """Bounds-checked reader over immutable bytes."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedError(
                f"need {n} bytes at offset {self.pos}, have {len(self.data) - self.pos}"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f32x3(self) -> tuple[float, float, float]:
        return struct.unpack("<3f", self.take(12))

    def text(self) -> str:
        raw = self.take(self.u16())
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ProtocolError(f"invalid UTF-8 string: {exc}") from exc

    def expect_end(self) -> None:
        if self.pos != len(self.data):
            raise ProtocolError(f"{len(self.data) - self.pos} trailing bytes after message body")


def _text_bytes(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ProtocolError("string too long for u16 length prefix")
    return struct.pack("<H", len(raw)) + raw


def check_hello(data: bytes) -> None:
    if len(data) < len(HELLO):
        raise TruncatedError("hello is 5 bytes")
    if data[:4] != MAGIC:
        raise ProtocolError(f"bad magic {data[:4]!r}")
    if data[4] != VERSION:
        raise ProtocolError(f"unsupported protocol version {data[4]}")


def encode_message(opcode: int, body: bytes = b"") -> bytes:
    if len(body) > MAX_BODY:
        raise ProtocolError(f"body of {len(body)} bytes exceeds the {MAX_BODY} limit")
    return struct.pack("<BI", opcode, len(body)) + body


def decode_message(data: bytes, offset: int = 0) -> tuple[int, bytes, int]:
    """One framed message starting at offset; returns (opcode, body, next offset)."""
    if offset + 5 > len(data):
        raise TruncatedError("incomplete message header")
    opcode, length = struct.unpack_from("<BI", data, offset)
    if length > MAX_BODY:
        raise ProtocolError(f"declared body of {length} bytes exceeds the {MAX_BODY} limit")
    end = offset + 5 + length
    if end > len(data):
        raise TruncatedError(f"body declares {length} bytes, {len(data) - offset - 5} available")
    return opcode, data[offset + 5 : end], end


# --- requests ---------------------------------------------------------------


@dataclass(frozen=True)
class RegisterRequest:
    width: int
    height: int
    view_mask: int = ALL_VIEWS_MASK
    compression: int = COMPRESSION_RAW

    def view_names(self) -> tuple[str, ...]:
        return mask_to_views(self.view_mask)


def mask_to_views(mask: int) -> tuple[str, ...]:
    return tuple(name for i, name in enumerate(VIEW_ORDER) if mask & (1 << i))


def views_to_mask(names) -> int:
    mask = 0
    for name in names:
        mask |= 1 << VIEW_ORDER.index(name)
    return mask


def encode_register(req: RegisterRequest) -> bytes:
    body = struct.pack("<IIBB", req.width, req.height, req.view_mask, req.compression)
    return encode_message(OP_REGISTER, body)


def decode_register(body: bytes) -> RegisterRequest:
    c = _Cursor(body)
    width, height = c.u32(), c.u32()
    view_mask, compression = c.u8(), c.u8()
    c.expect_end()
    if not (1 <= width <= MAX_DIMENSION and 1 <= height <= MAX_DIMENSION):
        raise ProtocolError(f"frame size {width}x{height} outside 1..{MAX_DIMENSION}")
    if view_mask == 0 or view_mask & ~ALL_VIEWS_MASK:
        raise ProtocolError(f"view mask {view_mask:#x} selects no valid views")
    if compression not in (COMPRESSION_RAW, COMPRESSION_GZIP):
        raise ProtocolError(f"unknown compression mode {compression}")
    return RegisterRequest(width, height, view_mask, compression)


def encode_change_scene(index: int) -> bytes:
    return encode_message(OP_CHANGE_SCENE, struct.pack("<B", index))


def decode_change_scene(body: bytes) -> int:
    c = _Cursor(body)
    index = c.u8()
    c.expect_end()
    return index


def encode_get_frame() -> bytes:
    return encode_message(OP_GET_FRAME)


def encode_set_position(x: float, y: float, z: float) -> bytes:
    return encode_message(OP_SET_POSITION, struct.pack("<3f", x, y, z))


def encode_set_rotation(rx: float, ry: float, rz: float) -> bytes:
    return encode_message(OP_SET_ROTATION, struct.pack("<3f", rx, ry, rz))


def decode_vec3(body: bytes) -> tuple[float, float, float]:
    c = _Cursor(body)
    v = c.f32x3()
    c.expect_end()
    return v


def encode_toggle_follow() -> bytes:
    return encode_message(OP_TOGGLE_FOLLOW)


def encode_delete() -> bytes:
    return encode_message(OP_DELETE)


def decode_empty(body: bytes) -> None:
    _Cursor(body).expect_end()


# --- responses --------------------------------------------------------------


@dataclass(frozen=True)
class RegisterReply:
    agent_id: int
    scene_names: tuple[str, ...]
    categories: tuple[tuple[int, str], ...]


def _encode_category_table(categories) -> bytes:
    if len(categories) > 0xFFFF:
        raise ProtocolError("too many categories")
    parts = [struct.pack("<H", len(categories))]
    for cid, name in categories:
        parts.append(struct.pack("<B", cid) + _text_bytes(name))
    return b"".join(parts)


def _decode_category_table(c: _Cursor) -> tuple[tuple[int, str], ...]:
    count = c.u16()
    return tuple((c.u8(), c.text()) for _ in range(count))


def encode_register_reply(reply: RegisterReply) -> bytes:
    if len(reply.scene_names) > 0xFF:
        raise ProtocolError("too many scenes")
    body = struct.pack("<IB", reply.agent_id, len(reply.scene_names))
    for name in reply.scene_names:
        body += _text_bytes(name)
    body += _encode_category_table(reply.categories)
    return encode_message(OP_REGISTER | RESPONSE_FLAG, body)


def decode_register_reply(body: bytes) -> RegisterReply:
    c = _Cursor(body)
    agent_id = c.u32()
    scene_names = tuple(c.text() for _ in range(c.u8()))
    categories = _decode_category_table(c)
    c.expect_end()
    return RegisterReply(agent_id, scene_names, categories)


def encode_change_scene_reply(categories) -> bytes:
    return encode_message(OP_CHANGE_SCENE | RESPONSE_FLAG, _encode_category_table(categories))


def decode_change_scene_reply(body: bytes) -> tuple[tuple[int, str], ...]:
    c = _Cursor(body)
    categories = _decode_category_table(c)
    c.expect_end()
    return categories


def encode_ack(request_op: int) -> bytes:
    return encode_message(request_op | RESPONSE_FLAG)


def encode_follow_reply(following: bool) -> bytes:
    return encode_message(OP_TOGGLE_FOLLOW | RESPONSE_FLAG, struct.pack("<B", int(following)))


def decode_follow_reply(body: bytes) -> bool:
    c = _Cursor(body)
    state = c.u8()
    c.expect_end()
    if state not in (0, 1):
        raise ProtocolError(f"follow state must be 0 or 1, got {state}")
    return bool(state)


def encode_error(code: int, message: str) -> bytes:
    return encode_message(OP_ERROR, struct.pack("<B", code) + _text_bytes(message))


def decode_error(body: bytes) -> tuple[int, str]:
    c = _Cursor(body)
    code = c.u8()
    message = c.text()
    c.expect_end()
    return code, message


# --- frame payloads ---------------------------------------------------------


def view_to_bytes(name: str, array: np.ndarray) -> bytes:
    if name == "flow":
        return np.ascontiguousarray(array, dtype="<f4").tobytes()
    return np.ascontiguousarray(array, dtype=np.uint8).tobytes()


def view_from_bytes(name: str, raw: bytes, width: int, height: int) -> np.ndarray:
    shapes = {
        "main": ((height, width, 3), np.uint8),
        "category": ((height, width), np.uint8),
        "object": ((height, width, 3), np.uint8),
        "flow": ((height, width, 2), "<f4"),
        "depth": ((height, width), np.uint8),
    }
    shape, dtype = shapes[name]
    expected = int(np.prod(shape)) * np.dtype(dtype).itemsize
    if len(raw) != expected:
        raise ProtocolError(f"{name} view carries {len(raw)} bytes, expected {expected}")
    out = np.frombuffer(raw, dtype=dtype).reshape(shape)
    if name == "flow":
        return out.astype(np.float32)
    return out.copy()


def encode_frame_reply(views: dict[str, np.ndarray], compression: int) -> bytes:
    """ViewBlocks in canonical view-id order; per-view overhead is 10 bytes."""
    ordered = [name for name in VIEW_ORDER if name in views]
    parts = [struct.pack("<B", len(ordered))]
    for name in ordered:
        raw = view_to_bytes(name, views[name])
        payload = gzip.compress(raw, mtime=0) if compression == COMPRESSION_GZIP else raw
        parts.append(
            struct.pack("<BBII", VIEW_IDS[name], compression, len(raw), len(payload))
        )
        parts.append(payload)
    return encode_message(OP_GET_FRAME | RESPONSE_FLAG, b"".join(parts))


def decode_frame_reply(body: bytes, width: int, height: int) -> dict[str, np.ndarray]:
    c = _Cursor(body)
    count = c.u8()
    views: dict[str, np.ndarray] = {}
    for _ in range(count):
        view_id = c.u8()
        compression = c.u8()
        uncompressed = c.u32()
        payload = c.take(c.u32())
        name = VIEW_NAMES.get(view_id)
        if name is None:
            raise ProtocolError(f"unknown view id {view_id}")
        if compression == COMPRESSION_GZIP:
            try:
                raw = gzip.decompress(payload)
            except (OSError, EOFError) as exc:
                raise ProtocolError(f"bad gzip payload for {name}: {exc}") from exc
        elif compression == COMPRESSION_RAW:
            raw = payload
        else:
            raise ProtocolError(f"unknown compression mode {compression}")
        if len(raw) != uncompressed:
            raise ProtocolError(
                f"{name} view: declared {uncompressed} uncompressed bytes, got {len(raw)}"
            )
        views[name] = view_from_bytes(name, raw, width, height)
    c.expect_end()
    return views
