import gzip
import struct

import numpy as np
import pytest

from viewsim import protocol as proto


def sample_views(width=16, height=12, rng=None):
    rng = rng or np.random.default_rng(0)
    return {
        "main": rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8),
        "category": rng.integers(0, 256, size=(height, width), dtype=np.uint8),
        "object": rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8),
        "flow": rng.normal(size=(height, width, 2)).astype(np.float32),
        "depth": rng.integers(0, 256, size=(height, width), dtype=np.uint8),
    }


def test_hello_contents():
    assert proto.HELLO == b"SAIL\x01"
    proto.check_hello(proto.HELLO)
    with pytest.raises(proto.ProtocolError):
        proto.check_hello(b"SAIM\x01")
    with pytest.raises(proto.ProtocolError):
        proto.check_hello(b"SAIL\x02")
    with pytest.raises(proto.TruncatedError):
        proto.check_hello(b"SAI")


def test_message_framing_roundtrip():
    msg = proto.encode_message(0x03, b"")
    assert msg == bytes([0x03, 0, 0, 0, 0])
    op, body, end = proto.decode_message(msg)
    assert (op, body, end) == (0x03, b"", 5)
    payload = bytes(range(10))
    msg2 = msg + proto.encode_message(0x42, payload)
    op, body, end = proto.decode_message(msg2, 5)
    assert (op, body) == (0x42, payload)
    assert end == len(msg2)


def test_message_framing_limits():
    with pytest.raises(proto.TruncatedError):
        proto.decode_message(b"\x01\x02")
    with pytest.raises(proto.TruncatedError):
        proto.decode_message(struct.pack("<BI", 1, 10) + b"short")
    huge = struct.pack("<BI", 1, proto.MAX_BODY + 1)
    with pytest.raises(proto.ProtocolError):
        proto.decode_message(huge)


def test_register_roundtrip_and_validation():
    req = proto.RegisterRequest(256, 192, 0b10101, proto.COMPRESSION_GZIP)
    op, body, _ = proto.decode_message(proto.encode_register(req))
    assert op == proto.OP_REGISTER
    assert proto.decode_register(body) == req
    assert req.view_names() == ("main", "object", "depth")
    for bad in (
        struct.pack("<IIBB", 0, 10, 1, 0),
        struct.pack("<IIBB", 10, 0, 1, 0),
        struct.pack("<IIBB", 5000, 10, 1, 0),
        struct.pack("<IIBB", 10, 10, 0, 0),
        struct.pack("<IIBB", 10, 10, 0x20, 0),
        struct.pack("<IIBB", 10, 10, 1, 2),
        struct.pack("<IIBB", 10, 10, 1, 0) + b"x",
        struct.pack("<IIB", 10, 10, 1),
    ):
        with pytest.raises(proto.ProtocolError):
            proto.decode_register(bad)


def test_view_mask_helpers():
    assert proto.mask_to_views(0x1F) == ("main", "category", "object", "flow", "depth")
    assert proto.mask_to_views(0b01000) == ("flow",)
    assert proto.views_to_mask(("main", "depth")) == 0b10001
    assert proto.views_to_mask(proto.mask_to_views(0b10110)) == 0b10110


def test_register_reply_roundtrip():
    reply = proto.RegisterReply(
        agent_id=7,
        scene_names=("room_simple", "optical", "café"),
        categories=((1, "floor"), (2, "crate")),
    )
    op, body, _ = proto.decode_message(proto.encode_register_reply(reply))
    assert op == proto.OP_REGISTER | proto.RESPONSE_FLAG
    assert proto.decode_register_reply(body) == reply


def test_scene_change_and_error_roundtrip():
    cats = ((1, "cube"), (2, "cylinder"))
    op, body, _ = proto.decode_message(proto.encode_change_scene_reply(cats))
    assert op == 0x82
    assert proto.decode_change_scene_reply(body) == cats
    op, body, _ = proto.decode_message(proto.encode_change_scene(1))
    assert proto.decode_change_scene(body) == 1
    op, body, _ = proto.decode_message(proto.encode_error(proto.ERR_UNKNOWN_SCENE, "no scene 9"))
    assert op == proto.OP_ERROR
    assert proto.decode_error(body) == (proto.ERR_UNKNOWN_SCENE, "no scene 9")


def test_vec3_and_follow_roundtrip():
    op, body, _ = proto.decode_message(proto.encode_set_position(1.5, -2.0, 0.25))
    assert op == proto.OP_SET_POSITION
    assert proto.decode_vec3(body) == (1.5, -2.0, 0.25)
    op, body, _ = proto.decode_message(proto.encode_follow_reply(True))
    assert proto.decode_follow_reply(body) is True
    with pytest.raises(proto.ProtocolError):
        proto.decode_follow_reply(b"\x02")
    with pytest.raises(proto.ProtocolError):
        proto.decode_vec3(b"\x00" * 11)


@pytest.mark.parametrize("compression", [proto.COMPRESSION_RAW, proto.COMPRESSION_GZIP])
def test_frame_reply_roundtrip(compression):
    views = sample_views()
    op, body, _ = proto.decode_message(proto.encode_frame_reply(views, compression))
    assert op == 0x83
    out = proto.decode_frame_reply(body, 16, 12)
    assert list(out) == ["main", "category", "object", "flow", "depth"]
    for name in views:
        assert out[name].dtype == views[name].dtype
        assert np.array_equal(out[name], views[name])


def test_frame_reply_subset_keeps_canonical_order():
    views = sample_views()
    subset = {"depth": views["depth"], "main": views["main"]}
    op, body, _ = proto.decode_message(proto.encode_frame_reply(subset, 0))
    out = proto.decode_frame_reply(body, 16, 12)
    assert list(out) == ["main", "depth"]


def test_frame_header_overhead_is_bounded():
    views = sample_views()
    for names in (("main",), ("main", "flow"), tuple(views)):
        chosen = {n: views[n] for n in names}
        _, body, _ = proto.decode_message(proto.encode_frame_reply(chosen, 0))
        payload = sum(len(proto.view_to_bytes(n, v)) for n, v in chosen.items())
        overhead = len(body) - payload
        assert overhead == 1 + 10 * len(chosen)
        assert overhead <= 1 + 14 * len(chosen)


def test_flow_payload_is_little_endian_float32():
    flow = np.array([[[1.5, -2.0]]], dtype=np.float32)
    raw = proto.view_to_bytes("flow", flow)
    assert raw == struct.pack("<2f", 1.5, -2.0)


def test_view_length_mismatch_rejected():
    with pytest.raises(proto.ProtocolError):
        proto.view_from_bytes("main", b"\x00" * 10, 16, 12)
    # declared uncompressed length contradicts the payload
    raw = proto.view_to_bytes("depth", np.zeros((12, 16), dtype=np.uint8))
    block = struct.pack("<BBBII", 1, proto.VIEW_IDS["depth"], 0, len(raw) + 5, len(raw)) + raw
    with pytest.raises(proto.ProtocolError):
        proto.decode_frame_reply(block, 16, 12)


def test_corrupt_gzip_rejected():
    block = struct.pack("<BBBII", 1, 1, proto.COMPRESSION_GZIP, 100, 4) + b"nope"
    with pytest.raises(proto.ProtocolError):
        proto.decode_frame_reply(block, 16, 12)


def test_truncation_never_escapes_protocol_errors():
    views = sample_views(4, 3)
    messages = [
        proto.encode_register(proto.RegisterRequest(4, 3)),
        proto.encode_register_reply(proto.RegisterReply(1, ("a",), ((1, "x"),))),
        proto.encode_frame_reply(views, proto.COMPRESSION_GZIP),
        proto.encode_error(1, "bad"),
    ]
    decoders = {
        proto.OP_REGISTER: proto.decode_register,
        proto.OP_REGISTER | proto.RESPONSE_FLAG: proto.decode_register_reply,
        proto.OP_GET_FRAME | proto.RESPONSE_FLAG: lambda b: proto.decode_frame_reply(b, 4, 3),
        proto.OP_ERROR: proto.decode_error,
    }
    for msg in messages:
        for cut in range(len(msg)):
            try:
                op, body, _ = proto.decode_message(msg[:cut])
                decoders[op](body)
            except proto.ProtocolError:
                continue


def test_fuzz_random_bytes_only_raise_protocol_errors():
    rng = np.random.default_rng(1234)
    body_decoders = [
        proto.decode_register,
        proto.decode_change_scene,
        proto.decode_register_reply,
        proto.decode_change_scene_reply,
        proto.decode_vec3,
        proto.decode_follow_reply,
        proto.decode_error,
        proto.decode_empty,
        lambda b: proto.decode_frame_reply(b, 8, 8),
    ]
    for _ in range(2000):
        blob = rng.integers(0, 256, size=rng.integers(0, 64), dtype=np.uint8).tobytes()
        try:
            _, body, _ = proto.decode_message(blob)
        except proto.ProtocolError:
            body = blob
        for decode in body_decoders:
            try:
                decode(body)
            except proto.ProtocolError:
                pass
