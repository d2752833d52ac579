"""File output: PNG images and Middlebury-style .flo flow files."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

# the canonical check float 202021.25 serializes to these four bytes
FLO_MAGIC = b"PIEH"


def save_png(path, array: np.ndarray) -> None:
    """Write a (H, W) gray or (H, W, 3) BGR uint8 array as PNG."""
    if array.dtype != np.uint8:
        raise ValueError(f"expected uint8 pixels, got {array.dtype}")
    if array.ndim == 2:
        Image.fromarray(array, mode="L").save(path)
    elif array.ndim == 3 and array.shape[2] == 3:
        Image.fromarray(array[..., ::-1], mode="RGB").save(path)
    else:
        raise ValueError(f"cannot write array of shape {array.shape} as PNG")


def load_png(path) -> np.ndarray:
    """Read a PNG back as (H, W) gray or (H, W, 3) BGR uint8."""
    with Image.open(path) as img:
        if img.mode == "L":
            return np.asarray(img, dtype=np.uint8)
        rgb = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return rgb[..., ::-1].copy()


def write_flo(path, flow: np.ndarray) -> None:
    """Write an (H, W, 2) flow field: magic, i32 width/height, f32 pairs."""
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValueError(f"expected (H, W, 2) flow, got {flow.shape}")
    h, w = flow.shape[:2]
    with open(path, "wb") as fh:
        fh.write(FLO_MAGIC)
        fh.write(struct.pack("<ii", w, h))
        fh.write(np.ascontiguousarray(flow, dtype="<f4").tobytes())


def read_flo(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != FLO_MAGIC:
        raise ValueError(f"{path} is not a flow file")
    w, h = struct.unpack_from("<ii", data, 4)
    expected = 12 + w * h * 8
    if w <= 0 or h <= 0 or len(data) != expected:
        raise ValueError(f"{path}: bad dimensions {w}x{h} for {len(data)} bytes")
    return np.frombuffer(data, dtype="<f4", offset=12).reshape(h, w, 2).astype(np.float32)
