import csv

import numpy as np
import pytest
from scipy.signal import convolve2d

from viewsim.bench import (
    BlockMatchParams,
    EndpointError,
    benchmark_flow,
    bounding_box_iou,
    endpoint_error,
    estimate_flow_blockmatch,
    iou,
    to_gray,
    write_timings_csv,
)


def textured(shape, seed=0, smooth=5):
    # wider smoothing keeps structure alive at the coarse pyramid levels
    rng = np.random.default_rng(seed)
    noise = rng.uniform(0, 255, size=shape).astype(np.float32)
    kernel = np.ones((smooth, smooth)) / smooth**2
    return convolve2d(noise, kernel, mode="same", boundary="symm").astype(np.float32)


def test_block_match_recovers_pure_translation():
    tex = textured((140, 200))
    dy, dx = -3, 5
    curr = np.roll(np.roll(tex, dy, axis=0), dx, axis=1)
    flow = estimate_flow_blockmatch(tex, curr)
    inner = flow[24:-24, 24:-24]
    assert ((inner[..., 0] == dx) & (inner[..., 1] == dy)).mean() > 0.99


def test_block_match_reaches_large_displacements():
    params = BlockMatchParams()
    assert params.max_displacement() == 28
    tex = textured((160, 240), seed=3, smooth=13)
    shift = 20  # far beyond one level's radius of 4
    curr = np.roll(tex, shift, axis=1)
    flow = estimate_flow_blockmatch(tex, curr, params)
    inner = flow[32:-32, 48:-48]
    assert np.median(inner[..., 0]) == shift


def test_block_match_flat_input_yields_zero():
    flat = np.full((64, 64), 128.0, dtype=np.float32)
    flow = estimate_flow_blockmatch(flat, flat)
    assert not flow.any()


def test_block_match_accepts_bgr_frames():
    rng = np.random.default_rng(1)
    frame = rng.integers(0, 256, size=(48, 64, 3), dtype=np.uint8)
    flow = estimate_flow_blockmatch(frame, frame)
    assert flow.shape == (48, 64, 2)
    assert not flow.any()


def test_block_match_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        estimate_flow_blockmatch(np.zeros((10, 10)), np.zeros((10, 12)))


def test_to_gray_luma_weights():
    bgr = np.zeros((1, 3, 3), dtype=np.uint8)
    bgr[0, 0] = [255, 0, 0]
    bgr[0, 1] = [0, 255, 0]
    bgr[0, 2] = [0, 0, 255]
    gray = to_gray(bgr)
    assert np.allclose(gray[0], [0.114 * 255, 0.587 * 255, 0.299 * 255])


def test_endpoint_error_values_and_mask():
    est = np.zeros((2, 2, 2), dtype=np.float32)
    truth = np.zeros((2, 2, 2), dtype=np.float32)
    truth[0, 0] = [3.0, 4.0]  # error 5
    truth[1, 1] = [0.0, 1.0]  # error 1
    err = endpoint_error(est, truth)
    assert isinstance(err, EndpointError)
    assert np.isclose(err.mean, (5 + 1) / 4)
    assert np.isclose(err.median, 0.5)
    masked = endpoint_error(est, truth, mask=truth.any(axis=2))
    assert np.isclose(masked.mean, 3.0)
    assert np.isclose(masked.median, 3.0)
    with pytest.raises(ValueError):
        endpoint_error(est, np.zeros((2, 3, 2)))


def test_iou_matches_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(50):
        a = rng.random((16, 16)) > 0.6
        b = rng.random((16, 16)) > 0.6
        inter = sum(
            1 for y in range(16) for x in range(16) if a[y, x] and b[y, x]
        )
        union = sum(
            1 for y in range(16) for x in range(16) if a[y, x] or b[y, x]
        )
        want = 1.0 if union == 0 else inter / union
        assert np.isclose(iou(a, b), want)
    empty = np.zeros((4, 4), dtype=bool)
    assert iou(empty, empty) == 1.0
    assert iou(empty, ~empty) == 0.0


def test_bounding_box_iou_reference_case():
    a = np.zeros((32, 32), dtype=bool)
    b = np.zeros((32, 32), dtype=bool)
    a[0:10, 0:10] = True
    b[5:15, 5:15] = True
    assert np.isclose(bounding_box_iou(a, b), 25 / 175)
    assert bounding_box_iou(a, a) == 1.0
    empty = np.zeros((32, 32), dtype=bool)
    assert bounding_box_iou(empty, empty) == 1.0
    assert bounding_box_iou(a, empty) == 0.0


def test_bounding_box_ignores_mask_holes():
    a = np.zeros((20, 20), dtype=bool)
    a[2, 2] = a[9, 9] = True  # box spans 2..9 despite sparse pixels
    b = np.zeros((20, 20), dtype=bool)
    b[2:10, 2:10] = True
    assert bounding_box_iou(a, b) == 1.0


def test_benchmark_flow_produces_records_and_csv(tmp_path):
    records = benchmark_flow(resolutions=((64, 48),), samples=3, warmup=1)
    assert [r.method for r in records] == ["engine", "block_match"]
    for r in records:
        assert r.resolution == "64x48"
        assert r.n == 3
        assert r.mean_s > 0
        assert r.ci95_s >= 0
    path = tmp_path / "timings.csv"
    write_timings_csv(records, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["resolution", "method", "mean_s", "ci95_s", "n"]
    assert len(rows) == 3
    assert rows[1][0] == "64x48" and rows[1][1] == "engine"
    assert float(rows[2][2]) > 0
