"""Appearance-based flow estimation, quality metrics and the timing bench.

The block matcher is the comparison point for the engine's analytic motion
field: a coarse-to-fine pyramid of exhaustive SAD searches, the classic
recipe. It only sees pixels, so untextured or rotating surfaces defeat it;
the analytic field has no such failure mode, which is exactly what the
benchmark is meant to show.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .catalog import builtin_scenes
from .scene import Scene
from .motion import waypoint_kinematics
from .render import CameraIntrinsics, CameraMotion, SceneGeometry, render_views
from .world import World

BENCH_RESOLUTIONS = (
    (160, 120),
    (256, 192),
    (320, 240),
    (512, 384),
    (640, 480),
    (800, 600),
)


@dataclass(frozen=True)
class BlockMatchParams:
    block_size: int = 8
    search_radius: int = 4
    levels: int = 3

    def max_displacement(self) -> int:
        return self.search_radius * (2**self.levels - 1)


def to_gray(image: np.ndarray) -> np.ndarray:
    """BGR uint8 to float32 luma; float 2D images pass through."""
    if image.ndim == 2:
        return image.astype(np.float32)
    b = image[..., 0].astype(np.float32)
    g = image[..., 1].astype(np.float32)
    r = image[..., 2].astype(np.float32)
    return 0.114 * b + 0.587 * g + 0.299 * r


def _downsample(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    if h % 2 or w % 2:
        img = np.pad(img, ((0, h % 2), (0, w % 2)), mode="edge")
        h, w = img.shape
    return img.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def _search_offsets(radius: int) -> list[tuple[int, int]]:
    # nearest-first so a flat cost surface settles on zero displacement
    offsets = [
        (dy, dx) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)
    ]
    offsets.sort(key=lambda d: (d[0] * d[0] + d[1] * d[1], d[0], d[1]))
    return offsets


def _match_level(prev: np.ndarray, curr: np.ndarray, init: np.ndarray, params) -> np.ndarray:
    """Best integer offset per block, seeded by the coarser level's field.

    init is (nby, nbx, 2) in (dx, dy) order like all flow here; the return
    has the same layout. Blocks are anchored on the previous frame.
    """
    bs = params.block_size
    radius = params.search_radius
    h, w = prev.shape
    nby = -(-h // bs)
    nbx = -(-w // bs)
    pad_y = nby * bs - h
    pad_x = nbx * bs - w
    prev_p = np.pad(prev, ((0, pad_y), (0, pad_x)), mode="edge")
    blocks = prev_p.reshape(nby, bs, nbx, bs).transpose(0, 2, 1, 3).reshape(-1, bs, bs)

    init_dx = np.rint(init[..., 0]).astype(np.int64).ravel()
    init_dy = np.rint(init[..., 1]).astype(np.int64).ravel()
    margin = int(np.abs(np.concatenate([init_dx, init_dy])).max(initial=0)) + radius
    curr_p = np.pad(
        np.pad(curr, ((0, pad_y), (0, pad_x)), mode="edge"), margin, mode="edge"
    )

    base_y = (np.repeat(np.arange(nby), nbx) * bs + init_dy + margin)[:, None, None]
    base_x = (np.tile(np.arange(nbx), nby) * bs + init_dx + margin)[:, None, None]
    rows = np.arange(bs)[None, :, None]
    cols = np.arange(bs)[None, None, :]

    best_cost = np.full(nby * nbx, np.inf, dtype=np.float64)
    best_dy = np.zeros(nby * nbx, dtype=np.int64)
    best_dx = np.zeros(nby * nbx, dtype=np.int64)
    for dy, dx in _search_offsets(radius):
        windows = curr_p[base_y + dy + rows, base_x + dx + cols]
        cost = np.abs(windows - blocks).sum(axis=(1, 2))
        better = cost < best_cost
        best_cost[better] = cost[better]
        best_dy[better] = dy
        best_dx[better] = dx

    out = np.empty((nby, nbx, 2), dtype=np.float64)
    out[..., 0] = (init_dx + best_dx).reshape(nby, nbx)
    out[..., 1] = (init_dy + best_dy).reshape(nby, nbx)
    return out


def estimate_flow_blockmatch(
    prev: np.ndarray, curr: np.ndarray, params: BlockMatchParams | None = None
) -> np.ndarray:
    """Estimate per-pixel displacement (in px) from prev to curr.

    Coarse-to-fine: each level doubles and reuses the field below it, so the
    reachable displacement is search_radius * (2**levels - 1) pixels.
    """
    params = params or BlockMatchParams()
    prev_g = to_gray(prev)
    curr_g = to_gray(curr)
    if prev_g.shape != curr_g.shape:
        raise ValueError("frames must share a shape")
    pyramid = [(prev_g, curr_g)]
    for _ in range(params.levels - 1):
        p, c = pyramid[-1]
        pyramid.append((_downsample(p), _downsample(c)))

    bs = params.block_size
    field: np.ndarray | None = None
    for p, c in reversed(pyramid):
        nby = -(-p.shape[0] // bs)
        nbx = -(-p.shape[1] // bs)
        if field is None:
            init = np.zeros((nby, nbx, 2), dtype=np.float64)
        else:
            # double the coarser field and sample it at this level's blocks
            up = 2.0 * np.repeat(np.repeat(field, 2, axis=0), 2, axis=1)
            init = up[:nby, :nbx]
            if init.shape[0] < nby or init.shape[1] < nbx:
                init = np.pad(
                    init,
                    ((0, nby - init.shape[0]), (0, nbx - init.shape[1]), (0, 0)),
                    mode="edge",
                )
        field = _match_level(p, c, init, params)

    h, w = prev_g.shape
    dense = np.repeat(np.repeat(field, bs, axis=0), bs, axis=1)[:h, :w]
    return dense.astype(np.float32)


# --- metrics -----------------------------------------------------------------


@dataclass(frozen=True)
class EndpointError:
    mean: float
    median: float


def endpoint_error(estimate: np.ndarray, truth: np.ndarray, mask: np.ndarray | None = None):
    """Euclidean per-pixel error between two flow fields."""
    if estimate.shape != truth.shape:
        raise ValueError("flow fields must share a shape")
    err = np.linalg.norm(estimate.astype(np.float64) - truth.astype(np.float64), axis=2)
    if mask is not None:
        err = err[mask]
    if err.size == 0:
        return EndpointError(0.0, 0.0)
    return EndpointError(float(err.mean()), float(np.median(err)))


def iou(mask_a: np.ndarray, mask_b: np.ndarray) -> float:
    a = mask_a.astype(bool)
    b = mask_b.astype(bool)
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0  # vacuously identical
    return float(np.logical_and(a, b).sum() / union)


def _tight_box(mask: np.ndarray):
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        return None
    return int(ys.min()), int(xs.min()), int(ys.max()), int(xs.max())


def bounding_box_iou(mask_a: np.ndarray, mask_b: np.ndarray) -> float:
    """IoU of the tight axis-aligned boxes around two masks (inclusive pixels)."""
    box_a = _tight_box(np.asarray(mask_a).astype(bool))
    box_b = _tight_box(np.asarray(mask_b).astype(bool))
    if box_a is None and box_b is None:
        return 1.0
    if box_a is None or box_b is None:
        return 0.0
    ay0, ax0, ay1, ax1 = box_a
    by0, bx0, by1, bx1 = box_b
    iy = max(0, min(ay1, by1) - max(ay0, by0) + 1)
    ix = max(0, min(ax1, bx1) - max(ax0, bx0) + 1)
    inter = iy * ix
    area_a = (ay1 - ay0 + 1) * (ax1 - ax0 + 1)
    area_b = (by1 - by0 + 1) * (bx1 - bx0 + 1)
    return float(inter / (area_a + area_b - inter))


# --- timing ------------------------------------------------------------------


@dataclass(frozen=True)
class TimingRecord:
    resolution: str
    method: str
    mean_s: float
    ci95_s: float
    n: int


def _confidence_halfwidth(samples: np.ndarray) -> float:
    n = len(samples)
    if n < 2:
        return 0.0
    return float(stats.t.ppf(0.975, n - 1) * samples.std(ddof=1) / np.sqrt(n))


class _FrameSource:
    """Renders a scene along its camera track; defaults to the spinning solids."""

    def __init__(self, width: int, height: int, scene: Scene | None = None):
        if scene is None:
            scene = builtin_scenes()[1]
        self.scene = scene
        self.geometry = SceneGeometry(scene)
        self.world = World(scene)
        self.intr = CameraIntrinsics.from_fov(
            width, height, scene.camera.fov_deg, scene.camera.near, scene.camera.far
        )

    def advance(self, dt: float = 1.0 / 60.0) -> None:
        self.world.step(dt)

    def camera(self) -> CameraMotion:
        pose, v, omega = waypoint_kinematics(self.scene.mover, self.world.time)
        return CameraMotion(pose.position, pose.orientation, v, omega)

    def render(self, views) -> dict:
        return render_views(
            self.geometry, self.world.snapshot(), self.camera(), self.intr, views=views
        )


def benchmark_flow(
    resolutions=BENCH_RESOLUTIONS,
    samples: int = 100,
    warmup: int = 5,
    params: BlockMatchParams | None = None,
    scene: Scene | None = None,
) -> list[TimingRecord]:
    """Time the analytic engine against block matching, per resolution.

    Engine samples include rasterization and the motion-field pass. Block
    matching is timed on estimation only; its frame pairs are rendered
    outside the clock. Reported means carry a 95% t-interval.
    """
    params = params or BlockMatchParams()
    records = []
    for width, height in resolutions:
        label = f"{width}x{height}"

        source = _FrameSource(width, height, scene)
        engine_times = []
        for i in range(warmup + samples):
            source.advance()
            t0 = time.perf_counter()
            source.render(("flow",))
            elapsed = time.perf_counter() - t0
            if i >= warmup:
                engine_times.append(elapsed)
        engine = np.array(engine_times)
        records.append(
            TimingRecord(label, "engine", float(engine.mean()), _confidence_halfwidth(engine), samples)
        )

        source = _FrameSource(width, height, scene)
        match_times = []
        prev = to_gray(source.render(("main",))["main"])
        for i in range(warmup + samples):
            source.advance()
            curr = to_gray(source.render(("main",))["main"])
            t0 = time.perf_counter()
            estimate_flow_blockmatch(prev, curr, params)
            elapsed = time.perf_counter() - t0
            if i >= warmup:
                match_times.append(elapsed)
            prev = curr
        match = np.array(match_times)
        records.append(
            TimingRecord(label, "block_match", float(match.mean()), _confidence_halfwidth(match), samples)
        )
    return records


def write_timings_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["resolution", "method", "mean_s", "ci95_s", "n"])
        for r in records:
            writer.writerow([r.resolution, r.method, f"{r.mean_s:.6f}", f"{r.ci95_s:.6f}", r.n])
