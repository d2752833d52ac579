"""Software renderer: rasterization into a G-buffer and the five views.

Conventions. World space is right-handed with +y up and the camera looking
down its local -z. Projection space flips that to X right, Y down, Z
forward, so a pixel (x, y) with depth Z un-projects to
X = (x + 0.5 - cx) * Z / fx, Y = (y + 0.5 - cy) * Z / fy; pixel centers sit
at half-integer coordinates. The motion field is the exact instantaneous
image velocity in pixels per second, y pointing down, background (0, 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import quat_to_matrix, round_half_away
from .scene import Scene
from .world import Snapshot

VIEW_NAMES = ("main", "category", "object", "flow", "depth")

# world -> projection-space axis flip (self-inverse)
FLIP = np.diag([1.0, -1.0, -1.0])


@dataclass(frozen=True)
class CameraIntrinsics:
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    near: float
    far: float

    @classmethod
    def from_fov(
        cls, width: int, height: int, fov_deg: float, near: float, far: float
    ) -> "CameraIntrinsics":
        # square pixels; fov_deg is the vertical field of view
        fy = (height / 2.0) / math.tan(math.radians(fov_deg) / 2.0)
        return cls(width, height, fy, fy, width / 2.0, height / 2.0, near, far)


@dataclass
class CameraMotion:
    """Camera pose plus world-frame velocities at the rendered instant."""

    position: np.ndarray
    orientation: np.ndarray  # (w, x, y, z), camera-local -> world
    linear_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass
class ObjectFrame:
    """One drawable object resolved to its world transform for a frame."""

    instance_id: int
    category: int
    albedo: np.ndarray  # (3,) BGR in [0, 1]
    vertices: np.ndarray  # (V, 3) object-local
    normals: np.ndarray  # (V, 3) object-local unit
    triangles: np.ndarray  # (T, 3) int
    position: np.ndarray
    orientation: np.ndarray
    linear_velocity: np.ndarray
    angular_velocity: np.ndarray


@dataclass
class GBuffer:
    instance_ids: np.ndarray  # (H, W) int32, 0 = background
    positions: np.ndarray  # (H, W, 3) float32, projection space
    normals: np.ndarray  # (H, W, 3) float32, world space unit
    albedo: np.ndarray  # (H, W, 3) float32 BGR


class SceneGeometry:
    """Per-scene immutable render data: meshes built once, color/category maps."""

    def __init__(self, scene: Scene):
        self.scene = scene
        self.meshes = {}
        self.static_ids = []
        for obj in scene.objects:
            mesh = obj.build_mesh(scene.base_dir)
            mesh.validate()
            self.meshes[obj.instance_id] = mesh
            if obj.static:
                self.static_ids.append(obj.instance_id)
        self.objects = {o.instance_id: o for o in scene.objects}
        self.category_of = {o.instance_id: o.category for o in scene.objects}


def prepare_scene(scene: Scene) -> SceneGeometry:
    return SceneGeometry(scene)


def assemble_frame(geometry: SceneGeometry, snapshot: Snapshot) -> list[ObjectFrame]:
    """Resolve every object to its world transform: static objects from the
    scene description, dynamic ones from the snapshot."""
    frames: list[ObjectFrame] = []
    dynamic = {int(iid): row for row, iid in enumerate(snapshot.instance_ids)}
    zeros = np.zeros(3)
    for obj in geometry.scene.objects:
        mesh = geometry.meshes[obj.instance_id]
        row = dynamic.get(obj.instance_id)
        if row is None:
            rigid = obj.pose.to_rigid()
            position, orientation = rigid.position, rigid.orientation
            lin = ang = zeros
        else:
            position = snapshot.positions[row]
            orientation = snapshot.orientations[row]
            lin = snapshot.linear_velocities[row]
            ang = snapshot.angular_velocities[row]
        frames.append(
            ObjectFrame(
                instance_id=obj.instance_id,
                category=obj.category,
                albedo=np.asarray(obj.albedo, dtype=np.float64),
                vertices=mesh.vertices,
                normals=mesh.normals,
                triangles=mesh.triangles,
                position=position,
                orientation=orientation,
                linear_velocity=lin,
                angular_velocity=ang,
            )
        )
    return frames


def _clip_near(points: np.ndarray, normals: np.ndarray, near: float):
    """Sutherland-Hodgman against the Z = near plane in projection space.

    Camera-space positions are affine along an edge, so straight lerp of both
    attributes is exact for positions and adequate for normals (renormalized
    after interpolation).
    """
    out_p: list[np.ndarray] = []
    out_n: list[np.ndarray] = []
    count = len(points)
    for i in range(count):
        a, b = points[i], points[(i + 1) % count]
        na, nb = normals[i], normals[(i + 1) % count]
        a_in = a[2] >= near
        b_in = b[2] >= near
        if a_in:
            out_p.append(a)
            out_n.append(na)
        if a_in != b_in:
            t = (near - a[2]) / (b[2] - a[2])
            out_p.append(a + t * (b - a))
            out_n.append(na + t * (nb - na))
    return out_p, out_n


def rasterize(frames: list[ObjectFrame], camera: CameraMotion, intr: CameraIntrinsics) -> GBuffer:
    h, w = intr.height, intr.width
    depth = np.full((h, w), np.inf, dtype=np.float64)
    ids = np.zeros((h, w), dtype=np.int32)
    positions = np.zeros((h, w, 3), dtype=np.float64)
    normals = np.zeros((h, w, 3), dtype=np.float64)
    albedo = np.zeros((h, w, 3), dtype=np.float64)

    view = FLIP @ quat_to_matrix(camera.orientation).T  # world -> projection space
    cam_pos = np.asarray(camera.position, dtype=np.float64)

    for obj in frames:
        rot = quat_to_matrix(obj.orientation)
        verts_world = obj.position + obj.vertices @ rot.T
        verts_cam = (verts_world - cam_pos) @ view.T
        normals_world = obj.normals @ rot.T
        for tri in obj.triangles:
            pts = verts_cam[tri]
            if np.all(pts[:, 2] < intr.near):
                continue
            if np.any(pts[:, 2] < intr.near):
                poly_p, poly_n = _clip_near(pts, normals_world[tri], intr.near)
                if len(poly_p) < 3:
                    continue
            else:
                poly_p, poly_n = list(pts), list(normals_world[tri])
            for k in range(1, len(poly_p) - 1):
                _raster_triangle(
                    depth,
                    ids,
                    positions,
                    normals,
                    albedo,
                    (poly_p[0], poly_p[k], poly_p[k + 1]),
                    (poly_n[0], poly_n[k], poly_n[k + 1]),
                    obj,
                    intr,
                )

    length = np.linalg.norm(normals, axis=2, keepdims=True)
    np.divide(normals, length, out=normals, where=length > 0)
    return GBuffer(
        instance_ids=ids,
        positions=positions.astype(np.float32),
        normals=normals.astype(np.float32),
        albedo=albedo.astype(np.float32),
    )


def _raster_triangle(depth, ids, positions, normals, albedo, pts, nrm, obj, intr) -> None:
    (p0, p1, p2) = pts
    z0, z1, z2 = p0[2], p1[2], p2[2]
    u0 = intr.fx * p0[0] / z0 + intr.cx
    v0 = intr.fy * p0[1] / z0 + intr.cy
    u1 = intr.fx * p1[0] / z1 + intr.cx
    v1 = intr.fy * p1[1] / z1 + intr.cy
    u2 = intr.fx * p2[0] / z2 + intr.cx
    v2 = intr.fy * p2[1] / z2 + intr.cy

    area = (u1 - u0) * (v2 - v0) - (v1 - v0) * (u2 - u0)
    if abs(area) < 1e-12:
        return
    x0 = max(0, int(math.floor(min(u0, u1, u2) - 0.5)))
    x1 = min(intr.width, int(math.ceil(max(u0, u1, u2) + 0.5)))
    y0 = max(0, int(math.floor(min(v0, v1, v2) - 0.5)))
    y1 = min(intr.height, int(math.ceil(max(v0, v1, v2) + 0.5)))
    if x0 >= x1 or y0 >= y1:
        return

    px = np.arange(x0, x1, dtype=np.float64) + 0.5
    py = (np.arange(y0, y1, dtype=np.float64) + 0.5)[:, None]
    # barycentric weights; dividing by the signed area makes both windings work
    w0 = ((u2 - u1) * (py - v1) - (v2 - v1) * (px - u1)) / area
    w1 = ((u0 - u2) * (py - v2) - (v0 - v2) * (px - u2)) / area
    w2 = ((u1 - u0) * (py - v0) - (v1 - v0) * (px - u0)) / area
    mask = (w0 >= 0.0) & (w1 >= 0.0) & (w2 >= 0.0)
    if not mask.any():
        return

    inv_z = w0 / z0 + w1 / z1 + w2 / z2
    with np.errstate(divide="ignore"):
        z = 1.0 / inv_z
    mask &= z <= intr.far

    ly, lx = np.nonzero(mask)
    if ly.size == 0:
        return
    zv = z[ly, lx]
    gy = ly + y0
    gx = lx + x0
    closer = zv < depth[gy, gx]
    if not closer.any():
        return
    gy, gx, zv = gy[closer], gx[closer], zv[closer]
    ly, lx = ly[closer], lx[closer]

    depth[gy, gx] = zv
    ids[gy, gx] = obj.instance_id
    albedo[gy, gx] = obj.albedo
    # perspective-correct normal; renormalized once at the end of the pass
    n = (
        (w0[ly, lx] / z0)[:, None] * nrm[0]
        + (w1[ly, lx] / z1)[:, None] * nrm[1]
        + (w2[ly, lx] / z2)[:, None] * nrm[2]
    ) * zv[:, None]
    normals[gy, gx] = n
    positions[gy, gx, 0] = (gx + 0.5 - intr.cx) * zv / intr.fx
    positions[gy, gx, 1] = (gy + 0.5 - intr.cy) * zv / intr.fy
    positions[gy, gx, 2] = zv


def shade_main(gbuffer: GBuffer, light_direction: np.ndarray, ambient: float) -> np.ndarray:
    """Lambert with a directional light and an ambient floor; BGR uint8."""
    lambert = np.maximum(0.0, -(gbuffer.normals @ np.asarray(light_direction, dtype=np.float64)))
    intensity = ambient + lambert * (1.0 - ambient)
    color = gbuffer.albedo * intensity[..., None] * 255.0
    out = np.clip(round_half_away(color), 0, 255).astype(np.uint8)
    out[gbuffer.instance_ids == 0] = 0
    return out


def category_view(gbuffer: GBuffer, category_of: dict[int, int]) -> np.ndarray:
    out = np.zeros(gbuffer.instance_ids.shape, dtype=np.uint8)
    for iid, cat in category_of.items():
        out[gbuffer.instance_ids == iid] = cat
    return out


def instance_view(gbuffer: GBuffer) -> np.ndarray:
    """Instance id in the low 24 bits, little-endian across B, G, R."""
    ids = gbuffer.instance_ids.astype(np.uint32)
    out = np.empty((*ids.shape, 3), dtype=np.uint8)
    out[..., 0] = ids & 0xFF
    out[..., 1] = (ids >> 8) & 0xFF
    out[..., 2] = (ids >> 16) & 0xFF
    return out


def depth_view(gbuffer: GBuffer, near: float, far: float) -> np.ndarray:
    """255 at the near plane down to 0 at the far plane; background 0."""
    z = gbuffer.positions[..., 2].astype(np.float64)
    scaled = round_half_away(255.0 * (far - z) / (far - near))
    out = np.clip(scaled, 0, 255).astype(np.uint8)
    out[gbuffer.instance_ids == 0] = 0
    return out


def compute_flow(
    gbuffer: GBuffer, frames: list[ObjectFrame], camera: CameraMotion, intr: CameraIntrinsics
) -> np.ndarray:
    """Exact instantaneous image velocity (px/s) per covered pixel.

    A surface point attached to body b moves with
    v_b + omega_b x (P_world - center_b); subtracting the camera's own
    linear and angular motion and differentiating the projection gives the
    pixel-space rate. Everything is evaluated analytically, no frame pairs.
    """
    h, w = gbuffer.instance_ids.shape
    flow = np.zeros((h, w, 2), dtype=np.float32)
    rot_cam = quat_to_matrix(camera.orientation)
    view = FLIP @ rot_cam.T
    unview = rot_cam @ FLIP  # projection space -> world direction
    cam_pos = np.asarray(camera.position, dtype=np.float64)
    v_cam = np.asarray(camera.linear_velocity, dtype=np.float64)
    w_cam_view = view @ np.asarray(camera.angular_velocity, dtype=np.float64)

    for obj in frames:
        mask = gbuffer.instance_ids == obj.instance_id
        if not mask.any():
            continue
        p = gbuffer.positions[mask].astype(np.float64)
        p_world = cam_pos + p @ unview.T
        p_world_dot = obj.linear_velocity + np.cross(
            np.broadcast_to(obj.angular_velocity, p_world.shape), p_world - obj.position
        )
        p_dot = (p_world_dot - v_cam) @ view.T - np.cross(
            np.broadcast_to(w_cam_view, p.shape), p
        )
        z = p[:, 2]
        vx = intr.fx * (p_dot[:, 0] * z - p[:, 0] * p_dot[:, 2]) / (z * z)
        vy = intr.fy * (p_dot[:, 1] * z - p[:, 1] * p_dot[:, 2]) / (z * z)
        flow[mask] = np.stack([vx, vy], axis=1).astype(np.float32)
    return flow


def flow_to_hsv(flow: np.ndarray) -> np.ndarray:
    """Direction as hue, magnitude as value normalized to the frame peak.

    Full saturation everywhere; an all-zero field renders black. Returns BGR
    uint8 for direct PNG export.
    """
    vx = flow[..., 0].astype(np.float64)
    vy = flow[..., 1].astype(np.float64)
    mag = np.hypot(vx, vy)
    peak = float(mag.max()) if mag.size else 0.0
    if peak <= 0.0:
        return np.zeros((*mag.shape, 3), dtype=np.uint8)
    val = np.minimum(mag / peak, 1.0)
    hue = np.degrees(np.arctan2(vy, vx)) % 360.0
    hp = hue / 60.0
    sextant = np.floor(hp).astype(np.int64) % 6
    f = hp - np.floor(hp)
    q = val * (1.0 - f)
    t = val * f
    zero = np.zeros_like(val)
    r = np.choose(sextant, [val, q, zero, zero, t, val])
    g = np.choose(sextant, [t, val, val, q, zero, zero])
    b = np.choose(sextant, [zero, zero, t, val, val, q])
    bgr = np.stack([b, g, r], axis=-1) * 255.0
    return np.clip(round_half_away(bgr), 0, 255).astype(np.uint8)


def render_views(
    geometry: SceneGeometry,
    snapshot: Snapshot,
    camera: CameraMotion,
    intr: CameraIntrinsics,
    views=VIEW_NAMES,
) -> dict[str, np.ndarray]:
    """Render the requested views from one snapshot; keys in canonical order."""
    frames = assemble_frame(geometry, snapshot)
    gbuffer = rasterize(frames, camera, intr)
    scene = geometry.scene
    out: dict[str, np.ndarray] = {}
    for name in VIEW_NAMES:
        if name not in views:
            continue
        if name == "main":
            out[name] = shade_main(gbuffer, scene.light.direction_unit(), scene.light.ambient)
        elif name == "category":
            out[name] = category_view(gbuffer, geometry.category_of)
        elif name == "object":
            out[name] = instance_view(gbuffer)
        elif name == "flow":
            out[name] = compute_flow(gbuffer, frames, camera, intr)
        elif name == "depth":
            out[name] = depth_view(gbuffer, scene.camera.near, scene.camera.far)
    return out
