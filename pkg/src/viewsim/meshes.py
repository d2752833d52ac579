"""Triangle mesh container and procedural primitives.

Primitives use fixed tessellation (cylinder 32 segments, sphere 16x32) so
rendered output is reproducible across runs. Vertices are object-local,
centered on the origin; winding is counter-clockwise seen from outside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CYLINDER_SEGMENTS = 32
SPHERE_RINGS = 16
SPHERE_SECTORS = 32


class MeshError(ValueError):
    pass


@dataclass(eq=False)
class Mesh:
    vertices: np.ndarray  # (V, 3) float64
    triangles: np.ndarray  # (T, 3) int32
    normals: np.ndarray  # (V, 3) float64, unit length

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64)
        self.triangles = np.asarray(self.triangles, dtype=np.int32)
        self.normals = np.asarray(self.normals, dtype=np.float64)

    def validate(self) -> None:
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshError("vertices must be (V, 3)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshError("triangles must be (T, 3)")
        if len(self.triangles) < 1:
            raise MeshError("mesh needs at least one triangle")
        if self.normals.shape != self.vertices.shape:
            raise MeshError("normals must match vertices")
        if not np.isfinite(self.vertices).all() or not np.isfinite(self.normals).all():
            raise MeshError("non-finite mesh data")
        if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
            raise MeshError("triangle index out of range")
        lengths = np.linalg.norm(self.normals, axis=1)
        if np.abs(lengths - 1.0).max() > 1e-4:
            raise MeshError("normals must be unit length")


def _quad(tris: list, a: int, b: int, c: int, d: int) -> None:
    tris.append((a, b, c))
    tris.append((a, c, d))


def box(sx: float, sy: float, sz: float) -> Mesh:
    """Axis-aligned box; 4 vertices per face so each face is flat shaded."""
    hx, hy, hz = sx / 2.0, sy / 2.0, sz / 2.0
    faces = [
        # (normal, four corners counter-clockwise seen from outside)
        ((0, 0, 1), [(-hx, -hy, hz), (hx, -hy, hz), (hx, hy, hz), (-hx, hy, hz)]),
        ((0, 0, -1), [(hx, -hy, -hz), (-hx, -hy, -hz), (-hx, hy, -hz), (hx, hy, -hz)]),
        ((1, 0, 0), [(hx, -hy, hz), (hx, -hy, -hz), (hx, hy, -hz), (hx, hy, hz)]),
        ((-1, 0, 0), [(-hx, -hy, -hz), (-hx, -hy, hz), (-hx, hy, hz), (-hx, hy, -hz)]),
        ((0, 1, 0), [(-hx, hy, hz), (hx, hy, hz), (hx, hy, -hz), (-hx, hy, -hz)]),
        ((0, -1, 0), [(-hx, -hy, -hz), (hx, -hy, -hz), (hx, -hy, hz), (-hx, -hy, hz)]),
    ]
    verts, norms, tris = [], [], []
    for normal, corners in faces:
        base = len(verts)
        verts.extend(corners)
        norms.extend([normal] * 4)
        _quad(tris, base, base + 1, base + 2, base + 3)
    return Mesh(np.array(verts, dtype=np.float64), np.array(tris), np.array(norms, dtype=np.float64))


def plane(sx: float, sz: float) -> Mesh:
    """Rectangle in the XZ plane facing +y."""
    hx, hz = sx / 2.0, sz / 2.0
    verts = np.array([(-hx, 0, hz), (hx, 0, hz), (hx, 0, -hz), (-hx, 0, -hz)], dtype=np.float64)
    norms = np.tile((0.0, 1.0, 0.0), (4, 1))
    tris = []
    _quad(tris, 0, 1, 2, 3)
    return Mesh(verts, np.array(tris), norms)


def cylinder(radius: float, height: float, segments: int = CYLINDER_SEGMENTS) -> Mesh:
    """Cylinder along +y with smooth sides and flat caps."""
    h = height / 2.0
    angles = 2.0 * math.pi * np.arange(segments) / segments
    ca, sa = np.cos(angles), np.sin(angles)
    verts, norms, tris = [], [], []

    # side: bottom ring then top ring, outward normals
    for y in (-h, h):
        for c, s in zip(ca, sa):
            verts.append((radius * c, y, radius * s))
            norms.append((c, 0.0, s))
    for i in range(segments):
        j = (i + 1) % segments
        # outward-facing winding (+z at angle 0 faces viewer on the -z side)
        _quad(tris, i, segments + i, segments + j, j)

    # caps: center plus ring, flat normals
    for y, ny in ((h, 1.0), (-h, -1.0)):
        center = len(verts)
        verts.append((0.0, y, 0.0))
        norms.append((0.0, ny, 0.0))
        ring = len(verts)
        for c, s in zip(ca, sa):
            verts.append((radius * c, y, radius * s))
            norms.append((0.0, ny, 0.0))
        for i in range(segments):
            j = (i + 1) % segments
            if ny > 0:
                tris.append((center, ring + j, ring + i))
            else:
                tris.append((center, ring + i, ring + j))
    return Mesh(np.array(verts, dtype=np.float64), np.array(tris), np.array(norms, dtype=np.float64))


def sphere(radius: float, rings: int = SPHERE_RINGS, sectors: int = SPHERE_SECTORS) -> Mesh:
    """UV sphere with smooth per-vertex normals."""
    verts, norms = [], []
    for r in range(rings + 1):
        phi = math.pi * r / rings  # 0 at +y pole
        for s in range(sectors + 1):
            theta = 2.0 * math.pi * s / sectors
            n = (
                math.sin(phi) * math.cos(theta),
                math.cos(phi),
                math.sin(phi) * math.sin(theta),
            )
            norms.append(n)
            verts.append((radius * n[0], radius * n[1], radius * n[2]))
    tris = []
    row = sectors + 1
    for r in range(rings):
        for s in range(sectors):
            a = r * row + s
            b = a + row
            if r > 0:
                tris.append((a, a + 1, b))
            if r < rings - 1:
                tris.append((a + 1, b + 1, b))
    return Mesh(np.array(verts, dtype=np.float64), np.array(tris), np.array(norms, dtype=np.float64))


def load_obj(path: str | Path) -> Mesh:
    """Minimal Wavefront OBJ reader: triangulated faces, positions and normals.

    Faces may reference normals (v//vn or v/vt/vn). When a face carries no
    normal indices the face normal is used for its corners.
    """
    positions: list[tuple[float, float, float]] = []
    file_normals: list[tuple[float, float, float]] = []
    verts: list[tuple[float, float, float]] = []
    norms: list[tuple[float, float, float]] = []
    tris: list[tuple[int, int, int]] = []
    cache: dict[tuple[int, int], int] = {}

    def corner(vi: int, ni: int | None, fallback) -> int:
        key = (vi, -1 if ni is None else ni)
        if key in cache and ni is not None:
            return cache[key]
        idx = len(verts)
        verts.append(positions[vi])
        norms.append(file_normals[ni] if ni is not None else fallback)
        if ni is not None:
            cache[key] = idx
        return idx

    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise MeshError(f"cannot read OBJ file {path}: {exc}") from exc
    for line in text.splitlines():
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "v":
            positions.append((float(parts[1]), float(parts[2]), float(parts[3])))
        elif parts[0] == "vn":
            n = np.array([float(parts[1]), float(parts[2]), float(parts[3])])
            n = n / max(np.linalg.norm(n), 1e-12)
            file_normals.append((n[0], n[1], n[2]))
        elif parts[0] == "f":
            refs = []
            for token in parts[1:]:
                fields = token.split("/")
                vi = int(fields[0])
                vi = vi - 1 if vi > 0 else len(positions) + vi
                ni = None
                if len(fields) >= 3 and fields[2]:
                    ni = int(fields[2])
                    ni = ni - 1 if ni > 0 else len(file_normals) + ni
                refs.append((vi, ni))
            if len(refs) < 3:
                raise MeshError(f"face with {len(refs)} vertices in {path}")
            # fan-triangulate; compute a face normal as the no-normal fallback
            for k in range(1, len(refs) - 1):
                ring = [refs[0], refs[k], refs[k + 1]]
                p = [np.array(positions[vi]) for vi, _ in ring]
                fn = np.cross(p[1] - p[0], p[2] - p[0])
                fl = np.linalg.norm(fn)
                fn = tuple(fn / fl) if fl > 1e-12 else (0.0, 1.0, 0.0)
                tris.append(tuple(corner(vi, ni, fn) for vi, ni in ring))

    mesh = Mesh(np.array(verts, dtype=np.float64), np.array(tris), np.array(norms, dtype=np.float64))
    mesh.validate()
    return mesh
