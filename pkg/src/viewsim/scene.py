"""Scene description model and its JSON document format.

A scene document is plain JSON: categories, objects with primitive or OBJ
geometry, per-object behaviors, the camera track and lighting. Loading and
serializing round-trip exactly (poses are kept as the position/euler pairs
found in the file). Units are meters, seconds and degrees on disk; angles
become radians only inside the math layer.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import meshes
from .geometry import Pose, as_vec3, normalized
from .motion import (
    BehaviorConfig,
    MoverConfig,
    PoltergeistParams,
    RotateParams,
    WanderParams,
)

MAX_CATEGORY_ID = 255  # category view is one byte per pixel, 0 = background
MAX_INSTANCE_ID = (1 << 24) - 1  # object view packs the id into 3 bytes


class SceneParseError(ValueError):
    pass


class SceneValidationError(ValueError):
    pass


@dataclass(frozen=True)
class Category:
    id: int
    name: str


@dataclass(frozen=True)
class Light:
    """Directional light; ``direction`` is where the light travels."""

    direction: tuple[float, float, float] = (-0.4, -1.0, -0.3)
    ambient: float = 0.35

    def direction_unit(self) -> np.ndarray:
        return normalized(as_vec3(self.direction))


@dataclass(frozen=True)
class CameraDefaults:
    near: float = 0.1
    far: float = 50.0
    fov_deg: float = 60.0


PRIMITIVE_KINDS = ("box", "plane", "cylinder", "sphere")


@dataclass(frozen=True)
class Primitive:
    kind: str
    size: tuple[float, ...] = ()

    def build(self) -> meshes.Mesh:
        if self.kind == "box":
            return meshes.box(*self.size)
        if self.kind == "plane":
            return meshes.plane(*self.size)
        if self.kind == "cylinder":
            return meshes.cylinder(*self.size)
        if self.kind == "sphere":
            return meshes.sphere(*self.size)
        raise SceneParseError(f"unknown primitive kind {self.kind!r}")


@dataclass(frozen=True)
class SceneObject:
    name: str
    instance_id: int
    category: int
    pose: Pose
    albedo: tuple[float, float, float]  # BGR, each in [0, 1]
    primitive: Primitive | None = None
    obj_file: str | None = None
    static: bool = False
    mass: float = 1.0
    behaviors: tuple[BehaviorConfig, ...] = ()
    linear_velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    angular_velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def build_mesh(self, base_dir: Path | None = None) -> meshes.Mesh:
        if self.primitive is not None:
            return self.primitive.build()
        path = Path(self.obj_file)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return meshes.load_obj(path)


@dataclass(frozen=True)
class Scene:
    name: str
    categories: tuple[Category, ...]
    objects: tuple[SceneObject, ...]
    mover: MoverConfig
    light: Light = Light()
    camera: CameraDefaults = CameraDefaults()
    seed: int = 0
    base_dir: Path | None = field(default=None, compare=False)

    def category_table(self) -> list[tuple[int, str]]:
        return sorted((c.id, c.name) for c in self.categories)

    def validate(self) -> None:
        cat_ids = [c.id for c in self.categories]
        if len(set(cat_ids)) != len(cat_ids):
            raise SceneValidationError("duplicate category ids")
        for c in self.categories:
            if not 1 <= c.id <= MAX_CATEGORY_ID:
                raise SceneValidationError(f"category id {c.id} outside [1, {MAX_CATEGORY_ID}]")
        known = set(cat_ids)
        ids = [o.instance_id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise SceneValidationError("duplicate object instance ids")
        for o in self.objects:
            if not 1 <= o.instance_id <= MAX_INSTANCE_ID:
                raise SceneValidationError(
                    f"object {o.name!r}: instance id {o.instance_id} outside [1, {MAX_INSTANCE_ID}]"
                )
            if o.category not in known:
                raise SceneValidationError(f"object {o.name!r}: unknown category {o.category}")
            if (o.primitive is None) == (o.obj_file is None):
                raise SceneValidationError(
                    f"object {o.name!r}: needs exactly one of primitive or obj_file"
                )
            if not all(0.0 <= c <= 1.0 for c in o.albedo):
                raise SceneValidationError(f"object {o.name!r}: albedo outside [0, 1]")
            if not (math.isfinite(o.mass) and o.mass > 0):
                raise SceneValidationError(f"object {o.name!r}: mass must be > 0")
            o.pose.validate()
            try:
                for b in o.behaviors:
                    b.validate()
            except ValueError as exc:
                raise SceneValidationError(f"object {o.name!r}: {exc}") from exc
            if o.static and o.behaviors:
                raise SceneValidationError(f"object {o.name!r}: static objects cannot have behaviors")
        try:
            self.mover.validate()
        except ValueError as exc:
            raise SceneValidationError(f"mover: {exc}") from exc
        if not 0.0 <= self.light.ambient <= 1.0:
            raise SceneValidationError("light ambient outside [0, 1]")
        if float(np.linalg.norm(as_vec3(self.light.direction))) < 1e-9:
            raise SceneValidationError("light direction is zero")
        cam = self.camera
        if not (0 < cam.near < cam.far):
            raise SceneValidationError("camera needs 0 < near < far")
        if not (0 < cam.fov_deg < 180):
            raise SceneValidationError("camera fov_deg outside (0, 180)")


def _vec3(value, where: str) -> tuple[float, float, float]:
    try:
        x, y, z = value
        return (float(x), float(y), float(z))
    except (TypeError, ValueError) as exc:
        raise SceneParseError(f"{where}: expected 3 numbers, got {value!r}") from exc


def _pose_from_dict(d: dict, where: str) -> Pose:
    if not isinstance(d, dict):
        raise SceneParseError(f"{where}: pose must be an object")
    position = _vec3(d.get("position", (0.0, 0.0, 0.0)), f"{where}.position")
    euler = _vec3(d.get("euler_deg", (0.0, 0.0, 0.0)), f"{where}.euler_deg")
    return Pose(position, euler)


def _pose_to_dict(p: Pose) -> dict:
    return {"position": list(p.position), "euler_deg": list(p.euler_deg)}


def _range2(value, where: str) -> tuple[float, float]:
    try:
        lo, hi = value
        return (float(lo), float(hi))
    except (TypeError, ValueError) as exc:
        raise SceneParseError(f"{where}: expected [min, max], got {value!r}") from exc


def behavior_from_dict(d: dict, where: str) -> BehaviorConfig:
    kind = d.get("kind")
    if kind == "poltergeist":
        return PoltergeistParams(
            force_impulse=_range2(d.get("force_impulse", (0.5, 2.0)), f"{where}.force_impulse"),
            torque_impulse=_range2(d.get("torque_impulse", (0.5, 2.0)), f"{where}.torque_impulse"),
            interval=_range2(d.get("interval", (1.0, 4.0)), f"{where}.interval"),
            seed=int(d.get("seed", 0)),
        )
    if kind == "wander":
        pts = d.get("waypoints", ())
        return WanderParams(
            waypoints=tuple(_vec3(p, f"{where}.waypoints[{i}]") for i, p in enumerate(pts)),
            speed=float(d.get("speed", 1.0)),
            interval=_range2(d.get("interval", (2.0, 5.0)), f"{where}.interval"),
            seed=int(d.get("seed", 0)),
        )
    if kind == "rotate":
        return RotateParams(
            axis=_vec3(d.get("axis", (0.0, 1.0, 0.0)), f"{where}.axis"),
            angular_speed=float(d.get("angular_speed", 1.0)),
        )
    raise SceneParseError(f"{where}: unknown behavior kind {kind!r}")


def behavior_to_dict(b: BehaviorConfig) -> dict:
    if isinstance(b, PoltergeistParams):
        return {
            "kind": "poltergeist",
            "force_impulse": list(b.force_impulse),
            "torque_impulse": list(b.torque_impulse),
            "interval": list(b.interval),
            "seed": b.seed,
        }
    if isinstance(b, WanderParams):
        return {
            "kind": "wander",
            "waypoints": [list(w) for w in b.waypoints],
            "speed": b.speed,
            "interval": list(b.interval),
            "seed": b.seed,
        }
    if isinstance(b, RotateParams):
        return {"kind": "rotate", "axis": list(b.axis), "angular_speed": b.angular_speed}
    raise TypeError(f"unknown behavior config {type(b).__name__}")


def _object_from_dict(d: dict, index: int) -> SceneObject:
    where = f"objects[{index}]"
    if not isinstance(d, dict):
        raise SceneParseError(f"{where}: expected an object")
    name = str(d.get("name", f"object_{index}"))
    primitive = None
    if "primitive" in d:
        p = d["primitive"]
        if not isinstance(p, dict) or "kind" not in p:
            raise SceneParseError(f"{where}.primitive: expected an object with a kind")
        if p["kind"] not in PRIMITIVE_KINDS:
            raise SceneParseError(f"{where}.primitive: unknown kind {p['kind']!r}")
        size = p.get("size", ())
        if isinstance(size, (int, float)):
            size = (size,)
        primitive = Primitive(str(p["kind"]), tuple(float(s) for s in size))
    obj_file = d.get("obj_file")
    if "category" not in d:
        raise SceneParseError(f"{where}: missing category")
    behaviors = tuple(
        behavior_from_dict(b, f"{where}.behaviors[{i}]")
        for i, b in enumerate(d.get("behaviors", ()))
    )
    return SceneObject(
        name=name,
        instance_id=int(d.get("id", index + 1)),
        category=int(d["category"]),
        pose=_pose_from_dict(d.get("pose", {}), f"{where}.pose"),
        albedo=_vec3(d.get("albedo", (0.7, 0.7, 0.7)), f"{where}.albedo"),
        primitive=primitive,
        obj_file=None if obj_file is None else str(obj_file),
        static=bool(d.get("static", False)),
        mass=float(d.get("mass", 1.0)),
        behaviors=behaviors,
        linear_velocity=_vec3(d.get("linear_velocity", (0.0, 0.0, 0.0)), f"{where}.linear_velocity"),
        angular_velocity=_vec3(
            d.get("angular_velocity", (0.0, 0.0, 0.0)), f"{where}.angular_velocity"
        ),
    )


def _object_to_dict(o: SceneObject) -> dict:
    d: dict = {"name": o.name, "id": o.instance_id}
    if o.primitive is not None:
        d["primitive"] = {"kind": o.primitive.kind, "size": list(o.primitive.size)}
    else:
        d["obj_file"] = o.obj_file
    d["albedo"] = list(o.albedo)
    d["pose"] = _pose_to_dict(o.pose)
    d["category"] = o.category
    d["static"] = o.static
    d["mass"] = o.mass
    if o.behaviors:
        d["behaviors"] = [behavior_to_dict(b) for b in o.behaviors]
    if any(o.linear_velocity):
        d["linear_velocity"] = list(o.linear_velocity)
    if any(o.angular_velocity):
        d["angular_velocity"] = list(o.angular_velocity)
    return d


def parse_scene(doc: dict, base_dir: Path | None = None) -> Scene:
    """Build a validated Scene from a parsed JSON document."""
    if not isinstance(doc, dict):
        raise SceneParseError("scene document must be a JSON object")
    if "name" not in doc:
        raise SceneParseError("scene document missing name")
    try:
        categories = tuple(
            Category(int(c["id"]), str(c["name"])) for c in doc.get("categories", ())
        )
    except (TypeError, KeyError) as exc:
        raise SceneParseError("categories: expected [{id, name}, ...]") from exc
    objects = tuple(_object_from_dict(d, i) for i, d in enumerate(doc.get("objects", ())))
    mover_doc = doc.get("mover")
    if not isinstance(mover_doc, dict) or "waypoints" not in mover_doc:
        raise SceneParseError("mover: expected {waypoints, total_time}")
    mover = MoverConfig(
        waypoints=tuple(
            _pose_from_dict(w, f"mover.waypoints[{i}]")
            for i, w in enumerate(mover_doc["waypoints"])
        ),
        total_time=float(mover_doc.get("total_time", 10.0)),
    )
    light_doc = doc.get("light", {})
    light = Light(
        direction=_vec3(light_doc.get("direction", Light.direction), "light.direction"),
        ambient=float(light_doc.get("ambient", Light.ambient)),
    )
    cam_doc = doc.get("camera", {})
    camera = CameraDefaults(
        near=float(cam_doc.get("near", CameraDefaults.near)),
        far=float(cam_doc.get("far", CameraDefaults.far)),
        fov_deg=float(cam_doc.get("fov_deg", CameraDefaults.fov_deg)),
    )
    scene = Scene(
        name=str(doc["name"]),
        categories=categories,
        objects=objects,
        mover=mover,
        light=light,
        camera=camera,
        seed=int(doc.get("seed", 0)),
        base_dir=base_dir,
    )
    scene.validate()
    return scene


def scene_to_dict(scene: Scene) -> dict:
    return {
        "name": scene.name,
        "seed": scene.seed,
        "categories": [{"id": c.id, "name": c.name} for c in scene.categories],
        "objects": [_object_to_dict(o) for o in scene.objects],
        "mover": {
            "waypoints": [_pose_to_dict(w) for w in scene.mover.waypoints],
            "total_time": scene.mover.total_time,
        },
        "light": {"direction": list(scene.light.direction), "ambient": scene.light.ambient},
        "camera": {
            "near": scene.camera.near,
            "far": scene.camera.far,
            "fov_deg": scene.camera.fov_deg,
        },
    }


def load_scene(path) -> Scene:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SceneParseError(f"{path}: invalid JSON: {exc}") from exc
    return parse_scene(doc, base_dir=path.parent)


def save_scene(scene: Scene, path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2) + "\n")
