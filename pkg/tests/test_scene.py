import copy
import json

import numpy as np
import pytest

from viewsim import catalog
from viewsim.motion import PoltergeistParams, RotateParams, WanderParams
from viewsim.scene import (
    SceneParseError,
    SceneValidationError,
    load_scene,
    parse_scene,
    save_scene,
    scene_to_dict,
)


def minimal_doc():
    return {
        "name": "t",
        "categories": [{"id": 1, "name": "thing"}],
        "objects": [
            {
                "name": "cube",
                "primitive": {"kind": "box", "size": [1, 1, 1]},
                "albedo": [0.5, 0.5, 0.5],
                "pose": {"position": [0, 0, 0], "euler_deg": [0, 0, 0]},
                "category": 1,
            }
        ],
        "mover": {
            "waypoints": [{"position": [0, 1, 3], "euler_deg": [0, 0, 0]}],
            "total_time": 10.0,
        },
    }


def test_builtin_scenes_parse_and_validate():
    scenes = catalog.builtin_scenes()
    assert [s.name for s in scenes] == ["room_simple", "optical"]
    room, optical = scenes
    assert room.category_table()[0] == (1, "floor")
    kinds = {type(b) for o in room.objects for b in o.behaviors}
    assert kinds == {PoltergeistParams, WanderParams}
    assert {type(b) for o in optical.objects for b in o.behaviors} == {RotateParams}
    assert all(not o.static for o in optical.objects)


def test_roundtrip_is_exact():
    for doc in catalog.BUILTIN_DOCUMENTS:
        scene = parse_scene(doc)
        again = parse_scene(scene_to_dict(scene))
        assert scene_to_dict(again) == scene_to_dict(scene)
        assert again == scene


def test_file_roundtrip(tmp_path):
    scene = parse_scene(minimal_doc())
    path = tmp_path / "scene.json"
    save_scene(scene, path)
    loaded = load_scene(path)
    assert scene_to_dict(loaded) == scene_to_dict(scene)
    assert loaded.base_dir == tmp_path


def test_obj_file_resolves_relative_to_scene(tmp_path):
    (tmp_path / "tri.obj").write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
    doc = minimal_doc()
    del doc["objects"][0]["primitive"]
    doc["objects"][0]["obj_file"] = "tri.obj"
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(doc))
    scene = load_scene(path)
    mesh = scene.objects[0].build_mesh(scene.base_dir)
    assert len(mesh.triangles) == 1


def test_instance_ids_default_to_index_plus_one():
    doc = minimal_doc()
    doc["objects"].append(copy.deepcopy(doc["objects"][0]))
    doc["objects"][1]["name"] = "other"
    scene = parse_scene(doc)
    assert [o.instance_id for o in scene.objects] == [1, 2]


def test_initial_velocities_survive_roundtrip():
    doc = minimal_doc()
    doc["objects"][0]["linear_velocity"] = [0.1, 0.0, 0.0]
    scene = parse_scene(doc)
    assert scene.objects[0].linear_velocity == (0.1, 0.0, 0.0)
    out = scene_to_dict(scene)
    assert out["objects"][0]["linear_velocity"] == [0.1, 0.0, 0.0]
    assert "angular_velocity" not in out["objects"][0]


@pytest.mark.parametrize(
    "mutate, error",
    [
        (lambda d: d.pop("name"), SceneParseError),
        (lambda d: d.pop("mover"), SceneParseError),
        (lambda d: d["objects"][0].pop("category"), SceneParseError),
        (lambda d: d["objects"][0].update(category=2), SceneValidationError),
        (lambda d: d["objects"][0].update(id=0), SceneValidationError),
        (lambda d: d["objects"][0].update(albedo=[2.0, 0.0, 0.0]), SceneValidationError),
        (lambda d: d["objects"][0].update(mass=-1.0), SceneValidationError),
        (lambda d: d["categories"].append({"id": 1, "name": "dup"}), SceneValidationError),
        (lambda d: d["categories"].__setitem__(0, {"id": 300, "name": "big"}), SceneValidationError),
        (
            lambda d: d["objects"][0]["primitive"].update(kind="torus"),
            SceneParseError,
        ),
        (
            lambda d: d["objects"][0].update(behaviors=[{"kind": "levitate"}]),
            SceneParseError,
        ),
        (
            lambda d: d["objects"][0].update(
                static=True, behaviors=[{"kind": "rotate", "axis": [0, 1, 0]}]
            ),
            SceneValidationError,
        ),
        (lambda d: d.update(light={"direction": [0, 0, 0], "ambient": 0.3}), SceneValidationError),
        (lambda d: d.update(light={"direction": [0, -1, 0], "ambient": 1.5}), SceneValidationError),
        (lambda d: d.update(camera={"near": 5.0, "far": 1.0}), SceneValidationError),
        (lambda d: d["mover"].update(total_time=-1.0), SceneValidationError),
    ],
)
def test_bad_documents_are_rejected(mutate, error):
    doc = minimal_doc()
    mutate(doc)
    with pytest.raises(error):
        parse_scene(doc)


def test_duplicate_instance_ids_rejected():
    doc = minimal_doc()
    doc["objects"].append(copy.deepcopy(doc["objects"][0]))
    doc["objects"][0]["id"] = 7
    doc["objects"][1]["id"] = 7
    with pytest.raises(SceneValidationError):
        parse_scene(doc)


def test_primitive_and_obj_file_are_exclusive():
    doc = minimal_doc()
    doc["objects"][0]["obj_file"] = "also.obj"
    with pytest.raises(SceneValidationError):
        parse_scene(doc)


def test_invalid_json_reports_path(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(SceneParseError, match="broken.json"):
        load_scene(path)


def test_euler_quaternion_matches_pose():
    doc = minimal_doc()
    doc["objects"][0]["pose"]["euler_deg"] = [10.0, 20.0, 30.0]
    scene = parse_scene(doc)
    q = scene.objects[0].pose.quat()
    assert np.isclose(np.linalg.norm(q), 1.0)
