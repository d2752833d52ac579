"""Built-in scene documents.

Two scenes ship with the server: a small furnished room with wandering and
randomly shoved props, and a minimal rig of rotating solids with uniform
colors for motion-field work. Both are plain scene documents, so they also
serve as format examples for user scenes.
"""

from __future__ import annotations

from .scene import Scene, parse_scene

ROOM_SIMPLE = {
    "name": "room_simple",
    "seed": 1234,
    "categories": [
        {"id": 1, "name": "floor"},
        {"id": 2, "name": "table"},
        {"id": 3, "name": "chair"},
        {"id": 4, "name": "toy"},
        {"id": 5, "name": "crate"},
    ],
    "objects": [
        {
            "name": "floor",
            "primitive": {"kind": "plane", "size": [10.0, 10.0]},
            "albedo": [0.55, 0.6, 0.62],
            "pose": {"position": [0.0, 0.0, 0.0], "euler_deg": [0.0, 0.0, 0.0]},
            "category": 1,
            "static": True,
        },
        {
            "name": "table",
            "primitive": {"kind": "box", "size": [1.4, 0.75, 0.8]},
            "albedo": [0.25, 0.45, 0.65],
            "pose": {"position": [0.8, 0.375, -0.8], "euler_deg": [0.0, 0.0, 0.0]},
            "category": 2,
            "static": True,
        },
        {
            "name": "chair",
            "primitive": {"kind": "box", "size": [0.45, 0.9, 0.45]},
            "albedo": [0.2, 0.35, 0.5],
            "pose": {"position": [-0.7, 0.45, -0.5], "euler_deg": [0.0, 30.0, 0.0]},
            "category": 3,
            "static": True,
        },
        {
            "name": "toy_plane",
            "primitive": {"kind": "box", "size": [0.5, 0.12, 0.35]},
            "albedo": [0.15, 0.25, 0.85],
            "pose": {"position": [0.0, 1.6, 0.0], "euler_deg": [0.0, 0.0, 0.0]},
            "category": 4,
            "behaviors": [
                {
                    "kind": "wander",
                    "waypoints": [
                        [-2.0, 1.5, 1.0],
                        [2.0, 1.8, 0.0],
                        [0.0, 2.0, -2.0],
                        [-1.0, 1.4, -1.0],
                    ],
                    "speed": 1.2,
                    "interval": [2.0, 4.0],
                    "seed": 7,
                }
            ],
        },
        {
            "name": "crate_a",
            "primitive": {"kind": "box", "size": [0.5, 0.5, 0.5]},
            "albedo": [0.3, 0.55, 0.75],
            "pose": {"position": [1.8, 0.25, 1.2], "euler_deg": [0.0, 0.0, 0.0]},
            "category": 5,
            "behaviors": [
                {
                    "kind": "poltergeist",
                    "force_impulse": [0.4, 1.2],
                    "torque_impulse": [0.5, 2.0],
                    "interval": [1.0, 3.0],
                    "seed": 11,
                }
            ],
        },
        {
            "name": "crate_b",
            "primitive": {"kind": "box", "size": [0.4, 0.4, 0.4]},
            "albedo": [0.35, 0.6, 0.8],
            "pose": {"position": [-1.6, 0.2, 1.0], "euler_deg": [0.0, 45.0, 0.0]},
            "category": 5,
            "behaviors": [
                {
                    "kind": "poltergeist",
                    "force_impulse": [0.4, 1.2],
                    "torque_impulse": [0.5, 2.0],
                    "interval": [1.5, 3.5],
                    "seed": 23,
                }
            ],
        },
    ],
    "mover": {
        "waypoints": [
            {"position": [0.0, 1.6, 3.0], "euler_deg": [-10.0, 0.0, 0.0]},
            {"position": [-3.0, 1.6, 0.0], "euler_deg": [-10.0, -90.0, 0.0]},
            {"position": [0.0, 1.6, -3.0], "euler_deg": [-10.0, 180.0, 0.0]},
            {"position": [3.0, 1.6, 0.0], "euler_deg": [-10.0, 90.0, 0.0]},
        ],
        "total_time": 16.0,
    },
    "light": {"direction": [-0.4, -1.0, -0.3], "ambient": 0.35},
    "camera": {"near": 0.1, "far": 50.0, "fov_deg": 60.0},
}

# Uniform colors on purpose: appearance-based flow estimators lose the
# rotational component here while the analytic field does not.
OPTICAL = {
    "name": "optical",
    "seed": 99,
    "categories": [
        {"id": 1, "name": "cube"},
        {"id": 2, "name": "cylinder"},
    ],
    "objects": [
        {
            "name": "cube_a",
            "primitive": {"kind": "box", "size": [0.85, 0.85, 0.85]},
            "albedo": [0.1, 0.15, 0.9],
            "pose": {"position": [-1.1, 1.2, 0.0], "euler_deg": [0.0, 0.0, 0.0]},
            "category": 1,
            "behaviors": [
                {"kind": "rotate", "axis": [0.0, 1.0, 0.0], "angular_speed": 3.141592653589793}
            ],
        },
        {
            "name": "cube_b",
            "primitive": {"kind": "box", "size": [0.7, 0.7, 0.7]},
            "albedo": [0.15, 0.85, 0.2],
            "pose": {"position": [1.1, 1.05, 0.4], "euler_deg": [0.0, 20.0, 0.0]},
            "category": 1,
            "behaviors": [
                {
                    "kind": "rotate",
                    "axis": [0.7071067811865476, 0.7071067811865476, 0.0],
                    "angular_speed": 2.2,
                }
            ],
        },
        {
            "name": "cylinder",
            "primitive": {"kind": "cylinder", "size": [0.35, 1.0]},
            "albedo": [0.85, 0.55, 0.15],
            "pose": {"position": [0.0, 1.35, -0.8], "euler_deg": [0.0, 0.0, 0.0]},
            "category": 2,
            "behaviors": [
                {"kind": "rotate", "axis": [1.0, 0.0, 0.0], "angular_speed": 2.5}
            ],
        },
    ],
    "mover": {
        "waypoints": [
            {"position": [-0.8, 1.2, 5.0], "euler_deg": [0.0, 0.0, 0.0]},
            {"position": [0.8, 1.2, 5.0], "euler_deg": [0.0, 0.0, 0.0]},
        ],
        "total_time": 8.0,
    },
    "light": {"direction": [-0.4, -1.0, -0.3], "ambient": 0.35},
    "camera": {"near": 0.1, "far": 50.0, "fov_deg": 60.0},
}

BUILTIN_DOCUMENTS = (ROOM_SIMPLE, OPTICAL)


def builtin_scenes() -> list[Scene]:
    return [parse_scene(doc) for doc in BUILTIN_DOCUMENTS]
