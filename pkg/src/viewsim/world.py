"""Mutable simulation state and immutable state snapshots.

A World owns the dynamic bodies, their behavior runtimes and the mover.
``step`` advances everything by one fixed tick. ``snapshot`` captures the
dynamic state into read-only arrays; rendering always works from a
snapshot, never from the live world, so a render and a tick can overlap.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .geometry import integrate_orientation
from .motion import (
    EXTERNAL_MODE,
    WAYPOINT_MODE,
    BodyState,
    MoverState,
    make_behavior,
    waypoint_kinematics,
)
from .scene import Scene


@dataclass(frozen=True)
class Snapshot:
    """Dynamic state at one instant; every array is read-only."""

    time: float
    instance_ids: np.ndarray  # (n,) int32
    positions: np.ndarray  # (n, 3) float64
    orientations: np.ndarray  # (n, 4) float64, (w, x, y, z)
    linear_velocities: np.ndarray  # (n, 3) float64
    angular_velocities: np.ndarray  # (n, 3) float64
    mover_position: np.ndarray  # (3,)
    mover_orientation: np.ndarray  # (4,)
    mover_linear_velocity: np.ndarray  # (3,)
    mover_angular_velocity: np.ndarray  # (3,)
    mover_mode: str

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(struct.pack("<d", self.time))
        h.update(self.mover_mode.encode())
        for a in (
            self.instance_ids,
            self.positions,
            self.orientations,
            self.linear_velocities,
            self.angular_velocities,
            self.mover_position,
            self.mover_orientation,
            self.mover_linear_velocity,
            self.mover_angular_velocity,
        ):
            h.update(a.tobytes())
        return h.hexdigest()


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class World:
    """Owns the dynamic bodies and the mover for one scene."""

    def __init__(self, scene: Scene):
        self.scene = scene
        self.time = 0.0
        self.bodies: list[BodyState] = []
        self._behaviors: list[list] = []
        for obj in scene.objects:
            if obj.static:
                continue
            body = BodyState(
                instance_id=obj.instance_id,
                pose=obj.pose.to_rigid(),
                linear_velocity=np.array(obj.linear_velocity, dtype=np.float64),
                angular_velocity=np.array(obj.angular_velocity, dtype=np.float64),
                mass=obj.mass,
            )
            self.bodies.append(body)
            self._behaviors.append(
                [make_behavior(b, scene.seed, obj.instance_id) for b in obj.behaviors]
            )
        pose, v, w = waypoint_kinematics(scene.mover, 0.0)
        self.mover = MoverState(pose=pose, linear_velocity=v, angular_velocity=w)

    def step(self, dt: float) -> None:
        """One fixed tick: behaviors decide velocities, then integrate."""
        t_new = self.time + dt
        for body, behaviors in zip(self.bodies, self._behaviors):
            for behavior in behaviors:
                behavior.update(body, t_new, dt)
            body.pose.position = body.pose.position + body.linear_velocity * dt
            body.pose.orientation = integrate_orientation(
                body.pose.orientation, body.angular_velocity, dt
            )
        self.mover.advance(self.scene.mover, dt)
        self.time = t_new

    def set_mover_position(self, position) -> None:
        self.mover.set_external_position(position)

    def set_mover_orientation(self, quat) -> None:
        self.mover.set_external_orientation(quat)

    def reset_mover_to_track(self) -> None:
        self.mover.mode = WAYPOINT_MODE
        pose, v, w = waypoint_kinematics(self.scene.mover, self.mover.t)
        self.mover.pose = pose
        self.mover.linear_velocity = v
        self.mover.angular_velocity = w

    def snapshot(self) -> Snapshot:
        n = len(self.bodies)
        ids = np.empty(n, dtype=np.int32)
        pos = np.empty((n, 3), dtype=np.float64)
        quat = np.empty((n, 4), dtype=np.float64)
        lin = np.empty((n, 3), dtype=np.float64)
        ang = np.empty((n, 3), dtype=np.float64)
        for i, b in enumerate(self.bodies):
            ids[i] = b.instance_id
            pos[i] = b.pose.position
            quat[i] = b.pose.orientation
            lin[i] = b.linear_velocity
            ang[i] = b.angular_velocity
        ext = self.mover.mode == EXTERNAL_MODE
        return Snapshot(
            time=self.time,
            instance_ids=_frozen(ids),
            positions=_frozen(pos),
            orientations=_frozen(quat),
            linear_velocities=_frozen(lin),
            angular_velocities=_frozen(ang),
            mover_position=_frozen(self.mover.pose.position.copy()),
            mover_orientation=_frozen(self.mover.pose.orientation.copy()),
            mover_linear_velocity=_frozen(
                np.zeros(3) if ext else self.mover.linear_velocity.copy()
            ),
            mover_angular_velocity=_frozen(
                np.zeros(3) if ext else self.mover.angular_velocity.copy()
            ),
            mover_mode=self.mover.mode,
        )
