"""Movement behaviors and the cyclic waypoint controller.

Behaviors mutate body velocities each tick; integration happens in
``world.step``. Every randomized behavior owns one seeded RNG stream so a
run is reproducible from the scene plus the global seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    Pose,
    RigidPose,
    angular_velocity_from_quat_rate,
    as_vec3,
    quat_normalize,
)

# Behavior timers compare against an accumulated float clock; the slack
# absorbs ~1e-13 of drift per simulated second without ever firing early
# by a visible amount.
TIME_EPS = 1e-9


class BehaviorError(ValueError):
    pass


def _check_range(name: str, lo: float, hi: float, positive_min: bool = False) -> None:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise BehaviorError(f"{name} range must be finite")
    if lo < 0 or lo > hi:
        raise BehaviorError(f"{name} range must satisfy 0 <= min <= max, got [{lo}, {hi}]")
    if positive_min and lo <= 0:
        raise BehaviorError(f"{name} range min must be > 0")


@dataclass(frozen=True)
class PoltergeistParams:
    """Random velocity and spin kicks at random times."""

    force_impulse: tuple[float, float] = (0.5, 2.0)  # delta-v magnitude, m/s
    torque_impulse: tuple[float, float] = (0.5, 2.0)  # delta-omega magnitude, rad/s
    interval: tuple[float, float] = (1.0, 4.0)  # seconds between kicks
    seed: int = 0

    kind = "poltergeist"

    def validate(self) -> None:
        _check_range("force_impulse", *self.force_impulse)
        _check_range("torque_impulse", *self.torque_impulse)
        _check_range("interval", *self.interval, positive_min=True)


@dataclass(frozen=True)
class WanderParams:
    """Travel toward a waypoint, retargeting at random intervals."""

    waypoints: tuple[tuple[float, float, float], ...]
    speed: float = 1.0  # m/s
    interval: tuple[float, float] = (2.0, 5.0)  # seconds between retargets
    seed: int = 0

    kind = "wander"

    def validate(self) -> None:
        if len(self.waypoints) < 2:
            raise BehaviorError("wander needs at least 2 waypoints")
        for w in self.waypoints:
            if not all(math.isfinite(c) for c in w):
                raise BehaviorError("non-finite wander waypoint")
        if not (math.isfinite(self.speed) and self.speed > 0):
            raise BehaviorError("wander speed must be > 0")
        _check_range("interval", *self.interval, positive_min=True)


@dataclass(frozen=True)
class RotateParams:
    """Constant-rate spin about a fixed world axis."""

    axis: tuple[float, float, float] = (0.0, 1.0, 0.0)
    angular_speed: float = 1.0  # rad/s

    kind = "rotate"

    def validate(self) -> None:
        values = (*self.axis, self.angular_speed)
        if not all(math.isfinite(v) for v in values):
            raise BehaviorError("non-finite rotate parameters")
        n = math.sqrt(sum(c * c for c in self.axis))
        if abs(n - 1.0) > 1e-6:
            raise BehaviorError(f"rotate axis must be unit length, |axis| = {n}")


BehaviorConfig = PoltergeistParams | WanderParams | RotateParams


@dataclass
class BodyState:
    """Kinematic state of one dynamic object; position is the rotation center."""

    instance_id: int
    pose: RigidPose
    linear_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    mass: float = 1.0


def _unit_direction(rng: np.random.Generator) -> np.ndarray:
    while True:
        v = rng.normal(size=3)
        n = np.linalg.norm(v)
        if n > 1e-12:
            return v / n


class PoltergeistBehavior:
    def __init__(self, params: PoltergeistParams, seed: int):
        self.params = params
        self.rng = np.random.default_rng(seed)
        self.next_kick = self.rng.uniform(*params.interval)
        self.kick_count = 0

    def update(self, body: BodyState, t: float, dt: float) -> None:
        while t >= self.next_kick - TIME_EPS:
            p = self.params
            body.linear_velocity += _unit_direction(self.rng) * self.rng.uniform(*p.force_impulse)
            body.angular_velocity += _unit_direction(self.rng) * self.rng.uniform(*p.torque_impulse)
            self.next_kick += self.rng.uniform(*p.interval)
            self.kick_count += 1


class WanderBehavior:
    def __init__(self, params: WanderParams, seed: int):
        self.params = params
        self.rng = np.random.default_rng(seed)
        self.waypoints = np.array(params.waypoints, dtype=np.float64)
        self.target = int(self.rng.integers(len(self.waypoints)))
        self.next_switch = self.rng.uniform(*params.interval)

    def update(self, body: BodyState, t: float, dt: float) -> None:
        while t >= self.next_switch - TIME_EPS:
            self.target = int(self.rng.integers(len(self.waypoints)))
            self.next_switch += self.rng.uniform(*self.params.interval)
        to_target = self.waypoints[self.target] - body.pose.position
        distance = float(np.linalg.norm(to_target))
        if distance < self.params.speed * dt:
            # close enough to overshoot: snap and hold until the next retarget
            body.pose.position = self.waypoints[self.target].copy()
            body.linear_velocity = np.zeros(3)
        else:
            body.linear_velocity = self.params.speed * to_target / distance


class RotateBehavior:
    def __init__(self, params: RotateParams, seed: int):
        self.omega = as_vec3(params.axis) * params.angular_speed

    def update(self, body: BodyState, t: float, dt: float) -> None:
        body.angular_velocity = self.omega.copy()


_BEHAVIOR_CLASSES = {
    PoltergeistParams: PoltergeistBehavior,
    WanderParams: WanderBehavior,
    RotateParams: RotateBehavior,
}


def make_behavior(params: BehaviorConfig, scene_seed: int, instance_id: int):
    """Instantiate the runtime for a behavior config with its RNG stream."""
    stream_seed = (scene_seed ^ instance_id ^ getattr(params, "seed", 0)) & 0xFFFFFFFF
    return _BEHAVIOR_CLASSES[type(params)](params, stream_seed)


@dataclass(frozen=True)
class MoverConfig:
    """Cyclic pose track: N waypoints, N equal-duration segments."""

    waypoints: tuple[Pose, ...]
    total_time: float

    def validate(self) -> None:
        if len(self.waypoints) < 1:
            raise BehaviorError("mover needs at least one waypoint")
        for w in self.waypoints:
            w.validate()
        if not (math.isfinite(self.total_time) and self.total_time > 0):
            raise BehaviorError("mover total_time must be > 0")


def _segment(config: MoverConfig, t: float):
    n = len(config.waypoints)
    t = t % config.total_time
    seg_duration = config.total_time / n
    index = min(int(t / seg_duration), n - 1)
    s = (t - index * seg_duration) / seg_duration
    qa = config.waypoints[index].quat()
    qb = config.waypoints[(index + 1) % n].quat()
    if float(np.dot(qa, qb)) < 0.0:
        qb = -qb
    pa = as_vec3(config.waypoints[index].position)
    pb = as_vec3(config.waypoints[(index + 1) % n].position)
    return pa, pb, qa, qb, s, seg_duration


def waypoint_pose(config: MoverConfig, t: float) -> RigidPose:
    """Pose at cycle time t: linear position blend, normalized quaternion blend."""
    if len(config.waypoints) == 1:
        return config.waypoints[0].to_rigid()
    pa, pb, qa, qb, s, _ = _segment(config, t)
    u = qa + s * (qb - qa)
    return RigidPose(pa + s * (pb - pa), quat_normalize(u))


def waypoint_kinematics(config: MoverConfig, t: float) -> tuple[RigidPose, np.ndarray, np.ndarray]:
    """Pose plus its exact time derivatives (linear and angular velocity).

    The angular rate follows the normalized-lerp path, so it is not constant
    across a segment; it is the derivative of exactly what waypoint_pose
    returns, which keeps the rendered motion field consistent with the track.
    """
    if len(config.waypoints) == 1:
        return config.waypoints[0].to_rigid(), np.zeros(3), np.zeros(3)
    pa, pb, qa, qb, s, seg_duration = _segment(config, t)
    u = qa + s * (qb - qa)
    norm_u = float(np.linalg.norm(u))
    q = u / norm_u
    d = (qb - qa) / seg_duration
    q_dot = d / norm_u - u * (float(np.dot(u, d)) / norm_u**3)
    omega = angular_velocity_from_quat_rate(q, q_dot)
    v = (pb - pa) / seg_duration
    return RigidPose(pa + s * (pb - pa), q), v, omega


WAYPOINT_MODE = "waypoints"
EXTERNAL_MODE = "external"


@dataclass
class MoverState:
    """Scene-level pose carrier that following agents inherit."""

    pose: RigidPose
    mode: str = WAYPOINT_MODE
    t: float = 0.0
    linear_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def advance(self, config: MoverConfig, dt: float) -> None:
        if self.mode != WAYPOINT_MODE:
            self.linear_velocity = np.zeros(3)
            self.angular_velocity = np.zeros(3)
            return
        self.t = (self.t + dt) % config.total_time
        self.pose, self.linear_velocity, self.angular_velocity = waypoint_kinematics(config, self.t)

    def set_external_position(self, position) -> None:
        self.mode = EXTERNAL_MODE
        self.pose.position = as_vec3(position)

    def set_external_orientation(self, quat) -> None:
        self.mode = EXTERNAL_MODE
        self.pose.orientation = quat_normalize(np.asarray(quat, dtype=np.float64))


def apply_follow(mover_pose: RigidPose, agents) -> None:
    """Give every following agent the mover pose; leave the rest untouched."""
    for agent in agents:
        if agent.follow:
            agent.pose = mover_pose.copy()
