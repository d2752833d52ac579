"""Vector and quaternion helpers shared by the simulator and renderer.

Conventions: right-handed world coordinates with +y up, angles in radians
unless a name says degrees. Quaternions are (w, x, y, z) numpy arrays and
map object-local coordinates into world coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

IDENTITY_QUAT = (1.0, 0.0, 0.0, 0.0)


def as_vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.shape != (3,):
        raise ValueError(f"expected 3 components, got shape {a.shape}")
    return a


def normalized(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return v / n


def quat_normalize(q: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(q))
    if n == 0.0:
        raise ValueError("cannot normalize a zero quaternion")
    return q / n


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q) -> np.ndarray:
    """Rotation matrix whose columns are the local axes in world coordinates."""
    w, x, y, z = quat_normalize(np.asarray(q, dtype=np.float64))
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vectors of shape (..., 3) by q."""
    return np.asarray(v) @ quat_to_matrix(q).T


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    u = normalized(as_vec3(axis))
    half = 0.5 * angle
    s = np.sin(half)
    return np.array([np.cos(half), u[0] * s, u[1] * s, u[2] * s])


def quat_from_euler_deg(rx: float, ry: float, rz: float) -> np.ndarray:
    """Euler degrees to quaternion, intrinsic yaw(Y) -> pitch(X) -> roll(Z)."""
    qy = quat_from_axis_angle((0.0, 1.0, 0.0), np.deg2rad(ry))
    qx = quat_from_axis_angle((1.0, 0.0, 0.0), np.deg2rad(rx))
    qz = quat_from_axis_angle((0.0, 0.0, 1.0), np.deg2rad(rz))
    return quat_normalize(quat_multiply(quat_multiply(qy, qx), qz))


def quat_nlerp(qa: np.ndarray, qb: np.ndarray, s: float) -> np.ndarray:
    """Normalized linear interpolation with shortest-arc sign correction."""
    if float(np.dot(qa, qb)) < 0.0:
        qb = -qb
    return quat_normalize(qa + s * (qb - qa))


def integrate_orientation(q: np.ndarray, omega: np.ndarray, dt: float) -> np.ndarray:
    """Advance q by a world-frame angular velocity (axis-scaled rad/s) over dt."""
    speed = float(np.linalg.norm(omega))
    if speed * dt == 0.0:
        return q
    step = quat_from_axis_angle(omega / speed, speed * dt)
    return quat_normalize(quat_multiply(step, q))


def angular_velocity_from_quat_rate(q: np.ndarray, q_dot: np.ndarray) -> np.ndarray:
    """World-frame angular velocity for an orientation q with derivative q_dot."""
    w = 2.0 * quat_multiply(q_dot, quat_conjugate(q))
    return w[1:]


@dataclass
class RigidPose:
    """Mutable runtime pose: world position plus orientation quaternion."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.array(IDENTITY_QUAT))

    def copy(self) -> "RigidPose":
        return RigidPose(self.position.copy(), self.orientation.copy())


@dataclass(frozen=True)
class Pose:
    """Scene-file pose: meters plus Euler degrees (intrinsic Y -> X -> Z).

    The Euler angles are kept verbatim so a scene serializes back to the
    exact document it was loaded from; the quaternion is derived.
    """

    position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    euler_deg: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def quat(self) -> np.ndarray:
        rx, ry, rz = self.euler_deg
        return quat_from_euler_deg(rx, ry, rz)

    def to_rigid(self) -> RigidPose:
        return RigidPose(as_vec3(self.position), self.quat())

    def validate(self) -> None:
        values = (*self.position, *self.euler_deg)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"non-finite pose {self}")


def round_half_away(x: np.ndarray) -> np.ndarray:
    """Round halves away from zero (numpy's default rounds halves to even)."""
    return np.sign(x) * np.floor(np.abs(x) + 0.5)
