"""Poses, twists, wrenches and contact Jacobians.

Conventions used throughout the package:

* quaternions are scalar-first ``(w, x, y, z)`` and kept unit-norm;
* twists and wrenches are expressed in world axes with the reference
  point stated by their frame tag;
* a contact Jacobian maps the object spatial velocity ``(v, w)`` taken
  at the object origin to the contact-frame velocity of the material
  point at the contact.

Every quantity carries a frame tag and the arithmetic refuses to mix
tags, which catches the classic silent bug of adding a body-frame twist
to a world-frame one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import math

import numpy as np

WORLD = "world"


_F64 = np.dtype(float)


def _vec3(x) -> np.ndarray:
    # fast path: already a float (3,) array, checked without ufunc dispatch
    if type(x) is np.ndarray and x.shape == (3,) and x.dtype == _F64:
        v = x.copy()
        if math.isfinite(v[0]) and math.isfinite(v[1]) and math.isfinite(v[2]):
            return v
        raise ValueError(f"non-finite 3-vector: {v}")
    v = np.asarray(x, dtype=float).reshape(3).copy()
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite 3-vector: {v}")
    return v


def _check_same_frame(a: str, b: str, what: str) -> None:
    if a != b:
        raise ValueError(f"frame mismatch in {what}: {a!r} vs {b!r}")


# ---------------------------------------------------------------------------
# quaternions (scalar-first)
# ---------------------------------------------------------------------------

def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(4)
    n = np.linalg.norm(q)
    if n < 1e-12:
        raise ValueError("cannot normalize near-zero quaternion")
    return q / n


def quat_multiply(a, b) -> np.ndarray:
    """Hamilton product a*b, both scalar-first."""
    aw, ax, ay, az = np.asarray(a, dtype=float).reshape(4)
    bw, bx, by, bz = np.asarray(b, dtype=float).reshape(4)
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conjugate(q) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(4)
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = _vec3(axis)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        raise ValueError("axis must be nonzero")
    half = 0.5 * float(angle)
    return np.concatenate([[np.cos(half)], np.sin(half) * axis / n])


def quat_from_rotvec(rv) -> np.ndarray:
    """Exponential map: rotation vector (axis*angle) to unit quaternion."""
    rv = _vec3(rv)
    angle = np.linalg.norm(rv)
    if angle < 1e-12:
        # second-order series keeps the step exact to machine precision
        half = 0.5 * rv
        return quat_normalize(np.concatenate([[1.0 - 0.125 * angle * angle], half]))
    return np.concatenate([[np.cos(0.5 * angle)], np.sin(0.5 * angle) * rv / angle])


def cross3(a, b) -> np.ndarray:
    """Cross product of two plain 3-vectors.

    `np.cross` spends most of its time on axis bookkeeping when the
    operands are single vectors, and the steppers call this thousands of
    times per rollout.
    """
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def quat_rotate(q, v) -> np.ndarray:
    """Rotate vector v by unit quaternion q (frame-change of a free vector)."""
    w = q[0]
    u = np.asarray(q[1:], dtype=float)
    v = np.asarray(v, dtype=float)
    # Rodrigues form, one cross product cheaper than q*v*q^-1
    t = 2.0 * cross3(u, v)
    return v + w * t + cross3(u, t)


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=float).reshape(4)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


# ---------------------------------------------------------------------------
# tagged spatial quantities
# ---------------------------------------------------------------------------

@dataclass
class Pose:
    """Rigid transform: rotation then translation, expressed in `frame`.

    Maps points from the body frame of whatever this is the pose of into
    `frame`: ``x_frame = R(quaternion) @ x_body + translation``.
    """

    translation: np.ndarray
    quaternion: np.ndarray
    frame: str = WORLD

    def __post_init__(self):
        self.translation = _vec3(self.translation)
        self.quaternion = quat_normalize(self.quaternion)

    @staticmethod
    def identity(frame: str = WORLD) -> "Pose":
        return Pose(np.zeros(3), quat_identity(), frame)

    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.quaternion)

    def transform_point(self, p) -> np.ndarray:
        return quat_rotate(self.quaternion, _vec3(p)) + self.translation

    def transform_direction(self, d) -> np.ndarray:
        return quat_rotate(self.quaternion, _vec3(d))


@dataclass
class Twist:
    """Spatial velocity: linear velocity of the reference point + angular velocity."""

    linear: np.ndarray
    angular: np.ndarray
    frame: str = WORLD

    def __post_init__(self):
        self.linear = _vec3(self.linear)
        self.angular = _vec3(self.angular)

    @staticmethod
    def zero(frame: str = WORLD) -> "Twist":
        return Twist(np.zeros(3), np.zeros(3), frame)

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.linear, self.angular])

    def __add__(self, other: "Twist") -> "Twist":
        _check_same_frame(self.frame, other.frame, "twist addition")
        return Twist(self.linear + other.linear, self.angular + other.angular, self.frame)

    def scaled(self, s: float) -> "Twist":
        return Twist(self.linear * s, self.angular * s, self.frame)


@dataclass
class Wrench:
    """Force + torque about the reference point implied by `frame`."""

    force: np.ndarray
    torque: np.ndarray
    frame: str = WORLD

    def __post_init__(self):
        self.force = _vec3(self.force)
        self.torque = _vec3(self.torque)

    @staticmethod
    def zero(frame: str = WORLD) -> "Wrench":
        return Wrench(np.zeros(3), np.zeros(3), frame)

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.force, self.torque])

    def __add__(self, other: "Wrench") -> "Wrench":
        _check_same_frame(self.frame, other.frame, "wrench addition")
        return Wrench(self.force + other.force, self.torque + other.torque, self.frame)

    def power(self, twist: Twist) -> float:
        """f.v + tau.w; frames must match for the pairing to be meaningful."""
        _check_same_frame(self.frame, twist.frame, "wrench/twist pairing")
        return float(self.force @ twist.linear + self.torque @ twist.angular)


@dataclass
class MassProps:
    """Mass, COM offset in body frame, and body-frame inertia about the COM."""

    mass: float
    com: np.ndarray = field(default_factory=lambda: np.zeros(3))
    inertia: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        self.mass = float(self.mass)
        if self.mass <= 0.0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        self.com = _vec3(self.com)
        self.inertia = np.asarray(self.inertia, dtype=float).reshape(3, 3).copy()
        if not np.allclose(self.inertia, self.inertia.T, atol=1e-12):
            raise ValueError("inertia must be symmetric")
        eigvals = np.linalg.eigvalsh(self.inertia)
        if np.min(eigvals) <= 0.0:
            raise ValueError(f"inertia must be positive definite, eigenvalues {eigvals}")

    def inertia_world(self, pose: Pose) -> np.ndarray:
        R = pose.rotation()
        return R @ self.inertia @ R.T


# ---------------------------------------------------------------------------
# pose algebra
# ---------------------------------------------------------------------------

def compose(a: Pose, b: Pose) -> Pose:
    """Pose of b's body in a's frame, where b is expressed in a's body frame."""
    t = a.transform_point(b.translation)
    q = quat_normalize(quat_multiply(a.quaternion, b.quaternion))
    return Pose(t, q, a.frame)


def inverse(p: Pose, frame: str | None = None) -> Pose:
    """Inverse transform. Its coordinates live in p's body frame, so the
    result gets a synthesized tag unless the caller names that frame."""
    qi = quat_conjugate(p.quaternion)
    return Pose(-quat_rotate(qi, p.translation), qi,
                frame=frame if frame is not None else f"inv({p.frame})")


def relative_pose(a: Pose, b: Pose) -> Pose:
    """Pose of b expressed in a's body frame. Both must share a parent frame."""
    _check_same_frame(a.frame, b.frame, "relative_pose")
    qi = quat_conjugate(a.quaternion)
    return Pose(
        quat_rotate(qi, b.translation - a.translation),
        quat_normalize(quat_multiply(qi, b.quaternion)),
        frame=a.frame + "/local",
    )


def integrate_pose(pose: Pose, twist: Twist, dt: float) -> Pose:
    """Advance a pose by a constant world-frame twist for dt.

    Rotation uses the exact exponential of ``angular*dt`` so pure
    rotations at any rate stay on SO(3) up to roundoff; the quaternion
    is renormalized to stop drift from accumulating over long runs.
    The twist's linear part is the velocity of the body origin, so
    translation integrates independently of rotation.
    """
    _check_same_frame(pose.frame, twist.frame, "integrate_pose")
    dq = quat_from_rotvec(twist.angular * dt)
    q = quat_normalize(quat_multiply(dq, pose.quaternion))
    return Pose(pose.translation + twist.linear * dt, q, pose.frame)


def transform_wrench(w: Wrench, src: Pose, dst: Pose) -> Wrench:
    """Re-express a wrench given about src's origin/axes about dst's origin/axes.

    src and dst must share a parent frame. The force rotates; the torque
    rotates and picks up the lever term from the origin shift.
    """
    _check_same_frame(src.frame, dst.frame, "transform_wrench")
    f_parent = quat_rotate(src.quaternion, w.force)
    t_parent = quat_rotate(src.quaternion, w.torque)
    arm = src.translation - dst.translation
    qi = quat_conjugate(dst.quaternion)
    return Wrench(
        quat_rotate(qi, f_parent),
        quat_rotate(qi, t_parent + cross3(arm, f_parent)),
        frame=dst.frame + "/local",
    )


def shift_wrench(w: Wrench, from_point, to_point) -> Wrench:
    """Move the reference point of a world-axes wrench. Axes unchanged."""
    arm = _vec3(from_point) - _vec3(to_point)
    return Wrench(w.force.copy(), w.torque + cross3(arm, w.force), w.frame)


def contact_jacobian(pose: Pose, position, basis: np.ndarray) -> np.ndarray:
    """Rows map object twist at the object origin to contact-basis point velocity.

    `position` is the contact point in world, `basis` is (3,3) with rows
    forming a right-handed orthonormal frame (typically normal, t1, t2).
    Row i is ``[b_i, (r x b_i)]`` with ``r = position - pose.translation``,
    i.e. velocity of the material point projected on b_i.
    """
    basis = np.asarray(basis, dtype=float).reshape(3, 3)
    if not np.allclose(basis @ basis.T, np.eye(3), atol=1e-9):
        raise ValueError("contact basis must be orthonormal")
    r = _vec3(position) - pose.translation
    J = np.zeros((3, 6))
    J[:, :3] = basis
    # b_i . (v + w x r) = b_i . v + (r x b_i) . w
    J[:, 3:] = np.cross(np.broadcast_to(r, (3, 3)), basis)
    return J
