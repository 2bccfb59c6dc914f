"""Rotation, quaternion, and inertia arithmetic shared by physics and reward code.

Quaternions are plain numpy arrays in [w, x, y, z] order, unit-norm, with the
scalar part canonicalized to w >= 0 after normalization so q and -q map to one
deterministic representative. All functions broadcast over leading batch
dimensions: a (4,) quaternion and an (N, 4) batch are both valid inputs.

Angular velocities passed to :func:`quat_integrate` are body-frame rates in
rad/s.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

UNIT_TOL = 1e-6


def angle_between(u: np.ndarray, v: np.ndarray) -> np.ndarray | float:
    """Geodesic angle in [0, pi] between unit vectors, arccos of the clamped dot.

    Raises ValueError if either input is not unit-norm within 1e-6.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu = np.linalg.norm(u, axis=-1)
    nv = np.linalg.norm(v, axis=-1)
    if np.any(np.abs(nu - 1.0) > UNIT_TOL) or np.any(np.abs(nv - 1.0) > UNIT_TOL):
        raise ValueError("angle_between requires unit vectors (norm within 1e-6 of 1)")
    dot = np.clip(np.sum(u * v, axis=-1), -1.0, 1.0)
    out = np.arccos(dot)
    return float(out) if out.ndim == 0 else out


def heading_angle_between(a: np.ndarray, b: np.ndarray) -> np.ndarray | float:
    """Angle between two direction vectors after projecting to the world XY plane."""
    a = np.asarray(a, dtype=float)[..., :2]
    b = np.asarray(b, dtype=float)[..., :2]
    na = np.linalg.norm(a, axis=-1, keepdims=True)
    nb = np.linalg.norm(b, axis=-1, keepdims=True)
    na = np.where(na == 0.0, 1.0, na)
    nb = np.where(nb == 0.0, 1.0, nb)
    dot = np.clip(np.sum((a / na) * (b / nb), axis=-1), -1.0, 1.0)
    out = np.arccos(dot)
    return float(out) if out.ndim == 0 else out


def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Normalize to unit length and canonicalize the sign so w >= 0."""
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    out = q / n
    sign = np.where(out[..., :1] < 0.0, -1.0, 1.0)
    return out * sign


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a (x) b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    w1, x1, y1, z1 = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    w2, x2, y2, z2 = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ],
        axis=-1,
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of q; maps body-frame vectors into the world frame."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    xx, yy, zz = x * x, y * y, z * z
    wx, wy, wz = w * x, w * y, w * z
    xy, xz, yz = x * y, x * z, y * z
    row0 = np.stack([1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)], axis=-1)
    row1 = np.stack([2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)], axis=-1)
    row2 = np.stack([2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)], axis=-1)
    return np.stack([row0, row1, row2], axis=-2)


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector(s) v by quaternion(s) q (body -> world)."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    qv = q[..., 1:]
    w = q[..., :1]
    t = 2.0 * np.cross(qv, v)
    return v + w * t + np.cross(qv, t)


def quat_from_axis_angle(axis: np.ndarray, angle: np.ndarray | float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    angle = np.asarray(angle, dtype=float)
    half = 0.5 * angle
    w = np.cos(half)
    xyz = axis * np.sin(half)[..., None]
    return quat_normalize(np.concatenate([w[..., None], xyz], axis=-1))


def quat_integrate(q: np.ndarray, omega: np.ndarray, dt: float) -> np.ndarray:
    """Advance q by the exponential map of body rate omega * dt, renormalized.

    Exact for constant omega over the step. omega = 0 returns q unchanged.
    """
    if dt <= 0.0:
        raise ValueError("quat_integrate requires dt > 0")
    q = np.asarray(q, dtype=float)
    omega = np.asarray(omega, dtype=float)
    theta_vec = omega * dt
    angle = np.linalg.norm(theta_vec, axis=-1, keepdims=True)
    half = 0.5 * angle
    # sin(x)/x via series below the small-angle threshold to avoid 0/0
    small = angle < 1e-12
    scale = np.where(small, 0.5, np.sin(half) / np.where(small, 1.0, angle))
    dq = np.concatenate([np.cos(half), theta_vec * scale], axis=-1)
    return quat_normalize(quat_multiply(q, dq))


def quat_yaw(q: np.ndarray) -> np.ndarray | float:
    """Heading of the body x-axis projected to the world XY plane, in rad."""
    r = quat_to_matrix(q)
    out = np.arctan2(r[..., 1, 0], r[..., 0, 0])
    return float(out) if np.ndim(out) == 0 else out


def skew(v: np.ndarray) -> np.ndarray:
    """Matrix S(v) with S(v) @ u = v x u; broadcasts over leading dims."""
    v = np.asarray(v, dtype=float)
    z = np.zeros_like(v[..., 0])
    row0 = np.stack([z, -v[..., 2], v[..., 1]], axis=-1)
    row1 = np.stack([v[..., 2], z, -v[..., 0]], axis=-1)
    row2 = np.stack([-v[..., 1], v[..., 0], z], axis=-1)
    return np.stack([row0, row1, row2], axis=-2)


@dataclass(frozen=True)
class SpatialInertia:
    """Mass, COM offset, and rotational inertia (about COM, body frame) of one body.

    Invariants checked on construction: mass > 0, inertia symmetric
    positive-definite, and the principal moments satisfy the triangle
    inequality I1 + I2 >= I3.
    """

    mass: float
    com: np.ndarray = field(default_factory=lambda: np.zeros(3))
    inertia: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        object.__setattr__(self, "com", np.asarray(self.com, dtype=float).reshape(3))
        object.__setattr__(self, "inertia", np.asarray(self.inertia, dtype=float).reshape(3, 3))
        if not self.mass > 0.0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if not np.allclose(self.inertia, self.inertia.T, atol=1e-9):
            raise ValueError("inertia matrix must be symmetric")
        eig = np.linalg.eigvalsh(self.inertia)
        if np.any(eig <= 0.0):
            raise ValueError(f"inertia matrix must be positive-definite, eigvals {eig}")
        i1, i2, i3 = np.sort(eig)
        if i1 + i2 < i3 * (1.0 - 1e-9):
            raise ValueError(f"principal moments violate triangle inequality: {eig}")


def transform_inertia(si: SpatialInertia, rotation: np.ndarray, translation: np.ndarray) -> SpatialInertia:
    """Re-express a spatial inertia in a new frame: x_new = R @ x_old + t.

    COM-centric: the stored rotational inertia stays about the COM, so it only
    rotates (R I R^T) and the mass is unchanged. Use
    :func:`inertia_about_point` for the parallel-axis form about an arbitrary
    reference point.
    """
    rotation = np.asarray(rotation, dtype=float).reshape(3, 3)
    translation = np.asarray(translation, dtype=float).reshape(3)
    if not np.allclose(rotation @ rotation.T, np.eye(3), atol=1e-9) or np.linalg.det(rotation) < 0.0:
        raise ValueError("rotation must be a proper rotation matrix")
    return SpatialInertia(
        mass=si.mass,
        com=rotation @ si.com + translation,
        inertia=rotation @ si.inertia @ rotation.T,
    )


def inertia_about_point(si: SpatialInertia, point: np.ndarray) -> np.ndarray:
    """Rotational inertia about an arbitrary point: I + m (d.d 1 - d d^T)."""
    d = si.com - np.asarray(point, dtype=float).reshape(3)
    return si.inertia + si.mass * (np.dot(d, d) * np.eye(3) - np.outer(d, d))


def combine_inertias(inertias: list[SpatialInertia]) -> SpatialInertia:
    """Aggregate bodies expressed in one common frame into a single inertia."""
    mass = sum(si.mass for si in inertias)
    com = sum(si.mass * si.com for si in inertias) / mass
    total = np.zeros((3, 3))
    for si in inertias:
        total += inertia_about_point(si, com)
    return SpatialInertia(mass=mass, com=com, inertia=total)
