"""Floating-base kinematic-tree forward dynamics with penalty contacts.

The tree is a topologically ordered list of links: link 0 is the floating
root (or a fixed world anchor on test rigs), every other link hangs off its
parent through a single revolute joint. Generalized velocity is
``u = [base linear velocity (world), base angular velocity (world), joint
rates]``; a fixed-base tree drops the first six entries.

Everything operates on batches: a :class:`SimState` carries ``(N, ...)``
arrays for N independent simulations and all dynamics quantities are computed
for the whole batch in one pass. Operations are pure functions of their
inputs; :func:`step` returns a fresh state and never mutates its argument, so
independent batches may be stepped from any thread.

The contact model is a penalty spring-damper on point feet with regularized
Coulomb friction. Integration is semi-implicit Euler: velocities first, then
positions from the new velocities, orientation through the quaternion
exponential map.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .mathutils import quat_conjugate, quat_integrate, quat_rotate, quat_to_matrix, skew

GRAVITY = 9.81

FOOT_MARKERS = ("foot_FL", "foot_FR", "foot_RL", "foot_RR")

if os.environ.get("TAILQUAD_PURE_NUMPY"):
    _fast = None
else:
    try:
        from . import dynamics_fast as _fast
    except ImportError:
        _fast = None


class FatalSimulationError(RuntimeError):
    """Unrecoverable dynamics failure (singular mass matrix, non-finite state)."""


@dataclass(frozen=True)
class ContactParams:
    """Penalty-contact constants; all strictly positive."""

    stiffness: float = 5000.0      # N/m
    damping: float = 100.0         # N*s/m
    friction: float = 0.8
    regularization_velocity: float = 0.05  # m/s

    def __post_init__(self):
        for name in ("stiffness", "damping", "friction", "regularization_velocity"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"contact parameter {name} must be > 0")


@dataclass
class KinematicTree:
    """Static link/joint description in topological order (parent index < own).

    Per-link arrays are indexed by link; joint j connects link j+1 to its
    parent, so joint arrays have length ``n_links - 1``. Frames: a link frame
    sits at its joint, ``joint_offset``/``joint_rot`` place that frame in the
    parent, ``joint_axis`` is the rotation axis in the joint frame.
    """

    names: list[str]
    parent: np.ndarray               # (nl,) int, parent[0] == -1
    joint_offset: np.ndarray         # (nl, 3) translation in parent frame
    joint_rot: np.ndarray            # (nl, 3, 3) fixed pre-rotation
    joint_axis: np.ndarray           # (nl, 3) unit axis in joint frame
    mass: np.ndarray                 # (nl,)
    com_local: np.ndarray            # (nl, 3)
    inertia_local: np.ndarray        # (nl, 3, 3) about COM, link frame
    markers: dict[str, tuple[int, np.ndarray]] = field(default_factory=dict)
    joint_limits: np.ndarray | None = None   # (nj, 2)
    torque_limit: float = 17.0
    base_box: np.ndarray = field(default_factory=lambda: np.array([0.19, 0.095, 0.055]))
    fixed_base: bool = False
    joint_names: list[str] = field(default_factory=list)

    # Rodrigues constants per link, filled by validate()
    _K: np.ndarray | None = None
    _K2: np.ndarray | None = None

    def __post_init__(self):
        self.parent = np.asarray(self.parent, dtype=int)
        self.joint_offset = np.asarray(self.joint_offset, dtype=float)
        self.joint_rot = np.asarray(self.joint_rot, dtype=float)
        self.joint_axis = np.asarray(self.joint_axis, dtype=float)
        self.mass = np.asarray(self.mass, dtype=float)
        self.com_local = np.asarray(self.com_local, dtype=float)
        self.inertia_local = np.asarray(self.inertia_local, dtype=float)
        if self.joint_limits is not None:
            self.joint_limits = np.asarray(self.joint_limits, dtype=float)
        self.validate()

    @property
    def n_links(self) -> int:
        return len(self.names)

    @property
    def n_joints(self) -> int:
        return self.n_links - 1

    @property
    def nb(self) -> int:
        """Number of unactuated base velocity coordinates (6 floating, 0 fixed)."""
        return 0 if self.fixed_base else 6

    @property
    def dof(self) -> int:
        return self.nb + self.n_joints

    def validate(self) -> None:
        nl = self.n_links
        if self.parent[0] != -1:
            raise ValueError("link 0 must be the root")
        if np.any(self.parent[1:] >= np.arange(1, nl)):
            raise ValueError("links must be in topological order (parent index < own index)")
        if np.any(self.parent[1:] < 0):
            raise ValueError("exactly one root allowed")
        norms = np.linalg.norm(self.joint_axis[1:], axis=-1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("joint axes must be unit-norm")
        if np.any(self.mass < 0.0):
            raise ValueError("link masses must be non-negative")
        K = skew(self.joint_axis)
        self._K = K
        self._K2 = K @ K
        # ancestor[l, j]: joint j lies on the path root -> link l
        anc = np.zeros((nl, self.n_joints), dtype=bool)
        for l in range(1, nl):
            anc[l] = anc[self.parent[l]]
            anc[l, l - 1] = True
        self._ancestor = anc
        self._ancestor_f = anc.astype(float)
        self._has_rot_offset = [not np.allclose(r, np.eye(3)) for r in self.joint_rot]
        # marker offsets as float arrays for fast matmul
        self.markers = {k: (int(li), np.asarray(off, dtype=float))
                        for k, (li, off) in self.markers.items()}

    def marker(self, name: str) -> tuple[int, np.ndarray]:
        return self.markers[name]

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.mass))


@dataclass
class SimState:
    """Batched simulation state: leading dimension N over independent sims.

    ``base_ang_vel`` is the body-frame angular velocity; linear quantities are
    world-frame. Joint vectors have one column per joint in tree order.
    """

    base_pos: np.ndarray       # (N, 3)
    base_quat: np.ndarray      # (N, 4) [w, x, y, z]
    base_vel: np.ndarray       # (N, 3) world
    base_ang_vel: np.ndarray   # (N, 3) body frame
    joint_pos: np.ndarray      # (N, nj)
    joint_vel: np.ndarray      # (N, nj)
    time: np.ndarray           # (N,)

    @classmethod
    def zeros(cls, tree: KinematicTree, n: int = 1) -> "SimState":
        nj = tree.n_joints
        quat = np.zeros((n, 4))
        quat[:, 0] = 1.0
        return cls(
            base_pos=np.zeros((n, 3)),
            base_quat=quat,
            base_vel=np.zeros((n, 3)),
            base_ang_vel=np.zeros((n, 3)),
            joint_pos=np.zeros((n, nj)),
            joint_vel=np.zeros((n, nj)),
            time=np.zeros(n),
        )

    @property
    def n(self) -> int:
        return self.base_pos.shape[0]

    def copy(self) -> "SimState":
        return SimState(*(np.array(getattr(self, f)) for f in (
            "base_pos", "base_quat", "base_vel", "base_ang_vel", "joint_pos", "joint_vel", "time")))

    def select(self, idx) -> "SimState":
        return SimState(*(getattr(self, f)[idx] for f in (
            "base_pos", "base_quat", "base_vel", "base_ang_vel", "joint_pos", "joint_vel", "time")))

    def assign(self, idx, other: "SimState") -> None:
        """Overwrite rows idx in place with rows from other (used by env resets)."""
        for f in ("base_pos", "base_quat", "base_vel", "base_ang_vel", "joint_pos", "joint_vel", "time"):
            getattr(self, f)[idx] = getattr(other, f)

    def validate(self, tree: KinematicTree) -> None:
        if self.joint_pos.shape[-1] != tree.n_joints or self.joint_vel.shape[-1] != tree.n_joints:
            raise ValueError(
                f"state has {self.joint_pos.shape[-1]} joints, tree has {tree.n_joints}")
        norm = np.linalg.norm(self.base_quat, axis=-1)
        if np.any(np.abs(norm - 1.0) > 1e-6):
            raise ValueError("base orientation must be unit-norm")


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product over the last axis without np.cross's moveaxis overhead."""
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0], axis=-1)


class Kinematics(NamedTuple):
    """World-frame pose of every link plus joint axes and marker positions."""

    link_rot: np.ndarray     # (N, nl, 3, 3)
    link_pos: np.ndarray     # (N, nl, 3) frame origins (joint locations)
    link_com: np.ndarray     # (N, nl, 3)
    joint_axis_world: np.ndarray  # (N, nl, 3), row 0 zero
    markers: dict[str, np.ndarray]  # name -> (N, 3)


def forward_kinematics(tree: KinematicTree, state: SimState) -> Kinematics:
    """Compose link poses root-to-leaf and locate every marker."""
    state.validate(tree)
    n = state.n
    nl = tree.n_links
    R = np.empty((n, nl, 3, 3))
    p = np.empty((n, nl, 3))
    axis_w = np.zeros((n, nl, 3))
    R[:, 0] = quat_to_matrix(state.base_quat)
    p[:, 0] = state.base_pos
    q = state.joint_pos
    eye3 = np.eye(3)
    for i in range(1, nl):
        par = tree.parent[i]
        Rp = R[:, par]
        p[:, i] = p[:, par] + Rp @ tree.joint_offset[i]
        R_pre = Rp @ tree.joint_rot[i] if tree._has_rot_offset[i] else Rp
        axis_w[:, i] = R_pre @ tree.joint_axis[i]
        th = q[:, i - 1][:, None, None]
        R_joint = eye3 + np.sin(th) * tree._K[i] + (1.0 - np.cos(th)) * tree._K2[i]
        R[:, i] = R_pre @ R_joint
    com = p + (R @ tree.com_local[None, :, :, None])[..., 0]
    markers = {
        name: p[:, li] + R[:, li] @ off
        for name, (li, off) in tree.markers.items()
    }
    return Kinematics(R, p, com, axis_w, markers)


def _link_velocities(tree: KinematicTree, state: SimState, kin: Kinematics):
    """World angular velocity of each link and linear velocity of each frame origin."""
    n = state.n
    nl = tree.n_links
    omega = np.empty((n, nl, 3))
    v_origin = np.empty((n, nl, 3))
    if tree.fixed_base:
        omega[:, 0] = 0.0
        v_origin[:, 0] = 0.0
    else:
        omega[:, 0] = quat_rotate(state.base_quat, state.base_ang_vel)
        v_origin[:, 0] = state.base_vel
    qd = state.joint_vel
    for i in range(1, nl):
        par = tree.parent[i]
        d = kin.link_pos[:, i] - kin.link_pos[:, par]
        v_origin[:, i] = v_origin[:, par] + _cross(omega[:, par], d)
        omega[:, i] = omega[:, par] + kin.joint_axis_world[:, i] * qd[:, i - 1][:, None]
    v_com = v_origin + _cross(omega, kin.link_com - kin.link_pos)
    return omega, v_origin, v_com


def _com_jacobians(tree: KinematicTree, state: SimState, kin: Kinematics):
    """Stacked COM linear/angular Jacobians, (N, nl, 3, dof)."""
    n = state.n
    nl, nj = tree.n_links, tree.n_joints
    nb = tree.nb
    S = kin.joint_axis_world[:, 1:]                      # (N, nj, 3)
    O = kin.link_pos[:, 1:]                              # (N, nj, 3)
    C = kin.link_com                                     # (N, nl, 3)
    mask = tree._ancestor_f[None, :, :, None]            # (1, nl, nj, 1) float
    rel = C[:, :, None, :] - O[:, None, :, :]            # (N, nl, nj, 3)
    jv = np.zeros((n, nl, 3, nb + nj))
    jw = np.zeros((n, nl, 3, nb + nj))
    sm = S[:, None, :, :] * mask
    jv[..., nb:] = _cross(sm, rel).transpose(0, 1, 3, 2)
    jw[..., nb:] = sm.transpose(0, 1, 3, 2)
    if not tree.fixed_base:
        idx = np.arange(3)
        jv[:, :, idx, idx] = 1.0
        jw[:, :, idx, 3 + idx] = 1.0
        jv[..., 3:6] = -skew(C - kin.link_pos[:, :1])
    return jv, jw


def _world_inertias(tree: KinematicTree, kin: Kinematics) -> np.ndarray:
    R = kin.link_rot
    return (R @ tree.inertia_local) @ R.swapaxes(-1, -2)


def _mass_matrix_from(tree: KinematicTree, jv, jw, iw) -> np.ndarray:
    n, nl = jv.shape[0], jv.shape[1]
    dof = jv.shape[-1]
    jv_w = np.sqrt(tree.mass)[None, :, None, None] * jv
    jv_flat = jv_w.reshape(n, nl * 3, dof)
    m = jv_flat.swapaxes(-1, -2) @ jv_flat
    iwjw = (iw @ jw).reshape(n, nl * 3, dof)
    jw_flat = jw.reshape(n, nl * 3, dof)
    m += jw_flat.swapaxes(-1, -2) @ iwjw
    return 0.5 * (m + m.swapaxes(-1, -2))


def mass_matrix(tree: KinematicTree, state: SimState, kin: Kinematics | None = None) -> np.ndarray:
    """Joint-space inertia matrix (N, dof, dof); symmetric positive-definite."""
    if kin is None:
        kin = forward_kinematics(tree, state)
    jv, jw = _com_jacobians(tree, state, kin)
    iw = _world_inertias(tree, kin)
    return _mass_matrix_from(tree, jv, jw, iw)


def _velocity_product_accels(tree: KinematicTree, state: SimState, kin: Kinematics, omega, v_origin):
    """Link accelerations with zero generalized acceleration (Coriolis/centrifugal)."""
    n = state.n
    nl = tree.n_links
    alpha = np.zeros((n, nl, 3))
    a_origin = np.zeros((n, nl, 3))
    qd = state.joint_vel
    for i in range(1, nl):
        par = tree.parent[i]
        d = kin.link_pos[:, i] - kin.link_pos[:, par]
        a_origin[:, i] = (
            a_origin[:, par]
            + _cross(alpha[:, par], d)
            + _cross(omega[:, par], _cross(omega[:, par], d))
        )
        alpha[:, i] = alpha[:, par] + _cross(
            omega[:, par], kin.joint_axis_world[:, i]) * qd[:, i - 1][:, None]
    e = kin.link_com - kin.link_pos
    a_com = a_origin + _cross(alpha, e) + _cross(omega, _cross(omega, e))
    return alpha, a_com


def bias_forces(tree: KinematicTree, state: SimState, gravity: float = GRAVITY,
                kin: Kinematics | None = None) -> np.ndarray:
    """Generalized C(q, qd) qd + g(q): the torque needed to sustain the motion.

    A static configuration needs tau = bias; the equation of motion is
    M(q) du = tau_generalized - bias + contact/external terms.
    """
    if kin is None:
        kin = forward_kinematics(tree, state)
    omega, v_origin, _ = _link_velocities(tree, state, kin)
    jv, jw = _com_jacobians(tree, state, kin)
    iw = _world_inertias(tree, kin)
    return _bias_from(tree, state, kin, omega, v_origin, jv, jw, iw, gravity)


def _bias_from(tree, state, kin, omega, v_origin, jv, jw, iw, gravity) -> np.ndarray:
    alpha, a_com = _velocity_product_accels(tree, state, kin, omega, v_origin)
    n, nl = a_com.shape[0], a_com.shape[1]
    dof = jv.shape[-1]
    g_vec = np.array([0.0, 0.0, -gravity])
    f = tree.mass[None, :, None] * (a_com - g_vec)
    tq = (iw @ alpha[..., None])[..., 0] + _cross(omega, (iw @ omega[..., None])[..., 0])
    out = jv.reshape(n, nl * 3, dof).swapaxes(-1, -2) @ f.reshape(n, nl * 3, 1)
    out += jw.reshape(n, nl * 3, dof).swapaxes(-1, -2) @ tq.reshape(n, nl * 3, 1)
    return out[..., 0]


def point_state(tree: KinematicTree, state: SimState, kin: Kinematics,
                link_idx: int, offset: np.ndarray,
                omega=None, v_origin=None):
    """World position and velocity of a point rigidly attached to a link."""
    if omega is None:
        omega, v_origin, _ = _link_velocities(tree, state, kin)
    pos = kin.link_pos[:, link_idx] + kin.link_rot[:, link_idx] @ np.asarray(offset, dtype=float)
    vel = v_origin[:, link_idx] + _cross(omega[:, link_idx], pos - kin.link_pos[:, link_idx])
    return pos, vel


def _foot_states_from(tree: KinematicTree, kin: Kinematics, omega, v_origin):
    links = [tree.markers[name][0] for name in FOOT_MARKERS]
    offsets = np.stack([tree.markers[name][1] for name in FOOT_MARKERS])
    pos = kin.link_pos[:, links] + (kin.link_rot[:, links] @ offsets[None, :, :, None])[..., 0]
    vel = v_origin[:, links] + _cross(omega[:, links], pos - kin.link_pos[:, links])
    return pos, vel


def foot_states(tree: KinematicTree, state: SimState, kin: Kinematics | None = None):
    """Positions and velocities of the four feet, each (N, 4, 3)."""
    if kin is None:
        kin = forward_kinematics(tree, state)
    omega, v_origin, _ = _link_velocities(tree, state, kin)
    return _foot_states_from(tree, kin, omega, v_origin)


def _contact_forces_from(tree: KinematicTree, kin: Kinematics, omega, v_origin,
                         params: ContactParams):
    pos, vel = _foot_states_from(tree, kin, omega, v_origin)
    z = pos[..., 2]
    penetrating = z < 0.0
    normal = np.where(penetrating,
                      np.maximum(0.0, -params.stiffness * z - params.damping * vel[..., 2]),
                      0.0)
    vt = vel[..., :2]
    speed = np.sqrt(vt[..., 0] ** 2 + vt[..., 1] ** 2)
    denom = np.maximum(speed, params.regularization_velocity)
    ft = -params.friction * normal[..., None] * vt / denom[..., None]
    force = np.concatenate([ft, normal[..., None]], axis=-1)
    return force, pos, normal > 0.0


def contact_forces(tree: KinematicTree, state: SimState, params: ContactParams,
                   kin: Kinematics | None = None):
    """Penalty contact force per foot, (N, 4, 3) in world frame.

    Normal: max(0, -k z - d zdot) while the foot penetrates (z < 0), zero
    otherwise. Tangential: Coulomb at mu * N, linearly regularized below the
    regularization velocity.
    """
    if kin is None:
        kin = forward_kinematics(tree, state)
    omega, v_origin, _ = _link_velocities(tree, state, kin)
    return _contact_forces_from(tree, kin, omega, v_origin, params)


def _point_jacobian_apply(tree: KinematicTree, kin: Kinematics, link_idx: int,
                          point: np.ndarray, force: np.ndarray, out: np.ndarray) -> None:
    """Accumulate J_point^T @ force into the generalized force vector out."""
    nb = tree.nb
    if not tree.fixed_base:
        out[:, 0:3] += force
        out[:, 3:6] += _cross(point - kin.link_pos[:, 0], force)
    cols = np.where(tree._ancestor[link_idx])[0]
    if cols.size:
        arm = point[:, None, :] - kin.link_pos[:, 1:][:, cols]
        jv = _cross(kin.joint_axis_world[:, 1:][:, cols], arm)
        out[:, nb + cols] += np.sum(jv * force[:, None, :], axis=-1)


def step(tree: KinematicTree, state: SimState, tau: np.ndarray,
         external_force: np.ndarray | None = None, dt: float = 1e-3,
         contact_params: ContactParams | None = ContactParams(),
         gravity: float = GRAVITY) -> SimState:
    """Advance one fixed step of semi-implicit Euler under joint torques tau.

    ``external_force`` is a world-frame force applied at the base COM
    (disturbance injection). Contacts are disabled when ``contact_params`` is
    None. Deterministic: identical inputs give bit-identical successors.
    """
    if dt <= 0.0:
        raise ValueError("step requires dt > 0")
    tau = np.asarray(tau, dtype=float)
    if tau.shape[-1] != tree.n_joints:
        raise ValueError(f"tau has {tau.shape[-1]} entries, tree has {tree.n_joints} joints")
    if _fast is not None and not tree.fixed_base:
        return _step_compiled(tree, state, tau, external_force, dt, contact_params, gravity)
    n = state.n
    nb = tree.nb
    kin = forward_kinematics(tree, state)
    omega, v_origin, _ = _link_velocities(tree, state, kin)
    jv, jw = _com_jacobians(tree, state, kin)
    iw = _world_inertias(tree, kin)
    m = _mass_matrix_from(tree, jv, jw, iw)
    bias = _bias_from(tree, state, kin, omega, v_origin, jv, jw, iw, gravity)
    rhs = -bias
    rhs[:, nb:] += tau
    if contact_params is not None:
        force, pos, flags = _contact_forces_from(tree, kin, omega, v_origin, contact_params)
        if flags.any():
            for k, name in enumerate(FOOT_MARKERS):
                li, _ = tree.markers[name]
                _point_jacobian_apply(tree, kin, li, pos[:, k], force[:, k], rhs)
    if external_force is not None and not tree.fixed_base:
        f = np.asarray(external_force, dtype=float).reshape(n, 3)
        base_com = kin.link_com[:, 0]
        rhs[:, 0:3] += f
        rhs[:, 3:6] += _cross(base_com - kin.link_pos[:, 0], f)
    try:
        udot = np.linalg.solve(m, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise FatalSimulationError(f"singular mass matrix: {exc}") from exc

    new = state.copy()
    if tree.fixed_base:
        new.joint_vel = state.joint_vel + dt * udot
        new.joint_pos = state.joint_pos + dt * new.joint_vel
    else:
        v_new = state.base_vel + dt * udot[:, 0:3]
        omega_w = quat_rotate(state.base_quat, state.base_ang_vel) + dt * udot[:, 3:6]
        qd_new = state.joint_vel + dt * udot[:, 6:]
        omega_b = quat_rotate(quat_conjugate(state.base_quat), omega_w)
        new.base_vel = v_new
        new.base_ang_vel = omega_b
        new.joint_vel = qd_new
        new.base_pos = state.base_pos + dt * v_new
        new.base_quat = quat_integrate(state.base_quat, omega_b, dt)
        new.joint_pos = state.joint_pos + dt * qd_new
    new.time = state.time + dt
    return new


def _fast_pack(tree: KinematicTree):
    """Constant arrays for the compiled kernel, cached on the tree."""
    pack = getattr(tree, "_fast_arrays", None)
    if pack is None:
        if all(name in tree.markers for name in FOOT_MARKERS):
            foot_links = np.array([tree.markers[m][0] for m in FOOT_MARKERS], dtype=np.int64)
            foot_offsets = np.stack([tree.markers[m][1] for m in FOOT_MARKERS])
        else:
            foot_links = np.zeros(0, dtype=np.int64)
            foot_offsets = np.zeros((0, 3))
        pack = (tree.parent.astype(np.int64), tree.joint_offset, tree.joint_rot,
                tree.joint_axis, tree.mass, tree.com_local, tree.inertia_local,
                foot_links, foot_offsets)
        tree._fast_arrays = pack
    return pack


def _step_compiled(tree, state, tau, external_force, dt, contact_params, gravity) -> SimState:
    n = state.n
    nj = tree.n_joints
    if external_force is None:
        external = np.zeros((n, 3))
    else:
        external = np.asarray(external_force, dtype=float).reshape(n, 3)
    if contact_params is None:
        contacts_on, k_n, d_n, mu, v_reg = False, 0.0, 0.0, 0.0, 1.0
    else:
        contacts_on = True
        k_n, d_n = contact_params.stiffness, contact_params.damping
        mu, v_reg = contact_params.friction, contact_params.regularization_velocity
    new = SimState(
        base_pos=np.empty((n, 3)), base_quat=np.empty((n, 4)), base_vel=np.empty((n, 3)),
        base_ang_vel=np.empty((n, 3)), joint_pos=np.empty((n, nj)),
        joint_vel=np.empty((n, nj)), time=state.time + dt)
    ok = _fast.step_batch(
        *_fast_pack(tree),
        state.base_pos, state.base_quat, state.base_vel, state.base_ang_vel,
        state.joint_pos, state.joint_vel,
        tau, external, dt, gravity, contacts_on, k_n, d_n, mu, v_reg,
        new.base_pos, new.base_quat, new.base_vel, new.base_ang_vel,
        new.joint_pos, new.joint_vel)
    if not ok:
        raise FatalSimulationError("singular mass matrix in compiled step")
    return new


def com_momentum(tree: KinematicTree, state: SimState):
    """Total linear momentum and angular momentum about the instantaneous COM."""
    kin = forward_kinematics(tree, state)
    omega, _, v_com = _link_velocities(tree, state, kin)
    iw = _world_inertias(tree, kin)
    m = tree.mass[None, :, None]
    lin = np.sum(m * v_com, axis=1)
    c_total = np.sum(m * kin.link_com, axis=1) / tree.total_mass
    spin = (iw @ omega[..., None])[..., 0]
    orbital = _cross(kin.link_com - c_total[:, None, :], m * v_com)
    ang = np.sum(spin + orbital, axis=1)
    return lin, ang


def kinetic_energy(tree: KinematicTree, state: SimState) -> np.ndarray:
    """Total kinetic energy (N,) by per-link velocity propagation.

    Independent of the Jacobian path used by :func:`mass_matrix`; serves as
    the oracle for the mass-matrix Hessian check.
    """
    kin = forward_kinematics(tree, state)
    omega, _, v_com = _link_velocities(tree, state, kin)
    iw = _world_inertias(tree, kin)
    trans = 0.5 * np.sum(tree.mass[None, :] * np.sum(v_com * v_com, axis=-1), axis=1)
    rot = 0.5 * np.sum(np.sum(omega * (iw @ omega[..., None])[..., 0], axis=-1), axis=1)
    return trans + rot


def com_position(tree: KinematicTree, state: SimState) -> np.ndarray:
    kin = forward_kinematics(tree, state)
    return np.sum(tree.mass[None, :, None] * kin.link_com, axis=1) / tree.total_mass


def base_box_collision(tree: KinematicTree, state: SimState,
                       kin: Kinematics | None = None) -> np.ndarray:
    """True where any corner of the base collision box touches the ground plane."""
    if kin is None:
        kin = forward_kinematics(tree, state)
    h = tree.base_box
    corners = np.array([[sx * h[0], sy * h[1], sz * h[2]]
                        for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)])
    world = kin.link_pos[:, 0, None, :] + (kin.link_rot[:, 0, None] @ corners[None, :, :, None])[..., 0]
    return np.min(world[..., 2], axis=-1) <= 0.0
