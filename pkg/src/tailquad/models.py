"""Robot variant parameter sets and kinematic-tree construction.

Three variants ship as packaged config files: the bare quadruped
("minicheetah") and the same body with either of two serial-chain tails
("widowx250s", "viperx300s"). :func:`load_robot` turns a variant name into a
ready tree plus its nominal standing state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .configio import ConfigError, load_config, model_config_path
from .dynamics import KinematicTree, SimState, forward_kinematics
from .mathutils import SpatialInertia, combine_inertias, inertia_about_point

LEG_ORDER = ("FL", "FR", "RL", "RR")

_AXES = {"x": np.array([1.0, 0.0, 0.0]),
         "y": np.array([0.0, 1.0, 0.0]),
         "z": np.array([0.0, 0.0, 1.0])}


@dataclass(frozen=True)
class TailSpec:
    """Serial 6-joint tail: total mass/length split over links by fractions."""

    name: str
    total_length: float
    total_mass: float
    length_fractions: np.ndarray
    mass_fractions: np.ndarray
    axes: tuple[str, ...]
    limits: np.ndarray            # (6, 2)
    nominal: np.ndarray           # (6,)
    mount: np.ndarray             # (3,) on the base, arm pointing backward
    link_radius: float = 0.02
    inertia_floor: float = 0.002  # kg*m^2 per axis; motor/gripper housing dominates thin links

    def __post_init__(self):
        for f in ("length_fractions", "mass_fractions", "limits", "nominal", "mount"):
            object.__setattr__(self, f, np.asarray(getattr(self, f), dtype=float))
        if len(self.length_fractions) != 6 or len(self.axes) != 6:
            raise ConfigError("tail must have exactly 6 joints")
        for f in ("length_fractions", "mass_fractions"):
            if abs(float(np.sum(getattr(self, f))) - 1.0) > 1e-9:
                raise ConfigError(f"tail {f} must sum to 1")
        if np.any(self.limits[:, 0] >= self.limits[:, 1]):
            raise ConfigError("tail joint limits must be well-ordered")
        if np.any(self.nominal < self.limits[:, 0]) or np.any(self.nominal > self.limits[:, 1]):
            raise ConfigError("tail nominal pose violates joint limits")


@dataclass(frozen=True)
class QuadrupedSpec:
    """Trunk plus four 3-DoF legs (abduction, hip pitch, knee pitch)."""

    name: str
    base_mass: float
    base_size: np.ndarray         # (3,) box dims -> inertia and collision box
    base_com: np.ndarray
    hip_positions: dict[str, np.ndarray]
    abd_offset: float
    thigh_length: float
    shank_length: float
    leg_masses: dict[str, float]
    leg_limits: dict[str, tuple[float, float]]
    leg_nominal: np.ndarray       # (3,) abd, hip, knee
    nominal_height: float
    torque_limit: float

    def __post_init__(self):
        object.__setattr__(self, "base_size", np.asarray(self.base_size, dtype=float))
        object.__setattr__(self, "base_com", np.asarray(self.base_com, dtype=float))
        object.__setattr__(self, "leg_nominal", np.asarray(self.leg_nominal, dtype=float))
        if not self.nominal_height > 0.0:
            raise ConfigError("nominal_height must be positive")
        for joint, angle in zip(("abd", "hip", "knee"), self.leg_nominal):
            lo, hi = self.leg_limits[joint]
            if not lo <= angle <= hi:
                raise ConfigError(f"nominal {joint} angle {angle} outside limits [{lo}, {hi}]")

    @property
    def nominal_joints(self) -> np.ndarray:
        return np.tile(self.leg_nominal, 4)


def _box_inertia(mass: float, size: np.ndarray) -> np.ndarray:
    l, w, h = size
    return mass / 12.0 * np.diag([w * w + h * h, l * l + h * h, l * l + w * w])


def _rod_inertia(mass: float, length: float, radius: float, axis: int) -> np.ndarray:
    """Solid rod along the given axis index."""
    perp = mass * (3.0 * radius * radius + length * length) / 12.0
    along = 0.5 * mass * radius * radius
    diag = [perp, perp, perp]
    diag[axis] = along
    return np.diag(diag)


def quadruped_spec_from_config(tree: dict) -> QuadrupedSpec:
    legs = tree["legs"]
    return QuadrupedSpec(
        name=tree.get("name", "quadruped"),
        base_mass=float(tree["base"]["mass"]),
        base_size=tree["base"]["size"],
        base_com=tree["base"].get("com", [0.0, 0.0, 0.0]),
        hip_positions={k: np.asarray(v, dtype=float) for k, v in legs["hip_positions"].items()},
        abd_offset=float(legs["abd_offset"]),
        thigh_length=float(legs["thigh_length"]),
        shank_length=float(legs["shank_length"]),
        leg_masses={k: float(v) for k, v in legs["masses"].items()},
        leg_limits={k: (float(v[0]), float(v[1])) for k, v in legs["limits"].items()},
        leg_nominal=legs["nominal"],
        nominal_height=float(tree["nominal_height"]),
        torque_limit=float(tree.get("torque_limit", 17.0)),
    )


def tail_spec_from_config(tree: dict) -> TailSpec:
    t = tree["tail"]
    return TailSpec(
        name=tree.get("name", "tail"),
        total_length=float(t["total_length"]),
        total_mass=float(t["total_mass"]),
        length_fractions=t["length_fractions"],
        mass_fractions=t["mass_fractions"],
        axes=tuple(t["axes"]),
        limits=t["limits"],
        nominal=t["nominal"],
        mount=t["mount"],
        link_radius=float(t.get("link_radius", 0.02)),
        inertia_floor=float(t.get("inertia_floor", 0.002)),
    )


def load_quadruped_spec(name: str = "minicheetah") -> QuadrupedSpec:
    return quadruped_spec_from_config(load_config(model_config_path(name)))


def load_tail_spec(name: str) -> TailSpec:
    return tail_spec_from_config(load_config(model_config_path(name)))


def build_robot(quad: QuadrupedSpec, tail: TailSpec | None = None) -> KinematicTree:
    """Assemble the kinematic tree: trunk, four legs, optional rear-mounted tail."""
    names = ["base"]
    parent = [-1]
    offsets = [np.zeros(3)]
    rots = [np.eye(3)]
    axes = [np.zeros(3)]
    masses = [quad.base_mass]
    coms = [quad.base_com]
    inertias = [_box_inertia(quad.base_mass, quad.base_size)]
    limits: list[tuple[float, float]] = []
    joint_names: list[str] = []
    markers: dict[str, tuple[int, np.ndarray]] = {}

    x_axis, y_axis = _AXES["x"], _AXES["y"]
    for leg in LEG_ORDER:
        hip = quad.hip_positions[leg]
        side = 1.0 if hip[1] > 0 else -1.0
        abd_vec = np.array([0.0, side * quad.abd_offset, 0.0])
        base_idx = 0
        # abduction link: joint at the hip mount, axis x; short lateral link
        names.append(f"{leg}_abd")
        parent.append(base_idx)
        offsets.append(hip)
        rots.append(np.eye(3))
        axes.append(x_axis)
        masses.append(quad.leg_masses["abd"])
        coms.append(abd_vec / 2.0)
        inertias.append(_rod_inertia(quad.leg_masses["abd"], quad.abd_offset, 0.03, 1))
        limits.append(quad.leg_limits["abd"])
        joint_names.append(f"{leg}_abd")
        abd_idx = len(names) - 1
        # thigh: axis y, link extends -z
        names.append(f"{leg}_thigh")
        parent.append(abd_idx)
        offsets.append(abd_vec)
        rots.append(np.eye(3))
        axes.append(y_axis)
        masses.append(quad.leg_masses["thigh"])
        coms.append(np.array([0.0, 0.0, -quad.thigh_length / 2.0]))
        inertias.append(_rod_inertia(quad.leg_masses["thigh"], quad.thigh_length, 0.02, 2))
        limits.append(quad.leg_limits["hip"])
        joint_names.append(f"{leg}_hip")
        thigh_idx = len(names) - 1
        # shank: axis y, foot marker at the tip
        names.append(f"{leg}_shank")
        parent.append(thigh_idx)
        offsets.append(np.array([0.0, 0.0, -quad.thigh_length]))
        rots.append(np.eye(3))
        axes.append(y_axis)
        masses.append(quad.leg_masses["shank"])
        coms.append(np.array([0.0, 0.0, -quad.shank_length / 2.0]))
        inertias.append(_rod_inertia(quad.leg_masses["shank"], quad.shank_length, 0.015, 2))
        limits.append(quad.leg_limits["knee"])
        joint_names.append(f"{leg}_knee")
        markers[f"foot_{leg}"] = (len(names) - 1, np.array([0.0, 0.0, -quad.shank_length]))

    if tail is not None:
        lengths = tail.total_length * tail.length_fractions
        link_masses = tail.total_mass * tail.mass_fractions
        # mount frame rotated 180 deg about z: tail link +x points backward
        mount_rot = np.array([[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]])
        par = 0
        offset = np.asarray(tail.mount, dtype=float)
        rot = mount_rot
        for j in range(6):
            names.append(f"tail_{j}")
            parent.append(par)
            offsets.append(offset)
            rots.append(rot)
            axes.append(_AXES[tail.axes[j]])
            masses.append(link_masses[j])
            coms.append(np.array([lengths[j] / 2.0, 0.0, 0.0]))
            rod = _rod_inertia(link_masses[j], lengths[j], tail.link_radius, 0)
            inertias.append(np.maximum(rod, tail.inertia_floor * np.eye(3)))
            limits.append((tail.limits[j, 0], tail.limits[j, 1]))
            joint_names.append(f"tail_{j}")
            par = len(names) - 1
            offset = np.array([lengths[j], 0.0, 0.0])
            rot = np.eye(3)
        markers["tail_tip"] = (len(names) - 1, np.array([lengths[5], 0.0, 0.0]))

    return KinematicTree(
        names=names,
        parent=np.array(parent),
        joint_offset=np.array(offsets),
        joint_rot=np.array(rots),
        joint_axis=np.array(axes),
        mass=np.array(masses),
        com_local=np.array(coms),
        inertia_local=np.array(inertias),
        markers=markers,
        joint_limits=np.array(limits),
        torque_limit=quad.torque_limit,
        base_box=quad.base_size / 2.0,
        joint_names=joint_names,
    )


def nominal_joint_positions(quad: QuadrupedSpec, tail: TailSpec | None = None) -> np.ndarray:
    if tail is None:
        return quad.nominal_joints
    return np.concatenate([quad.nominal_joints, tail.nominal])


def nominal_state(tree: KinematicTree, quad: QuadrupedSpec, tail: TailSpec | None = None,
                  n: int = 1) -> SimState:
    """Standing pose: joints at nominal, base at the standing height, at rest."""
    q_nom = nominal_joint_positions(quad, tail)
    if len(q_nom) != tree.n_joints:
        raise ConfigError("tree was not built from the given specs")
    state = SimState.zeros(tree, n)
    state.joint_pos[:] = q_nom
    state.base_pos[:, 2] = quad.nominal_height
    return state


def tail_inertia_about_mount(tree: KinematicTree, tail: TailSpec) -> float:
    """Aggregate rotational inertia of the tail chain about its mount point.

    Evaluated in the straightened configuration; used to compare appendage
    authority across variants.
    """
    spec_state = SimState.zeros(tree, 1)
    kin = forward_kinematics(tree, spec_state)
    tail_links = [i for i, nm in enumerate(tree.names) if nm.startswith("tail_")]
    parts = []
    for i in tail_links:
        parts.append(SpatialInertia(
            mass=tree.mass[i],
            com=kin.link_com[0, i],
            inertia=kin.link_rot[0, i] @ tree.inertia_local[i] @ kin.link_rot[0, i].T,
        ))
    combined = combine_inertias(parts)
    mount_world = kin.link_pos[0, tail_links[0]]
    about_mount = inertia_about_point(combined, mount_world)
    return float(np.trace(about_mount))


def load_robot(variant: str, n: int = 1):
    """Build (tree, quad_spec, tail_spec, nominal SimState) for a variant name.

    Variants: "none"/"minicheetah" (no tail), "widowx250s", "viperx300s".
    """
    quad = load_quadruped_spec("minicheetah")
    if variant in ("none", "minicheetah", None):
        tail = None
    elif variant in ("widowx250s", "viperx300s"):
        tail = load_tail_spec(variant)
    else:
        raise ConfigError(f"unknown robot variant '{variant}'")
    tree = build_robot(quad, tail)
    return tree, quad, tail, nominal_state(tree, quad, tail, n)


__all__ = [
    "TailSpec", "QuadrupedSpec", "build_robot", "nominal_state",
    "nominal_joint_positions", "load_robot", "load_quadruped_spec",
    "load_tail_spec", "tail_inertia_about_mount", "LEG_ORDER",
    "quadruped_spec_from_config", "tail_spec_from_config",
]
