"""Reward terms for the three tasks, the foot-airtime tracker, and the total.

Terms split into non-negative objective rewards (r_pos) and non-positive
constraint rewards (r_neg); the step total is

    total = sum(r_pos) * exp(reward_factor * sum(r_neg))

with reward_factor 0.02. Coefficients default to the values reproduced in
:data:`GENERAL_COEFFS`, :data:`TURNING_COEFFS`, and :data:`REORIENT_COEFFS`;
the turning task swaps coefficient columns between its run and turn sections,
the reorientation task between its air and ground regions (air above a base
height of 0.4 m). All functions broadcast over a leading batch dimension.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .mathutils import heading_angle_between

REWARD_FACTOR = 0.02
FOOT_CLEARANCE_THRESHOLD = 0.09   # m
AIRTIME_CUTOFF = 0.25             # s, airtime term vanishes at or above this
AIRTIME_FLOOR = 0.2               # s, duration floor inside the airtime term
AIR_REGION_HEIGHT = 0.4           # m, air/ground split for reorientation

# general constraint coefficients: joint position, joint velocity, torque, smoothness
GENERAL_COEFFS = {"k_p": -4.0, "k_pdot": -0.005, "k_tau": -0.002, "k_s": -4.0}

# turning task, per-section columns
TURNING_COEFFS = {
    "run":  {"k_v": 2.0, "k_phi": 4.5, "k_w": 0.0, "k_air": 0.5,
             "k_cl": -50.0, "k_base": -10.0, "k_ori": -100.0, "k_arm": -15.0},
    "turn": {"k_v": 2.0, "k_phi": 4.5, "k_w": 3.0, "k_air": 0.5,
             "k_cl": -50.0, "k_base": -10.0, "k_ori": 0.0, "k_arm": 0.0},
}

# reorientation task, per-region columns
REORIENT_COEFFS = {
    "air":    {"k_ori": 5.0, "k_v": 0.0, "k_h": 0.0, "k_cl": 0.0, "k_arm": 0.0},
    "ground": {"k_ori": 5.0, "k_v": 2.5, "k_h": 5.0, "k_cl": -100.0, "k_arm": -150.0},
}

TURNING_POS_TERMS = ("r_v", "r_phi", "r_w", "r_air")
TURNING_NEG_TERMS = ("r_cl", "r_base", "r_ori", "r_arm")
REORIENT_POS_TERMS = ("r_ori", "r_v", "r_h", "r_w")
REORIENT_NEG_TERMS = ("r_cl", "r_arm")
GENERAL_TERMS = ("r_p", "r_pdot", "r_tau", "r_s")


@dataclass
class RewardCoefficients:
    """Full coefficient set; overridable from the experiment config."""

    general: dict = field(default_factory=lambda: dict(GENERAL_COEFFS))
    turning: dict = field(default_factory=lambda: {k: dict(v) for k, v in TURNING_COEFFS.items()})
    reorient: dict = field(default_factory=lambda: {k: dict(v) for k, v in REORIENT_COEFFS.items()})
    reward_factor: float = REWARD_FACTOR
    foot_clearance_threshold: float = FOOT_CLEARANCE_THRESHOLD
    # Table III defines no yaw-rate term; optional and off by default
    reorient_yaw_rate_enabled: bool = False

    def __post_init__(self):
        if not self.reward_factor > 0.0:
            raise ValueError("reward_factor must be positive")
        for name, value in self.general.items():
            if value > 0.0:
                raise ValueError(f"general constraint coefficient {name} must be <= 0")
        for table in (self.turning, self.reorient):
            for column in table.values():
                for name, value in column.items():
                    positive = name in ("k_v", "k_phi", "k_w", "k_air", "k_ori", "k_h")
                    if positive and table is self.turning and name == "k_ori":
                        positive = False  # turning's orientation term is a constraint
                    if positive and value < 0.0:
                        raise ValueError(f"objective coefficient {name} must be >= 0")
                    if not positive and value > 0.0:
                        raise ValueError(f"constraint coefficient {name} must be <= 0")

    def with_overrides(self, overrides: dict | None) -> "RewardCoefficients":
        if not overrides:
            return self
        new = replace(self)
        for key, value in overrides.items():
            if key in ("reward_factor", "foot_clearance_threshold", "reorient_yaw_rate_enabled"):
                setattr(new, key, value)
            elif key == "general":
                new.general = {**new.general, **value}
            elif key == "turning":
                new.turning = {sec: {**new.turning[sec], **value.get(sec, {})} for sec in new.turning}
            elif key == "reorient":
                new.reorient = {reg: {**new.reorient[reg], **value.get(reg, {})} for reg in new.reorient}
            else:
                raise ValueError(f"unknown reward coefficient group '{key}'")
        new.__post_init__()
        return new


@dataclass
class FootContactTracker:
    """Per-foot stance and swing stopwatches, (N, 4) seconds.

    Exactly one of the two accumulates per foot per step; the other holds its
    last completed duration until the next transition resets it.
    """

    stance: np.ndarray
    swing: np.ndarray
    in_contact: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "FootContactTracker":
        return cls(np.zeros((n, 4)), np.zeros((n, 4)), np.zeros((n, 4), dtype=bool))

    def reset(self, idx) -> None:
        self.stance[idx] = 0.0
        self.swing[idx] = 0.0
        self.in_contact[idx] = False


def update_contact_tracker(tracker: FootContactTracker, contact: np.ndarray, dt: float) -> FootContactTracker:
    """Advance the stopwatches one control step given fresh contact flags."""
    if dt <= 0.0:
        raise ValueError("tracker update requires dt > 0")
    contact = np.asarray(contact, dtype=bool)
    touchdown = contact & ~tracker.in_contact
    liftoff = ~contact & tracker.in_contact
    stance = np.where(touchdown, 0.0, tracker.stance)
    swing = np.where(liftoff, 0.0, tracker.swing)
    stance = np.where(contact, stance + dt, stance)
    swing = np.where(~contact, swing + dt, swing)
    return FootContactTracker(stance=stance, swing=swing, in_contact=contact)


def general_constraint_reward(joint_pos, joint_vel, tau, q_des, q_des_prev, q_nominal,
                              coeffs: dict | None = None) -> dict:
    """Table-I terms: squared-norm penalties on pose error, speed, torque, smoothness."""
    c = coeffs or GENERAL_COEFFS
    joint_pos = np.asarray(joint_pos, dtype=float)
    for name, arr in (("joint_vel", joint_vel), ("tau", tau), ("q_des", q_des),
                      ("q_des_prev", q_des_prev)):
        if np.asarray(arr).shape != joint_pos.shape:
            raise ValueError(f"{name} shape {np.asarray(arr).shape} != joint_pos {joint_pos.shape}")
    dev = joint_pos - q_nominal
    return {
        "r_p": c["k_p"] * np.sum(dev * dev, axis=-1),
        "r_pdot": c["k_pdot"] * np.sum(np.square(joint_vel), axis=-1),
        "r_tau": c["k_tau"] * np.sum(np.square(tau), axis=-1),
        "r_s": c["k_s"] * np.sum(np.square(np.asarray(q_des) - np.asarray(q_des_prev)), axis=-1),
    }


def velocity_tracking_reward(k_v, v_cmd_xy, v_xy) -> np.ndarray:
    """k_v * exp(-(Vcmd_x - V_x)^2 - (Vcmd_y - V_y)^2)."""
    err = np.asarray(v_cmd_xy, dtype=float) - np.asarray(v_xy, dtype=float)
    return k_v * np.exp(-np.sum(err * err, axis=-1))


def yaw_alignment_reward(k_phi, heading_cmd, heading_body) -> np.ndarray:
    """k_phi * exp(-2.5 * angle between commanded and actual heading)."""
    ang = heading_angle_between(heading_cmd, heading_body)
    return k_phi * np.exp(-2.5 * np.asarray(ang))


def yaw_rate_reward(k_w, w_z, turn_sign=1.0) -> np.ndarray:
    """k_w * (3 - 12 exp(-0.5 w~_z)) with w~_z the yaw rate toward the commanded turn.

    The sign-corrected rate is floored at zero so the term stays in its range
    [k_w (3 - 12), 3 k_w]; spinning against the command scores the minimum.
    """
    w_signed = np.maximum(np.asarray(w_z, dtype=float) * np.asarray(turn_sign, dtype=float), 0.0)
    return k_w * (3.0 - 12.0 * np.exp(-0.5 * w_signed))


def foot_airtime_reward(k_air, stance, swing) -> np.ndarray:
    """Per-foot gated duration term, summed over the four feet.

    k_air * max(T_s, T_a, 0.2) while max(T_s, T_a) < 0.25, else 0.
    """
    t_max = np.maximum(stance, swing)
    per_foot = np.where(t_max < AIRTIME_CUTOFF,
                        k_air * np.maximum(t_max, AIRTIME_FLOOR), 0.0)
    return np.sum(per_foot, axis=-1)


def foot_clearance_reward(k_cl, foot_heights, swing_mask, threshold=FOOT_CLEARANCE_THRESHOLD) -> np.ndarray:
    """k_cl * (foot_z - threshold)^2 over swing feet only."""
    err = np.square(np.asarray(foot_heights, dtype=float) - threshold)
    return k_cl * np.sum(np.where(swing_mask, err, 0.0), axis=-1)


def base_stability_reward(k_base, v_z) -> np.ndarray:
    return k_base * np.square(np.asarray(v_z, dtype=float))


def flat_orientation_reward(k_ori, tilt_angle) -> np.ndarray:
    """Turning-task constraint: k_ori * angle(world z, body z)^2."""
    return k_ori * np.square(np.asarray(tilt_angle, dtype=float))


def upright_orientation_reward(k_ori, tilt_angle) -> np.ndarray:
    """Reorientation objective: k_ori * exp(-2.5 * angle(world z, body z)^2)."""
    return k_ori * np.exp(-2.5 * np.square(np.asarray(tilt_angle, dtype=float)))


def arm_posture_reward(k_arm, arm_pos, arm_nominal) -> np.ndarray:
    arm_pos = np.asarray(arm_pos, dtype=float)
    if arm_pos.shape[-1] == 0:
        return np.zeros(arm_pos.shape[:-1])
    dev = arm_pos - np.asarray(arm_nominal, dtype=float)
    return k_arm * np.sum(dev * dev, axis=-1)


def base_height_reward(k_h, nominal_height, base_height) -> np.ndarray:
    """k_h * exp(-10 |nominal height - height|)."""
    return k_h * np.exp(-10.0 * np.abs(nominal_height - np.asarray(base_height, dtype=float)))


def planar_velocity_reward(k_v, v_cmd_xy, v_xy) -> np.ndarray:
    """Reorientation-task velocity term: k_v * exp(-5 ||Vcmd_xy - V_xy||^2)."""
    err = np.asarray(v_cmd_xy, dtype=float) - np.asarray(v_xy, dtype=float)
    return k_v * np.exp(-5.0 * np.sum(err * err, axis=-1))


def turning_reward(section: str, *, v_cmd_xy, v_xy, heading_cmd, heading_body,
                   w_z, turn_sign, tracker: FootContactTracker, foot_heights,
                   v_z, tilt_angle, arm_pos, arm_nominal,
                   coeffs: RewardCoefficients | None = None) -> dict:
    """All Table-II terms under the run or turn coefficient column."""
    rc = coeffs or RewardCoefficients()
    if section not in rc.turning:
        raise ValueError(f"unknown turning section '{section}'")
    c = rc.turning[section]
    return {
        "r_v": velocity_tracking_reward(c["k_v"], v_cmd_xy, v_xy),
        "r_phi": yaw_alignment_reward(c["k_phi"], heading_cmd, heading_body),
        "r_w": yaw_rate_reward(c["k_w"], w_z, turn_sign),
        "r_air": foot_airtime_reward(c["k_air"], tracker.stance, tracker.swing),
        "r_cl": foot_clearance_reward(c["k_cl"], foot_heights, ~tracker.in_contact,
                                      rc.foot_clearance_threshold),
        "r_base": base_stability_reward(c["k_base"], v_z),
        "r_ori": flat_orientation_reward(c["k_ori"], tilt_angle),
        "r_arm": arm_posture_reward(c["k_arm"], arm_pos, arm_nominal),
    }


def reorient_reward(region: str, *, tilt_angle, v_cmd_xy, v_xy, nominal_height,
                    base_height, tracker: FootContactTracker, foot_heights,
                    arm_pos, arm_nominal, w_z=0.0, turn_sign=1.0,
                    coeffs: RewardCoefficients | None = None) -> dict:
    """All reorientation terms under the air or ground coefficient column."""
    rc = coeffs or RewardCoefficients()
    if region not in rc.reorient:
        raise ValueError(f"unknown reorientation region '{region}'")
    c = rc.reorient[region]
    out = {
        "r_ori": upright_orientation_reward(c["k_ori"], tilt_angle),
        "r_v": planar_velocity_reward(c["k_v"], v_cmd_xy, v_xy),
        "r_h": base_height_reward(c["k_h"], nominal_height, base_height),
        "r_cl": foot_clearance_reward(c["k_cl"], foot_heights, ~tracker.in_contact,
                                      rc.foot_clearance_threshold),
        "r_arm": arm_posture_reward(c["k_arm"], arm_pos, arm_nominal),
    }
    if rc.reorient_yaw_rate_enabled:
        out["r_w"] = yaw_rate_reward(c.get("k_w", 0.0), w_z, turn_sign)
    else:
        out["r_w"] = np.zeros(np.shape(out["r_ori"]))
    return out


def compose_total(r_pos_terms, r_neg_terms, reward_factor: float = REWARD_FACTOR):
    """total = (sum of objectives) * exp(reward_factor * sum of constraints)."""
    r_pos = sum(r_pos_terms) if r_pos_terms else 0.0
    r_neg = sum(r_neg_terms) if r_neg_terms else 0.0
    return r_pos * np.exp(reward_factor * r_neg)


@dataclass
class RewardBreakdown:
    """Named term values plus the composed Eq.-style total for one step."""

    terms: dict
    r_pos: np.ndarray
    r_neg: np.ndarray
    total: np.ndarray
    reward_factor: float = REWARD_FACTOR

    @classmethod
    def build(cls, task_terms: dict, general_terms: dict, pos_names, neg_names,
              reward_factor: float = REWARD_FACTOR) -> "RewardBreakdown":
        terms = {**task_terms, **general_terms}
        r_pos = sum(task_terms[name] for name in pos_names if name in task_terms)
        r_neg = sum(task_terms[name] for name in neg_names if name in task_terms)
        r_neg = r_neg + sum(general_terms.values())
        total = compose_total([r_pos], [r_neg], reward_factor)
        return cls(terms=terms, r_pos=np.asarray(r_pos, dtype=float),
                   r_neg=np.asarray(r_neg, dtype=float),
                   total=np.asarray(total, dtype=float), reward_factor=reward_factor)

    def recompute_total(self) -> np.ndarray:
        return compose_total([self.r_pos], [self.r_neg], self.reward_factor)
