"""Task environments: rapid turning, aerial reorientation + landing, balancing.

Each environment is vectorized: one instance advances N independent
simulations in lockstep, auto-resetting finished episodes. A control step
scales the policy action around the nominal pose, runs the PD loop for the
physics substeps, updates the foot-contact tracker and joint history, scores
the task's reward table, and applies the termination rules (body-ground
collision plus squared-norm limits on smoothness 2.0, torque 180.0, and joint
deviation 5.0; violation ends the episode with a penalty reward).

The turning task swaps reward columns from "run" to "turn" at the sampled
command onset (single switch per episode); the reorientation task swaps
between "air" and "ground" whenever the base height crosses 0.4 m; balancing
runs the turning task's run column throughout while random impulses shove the
base.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dynamics
from .control import (
    ACTION_FACTOR,
    JointHistory,
    ObservationLayout,
    PDGains,
    build_observation,
    pd_torque,
    scale_action,
)
from .curriculum import CurriculumState
from .dynamics import ContactParams, SimState, base_box_collision, contact_forces, forward_kinematics
from .mathutils import quat_from_axis_angle
from .models import load_robot, nominal_joint_positions
from .rewards import (
    AIR_REGION_HEIGHT,
    REORIENT_NEG_TERMS,
    REORIENT_POS_TERMS,
    TURNING_NEG_TERMS,
    TURNING_POS_TERMS,
    FootContactTracker,
    RewardBreakdown,
    RewardCoefficients,
    general_constraint_reward,
    reorient_reward,
    turning_reward,
    update_contact_tracker,
)

TERM_NONE = 0
TERM_BODY_COLLISION = 1
TERM_SMOOTHNESS = 2
TERM_TORQUE = 3
TERM_JOINT_POSITION = 4
TERM_TIME_LIMIT = 5
TERM_LANDED = 6

TERM_NAMES = {TERM_NONE: "none", TERM_BODY_COLLISION: "body_collision",
              TERM_SMOOTHNESS: "smoothness", TERM_TORQUE: "torque",
              TERM_JOINT_POSITION: "joint_position", TERM_TIME_LIMIT: "time_limit",
              TERM_LANDED: "landed"}


@dataclass
class TerminationRules:
    """Squared-norm limits; a rule fires strictly above its limit."""

    body_collision: bool = True
    smoothness_limit: float = 2.0
    torque_limit: float = 180.0
    joint_limit: float = 5.0
    penalty: float = -10.0

    def __post_init__(self):
        for name in ("smoothness_limit", "torque_limit", "joint_limit"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"termination {name} must be positive")


@dataclass
class Command:
    """Per-env command schedule for the turning/balancing tasks."""

    v_x: np.ndarray            # commanded forward speed along the heading
    v_y: np.ndarray
    heading: np.ndarray        # world heading command (rad)
    turn_angle: np.ndarray     # signed turn issued at onset (rad), |.| <= 135 deg
    onset_step: np.ndarray     # control step at which the turn command lands


@dataclass
class DisturbanceSpec:
    """One impulse event: magnitude spread over a force window at the base COM."""

    magnitude: float           # N*s
    direction: np.ndarray      # unit 3-vector
    window: float = 0.2        # s
    onset: float = 0.0         # s from episode start

    def __post_init__(self):
        if self.magnitude < 0.0 or self.window <= 0.0:
            raise ValueError("impulse magnitude must be >= 0 and window > 0")
        self.direction = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(self.direction)
        if n > 0:
            self.direction = self.direction / n

    @property
    def force(self) -> np.ndarray:
        return self.magnitude / self.window * self.direction


def check_termination(tree, state: SimState, tau, q_des, q_des_prev, q_nominal,
                      rules: TerminationRules, kin=None) -> np.ndarray:
    """Per-env termination tag (TERM_NONE where the episode may continue)."""
    n = state.n
    tags = np.zeros(n, dtype=np.int8)
    if rules.body_collision:
        hit = base_box_collision(tree, state, kin)
        tags = np.where(hit, TERM_BODY_COLLISION, tags)
    smooth = np.sum(np.square(np.asarray(q_des) - np.asarray(q_des_prev)), axis=-1)
    tags = np.where((tags == 0) & (smooth > rules.smoothness_limit), TERM_SMOOTHNESS, tags)
    torque = np.sum(np.square(np.asarray(tau)), axis=-1)
    tags = np.where((tags == 0) & (torque > rules.torque_limit), TERM_TORQUE, tags)
    joint = np.sum(np.square(state.joint_pos - q_nominal), axis=-1)
    tags = np.where((tags == 0) & (joint > rules.joint_limit), TERM_JOINT_POSITION, tags)
    return tags


class VectorTaskEnv:
    """Shared machinery for the vectorized task environments.

    Subclasses implement episode initialization, per-step command/section
    bookkeeping, and the task reward table. Each instance owns its RNG stream
    (seeded at construction); identical seeds reproduce identical episodes.
    """

    task: str = "base"
    with_command: bool = True

    def __init__(self, robot_variant: str, n_envs: int, seed: int = 0,
                 control_dt: float = 0.01, physics_substeps: int = 10,
                 episode_seconds: float = 4.0,
                 coeffs: RewardCoefficients | None = None,
                 rules: TerminationRules | None = None,
                 contact_params: ContactParams | None = None,
                 gains: PDGains | None = None,
                 curriculum: CurriculumState | None = None):
        self.tree, self.quad, self.tail, self._nominal = load_robot(robot_variant, n_envs)
        self.robot_variant = robot_variant
        self.n_envs = n_envs
        self.seed = seed
        self.control_dt = control_dt
        self.physics_substeps = physics_substeps
        self.physics_dt = control_dt / physics_substeps
        self.max_steps = int(round(episode_seconds / control_dt))
        self.coeffs = coeffs or RewardCoefficients()
        self.rules = rules or TerminationRules()
        self.contact_params = contact_params or ContactParams()
        self.gains = gains or PDGains()
        self.curriculum = curriculum
        self.q_nominal = nominal_joint_positions(self.quad, self.tail)
        self.arm_slice = slice(12, self.tree.n_joints)
        self.layout = ObservationLayout(self.tree.n_joints, self.with_command)
        self.obs_dim = self.layout.size
        self.act_dim = self.tree.n_joints
        self.rng = np.random.default_rng(seed)
        self.state = self._nominal.copy()
        self.tracker = FootContactTracker.zeros(n_envs)
        self.history = JointHistory.reset_to(self.state.joint_pos)
        self.q_des_prev = np.tile(self.q_nominal, (n_envs, 1))
        self.step_count = np.zeros(n_envs, dtype=int)
        self.episode_steps = np.full(n_envs, self.max_steps, dtype=int)
        self._done_once = np.zeros(n_envs, dtype=bool)
        # evaluation disables this to read terminal states; training keeps it on
        self.auto_reset = True

    # -- episode lifecycle -------------------------------------------------

    def set_curriculum(self, curriculum: CurriculumState) -> None:
        self.curriculum = curriculum

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        idx = np.arange(self.n_envs)
        self._reset_rows(idx)
        return self._observe()

    def _reset_rows(self, idx: np.ndarray) -> None:
        """Reinitialize the given env rows; subclasses sample their episodes here."""
        if len(idx) == 0:
            return
        fresh = self._sample_initial_state(idx)
        self.state.assign(idx, fresh)
        self.tracker.reset(idx)
        self.history.reset_rows(idx, fresh.joint_pos)
        self.q_des_prev[idx] = fresh.joint_pos
        self.step_count[idx] = 0
        self.episode_steps[idx] = self.max_steps
        self._done_once[idx] = False

    def _sample_initial_state(self, idx) -> SimState:
        """Nominal standing pose with a small random joint perturbation."""
        k = len(idx)
        st = SimState.zeros(self.tree, k)
        st.joint_pos[:] = self.q_nominal + self.rng.uniform(-0.05, 0.05, (k, self.tree.n_joints))
        st.base_pos[:, 2] = self.quad.nominal_height
        return st

    def _command_dict(self, idx=None) -> dict | None:
        return None

    def _observe(self) -> np.ndarray:
        return build_observation(self.state, self.history, self._command_dict(), self.layout)

    # -- control step ------------------------------------------------------

    def step(self, action: np.ndarray):
        """(observation, Eq.-1 total reward, done, info) for the whole batch."""
        action = np.asarray(action, dtype=float)
        q_des = scale_action(action, self.q_nominal, self.tree.joint_limits, ACTION_FACTOR)
        prev_joint_pos = self.state.joint_pos.copy()
        tau_sum = np.zeros_like(q_des)
        state = self.state
        external = self._external_force()
        for _ in range(self.physics_substeps):
            tau = pd_torque(q_des, state.joint_pos, state.joint_vel,
                            self.gains, self.tree.torque_limit)
            tau_sum += tau
            state = dynamics.step(self.tree, state, tau, external_force=external,
                                  dt=self.physics_dt, contact_params=self.contact_params)
        if not np.all(np.isfinite(state.joint_pos)) or not np.all(np.isfinite(state.base_pos)):
            bad = np.where(~np.isfinite(state.joint_pos).all(axis=-1)
                           | ~np.isfinite(state.base_pos).all(axis=-1))[0]
            raise dynamics.FatalSimulationError(
                f"non-finite state in {self.task} env rows {bad.tolist()} "
                f"at t={state.time[0]:.3f}")
        self.state = state
        tau_mean = tau_sum / self.physics_substeps
        self.step_count += 1

        kin = forward_kinematics(self.tree, state)
        _, _, contact = contact_forces(self.tree, state, self.contact_params, kin)
        self.tracker = update_contact_tracker(self.tracker, contact, self.control_dt)
        self._post_physics(kin)

        breakdown = self._reward(kin, tau_mean, q_des)
        reward = breakdown.total.copy()

        tags = check_termination(self.tree, state, tau_mean, q_des, self.q_des_prev,
                                 self.q_nominal, self.rules, kin)
        tags = self._extra_termination(tags, kin)
        terminated = tags > 0
        truncated = (~terminated) & (self.step_count >= self.episode_steps)
        penalized = terminated & (tags != TERM_LANDED) & ~self._done_once
        reward = np.where(penalized, self.rules.penalty, reward)
        self._done_once |= terminated
        tags = np.where(truncated, TERM_TIME_LIMIT, tags).astype(np.int8)
        done = terminated | truncated

        self.q_des_prev = q_des
        self.history.push(prev_joint_pos)

        info = {
            "terminated": terminated,
            "truncated": truncated,
            "term_tags": tags,
            "reward/total": breakdown.total,
            "reward/r_pos": breakdown.r_pos,
            "reward/r_neg": breakdown.r_neg,
        }
        for name, value in breakdown.terms.items():
            info[f"reward/{name}"] = np.asarray(value)
        self._annotate(info)
        if done.any():
            info["final_obs"] = self._observe()
            if self.auto_reset:
                self._reset_rows(np.where(done)[0])
        else:
            info["final_obs"] = np.zeros((self.n_envs, self.obs_dim))
        obs = self._observe()
        return obs, reward, done, info

    # -- hooks ---------------------------------------------------------------

    def _external_force(self) -> np.ndarray | None:
        return None

    def _post_physics(self, kin) -> None:
        pass

    def _extra_termination(self, tags: np.ndarray, kin) -> np.ndarray:
        return tags

    def _annotate(self, info: dict) -> None:
        pass

    def _reward(self, kin, tau_mean, q_des) -> RewardBreakdown:
        raise NotImplementedError

    # -- shared reward ingredients -------------------------------------------

    def _general_terms(self, tau_mean, q_des) -> dict:
        return general_constraint_reward(
            self.state.joint_pos, self.state.joint_vel, tau_mean,
            q_des, self.q_des_prev, self.q_nominal, self.coeffs.general)

    def _tilt_angle(self, kin) -> np.ndarray:
        cos_tilt = np.clip(kin.link_rot[:, 0, 2, 2], -1.0, 1.0)
        return np.arccos(cos_tilt)

    def _foot_heights(self, kin) -> np.ndarray:
        return np.stack([kin.markers[m][:, 2] for m in dynamics.FOOT_MARKERS], axis=-1)

    def _command_frame_velocity(self, heading: np.ndarray) -> np.ndarray:
        """World planar velocity expressed in the command-heading frame."""
        c, s = np.cos(heading), np.sin(heading)
        vx, vy = self.state.base_vel[:, 0], self.state.base_vel[:, 1]
        return np.stack([c * vx + s * vy, -s * vx + c * vy], axis=-1)


class TurningEnv(VectorTaskEnv):
    """Two-section rapid turning: run until the sampled onset, then turn.

    Stage 1 issues the turn at t = 0 from standstill and uses the run column
    for the whole episode; stage 2 samples the onset inside the curriculum's
    command-range window after a fixed run warmup and switches to the turn
    column at onset.
    """

    task = "turning"
    with_command = True
    MAX_TURN = np.deg2rad(135.0)
    WARMUP_SECONDS = 1.5
    POST_TURN_SECONDS = 2.0

    def __init__(self, robot_variant: str, n_envs: int, stage: int = 2,
                 seed: int = 0, episode_seconds: float = 4.0, **kwargs):
        self.stage = stage
        super().__init__(robot_variant, n_envs, seed=seed,
                         episode_seconds=episode_seconds, **kwargs)
        n = n_envs
        self.command = Command(v_x=np.zeros(n), v_y=np.zeros(n), heading=np.zeros(n),
                               turn_angle=np.zeros(n), onset_step=np.zeros(n, dtype=int))
        self.section = np.array(["run"] * n, dtype=object)

    def issue_turn_command(self, idx) -> None:
        """Sample turn angle, sign, speed, and onset for fresh episodes."""
        k = len(idx)
        angle = self.rng.uniform(0.0, self.MAX_TURN, k)
        sign = np.where(self.rng.random(k) < 0.5, -1.0, 1.0)
        self.command.turn_angle[idx] = sign * angle
        v_top = self.curriculum.v_cmd if self.curriculum is not None else 2.0
        self.command.v_x[idx] = self.rng.uniform(0.5 * v_top, v_top, k)
        self.command.v_y[idx] = 0.0
        self.command.heading[idx] = 0.0
        if self.stage == 1:
            self.command.onset_step[idx] = 0
            self.command.heading[idx] = self.command.turn_angle[idx]
            self.episode_steps[idx] = self.max_steps
        else:
            warmup = int(round(self.WARMUP_SECONDS / self.control_dt))
            window = self.curriculum.command_range if self.curriculum is not None else 1
            onset = warmup + self.rng.integers(0, window, k)
            self.command.onset_step[idx] = onset
            self.episode_steps[idx] = onset + int(round(self.POST_TURN_SECONDS / self.control_dt))

    def _reset_rows(self, idx) -> None:
        super()._reset_rows(idx)
        if hasattr(self, "command"):
            self.issue_turn_command(idx)
            self.section[idx] = "run"

    def _post_physics(self, kin) -> None:
        if self.stage == 1:
            return
        fired = (self.step_count >= self.command.onset_step) & (self.section == "run")
        if fired.any():
            self.section[fired] = "turn"
            self.command.heading[fired] = self.command.turn_angle[fired]

    def _command_dict(self, idx=None) -> dict:
        return {"v_x": self.command.v_x, "v_y": self.command.v_y,
                "heading": self.command.heading}

    def _reward(self, kin, tau_mean, q_des) -> RewardBreakdown:
        heading = self.command.heading
        heading_cmd_vec = np.stack([np.cos(heading), np.sin(heading),
                                    np.zeros(self.n_envs)], axis=-1)
        body_x = kin.link_rot[:, 0, :, 0]
        in_turn = self.section == "turn"
        turn_sign = np.where(in_turn, np.sign(self.command.turn_angle), 1.0)
        turn_sign = np.where(turn_sign == 0.0, 1.0, turn_sign)
        v_cmd = np.stack([self.command.v_x, self.command.v_y], axis=-1)
        kwargs = dict(
            v_cmd_xy=v_cmd,
            v_xy=self._command_frame_velocity(heading),
            heading_cmd=heading_cmd_vec, heading_body=body_x,
            w_z=self.state.base_ang_vel[:, 2], turn_sign=turn_sign,
            tracker=self.tracker, foot_heights=self._foot_heights(kin),
            v_z=self.state.base_vel[:, 2], tilt_angle=self._tilt_angle(kin),
            arm_pos=self.state.joint_pos[:, self.arm_slice],
            arm_nominal=self.q_nominal[self.arm_slice], coeffs=self.coeffs)
        run_terms = turning_reward("run", **kwargs)
        if in_turn.any():
            turn_terms = turning_reward("turn", **kwargs)
            terms = {k: np.where(in_turn, turn_terms[k], run_terms[k]) for k in run_terms}
        else:
            terms = run_terms
        return RewardBreakdown.build(terms, self._general_terms(tau_mean, q_des),
                                     TURNING_POS_TERMS, TURNING_NEG_TERMS,
                                     self.coeffs.reward_factor)

    def _annotate(self, info: dict) -> None:
        info["section"] = self.section.copy()
        info["heading_cmd"] = self.command.heading.copy()


class ReorientEnv(VectorTaskEnv):
    """Aerial reorientation and landing: dropped tilted, commandless.

    The air region (base height above 0.4 m) scores orientation only; the
    ground region adds velocity, height, clearance, and arm posture for
    self-righting. ``aerial_only`` ends the episode at the region boundary
    (used by the desk-scale preset).
    """

    task = "reorient"
    with_command = False

    def __init__(self, robot_variant: str, n_envs: int, seed: int = 0,
                 episode_seconds: float = 2.5, aerial_only: bool = False,
                 drop_height_range: tuple = (1.5, 2.25),
                 drop_angle_range_deg: tuple = (90.0, 120.0),
                 tilt_axis: str = "pitch", **kwargs):
        self.aerial_only = aerial_only
        self.drop_height_range = drop_height_range
        self.drop_angle_range = tuple(np.deg2rad(a) for a in drop_angle_range_deg)
        self.tilt_axis = tilt_axis
        super().__init__(robot_variant, n_envs, seed=seed,
                         episode_seconds=episode_seconds, **kwargs)
        self.region = np.array(["air"] * n_envs, dtype=object)
        self.initial_tilt = np.zeros(n_envs)

    def _sample_initial_state(self, idx) -> SimState:
        k = len(idx)
        st = SimState.zeros(self.tree, k)
        st.joint_pos[:] = self.q_nominal + self.rng.uniform(-0.05, 0.05, (k, self.tree.n_joints))
        st.base_pos[:, 2] = self.rng.uniform(*self.drop_height_range, k)
        tilt = self.rng.uniform(*self.drop_angle_range, k)
        axis = np.array([0.0, 1.0, 0.0]) if self.tilt_axis == "pitch" else np.array([1.0, 0.0, 0.0])
        st.base_quat[:] = quat_from_axis_angle(np.tile(axis, (k, 1)), tilt)
        return st

    def _reset_rows(self, idx) -> None:
        super()._reset_rows(idx)
        if hasattr(self, "region"):
            self.region[idx] = "air"
            kin = forward_kinematics(self.tree, self.state)
            self.initial_tilt[idx] = self._tilt_angle(kin)[idx]

    def _post_physics(self, kin) -> None:
        if self.aerial_only:
            # the episode ends at the boundary; the ground column never applies
            return
        # hysteresis-free: region is a pure function of the current height
        airborne = self.state.base_pos[:, 2] > AIR_REGION_HEIGHT
        self.region[:] = np.where(airborne, "air", "ground")

    def _extra_termination(self, tags: np.ndarray, kin) -> np.ndarray:
        if self.aerial_only:
            landed = (tags == 0) & (self.state.base_pos[:, 2] <= AIR_REGION_HEIGHT)
            tags = np.where(landed, TERM_LANDED, tags)
        return tags

    def _reward(self, kin, tau_mean, q_des) -> RewardBreakdown:
        in_air = self.region == "air"
        kwargs = dict(
            tilt_angle=self._tilt_angle(kin),
            v_cmd_xy=np.zeros((self.n_envs, 2)),
            v_xy=self.state.base_vel[:, :2],
            nominal_height=self.quad.nominal_height,
            base_height=self.state.base_pos[:, 2],
            tracker=self.tracker, foot_heights=self._foot_heights(kin),
            arm_pos=self.state.joint_pos[:, self.arm_slice],
            arm_nominal=self.q_nominal[self.arm_slice],
            w_z=self.state.base_ang_vel[:, 2], coeffs=self.coeffs)
        air_terms = reorient_reward("air", **kwargs)
        if (~in_air).any():
            ground_terms = reorient_reward("ground", **kwargs)
            terms = {k: np.where(in_air, air_terms[k], ground_terms[k]) for k in air_terms}
        else:
            terms = air_terms
        return RewardBreakdown.build(terms, self._general_terms(tau_mean, q_des),
                                     REORIENT_POS_TERMS, REORIENT_NEG_TERMS,
                                     self.coeffs.reward_factor)

    def _annotate(self, info: dict) -> None:
        info["region"] = self.region.copy()
        info["tilt"] = self._tilt_angle(forward_kinematics(self.tree, self.state))
        info["initial_tilt"] = self.initial_tilt.copy()


class BalancingEnv(VectorTaskEnv):
    """Walking under random base impulses, scored with the run column."""

    task = "balancing"
    with_command = True

    def __init__(self, robot_variant: str, n_envs: int, seed: int = 0,
                 episode_seconds: float = 6.0,
                 speed_range: tuple = (0.5, 3.0),
                 impulse_range: tuple = (50.0, 100.0),
                 impulses_per_episode: int = 2,
                 impulse_window: float = 0.2, **kwargs):
        self.speed_range = speed_range
        self.impulse_range = impulse_range
        self.impulses_per_episode = impulses_per_episode
        self.impulse_window = impulse_window
        super().__init__(robot_variant, n_envs, seed=seed,
                         episode_seconds=episode_seconds, **kwargs)
        n = n_envs
        self.command = Command(v_x=np.zeros(n), v_y=np.zeros(n), heading=np.zeros(n),
                               turn_angle=np.zeros(n), onset_step=np.zeros(n, dtype=int))
        k = impulses_per_episode
        self.impulse_onsets = np.zeros((n, k))
        self.impulse_forces = np.zeros((n, k, 3))
        self.section = np.array(["run"] * n, dtype=object)

    def _reset_rows(self, idx) -> None:
        super()._reset_rows(idx)
        if not hasattr(self, "command"):
            return
        k = len(idx)
        self.command.v_x[idx] = self.rng.uniform(*self.speed_range, k)
        self.command.v_y[idx] = 0.0
        self.command.heading[idx] = 0.0
        m = self.impulses_per_episode
        horizon_s = self.max_steps * self.control_dt
        self.impulse_onsets[idx] = self.rng.uniform(0.5, max(0.6, horizon_s - 0.5), (k, m))
        mag = self.rng.uniform(*self.impulse_range, (k, m))
        direction = self.rng.normal(size=(k, m, 3))
        direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
        self.impulse_forces[idx] = direction * (mag / self.impulse_window)[..., None]

    def apply_impulse(self, spec: DisturbanceSpec, env_idx: int = 0) -> None:
        """Schedule one explicit impulse (evaluation protocols use this)."""
        self.impulse_onsets[env_idx] = np.inf
        self.impulse_onsets[env_idx, 0] = spec.onset
        self.impulse_forces[env_idx] = 0.0
        self.impulse_forces[env_idx, 0] = spec.magnitude / spec.window * spec.direction
        self.impulse_window = spec.window

    def _external_force(self) -> np.ndarray:
        t = (self.step_count * self.control_dt)[:, None]
        active = (t >= self.impulse_onsets) & (t < self.impulse_onsets + self.impulse_window)
        return np.einsum("nk,nka->na", active.astype(float), self.impulse_forces)

    def _command_dict(self, idx=None) -> dict:
        return {"v_x": self.command.v_x, "v_y": self.command.v_y,
                "heading": self.command.heading}

    def _reward(self, kin, tau_mean, q_des) -> RewardBreakdown:
        heading = self.command.heading
        heading_cmd_vec = np.stack([np.cos(heading), np.sin(heading),
                                    np.zeros(self.n_envs)], axis=-1)
        terms = turning_reward(
            "run",
            v_cmd_xy=np.stack([self.command.v_x, self.command.v_y], axis=-1),
            v_xy=self._command_frame_velocity(heading),
            heading_cmd=heading_cmd_vec, heading_body=kin.link_rot[:, 0, :, 0],
            w_z=self.state.base_ang_vel[:, 2], turn_sign=1.0,
            tracker=self.tracker, foot_heights=self._foot_heights(kin),
            v_z=self.state.base_vel[:, 2], tilt_angle=self._tilt_angle(kin),
            arm_pos=self.state.joint_pos[:, self.arm_slice],
            arm_nominal=self.q_nominal[self.arm_slice], coeffs=self.coeffs)
        return RewardBreakdown.build(terms, self._general_terms(tau_mean, q_des),
                                     TURNING_POS_TERMS, TURNING_NEG_TERMS,
                                     self.coeffs.reward_factor)

    def _annotate(self, info: dict) -> None:
        info["v_cmd"] = self.command.v_x.copy()


def make_env(task: str, robot_variant: str, n_envs: int, **kwargs) -> VectorTaskEnv:
    if task == "turning":
        return TurningEnv(robot_variant, n_envs, **kwargs)
    if task == "reorient":
        return ReorientEnv(robot_variant, n_envs, **kwargs)
    if task == "balancing":
        return BalancingEnv(robot_variant, n_envs, **kwargs)
    raise ValueError(f"unknown task '{task}'")
