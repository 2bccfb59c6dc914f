"""Training orchestration: the two-stage turning pipeline, single-stage
reorientation/balancing, checkpointing, iteration logs, and the evaluation
protocols behind the shipped experiment configs.

A run is fully determined by one experiment config (see configs/ and
docs/formats.md): task, robot variant, network sizes, PPO settings,
curriculum, reward/termination overrides, seed, and iteration budget.
Training writes an iteration CSV row per update and periodic checkpoints;
the turning task's stage 2 must start from a stage-1 checkpoint.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import curriculum as curriculum_mod
from .configio import ConfigError
from .control import INIT_LOG_STD, PolicyNetwork, RunningNorm, ValueNetwork
from .dynamics import FatalSimulationError
from .envs import TERM_NAMES, DisturbanceSpec, TerminationRules, make_env
from .ppo import PpoConfig, collect_rollouts, ppo_update
from .rewards import RewardCoefficients

CHECKPOINT_VERSION = 1

CSV_FIELDS = [
    "iteration", "mean_reward", "mean_r_pos", "mean_r_neg",
    "r_v", "r_phi", "r_w", "r_air", "r_cl", "r_base", "r_ori", "r_arm", "r_h",
    "r_p", "r_pdot", "r_tau", "r_s",
    "reward_step", "v_cmd", "command_range",
    "kl", "policy_loss", "value_loss", "clip_fraction", "learning_rate",
    "episodes", "terminations",
]


class TrainerError(RuntimeError):
    """Configuration or runtime failure the CLI maps to an exit code."""


@dataclass
class ExperimentConfig:
    """Validated view of one experiment config tree."""

    task: str
    robot: str
    stage: int | None
    seed: int
    n_envs: int
    env_kwargs: dict
    ppo: PpoConfig
    hidden: tuple
    init_log_std: float
    reward_overrides: dict
    termination: dict
    curriculum_threshold: float
    iterations: int
    checkpoint_every: int
    init_from: str | None
    out_dir: str

    @classmethod
    def from_tree(cls, tree: dict, seed_override: int | None = None,
                  out_override: str | None = None) -> "ExperimentConfig":
        try:
            task = tree["task"]
        except KeyError:
            raise ConfigError("missing config field 'task'")
        if task not in ("turning", "reorient", "balancing"):
            raise ConfigError(f"config field 'task' has invalid value '{task}'")
        robot = tree.get("robot", "widowx250s")
        if robot not in ("none", "minicheetah", "widowx250s", "viperx300s"):
            raise ConfigError(f"config field 'robot' has invalid value '{robot}'")
        stage = tree.get("stage")
        if task == "turning" and stage not in (1, 2):
            raise ConfigError("turning task requires config field 'stage' of 1 or 2")
        env_tree = dict(tree.get("env", {}))
        n_envs = int(env_tree.pop("n_envs", 256))
        try:
            ppo = PpoConfig.from_dict(dict(tree.get("ppo", {})))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid ppo config: {exc}")
        network = tree.get("network", {})
        train = tree.get("train", {})
        init_from = train.get("init_from")
        if task == "turning" and stage == 2 and not init_from:
            raise ConfigError("turning stage 2 requires train.init_from (stage-1 checkpoint)")
        return cls(
            task=task, robot=robot, stage=stage,
            seed=int(seed_override if seed_override is not None else tree.get("seed", 0)),
            n_envs=n_envs, env_kwargs=env_tree, ppo=ppo,
            hidden=tuple(network.get("hidden", [512, 256, 128])),
            init_log_std=float(network.get("init_log_std", INIT_LOG_STD)),
            reward_overrides=tree.get("rewards", {}),
            termination=tree.get("termination", {}),
            curriculum_threshold=float(tree.get("curriculum", {}).get(
                "threshold", curriculum_mod.REWARD_THRESHOLD)),
            iterations=int(train.get("iterations", 2000)),
            checkpoint_every=int(train.get("checkpoint_every", 200)),
            init_from=init_from,
            out_dir=str(out_override if out_override is not None else
                        train.get("out_dir", "runs/experiment")),
        )


def build_env(cfg: ExperimentConfig, n_envs: int | None = None, seed: int | None = None):
    coeffs = RewardCoefficients().with_overrides(cfg.reward_overrides)
    rules = TerminationRules(**cfg.termination) if cfg.termination else TerminationRules()
    kwargs = dict(cfg.env_kwargs)
    if cfg.task == "turning":
        kwargs["stage"] = cfg.stage
    try:
        env = make_env(cfg.task, cfg.robot,
                       n_envs if n_envs is not None else cfg.n_envs,
                       seed=seed if seed is not None else cfg.seed,
                       coeffs=coeffs, rules=rules, **kwargs)
    except TypeError as exc:
        raise ConfigError(f"invalid env option for task '{cfg.task}': {exc}")
    if cfg.task == "turning":
        env.set_curriculum(curriculum_mod.CurriculumState.start(
            cfg.stage, cfg.curriculum_threshold))
    return env


def build_networks(cfg: ExperimentConfig, obs_dim: int, act_dim: int):
    policy = PolicyNetwork(obs_dim, act_dim, hidden=cfg.hidden, seed=cfg.seed,
                           init_log_std=cfg.init_log_std)
    value = ValueNetwork(obs_dim, hidden=cfg.hidden, seed=cfg.seed + 1)
    return policy, value


def save_checkpoint(path, cfg: ExperimentConfig, policy, value, obs_norm,
                    curr_state, iteration: int) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save({
        "version": CHECKPOINT_VERSION,
        "task": cfg.task,
        "robot": cfg.robot,
        "stage": cfg.stage,
        "hidden": list(cfg.hidden),
        "obs_dim": policy.obs_dim,
        "act_dim": policy.act_dim,
        "policy": policy.state_dict(),
        "value": value.state_dict(),
        "obs_norm": obs_norm.to_dict(),
        "curriculum": curr_state.to_dict() if curr_state is not None else None,
        "env_kwargs": cfg.env_kwargs,
        "reward_overrides": cfg.reward_overrides,
        "termination": cfg.termination,
        "iteration": iteration,
        "seed": cfg.seed,
    }, path)


def load_checkpoint(path):
    path = Path(path)
    if not path.exists():
        raise TrainerError(f"checkpoint not found: {path}")
    try:
        blob = torch.load(path, weights_only=False)
    except Exception as exc:
        raise TrainerError(f"unreadable checkpoint {path}: {exc}")
    if blob.get("version") != CHECKPOINT_VERSION:
        raise TrainerError(
            f"checkpoint version {blob.get('version')} != supported {CHECKPOINT_VERSION}")
    policy = PolicyNetwork(blob["obs_dim"], blob["act_dim"], hidden=tuple(blob["hidden"]))
    policy.load_state_dict(blob["policy"])
    value = ValueNetwork(blob["obs_dim"], hidden=tuple(blob["hidden"]))
    value.load_state_dict(blob["value"])
    obs_norm = RunningNorm.from_dict(blob["obs_norm"])
    return blob, policy, value, obs_norm


@dataclass
class PolicyRunner:
    """Deterministic policy evaluation wrapper (mean actions)."""

    policy: PolicyNetwork
    obs_norm: RunningNorm

    def __call__(self, obs: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            x = torch.as_tensor(self.obs_norm.normalize(obs), dtype=torch.float64)
            return self.policy(x).numpy()

    @classmethod
    def from_checkpoint(cls, path) -> tuple["PolicyRunner", dict]:
        blob, policy, value, obs_norm = load_checkpoint(path)
        return cls(policy, obs_norm), blob


def train(config_tree: dict, seed_override: int | None = None,
          out_override: str | None = None, progress=None) -> Path:
    """Run the collect/update loop; returns the final checkpoint path."""
    cfg = ExperimentConfig.from_tree(config_tree, seed_override, out_override)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    env = build_env(cfg)
    policy, value = build_networks(cfg, env.obs_dim, env.act_dim)
    obs_norm = RunningNorm.for_dim(env.obs_dim)
    if cfg.init_from:
        blob, policy_init, value_init, norm_init = load_checkpoint(cfg.init_from)
        if blob["obs_dim"] != env.obs_dim or blob["act_dim"] != env.act_dim:
            raise TrainerError("init_from checkpoint does not match the environment shape")
        policy, value, obs_norm = policy_init, value_init, norm_init
    torch.manual_seed(cfg.seed)
    sample_gen = torch.Generator().manual_seed(cfg.seed + 1)
    shuffle_gen = torch.Generator().manual_seed(cfg.seed + 2)
    optimizer = torch.optim.Adam(
        list(policy.parameters()) + list(value.parameters()), lr=cfg.ppo.learning_rate)
    curr = env.curriculum
    csv_path = out_dir / "iterations.csv"
    ckpt_path = out_dir / "checkpoint.pt"
    obs = env.reset(cfg.seed)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for it in range(1, cfg.iterations + 1):
            try:
                buf, obs = collect_rollouts(env, policy, value, obs_norm,
                                            cfg.ppo.horizon, sample_gen, obs)
                stats = ppo_update(policy, value, optimizer, buf, cfg.ppo, shuffle_gen)
            except FatalSimulationError as exc:
                raise TrainerError(f"simulation fault at iteration {it}: {exc}")
            mean_reward = float(buf.rewards.mean())
            if not np.isfinite(mean_reward) or stats.aborted:
                raise TrainerError(
                    f"non-finite training statistics at iteration {it}; "
                    f"last good checkpoint retained at {ckpt_path}")
            if curr is not None:
                # curriculum signal: mean per-step total as trained (penalties included)
                curr = curriculum_mod.advance(curr, mean_reward)
                env.set_curriculum(curr)
            row = {f: 0.0 for f in CSV_FIELDS}
            row.update({
                "iteration": it,
                "mean_reward": mean_reward,
                "mean_r_pos": float(buf.extras.get("reward/r_pos", np.zeros(1)).mean()),
                "mean_r_neg": float(buf.extras.get("reward/r_neg", np.zeros(1)).mean()),
                "reward_step": curr.reward_step if curr is not None else 0,
                "v_cmd": curr.v_cmd if curr is not None else 0.0,
                "command_range": curr.command_range if curr is not None else 0,
                "kl": stats.kl, "policy_loss": stats.policy_loss,
                "value_loss": stats.value_loss, "clip_fraction": stats.clip_fraction,
                "learning_rate": stats.learning_rate,
                "episodes": int(buf.terminated.sum() + buf.truncated.sum()),
                "terminations": int(buf.terminated.sum()),
            })
            for term in ("r_v", "r_phi", "r_w", "r_air", "r_cl", "r_base", "r_ori",
                         "r_arm", "r_h", "r_p", "r_pdot", "r_tau", "r_s"):
                key = f"reward/{term}"
                if key in buf.extras:
                    row[term] = float(buf.extras[key].mean())
            writer.writerow(row)
            fh.flush()
            if progress is not None:
                progress(it, row)
            if it % cfg.checkpoint_every == 0 or it == cfg.iterations:
                save_checkpoint(ckpt_path, cfg, policy, value, obs_norm, curr, it)
    return ckpt_path


# --------------------------------------------------------------------------
# evaluation protocols
# --------------------------------------------------------------------------

def rollout_episode(env, runner: PolicyRunner):
    """Deterministic single-episode rollout of env row 0; returns step records."""
    env.auto_reset = False
    obs = env._observe()
    records = []
    for _ in range(int(env.episode_steps[0]) + 1):
        action = runner(obs)
        obs, reward, done, info = env.step(action)
        state = env.state
        rec = {
            "t": float(state.time[0]),
            "x": float(state.base_pos[0, 0]),
            "y": float(state.base_pos[0, 1]),
            "z": float(state.base_pos[0, 2]),
            "qw": float(state.base_quat[0, 0]), "qx": float(state.base_quat[0, 1]),
            "qy": float(state.base_quat[0, 2]), "qz": float(state.base_quat[0, 3]),
            "vx": float(state.base_vel[0, 0]), "vy": float(state.base_vel[0, 1]),
            "vz": float(state.base_vel[0, 2]),
            "reward": float(reward[0]),
            "tag": TERM_NAMES[int(info["term_tags"][0])],
        }
        if "section" in info:
            rec["section"] = str(info["section"][0])
        if "region" in info:
            rec["region"] = str(info["region"][0])
        if "tilt" in info:
            rec["tilt_deg"] = float(np.rad2deg(info["tilt"][0]))
        records.append(rec)
        if done[0]:
            break
    return records


def write_csv(path, rows, fieldnames=None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not rows:
        raise TrainerError(f"refusing to write empty CSV {path}")
    fieldnames = fieldnames or list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)


def _heading_deg(qw, qx, qy, qz):
    from .mathutils import quat_yaw
    return float(np.rad2deg(quat_yaw(np.array([qw, qx, qy, qz]))))


def turning_protocol(checkpoint_path, out_dir, speeds=(3.0, 3.5, 4.0, 4.5),
                     turn_deg: float = 135.0, seed: int = 0) -> dict:
    """Fixed-speed 135-degree turns; writes a 0.05-s-cadence trajectory CSV per speed.

    The ideal trajectory runs at the commanded speed along the initial heading
    until onset, then turns instantaneously; the summary reports the peak
    distance from the robot to that ideal path.
    """
    runner, blob = PolicyRunner.from_checkpoint(checkpoint_path)
    if blob["task"] != "turning":
        raise TrainerError(f"turn protocol needs a turning checkpoint, got {blob['task']}")
    out_dir = Path(out_dir)
    summary = {"protocol": "turn-grid", "turn_deg": turn_deg, "speeds": list(speeds),
               "runs": []}
    for speed in speeds:
        env = _env_from_blob(blob, n_envs=1, seed=seed)
        env.reset(seed)
        onset = int(round(env.WARMUP_SECONDS / env.control_dt))
        env.command.v_x[:] = speed
        env.command.v_y[:] = 0.0
        env.command.heading[:] = 0.0
        env.command.turn_angle[:] = np.deg2rad(turn_deg)
        env.command.onset_step[:] = onset
        env.episode_steps[:] = onset + int(round(env.POST_TURN_SECONDS / env.control_dt))
        records = rollout_episode(env, runner)
        detail_rows = records
        write_csv(out_dir / f"turn_speed_{speed:.1f}_detail.csv", detail_rows)
        onset_t = onset * env.control_dt
        traj_rows = []
        ideal_pts = _ideal_turn_path(speed, onset_t, np.deg2rad(turn_deg),
                                     records[-1]["t"], env.control_dt)
        every = max(1, int(round(0.05 / env.control_dt)))
        for k, rec in enumerate(records):
            if (k + 1) % every:
                continue
            ix, iy = _ideal_point(speed, onset_t, np.deg2rad(turn_deg), rec["t"])
            traj_rows.append({
                "t": rec["t"], "x": rec["x"], "y": rec["y"],
                "yaw_deg": _heading_deg(rec["qw"], rec["qx"], rec["qy"], rec["qz"]),
                "ideal_x": ix, "ideal_y": iy,
            })
        write_csv(out_dir / f"turn_speed_{speed:.1f}_trajectory.csv", traj_rows)
        post = [r for r in records if r["t"] >= onset_t]
        # None when the episode ended before onset (untrained policies fall over)
        peak_dev = max(_point_to_path_distance(np.array([r["x"], r["y"]]), ideal_pts)
                       for r in post) if post else None
        target_heading = turn_deg
        completion = next((r["t"] - onset_t for r in post
                           if abs(_heading_deg(r["qw"], r["qx"], r["qy"], r["qz"])
                                  - target_heading) < 10.0), None)
        summary["runs"].append({
            "speed": speed,
            "peak_deviation_m": peak_dev,
            "turn_completion_s": completion,
            "survived": records[-1]["tag"] in ("time_limit", "none"),
        })
    _write_summary(out_dir / "turn_summary.json", summary)
    return summary


def _ideal_point(speed, onset_t, turn_rad, t):
    if t <= onset_t:
        return speed * t, 0.0
    run = speed * onset_t
    dt = t - onset_t
    return run + speed * dt * np.cos(turn_rad), speed * dt * np.sin(turn_rad)


def _ideal_turn_path(speed, onset_t, turn_rad, t_end, dt):
    ts = np.arange(0.0, t_end + dt, dt)
    return np.array([_ideal_point(speed, onset_t, turn_rad, t) for t in ts])


def _point_to_path_distance(p, path):
    return float(np.min(np.linalg.norm(path - p[None, :], axis=-1)))


def drop_protocol(checkpoint_path, out_dir, heights=(1.5, 1.75, 2.0, 2.25),
                  angles_deg=(90.0, 105.0, 120.0), seed: int = 0) -> dict:
    """Drop grid: tilt-angle-vs-time series per cell plus landing outcomes."""
    runner, blob = PolicyRunner.from_checkpoint(checkpoint_path)
    if blob["task"] != "reorient":
        raise TrainerError(f"drop protocol needs a reorient checkpoint, got {blob['task']}")
    out_dir = Path(out_dir)
    summary = {"protocol": "drop-grid", "robot": blob["robot"], "runs": []}
    for height in heights:
        for angle in angles_deg:
            env = _env_from_blob(blob, n_envs=1, seed=seed,
                                 drop_height_range=(height, height),
                                 drop_angle_range_deg=(angle, angle))
            env.reset(seed)
            records = rollout_episode(env, runner)
            rows = [{"t": r["t"], "angle_deg": r["tilt_deg"], "z": r["z"],
                     "region": r.get("region", "air")} for r in records]
            write_csv(out_dir / f"drop_h{height:.2f}_a{int(angle)}.csv", rows)
            tilt0 = rows[0]["angle_deg"]
            min_tilt = min(r["angle_deg"] for r in rows)
            final = records[-1]
            landed_ok = (final["tag"] in ("time_limit", "none", "landed")
                         and final["tilt_deg"] < 45.0)
            summary["runs"].append({
                "height": height, "angle_deg": angle,
                "achieved_rotation_deg": float(tilt0 - min_tilt),
                "plateau_s": _plateau_duration(rows),
                "landing_success": bool(landed_ok),
                "final_tilt_deg": final["tilt_deg"],
            })
    _write_summary(out_dir / "drop_summary.json", summary)
    return summary


def _plateau_duration(rows, rate_limit_deg_s: float = 20.0) -> float:
    """Longest pre-touchdown span with tilt changing slower than the limit."""
    best = span = 0.0
    for a, b in zip(rows, rows[1:]):
        if b["region"] != "air":
            break
        dt = b["t"] - a["t"]
        if dt <= 0:
            continue
        rate = abs(b["angle_deg"] - a["angle_deg"]) / dt
        span = span + dt if rate < rate_limit_deg_s else 0.0
        best = max(best, span)
    return best


def impulse_protocol(checkpoint_path, out_dir, max_impulse: float = 100.0,
                     grid_step: float = 25.0, speed: float = 1.0,
                     onset: float = 2.0, window: float = 0.2, seed: int = 0) -> dict:
    """Survival grid over lateral/vertical impulse pairs while walking."""
    runner, blob = PolicyRunner.from_checkpoint(checkpoint_path)
    if blob["task"] != "balancing":
        raise TrainerError(f"impulse protocol needs a balancing checkpoint, got {blob['task']}")
    out_dir = Path(out_dir)
    values = np.arange(-max_impulse, max_impulse + grid_step / 2, grid_step)
    rows = []
    for jy in values:
        for jz in values:
            env = _env_from_blob(blob, n_envs=1, seed=seed)
            env.reset(seed)
            env.command.v_x[:] = speed
            mag = float(np.hypot(jy, jz))
            if mag > 0:
                env.apply_impulse(DisturbanceSpec(
                    magnitude=mag, direction=np.array([0.0, jy, jz]) / mag,
                    window=window, onset=onset))
            else:
                env.apply_impulse(DisturbanceSpec(
                    magnitude=0.0, direction=np.array([0.0, 1.0, 0.0]),
                    window=window, onset=onset))
            records = rollout_episode(env, runner)
            survived = records[-1]["tag"] == "time_limit"
            rows.append({"jy": float(jy), "jz": float(jz),
                         "survived": int(survived),
                         "time_alive": records[-1]["t"]})
    write_csv(out_dir / "impulse_grid.csv", rows)
    summary = {
        "protocol": "impulse-grid", "robot": blob["robot"], "speed": speed,
        "survival_rate": float(np.mean([r["survived"] for r in rows])),
        "training_boundary_radii": [50.0, 100.0],
        "cells": len(rows),
    }
    _write_summary(out_dir / "impulse_summary.json", summary)
    return summary


def aerial_rotation_eval(checkpoint_path, n_drops: int = 50, seed: int = 123) -> np.ndarray:
    """Mean-rotation metric: achieved reorientation (deg) over a batch of drops.

    Achieved reorientation = initial tilt minus the smallest tilt reached
    during the aerial phase, evaluated with deterministic (mean) actions.
    """
    runner, blob = PolicyRunner.from_checkpoint(checkpoint_path)
    if blob["task"] != "reorient":
        raise TrainerError(f"rotation eval needs a reorient checkpoint, got {blob['task']}")
    env = _env_from_blob(blob, n_envs=n_drops, seed=seed, aerial_only=True)
    obs = env.reset(seed)
    initial = np.rad2deg(env.initial_tilt.copy())
    min_tilt = initial.copy()
    finished = np.zeros(n_drops, dtype=bool)
    for _ in range(env.max_steps + 1):
        obs, _, done, info = env.step(runner(obs))
        tilt = np.rad2deg(info["tilt"])
        live = ~finished
        min_tilt[live] = np.minimum(min_tilt[live], tilt[live])
        finished |= done
        if finished.all():
            break
    return initial - min_tilt


def _env_from_blob(blob, n_envs: int = 1, seed: int = 0, **overrides):
    coeffs = RewardCoefficients().with_overrides(blob.get("reward_overrides", {}))
    rules = (TerminationRules(**blob["termination"]) if blob.get("termination")
             else TerminationRules())
    kwargs = dict(blob.get("env_kwargs", {}))
    kwargs.update(overrides)
    if blob["task"] == "turning":
        kwargs["stage"] = blob.get("stage", 2)
    env = make_env(blob["task"], blob["robot"], n_envs, seed=seed,
                   coeffs=coeffs, rules=rules, **kwargs)
    if blob["task"] == "turning" and blob.get("curriculum"):
        env.set_curriculum(curriculum_mod.CurriculumState.from_dict(blob["curriculum"]))
    return env


def _write_summary(path, summary) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


PROTOCOLS = {
    "turn-grid": turning_protocol,
    "drop-grid": drop_protocol,
    "impulse-grid": impulse_protocol,
}


def run_protocol(checkpoint_path, protocol: str, out_dir, seed: int = 0, **kwargs) -> dict:
    if protocol not in PROTOCOLS:
        raise TrainerError(
            f"unknown protocol '{protocol}'; available: {sorted(PROTOCOLS)}")
    return PROTOCOLS[protocol](checkpoint_path, out_dir, seed=seed, **kwargs)
