"""Command-line entry point: train, eval, replay, export-model, validate-config.

Exit codes: 0 ok, 2 config error, 3 checkpoint error, 4 runtime fault.
Failures print one line to stderr as ``<error-class>: <message>``. All file
output lands inside the directory named by --out.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .envs import TERM_NAMES

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECKPOINT = 3
EXIT_RUNTIME = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tailquad",
        description="Train and evaluate quadruped-with-manipulator-tail policies.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a training experiment from a config file")
    p_train.add_argument("--config", required=True, help="experiment .cfg path")
    p_train.add_argument("--seed", type=int, default=None,
                         help="override the config seed (default: value in config)")
    p_train.add_argument("--out", default=None,
                         help="output directory (default: train.out_dir in config)")
    p_train.add_argument("--quiet", action="store_true", help="suppress progress lines")

    p_eval = sub.add_parser("eval", help="run an evaluation protocol on a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--protocol", required=True,
                        choices=["turn-grid", "drop-grid", "impulse-grid"])
    p_eval.add_argument("--out", default="eval_out", help="output directory (default: eval_out)")
    p_eval.add_argument("--seed", type=int, default=0, help="evaluation seed (default: 0)")

    p_replay = sub.add_parser("replay", help="re-simulate one episode to a CSV trace")
    p_replay.add_argument("--checkpoint", required=True)
    p_replay.add_argument("--seed", type=int, default=0, help="episode seed (default: 0)")
    p_replay.add_argument("--out", default="replay.csv", help="trace path (default: replay.csv)")

    p_export = sub.add_parser("export-model", help="export network weights to npz + json")
    p_export.add_argument("--checkpoint", required=True)
    p_export.add_argument("--out", default="model_export", help="output stem (default: model_export)")

    p_val = sub.add_parser("validate-config", help="check an experiment config file")
    p_val.add_argument("config", help="experiment .cfg path")
    return parser


def _fail(code: int, error_class: str, message: str) -> int:
    print(f"{error_class}: {message}", file=sys.stderr)
    return code


def cmd_train(args) -> int:
    from .configio import ConfigError, load_config
    from .dynamics import FatalSimulationError
    from .trainer import TrainerError, train

    try:
        tree = load_config(args.config)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config-error", str(exc))
    progress = None
    if not args.quiet:
        def progress(it, row):
            print(f"iter {it:5d} reward {row['mean_reward']:8.4f} "
                  f"kl {row['kl']:.4f} reward_step {row['reward_step']}")
    try:
        ckpt = train(tree, seed_override=args.seed, out_override=args.out,
                     progress=progress)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config-error", str(exc))
    except TrainerError as exc:
        if "checkpoint" in str(exc):
            return _fail(EXIT_CHECKPOINT, "checkpoint-error", str(exc))
        return _fail(EXIT_RUNTIME, "runtime-fault", str(exc))
    except FatalSimulationError as exc:
        return _fail(EXIT_RUNTIME, "runtime-fault", str(exc))
    print(f"checkpoint: {ckpt}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .trainer import TrainerError, run_protocol
    try:
        summary = run_protocol(args.checkpoint, args.protocol, args.out, seed=args.seed)
    except TrainerError as exc:
        msg = str(exc)
        if "checkpoint" in msg:
            return _fail(EXIT_CHECKPOINT, "checkpoint-error", msg)
        return _fail(EXIT_RUNTIME, "runtime-fault", msg)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_replay(args) -> int:
    from .trainer import PolicyRunner, TrainerError, _env_from_blob, write_csv
    try:
        runner, blob = PolicyRunner.from_checkpoint(args.checkpoint)
    except TrainerError as exc:
        return _fail(EXIT_CHECKPOINT, "checkpoint-error", str(exc))
    try:
        env = _env_from_blob(blob, n_envs=1, seed=args.seed)
        env.reset(args.seed)
        joint_names = env.tree.joint_names
        rows = []
        obs = env._observe()
        for _ in range(int(env.episode_steps[0]) + 1):
            action = runner(obs)
            obs, reward, done, info = env.step(action)
            state = env.state
            row = {
                "t": float(state.time[0]),
                "x": float(state.base_pos[0, 0]), "y": float(state.base_pos[0, 1]),
                "z": float(state.base_pos[0, 2]),
                "qw": float(state.base_quat[0, 0]), "qx": float(state.base_quat[0, 1]),
                "qy": float(state.base_quat[0, 2]), "qz": float(state.base_quat[0, 3]),
                "reward": float(reward[0]),
                "tag": TERM_NAMES[int(info["term_tags"][0])],
            }
            for j, name in enumerate(joint_names):
                row[f"q_{name}"] = float(state.joint_pos[0, j])
            rows.append(row)
            if done[0]:
                break
        write_csv(args.out, rows)
    except Exception as exc:  # noqa: BLE001 - map any replay fault to exit 4
        return _fail(EXIT_RUNTIME, "runtime-fault", str(exc))
    print(f"trace: {args.out} ({len(rows)} steps)")
    return EXIT_OK


def cmd_export(args) -> int:
    from .trainer import TrainerError, load_checkpoint
    try:
        blob, policy, value, obs_norm = load_checkpoint(args.checkpoint)
    except TrainerError as exc:
        return _fail(EXIT_CHECKPOINT, "checkpoint-error", str(exc))
    stem = Path(args.out)
    stem.parent.mkdir(parents=True, exist_ok=True)
    arrays = {f"policy/{k}": v.numpy() for k, v in policy.state_dict().items()}
    arrays.update({f"value/{k}": v.numpy() for k, v in value.state_dict().items()})
    np.savez(stem.with_suffix(".npz"), **arrays)
    meta = {
        "task": blob["task"], "robot": blob["robot"], "stage": blob["stage"],
        "hidden": blob["hidden"], "obs_dim": blob["obs_dim"], "act_dim": blob["act_dim"],
        "obs_norm": blob["obs_norm"], "iteration": blob["iteration"],
    }
    stem.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"exported: {stem.with_suffix('.npz')} {stem.with_suffix('.json')}")
    return EXIT_OK


def cmd_validate(args) -> int:
    from .configio import ConfigError, load_config
    from .trainer import ExperimentConfig
    try:
        tree = load_config(args.config)
        ExperimentConfig.from_tree(tree)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config-error", str(exc))
    print("ok")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "train": cmd_train,
        "eval": cmd_eval,
        "replay": cmd_replay,
        "export-model": cmd_export,
        "validate-config": cmd_validate,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
