"""Key-value-tree configuration files (YAML syntax, .cfg extension).

A config may name other files under an ``include:`` key (string or list);
included trees are loaded first and the including file's own keys are
deep-merged on top, so one experiment file fully determines a run. Model
configs shipped with the package resolve by bare name ("minicheetah",
"widowx250s", "viperx300s") through :func:`model_config_path`.
"""

from __future__ import annotations

import importlib.resources
from pathlib import Path

import yaml


class ConfigError(Exception):
    """Invalid or unreadable configuration; carries the offending field when known."""


def deep_merge(base: dict, override: dict) -> dict:
    """Recursively merge override onto base; override wins on scalar conflicts."""
    out = dict(base)
    for key, value in override.items():
        if key in out and isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: str | Path) -> dict:
    """Load a .cfg file, resolving includes relative to the including file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if tree is None:
        tree = {}
    if not isinstance(tree, dict):
        raise ConfigError(f"config {path} must be a key-value tree, got {type(tree).__name__}")
    includes = tree.pop("include", None)
    if includes is None:
        return tree
    if isinstance(includes, str):
        includes = [includes]
    merged: dict = {}
    for inc in includes:
        inc_path = Path(inc)
        if not inc_path.is_absolute():
            inc_path = path.parent / inc_path
        merged = deep_merge(merged, load_config(inc_path))
    return deep_merge(merged, tree)


def save_config(tree: dict, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(tree, sort_keys=False))


def model_config_path(name: str) -> Path:
    """Path of a packaged model config; accepts a bare name or an existing path."""
    p = Path(name)
    if p.suffix == ".cfg" and p.exists():
        return p
    resource = importlib.resources.files("tailquad").joinpath(f"data/models/{name}.cfg")
    with importlib.resources.as_file(resource) as real:
        if not real.exists():
            raise ConfigError(f"unknown model config '{name}'")
        return Path(real)


def require(tree: dict, field: str, kind: type | tuple = (int, float)) -> object:
    """Fetch a dotted field from a tree, raising ConfigError naming the field."""
    node: object = tree
    for part in field.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"missing config field '{field}'")
        node = node[part]
    if kind is not None and not isinstance(node, kind):
        raise ConfigError(f"config field '{field}' has wrong type {type(node).__name__}")
    return node
