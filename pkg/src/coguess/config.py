"""Layered configuration: defaults, INI file, environment, then flags.

Values are kept as strings until a typed getter pulls them out, mirroring
configparser semantics. Environment variables named
``COGUESS_<SECTION>_<KEY>`` override file values; explicit overrides
(command-line flags) beat both.
"""

from __future__ import annotations

import configparser
import copy
import os
from pathlib import Path

from coguess.game import GameConfig

ENV_PREFIX = "COGUESS"

DEFAULTS: dict[str, dict[str, str]] = {
    "server": {
        "host": "127.0.0.1",
        "tcp_port": "4200",
        "ws_port": "4201",
        "tick_ms": "10",
    },
    "game": {
        "image_width": "300",
        "image_height": "300",
        "bubble_size": "18",
        "min_interval": "50",
        "max_interval": "300",
        "rounds_per_game": "110",
        "skip_penalty": "100",
        "adjacency_radius": "9",
    },
    "paths": {
        "data_dir": "data",
        "manifest": "",
    },
    "analysis": {
        "iterations": "1000",
        "seed": "0",
        "shards": "1",
        "experiment": "default",
    },
}


class ConfigError(Exception):
    pass


def load_config(path: str | Path | None = None,
                env: dict[str, str] | None = None) -> dict[str, dict[str, str]]:
    """Build the merged string-valued configuration map."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(str(path))
        if not read:
            raise ConfigError(f"config file not found: {path}")
        for section in parser.sections():
            dst = cfg.setdefault(section.lower(), {})
            for key, value in parser.items(section):
                dst[key.lower()] = value
    env = os.environ if env is None else env
    for name, value in env.items():
        if not name.startswith(ENV_PREFIX + "_"):
            continue
        rest = name[len(ENV_PREFIX) + 1:]
        section, _, key = rest.partition("_")
        if not section or not key:
            continue
        cfg.setdefault(section.lower(), {})[key.lower()] = value
    return cfg


def apply_overrides(cfg: dict[str, dict[str, str]],
                    overrides: dict[tuple[str, str], str]) -> None:
    """Apply (section, key) -> value pairs in place; flags land here."""
    for (section, key), value in overrides.items():
        cfg.setdefault(section, {})[key] = str(value)


def get_str(cfg, section: str, key: str) -> str:
    try:
        return cfg[section][key]
    except KeyError as exc:
        raise ConfigError(f"missing config value {section}.{key}") from exc


def get_int(cfg, section: str, key: str) -> int:
    raw = get_str(cfg, section, key)
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key} must be an integer, got {raw!r}") from exc


def get_float(cfg, section: str, key: str) -> float:
    raw = get_str(cfg, section, key)
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key} must be a number, got {raw!r}") from exc


def game_config(cfg) -> GameConfig:
    return GameConfig(
        image_width=get_int(cfg, "game", "image_width"),
        image_height=get_int(cfg, "game", "image_height"),
        bubble_size=get_int(cfg, "game", "bubble_size"),
        min_interval=get_float(cfg, "game", "min_interval"),
        max_interval=get_float(cfg, "game", "max_interval"),
        rounds_per_game=get_int(cfg, "game", "rounds_per_game"),
        skip_penalty=get_int(cfg, "game", "skip_penalty"),
        adjacency_radius=get_int(cfg, "game", "adjacency_radius"),
    )
