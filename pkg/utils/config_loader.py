#!/usr/bin/env python3
"""
Layered JSON configuration.

Lowest to highest precedence: the fallback below, config/defaults.json,
the environment (CLONELAB_SEED, with .env loaded first), a user config
file, and finally command-line flags (applied by the CLI).
"""

import copy
import json
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from dotenv import load_dotenv

from .errors import ConfigError
from .logger import get_logger

logger = get_logger("config")

REPO_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_CONFIG_PATH = REPO_ROOT / "config" / "defaults.json"
SEED_ENV_VAR = "CLONELAB_SEED"

FALLBACK_CONFIG: Dict[str, Any] = {
    "seed": 0,
    "states": ["plus", "minus", "plus_i", "minus_i"],
    "n_angles": 100,
    "shots": 100,
    "theta_min": 0.0,
    "theta_max": 0.7853981633974483,
    "noise": {"p1": 0.0, "p2": 0.0, "p_readout": 0.0},
    "analysis": {"reps": 10000, "unpaired": False},
    "protocol": {"rounds": 20000, "shard_rounds": 10000},
    "sweep": {"workers": 1},
}


def _check_keys(config: Mapping[str, Any], schema: Mapping[str, Any], source: str, prefix: str = ""):
    for key, value in config.items():
        name = f"{prefix}{key}"
        if key not in schema:
            raise ConfigError(f"unknown configuration key '{name}' in {source}", source=source, key=name)
        if isinstance(schema[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"configuration key '{name}' must be an object in {source}", source=source, key=name)
            _check_keys(value, schema[key], source, prefix=f"{name}.")


def merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    """Recursive merge; values in ``override`` win"""
    merged = copy.deepcopy(dict(base))
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_defaults(config_path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """Load the shipped defaults, falling back to the built-in table if the file is unusable"""
    config_path = Path(config_path) if config_path else DEFAULT_CONFIG_PATH
    try:
        with open(config_path, "r", encoding="utf-8") as f:
            loaded = json.load(f)
        _check_keys(loaded, FALLBACK_CONFIG, str(config_path))
        logger.info(f"Loaded configuration from {config_path}")
        return merge(FALLBACK_CONFIG, loaded)

    except FileNotFoundError:
        logger.error(f"Configuration file not found: {config_path}")
        return copy.deepcopy(FALLBACK_CONFIG)

    except json.JSONDecodeError as e:
        logger.error(f"Invalid JSON in configuration file: {e}")
        return copy.deepcopy(FALLBACK_CONFIG)


def load_user_config(config_path: Union[str, Path]) -> Dict[str, Any]:
    """A user-supplied file must exist, parse, and use only known keys"""
    try:
        with open(config_path, "r", encoding="utf-8") as f:
            loaded = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"configuration file not found: {config_path}", source=str(config_path)) from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {config_path}: {e}", source=str(config_path)) from None
    if not isinstance(loaded, dict):
        raise ConfigError(f"configuration in {config_path} must be a JSON object", source=str(config_path))
    _check_keys(loaded, FALLBACK_CONFIG, str(config_path))
    return loaded


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
    environ = os.environ if environ is None else environ
    raw = environ.get(SEED_ENV_VAR)
    if raw is None or raw == "":
        return {}
    try:
        seed = int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from None
    if seed < 0:
        raise ConfigError(f"{SEED_ENV_VAR} must be non-negative, got {seed}")
    logger.debug(f"Seed {seed} taken from {SEED_ENV_VAR}")
    return {"seed": seed}


def load_config(user_path: Optional[Union[str, Path]] = None,
                defaults_path: Optional[Union[str, Path]] = None,
                environ: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
    """Defaults, then environment, then the user file"""
    if environ is None:
        load_dotenv(REPO_ROOT / ".env")
    config = load_defaults(defaults_path)
    config = merge(config, env_overrides(environ))
    if user_path:
        config = merge(config, load_user_config(user_path))
        logger.info(f"Applied user configuration from {user_path}")
    return config
