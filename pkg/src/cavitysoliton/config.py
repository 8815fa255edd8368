"""Experiment configuration: TOML file plus ``--set section.key=value`` overrides.

Every command has a fixed key set per section (``model``, ``integrator``,
``experiment``); unknown keys and ill-typed values are rejected before a run.
"""

from __future__ import annotations

import copy
import hashlib
import json
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


MODEL_DEFAULTS = {
    "M": 256,
    "N": 10,
    "J": 1.0,
    "Omega": 10.0,
    "d": 1.0,
    "hp_order": 1,
    "boundary": "periodic",
}

# dt = 0 and step_ratio = 0 mean "derive from the model"; see experiments.integrator_config.
INTEGRATOR_DEFAULTS = {
    "method": "rk4_fixed",
    "dt": 0.0,
    "step_ratio": 0.0,
    "tol": 1e-10,
    "frame": "carrier",
    "hp_guard": 0.5,
    "conservation_alarm": 1e-6,
}

EXPERIMENT_DEFAULTS = {
    "dispersion": {
        "kd_values": [0.1, 0.3, 0.5, 0.7, 0.9, 1.1, 1.3, 1.5],
        "measure": True,
        "branches": "both",
        "amplitude": 0.01,
        "duration": 10.0,
        "sample_every": 0.02,
        "probe_site": 0,
    },
    "soliton": {
        "k": 0.3,
        "width": 8.0,
        "center_fraction": 0.3,
        "amplitude_scale": 1.0,
        "horizon": 240.0,
        "sample_every": 4.0,
        "linear_control": True,
    },
    "collide": {
        "k": 0.3,
        "width": 8.0,
        "separation": 80.0,
        "horizon": 0.0,
        "sample_every": 4.0,
        "co_moving": False,
    },
    "transition": {
        "N_values": [4, 10, 40, 100, 400],
        "Omega_over_J": 10.0,
        "k": 0.3,
        "width": 8.0,
        "reference_N": 10,
        "horizon": 240.0,
        "sample_every": 8.0,
        "workers": 1,
    },
    "oracle-compare": {
        "n_max": 6,
        "alpha0": [0.5, 0.0],
        "beta0": [0.0, 0.0],
        "t_max": 4.0,
        "samples": 161,
        "window": 0.5,
        "steps_per_sample": 25,
    },
}

COMMAND_MODEL_DEFAULTS = {
    "oracle-compare": {"M": 2, "N": 4, "J": 0.1, "Omega": 1.0},
}

COMMANDS = tuple(EXPERIMENT_DEFAULTS)
SECTIONS = ("model", "integrator", "experiment", "output")
OUTPUT_DEFAULTS = {"seed": 0}


def defaults(command: str) -> dict:
    if command not in EXPERIMENT_DEFAULTS:
        raise ConfigError(f"unknown command {command!r}")
    model = dict(MODEL_DEFAULTS)
    model.update(COMMAND_MODEL_DEFAULTS.get(command, {}))
    return {
        "model": model,
        "integrator": dict(INTEGRATOR_DEFAULTS),
        "experiment": copy.deepcopy(EXPERIMENT_DEFAULTS[command]),
        "output": dict(OUTPUT_DEFAULTS),
    }


def _coerce(section: str, key: str, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{section}.{key} must be a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{section}.{key} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{section}.{key} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{section}.{key} must be a string")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{section}.{key} must be a list")
        return value
    return value


def merge(base: dict, updates: dict, where: str = "config") -> dict:
    out = copy.deepcopy(base)
    for section, values in updates.items():
        if section not in out:
            raise ConfigError(f"unknown section [{section}] in {where}")
        if not isinstance(values, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key, value in values.items():
            if key not in out[section]:
                raise ConfigError(f"unknown key {section}.{key} in {where}")
            out[section][key] = _coerce(section, key, value, out[section][key])
    return out


def parse_override(text: str) -> dict:
    """``section.key=value`` with a TOML literal value (bare words become strings)."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form section.key=value")
    path, raw = text.split("=", 1)
    parts = path.strip().split(".")
    if len(parts) != 2:
        raise ConfigError(f"override key {path!r} must be section.key")
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return {parts[0]: {parts[1]: value}}


def load(command: str, path=None, overrides=()) -> dict:
    cfg = defaults(command)
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        cfg = merge(cfg, data, where=str(path))
    for text in overrides:
        cfg = merge(cfg, parse_override(text), where="--set")
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
