"""Experiment configuration: TOML (or JSON) descriptors with strict validation.

Unknown keys are rejected and every field is type-checked with an explicit
error message; a config that parses is exactly the experiment that runs.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(Exception):
    """Invalid experiment configuration."""


KINDS = ("eigs", "simulate", "identity-check", "carleman", "observability", "hum")

# field name -> (type, default); required fields use default=None marker REQ
REQ = object()
_COMMON = {
    "kind": (str, REQ),
    "seed": (int, 0),
    "out_dir": (str, "runs"),
}
_SCHEMAS = {
    "eigs": {
        "n_modes": (int, 16),
    },
    "simulate": {
        "n_modes": (int, 8),
        "n_steps": (int, 512),
        "T": (float, 1.0),
        "n_paths": (int, 100),
        "scheme": (str, "drift_implicit_midpoint"),
        "y0_mode": (int, 1),
        "g_mode": (int, 0),
        "f_mode": (int, 0),
        "report_s": (float, 0.0),
    },
    "identity-check": {
        "n_x": (int, 91),
        "steps": (list, [128, 256, 512]),
        "stochastic": (bool, True),
    },
    "carleman": {
        "n_modes": (int, 12),
        "n_steps": (int, 512),
        "T": (float, 1.0),
        "n_paths": (int, 100),
        "mu": (float, 0.5),
        "lambdas": (list, []),
        "target_exponent": (float, 40.0),
        "observation": (str, "interior"),
        "window": (list, [0.3, 0.7]),
    },
    "observability": {
        "mode": (str, "interior"),
        "n_modes": (int, 12),
        "n_steps": (int, 512),
        "T": (float, 1.0),
        "n_paths": (int, 60),
        "n_experiments": (int, 3),
    },
    "hum": {
        "n_modes": (int, 8),
        "n_steps": (int, 512),
        "T": (float, 1.0),
        "tol": (float, 1e-6),
        "y1_modes": (int, 4),
        "verify_tol": (float, 1e-5),
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    out_dir: str
    params: dict
    sha256: str
    source_text: str = field(repr=False, default="")


def _coerce(name: str, value, typ):
    if typ is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, typ) or (typ is int and isinstance(value, bool)):
        raise ConfigError(
            f"field '{name}' must be {typ.__name__}, got {type(value).__name__}"
        )
    return value


def parse_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text()
    try:
        if path.suffix == ".json":
            raw = json.loads(text)
        else:
            raw = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a table")

    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError(
            f"{path}: field 'kind' must be one of {KINDS}, got {kind!r}"
        )
    schema = _SCHEMAS[kind]

    common = {}
    for name, (typ, default) in _COMMON.items():
        if name in raw:
            common[name] = _coerce(name, raw.pop(name), typ)
        elif default is REQ:
            raise ConfigError(f"{path}: missing required field '{name}'")
        else:
            common[name] = default

    section = raw.pop(kind, {})
    if not isinstance(section, dict):
        raise ConfigError(f"{path}: section [{kind}] must be a table")
    for leftover in raw:
        raise ConfigError(f"{path}: unknown top-level key '{leftover}'")

    params = {}
    for name, (typ, default) in schema.items():
        if name in section:
            params[name] = _coerce(f"{kind}.{name}", section.pop(name), typ)
        elif default is REQ:
            raise ConfigError(f"{path}: missing required field '{kind}.{name}'")
        else:
            params[name] = default
    for leftover in section:
        raise ConfigError(f"{path}: unknown key '{kind}.{leftover}'")

    digest = hashlib.sha256(text.encode()).hexdigest()
    return ExperimentConfig(kind=common["kind"], seed=common["seed"],
                            out_dir=common["out_dir"], params=params,
                            sha256=digest, source_text=text)
