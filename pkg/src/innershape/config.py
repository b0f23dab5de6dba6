"""Key-value run configuration shared by all CLI commands.

Config files are plain text: one ``key = value`` per line, ``#`` comments,
blank lines ignored.  Every key can be overridden by the matching CLI flag;
unknown keys are rejected so typos fail loudly.
"""

import types
import typing
from dataclasses import dataclass, fields

from .errors import InnerShapeError
from .registration import RegistrationConfig


class ConfigError(InnerShapeError):
    """Bad key, value or file in a run configuration."""


@dataclass
class RunConfig(RegistrationConfig):
    """Registration parameters plus mesh, fixture and experiment settings."""

    # mesh
    topology: str = "cylinder"
    nx: int = 16
    ny: int = 16
    # fixture geometry
    radius: float = 0.25
    height: float = 1.0
    bend_deg: float = 0.0
    ripples: int = 0
    ripple_amplitude: float = 0.0
    major_radius: float = 0.35
    minor_radius: float = 0.15
    asymmetry: float = 0.3
    # experiment controls
    mean_tol: float = 1e-3
    max_outer: int = 20
    directions: int = 10
    fd_tol: float = 1e-5
    seed: int = 0
    jobs: int = 1
    # output
    out_dir: str = "out"
    export_frames: bool = False


_BOOL_WORDS = {"true": True, "yes": True, "on": True, "1": True,
               "false": False, "no": False, "off": False, "0": False}


def _convert(name: str, text: str, target_type) -> object:
    text = text.strip()
    if text.lower() == "none":
        return None
    if target_type is bool:
        try:
            return _BOOL_WORDS[text.lower()]
        except KeyError:
            raise ConfigError(f"{name}: expected a boolean, got {text!r}") from None
    if target_type is int:
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{name}: expected an integer, got {text!r}") from None
    if target_type is float:
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"{name}: expected a number, got {text!r}") from None
    return text


def _base_type(annotation) -> type:
    """Primitive type of a field annotation, unwrapping `X | None`."""
    if isinstance(annotation, str):
        name = annotation.replace(" ", "").removesuffix("|None")
        return {"float": float, "int": int, "bool": bool, "str": str}.get(name, str)
    if isinstance(annotation, types.UnionType):
        args = [a for a in typing.get_args(annotation) if a is not type(None)]
        annotation = args[0] if args else str
    return annotation if annotation in (float, int, bool, str) else str


def _field_types() -> dict:
    return {f.name: _base_type(f.type) for f in fields(RunConfig)}


def parse_file(path) -> dict:
    """Read a key-value config file into a raw string mapping."""
    try:
        with open(path) as f:
            lines = f.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    raw = {}
    for lineno, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = stripped.split("=", 1)
        raw[key.strip()] = value.strip()
    return raw


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Merge defaults, config-file values and CLI overrides into a RunConfig.

    ``overrides`` entries with value None (flag not given) are skipped.
    """
    types = _field_types()
    cfg = RunConfig()
    for source in (file_values or {},):
        for key, text in source.items():
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(cfg, key, _convert(key, text, types[key]))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, key, value)
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def as_dict(cfg: RunConfig) -> dict:
    """Flat serializable view of a config (for summaries)."""
    return {f.name: getattr(cfg, f.name) for f in fields(RunConfig)}
