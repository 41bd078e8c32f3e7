"""Experiment configuration: file parsing, env overrides, validation.

Config files are flat INI key-value files with one section per experiment
kind plus an optional [common] section.  Resolution order is file values,
then FRACMG_* environment variables, then CLI flags.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

__all__ = ["ConfigError", "ExperimentConfig", "load_config_file"]

KINDS = ("rate_table", "lemma_rate", "solve_compare")

ENV_PREFIX = "FRACMG_"

# keys accepted from files / env / CLI, with parsers
_FLOAT_LIST = lambda v: [float(x) for x in str(v).replace(",", " ").split()]
_INT_LIST = lambda v: [int(x) for x in str(v).replace(",", " ").split()]
_PARSERS = {
    "dim": int,
    "j_min": int,
    "j_base": int,
    "j_max": int,
    "s_values": _FLOAT_LIST,
    "beta_values": _FLOAT_LIST,
    "c_q": float,
    "tol": float,
    "max_iter": int,
    "target_modes": _INT_LIST,
    "target_csv": str,
    "out_dir": str,
    "seed": int,
    "workers": int,
    "quad_mode": str,
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    kind: str
    dim: int = 1
    j_min: int = 4
    j_base: int = 4
    j_max: int = 8
    s_values: list[float] = field(default_factory=lambda: [0.5])
    beta_values: list[float] = field(default_factory=lambda: [1.0])
    c_q: float = 1.0
    tol: float = 1e-6
    max_iter: int = 500
    target_modes: list[int] | None = None
    target_csv: str | None = None
    out_dir: str = "fracmg-out"
    seed: int = 0
    workers: int = 1
    quad_mode: str = "per_level"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.dim not in (1, 2):
            raise ConfigError("dim must be 1 or 2")
        if not self.s_values or not self.beta_values:
            raise ConfigError("parameter lists s/beta must be non-empty")
        for s in self.s_values:
            if not 0.0 < s < 1.0:
                raise ConfigError(f"fractional order {s} outside (0,1)")
        for b in self.beta_values:
            if b <= 0:
                raise ConfigError(f"regularization beta {b} must be positive")
        if not 2 <= self.j_min <= self.j_max:
            raise ConfigError("need 2 <= j_min <= j_max")
        if self.kind == "solve_compare" and not self.j_base < self.j_min:
            raise ConfigError("solve_compare needs j_base < j_min")
        if self.kind in ("rate_table", "lemma_rate") and self.dim != 1:
            raise ConfigError(f"{self.kind} is limited to dim=1")
        if self.kind == "rate_table" and self.j_max - self.j_min < 2:
            raise ConfigError("rate_table needs j_max - j_min >= 2")
        if not 0.0 < self.tol < 1.0:
            raise ConfigError("tol must lie in (0,1)")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        if self.c_q <= 0:
            raise ConfigError("c_q must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.quad_mode not in ("per_level", "fine_level"):
            raise ConfigError("quad_mode must be per_level or fine_level")
        if self.target_modes is not None and len(self.target_modes) != self.dim:
            raise ConfigError("target_modes needs one integer per dimension")
        if self.target_modes is not None and self.target_csv is not None:
            raise ConfigError("give either target_modes or target_csv, not both")

    def modes(self) -> list[int]:
        if self.target_modes is not None:
            return self.target_modes
        return [4, 3] if self.dim == 2 else [4]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return cls(**data)


def _parse_items(items: dict, where: str) -> dict:
    out = {}
    for key, raw in items.items():
        key = key.lower()
        if key == "kind":
            continue
        if key not in _PARSERS:
            raise ConfigError(f"unknown config key {key!r} in {where}")
        try:
            out[key] = _PARSERS[key](raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r} in {where}: {raw!r}") from exc
    return out


def load_config_file(path: str | Path, kind: str) -> dict:
    """Read the [common] and per-kind sections of an INI config file."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file {path} not found")
    values: dict = {}
    for section in ("common", kind):
        if parser.has_section(section):
            values.update(_parse_items(dict(parser.items(section)),
                                       f"section [{section}]"))
    return values


def env_overrides(environ: dict | None = None) -> dict:
    """Collect FRACMG_* environment overrides (e.g. FRACMG_TOL=1e-8)."""
    environ = os.environ if environ is None else environ
    out = {}
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):].lower()
        if key in _PARSERS:
            out.update(_parse_items({key: raw}, f"env {name}"))
    return out


def build_config(kind: str, file_path: str | None = None,
                 cli_values: dict | None = None,
                 environ: dict | None = None) -> ExperimentConfig:
    """Merge file, environment, and CLI values into a validated config."""
    values: dict = {}
    if file_path:
        values.update(load_config_file(file_path, kind))
    values.update(env_overrides(environ))
    for key, val in (cli_values or {}).items():
        if val is not None:
            values[key] = val
    defaults = _kind_defaults(kind)
    defaults.update(values)
    return ExperimentConfig(kind=kind, **defaults)


def _kind_defaults(kind: str) -> dict:
    if kind == "solve_compare":
        return {"dim": 2, "j_base": 5, "j_min": 6, "j_max": 8,
                "s_values": [0.5], "beta_values": [1e-3]}
    if kind == "lemma_rate":
        return {"dim": 1, "j_min": 5, "j_max": 8}
    return {"dim": 1, "j_min": 4, "j_max": 8}
