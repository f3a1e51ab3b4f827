"""Experiment configuration: loading, validation and fingerprints.

Configs are YAML (or JSON) documents::

    schema_version: 1
    kind: flow
    grid: {n: 256, period_length: 8.0}
    profile: {family: flat_product, a0: 1.0, b0: 1.0}
    flow: {t_end: 0.4, cfl_safety: 0.25, tube_radius: 0.5}
    analysis: {r: 0.5, epsilon: 0.1, K: 2.0}
    suite: {seed: 0, size: 100}
    sweep: {heights: [10, 100, 1000], collapse_factors: [1, 0.1, 0.01]}
    tolerances: {drift: 0.1}
    output_dir: runs/flow
    workers: 1

Only ``schema_version`` and ``kind`` are always required; each kind names
the sections it needs in ``REQUIRED``.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from ricci_smoothing.flow import FlowControls
from ricci_smoothing.geometry import Grid, profile_from_dict

SCHEMA_VERSION = 1
OUTPUT_ROOT_ENV = "RICCI_LAB_OUTPUT"

KINDS = ("flow", "moser_verify", "sobolev", "scan", "smoothing_sweep", "collapse_sweep", "calibrate")
SECTIONS = ("schema_version", "kind", "grid", "profile", "flow", "analysis", "suite", "sweep",
            "tolerances", "output_dir", "workers")
REQUIRED = {
    "flow": ("grid", "profile", "flow"),
    "moser_verify": ("suite",),
    "sobolev": ("grid", "profile", "analysis"),
    "scan": ("grid", "profile", "analysis"),
    "smoothing_sweep": ("sweep",),
    "collapse_sweep": ("grid", "profile", "flow", "sweep"),
    "calibrate": ("suite",),
}


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is the dotted path of the offender."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class ExperimentConfig:
    kind: str
    schema_version: int = SCHEMA_VERSION
    grid: dict = field(default_factory=dict)
    profile: dict = field(default_factory=dict)
    flow: dict = field(default_factory=dict)
    analysis: dict = field(default_factory=dict)
    suite: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    output_dir: str | None = None
    workers: int = 1

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in SECTIONS}

    def fingerprint(self) -> str:
        """SHA-256 of the canonical JSON of everything except ``output_dir``."""
        d = self.as_dict()
        d.pop("output_dir")
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()

    def make_grid(self) -> Grid:
        return Grid(int(self.grid["n"]), float(self.grid["period_length"]))

    def make_controls(self, **overrides) -> FlowControls:
        params = dict(self.flow)
        params.update(overrides)
        if "snapshot_times" in params:
            params["snapshot_times"] = tuple(params["snapshot_times"])
        return FlowControls(**params)

    def resolve_output(self, override: str | os.PathLike | None = None) -> Path:
        if override is not None:
            return Path(override)
        if self.output_dir:
            return Path(self.output_dir)
        root = Path(os.environ.get(OUTPUT_ROOT_ENV, "ricci_lab_runs"))
        return root / f"{self.kind}-{self.fingerprint()[:12]}"


def _positive(value, key):
    try:
        ok = float(value) > 0
    except (TypeError, ValueError):
        ok = False
    if not ok:
        raise ConfigError(key, f"must be a positive number, got {value!r}")


def validate(raw: Mapping[str, Any]) -> ExperimentConfig:
    if not isinstance(raw, Mapping):
        raise ConfigError("<root>", "config must be a mapping")
    for key in raw:
        if key not in SECTIONS:
            raise ConfigError(str(key), "unknown top-level key")
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"expected {SCHEMA_VERSION}, got {raw.get('schema_version')!r}")
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError("kind", f"must be one of {list(KINDS)}, got {kind!r}")
    for section in REQUIRED[kind]:
        if section not in raw:
            raise ConfigError(section, f"required for kind {kind!r}")
    for section in ("grid", "profile", "flow", "analysis", "suite", "sweep", "tolerances"):
        if section in raw and not isinstance(raw[section], Mapping):
            raise ConfigError(section, "must be a mapping")

    cfg = ExperimentConfig(
        kind=kind,
        **{k: dict(raw[k]) for k in ("grid", "profile", "flow", "analysis", "suite", "sweep", "tolerances") if k in raw},
        output_dir=raw.get("output_dir"),
        workers=int(raw.get("workers", 1)),
    )
    if cfg.workers < 1:
        raise ConfigError("workers", "must be at least 1")

    if cfg.grid:
        for key in ("n", "period_length"):
            if key not in cfg.grid:
                raise ConfigError(f"grid.{key}", "missing")
        _positive(cfg.grid["period_length"], "grid.period_length")
        try:
            cfg.make_grid()
        except ValueError as exc:
            raise ConfigError("grid.n", str(exc)) from None
    if cfg.profile:
        try:
            profile_from_dict(cfg.profile)
        except ValueError as exc:
            raise ConfigError("profile", str(exc)) from None
    if cfg.flow:
        if "t_end" not in cfg.flow:
            raise ConfigError("flow.t_end", "missing")
        try:
            cfg.make_controls()
        except TypeError as exc:
            raise ConfigError("flow", str(exc)) from None
        except ValueError as exc:
            raise ConfigError("flow", str(exc)) from None
    for key, value in cfg.tolerances.items():
        _positive(value, f"tolerances.{key}")
    for key in ("r", "epsilon", "K"):
        if key in cfg.analysis:
            _positive(cfg.analysis[key], f"analysis.{key}")
    if cfg.suite and "seed" not in cfg.suite and kind in ("moser_verify", "calibrate"):
        raise ConfigError("suite.seed", "randomized suites need an explicit seed")
    return cfg


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML/JSON: {exc}") from None
    return validate(raw)
