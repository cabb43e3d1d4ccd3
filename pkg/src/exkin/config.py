"""Declarative experiment configuration.

Configs are YAML mappings with nested sections; :func:`load_config` parses
and validates one into an :class:`ExperimentConfig`.  Invalid configs raise
:class:`ConfigError`, which the CLI maps to exit code 2.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .kinetic import BgkModel, BroadwellModel, DistState, KineticModel, SpectralMaxwellModel, VelocityGrid, maxwellian_values
from .tableau import SchemeSpec, parse_scheme, tableau_from_config

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "config_from_dict"]

EXPERIMENTS = ("relaxation", "shock", "certify", "convergence")

# Homogeneous-relaxation default: an equilibrium background with a hot bump
# on the positive x-axis at four thermal speeds.
BUMP_COMPONENTS = (
    {"rho": 1.0, "u": [-0.5, 0.0], "temperature": 6.0},
    {"rho": 0.5, "u": [4.0 * np.sqrt(6.0), 0.0], "temperature": 3.0},
)


class ConfigError(ValueError):
    """Raised for malformed or inconsistent experiment configs."""


@dataclass
class ExperimentConfig:
    experiment: str
    scheme: str = "midpoint-if"
    epsilon: float = 1.0
    dt: float = 0.05
    final_time: float = 0.8
    mu_policy: str = "loss_sup"
    mu_value: float | None = None
    seed: int | None = None
    snapshots: int = 0
    model: dict = field(default_factory=dict)
    initial: list = field(default_factory=list)
    convergence: dict = field(default_factory=dict)
    shock: dict = field(default_factory=dict)
    certify: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, default=str)
        return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _positive(value, name: str) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a number, got {value!r}") from exc
    if value <= 0 or not np.isfinite(value):
        raise ConfigError(f"{name} must be positive and finite, got {value}")
    return value


def config_from_dict(data: dict, experiment: str | None = None) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"config must be a mapping, got {type(data).__name__}")
    named = data.get("experiment", experiment)
    if experiment is not None and named is not None and named != experiment:
        raise ConfigError(f"config names experiment {named!r} but {experiment!r} was requested")
    if named not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {named!r}; expected one of {EXPERIMENTS}")
    mu_block = data.get("mu", {"policy": "loss_sup"})
    if not isinstance(mu_block, dict) or "policy" not in mu_block:
        raise ConfigError("mu section must be a mapping with a 'policy' key")
    cfg = ExperimentConfig(
        experiment=named,
        scheme=str(data.get("scheme", "midpoint-if")),
        epsilon=_positive(data.get("epsilon", 1.0), "epsilon"),
        dt=_positive(data.get("dt", 0.05), "dt"),
        final_time=_positive(data.get("final_time", 0.8), "final_time"),
        mu_policy=str(mu_block["policy"]),
        mu_value=None if mu_block.get("value") is None else float(mu_block["value"]),
        seed=None if data.get("seed") is None else int(data["seed"]),
        snapshots=int(data.get("snapshots", 0)),
        model=dict(data.get("model", {})),
        initial=list(data.get("initial", [])),
        convergence=dict(data.get("convergence", {})),
        shock=dict(data.get("shock", {})),
        certify=dict(data.get("certify", {})),
        raw=data,
    )
    if cfg.mu_policy == "fixed" and cfg.mu_value is None:
        raise ConfigError("mu policy 'fixed' needs a 'value' entry")
    if cfg.experiment == "convergence":
        dts = cfg.convergence.get("dt_list", [])
        if len(dts) < 2:
            raise ConfigError("convergence runs need a dt_list with at least two entries")
        dts = [_positive(d, "dt_list entry") for d in dts]
        if any(b >= a for a, b in zip(dts, dts[1:])):
            raise ConfigError("dt_list must be strictly decreasing")
    # parse the scheme eagerly so bad names fail at config time
    build_scheme(cfg)
    return cfg


def load_config(path: str | Path, experiment: str | None = None) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return config_from_dict(data, experiment=experiment)


def build_scheme(cfg: ExperimentConfig) -> SchemeSpec:
    block = cfg.model.get("tableau") or cfg.raw.get("tableau")
    if block:
        try:
            return SchemeSpec(tableau_from_config(block).require_consistent(), family="if")
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    try:
        return parse_scheme(cfg.scheme)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _mixture_extent(components) -> float:
    """Grid half-width covering the components and their joint equilibrium."""
    rho = sum(c["rho"] for c in components)
    mom = np.sum([np.asarray(c["u"], dtype=float) * c["rho"] for c in components], axis=0)
    dim = mom.size
    energy = sum(
        0.5 * c["rho"] * (float(np.dot(c["u"], c["u"])) + dim * c["temperature"]) for c in components
    )
    u = mom / rho
    t_eff = (2.0 * energy / rho - float(u @ u)) / dim
    spread = max(max(c["temperature"] for c in components), t_eff)
    return 8.0 * np.sqrt(spread)


def build_model_and_state(cfg: ExperimentConfig) -> tuple[KineticModel, DistState]:
    """Construct the configured model and its initial distribution."""
    kind = cfg.model.get("kind", "spectral_maxwell_2d")
    if kind == "broadwell":
        model = BroadwellModel(gamma=float(cfg.model.get("gamma", 0.0)))
        triple = cfg.model.get("dvm") or (cfg.initial[0].get("dvm") if cfg.initial else None)
        if triple is None:
            triple = (0.8, 0.1, 0.4)
        if len(triple) != 3 or min(triple) < 0:
            raise ConfigError("broadwell initial data must be three nonnegative values")
        return model, DistState.dvm(*[float(x) for x in triple])
    components = cfg.initial or [dict(c) for c in BUMP_COMPONENTS]
    for c in components:
        if not {"rho", "u", "temperature"} <= set(c):
            raise ConfigError(f"initial component needs rho, u, temperature: {c}")
    dim = 2 if kind == "spectral_maxwell_2d" else 1
    extent = float(cfg.model.get("extent", 0.0)) or _mixture_extent(components)
    points = int(cfg.model.get("points", 64 if dim == 1 else 32))
    grid = VelocityGrid(dim=dim, extent=extent, points=points)
    if kind == "spectral_maxwell_2d":
        model = SpectralMaxwellModel(
            grid,
            modes=int(cfg.model.get("modes", min(32, points))),
            kernel_s=_positive(cfg.model.get("kernel_s", 1.0), "kernel_s"),
            support_radius=cfg.model.get("support_radius"),
        )
    elif kind == "bgk":
        model = BgkModel(grid, mu0=_positive(cfg.model.get("mu0", 1.0), "mu0"))
    else:
        raise ConfigError(f"unknown model kind {kind!r}")
    values = np.zeros(grid.shape)
    for c in components:
        u = np.atleast_1d(np.asarray(c["u"], dtype=float))
        if u.size != dim:
            raise ConfigError(f"component velocity {c['u']} does not match dimension {dim}")
        values = values + maxwellian_values(grid, float(c["rho"]), u, float(c["temperature"]))
    return model, DistState.on_grid(grid, values)
