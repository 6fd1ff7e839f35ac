"""Scenario configuration files.

A scenario is a JSON object.  Only the keys below are accepted; anything else
is rejected so that a typo cannot silently fall back to a default.

    {
      "params": {"p": 0.5, "s": 0.1, "s_cd": 0.4, "B": 2.0, "I": 1000},
      "eta": 0.4,
      "eta_grid": {"min": null, "max": 1.0, "steps": 81},
      "sweep_variable": "s",
      "sweep_values": [0.05, 0.1, 0.15, 0.2],
      "sim": {"n_runs": 1000, "base_seed": 0, "max_epochs": 1000},
      "output": {"directory": "out", "format": "csv"}
    }

An omitted or null grid ``min`` means ``s/p`` of whichever parameter set the
grid is used with.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InfeasibleEta, InvalidParameters
from .market_model import MarketParams

__all__ = ["ConfigError", "EtaGrid", "SimSettings", "ScenarioConfig", "load_config"]

SWEEP_VARIABLES = ("s", "B", "p", "eta")
FORMATS = ("csv", "json")

_TOP_KEYS = {"params", "eta", "eta_grid", "sweep_variable", "sweep_values",
             "sim", "output"}
_PARAM_KEYS = {"p", "s", "s_cd", "B", "I"}
_GRID_KEYS = {"min", "max", "steps"}
_SIM_KEYS = {"n_runs", "base_seed", "max_epochs"}
_OUTPUT_KEYS = {"directory", "format"}


class ConfigError(ValueError):
    """Malformed or inconsistent scenario configuration."""


def _check_keys(obj, allowed: set[str], where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    return obj


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{where} must be finite")
    return float(value)


def _integer(value, where: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise ConfigError(f"{where} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where} must be >= {minimum}, got {value}")
    return int(value)


@dataclass(frozen=True)
class EtaGrid:
    min: float | None
    max: float
    steps: int

    def values(self, params: MarketParams) -> np.ndarray:
        """Grid points for ``params``.

        Raises:
            InfeasibleEta: if an explicit ``min`` lies below ``s/p`` or
                ``max`` above 1.
        """
        lo = params.eta_min if self.min is None else self.min
        if lo < params.eta_min or self.max > 1.0:
            raise InfeasibleEta(
                f"eta grid [{lo:.12g}, {self.max:.12g}] leaves the feasible "
                f"range [s/p, 1] = [{params.eta_min:.12g}, 1]")
        if lo > self.max:
            raise ConfigError(f"eta_grid min {lo:.12g} exceeds max {self.max:.12g}")
        if self.steps == 1:
            return np.array([lo])
        return np.linspace(lo, self.max, self.steps)

    def as_dict(self) -> dict:
        return {"min": self.min, "max": self.max, "steps": self.steps}


@dataclass(frozen=True)
class SimSettings:
    n_runs: int = 100
    base_seed: int = 0
    max_epochs: int = 1000

    def as_dict(self) -> dict:
        return {"n_runs": self.n_runs, "base_seed": self.base_seed,
                "max_epochs": self.max_epochs}


@dataclass(frozen=True)
class ScenarioConfig:
    params: MarketParams = field(default_factory=MarketParams)
    eta: float | None = None
    eta_grid: EtaGrid | None = None
    sweep_variable: str | None = None
    sweep_values: tuple[float, ...] | None = None
    sim: SimSettings | None = None
    output_directory: str | None = None
    output_format: str = "csv"

    def cell_params(self, value: float) -> MarketParams:
        """Parameters with one sweep value substituted."""
        if self.sweep_variable in (None, "eta"):
            return self.params
        return self.params.replace(**{self.sweep_variable: value})

    def as_dict(self) -> dict:
        out: dict = {"params": self.params.as_dict()}
        if self.eta is not None:
            out["eta"] = self.eta
        if self.eta_grid is not None:
            out["eta_grid"] = self.eta_grid.as_dict()
        if self.sweep_variable is not None:
            out["sweep_variable"] = self.sweep_variable
            out["sweep_values"] = list(self.sweep_values)
        if self.sim is not None:
            out["sim"] = self.sim.as_dict()
        out["output"] = {"directory": self.output_directory,
                         "format": self.output_format}
        return out


def parse_config(raw: dict) -> ScenarioConfig:
    """Validate a decoded JSON object.

    Raises:
        ConfigError: structure or types are wrong, or market constants fail
            validation (including after substituting any sweep value).
    """
    _check_keys(raw, _TOP_KEYS, "config")
    praw = _check_keys(raw.get("params", {}), _PARAM_KEYS, "params")
    pvals = {k: _number(v, f"params.{k}") for k, v in praw.items() if k != "I"}
    if "I" in praw:
        pvals["I"] = _integer(praw["I"], "params.I", 1)
    try:
        params = MarketParams(**pvals)
    except InvalidParameters as exc:
        raise ConfigError(str(exc)) from exc

    eta = raw.get("eta")
    if eta is not None:
        eta = _number(eta, "eta")

    grid = None
    if raw.get("eta_grid") is not None:
        g = _check_keys(raw["eta_grid"], _GRID_KEYS, "eta_grid")
        if "steps" not in g:
            raise ConfigError("eta_grid.steps is required")
        gmin = g.get("min")
        grid = EtaGrid(min=None if gmin is None else _number(gmin, "eta_grid.min"),
                       max=_number(g.get("max", 1.0), "eta_grid.max"),
                       steps=_integer(g["steps"], "eta_grid.steps", 1))
    if eta is not None and grid is not None:
        raise ConfigError("give either eta or eta_grid, not both")

    sweep_var = raw.get("sweep_variable")
    sweep_vals = raw.get("sweep_values")
    if (sweep_var is None) != (sweep_vals is None):
        raise ConfigError("sweep_variable and sweep_values go together")
    if sweep_var is not None:
        if sweep_var not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep_variable must be one of {SWEEP_VARIABLES}")
        if not isinstance(sweep_vals, list) or not sweep_vals:
            raise ConfigError("sweep_values must be a non-empty list")
        sweep_vals = tuple(sorted(_number(v, "sweep_values[]") for v in sweep_vals))
        if sweep_var != "eta":
            for v in sweep_vals:
                try:
                    params.replace(**{sweep_var: v})
                except InvalidParameters as exc:
                    raise ConfigError(f"{sweep_var}={v:.12g}: {exc}") from exc

    sim = None
    if raw.get("sim") is not None:
        sraw = _check_keys(raw["sim"], _SIM_KEYS, "sim")
        sim = SimSettings(
            n_runs=_integer(sraw.get("n_runs", 100), "sim.n_runs", 1),
            base_seed=_integer(sraw.get("base_seed", 0), "sim.base_seed"),
            max_epochs=_integer(sraw.get("max_epochs", 1000), "sim.max_epochs", 1))

    oraw = _check_keys(raw.get("output", {}), _OUTPUT_KEYS, "output")
    fmt = oraw.get("format", "csv")
    if fmt not in FORMATS:
        raise ConfigError(f"output.format must be one of {FORMATS}")
    directory = oraw.get("directory")
    if directory is not None and not isinstance(directory, str):
        raise ConfigError("output.directory must be a string")

    return ScenarioConfig(params=params, eta=eta, eta_grid=grid,
                          sweep_variable=sweep_var, sweep_values=sweep_vals,
                          sim=sim, output_directory=directory, output_format=fmt)


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return parse_config(raw)
