"""Experiment configuration: JSON round-trip and validation.

Every run is fully determined by the config file; there is no
randomness anywhere, so repeated runs are byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict, fields as dc_fields

import numpy as np

from .kernels import KernelPair, UncertaintySet, Grid
from . import basket


class ConfigError(ValueError):
    """Validation failure; carries the offending module and field."""

    def __init__(self, module: str, field_name: str, message: str):
        self.module = module
        self.field_name = field_name
        super().__init__(f"[{module}.{field_name}] {message}")


@dataclass(frozen=True)
class ExperimentConfig:
    alpha: float
    lam: float
    Lam: float
    pairs: tuple[tuple[float, float], ...]
    b_scale: float = 1.0
    z0: float = 2.0
    h: float = 0.25
    psi: tuple[dict, ...] = (({"name": "gaussian_bump"}),)
    x_min: float = -20.0
    x_max: float = 20.0
    nx: int = 801
    t_max: float = 1.0
    r_cut: float | None = None
    z_max: float | None = None
    safety: float = 0.5
    dp_half_width: float = 1280.0
    dp_dx: float = 0.05
    n_values: tuple[int, ...] = (8, 16, 32, 64)
    mode: str = "condition_iii"
    output_dir: str = "out"
    seedless: bool = True

    def validate(self) -> None:
        if not (1.0 < self.alpha < 2.0):
            raise ConfigError("stable_kernel", "alpha",
                              f"{self.alpha} outside (1, 2)")
        if not (0.0 < self.lam < self.Lam):
            raise ConfigError("stable_kernel", "lambda",
                              "need 0 < lambda < Lambda_cap")
        if not self.pairs:
            raise ConfigError("stable_kernel", "pairs", "empty pair list")
        for km, kp in self.pairs:
            if not (self.lam < km < self.Lam and self.lam < kp < self.Lam):
                raise ConfigError("stable_kernel", "pairs",
                                  f"pair ({km}, {kp}) outside "
                                  f"({self.lam}, {self.Lam})")
        if self.b_scale <= 0.0 or self.z0 <= 0.0:
            raise ConfigError("attracted_laws", "b_scale/z0",
                              "must be positive")
        if not (0.0 < self.h < 1.0):
            raise ConfigError("pide_solver", "h", "must lie in (0, 1)")
        if self.nx < 5 or self.x_min >= self.x_max:
            raise ConfigError("pide_solver", "grid", "degenerate grid")
        if self.t_max <= 0.0 or not (0.0 < self.safety <= 1.0):
            raise ConfigError("pide_solver", "grid",
                              "t_max and safety must be positive "
                              "(safety at most 1)")
        if self.dp_half_width <= 0.0 or self.dp_dx <= 0.0:
            raise ConfigError("sublinear_engine", "dp_grid",
                              "must be positive")
        if any(n < 1 for n in self.n_values) \
                or list(self.n_values) != sorted(set(self.n_values)):
            raise ConfigError("hypothesis_checker", "n_values",
                              "need strictly increasing positive n")
        if self.mode not in ("condition_iii", "example_41"):
            raise ConfigError("hypothesis_checker", "mode",
                              f"unknown mode {self.mode!r}")
        if not self.seedless:
            raise ConfigError("experiment_cli", "seedless",
                              "runs are deterministic by contract")
        for spec in self.psi:
            try:
                basket.from_spec(dict(spec))
            except (ValueError, TypeError) as exc:
                raise ConfigError("experiment_cli", "psi", str(exc))

    # -- structured accessors -------------------------------------------
    def uncertainty_set(self) -> UncertaintySet:
        return UncertaintySet(self.alpha,
                              tuple(KernelPair(km, kp)
                                    for km, kp in self.pairs),
                              self.lam, self.Lam)

    def psi_functions(self) -> tuple[basket.TestFunction, ...]:
        return tuple(basket.from_spec(dict(s)) for s in self.psi)

    def dp_grid(self, dx: float | None = None) -> Grid:
        step = self.dp_dx if dx is None else dx
        half = int(np.ceil(self.dp_half_width / step))
        return Grid(-half * step, half * step, 2 * half + 1,
                    1.0, 1, 0.5, 4.0)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["pairs"] = [list(p) for p in cfg.pairs]
    d["psi"] = [dict(s) for s in cfg.psi]
    d["n_values"] = list(cfg.n_values)
    return d


def config_from_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    d["pairs"] = tuple(tuple(float(v) for v in p) for p in d["pairs"])
    d["psi"] = tuple(dict(s) for s in d.get("psi", ({"name": "gaussian_bump"},)))
    d["n_values"] = tuple(int(n) for n in d.get("n_values", (8, 16, 32, 64)))
    known = {f.name for f in dc_fields(ExperimentConfig)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError("experiment_cli", "config",
                          f"unknown fields {sorted(unknown)}")
    return ExperimentConfig(**d)


def dumps(cfg: ExperimentConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n"


def load(path: str) -> ExperimentConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("experiment_cli", "config",
                              f"not valid JSON: {exc}")
    cfg = config_from_dict(data)
    cfg.validate()
    return cfg
