"""Run configuration: flat ``key = value`` text with dotted keys.

Blank lines and ``#`` comments are ignored.  Vectors are comma separated
(``shell.p = 0, 0, 0``).  Every problem found while loading is collected and
reported together in one :class:`ConfigError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Ball, Box, GeometryError, Inclusion, ShellSource, enclosing_radius, inclusion_margin, validate_shell
from .heatsolver import SolverConfig
from .indicator import SweepConfig, default_taus
from .shellflux import TimeGrid
from .thermo import ElasticParams


class ConfigError(ValueError):
    """All violations found in a configuration; ``errors`` lists them one per entry."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {e}" for e in self.errors))


# key -> (kind, default); None marks a key without default
KEYS = {
    "body.kind": ("str", None),
    "body.center": ("vec", "0, 0, 0"),
    "body.radius": ("float", None),
    "body.min": ("vec", None),
    "body.max": ("vec", None),
    "inclusion.kind": ("str", "none"),
    "inclusion.center": ("vec", "0, 0, 0"),
    "inclusion.radius": ("float", None),
    "inclusion.h": ("float", None),
    "shell.p": ("vec", "0, 0, 0"),
    "shell.r1": ("float", None),
    "shell.r2": ("float", None),
    "grid.n": ("int", "64"),
    "grid.radial_cells": ("int", "4000"),
    "grid.mode": ("str", "auto"),
    "grid.radial_scheme": ("str", "transfer"),
    "grid.surface_n": ("int", "16"),
    "time.T": ("float", None),
    "time.steps": ("int", "2000"),
    "tau.min": ("float", None),
    "tau.max": ("float", None),
    "tau.count": ("int", "12"),
    "path": ("str", "elliptic"),
    "formulation": ("str", "scattered"),
    "solver.tol": ("float", "1e-10"),
    "solver.max_iter": ("int", "50000"),
    "fit.window": ("str", "upper"),
    "fit.normalize": ("bool", "true"),
    "fit.log_term": ("bool", "false"),
    "fit.T": ("floats", ""),
    "thermo.rho": ("float", "1"),
    "thermo.mu": ("float", "1"),
    "thermo.lambda": ("float", "1"),
    "thermo.m": ("float", "1"),
    "thermo.c": ("float", "1"),
    "thermo.k": ("float", "1"),
    "thermo.theta0": ("float", "1"),
    "thermo.r1": ("float", "1"),
    "thermo.r2": ("float", "2"),
    "thermo.r_d": ("float", "0.6"),
    "thermo.tau_count": ("int", "12"),
    "thermo.T": ("floats", "0.7, 1.0"),
    "oracles.count": ("int", "100"),
    "output.dir": ("str", "out"),
    "seed": ("int", "0"),
}

CHOICES = {
    "body.kind": ("ball", "box"),
    "inclusion.kind": ("none", "ball"),
    "grid.mode": ("auto", "radial", "3d"),
    "grid.radial_scheme": ("transfer", "fv"),
    "path": ("elliptic", "timedomain"),
    "formulation": ("scattered", "total"),
}


def _convert(kind, text):
    if kind == "str":
        return text
    if kind == "float":
        v = float(text)
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v
    if kind == "int":
        return int(text)
    if kind == "bool":
        low = text.lower()
        if low not in ("true", "false", "yes", "no", "1", "0"):
            raise ValueError("must be true or false")
        return low in ("true", "yes", "1")
    if kind == "floats":
        return tuple(float(t) for t in text.split(",") if t.strip())
    if kind == "vec":
        v = np.array([float(t) for t in text.split(",")])
        if v.shape != (3,):
            raise ValueError("needs three comma-separated numbers")
        return v
    raise AssertionError(kind)


def read_pairs(text: str):
    """Split config text into {key: value}; collects syntax, duplicate and unknown-key errors."""
    pairs, where, errors = {}, {}, []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key in where:
            errors.append(f"line {lineno}: duplicate key {key!r} (first set on line {where[key]})")
            continue
        if key not in KEYS:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        pairs[key] = value
        where[key] = lineno
    return pairs, errors


@dataclass(frozen=True)
class RunConfig:
    body: object
    inclusion: Inclusion
    shell: ShellSource
    grid_n: int = 64
    radial_cells: int = 4000
    mode: str | None = None
    radial_scheme: str = "transfer"
    surface_n: int = 16
    time: TimeGrid | None = None
    tau_min: float | None = None
    tau_max: float | None = None
    tau_count: int = 12
    path: str = "elliptic"
    formulation: str = "scattered"
    solver: SolverConfig = field(default_factory=SolverConfig)
    fit_window: object = "upper"
    fit_normalize: bool = True
    fit_log_term: bool = False
    fit_T: tuple = ()
    elastic: ElasticParams = field(default_factory=lambda: ElasticParams(1.0, 1.0, 1.0, 1.0))
    thermo_r1: float = 1.0
    thermo_r2: float = 2.0
    thermo_r_d: float = 0.6
    thermo_tau_count: int = 12
    thermo_T: tuple = (0.7, 1.0)
    oracle_count: int = 100
    out_dir: str = "out"
    seed: int = 0
    effective: dict = field(default_factory=dict, compare=False)

    def sweep_config(self) -> SweepConfig:
        return SweepConfig(
            body=self.body,
            inclusion=self.inclusion,
            shell=self.shell,
            path=self.path,
            mode=self.mode,
            grid_n=self.grid_n,
            radial_cells=self.radial_cells,
            time=self.time,
            solver=self.solver,
            formulation=self.formulation,
            radial_scheme=self.radial_scheme,
        )

    def taus(self) -> np.ndarray:
        if self.tau_min is None:
            return default_taus(self.sweep_config(), self.tau_count)
        return np.geomspace(self.tau_min, self.tau_max, self.tau_count)

    def echo(self) -> str:
        """The effective configuration, one ``key = value`` per line in key order."""
        return "".join(f"{k} = {v}\n" for k, v in sorted(self.effective.items()))


def _fmt(v):
    if isinstance(v, np.ndarray):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse and cross-validate a run configuration.

    ``overrides`` maps keys to string values that replace those in ``text``
    (used for command-line options).  Raises :class:`ConfigError` listing every
    violation.
    """
    pairs, errors = read_pairs(text)
    for k, v in (overrides or {}).items():
        if k not in KEYS:
            errors.append(f"unknown key {k!r}")
        elif v is not None:
            pairs[k] = str(v)

    vals = {}
    for key, (kind, default) in KEYS.items():
        raw = pairs.get(key, default)
        if raw is None:
            continue
        try:
            vals[key] = _convert(kind, raw)
        except ValueError as exc:
            errors.append(f"{key}: cannot read {raw!r} ({exc})")
    for key, options in CHOICES.items():
        if key in vals and vals[key] not in options:
            errors.append(f"{key} must be one of {', '.join(options)}, got {vals[key]!r}")
            del vals[key]

    def need(*keys):
        missing = [k for k in keys if k not in vals and k not in pairs]
        for k in missing:
            errors.append(f"missing required key {k!r}")
        return not missing and all(k in vals for k in keys)

    body = None
    if need("body.kind"):
        try:
            if vals["body.kind"] == "ball" and need("body.center", "body.radius"):
                body = Ball(vals["body.center"], vals["body.radius"])
            elif vals["body.kind"] == "box" and need("body.min", "body.max"):
                body = Box(vals["body.min"], vals["body.max"])
        except GeometryError as exc:
            errors.append(f"body: {exc}")

    inclusion = Inclusion(None)
    if vals.get("inclusion.kind") == "ball" and need("inclusion.center", "inclusion.radius", "inclusion.h"):
        try:
            inclusion = Inclusion(Ball(vals["inclusion.center"], vals["inclusion.radius"]), vals["inclusion.h"])
        except GeometryError as exc:
            errors.append(f"inclusion: {exc}")

    shell = None
    if need("shell.p", "shell.r1", "shell.r2"):
        try:
            shell = ShellSource(vals["shell.p"], vals["shell.r1"], vals["shell.r2"])
        except GeometryError as exc:
            errors.append(f"shell: {exc}")

    if body is not None and shell is not None:
        try:
            validate_shell(body, shell)
        except GeometryError as exc:
            errors.append(str(exc))
    if body is not None and not inclusion.empty:
        try:
            if inclusion_margin(body, inclusion) <= 0:
                errors.append("inclusion must lie strictly inside the body")
        except GeometryError as exc:
            errors.append(f"inclusion: {exc}")

    mode = vals.get("grid.mode")
    mode = None if mode == "auto" else mode
    if body is not None and mode == "radial" and not isinstance(body, Ball):
        errors.append("grid.mode = radial needs a ball body")
    if body is not None and mode == "3d" and not isinstance(body, Box):
        errors.append("grid.mode = 3d needs a box body")

    for key, lo in (("grid.n", 8), ("grid.radial_cells", 2), ("grid.surface_n", 2), ("tau.count", 4),
                    ("time.steps", 2), ("oracles.count", 1), ("thermo.tau_count", 4), ("solver.max_iter", 1)):
        if key in vals and vals[key] < lo:
            errors.append(f"{key} must be at least {lo}, got {vals[key]}")

    has_min, has_max = "tau.min" in vals, "tau.max" in vals
    if has_min != has_max:
        errors.append("give both tau.min and tau.max or neither")
    elif has_min:
        if not (vals["tau.min"] > 0 and vals["tau.max"] > 0):
            errors.append("tau values must be positive")
        elif not vals["tau.min"] < vals["tau.max"]:
            errors.append("tau.min must be below tau.max")

    time = None
    if "time.T" in vals:
        try:
            time = TimeGrid(vals["time.T"], vals.get("time.steps", 2000))
        except ValueError as exc:
            errors.append(f"time: {exc}")
    elif vals.get("path") == "timedomain":
        errors.append("path = timedomain needs time.T")

    solver = SolverConfig()
    if "solver.tol" in vals:
        try:
            solver = SolverConfig(tol=vals["solver.tol"], max_iter=vals.get("solver.max_iter", 50000))
        except ValueError as exc:
            errors.append(f"solver: {exc}")

    window = vals.get("fit.window", "upper")
    if window not in ("upper", "all", "auto"):
        try:
            lo, hi = (float(t) for t in window.split(","))
            window = (lo, hi)
        except ValueError:
            errors.append(f"fit.window must be upper, all, auto or 'lo, hi', got {window!r}")
    if any(T <= 0 for T in vals.get("fit.T", ())):
        errors.append("fit.T values must be positive")

    elastic = None
    try:
        elastic = ElasticParams(vals.get("thermo.rho", 1.0), vals.get("thermo.mu", 1.0), vals.get("thermo.lambda", 1.0),
                                vals.get("thermo.m", 1.0), vals.get("thermo.c", 1.0), vals.get("thermo.k", 1.0),
                                vals.get("thermo.theta0", 1.0))
    except ValueError as exc:
        errors.append(f"thermo: {exc}")
    if not 0 < vals.get("thermo.r_d", 0.6) < vals.get("thermo.r1", 1.0) < vals.get("thermo.r2", 2.0):
        errors.append("thermo radii must satisfy 0 < thermo.r_d < thermo.r1 < thermo.r2")

    if errors:
        raise ConfigError(errors)

    cfg = RunConfig(
        body=body,
        inclusion=inclusion,
        shell=shell,
        grid_n=vals["grid.n"],
        radial_cells=vals["grid.radial_cells"],
        mode=mode,
        radial_scheme=vals["grid.radial_scheme"],
        surface_n=vals["grid.surface_n"],
        time=time,
        tau_min=vals.get("tau.min"),
        tau_max=vals.get("tau.max"),
        tau_count=vals["tau.count"],
        path=vals["path"],
        formulation=vals["formulation"],
        solver=solver,
        fit_window=window,
        fit_normalize=vals["fit.normalize"],
        fit_log_term=vals["fit.log_term"],
        fit_T=vals["fit.T"],
        elastic=elastic,
        thermo_r1=vals["thermo.r1"],
        thermo_r2=vals["thermo.r2"],
        thermo_r_d=vals["thermo.r_d"],
        thermo_tau_count=vals["thermo.tau_count"],
        thermo_T=vals["thermo.T"],
        oracle_count=vals["oracles.count"],
        out_dir=vals["output.dir"],
        seed=vals["seed"],
    )
    try:
        # the sweep re-validates the shell and the path/time pairing
        sweep = cfg.sweep_config()
    except (ValueError, GeometryError) as exc:
        raise ConfigError([str(exc)]) from None
    effective = {k: _fmt(v) for k, v in vals.items()}
    effective["grid.mode"] = sweep.mode
    return replace(cfg, effective=effective)


def load_config(path, overrides: dict | None = None) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), overrides)


def true_radius(cfg: RunConfig) -> float | None:
    """Enclosing radius of the configured inclusion about p, or None without one."""
    if cfg.inclusion.empty:
        return None
    return enclosing_radius(cfg.inclusion, cfg.shell.p)
