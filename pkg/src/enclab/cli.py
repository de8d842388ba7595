"""Command-line front end.

    enclab <command> --config <path> [--out <dir>] [--tau-min A --tau-max B --tau-count N]
                     [--path elliptic|timedomain]

Commands: oracles, flux, forward, indicator, extract, thermo, all.  ``--config
builtin:<name>`` loads a configuration shipped with the package.

Exit codes: 0 success, 2 configuration error, 3 solver or stage failure,
4 extraction at the noise floor.  Every run leaves ``manifest.txt`` in the
output directory listing each written file with its sha256 and whether the
run completed.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from importlib import resources

import numpy as np

from . import io
from .config import ConfigError, RunConfig, parse_config, true_radius
from .geometry import Ball, GeometryError, boundary_mesh
from .heatsolver import Grid, SolverError, medium_from_inclusion, solve_heat_timedomain, solve_radial
from .indicator import NoiseFloorError, extract_radius, sphere_node_mesh, tau_sweep, time_window_test
from .oracles import run_oracles
from .shellflux import BoundarySeries, flux_on_boundary
from .thermo import TouchingBallGeom, alpha_hat, growth_fit, lens_growth_integral, elastic_rate_check

COMMANDS = ("oracles", "flux", "forward", "indicator", "extract", "thermo", "all")
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_FLOOR = 0, 2, 3, 4


class StageError(RuntimeError):
    """A pipeline stage ran but did not produce a valid result."""


class Run:
    """Output directory bookkeeping for one invocation."""

    def __init__(self, cfg: RunConfig, out_dir: str):
        self.cfg = cfg
        self.out = out_dir
        self.files = []
        self.stages = []
        self.cache = {}
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name):
        self.files.append(name)
        return os.path.join(self.out, name)

    def manifest(self, complete: bool):
        return io.write_manifest(self.out, self.files, complete, self.stages)


def builtin_config(name: str) -> str:
    return resources.files("enclab").joinpath("configs", f"{name}.conf").read_text(encoding="utf-8")


def _mesh(cfg: RunConfig):
    sweep = cfg.sweep_config()
    if sweep.mode == "radial":
        return sphere_node_mesh(cfg.body) if isinstance(cfg.body, Ball) else boundary_mesh(cfg.body, cfg.surface_n)
    return Grid(cfg.body, cfg.grid_n).boundary_mesh()


def _need_time(cfg: RunConfig, what: str):
    if cfg.time is None:
        raise ConfigError([f"{what} needs time.T"])
    return cfg.time


# ---------------------------------------------------------------------------
# stages


def stage_oracles(run: Run):
    results, rows = run_oracles(run.cfg.seed, run.cfg.oracle_count)
    io.write_oracle_csv(run.path("oracle_recurrence.csv"), rows)
    lines = [f"{'PASS' if r.passed else 'FAIL'} {r.name} max_error={r.max_error:.3e} "
             f"tolerance={r.tolerance:g} cases={r.n_cases}" + (f" ({r.detail})" if r.detail else "")
             for r in results]
    failures = sum(not r.passed for r in results)
    lines.append(f"failures={failures}")
    with open(run.path("oracle_report.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    if failures:
        raise StageError(f"{failures} oracle checks failed")


def stage_flux(run: Run):
    cfg = run.cfg
    tg = _need_time(cfg, "flux")
    mesh = _mesh(cfg)
    flux = flux_on_boundary(mesh, tg, cfg.shell, body=cfg.body)
    io.write_series_csv(run.path("flux.csv"), flux)
    io.dump_series(run.path("flux.bin"), flux)
    run.cache["flux"] = flux
    print(f"flux: {len(mesh)} nodes x {flux.times.size} times")


def stage_forward(run: Run):
    cfg = run.cfg
    tg = _need_time(cfg, "forward")
    sweep = cfg.sweep_config()
    if sweep.mode == "radial":
        sol = solve_radial(cfg.body, cfg.inclusion, cfg.shell, time_grid=tg, n_cells=cfg.radial_cells)
        series = BoundarySeries(sphere_node_mesh(cfg.body), tg.times, sol.boundary[None, :])
        io.write_csv(run.path("final_field_radial.csv"), ("r", "u"), zip(sol.r, sol.field))
    else:
        grid = Grid(cfg.body, cfg.grid_n)
        flux = run.cache.get("flux")
        if flux is None:
            flux = flux_on_boundary(grid.boundary_mesh(), tg, cfg.shell, body=cfg.body)
        sol = solve_heat_timedomain(cfg.body, medium_from_inclusion(grid, cfg.inclusion), flux, grid, cfg.solver)
        series = sol.boundary
        io.dump_field(run.path("final_field.bin"), sol.final, grid.n, grid.box.lo, grid.box.hi)
    io.write_series_csv(run.path("boundary.csv"), series)
    io.dump_series(run.path("boundary.bin"), series)
    print(f"forward: boundary temperature at {series.values.shape[0]} nodes x {tg.times.size} times")


def stage_indicator(run: Run):
    cfg = run.cfg
    series = tau_sweep(cfg.sweep_config(), cfg.taus())
    io.write_indicator_csv(run.path("indicator.csv"), series)
    run.cache["series"] = series
    n_ok = int(np.sum(series.ok))
    print(f"indicator: {n_ok}/{len(series)} tau values solved ({cfg.path})")
    if n_ok == 0:
        raise SolverError("every tau value failed: " + str(next(iter(series.errors.values()))))
    return series


def estimate_items(cfg: RunConfig, est, series):
    items = [
        ("slope", est.slope),
        ("r_d_hat", est.r_d_hat),
        ("window", est.window),
        ("residual", est.residual),
        ("class", est.classification.value),
        ("n_points", est.n_points),
        ("normalized", "true" if est.normalized else "false"),
        ("path", cfg.path),
    ]
    r_true = true_radius(cfg)
    if r_true is not None:
        items.append(("r_d_true", r_true))
    if cfg.path == "timedomain":
        for T in cfg.fit_T:
            wt = time_window_test(series, T, normalize=cfg.fit_normalize)
            items.append((f"window_test_T{T:g}", f"{wt.outcome} slope={wt.slope!r}"))
    return items


def stage_extract(run: Run):
    cfg = run.cfg
    series = run.cache.get("series")
    if series is None:
        series = stage_indicator(run)
    est = extract_radius(series, cfg.shell.r1, window=cfg.fit_window, normalize=cfg.fit_normalize,
                         log_term=cfg.fit_log_term)
    text = io.format_summary(estimate_items(cfg, est, series)).replace(" = ", "=")
    with open(run.path("estimate.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    run.cache["estimate"] = text
    print(text, end="")


def stage_thermo(run: Run):
    cfg = run.cfg
    R_D = cfg.thermo_r_d
    rc = elastic_rate_check(cfg.elastic, cfg.thermo_r1, cfg.thermo_r2, R_D, T_values=cfg.thermo_T)
    geom = TouchingBallGeom.for_ball(np.zeros(3), Ball(np.zeros(3), R_D))
    taus = np.geomspace(50.0, 200.0, cfg.thermo_tau_count) / R_D
    rows, scaled = [], {}
    for case, a in (("perp", geom.b), ("parallel", geom.nu_q)):
        vals = np.array([lens_growth_integral(t, geom, a, scaled=True) for t in taus])
        scaled[case] = vals
        for t, v in zip(taus, vals):
            # the unscaled value overflows beyond 2 tau R_D ~ 709 and is written as inf
            full = v * math.exp(2 * t * R_D) if 2 * t * R_D <= 709 else math.inf
            rows.append((t, full, v, case))
    io.write_thermo_csv(run.path("thermo_lens.csv"), rows)
    perp_fit = growth_fit(taus, np.log(scaled["perp"]) + 2 * taus * R_D)
    a_perp, a_par = alpha_hat(taus, scaled["perp"]), alpha_hat(taus, scaled["parallel"])
    items = [
        ("rate", rc.rate),
        ("target", rc.target),
        ("rel_error", rc.rel_error),
        ("log_coefficient", rc.log_coefficient),
        ("residual", rc.residual),
    ]
    items += [(f"dichotomy_T{T:g}", v) for T, v in rc.dichotomy.items()]
    items += [
        ("lens_exponent_perp", perp_fit.rate),
        ("lens_exponent_target", 2 * R_D),
        ("alpha_hat_perp", a_perp),
        ("alpha_hat_parallel", a_par),
        ("alpha_hat_difference", a_par - a_perp),
    ]
    text = io.format_summary(items)
    with open(run.path("thermo_summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    print(text, end="")


STAGES = {
    "oracles": (stage_oracles,),
    "flux": (stage_flux,),
    "forward": (stage_forward,),
    "indicator": (stage_indicator,),
    "extract": (stage_extract,),
    "thermo": (stage_thermo,),
}


def _plan(command: str, cfg: RunConfig):
    if command != "all":
        return STAGES[command]
    time_stages = (stage_flux, stage_forward) if cfg.time is not None else ()
    return (stage_oracles,) + time_stages + (stage_indicator, stage_thermo, stage_extract)


def build_parser():
    ap = argparse.ArgumentParser(prog="enclab", description="Shell-data enclosure method: sweeps, fits and checks.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="config file, or builtin:<name>")
    ap.add_argument("--out", help="output directory (default: output.dir from the config)")
    ap.add_argument("--tau-min", type=float)
    ap.add_argument("--tau-max", type=float)
    ap.add_argument("--tau-count", type=int)
    ap.add_argument("--path", choices=("elliptic", "timedomain"))
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config.startswith("builtin:"):
            text = builtin_config(args.config.split(":", 1)[1])
        else:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
    except (OSError, FileNotFoundError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    overrides = {"tau.min": args.tau_min, "tau.max": args.tau_max, "tau.count": args.tau_count,
                 "path": args.path, "output.dir": args.out}
    try:
        cfg = parse_config(text, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    run = Run(cfg, cfg.out_dir)
    with open(run.path("config_effective.txt"), "w", encoding="utf-8") as fh:
        fh.write(cfg.echo())
    code = EXIT_OK
    try:
        for stage in _plan(args.command, cfg):
            stage(run)
            run.stages.append(stage.__name__.removeprefix("stage_"))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
    except GeometryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
    except NoiseFloorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_FLOOR
    except (SolverError, StageError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_SOLVER
    run.manifest(code == EXIT_OK)
    return code


if __name__ == "__main__":
    sys.exit(main())
