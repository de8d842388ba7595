"""Indicator function, spectral sweeps, radius extraction and jump classification.

The indicator is I(tau) = int_{dOmega} (w0 - w) d_nu w0 dS.  Its logarithm is
asymptotically affine in s = sqrt(tau) with slope 2 (R_D(p) - R1), where
R_D(p) is the radius of the smallest sphere about p enclosing the inclusion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .geometry import Ball, BoundaryMesh, Box, GeometryError, Inclusion, ShellSource, enclosing_radius, validate_shell
from .heatsolver import (
    Grid,
    SolverConfig,
    SolverError,
    medium_from_inclusion,
    solve_heat_timedomain,
    solve_modified_helmholtz,
    solve_radial,
    solve_scattered_helmholtz,
    solve_scattered_timedomain,
)
from .potentials import profile_H, scaled_dsinhc, w00_closed, w00_gradient
from .shellflux import TimeGrid, flux_on_boundary, heat_on_boundary, laplace_boundary, shell_heat_value

PATHS = ("elliptic", "timedomain")


class NoiseFloorError(ValueError):
    """No usable indicator values above the estimated noise floor."""


class JumpClass(str, Enum):
    NEGATIVE = "A.I"
    POSITIVE = "A.II"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class IndicatorRecord:
    tau: float
    value: float
    path: str
    error: str | None = None

    @property
    def s(self) -> float:
        return math.sqrt(self.tau)

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class IndicatorSeries:
    """Indicator values over increasing tau.

    ``log_prefactor`` (optional, per record) is the known algebraic part
    2 log|H(s)| of the indicator, removed by the normalised fits.
    ``noise_floor`` (optional, per record) is an absolute error estimate.
    ``remainder`` (optional, time-domain only) models the part of the
    transform lost by stopping at the final time T.
    """

    records: list
    log_prefactor: np.ndarray | None = None
    noise_floor: np.ndarray | None = None
    remainder: np.ndarray | None = None

    def __post_init__(self):
        taus = np.array([r.tau for r in self.records], dtype=float)
        if np.any(taus <= 0):
            raise ValueError("tau values must be positive")
        if np.any(np.diff(taus) <= 0):
            raise ValueError("tau values must be strictly increasing")
        for r in self.records:
            if r.ok and not np.isfinite(r.value):
                raise ValueError(f"non-finite indicator at tau={r.tau}")
            if r.path not in PATHS:
                raise ValueError(f"unknown path {r.path!r}")
        for name in ("log_prefactor", "noise_floor", "remainder"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=float)
                if arr.shape != taus.shape:
                    raise ValueError(f"{name} needs one value per record")
                setattr(self, name, arr)

    @classmethod
    def from_arrays(cls, taus, values, path="elliptic", log_prefactor=None, noise_floor=None, remainder=None):
        recs = [IndicatorRecord(float(t), float(v), path) for t, v in zip(taus, values)]
        return cls(recs, log_prefactor, noise_floor, remainder)

    def __len__(self):
        return len(self.records)

    @property
    def taus(self) -> np.ndarray:
        return np.array([r.tau for r in self.records])

    @property
    def s(self) -> np.ndarray:
        return np.sqrt(self.taus)

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value if r.ok else np.nan for r in self.records])

    @property
    def ok(self) -> np.ndarray:
        return np.array([r.ok for r in self.records], dtype=bool)

    @property
    def paths(self) -> list:
        return [r.path for r in self.records]

    @property
    def errors(self) -> dict:
        return {r.tau: r.error for r in self.records if not r.ok}


@dataclass(frozen=True)
class RadiusEstimate:
    slope: float
    r_d_hat: float
    window: tuple
    residual: float
    classification: JumpClass
    n_points: int
    intercept: float = 0.0
    log_coefficient: float | None = None
    normalized: bool = False


@dataclass(frozen=True)
class WindowTest:
    slope: float
    outcome: str  # "decays" or "grows"
    sign: int  # sign of I in the window; the growth is towards sign * infinity
    T: float


# ---------------------------------------------------------------------------
# indicator assembly


def indicator_value(w0_trace, w_trace, dnu_w0_trace, mesh: BoundaryMesh) -> float:
    """Quadrature sum of (w0 - w) d_nu w0 over the boundary nodes."""
    arrays = [np.asarray(a, dtype=float) for a in (w0_trace, w_trace, dnu_w0_trace)]
    for a in arrays:
        if a.shape != (len(mesh),):
            raise GeometryError(f"trace with shape {a.shape} does not match a mesh of {len(mesh)} nodes")
    w0, w, dnu = arrays
    return float(np.sum(mesh.weights * (w0 - w) * dnu))


def indicator_from_correction(eps_trace, dnu_w0_trace, mesh: BoundaryMesh) -> float:
    """Indicator from the correction eps = w - w0 on the boundary: -sum(weight eps d_nu w0)."""
    zero = np.zeros(len(mesh))
    return indicator_value(zero, eps_trace, dnu_w0_trace, mesh)


def sphere_node_mesh(ball: Ball) -> BoundaryMesh:
    """One-node surface rule for radially symmetric integrands on a sphere."""
    e = np.array([[0.0, 0.0, 1.0]])
    return BoundaryMesh(ball.center + ball.radius * e, e, np.array([4 * np.pi * ball.radius**2]))


@dataclass(frozen=True)
class SweepConfig:
    """Everything a tau sweep needs.

    ``mode`` is "radial" (concentric balls) or "3d" (box body); ``None`` picks
    radial for ball bodies and 3d for boxes.  ``formulation`` selects the
    scattered-field solvers (default) or the total-field ones.
    ``radial_scheme`` picks the exact three-point scheme ("transfer") or the
    finite volumes ("fv") for radial elliptic solves.
    """

    body: object
    inclusion: Inclusion
    shell: ShellSource
    path: str = "elliptic"
    mode: str | None = None
    grid_n: int = 64
    radial_cells: int = 4000
    time: TimeGrid | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    formulation: str = "scattered"
    floor_twin: bool = True
    radial_scheme: str = "transfer"

    def __post_init__(self):
        if self.path not in PATHS:
            raise ValueError(f"path must be one of {PATHS}, got {self.path!r}")
        mode = self.mode or ("radial" if isinstance(self.body, Ball) else "3d")
        if mode not in ("radial", "3d"):
            raise ValueError(f"mode must be 'radial' or '3d', got {mode!r}")
        object.__setattr__(self, "mode", mode)
        if self.formulation not in ("scattered", "total"):
            raise ValueError(f"formulation must be 'scattered' or 'total', got {self.formulation!r}")
        if self.path == "timedomain" and self.time is None:
            raise ValueError("the time-domain path needs a time grid")
        validate_shell(self.body, self.shell)

    @property
    def spacing(self) -> float:
        if self.mode == "radial":
            return self.body.radius / self.radial_cells
        return float(np.max((self.body.hi - self.body.lo) / self.grid_n))


def default_taus(config: SweepConfig, count: int = 12, resolution: float = 0.5) -> np.ndarray:
    """Log-spaced taus with s in [4, 24]/(R1 - R_Omega(p)), capped at s h <= ``resolution``.

    When the cap bites, the upper end becomes resolution/h and the lower end at
    most a quarter of it.
    """
    gap = config.shell.r1 - enclosing_radius(config.body, config.shell.p)
    s_lo, s_hi = 4.0 / gap, 24.0 / gap
    cap = resolution / config.spacing
    if s_hi > cap:
        s_hi = cap
        s_lo = min(s_lo, cap / 4.0)
    return np.geomspace(s_lo, s_hi, count) ** 2


def _tail(tau, times, x):
    """int_T^inf exp(-tau t) x(t) dt in magnitude, for x continued past T from its last step.

    Two continuations are formed: exponential, x(T) exp(rate (t - T)) with the
    logarithmic slope of the last step (zero when decaying), and linear,
    x(T) + x'(T) (t - T).  The larger tail is returned.  Near a zero crossing
    the logarithmic slope is meaningless and can reach tau; there the
    exponential tail diverges and the linear one is used alone.
    """
    x = np.asarray(x, dtype=float)
    xT, xp = x[..., -1], x[..., -2]
    dt = times[-1] - times[-2]
    decay = np.exp(-tau * times[-1])
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.where((xT != 0) & (xp != 0) & (np.sign(xT) == np.sign(xp)), np.log(np.abs(xT / xp)) / dt, 0.0)
    rate = np.maximum(rate, 0.0)
    linear = decay * (np.abs(xT) / tau + np.abs(xT - xp) / dt / tau**2)
    with np.errstate(divide="ignore"):
        expo = np.where(rate < tau, decay * np.abs(xT) / np.maximum(tau - rate, 0.0), 0.0)
    return np.maximum(linear, expo)


def truncation_remainder(tau, times, weights, gap, gap_hat, flux, flux_hat) -> float:
    """Model of the indicator change from continuing the data past the final time T.

    Each truncated transform misses the tail of its integrand, estimated by
    continuing the samples exponentially from the last step; the indicator,
    a product of two transforms, then misses
    sum(weight (|gap tail| (|flux_hat| + |flux tail|) + |gap_hat| |flux tail|)).
    ``gap`` and ``flux`` are sample arrays with time along the last axis.
    """
    times = np.asarray(times, dtype=float)
    dg, df = _tail(tau, times, gap), _tail(tau, times, flux)
    return float(np.sum(weights * (dg * (np.abs(flux_hat) + df) + np.abs(gap_hat) * df)))


def _radial_normal_slope(shell, R, s):
    return profile_H(s, shell.r1, shell.r2) * float(scaled_dsinhc(R, s, shell.r1))


def _sweep_radial_elliptic(cfg: SweepConfig, inclusion: Inclusion, taus):
    out = []
    R = cfg.body.radius
    area = 4 * np.pi * R * R
    for tau in taus:
        s = math.sqrt(tau)
        try:
            sol = solve_radial(cfg.body, inclusion, cfg.shell, tau=tau, n_cells=cfg.radial_cells,
                               scattered=cfg.formulation == "scattered", scheme=cfg.radial_scheme)
        except (SolverError, np.linalg.LinAlgError) as exc:
            out.append((math.nan, str(exc), math.nan))
            continue
        g = _radial_normal_slope(cfg.shell, R, s)
        if cfg.formulation == "scattered":
            out.append((-area * sol.boundary * g, None, math.nan))
        else:
            w0 = float(w00_closed(cfg.body.center + [0, 0, R], cfg.shell, s))
            out.append((area * (w0 - sol.boundary) * g, None, math.nan))
    return out


def _sweep_radial_time(cfg: SweepConfig, inclusion: Inclusion, taus):
    R = cfg.body.radius
    area = 4 * np.pi * R * R
    tg = cfg.time
    scattered = cfg.formulation == "scattered"
    sol = solve_radial(cfg.body, inclusion, cfg.shell, time_grid=tg, n_cells=cfg.radial_cells, scattered=scattered)
    v, f = shell_heat_value(R, tg.times, cfg.shell)
    gap = -sol.boundary if scattered else v - sol.boundary
    out = []
    for tau in taus:
        g = laplace_boundary(f[None, :], tau, tg.times)[0]
        gap_hat = laplace_boundary(gap[None, :], tau, tg.times)[0]
        rem = truncation_remainder(tau, tg.times, area, gap, gap_hat, f, g)
        out.append((area * gap_hat * g, None, rem))
    return out


def _sweep_3d_elliptic(cfg: SweepConfig, inclusion: Inclusion, taus):
    grid = Grid(cfg.body, cfg.grid_n)
    medium = medium_from_inclusion(grid, inclusion)
    mesh = grid.boundary_mesh()
    out = []
    for tau in taus:
        s = math.sqrt(tau)
        dnu = np.einsum("ij,ij->i", w00_gradient(mesh.points, cfg.shell, s), mesh.normals)
        try:
            if cfg.formulation == "scattered":
                sol = solve_scattered_helmholtz(cfg.body, medium, tau, cfg.shell, grid, cfg.solver)
                out.append((indicator_from_correction(sol.trace, dnu, mesh), None))
            else:
                sol = solve_modified_helmholtz(cfg.body, medium, tau, dnu, grid, cfg.solver)
                w0 = w00_closed(mesh.points, cfg.shell, s)
                out.append((indicator_value(w0, sol.trace, dnu, mesh), None))
        except SolverError as exc:
            out.append((math.nan, str(exc)))
    return [o + (math.nan,) for o in out]


def _sweep_3d_time(cfg: SweepConfig, inclusion: Inclusion, taus):
    grid = Grid(cfg.body, cfg.grid_n)
    medium = medium_from_inclusion(grid, inclusion)
    mesh = grid.boundary_mesh()
    flux = flux_on_boundary(mesh, cfg.time, cfg.shell, body=cfg.body)
    if cfg.formulation == "scattered":
        sol = solve_scattered_timedomain(cfg.body, medium, cfg.shell, grid, cfg.time, cfg.solver)
        gap = -sol.boundary.values
    else:
        sol = solve_heat_timedomain(cfg.body, medium, flux, grid, cfg.solver)
        gap = heat_on_boundary(mesh, cfg.time, cfg.shell).values - sol.boundary.values
    out = []
    for tau in taus:
        g = laplace_boundary(flux, tau)
        gap_hat = laplace_boundary(gap, tau, cfg.time.times)
        rem = truncation_remainder(tau, cfg.time.times, mesh.weights, gap, gap_hat, flux.values, g)
        out.append((indicator_value(gap_hat, np.zeros(len(mesh)), g, mesh), None, rem))
    return out


def _run(cfg: SweepConfig, inclusion: Inclusion, taus):
    runner = {
        ("radial", "elliptic"): _sweep_radial_elliptic,
        ("radial", "timedomain"): _sweep_radial_time,
        ("3d", "elliptic"): _sweep_3d_elliptic,
        ("3d", "timedomain"): _sweep_3d_time,
    }[(cfg.mode, cfg.path)]
    try:
        return runner(cfg, inclusion, taus)
    except SolverError as exc:
        return [(math.nan, str(exc), math.nan)] * len(taus)


def tau_sweep(config: SweepConfig, taus: Sequence[float] | None = None) -> IndicatorSeries:
    """Indicator values for each tau, in increasing order.

    Solver failures become per-tau error entries.  With ``floor_twin`` the
    sweep is repeated without the inclusion and the magnitudes of that twin
    are stored as ``noise_floor`` (zero for the scattered formulation, where
    the twin indicator vanishes identically).
    """
    taus = default_taus(config) if taus is None else np.asarray(taus, dtype=float)
    if np.any(taus <= 0):
        raise ValueError("tau values must be positive")
    if np.any(np.diff(taus) <= 0):
        raise ValueError("tau values must be strictly increasing")
    results = _run(config, config.inclusion, taus)
    records = [IndicatorRecord(float(t), float(v), config.path, err) for t, (v, err, _) in zip(taus, results)]
    remainder = np.array([r for _, _, r in results]) if config.path == "timedomain" else None
    log_pref = np.array([2.0 * math.log(abs(profile_H(math.sqrt(t), config.shell.r1, config.shell.r2))) for t in taus])
    floor = None
    if config.floor_twin and not config.inclusion.empty:
        twin = _run(config, Inclusion(None), taus)
        floor = np.array([abs(v) if err is None else np.inf for v, err, _ in twin])
    return IndicatorSeries(records, log_pref, floor, remainder)


# ---------------------------------------------------------------------------
# fits


def _usable(series: IndicatorSeries, noise_floor, floor_factor: float) -> np.ndarray:
    vals = series.values
    floor = np.zeros(len(series))
    if series.noise_floor is not None:
        floor = np.maximum(floor, series.noise_floor)
    if noise_floor is not None:
        floor = np.maximum(floor, np.broadcast_to(np.asarray(noise_floor, dtype=float), floor.shape))
    with np.errstate(invalid="ignore"):
        return series.ok & (np.abs(vals) > floor_factor * floor) & (vals != 0)


def _leading_run(mask: np.ndarray) -> np.ndarray:
    """Indices of the first contiguous run of True (s_max stops before the floor is hit)."""
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return idx
    stop = idx[0]
    while stop + 1 < mask.size and mask[stop + 1]:
        stop += 1
    return np.arange(idx[0], stop + 1)


def _lstsq(s, y, w, log_term):
    cols = [np.ones_like(s), s] + ([np.log(s)] if log_term else [])
    X = np.stack(cols, axis=1)
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    resid = y - X @ coef
    rms = math.sqrt(float(np.sum(w * resid**2) / np.sum(w)))
    return coef, rms


def _select_window(s, idx, window, min_points, y, w, log_term):
    if isinstance(window, str):
        n = idx.size
        if window == "all":
            return idx
        m = max(min_points, math.ceil(n / 2))
        if window == "upper":
            return idx[n - m:] if n >= m else idx
        if window == "auto":
            best, best_rms = None, math.inf
            for length in range(m, n + 1):
                for start in range(0, n - length + 1):
                    cand = idx[start:start + length]
                    _, rms = _lstsq(s[cand], y[cand], w[cand], log_term)
                    if rms < best_rms - 1e-15:
                        best, best_rms = cand, rms
            return best if best is not None else idx
        raise ValueError(f"unknown window {window!r}")
    lo, hi = window
    return idx[(s[idx] >= lo) & (s[idx] <= hi)]


def extract_radius(series: IndicatorSeries, R1: float, window="upper", noise_floor=None,
                   normalize: bool = True, log_term: bool = False, weights=None,
                   min_points: int = 4, floor_factor: float = 10.0) -> RadiusEstimate:
    """Least-squares fit of log|I| against s; R_D_hat = R1 + slope/2.

    Points with |I| at or below ``floor_factor`` times the noise floor are
    dropped and the usable range ends where the floor is first hit.
    ``window`` is "upper" (upper half of the usable points, default), "all",
    "auto" (smallest residual over contiguous windows of at least half the
    points) or an explicit (s_min, s_max).  With ``normalize`` the known
    prefactor ``series.log_prefactor`` is subtracted first; ``log_term`` adds a
    c log s column to the model.
    """
    s = series.s
    usable = _usable(series, noise_floor, floor_factor)
    if not np.any(usable):
        raise NoiseFloorError("indicator at noise floor: increase grid resolution or reduce τ range")
    idx = _leading_run(usable)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.log(np.abs(series.values))
    use_norm = normalize and series.log_prefactor is not None
    if use_norm:
        y = y - series.log_prefactor
    w = np.ones(len(series)) if weights is None else np.asarray(weights, dtype=float)
    if idx.size < min_points:
        raise NoiseFloorError(
            f"only {idx.size} usable points above the noise floor (need {min_points}): "
            "increase grid resolution or reduce τ range"
        )
    sel = _select_window(s, idx, window, min_points, y, w, log_term)
    if sel.size < min_points:
        raise ValueError(f"fit window holds {sel.size} points, need at least {min_points}")
    coef, rms = _lstsq(s[sel], y[sel], w[sel], log_term)
    slope = float(coef[1])
    win = (float(s[sel[0]]), float(s[sel[-1]]))
    cls = classify_jump(series, window=win)
    return RadiusEstimate(
        slope=slope,
        r_d_hat=R1 + slope / 2.0,
        window=win,
        residual=rms,
        classification=cls,
        n_points=int(sel.size),
        intercept=float(coef[0]),
        log_coefficient=float(coef[2]) if log_term else None,
        normalized=use_norm,
    )


def classify_jump(series: IndicatorSeries, window=None) -> JumpClass:
    """Sign of I over the window: all negative is A.I, all positive A.II, else indeterminate."""
    s = series.s
    mask = series.ok
    if window is not None:
        mask = mask & (s >= window[0]) & (s <= window[1])
    vals = series.values[mask]
    if vals.size == 0:
        return JumpClass.INDETERMINATE
    if np.all(vals < 0):
        return JumpClass.NEGATIVE
    if np.all(vals > 0):
        return JumpClass.POSITIVE
    return JumpClass.INDETERMINATE


def time_window_test(series: IndicatorSeries, T: float, window=None, normalize: bool = True,
                     log_term: bool = False, min_points: int = 3) -> WindowTest:
    """Sign of d/ds [s T + log|I|]: negative means exp(sT) I decays, positive that it grows."""
    if not T > 0:
        raise ValueError("T must be positive")
    if any(p != "timedomain" for p in series.paths):
        raise ValueError("the observation-time test needs a time-domain series")
    s = series.s
    mask = series.ok & (series.values != 0)
    if window is not None:
        mask &= (s >= window[0]) & (s <= window[1])
    idx = np.flatnonzero(mask)
    if idx.size < min_points:
        raise ValueError(f"insufficient points for the observation-time test: {idx.size} < {min_points}")
    y = s[idx] * T + np.log(np.abs(series.values[idx]))
    if normalize and series.log_prefactor is not None:
        y = y - series.log_prefactor[idx]
    coef, _ = _lstsq(s[idx], y, np.ones(idx.size), log_term)
    slope = float(coef[1])
    sign = int(np.sign(np.sum(np.sign(series.values[idx]))))
    return WindowTest(slope, "grows" if slope > 0 else "decays", sign, float(T))


def with_path(series: IndicatorSeries, path: str) -> IndicatorSeries:
    return IndicatorSeries([replace(r, path=path) for r in series.records], series.log_prefactor, series.noise_floor,
                           series.remainder)
