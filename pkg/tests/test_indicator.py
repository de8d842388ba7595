import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from concentric_oracle import concentric_indicator
from enclab.geometry import Ball, Box, BoundaryMesh, GeometryError, Inclusion, ShellSource
from enclab.heatsolver import SolverConfig
from enclab.indicator import (
    IndicatorRecord,
    IndicatorSeries,
    JumpClass,
    NoiseFloorError,
    SweepConfig,
    classify_jump,
    default_taus,
    extract_radius,
    indicator_from_correction,
    indicator_value,
    tau_sweep,
    time_window_test,
    truncation_remainder,
)
from enclab.shellflux import TimeGrid

SHELL = ShellSource([0, 0, 0], 1.05, 1.55)
BALL = Ball([0, 0, 0], 1.0)


def _concentric(a=0.6, h=1.0, **kw):
    return SweepConfig(BALL, Inclusion(Ball([0, 0, 0], a), h), SHELL, **kw)


def _synthetic(s, r_d=0.6, r1=1.05, power=0.0, sign=1.0, path="elliptic"):
    s = np.asarray(s, dtype=float)
    return IndicatorSeries.from_arrays(s**2, sign * s**power * np.exp(2 * s * (r_d - r1)), path)


# --- assembly


def test_indicator_vanishes_when_fields_agree():
    mesh = BoundaryMesh(np.zeros((3, 3)), np.tile([0.0, 0.0, 1.0], (3, 1)), np.array([1.0, 2.0, 3.0]))
    w0 = np.array([1.0, -2.0, 0.5])
    assert indicator_value(w0, w0, np.ones(3), mesh) == 0.0
    assert indicator_value(w0, w0 - 1.0, np.array([1.0, 1.0, -1.0]), mesh) == 0.0
    assert indicator_from_correction(np.array([1.0, 1.0, 1.0]), np.array([1.0, 1.0, 1.0]), mesh) == -6.0


def test_indicator_mesh_mismatch():
    mesh = BoundaryMesh(np.zeros((3, 3)), np.tile([0.0, 0.0, 1.0], (3, 1)), np.ones(3))
    with pytest.raises(GeometryError):
        indicator_value(np.zeros(4), np.zeros(3), np.zeros(3), mesh)


def test_series_invariants():
    with pytest.raises(ValueError, match="increasing"):
        IndicatorSeries.from_arrays([4.0, 1.0], [1.0, 2.0])
    with pytest.raises(ValueError, match="non-finite"):
        IndicatorSeries.from_arrays([1.0, 4.0], [1.0, np.inf])
    with pytest.raises(ValueError, match="path"):
        IndicatorSeries.from_arrays([1.0], [1.0], path="magic")
    ser = IndicatorSeries([IndicatorRecord(1.0, 2.0, "elliptic"), IndicatorRecord(4.0, math.nan, "elliptic", "boom")])
    np.testing.assert_array_equal(ser.ok, [True, False])
    assert ser.errors == {4.0: "boom"}
    np.testing.assert_allclose(ser.s, [1.0, 2.0])


# --- tau grid


def test_default_taus_radial_and_capped_3d():
    t = default_taus(_concentric())
    assert t.size == 12
    np.testing.assert_allclose(np.sqrt(t[[0, -1]]), [80.0, 480.0])
    assert np.all(np.diff(t) > 0)
    box = SweepConfig(Box([-1] * 3, [1] * 3), Inclusion(None), ShellSource([0, 0, 0], 2.0, 3.0), grid_n=64)
    np.testing.assert_allclose(np.sqrt(default_taus(box)[[0, -1]]), [4.0, 16.0])


# --- fits


@given(st.floats(0.1, 1.0), st.floats(1.05, 3.0))
def test_exact_exponential_slope_recovered(r_d, r1):
    ser = _synthetic(np.linspace(5, 40, 10), r_d, r1)
    est = extract_radius(ser, r1, window="all")
    assert abs(est.slope - 2 * (r_d - r1)) < 1e-12
    assert abs(est.r_d_hat - r_d) < 1e-12
    assert est.residual < 1e-12


def test_algebraic_prefactor_error_shrinks_with_window():
    target = -0.9
    errors = []
    for lo in (10.0, 20.0, 40.0, 80.0):
        ser = _synthetic(np.linspace(lo, 2 * lo, 8), power=-3.0)
        errors.append(abs(extract_radius(ser, 1.05, window="all").slope - target))
    # the bias is about 3 log 2 / lo
    assert np.all(np.diff(errors) < 0)
    assert errors[0] < 3 * np.log(2) / 10 * 1.01
    # a log term in the model removes it
    ser = _synthetic(np.linspace(10, 20, 8), power=-3.0)
    assert abs(extract_radius(ser, 1.05, window="all", log_term=True).slope - target) < 1e-10


def test_windows_and_minimum_points():
    ser = _synthetic(np.linspace(5, 40, 12))
    assert extract_radius(ser, 1.05).n_points == 6
    assert extract_radius(ser, 1.05, window="all").n_points == 12
    assert extract_radius(ser, 1.05, window=(10, 30)).window[0] >= 10
    with pytest.raises(ValueError, match="at least 4"):
        extract_radius(ser, 1.05, window=(5, 8))
    with pytest.raises(ValueError):
        extract_radius(ser, 1.05, window="middle")


def test_noise_floor_errors():
    ser = _synthetic(np.linspace(5, 40, 12))
    with pytest.raises(NoiseFloorError, match="indicator at noise floor: increase grid resolution or reduce τ range"):
        extract_radius(ser, 1.05, noise_floor=1.0)
    # points beyond the first floored value are not used
    floor = np.full(12, 0.0)
    floor[7] = 1.0
    est = extract_radius(ser, 1.05, window="all", noise_floor=floor)
    assert est.n_points == 7
    with pytest.raises(NoiseFloorError):
        extract_radius(ser, 1.05, noise_floor=np.where(np.arange(12) < 3, 0.0, 1.0))


def test_normalisation_uses_prefactor():
    s = np.linspace(10, 40, 8)
    pref = np.log(s**-6)
    ser = IndicatorSeries.from_arrays(s**2, s**-6 * np.exp(-0.9 * s), log_prefactor=pref)
    assert abs(extract_radius(ser, 1.05, window="all").slope + 0.9) < 1e-12
    assert abs(extract_radius(ser, 1.05, window="all", normalize=False).slope + 0.9) > 0.1


def test_failed_records_are_skipped():
    s = np.linspace(5, 40, 10)
    vals = np.exp(-0.9 * s)
    recs = [IndicatorRecord(float(t), float(v), "elliptic") for t, v in zip(s**2, vals)]
    recs[0] = IndicatorRecord(recs[0].tau, math.nan, "elliptic", "solver failed")
    est = extract_radius(IndicatorSeries(recs), 1.05, window="all")
    assert est.n_points == 9 and abs(est.slope + 0.9) < 1e-12


def test_classification():
    s = np.linspace(5, 40, 8)
    assert classify_jump(_synthetic(s)) is JumpClass.POSITIVE
    assert classify_jump(_synthetic(s, sign=-1.0)) is JumpClass.NEGATIVE
    mixed = IndicatorSeries.from_arrays(s**2, np.where(np.arange(8) % 2, 1.0, -1.0))
    assert classify_jump(mixed) is JumpClass.INDETERMINATE
    # sign change outside the window does not matter
    assert classify_jump(mixed, window=(s[2], s[2])) is JumpClass.NEGATIVE
    assert JumpClass.NEGATIVE.value == "A.I" and JumpClass.POSITIVE.value == "A.II"


def test_time_window_on_exact_exponentials():
    s = np.linspace(10, 40, 8)
    for sign in (1.0, -1.0):
        ser = _synthetic(s, sign=sign, path="timedomain")
        low = time_window_test(ser, 0.7)
        high = time_window_test(ser, 1.2)
        assert low.outcome == "decays" and abs(low.slope + 0.2) < 1e-12
        assert high.outcome == "grows" and abs(high.slope - 0.3) < 1e-12
        assert high.sign == sign
    with pytest.raises(ValueError, match="time-domain"):
        time_window_test(_synthetic(s), 0.7)
    with pytest.raises(ValueError, match="insufficient"):
        time_window_test(_synthetic(s[:2], path="timedomain"), 0.7)


# --- sweeps


@pytest.mark.parametrize("h", [1.0, -0.5])
def test_radial_sweep_matches_oracle(h):
    taus = np.array([10.0, 40.0, 150.0]) ** 2
    ser = tau_sweep(_concentric(h=h, radial_cells=200), taus)
    ref = [concentric_indicator(t, 1.0, 0.6, h, 1.05, 1.55) for t in taus]
    np.testing.assert_allclose(ser.values, ref, rtol=1e-9)
    np.testing.assert_array_equal(ser.noise_floor, 0.0)
    assert ser.paths == ["elliptic"] * 3


def test_sign_stability_and_classes():
    for h, cls in ((1.0, JumpClass.POSITIVE), (-0.5, JumpClass.NEGATIVE), (3.0, JumpClass.POSITIVE)):
        ser = tau_sweep(_concentric(h=h))
        assert np.all(np.sign(ser.values) == np.sign(h))
        assert extract_radius(ser, 1.05).classification is cls


def test_empty_inclusion_is_indeterminate():
    ser = tau_sweep(SweepConfig(BALL, Inclusion(None), SHELL))
    np.testing.assert_array_equal(ser.values, 0.0)
    assert classify_jump(ser) is JumpClass.INDETERMINATE
    with pytest.raises(NoiseFloorError):
        extract_radius(ser, 1.05)


def test_log_indicator_asymptotically_affine():
    s = np.linspace(20, 400, 20)
    y = np.log(np.abs(tau_sweep(_concentric(), s**2).values))
    d2 = np.abs(np.diff(y, 2))
    assert np.all(np.diff(d2) < 0)
    assert d2[-1] < 0.1 * d2[0]


def test_larger_inclusion_gives_larger_slope():
    slopes = [extract_radius(tau_sweep(_concentric(a=a)), 1.05).slope for a in (0.4, 0.5, 0.6)]
    assert slopes[0] < slopes[1] < slopes[2]


def test_translation_covariance():
    taus = np.array([20.0, 60.0, 200.0]) ** 2
    base = tau_sweep(_concentric(), taus)
    d = np.array([0.3, -2.0, 1.1])
    moved = SweepConfig(Ball(d, 1.0), Inclusion(Ball(d, 0.6), 1.0), ShellSource(d, 1.05, 1.55))
    np.testing.assert_allclose(tau_sweep(moved, taus).values, base.values, rtol=1e-12)


def test_translation_covariance_3d():
    taus = np.array([9.0, 25.0])
    out = []
    for d in (np.zeros(3), np.array([1.5, -0.5, 0.25])):
        cfg = SweepConfig(Box(np.full(3, -1.0) + d, np.ones(3) + d), Inclusion(Ball(np.array([0.3, 0.1, 0]) + d, 0.35), 1.0),
                          ShellSource(d, 2.0, 3.0), grid_n=16, solver=SolverConfig(tol=1e-12))
        out.append(tau_sweep(cfg, taus).values)
    np.testing.assert_allclose(out[1], out[0], rtol=1e-7)


def test_partial_series_on_solver_failure():
    cfg = SweepConfig(Box([-1] * 3, [1] * 3), Inclusion(Ball([0.3, 0.1, 0], 0.35), 1.0), ShellSource([0, 0, 0], 2.0, 3.0),
                      grid_n=16, solver=SolverConfig(max_iter=60), floor_twin=False)
    ser = tau_sweep(cfg, [1.0, 16.0, 64.0, 256.0])
    np.testing.assert_array_equal(ser.ok, [False, False, True, True])
    assert "did not converge" in ser.records[0].error
    assert np.all(np.isfinite(ser.values[2:]))


def test_sweep_rejects_bad_taus_and_config():
    with pytest.raises(ValueError):
        tau_sweep(_concentric(), [4.0, 1.0])
    with pytest.raises(ValueError):
        tau_sweep(_concentric(), [-1.0, 1.0])
    with pytest.raises(ValueError, match="time grid"):
        _concentric(path="timedomain")
    with pytest.raises(ValueError):
        _concentric(path="frequency")


def test_time_domain_agrees_with_elliptic_within_remainder():
    taus = np.array([3.0, 4.0, 5.0]) ** 2
    fv = tau_sweep(_concentric(radial_cells=400, radial_scheme="fv"), taus)
    for T in (0.2, 0.4):
        fine = tau_sweep(_concentric(radial_cells=400, path="timedomain", time=TimeGrid(T, 4000)), taus)
        coarse = tau_sweep(_concentric(radial_cells=400, path="timedomain", time=TimeGrid(T, 2000)), taus)
        floor = np.abs(fine.values - coarse.values)
        assert np.all(np.abs(fine.values - fv.values) <= fine.remainder + floor)
        assert fine.paths == ["timedomain"] * 3


def test_doubling_final_time_changes_less_than_remainder():
    taus = np.array([4.0, 5.0]) ** 2
    a = tau_sweep(_concentric(radial_cells=400, path="timedomain", time=TimeGrid(0.2, 2000)), taus)
    b = tau_sweep(_concentric(radial_cells=400, path="timedomain", time=TimeGrid(0.4, 4000)), taus)
    assert np.all(np.abs(b.values - a.values) < a.remainder)
    assert np.all(b.remainder < a.remainder)


def test_tail_model_exact_for_exponential_and_linear_signals():
    times = np.linspace(0.0, 0.5, 501)
    tau, T = 25.0, times[-1]
    # exponential growth below tau: the exponential continuation is exact
    x = np.exp(7.0 * times)
    exact = np.exp(-(tau - 7.0) * T) / (tau - 7.0)
    assert truncation_remainder(tau, times, np.ones(1), x[None], 0.0, np.zeros((1, 501)), 0.0) == 0.0
    # with a zero flux record and unit flux transform the remainder is the gap tail alone
    got = truncation_remainder(tau, times, np.ones(1), x[None], 0.0, np.zeros((1, 501)), 1.0)
    assert got == pytest.approx(exact, rel=1e-9)
    # a linear signal just past a zero crossing: the log slope exceeds tau, the linear tail is exact
    y = 3.0 * (times - 0.499)
    exact = np.exp(-tau * T) * (y[-1] / tau + 3.0 / tau**2)
    got = truncation_remainder(tau, times, np.ones(1), y[None], 0.0, np.zeros((1, 501)), 1.0)
    assert np.isfinite(got) and got == pytest.approx(exact, rel=1e-9)
