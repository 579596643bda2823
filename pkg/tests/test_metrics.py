import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from biomoments.exceptions import DomainError, InsufficientDataError, UndefinedShapeError
from biomoments.metrics import (
    MetricSeries,
    MomentTrajectory,
    Phase,
    metric_binding,
    metric_from_normal,
    metric_from_uniform,
    metric_series,
    ols_line,
    phase_label_at,
    phase_slopes,
    trajectory_speed,
)
from biomoments.moments import MomentVector, batch_moments


def mv(skew, ek, start=0.0):
    return MomentVector(0.0, 1.0, skew, ek, 100, start, start + 5000.0)


def traj(points):
    return MomentTrajectory(tuple(mv(s, k, 1000.0 * i) for i, (s, k) in enumerate(points)))


shape_points = st.tuples(st.floats(-20, 20), st.floats(-2, 50))


# --- distances ---------------------------------------------------------

def test_normal_reference_is_zero():
    assert metric_from_normal(mv(0, 0)) == 0.0


def test_three_four_five():
    assert metric_from_normal(mv(3, 4)) == 5.0


def test_uniform_reference_is_zero():
    assert metric_from_uniform(mv(0, -1.2)) == 0.0


def test_normal_point_is_1_2_from_uniform():
    assert metric_from_uniform(mv(0, 0)) == pytest.approx(1.2, abs=1e-15)


def test_uniform_sample_sits_near_uniform_reference():
    m = batch_moments(np.random.default_rng(11).uniform(size=10**6))
    assert metric_from_normal(m) == pytest.approx(1.2, abs=0.02)
    assert metric_from_uniform(m) <= 0.03


def test_normal_sample_is_1_2_from_uniform():
    m = batch_moments(np.random.default_rng(12).normal(size=10**6))
    assert metric_from_uniform(m) == pytest.approx(1.2, abs=0.02)


def test_undefined_shape_signals_exclusion():
    constant = MomentVector(1.0, 0.0, None, None, 10)
    with pytest.raises(UndefinedShapeError):
        metric_from_normal(constant)
    with pytest.raises(UndefinedShapeError):
        metric_from_uniform(constant)


@given(shape_points)
def test_metric_zero_only_at_origin(p):
    d = metric_from_normal(mv(*p))
    assert (d == 0.0) == (p == (0.0, 0.0))
    assert d >= 0.0


@given(shape_points)
def test_triangle_relation(p):
    a, b = metric_from_normal(mv(*p)), metric_from_uniform(mv(*p))
    assert abs(a - b) <= 1.2 + 1e-9
    assert 1.2 <= a + b + 1e-9


@given(st.floats(0.01, 100), st.floats(-1e3, 1e3), st.integers(0, 2**16))
def test_metrics_affine_invariant(a, b, seed):
    x = np.random.default_rng(seed).gamma(2.0, size=200)
    m0, m1 = batch_moments(x), batch_moments(a * x + b)
    assert metric_from_normal(m1) == pytest.approx(metric_from_normal(m0), rel=1e-9, abs=1e-9)
    assert metric_from_uniform(m1) == pytest.approx(metric_from_uniform(m0), rel=1e-9, abs=1e-9)


def test_binding_switch():
    n = metric_binding("normal")
    u = metric_binding("uniform")
    assert n["METRIC"] is metric_from_normal and n["METRIC3"] is metric_from_uniform
    assert u["METRIC"] is metric_from_uniform and u["METRIC3"] is metric_from_normal
    with pytest.raises(DomainError):
        metric_binding("gamma")


# --- trajectory --------------------------------------------------------

def test_trajectory_requires_increasing_time():
    with pytest.raises(DomainError):
        MomentTrajectory((mv(0, 0, 1000.0), mv(0, 0, 1000.0)))


def test_trajectory_rejects_undefined_points():
    with pytest.raises(UndefinedShapeError):
        MomentTrajectory((MomentVector(1.0, 0.0, None, None, 4, 0.0, 1.0),))


def test_from_moments_drops_undefined_windows():
    pts = [mv(0, 0, 0.0), MomentVector(1.0, 0.0, None, None, 4, 1000.0, 6000.0), mv(1, 1, 2000.0)]
    assert len(MomentTrajectory.from_moments(pts)) == 2


def test_constant_trajectory_has_zero_speed():
    speed = trajectory_speed(traj([(1, 2)] * 5))
    assert speed.mean_speed == 0.0 and np.all(speed.steps == 0.0)
    assert speed.net_displacement == 0.0


def test_single_step_speed():
    speed = trajectory_speed(traj([(0, 0), (3, 4)]))
    assert speed.steps.tolist() == [5.0]
    assert speed.mean_speed == 5.0 and speed.net_displacement == 5.0


def test_speed_needs_two_points():
    with pytest.raises(InsufficientDataError):
        trajectory_speed(traj([(0, 0)]))


@given(st.lists(shape_points, min_size=2, max_size=20),
       st.lists(st.floats(1, 1e5), min_size=20, max_size=20))
def test_speed_ignores_time_relabelling(points, gaps):
    t = np.cumsum(gaps[: len(points)])
    relabelled = MomentTrajectory(tuple(mv(s, k, float(ti)) for (s, k), ti in zip(points, t)))
    assert trajectory_speed(relabelled).mean_speed == trajectory_speed(traj(points)).mean_speed


# --- metric series -----------------------------------------------------

def test_metric_series_stamps_window_centres_and_phases():
    tr = traj([(3, 4), (0, 0), (0, -1.2)])
    phases = [Phase("a", 0, 3000), Phase("b", 3000, 10000)]
    s = metric_series(tr, "METRIC", "normal", phases)
    assert s.t_ms.tolist() == [2500.0, 3500.0, 4500.0]
    assert s.values.tolist() == pytest.approx([5.0, 0.0, 1.2])
    assert s.phases == ("a", "b", "b")
    s3 = metric_series(tr, "METRIC3", "normal")
    assert s3.values[2] == 0.0 and s3.phases is None


def test_metric_series_validation():
    with pytest.raises(DomainError):
        MetricSeries("METRIC", [0, 1], [1.0])
    with pytest.raises(DomainError):
        MetricSeries("METRIC", [0], [-1.0])


def test_phase_label_lookup_is_half_open():
    phases = [Phase("rest", 0, 60000), Phase("walk", 60000, 360000)]
    assert phase_label_at(phases, 59999) == "rest"
    assert phase_label_at(phases, 60000) == "walk"
    assert phase_label_at(phases, 360000) is None


# --- slopes ------------------------------------------------------------

def series(t_s, values):
    return MetricSeries("METRIC", np.asarray(t_s) * 1000.0, np.asarray(values, float))


def test_exact_line_slope_one():
    fit = phase_slopes(series([0, 1, 2, 3], [0, 1, 2, 3]), [Phase("p", 0, 10000)])["p"]
    assert fit.slope == pytest.approx(1.0, abs=1e-12)
    assert fit.intercept == pytest.approx(0.0, abs=1e-12)
    assert fit.residual_rms == pytest.approx(0.0, abs=1e-12)


def test_constant_metric_has_zero_slope():
    fit = phase_slopes(series(range(10), [2.5] * 10), [Phase("p", 0, 1e6)])["p"]
    assert fit.slope == 0.0 and fit.intercept == 2.5


def test_noisy_ramp():
    rng = np.random.default_rng(5)
    t = np.arange(100, dtype=float)
    y = 2.0 * t + 3.0 + rng.normal(0, 0.1, 100)
    fit = phase_slopes(series(t, y), [Phase("ramp", 0, 1e9)])["ramp"]
    assert abs(fit.slope - 2.0) <= 0.05


@given(st.floats(-100, 100), st.floats(-100, 100), st.integers(3, 50))
def test_exact_line_recovered_to_1e12(slope, intercept, n):
    t = np.arange(n, dtype=float)
    s, b, rms = ols_line(t, slope * t + intercept)
    assert s == pytest.approx(slope, abs=1e-12 * max(1.0, abs(slope)) * n)
    assert b == pytest.approx(intercept, abs=1e-11 * max(1.0, abs(intercept), abs(slope)) * n)


def test_short_phase_is_flagged_not_fatal():
    s = series(range(10), np.arange(10.0))
    fits = phase_slopes(s, [Phase("short", 0, 2000), Phase("long", 2000, 10000)])
    assert not fits["short"].sufficient and fits["short"].n == 2
    assert fits["long"].sufficient and fits["long"].slope == pytest.approx(1.0)
    assert [f["label"] for f in fits.as_list()] == ["short", "long"]
    with pytest.raises(KeyError):
        fits["missing"]


def test_phase_slopes_needs_phases():
    with pytest.raises(DomainError):
        phase_slopes(series([0, 1, 2], [0, 1, 2]), [])


def test_ols_rejects_single_timestamp():
    with pytest.raises(InsufficientDataError):
        ols_line([1.0, 1.0, 1.0], [0.0, 1.0, 2.0])


def test_metric_distances_are_euclidean():
    for s, k in [(1.0, 2.0), (-0.5, -1.0), (2.0, -3.0)]:
        assert metric_from_normal(mv(s, k)) == pytest.approx(math.hypot(s, k))
        assert metric_from_uniform(mv(s, k)) == pytest.approx(math.hypot(s, k + 1.2))
