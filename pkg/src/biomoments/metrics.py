"""Distances on the moments diagram, trajectory speed and phase slopes.

The moments diagram is the (skewness, excess kurtosis) plane. Every
normal law maps to ``(0, 0)`` and every uniform law to ``(0, -1.2)``; the
two metrics below measure how far a window's distribution sits from those
references. Both are unit-free and therefore invariant under positive
affine rescaling of the raw signal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .exceptions import DomainError, InsufficientDataError, UndefinedShapeError
from .moments import MomentVector

NORMAL_REFERENCE = (0.0, 0.0)
UNIFORM_REFERENCE = (0.0, -1.2)
METRIC_NAMES = ("METRIC", "METRIC3")


def _shape(mv: MomentVector) -> tuple:
    if not mv.shape_defined:
        raise UndefinedShapeError("window has undefined shape moments")
    return mv.skewness, mv.excess_kurtosis


def metric_from_normal(mv: MomentVector) -> float:
    s, k = _shape(mv)
    return math.hypot(s - NORMAL_REFERENCE[0], k - NORMAL_REFERENCE[1])


def metric_from_uniform(mv: MomentVector) -> float:
    s, k = _shape(mv)
    return math.hypot(s - UNIFORM_REFERENCE[0], k - UNIFORM_REFERENCE[1])


def metric_binding(binding: str = "normal") -> dict:
    """Map report labels to distance functions.

    ``"normal"`` binds METRIC to the normal reference and METRIC3 to the
    uniform one; ``"uniform"`` swaps them.
    """
    if binding == "normal":
        return {"METRIC": metric_from_normal, "METRIC3": metric_from_uniform}
    if binding == "uniform":
        return {"METRIC": metric_from_uniform, "METRIC3": metric_from_normal}
    raise DomainError(f"metric binding must be 'normal' or 'uniform', got {binding!r}")


@dataclass(frozen=True)
class MomentTrajectory:
    """Time-ordered moment vectors of one signal, all with defined shape."""

    points: tuple
    modality: str = "scalar"

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        starts = [p.start_ms for p in self.points]
        for p in self.points:
            if not p.shape_defined:
                raise UndefinedShapeError("trajectory points must have defined shape moments")
        if any(s is None for s in starts):
            raise DomainError("trajectory points need start_ms timestamps")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise DomainError("trajectory timestamps must be strictly increasing")

    @classmethod
    def from_moments(cls, moments: Sequence[MomentVector], modality="scalar") -> "MomentTrajectory":
        """Build a trajectory, silently dropping windows with undefined shape."""
        return cls(tuple(m for m in moments if m.shape_defined), modality)

    def __len__(self):
        return len(self.points)

    def shape_array(self) -> np.ndarray:
        return np.array([p.shape for p in self.points], dtype=float).reshape(len(self), 2)

    def center_ms(self) -> np.ndarray:
        return np.array([(p.start_ms + p.end_ms) / 2.0 for p in self.points], dtype=float)


@dataclass(frozen=True, eq=False)
class MetricSeries:
    name: str
    t_ms: np.ndarray
    values: np.ndarray
    phases: Optional[tuple] = None

    def __post_init__(self):
        t = np.asarray(self.t_ms, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise DomainError("t_ms and values must be equal-length 1-D sequences")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise DomainError("metric values must be finite and non-negative")
        if self.phases is not None and len(self.phases) != len(v):
            raise DomainError("phase labels must match the number of values")
        object.__setattr__(self, "t_ms", t)
        object.__setattr__(self, "values", v)


def metric_series(traj: MomentTrajectory, name="METRIC", binding="normal",
                  phases: Optional[Sequence["Phase"]] = None) -> MetricSeries:
    """Evaluate a bound metric on every trajectory point, stamped at window centres."""
    fn = metric_binding(binding)[name]
    t = traj.center_ms()
    labels = None
    if phases is not None:
        labels = tuple(phase_label_at(phases, x) for x in t)
    return MetricSeries(name, t, np.array([fn(p) for p in traj.points]), labels)


class TrajectorySpeed(NamedTuple):
    steps: np.ndarray
    mean_speed: float
    net_displacement: float


def trajectory_speed(traj: MomentTrajectory) -> TrajectorySpeed:
    """Step lengths between consecutive points on the moments diagram.

    Windows are equally strided, so the step index serves as the clock and
    speed is measured in diagram units per window step.
    """
    if len(traj) < 2:
        raise InsufficientDataError("trajectory speed needs at least 2 points")
    xy = traj.shape_array()
    steps = np.hypot(*np.diff(xy, axis=0).T)
    net = float(np.hypot(*(xy[-1] - xy[0])))
    return TrajectorySpeed(steps, float(steps.mean()), net)


# --- phase slopes -------------------------------------------------------

class Phase(NamedTuple):
    label: str
    start_ms: float
    end_ms: float


def phase_label_at(phases: Sequence[Phase], t_ms: float) -> Optional[str]:
    for p in phases:
        if p.start_ms <= t_ms < p.end_ms:
            return p.label
    return None


@dataclass(frozen=True)
class PhaseFit:
    label: str
    start_ms: float
    end_ms: float
    n: int
    slope: Optional[float]
    intercept: Optional[float]
    residual_rms: Optional[float]

    @property
    def sufficient(self) -> bool:
        return self.slope is not None


@dataclass(frozen=True)
class PhaseSlopes:
    """Per-phase least-squares fits; slope in metric units per second."""

    fits: tuple = field(default_factory=tuple)

    def __getitem__(self, label) -> PhaseFit:
        for f in self.fits:
            if f.label == label:
                return f
        raise KeyError(label)

    def as_list(self) -> list:
        return [dict(f.__dict__, sufficient=f.sufficient) for f in self.fits]


def ols_line(x, y) -> tuple:
    """Closed-form least squares ``y = slope * x + intercept``; returns (slope, intercept, rms)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise InsufficientDataError("all points share one timestamp")
    slope = float(dx @ (y - ym)) / sxx
    intercept = float(ym - slope * xm)
    resid = y - (slope * x + intercept)
    return slope, intercept, float(np.sqrt(np.mean(resid * resid)))


def phase_slopes(series: MetricSeries, phases: Sequence[Phase], min_points=3) -> PhaseSlopes:
    """Fit one OLS line per phase to the metric values inside ``[start, end)``.

    Phases with fewer than ``min_points`` values get ``None`` fields instead
    of failing the whole call.
    """
    if not phases:
        raise DomainError("at least one phase is required")
    fits = []
    for p in phases:
        p = Phase(*p)
        mask = (series.t_ms >= p.start_ms) & (series.t_ms < p.end_ms)
        n = int(mask.sum())
        if n < min_points:
            fits.append(PhaseFit(p.label, p.start_ms, p.end_ms, n, None, None, None))
            continue
        slope, intercept, rms = ols_line(series.t_ms[mask] / 1000.0, series.values[mask])
        fits.append(PhaseFit(p.label, p.start_ms, p.end_ms, n, slope, intercept, rms))
    return PhaseSlopes(tuple(fits))
