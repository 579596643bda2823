"""Windowed distribution moments, bootstrap intervals and periodograms.

All moment estimators are *population* (biased) versions::

    mean  = sum(x) / n
    std   = sqrt(sum((x - mean)**2) / n)
    skew  = m3 / std**3
    ekurt = m4 / std**4 - 3          with m_k = sum((x - mean)**k) / n

Excess kurtosis is stored so that every normal law sits at the origin of
the (skewness, excess kurtosis) plane. Comparisons made with these
estimators are only meaningful within one pipeline, where the constant
small-sample bias cancels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import as_series, as_timed_series, check_open_unit, check_positive
from .exceptions import DomainError, InsufficientDataError

MIN_WINDOW_SAMPLES = 4
DEFAULT_WIDTH_MS = 5000
DEFAULT_STRIDE_MS = 1000

MOMENT_NAMES = ("mean", "std", "skewness", "excess_kurtosis")


@dataclass(frozen=True, eq=False)
class Window:
    start_ms: float
    end_ms: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.start_ms < self.end_ms:
            raise DomainError("window start must precede its end")

    @property
    def n(self) -> int:
        return len(self.values)


class WindowingResult(NamedTuple):
    windows: list
    skipped: int


def sliding_windows(t, values, width_ms=DEFAULT_WIDTH_MS, stride_ms=DEFAULT_STRIDE_MS,
                    end_ms=None, min_samples=MIN_WINDOW_SAMPLES) -> WindowingResult:
    """Cut a timestamped scalar series into half-open windows ``[start, start + width)``.

    Windows start at the first timestamp and advance by ``stride_ms``. Only
    windows that fit inside the series are emitted; the series is taken to
    end one median sampling interval after its last timestamp unless
    ``end_ms`` is given. A series shorter than one width yields a single
    window. Windows holding fewer than ``min_samples`` values are dropped
    and counted in ``skipped``.
    """
    check_positive("width_ms", width_ms)
    check_positive("stride_ms", stride_ms)
    t, values = as_timed_series(t, values)
    if t.size == 0:
        return WindowingResult([], 0)
    if end_ms is None:
        step = float(np.median(np.diff(t))) if t.size > 1 else 0.0
        end_ms = t[-1] + step
    span = end_ms - t[0]
    # slack absorbs float drift for fractional strides
    count = int(math.floor((span - width_ms) / stride_ms + 1e-9)) + 1 if span >= width_ms else 1
    starts = t[0] + stride_ms * np.arange(count)
    bounds = np.searchsorted(t, np.concatenate([starts, starts + width_ms]), side="left")
    windows, skipped = [], 0
    for start, lo, hi in zip(starts, bounds[:count], bounds[count:]):
        if hi - lo >= min_samples:
            windows.append(Window(float(start), float(start + width_ms), values[lo:hi]))
        else:
            skipped += 1
    return WindowingResult(windows, skipped)


@dataclass(frozen=True)
class MomentVector:
    """The four moments of one window.

    ``skewness`` and ``excess_kurtosis`` are ``None`` when the window has
    zero variance.
    """

    mean: float
    std: float
    skewness: Optional[float]
    excess_kurtosis: Optional[float]
    n: int
    start_ms: Optional[float] = None
    end_ms: Optional[float] = None

    @property
    def shape_defined(self) -> bool:
        return self.skewness is not None and self.excess_kurtosis is not None

    @property
    def shape(self) -> tuple:
        """(skewness, excess_kurtosis) point on the moments diagram."""
        if not self.shape_defined:
            raise DomainError("shape moments undefined for a zero-variance window")
        return (self.skewness, self.excess_kurtosis)

    def as_dict(self) -> dict:
        return {
            "start_ms": self.start_ms,
            "end_ms": self.end_ms,
            "n": self.n,
            "mean": self.mean,
            "std": self.std,
            "skewness": self.skewness,
            "excess_kurtosis": self.excess_kurtosis,
        }


def _from_central(n, mean, m2, m3, m4, start_ms, end_ms, constant):
    if constant or m2 <= 0.0:
        return MomentVector(float(mean), 0.0, None, None, int(n), start_ms, end_ms)
    std = math.sqrt(m2)
    return MomentVector(
        float(mean), std, float(m3 / m2**1.5), float(m4 / (m2 * m2) - 3.0),
        int(n), start_ms, end_ms,
    )


def batch_moments(values, start_ms=None, end_ms=None) -> MomentVector:
    """Two-pass moment computation over a finite sample (n >= 4)."""
    x = as_series(values)
    if x.size < MIN_WINDOW_SAMPLES:
        raise InsufficientDataError(f"need at least {MIN_WINDOW_SAMPLES} values, got {x.size}")
    if np.all(x == x[0]):
        return _from_central(x.size, x[0], 0.0, 0.0, 0.0, start_ms, end_ms, True)
    mean = x.mean()
    d = x - mean
    # second pass removes the residual rounding in the first mean
    mean += d.mean()
    d = x - mean
    d2 = d * d
    m2 = d2.mean()
    m3 = (d2 * d).mean()
    m4 = (d2 * d2).mean()
    return _from_central(x.size, mean, m2, m3, m4, start_ms, end_ms, False)


def window_moments(window: Window) -> MomentVector:
    return batch_moments(window.values, window.start_ms, window.end_ms)


class MomentAccumulator:
    """Single-pass central-moment accumulator with exact pairwise merge.

    Updates follow the incremental central-moment recurrences (Welford's
    scheme extended to third and fourth order), so large offsets do not
    cancel catastrophically. Two accumulators over disjoint data merge into
    the accumulator of their union.

    >>> acc = MomentAccumulator()
    >>> for v in [0, 0, 1, 1]:
    ...     _ = acc.push(v)
    >>> acc.finalize().excess_kurtosis
    -2.0
    """

    __slots__ = ("n", "mean", "m2", "m3", "m4")

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0
        self.m3 = 0.0
        self.m4 = 0.0

    def push(self, x: float) -> "MomentAccumulator":
        x = float(x)
        if not math.isfinite(x):
            raise DomainError(f"non-finite value {x!r}")
        n1 = self.n
        self.n = n = n1 + 1
        delta = x - self.mean
        delta_n = delta / n
        delta_n2 = delta_n * delta_n
        term1 = delta * delta_n * n1
        self.mean += delta_n
        self.m4 += (term1 * delta_n2 * (n * n - 3 * n + 3)
                    + 6.0 * delta_n2 * self.m2 - 4.0 * delta_n * self.m3)
        self.m3 += term1 * delta_n * (n - 2) - 3.0 * delta_n * self.m2
        self.m2 += term1
        return self

    def extend(self, values) -> "MomentAccumulator":
        for v in values:
            self.push(v)
        return self

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        """Return a new accumulator equivalent to one fed both inputs."""
        out = MomentAccumulator()
        na, nb = self.n, other.n
        if na == 0 or nb == 0:
            src = other if na == 0 else self
            out.n, out.mean, out.m2, out.m3, out.m4 = src.n, src.mean, src.m2, src.m3, src.m4
            return out
        n = na + nb
        delta = other.mean - self.mean
        d2 = delta * delta
        out.n = n
        out.mean = self.mean + delta * nb / n
        out.m2 = self.m2 + other.m2 + d2 * na * nb / n
        out.m3 = (self.m3 + other.m3
                  + d2 * delta * na * nb * (na - nb) / (n * n)
                  + 3.0 * delta * (na * other.m2 - nb * self.m2) / n)
        out.m4 = (self.m4 + other.m4
                  + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n ** 3)
                  + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
                  + 4.0 * delta * (na * other.m3 - nb * self.m3) / n)
        return out

    def finalize(self, start_ms=None, end_ms=None) -> MomentVector:
        if self.n < MIN_WINDOW_SAMPLES:
            raise InsufficientDataError(
                f"need at least {MIN_WINDOW_SAMPLES} values, got {self.n}")
        n = self.n
        return _from_central(n, self.mean, self.m2 / n, self.m3 / n, self.m4 / n,
                             start_ms, end_ms, self.m2 == 0.0)


def streaming_moments(state: Optional[MomentAccumulator], value: float) -> MomentAccumulator:
    """Functional form of :meth:`MomentAccumulator.push`."""
    if state is None:
        state = MomentAccumulator()
    return state.push(value)


# --- bootstrap -----------------------------------------------------------

@dataclass(frozen=True)
class MomentCI:
    point: MomentVector
    mean: tuple
    std: tuple
    skewness: Optional[tuple]
    excess_kurtosis: Optional[tuple]
    confidence: float
    n_resamples: int

    def as_dict(self) -> dict:
        return {
            "confidence": self.confidence,
            "n_resamples": self.n_resamples,
            **{name: (list(getattr(self, name)) if getattr(self, name) is not None else None)
               for name in MOMENT_NAMES},
        }


def _rowwise_moments(samples):
    """Population moments of each row; shape moments NaN for constant rows."""
    constant = np.all(samples == samples[:, :1], axis=1)
    mean = samples.mean(axis=1)
    mean[constant] = samples[constant, 0]
    d = samples - mean[:, None]
    d2 = d * d
    m2 = d2.mean(axis=1)
    m2[constant] = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        skew = (d2 * d).mean(axis=1) / m2**1.5
        ekurt = (d2 * d2).mean(axis=1) / (m2 * m2) - 3.0
    skew[constant] = np.nan
    ekurt[constant] = np.nan
    return np.column_stack([mean, np.sqrt(m2), skew, ekurt])


def bootstrap_ci(values, n_resamples=1000, confidence=0.95, seed=None) -> MomentCI:
    """Percentile bootstrap intervals for the four moments.

    Resamples with replacement ``n_resamples`` times from a generator seeded
    with ``seed``. Resamples of zero variance do not contribute to the
    shape-moment intervals. Each interval is widened, if needed, so it
    contains the point estimate.
    """
    x = as_series(values)
    point = batch_moments(x)
    if n_resamples < 100:
        raise DomainError(f"n_resamples must be at least 100, got {n_resamples}")
    confidence = check_open_unit("confidence", confidence)
    rng = np.random.default_rng(seed)
    n = x.size
    chunk = max(1, 4_000_000 // n)
    stats = []
    for lo in range(0, n_resamples, chunk):
        rows = min(chunk, n_resamples - lo)
        idx = rng.integers(0, n, size=(rows, n))
        stats.append(_rowwise_moments(x[idx]))
    stats = np.vstack(stats)
    q = [(1.0 - confidence) / 2.0, (1.0 + confidence) / 2.0]

    def interval(col, estimate):
        vals = stats[:, col]
        vals = vals[np.isfinite(vals)]
        if estimate is None or vals.size == 0:
            return None
        lo, hi = np.quantile(vals, q)
        return (float(min(lo, estimate)), float(max(hi, estimate)))

    return MomentCI(
        point=point,
        mean=interval(0, point.mean),
        std=interval(1, point.std),
        skewness=interval(2, point.skewness),
        excess_kurtosis=interval(3, point.excess_kurtosis),
        confidence=confidence,
        n_resamples=int(n_resamples),
    )


# --- spectra -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Spectrum:
    freq_hz: np.ndarray
    power: np.ndarray
    sample_rate_hz: float

    def peak_hz(self) -> float:
        return float(self.freq_hz[np.argmax(self.power)])


def periodogram(values, sample_rate_hz) -> Spectrum:
    """One-sided periodogram of a uniformly sampled, mean-removed signal.

    ``power[k] = c_k * |X_k / n|**2`` with ``c_k = 2`` for bins strictly
    between DC and Nyquist and 1 otherwise, so ``power.sum()`` equals the
    population variance of the input.
    """
    x = as_series(values)
    check_positive("sample_rate_hz", sample_rate_hz)
    n = x.size
    if n < 8:
        raise InsufficientDataError(f"periodogram needs at least 8 samples, got {n}")
    x = x - x.mean()
    coeffs = np.fft.rfft(x) / n
    power = np.abs(coeffs) ** 2
    if n % 2 == 0:
        power[1:-1] *= 2.0
    else:
        power[1:] *= 2.0
    freq = np.fft.rfftfreq(n, d=1.0 / sample_rate_hz)
    return Spectrum(freq, power, float(sample_rate_hz))


def spectrogram(t, values, sample_rate_hz, width_ms=DEFAULT_WIDTH_MS,
                stride_ms=DEFAULT_STRIDE_MS) -> list:
    """Periodogram of every sliding window, as ``(window, spectrum)`` pairs."""
    result = sliding_windows(t, values, width_ms, stride_ms, min_samples=8)
    return [(w, periodogram(w.values, sample_rate_hz)) for w in result.windows]


# --- estimator -----------------------------------------------------------

class WindowedMoments(TransformerMixin, BaseEstimator):
    """Turn a timestamped scalar series into one moment row per window.

    ``X`` has two columns, ``t_ms`` and the scalar value. ``transform``
    returns an array with columns ``mean, std, skewness, excess_kurtosis``
    for every window whose shape moments are defined, so it slots in front
    of :class:`~biomoments.analysis.ZScoreScaler` in a pipeline.

    Parameters
    ----------
    width_ms, stride_ms : float
        Window width and hop in milliseconds.
    min_samples : int
        Windows with fewer samples are skipped.
    """

    def __init__(self, width_ms=DEFAULT_WIDTH_MS, stride_ms=DEFAULT_STRIDE_MS,
                 min_samples=MIN_WINDOW_SAMPLES):
        self.width_ms = width_ms
        self.stride_ms = stride_ms
        self.min_samples = min_samples

    def fit(self, X, y=None):
        self._split(X)
        self.n_features_in_ = 2
        return self

    def _split(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != 2:
            raise DomainError(f"expected an (n, 2) array of [t_ms, value], got {X.shape}")
        return X[:, 0], X[:, 1]

    def moment_vectors(self, X) -> list:
        t, v = self._split(X)
        result = sliding_windows(t, v, self.width_ms, self.stride_ms,
                                 min_samples=max(self.min_samples, MIN_WINDOW_SAMPLES))
        return [window_moments(w) for w in result.windows]

    def transform(self, X):
        rows = [[mv.mean, mv.std, mv.skewness, mv.excess_kurtosis]
                for mv in self.moment_vectors(X) if mv.shape_defined]
        return np.asarray(rows, dtype=float).reshape(len(rows), 4)

    def get_feature_names_out(self, input_features=None):
        return np.asarray(MOMENT_NAMES, dtype=object)
