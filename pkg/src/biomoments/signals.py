"""Sensor sample types, CSV ingestion and unit conversions.

Three modalities are supported:

* ``accel`` -- tri-axial acceleration in m/s² (``t_ms,ax,ay,az``)
* ``rr``    -- heartbeat (RR) intervals in milliseconds (``t_ms,rr_ms``)
* ``eeg``   -- consumer-headset attention / relaxation / eye-blink levels
  (``t_ms,att,rel,eye``)

Timestamps are milliseconds since session start. All sample types are
immutable and validate their invariants on construction.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence, TextIO, Union

import numpy as np

from .exceptions import DataFormatError, DomainError, RowError, SequenceError

G_STANDARD = 9.81
RR_PLAUSIBLE_MS = (200.0, 3000.0)


class PlausibilityWarning(UserWarning):
    """A value is valid but physiologically implausible."""


class Modality(str, Enum):
    ACCEL = "accel"
    RR = "rr"
    EEG = "eeg"


def _finite(name, value):
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")


def _timestamp(t):
    _finite("t", t)
    if t < 0:
        raise DomainError(f"t must be non-negative, got {t!r}")


@dataclass(frozen=True)
class TriaxSample:
    t: float
    ax: float
    ay: float
    az: float

    def __post_init__(self):
        _timestamp(self.t)
        for name in ("ax", "ay", "az"):
            _finite(name, getattr(self, name))


@dataclass(frozen=True)
class RRInterval:
    t: float
    rr_ms: float

    def __post_init__(self):
        _timestamp(self.t)
        _finite("rr_ms", self.rr_ms)
        if self.rr_ms <= 0:
            raise DomainError(f"rr_ms must be positive, got {self.rr_ms!r}")
        lo, hi = RR_PLAUSIBLE_MS
        if not lo <= self.rr_ms <= hi:
            warnings.warn(
                f"rr_ms={self.rr_ms} outside plausible range [{lo}, {hi}]",
                PlausibilityWarning,
                stacklevel=3,
            )


@dataclass(frozen=True)
class EEGSample:
    t: float
    att: float
    rel: float
    eye: float

    def __post_init__(self):
        _timestamp(self.t)
        for name in ("att", "rel"):
            value = getattr(self, name)
            _finite(name, value)
            if not 0.0 <= value <= 100.0:
                raise DomainError(f"{name} must lie in [0, 100], got {value!r}")
        _finite("eye", self.eye)
        if self.eye < 0:
            raise DomainError(f"eye must be non-negative, got {self.eye!r}")


Sample = Union[TriaxSample, RRInterval, EEGSample]


@dataclass(frozen=True)
class RhythmBand:
    name: str
    lo_hz: float
    hi_hz: float

    def __post_init__(self):
        if not self.lo_hz < self.hi_hz:
            raise DomainError(f"band {self.name}: lo_hz must be below hi_hz")

    def __contains__(self, freq_hz: float) -> bool:
        # closed interval on both edges
        return self.lo_hz <= freq_hz <= self.hi_hz


RHYTHM_BANDS = (
    RhythmBand("theta", 4.0, 7.0),
    RhythmBand("alpha", 8.0, 13.0),
    RhythmBand("SMR", 13.0, 15.0),
    RhythmBand("beta", 16.0, 31.0),
    RhythmBand("gamma", 25.0, 100.0),
)


def classify_band(freq_hz: float) -> frozenset:
    """Return the names of every rhythm band whose closed range contains ``freq_hz``.

    Bands overlap (beta and gamma share 25-31 Hz, alpha and SMR touch at
    13 Hz), so the result is a set rather than a single label. Frequencies
    between bands or below 4 Hz give an empty set.
    """
    if not math.isfinite(freq_hz) or freq_hz <= 0:
        raise DomainError(f"frequency must be positive, got {freq_hz!r}")
    return frozenset(band.name for band in RHYTHM_BANDS if freq_hz in band)


def hr_to_rr(hr_bpm: float) -> float:
    """Convert a heart rate in beats per minute to an RR interval in ms."""
    if not math.isfinite(hr_bpm) or hr_bpm <= 0:
        raise DomainError(f"heart rate must be positive and finite, got {hr_bpm!r}")
    return 60000.0 / hr_bpm


def rr_to_hr_integer(rr_ms: float) -> int:
    """Integer heart rate as reported by consumer monitors (half away from zero)."""
    if not math.isfinite(rr_ms) or rr_ms <= 0:
        raise DomainError(f"rr_ms must be positive and finite, got {rr_ms!r}")
    return int(math.floor(60000.0 / rr_ms + 0.5))


def magnitude(s: TriaxSample) -> float:
    return math.sqrt(s.ax * s.ax + s.ay * s.ay + s.az * s.az)


# --- CSV -----------------------------------------------------------------

_COLUMNS = {
    Modality.ACCEL: ("t_ms", "ax", "ay", "az"),
    Modality.RR: ("t_ms", "rr_ms"),
    Modality.EEG: ("t_ms", "att", "rel", "eye"),
}
_TYPES = {
    Modality.ACCEL: TriaxSample,
    Modality.RR: RRInterval,
    Modality.EEG: EEGSample,
}
_DECIMALS = {Modality.ACCEL: 6, Modality.RR: 3, Modality.EEG: 1}


def columns(modality) -> tuple:
    return _COLUMNS[Modality(modality)]


def _parse_number(text):
    value = float(text)
    if value.is_integer() and "." not in text and "e" not in text.lower():
        return int(value)
    return value


def parse_csv(lines: Iterable[str], modality, scale: float = 1.0) -> list:
    """Parse CSV text lines into samples of ``modality``.

    ``scale`` multiplies acceleration axes; pass ``G_STANDARD`` for files
    recorded in units of g. Line numbers in errors are 1-based and count
    the header.
    """
    modality = Modality(modality)
    expected = _COLUMNS[modality]
    sample_type = _TYPES[modality]
    it = iter(lines)
    try:
        header = next(it)
    except StopIteration:
        raise DataFormatError("empty input, expected a header line") from None
    found = tuple(c.strip() for c in header.strip().lstrip("﻿").split(","))
    if found != expected:
        raise DataFormatError(
            f"header {','.join(found)!r} does not match {','.join(expected)!r}"
        )

    samples = []
    prev_t = None
    for lineno, line in enumerate(it, start=2):
        line = line.strip()
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != len(expected):
            raise RowError(lineno, f"expected {len(expected)} fields, got {len(cells)}")
        try:
            values = [_parse_number(c.strip()) for c in cells]
        except ValueError:
            raise RowError(lineno, f"non-numeric value in {line!r}") from None
        if modality is Modality.ACCEL and scale != 1.0:
            values[1:] = [v * scale for v in values[1:]]
        try:
            sample = sample_type(*values)
        except DomainError as exc:
            raise RowError(lineno, str(exc)) from None
        if prev_t is not None and sample.t <= prev_t:
            raise SequenceError(lineno, f"timestamp {sample.t} not after {prev_t}")
        prev_t = sample.t
        samples.append(sample)
    return samples


def read_csv(path, modality, scale: float = 1.0) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_csv(fh, modality, scale=scale)


def _format_t(t):
    if float(t).is_integer():
        return str(int(t))
    return f"{t:.3f}"


def format_csv(samples: Sequence[Sample], modality) -> str:
    """Render samples in the canonical fixed-decimal CSV layout."""
    modality = Modality(modality)
    fields = _sample_fields(modality)
    fmt = f"{{:.{_DECIMALS[modality]}f}}"
    out = [",".join(_COLUMNS[modality])]
    for s in samples:
        out.append(",".join([_format_t(s.t)] + [fmt.format(getattr(s, f)) for f in fields]))
    return "\n".join(out) + "\n"


def _sample_fields(modality):
    return {
        Modality.ACCEL: ("ax", "ay", "az"),
        Modality.RR: ("rr_ms",),
        Modality.EEG: ("att", "rel", "eye"),
    }[modality]


def write_csv(samples: Sequence[Sample], modality, fh: TextIO) -> None:
    fh.write(format_csv(samples, modality))


def to_arrays(samples: Sequence[Sample], modality) -> tuple:
    """Return ``(t, values)`` arrays; ``values`` has one column per measured field."""
    modality = Modality(modality)
    fields = _sample_fields(modality)
    t = np.fromiter((s.t for s in samples), dtype=float, count=len(samples))
    values = np.array([[getattr(s, f) for f in fields] for s in samples], dtype=float)
    return t, values.reshape(len(samples), len(fields))


def magnitudes(samples: Sequence[TriaxSample]) -> np.ndarray:
    """Vectorised :func:`magnitude` over an accelerometer stream."""
    _, xyz = to_arrays(samples, Modality.ACCEL)
    return np.sqrt(np.sum(xyz * xyz, axis=1))
