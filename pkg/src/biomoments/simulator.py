"""Deterministic synthetic multimodal sessions with controlled distribution shapes.

Every stream is drawn from a *standardised skew-gamma* family indexed by
its skewness ``c``: a gamma law with shape ``4 / c**2`` shifted and scaled
to zero mean and unit variance, so ``skewness = c`` and ``excess kurtosis
= 1.5 * c**2``; ``c = 0`` is the standard normal. Values inside each
one-second block are drawn by stratified inverse-CDF sampling, which makes
the empirical distribution of a window follow the target shape closely
without correlating different channels.

Construction rules (the guarantees the analytics tests lean on):

* accelerometer magnitude: ``rest`` is a narrow normal, ``walk`` and
  ``dumbbell`` are wider normals, ``squat`` is the widest and follows a
  two-component Gaussian mixture (a shifted, wider minority component)
  with skewness near 1 and excess kurtosis near 1.5. Level and spread ramp
  over ten seconds at every activity change.
* ``fatigue_state="loaded"`` replaces the accelerometer shape with a
  skew-gamma law whose skewness follows a slow latent process, so window
  skewness and kurtosis move together; ``"fresh"`` keeps the shape fixed.
* RR intervals: the resting mean grows with fitness; exercise lowers it and
  builds a *strain* level at a rate proportional to workload / fitness.
  Strain skews the RR distribution and decays during rest.
* EEG: a latent arousal process sets the shape (not the mean or variance)
  of attention and relaxation levels in one direction and of eye-blink
  levels in the other.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np
from scipy import special

from .exceptions import DomainError
from .metrics import Phase
from .moments import DEFAULT_STRIDE_MS, DEFAULT_WIDTH_MS
from .signals import EEGSample, Modality, RRInterval, TriaxSample, format_csv

ACTIVITIES = ("rest", "walk", "squat", "dumbbell")
FATIGUE_STATES = ("fresh", "loaded")
DEFAULT_SEED = 42
DEFAULT_RATES = {"accel": 50.0, "rr": 20.0, "eeg": 50.0}

BLOCK_MS = 1000
RAMP_MS = 10_000

# magnitude level and spread (m/s^2) per activity
_ACCEL = {
    "rest": (9.81, 0.30),
    "walk": (10.50, 1.40),
    "squat": (11.20, 2.50),
    "dumbbell": (10.00, 0.60),
}
# squat tails: 20 % of samples from a component shifted by 2 and twice as wide
SQUAT_MIXTURE = (0.2, 2.0, 2.0)
STRATUM_JITTER = 0.5
_WALK_REFERENCE_MS = 6.75
_DUMBBELL_REFERENCE_KG = 3.0

RR_CV = 0.05
RR_DROP = 0.15
RR_TAU_S = 20.0
STRAIN_RATE = 0.002
STRAIN_RECOVERY_S = 15.0
STRAIN_SKEW = 2.0

FATIGUE_SKEW_RANGE = (0.1, 1.9)
LATENT_TAU_S = 15.0
EEG_SKEW_MAX = 1.8
EEG_LEVELS = {"att": (50.0, 8.0), "rel": (50.0, 8.0), "eye": (30.0, 6.0)}


@dataclass(frozen=True)
class PhaseSpec:
    label: str
    duration_ms: int
    activity: str
    workload: float = 0.0

    def __post_init__(self):
        if self.duration_ms <= 0:
            raise DomainError(f"phase {self.label!r}: duration must be positive")
        if self.activity not in ACTIVITIES:
            raise DomainError(f"phase {self.label!r}: unknown activity {self.activity!r}")
        if not math.isfinite(self.workload) or self.workload < 0:
            raise DomainError(f"phase {self.label!r}: workload must be >= 0")


@dataclass(frozen=True)
class SessionProfile:
    """Simulator configuration.

    ``workload`` is walking speed in m/s for ``walk``, dumbbell mass in kg
    for ``dumbbell`` and a relative intensity (1 = body weight) for
    ``squat``. ``fitness`` lies in (0, 1], 1 meaning well trained.
    """

    phases: tuple
    fitness: float = 0.6
    fatigue_state: str = "fresh"
    seed: int = DEFAULT_SEED
    rates: dict = field(default_factory=lambda: dict(DEFAULT_RATES))
    name: str = "custom"

    def __post_init__(self):
        phases = tuple(p if isinstance(p, PhaseSpec) else PhaseSpec(**p) for p in self.phases)
        object.__setattr__(self, "phases", phases)
        if not phases:
            raise DomainError("a profile needs at least one phase")
        if not 0.0 < self.fitness <= 1.0:
            raise DomainError(f"fitness must lie in (0, 1], got {self.fitness!r}")
        if self.fatigue_state not in FATIGUE_STATES:
            raise DomainError(f"fatigue_state must be one of {FATIGUE_STATES}")
        rates = dict(DEFAULT_RATES, **self.rates)
        for name, rate in rates.items():
            if not 0.0 < rate <= 1000.0:
                raise DomainError(f"{name} rate must lie in (0, 1000] Hz, got {rate!r}")
        object.__setattr__(self, "rates", rates)

    @property
    def duration_ms(self) -> int:
        return sum(p.duration_ms for p in self.phases)

    def boundaries(self) -> list:
        """Phase intervals as :class:`~biomoments.metrics.Phase` tuples."""
        out, start = [], 0
        for p in self.phases:
            out.append(Phase(p.label, start, start + p.duration_ms))
            start += p.duration_ms
        return out

    def with_seed(self, seed) -> "SessionProfile":
        return SessionProfile(self.phases, self.fitness, self.fatigue_state, int(seed),
                              dict(self.rates), self.name)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "phases": [asdict(p) for p in self.phases],
            "fitness": self.fitness,
            "fatigue_state": self.fatigue_state,
            "seed": self.seed,
            "rates": dict(self.rates),
        }

    @classmethod
    def from_dict(cls, data) -> "SessionProfile":
        try:
            return cls(
                phases=tuple(PhaseSpec(**p) for p in data["phases"]),
                fitness=float(data.get("fitness", 0.6)),
                fatigue_state=data.get("fatigue_state", "fresh"),
                seed=int(data.get("seed", DEFAULT_SEED)),
                rates=dict(data.get("rates", {})),
                name=data.get("name", "custom"),
            )
        except (KeyError, TypeError) as exc:
            raise DomainError(f"invalid profile: {exc}") from None

    @classmethod
    def from_json(cls, path) -> "SessionProfile":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _rest_work_rest(name, activity, workload, fitness, load_s, fatigue="fresh"):
    return SessionProfile(
        phases=(PhaseSpec("rest-pre", 60_000, "rest"),
                PhaseSpec(activity, load_s * 1000, activity, workload),
                PhaseSpec("rest-post", 60_000, "rest")),
        fitness=fitness, fatigue_state=fatigue, name=name,
    )


def reference_profiles() -> dict:
    """Named catalogue of sessions modelled on the published experiments."""
    profiles = [
        _rest_work_rest("walk-very-low", "walk", 3.64, 0.9, 300),
        _rest_work_rest("walk-comfort", "walk", 5.20, 0.9, 300),
        _rest_work_rest("walk-high", "walk", 6.20, 0.9, 300),
        _rest_work_rest("walk-max", "walk", 6.75, 0.9, 300),
        _rest_work_rest("squat-trained", "squat", 1.0, 0.9, 240),
        _rest_work_rest("squat-untrained", "squat", 1.0, 0.3, 240),
        _rest_work_rest("dumbbell-0.5kg", "dumbbell", 0.5, 0.9, 240),
        _rest_work_rest("dumbbell-1kg", "dumbbell", 1.0, 0.9, 240),
        _rest_work_rest("dumbbell-3kg", "dumbbell", 3.0, 0.9, 240),
        SessionProfile((PhaseSpec("day", 600_000, "walk", 1.4),), fitness=0.6,
                       fatigue_state="fresh", name="fatigue-fresh"),
        SessionProfile((PhaseSpec("day", 600_000, "walk", 1.4),), fitness=0.6,
                       fatigue_state="loaded", name="fatigue-loaded"),
        SessionProfile((PhaseSpec("rest", 120_000, "rest"),
                        PhaseSpec("walk", 120_000, "walk", 5.2),
                        PhaseSpec("squat", 120_000, "squat", 1.0)),
                       fitness=0.6, name="activity-mixed"),
    ]
    return {p.name: p for p in profiles}


# --- sampling primitives -------------------------------------------------

def skew_gamma_ppf(u, skew):
    """Quantile function of the standardised skew-gamma family."""
    u = np.asarray(u, dtype=float)
    skew = np.broadcast_to(np.asarray(skew, dtype=float), u.shape)
    out = special.ndtri(u)
    mask = skew > 1e-3
    if np.any(mask):
        k = 4.0 / skew[mask] ** 2
        out[mask] = (special.gammaincinv(k, u[mask]) - k) / np.sqrt(k)
    return out


def mixture_ppf(u, weight, loc, scale):
    """Quantiles of ``(1 - weight) N(0, 1) + weight N(loc, scale²)``, standardised."""
    y = np.linspace(-12.0, abs(loc) + 12.0 * scale, 20001)
    cdf = (1.0 - weight) * special.ndtr(y) + weight * special.ndtr((y - loc) / scale)
    mean = weight * loc
    var = (1.0 - weight) + weight * (scale * scale + loc * loc) - mean * mean
    return (np.interp(u, cdf, y) - mean) / math.sqrt(var)


def stratified_uniforms(rng, t_ms, block_ms=BLOCK_MS, jitter=STRATUM_JITTER):
    """One uniform per sample; each time block holds one value per equal stratum.

    Values sit at stratum centres displaced by at most ``jitter / 2`` of a
    stratum width, and their order inside the block is a random permutation.
    """
    u = np.empty(t_ms.size)
    blocks = np.floor_divide(t_ms, block_ms).astype(np.int64)
    cuts = np.flatnonzero(np.diff(blocks)) + 1
    for idx in np.split(np.arange(t_ms.size), cuts):
        m = idx.size
        u[idx] = (rng.permutation(m) + 0.5 + jitter * (rng.random(m) - 0.5)) / m
    return u


def ou_process(rng, t_ms, tau_s):
    """Unit-variance Ornstein-Uhlenbeck path sampled at ``t_ms``."""
    x = np.empty(t_ms.size)
    if t_ms.size == 0:
        return x
    noise = rng.standard_normal(t_ms.size)
    x[0] = noise[0]
    decay = np.exp(-np.diff(t_ms) / 1000.0 / tau_s)
    scale = np.sqrt(1.0 - decay * decay)
    for i in range(1, t_ms.size):
        x[i] = decay[i - 1] * x[i - 1] + scale[i - 1] * noise[i]
    return x


def sample_times(profile: SessionProfile, rate_hz: float) -> np.ndarray:
    """Integer-ms timestamps; each phase starts exactly on its boundary."""
    period = 1000.0 / rate_hz
    parts = []
    for phase in profile.boundaries():
        dur = phase.end_ms - phase.start_ms
        count = int(math.ceil(dur / period - 1e-9))
        t = phase.start_ms + np.round(np.arange(count) * period)
        parts.append(t[t < phase.end_ms])
    return np.concatenate(parts).astype(np.int64)


def _normalized_workload(phase: PhaseSpec) -> float:
    if phase.activity == "walk":
        return phase.workload / _WALK_REFERENCE_MS
    if phase.activity == "dumbbell":
        return phase.workload / _DUMBBELL_REFERENCE_KG
    if phase.activity == "squat":
        return phase.workload
    return 0.0


def _phase_index(profile, t_ms):
    ends = np.cumsum([p.duration_ms for p in profile.phases])
    return np.searchsorted(ends, t_ms, side="right")


def _ramped(profile, t_ms, values):
    """Per-sample parameter that moves linearly to each phase's value over RAMP_MS."""
    starts = np.concatenate([[0], np.cumsum([p.duration_ms for p in profile.phases])[:-1]])
    idx = _phase_index(profile, t_ms)
    target = np.asarray(values, dtype=float)[idx]
    prev = np.asarray(values, dtype=float)[np.maximum(idx - 1, 0)]
    frac = np.clip((t_ms - starts[idx]) / RAMP_MS, 0.0, 1.0)
    return prev + (target - prev) * frac


def _integrate_rr_state(profile, t_ms):
    """Mean-RR drop fraction and strain on the RR time grid (1st-order kinetics)."""
    idx = _phase_index(profile, t_ms)
    fit = profile.fitness
    drop = np.zeros(t_ms.size)
    strain = np.zeros(t_ms.size)
    d = s = 0.0
    prev_t = t_ms[0] if t_ms.size else 0
    for i, (t, k) in enumerate(zip(t_ms, idx)):
        dt = (t - prev_t) / 1000.0
        prev_t = t
        phase = profile.phases[k]
        w = _normalized_workload(phase)
        target = RR_DROP * min(w, 1.5) / (0.5 + 0.5 * fit)
        d = target + (d - target) * math.exp(-dt / RR_TAU_S)
        if w > 0:
            rate = STRAIN_RATE * w / fit
            s = 1.0 - (1.0 - s) * math.exp(-rate * dt)
        else:
            s = s * math.exp(-dt / STRAIN_RECOVERY_S)
        drop[i], strain[i] = d, s
    return drop, strain


class WindowLabel(NamedTuple):
    window_start_ms: int
    phase: str
    activity: str
    latent: float


@dataclass(frozen=True, eq=False)
class SyntheticSession:
    """Generated streams (as arrays) plus per-window ground truth."""

    profile: SessionProfile
    accel_t: np.ndarray
    accel_xyz: np.ndarray
    rr_t: np.ndarray
    rr_ms: np.ndarray
    eeg_t: np.ndarray
    eeg_levels: np.ndarray
    arousal_t: np.ndarray
    arousal: np.ndarray
    labels: tuple

    def accel_magnitude(self) -> np.ndarray:
        return np.sqrt(np.sum(self.accel_xyz**2, axis=1))

    def triax(self) -> list:
        return [TriaxSample(int(t), *map(float, v)) for t, v in zip(self.accel_t, self.accel_xyz)]

    def rr(self) -> list:
        return [RRInterval(int(t), float(v)) for t, v in zip(self.rr_t, self.rr_ms)]

    def eeg(self) -> list:
        return [EEGSample(int(t), *map(float, v)) for t, v in zip(self.eeg_t, self.eeg_levels)]

    def phase_at(self, t_ms: float) -> PhaseSpec:
        idx = min(int(_phase_index(self.profile, np.array([t_ms]))[0]), len(self.profile.phases) - 1)
        return self.profile.phases[idx]

    def window_labels(self, width_ms=DEFAULT_WIDTH_MS, stride_ms=DEFAULT_STRIDE_MS) -> list:
        """Label each window with the phase, activity and arousal at its centre."""
        out = []
        start = 0
        while start + width_ms <= self.profile.duration_ms:
            centre = start + width_ms / 2.0
            phase = self.phase_at(centre)
            latent = float(np.interp(centre, self.arousal_t, self.arousal))
            out.append(WindowLabel(int(start), phase.label, phase.activity, latent))
            start += stride_ms
        return out

    def csv_texts(self) -> dict:
        """File name to CSV text for the three streams and the truth sidecar."""
        truth = ["window_start_ms,phase,activity,latent"]
        truth += [f"{w.window_start_ms},{w.phase},{w.activity},{w.latent:.6f}" for w in self.labels]
        return {
            "accel.csv": format_csv(self.triax(), Modality.ACCEL),
            "rr.csv": format_csv(self.rr(), Modality.RR),
            "eeg.csv": format_csv(self.eeg(), Modality.EEG),
            "truth.csv": "\n".join(truth) + "\n",
        }

    def write(self, outdir) -> list:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, text in self.csv_texts().items():
            path = outdir / name
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            paths.append(path)
        return paths


def generate_session(profile: SessionProfile) -> SyntheticSession:
    """Generate all three streams for ``profile``; a pure function of the profile."""
    seeds = np.random.SeedSequence(profile.seed).spawn(6)
    rng_accel, rng_fatigue, rng_orient, rng_rr, rng_arousal, rng_eeg = (
        np.random.default_rng(s) for s in seeds)
    rates = profile.rates

    # accelerometer
    t_a = sample_times(profile, rates["accel"])
    params = np.array([_ACCEL[p.activity] for p in profile.phases], dtype=float)
    spreads = params[:, 1].copy()
    for i, p in enumerate(profile.phases):
        if p.activity == "dumbbell":
            spreads[i] += 0.2 * p.workload
    level = _ramped(profile, t_a, params[:, 0])
    # spread ramps geometrically so transition windows stay close to normal
    spread = np.exp(_ramped(profile, t_a, np.log(spreads)))
    u = stratified_uniforms(rng_accel, t_a)
    if profile.fatigue_state == "loaded":
        lo, hi = FATIGUE_SKEW_RANGE
        latent = ou_process(rng_fatigue, t_a.astype(float), LATENT_TAU_S)
        shape = skew_gamma_ppf(u, lo + (hi - lo) * special.ndtr(1.5 * latent))
    else:
        squat = _ramped(profile, t_a, [p.activity == "squat" for p in profile.phases])
        shape = (1.0 - squat) * special.ndtri(u) + squat * mixture_ppf(u, *SQUAT_MIXTURE)
    mag = level + spread * shape
    tilt = rng_orient.normal(scale=0.15, size=(len(profile.phases), 2))
    axis = np.column_stack([tilt, np.ones(len(profile.phases))])
    axis /= np.linalg.norm(axis, axis=1, keepdims=True)
    xyz = mag[:, None] * axis[_phase_index(profile, t_a)]

    # heartbeat intervals
    t_r = sample_times(profile, rates["rr"])
    drop, strain = _integrate_rr_state(profile, t_r)
    base = 1000.0 * (0.7 + 0.4 * profile.fitness)
    mean_rr = base * (1.0 - drop)
    rr = mean_rr * (1.0 + RR_CV * skew_gamma_ppf(stratified_uniforms(rng_rr, t_r),
                                                 STRAIN_SKEW * strain))

    # EEG levels
    t_e = sample_times(profile, rates["eeg"])
    arousal = ou_process(rng_arousal, t_e.astype(float), LATENT_TAU_S)
    up = EEG_SKEW_MAX * special.ndtr(1.5 * arousal)
    down = EEG_SKEW_MAX * special.ndtr(-1.5 * arousal)
    columns = []
    for name, shape in (("att", up), ("rel", up), ("eye", down)):
        mu, sd = EEG_LEVELS[name]
        x = mu + sd * skew_gamma_ppf(stratified_uniforms(rng_eeg, t_e), shape)
        columns.append(np.clip(x, 0.0, 100.0))
    levels = np.column_stack(columns)

    session = SyntheticSession(profile, t_a, xyz, t_r, rr, t_e, levels,
                               t_e.astype(float), arousal, ())
    object.__setattr__(session, "labels", tuple(session.window_labels()))
    return session


def write_session(profile: SessionProfile, outdir) -> list:
    return generate_session(profile).write(outdir)
