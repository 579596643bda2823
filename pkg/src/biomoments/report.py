"""Analysis run configuration, report assembly and plot-table rendering.

A run turns parsed streams into one JSON-serialisable report plus a few
plain CSV tables that any plotting tool can read. Everything here is a
pure function of the configuration and the input bytes, so two runs with
equal inputs produce byte-identical files.
"""
from __future__ import annotations

import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from . import __version__
from ._validation import check_open_unit
from .analysis import (
    FeatureMatrix,
    cluster_purity,
    fatigue_correlation,
    kmeans,
    pearson_matrix,
    zscore,
)
from .exceptions import (
    BiomomentsError,
    DataFormatError,
    DomainError,
    NoAnalyzableWindowsError,
)
from .metrics import (
    METRIC_NAMES,
    MomentTrajectory,
    Phase,
    metric_series,
    phase_label_at,
    phase_slopes,
    trajectory_speed,
)
from .moments import MIN_WINDOW_SAMPLES, bootstrap_ci, sliding_windows, window_moments
from .signals import G_STANDARD, Modality, parse_csv, to_arrays

SCHEMA_VERSION = "1.0.0"
TOOL_NAME = "biomoments"
TRUTH_HEADER = ("window_start_ms", "phase", "activity", "latent")
EEG_CHANNELS = ("att", "rel", "eye")


@dataclass(frozen=True)
class RunConfig:
    """Knobs of one ``analyze`` run; validated on construction."""

    window_ms: int = 5000
    stride_ms: int = 1000
    k: int = 3
    threshold: float = 0.8
    metric_binding: str = "normal"
    seed: int = 0
    accel_unit: str = "ms2"
    bootstrap_resamples: int = 200
    settle_ms: int = 10000

    def __post_init__(self):
        if isinstance(self.settle_ms, bool) or not isinstance(self.settle_ms, int) or self.settle_ms < 0:
            raise DomainError(f"settle_ms must be a non-negative integer, got {self.settle_ms!r}")
        for name in ("window_ms", "stride_ms"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
                raise DomainError(f"{name} must be a positive integer, got {value!r}")
        if isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < 1:
            raise DomainError(f"k must be an integer >= 1, got {self.k!r}")
        check_open_unit("threshold", self.threshold)
        if self.metric_binding not in ("normal", "uniform"):
            raise DomainError(f"metric_binding must be 'normal' or 'uniform', got {self.metric_binding!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise DomainError(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.accel_unit not in ("ms2", "g"):
            raise DomainError(f"accel_unit must be 'ms2' or 'g', got {self.accel_unit!r}")
        b = self.bootstrap_resamples
        if isinstance(b, bool) or not isinstance(b, int) or (b != 0 and b < 100):
            raise DomainError(f"bootstrap_resamples must be 0 (off) or >= 100, got {b!r}")

    @classmethod
    def field_names(cls) -> tuple:
        return tuple(f.name for f in fields(cls))

    def as_dict(self) -> dict:
        return asdict(self)


# --- inputs --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class InputFile:
    """Raw bytes of one input plus the name it is reported under."""

    name: str
    data: bytes

    @classmethod
    def read(cls, path) -> "InputFile":
        path = Path(path)
        return cls(path.name, path.read_bytes())

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.data).hexdigest()

    def lines(self) -> list:
        try:
            return self.data.decode("utf-8").splitlines()
        except UnicodeDecodeError as exc:
            raise DataFormatError(f"{self.name}: not UTF-8 text ({exc})") from None


def _with_file(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except BiomomentsError as exc:
        raise _prefixed(exc, name) from None


def _prefixed(exc, name):
    exc.args = (f"{name}: {exc.args[0] if exc.args else exc}",) + tuple(exc.args[1:])
    return exc


def load_streams(files: Mapping[str, InputFile], accel_unit="ms2") -> dict:
    """Parse modality files into named scalar streams ``{name: (t, values)}``.

    The accelerometer contributes its Euclidean magnitude, RR its interval
    series and EEG one stream per channel (``eeg.att`` and so on).
    """
    streams = {}
    if "accel" in files:
        scale = G_STANDARD if accel_unit == "g" else 1.0
        samples = _with_file(files["accel"].name, parse_csv, files["accel"].lines(),
                             Modality.ACCEL, scale=scale)
        t, xyz = to_arrays(samples, Modality.ACCEL)
        streams["accel"] = (t, np.sqrt(np.sum(xyz * xyz, axis=1)))
    if "rr" in files:
        samples = _with_file(files["rr"].name, parse_csv, files["rr"].lines(), Modality.RR)
        t, v = to_arrays(samples, Modality.RR)
        streams["rr"] = (t, v[:, 0])
    if "eeg" in files:
        samples = _with_file(files["eeg"].name, parse_csv, files["eeg"].lines(), Modality.EEG)
        t, v = to_arrays(samples, Modality.EEG)
        for i, ch in enumerate(EEG_CHANNELS):
            streams[f"eeg.{ch}"] = (t, v[:, i])
    return streams


@dataclass(frozen=True)
class TruthRow:
    window_start_ms: int
    phase: str
    activity: str
    latent: float


def parse_truth(lines) -> list:
    """Parse the ground-truth sidecar written by the simulator."""
    it = iter(lines)
    header = tuple(c.strip() for c in next(it, "").strip().split(","))
    if header != TRUTH_HEADER:
        raise DataFormatError(f"truth header {','.join(header)!r} does not match "
                              f"{','.join(TRUTH_HEADER)!r}")
    rows = []
    for lineno, line in enumerate(it, start=2):
        if not line.strip():
            continue
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != 4:
            raise DataFormatError(f"truth line {lineno}: expected 4 fields, got {len(cells)}")
        try:
            rows.append(TruthRow(int(cells[0]), cells[1], cells[2], float(cells[3])))
        except ValueError:
            raise DataFormatError(f"truth line {lineno}: malformed row {line.strip()!r}") from None
        if len(rows) > 1 and rows[-1].window_start_ms <= rows[-2].window_start_ms:
            raise DataFormatError(f"truth line {lineno}: window starts must increase")
    if not rows:
        raise DataFormatError("truth file has no rows")
    return rows


def phases_from_truth(rows, width_ms) -> list:
    """Recover phase intervals from per-window truth labels.

    Each label describes the window centre; a boundary is placed halfway
    between the centres of the last window of one phase and the first of
    the next. Returns ``(phase, activity)`` pairs.
    """
    half = width_ms / 2.0
    out = []
    start = float(rows[0].window_start_ms)
    for prev, cur in zip(rows, rows[1:]):
        if cur.phase != prev.phase:
            boundary = (prev.window_start_ms + cur.window_start_ms) / 2.0 + half
            out.append((Phase(prev.phase, start, boundary), prev.activity))
            start = boundary
    last = rows[-1]
    out.append((Phase(last.phase, start, float(last.window_start_ms + width_ms)), last.activity))
    return out


def parse_phases(text) -> list:
    """Parse ``label:start_ms:end_ms`` items separated by commas."""
    phases = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        parts = item.split(":")
        if len(parts) != 3:
            raise DomainError(f"phase {item!r} is not label:start_ms:end_ms")
        try:
            start, end = float(parts[1]), float(parts[2])
        except ValueError:
            raise DomainError(f"phase {item!r} has non-numeric bounds") from None
        if not end > start:
            raise DomainError(f"phase {item!r} must end after it starts")
        phases.append(Phase(parts[0], start, end))
    if not phases:
        raise DomainError("no phases given")
    return phases


# --- analysis ------------------------------------------------------------

def _num(x):
    """JSON-safe float: finite floats unchanged, anything else ``None``."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _analyze_stream(name, t, values, config, phases, notes):
    res = sliding_windows(t, values, config.window_ms, config.stride_ms)
    moments = [window_moments(w) for w in res.windows]
    traj = MomentTrajectory.from_moments(moments, modality=name.split(".")[0])
    entry = {
        "n_samples": int(t.size),
        "n_windows": len(moments),
        "skipped_windows": res.skipped,
        "undefined_shape_windows": len(moments) - len(traj),
        "moments": [m.as_dict() for m in moments],
        "metrics": {},
        "phase_slopes": None,
        "trajectory": None,
        "bootstrap": None,
    }
    series = {}
    for metric in METRIC_NAMES:
        s = metric_series(traj, metric, config.metric_binding, phases)
        series[metric] = s
        reference = config.metric_binding if metric == "METRIC" else (
            "uniform" if config.metric_binding == "normal" else "normal")
        entry["metrics"][metric] = {
            "reference": reference,
            "t_ms": s.t_ms.tolist(),
            "values": s.values.tolist(),
        }
    if phases:
        entry["phase_slopes"] = {m: phase_slopes(series[m], phases).as_list() for m in METRIC_NAMES}
    if len(traj) >= 2:
        speed = trajectory_speed(traj)
        entry["trajectory"] = {
            "n_points": len(traj),
            "mean_speed": speed.mean_speed,
            "net_displacement": speed.net_displacement,
        }
    else:
        notes.append(f"{name}: fewer than 2 analyzable windows, no trajectory speed")
    if config.bootstrap_resamples and values.size >= MIN_WINDOW_SAMPLES:
        ci = bootstrap_ci(values, config.bootstrap_resamples, 0.95, seed=config.seed)
        entry["bootstrap"] = ci.as_dict()
    return entry, moments, traj, series


def _clusters(moments, config, phase_activity, notes):
    defined = [m for m in moments if m.shape_defined]
    if len(defined) < max(config.k, 2):
        notes.append(f"clusters: only {len(defined)} accelerometer windows for k={config.k}")
        return None, None, None
    fm = FeatureMatrix.from_moments(defined)
    try:
        result = kmeans(zscore(fm), config.k, seed=config.seed)
    except BiomomentsError as exc:
        notes.append(f"clusters: {exc}")
        return None, None, None
    out = result.as_dict()
    out["window_start_ms"] = [int(m.start_ms) for m in defined]
    truth = None
    if phase_activity:
        phases = [p for p, _ in phase_activity]
        act = {p.label: a for p, a in phase_activity}
        truth = [act.get(phase_label_at(phases, (m.start_ms + m.end_ms) / 2.0)) for m in defined]
        known = [i for i, lab in enumerate(truth) if lab is not None]
        out["purity"] = (cluster_purity(result.assignments[known], [truth[i] for i in known])
                         if known else None)
    else:
        out["purity"] = None
    return out, defined, (result.assignments, truth)


def settled_trajectory(traj: MomentTrajectory, phases, settle_ms) -> MomentTrajectory:
    """Drop windows reaching within ``settle_ms`` of an internal phase boundary.

    Windows that straddle an activity change mix two distributions, which
    couples skewness and kurtosis mechanically; the fatigue correlation is
    meant for steady activity and is computed on the remaining windows.
    """
    if not phases:
        return traj
    bounds = sorted({p.start_ms for p in phases[1:]} | {p.end_ms for p in phases[:-1]})
    keep = [m for m in traj.points
            if not any(m.start_ms - settle_ms < b < m.end_ms + settle_ms for b in bounds)]
    return MomentTrajectory(tuple(keep), traj.modality)


def _aligned_metric(series_by_channel, metric):
    """Metric values of the EEG channels at their common window centres."""
    common = None
    for s in series_by_channel.values():
        keys = set(s[metric].t_ms.tolist())
        common = keys if common is None else common & keys
    common = sorted(common or ())
    out = {}
    for ch, s in series_by_channel.items():
        lookup = dict(zip(s[metric].t_ms.tolist(), s[metric].values.tolist()))
        out[ch] = [lookup[t] for t in common]
    return out


def _correlations(streams, eeg_series, notes):
    out = {}
    names = [f"eeg.{c}" for c in EEG_CHANNELS]
    if not all(n in streams for n in names):
        return out
    try:
        out["eeg_raw"] = pearson_matrix([(n, streams[n][1]) for n in names]).as_dict()
    except BiomomentsError as exc:
        notes.append(f"eeg_raw correlation: {exc}")
    for metric in METRIC_NAMES:
        try:
            aligned = _aligned_metric(eeg_series, metric)
            out[f"eeg_{metric}"] = pearson_matrix(aligned.items()).as_dict()
        except BiomomentsError as exc:
            notes.append(f"eeg_{metric} correlation: {exc}")
    return out


@dataclass(frozen=True, eq=False)
class AnalysisRun:
    """A finished run: the report dict plus the row data behind the plot tables."""

    report: dict
    tables: dict

    def report_json(self) -> str:
        return json.dumps(self.report, indent=2, allow_nan=False) + "\n"


def analyze(files: Mapping[str, InputFile], config: RunConfig = RunConfig(),
            truth: Optional[InputFile] = None, phases=None) -> AnalysisRun:
    """Run the full pipeline on modality files keyed ``accel``/``rr``/``eeg``.

    ``phases`` (a list of :class:`Phase`) wins over phases derived from the
    ``truth`` sidecar. Raises :class:`NoAnalyzableWindowsError` when no
    stream yields a single window with defined shape moments.
    """
    if not files:
        raise DomainError("at least one modality input is required")
    streams = load_streams(files, config.accel_unit)
    truth_rows = parse_truth(truth.lines()) if truth is not None else None
    phase_activity = phases_from_truth(truth_rows, config.window_ms) if truth_rows else None
    if phases is None and phase_activity is not None:
        phases = [p for p, _ in phase_activity]

    notes = []
    stream_entries, per_stream = {}, {}
    for name, (t, values) in streams.items():
        if t.size == 0:
            raise NoAnalyzableWindowsError(f"{name}: no samples")
        entry, moments, traj, series = _analyze_stream(name, t, values, config, phases, notes)
        stream_entries[name] = entry
        per_stream[name] = (moments, traj, series)
    if all(len(traj) == 0 for _, traj, _ in per_stream.values()):
        raise NoAnalyzableWindowsError(
            "no analyzable windows: every window has fewer than "
            f"{MIN_WINDOW_SAMPLES} samples or undefined shape moments")

    clusters = fatigue = None
    cluster_rows = None
    if "accel" in per_stream:
        moments, traj, _ = per_stream["accel"]
        clusters, defined, labels = _clusters(moments, config, phase_activity, notes)
        if clusters is not None:
            cluster_rows = (defined, *labels)
        steady = settled_trajectory(traj, phases, config.settle_ms)
        try:
            groups = ([phase_label_at(phases, c) or "" for c in steady.center_ms()]
                      if phases else None)
            fatigue = fatigue_correlation(steady, config.threshold, groups=groups).as_dict()
            fatigue["excluded_windows"] = len(traj) - len(steady)
        except BiomomentsError as exc:
            notes.append(f"fatigue: {exc}")
    eeg_series = {n.split(".")[1]: per_stream[n][2] for n in per_stream if n.startswith("eeg.")}
    correlations = _correlations(streams, eeg_series, notes)

    report = {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": TOOL_NAME, "version": __version__},
        "config": config.as_dict(),
        "inputs": {key: {"file": f.name, "sha256": f.sha256} for key, f in files.items()},
        "truth": {"file": truth.name, "sha256": truth.sha256} if truth is not None else None,
        "phases": ([{"label": p.label, "start_ms": p.start_ms, "end_ms": p.end_ms} for p in phases]
                   if phases else None),
        "streams": stream_entries,
        "clusters": clusters,
        "fatigue": fatigue,
        "correlations": correlations,
        "skipped_windows": {n: e["skipped_windows"] for n, e in stream_entries.items()},
        "notes": notes,
    }
    report = _sanitize(report)
    tables = _plot_tables(per_stream, phases, cluster_rows, correlations)
    return AnalysisRun(report, tables)


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return obj


# --- plot tables ---------------------------------------------------------

def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        return ""
    return str(int(x)) if x.is_integer() and abs(x) < 1e15 else repr(x)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(c) if not isinstance(c, str) else c for c in row) + "\n")
    return buf.getvalue()


def _plot_tables(per_stream, phases, cluster_rows, correlations) -> dict:
    diagram, timeline = [], []
    for name, (_, traj, series) in per_stream.items():
        m1, m3 = series["METRIC"].values, series["METRIC3"].values
        for i, p in enumerate(traj.points):
            diagram.append((name, i, p.start_ms, p.end_ms, p.skewness, p.excess_kurtosis, m1[i], m3[i]))
        centres = series["METRIC"].t_ms
        for i, t in enumerate(centres):
            label = phase_label_at(phases, t) if phases else None
            timeline.append((name, t, label or "", m1[i], m3[i]))
    tables = {
        "moments_diagram.csv": _csv(
            ("stream", "window_index", "start_ms", "end_ms", "skewness", "excess_kurtosis",
             "METRIC", "METRIC3"), diagram),
        "metric_timeline.csv": _csv(("stream", "t_ms", "phase", "METRIC", "METRIC3"), timeline),
    }
    if cluster_rows is not None:
        defined, assignments, truth = cluster_rows
        rows = [(m.start_ms, m.mean, m.std, m.skewness, m.excess_kurtosis, int(c),
                 (truth[i] or "") if truth else "")
                for i, (m, c) in enumerate(zip(defined, assignments))]
        tables["clusters.csv"] = _csv(
            ("start_ms", "mean", "std", "skewness", "excess_kurtosis", "cluster", "truth"), rows)
    if correlations:
        rows = []
        for kind, cm in correlations.items():
            labels = cm["labels"]
            for i in range(len(labels)):
                for j in range(i + 1, len(labels)):
                    rows.append((kind, labels[i], labels[j], cm["matrix"][i][j]))
        tables["correlations.csv"] = _csv(("kind", "a", "b", "r"), rows)
    return tables


# --- schema --------------------------------------------------------------

def report_schema() -> dict:
    """The published JSON schema every ``report.json`` validates against."""
    text = resources.files("biomoments").joinpath("report.schema.json").read_text("utf-8")
    return json.loads(text)
