"""Command-line entry point: ``biomoments simulate|analyze|compare|bands``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 claim not supported
(``compare`` only). Every command is deterministic given its flags and
input bytes; seeds are always explicit.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .exceptions import BiomomentsError, DomainError
from .report import InputFile, RunConfig, analyze, parse_phases
from .signals import classify_band
from .simulator import SessionProfile, generate_session, reference_profiles

log = logging.getLogger("biomoments")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CLAIM = 4

OUT_ENV = "BIOMOMENTS_OUT"
MODALITY_FILES = {"accel": "accel.csv", "rr": "rr.csv", "eeg": "eeg.csv"}
TRUTH_FILE = "truth.csv"
CLAIMS = ("fitness-speed", "workload-speed")


class UsageError(Exception):
    """Bad flag combination or configuration; maps to exit code 2."""


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _print_json(obj):
    print(json.dumps(obj, indent=2))


def _resolve_out(flag, config_value, default):
    if flag is not None:
        return Path(flag)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV])
    if config_value is not None:
        return Path(config_value)
    return Path(default)


# --- simulate ------------------------------------------------------------

def cmd_simulate(args) -> int:
    catalog = reference_profiles()
    if args.list:
        for name in catalog:
            print(name)
        return EXIT_OK
    if (args.profile is None) == (args.profile_file is None):
        raise UsageError("give exactly one of --profile or --profile-file")
    if args.profile is not None:
        if args.profile not in catalog:
            print(f"unknown profile {args.profile!r}; available profiles:", file=sys.stderr)
            for name in catalog:
                print(f"  {name}", file=sys.stderr)
            return EXIT_USAGE
        profile = catalog[args.profile]
    else:
        try:
            profile = SessionProfile.from_json(args.profile_file)
        except (OSError, json.JSONDecodeError, TypeError, KeyError) as exc:
            raise UsageError(f"cannot load profile file: {exc}") from None
    if args.seed is not None:
        profile = profile.with_seed(args.seed)
    out = _resolve_out(args.out, None, f"session-{profile.name}-{profile.seed}")
    log.info("simulating %s (seed %d) into %s", profile.name, profile.seed, out)
    paths = generate_session(profile).write(out)
    _print_json({
        "profile": profile.name,
        "seed": profile.seed,
        "out": str(out),
        "files": [{"file": p.name, "sha256": _sha256(p)} for p in paths],
    })
    return EXIT_OK


# --- analyze -------------------------------------------------------------

_CONFIG_FLAGS = {
    "window_ms": "window_ms",
    "stride_ms": "stride_ms",
    "k": "k",
    "threshold": "threshold",
    "metric_binding": "metric_binding",
    "seed": "seed",
    "accel_unit": "accel_unit",
    "bootstrap": "bootstrap_resamples",
    "settle_ms": "settle_ms",
}
_CONFIG_EXTRA = {"out", "accel", "rr", "eeg", "truth", "input_dir", "phases"}


def _load_config_file(path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    unknown = set(data) - set(RunConfig.field_names()) - _CONFIG_EXTRA
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return data


def build_config(args) -> tuple:
    """Merge defaults, config file and flags (flags win) into a RunConfig."""
    file_cfg = _load_config_file(args.config) if args.config else {}
    values = {k: file_cfg[k] for k in RunConfig.field_names() if k in file_cfg}
    for flag, key in _CONFIG_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            values[key] = value
    try:
        config = RunConfig(**values)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    return config, file_cfg


def _input_paths(args, file_cfg) -> tuple:
    input_dir = args.input_dir or file_cfg.get("input_dir")
    paths = {}
    for key, default in MODALITY_FILES.items():
        explicit = getattr(args, key) or file_cfg.get(key)
        if explicit:
            paths[key] = Path(explicit)
        elif input_dir and (Path(input_dir) / default).exists():
            paths[key] = Path(input_dir) / default
    truth = args.truth or file_cfg.get("truth")
    if truth:
        truth = Path(truth)
    elif input_dir and (Path(input_dir) / TRUTH_FILE).exists():
        truth = Path(input_dir) / TRUTH_FILE
    if not paths:
        raise UsageError("no inputs: give --accel/--rr/--eeg or an --input-dir holding them")
    return paths, truth


def cmd_analyze(args) -> int:
    config, file_cfg = build_config(args)
    paths, truth_path = _input_paths(args, file_cfg)
    phases_text = args.phases if args.phases is not None else file_cfg.get("phases")
    try:
        phases = parse_phases(phases_text) if phases_text else None
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    out = _resolve_out(args.out, file_cfg.get("out"), "biomoments-report")
    try:
        files = {k: InputFile.read(p) for k, p in paths.items()}
        truth = InputFile.read(truth_path) if truth_path else None
    except OSError as exc:
        log.error("cannot read input: %s", exc)
        return EXIT_DATA
    log.info("analyzing %s", ", ".join(f"{k}={p}" for k, p in paths.items()))
    run = analyze(files, config, truth=truth, phases=phases)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    texts = {"report.json": run.report_json(), **run.tables}
    for name, text in texts.items():
        path = out / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        written.append(path)
    fatigue = run.report["fatigue"]
    _print_json({
        "out": str(out),
        "files": [{"file": p.name, "sha256": _sha256(p)} for p in written],
        "fatigue_pronounced": fatigue["pronounced"] if fatigue else None,
    })
    return EXIT_OK


# --- compare -------------------------------------------------------------

def _load_report(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / "report.json"
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DomainError(f"cannot read report {path}: {exc}") from None


def compare_reports(a: dict, b: dict, modality: str) -> dict:
    """Verdict on which report moves faster on the moments diagram."""
    speeds = []
    for tag, rep in (("A", a), ("B", b)):
        stream = rep.get("streams", {}).get(modality)
        if stream is None:
            raise DomainError(f"report {tag} has no {modality!r} stream")
        traj = stream.get("trajectory")
        if traj is None:
            raise DomainError(f"report {tag} has no trajectory for {modality!r}")
        speeds.append(float(traj["mean_speed"]))
    sa, sb = speeds
    if sa == sb:
        faster, ratio = "tie", 1.0
    elif sb == 0.0:
        faster, ratio = "A", None
    else:
        faster, ratio = ("A" if sa > sb else "B"), sa / sb
    return {"modality": modality, "speed_a": sa, "speed_b": sb, "ratio": ratio, "faster": faster}


def cmd_compare(args) -> int:
    verdict = compare_reports(_load_report(args.report_a), _load_report(args.report_b),
                              args.modality)
    verdict["claim"] = args.claim
    # A is the low-fitness (fitness-speed) or high-workload (workload-speed) session
    verdict["supported"] = verdict["faster"] == "A"
    _print_json(verdict)
    return EXIT_OK if verdict["supported"] else EXIT_CLAIM


# --- bands ---------------------------------------------------------------

def cmd_bands(args) -> int:
    result = {}
    for f in args.freq_hz:
        result[repr(f)] = sorted(classify_band(f))
    _print_json(result)
    return EXIT_OK


# --- parser --------------------------------------------------------------

def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biomoments",
        description="Moment-based analysis of wearable sensor streams.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic session as CSV files")
    p.add_argument("--profile", help="name of a catalog profile")
    p.add_argument("--profile-file", help="JSON profile definition")
    p.add_argument("--list", action="store_true", help="list catalog profiles and exit")
    p.add_argument("--seed", type=int, help="override the profile seed")
    p.add_argument("--out", help=f"output directory (env {OUT_ENV} if unset)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="compute moments, metrics and a JSON report")
    p.add_argument("--input-dir", help="directory holding accel.csv / rr.csv / eeg.csv / truth.csv")
    p.add_argument("--accel", help="accelerometer CSV (t_ms,ax,ay,az)")
    p.add_argument("--rr", help="RR interval CSV (t_ms,rr_ms)")
    p.add_argument("--eeg", help="EEG level CSV (t_ms,att,rel,eye)")
    p.add_argument("--truth", help="ground-truth sidecar; supplies phases and activity labels")
    p.add_argument("--phases", help="explicit phases as label:start_ms:end_ms,...")
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--window-ms", dest="window_ms", type=_positive_int)
    p.add_argument("--stride-ms", dest="stride_ms", type=_positive_int)
    p.add_argument("--k", type=_positive_int, help="number of k-means clusters")
    p.add_argument("--threshold", type=float, help="fatigue |r| threshold in (0, 1)")
    p.add_argument("--metric-binding", dest="metric_binding", choices=("normal", "uniform"))
    p.add_argument("--seed", type=int, help="seed for clustering and bootstrap")
    p.add_argument("--accel-unit", dest="accel_unit", choices=("ms2", "g"))
    p.add_argument("--bootstrap", type=int, help="bootstrap resamples (0 disables)")
    p.add_argument("--settle-ms", dest="settle_ms", type=int,
                   help="fatigue check ignores windows this close to a phase boundary")
    p.add_argument("--out", help=f"output directory (env {OUT_ENV} if unset)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compare", help="compare trajectory speed of two reports")
    p.add_argument("report_a", help="report.json (or its directory) expected to be faster")
    p.add_argument("report_b", help="report.json (or its directory) to compare against")
    p.add_argument("--claim", choices=CLAIMS, default="fitness-speed")
    p.add_argument("--modality", default="rr", help="stream name, e.g. rr, accel, eeg.att")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bands", help="look up EEG rhythm bands for frequencies")
    p.add_argument("freq_hz", type=float, nargs="+")
    p.set_defaults(func=cmd_bands)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"biomoments: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BiomomentsError as exc:
        print(f"biomoments: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"biomoments: I/O error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
