"""Acceptance gate: ten criteria, each checked at its stated tolerance and time budget.

Every criterion prints one ``PASS`` or ``FAIL`` line (visible under
``pytest -v`` and when this file is run as a script). A criterion that
cannot hold as stated is kept at its stated thresholds and marked as an
expected failure with the reason attached; it is never loosened.
"""
import contextlib
import io
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from biomoments.analysis import FeatureMatrix, cluster_purity, fatigue_correlation, kmeans, pearson, zscore
from biomoments.cli import main
from biomoments.metrics import (
    MomentTrajectory,
    metric_from_normal,
    metric_from_uniform,
    metric_series,
    phase_slopes,
    trajectory_speed,
)
from biomoments.moments import batch_moments, sliding_windows, streaming_moments, window_moments
from biomoments.signals import classify_band, rr_to_hr_integer
from biomoments.simulator import generate_session, reference_profiles

SEEDS = range(10)
CATALOG = reference_profiles()


def _trajectory(t, x):
    return MomentTrajectory.from_moments([window_moments(w) for w in sliding_windows(t, x).windows])


def _session(name, seed):
    return generate_session(CATALOG[name].with_seed(seed))


# --- criteria ------------------------------------------------------------
# Each returns (passed, detail). Thresholds are the stated ones.

def criterion_1():
    rng = np.random.default_rng(20240601)
    laws = (rng.normal, rng.uniform, lambda size: rng.gamma(0.5, size=size),
            lambda size: rng.standard_t(5, size=size))
    worst = 0.0
    for i in range(1000):
        n = int(rng.integers(4, 2000))
        x = laws[i % 4](size=n) * 10 ** rng.uniform(-3, 3) + rng.uniform(-1e3, 1e3)
        state = None
        for v in x:
            state = streaming_moments(state, v)
        a, b = state.finalize(), batch_moments(x)
        worst = max(worst,
                    abs(a.mean - b.mean) / max(abs(b.mean), b.std),
                    abs(a.std - b.std) / b.std,
                    abs(a.skewness - b.skewness) / max(abs(b.skewness), 1.0),
                    abs(a.excess_kurtosis - b.excess_kurtosis) / max(abs(b.excess_kurtosis), 1.0))
    stress = 0.0
    for noise in (rng.normal(0, 1, 10**5), rng.gamma(2.0, 1.0, 10**5)):
        y = 1e9 + noise
        state = None
        for v in y:
            state = streaming_moments(state, v)
        a, b = state.finalize(), batch_moments(y - 1e9)   # the subtraction is exact
        stress = max(stress,
                     abs(a.std - b.std) / b.std,
                     abs(a.skewness - b.skewness) / max(abs(b.skewness), 1.0),
                     abs(a.excess_kurtosis - b.excess_kurtosis) / max(abs(b.excess_kurtosis), 1.0))
    ok = worst <= 1e-9 and stress <= 1e-6
    return ok, f"max rel diff {worst:.2e} (<= 1e-9), offset stress {stress:.2e} (<= 1e-6)"


def criterion_2():
    m = batch_moments(np.random.default_rng(12345).uniform(0.0, 1.0, 10**6))
    checks = [
        abs(m.excess_kurtosis + 1.2) <= 0.02,
        abs(m.skewness) <= 0.01,
        metric_from_uniform(m) <= 0.03,
        abs(metric_from_normal(m) - 1.2) <= 0.03,
    ]
    return all(checks), (f"ek {m.excess_kurtosis:.4f}, skew {m.skewness:.4f}, "
                         f"METRIC3 {metric_from_uniform(m):.4f}, METRIC {metric_from_normal(m):.4f}")


def criterion_3():
    purities = []
    for seed in SEEDS:
        ses = _session("activity-mixed", seed)
        mvs = [m for m in (window_moments(w) for w in
                           sliding_windows(ses.accel_t, ses.accel_magnitude()).windows)
               if m.shape_defined]
        truth = [ses.phase_at((m.start_ms + m.end_ms) / 2).label for m in mvs]
        result = kmeans(zscore(FeatureMatrix.from_moments(mvs)), k=3, seed=seed)
        purities.append(cluster_purity(result.assignments, truth))
    return min(purities) >= 0.9, f"min purity {min(purities):.3f} over 10 seeds (>= 0.9)"


def criterion_4():
    loaded, fresh = [], []
    for seed in SEEDS:
        for name, out in (("fatigue-loaded", loaded), ("fatigue-fresh", fresh)):
            ses = _session(name, seed)
            out.append(fatigue_correlation(_trajectory(ses.accel_t, ses.accel_magnitude())))
    ok = (all(r.pronounced and abs(r.r) >= 0.8 for r in loaded)
          and all(not r.pronounced and abs(r.r) <= 0.3 for r in fresh))
    return ok, (f"loaded min |r| {min(abs(r.r) for r in loaded):.3f} (>= 0.8), "
                f"fresh max |r| {max(abs(r.r) for r in fresh):.3f} (<= 0.3)")


def criterion_5():
    def speed(name, seed):
        ses = _session(name, seed)
        return trajectory_speed(_trajectory(ses.rr_t, ses.rr_ms)).mean_speed

    fit_ratio, load_ratio = [], []
    for seed in SEEDS:
        fit_ratio.append(speed("squat-untrained", seed) / speed("squat-trained", seed))
        load_ratio.append(speed("dumbbell-3kg", seed) / speed("dumbbell-0.5kg", seed))
    ok = min(fit_ratio) > 1.0 and min(load_ratio) > 1.0
    return ok, (f"untrained/trained min ratio {min(fit_ratio):.3f}, "
                f"3kg/0.5kg min ratio {min(load_ratio):.3f} (both > 1)")


def criterion_6():
    load, recovery = [], []
    for seed in SEEDS:
        ses = _session("walk-max", seed)
        series = metric_series(_trajectory(ses.rr_t, ses.rr_ms), "METRIC", "normal")
        fits = phase_slopes(series, ses.profile.boundaries())
        load.append(fits["walk"].slope)
        recovery.append(fits["rest-post"].slope)
    ok = min(load) > 0 and max(recovery) < 0
    return ok, f"load slope min {min(load):.2e} (> 0), recovery slope max {max(recovery):.2e} (< 0)"


def criterion_7():
    raw, att_rel, eye_rel = [], [], []
    for seed in SEEDS:
        ses = _session("walk-max", seed)
        lv, t = ses.eeg_levels, ses.eeg_t
        raw.append(max(abs(pearson(lv[:, i], lv[:, j])) for i, j in ((0, 1), (0, 2), (1, 2))))
        m = [metric_series(_trajectory(t, lv[:, i])).values for i in range(3)]
        att_rel.append(pearson(m[0], m[1]))
        eye_rel.append(pearson(m[2], m[1]))
    ok = max(raw) < 0.2 and min(att_rel) >= 0.6 and max(eye_rel) <= -0.6
    return ok, (f"raw max |r| {max(raw):.3f} (< 0.2), r(ATT,REL) min {min(att_rel):.3f} (>= 0.6), "
                f"r(EYE,REL) max {max(eye_rel):.3f} (<= -0.6)")


def criterion_8():
    cases = {10: {"alpha"}, 5: {"theta"}, 14: {"SMR"}, 28: {"beta", "gamma"}, 3.5: set()}
    bad = {f: sorted(classify_band(f)) for f, want in cases.items() if classify_band(f) != want}
    return not bad, "all 5 lookups exact" if not bad else f"mismatches {bad}"


def criterion_9():
    grid = np.arange(990, 1011)
    hr = {rr_to_hr_integer(float(r)) for r in grid}
    ratio = grid.size / len(hr)
    ok = grid.size == 21 and len(hr) <= 2 and ratio >= 10
    return ok, (f"{grid.size} distinct ms map to {len(hr)} integer HR values {sorted(hr)} "
                f"(need <= 2), ratio {ratio:.1f} (need >= 10)")


def criterion_10():
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        outputs = []
        for run in ("a", "b"):
            session, report = root / run / "session", root / run / "report"
            with contextlib.redirect_stdout(io.StringIO()):
                codes = [main(["simulate", "--profile", "walk-max", "--seed", "42",
                               "--out", str(session)]),
                         main(["analyze", "--input-dir", str(session), "--seed", "42",
                               "--out", str(report)])]
            if codes != [0, 0]:
                return False, f"exit codes {codes}"
            outputs.append({p.relative_to(root / run).as_posix(): p.read_bytes()
                            for p in sorted((root / run).rglob("*")) if p.is_file()})
    same = outputs[0] == outputs[1]
    return same, f"{len(outputs[0])} files byte-identical" if same else "outputs differ"


CRITERIA = {
    1: ("moment-engine oracle equivalence", criterion_1, 5.0),
    2: ("analytic uniform fixture", criterion_2, 10.0),
    3: ("activity clustering purity", criterion_3, 30.0),
    4: ("fatigue skew/kurtosis correlation", criterion_4, 30.0),
    5: ("fitness and workload trajectory speed", criterion_5, 30.0),
    6: ("accommodation and recovery slopes", criterion_6, 30.0),
    7: ("EEG raw vs moment-metric dissociation", criterion_7, 30.0),
    8: ("rhythm band lookup", criterion_8, 1.0),
    9: ("integer HR precision loss", criterion_9, 1.0),
    10: ("end-to-end determinism", criterion_10, 10.0),
}

UNATTAINABLE = {
    9: ("rr in [990, 1010] ms spans integer HR 59, 60 and 61 (60000/990 rounds to 61, "
        "60000/1010 to 59), so 21 values over 3 classes give ratio 7 < 10"),
}


def evaluate(number):
    title, fn, budget = CRITERIA[number]
    t0 = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - t0
    passed = ok and elapsed < budget
    line = (f"{'PASS' if passed else 'FAIL'} criterion {number:>2} ({title}): {detail}; "
            f"{elapsed:.2f}s of {budget:.0f}s")
    return passed, line


def _params():
    for n in CRITERIA:
        marks = ([pytest.mark.xfail(strict=True, reason=UNATTAINABLE[n])]
                 if n in UNATTAINABLE else [])
        yield pytest.param(n, marks=marks, id=f"criterion-{n}")


@pytest.mark.parametrize("number", list(_params()))
def test_criterion(number, capsys):
    passed, line = evaluate(number)
    with capsys.disabled():
        print("\n" + line)
    assert passed, line


def test_integer_hr_collapses_a_16_ms_band():
    # the strongest honest form of the precision claim: every integer ms in
    # (992.5, 1008.5) reports as 60 bpm, so 16 distinct RR values share one HR
    grid = np.arange(993, 1009)
    hr = {rr_to_hr_integer(float(r)) for r in grid}
    assert hr == {60} and grid.size / len(hr) >= 10


if __name__ == "__main__":
    results = [evaluate(n) for n in CRITERIA]
    for _, line in results:
        print(line)
    sys.exit(0 if all(p for p, _ in results) else 1)
