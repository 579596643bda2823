import io
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from biomoments.exceptions import DataFormatError, DomainError, RowError, SequenceError
from biomoments.signals import (
    G_STANDARD,
    RHYTHM_BANDS,
    EEGSample,
    Modality,
    PlausibilityWarning,
    RRInterval,
    TriaxSample,
    classify_band,
    format_csv,
    hr_to_rr,
    magnitude,
    magnitudes,
    parse_csv,
    read_csv,
    rr_to_hr_integer,
    to_arrays,
    write_csv,
)
from biomoments.simulator import generate_session, reference_profiles


# --- sample types ---------------------------------------------------------

def test_triax_rejects_non_finite_axis():
    with pytest.raises(DomainError):
        TriaxSample(0, float("nan"), 0.0, 0.0)


def test_negative_timestamp_rejected():
    with pytest.raises(DomainError):
        RRInterval(-1, 800.0)


@pytest.mark.parametrize("rr", [0.0, -10.0, float("inf")])
def test_rr_must_be_positive_and_finite(rr):
    with pytest.raises(DomainError):
        RRInterval(0, rr)


def test_implausible_rr_warns_but_is_kept():
    with pytest.warns(PlausibilityWarning):
        s = RRInterval(0, 150.0)
    assert s.rr_ms == 150.0


def test_plausible_rr_is_silent():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        RRInterval(0, 850.0)


@pytest.mark.parametrize("att,rel,eye", [(101, 50, 0), (50, -0.1, 0), (50, 50, -1)])
def test_eeg_bounds(att, rel, eye):
    with pytest.raises(DomainError):
        EEGSample(0, att, rel, eye)


def test_eeg_eye_has_no_upper_cap():
    assert EEGSample(0, 0, 100, 250.0).eye == 250.0


# --- conversions ---------------------------------------------------------

@pytest.mark.parametrize("hr,rr", [(60, 1000.0), (120, 500.0)])
def test_hr_to_rr_examples(hr, rr):
    assert hr_to_rr(hr) == rr


def test_hr_to_rr_72():
    assert hr_to_rr(72) == pytest.approx(833.3333333333, rel=1e-9)


@pytest.mark.parametrize("hr", [0, -5, float("nan")])
def test_hr_to_rr_domain(hr):
    with pytest.raises(DomainError):
        hr_to_rr(hr)


@given(st.floats(min_value=1e-3, max_value=1e4, allow_nan=False))
def test_hr_rr_product_is_60000(hr):
    assert hr_to_rr(hr) * hr == pytest.approx(60000.0, rel=1e-9)


@pytest.mark.parametrize("rr,hr", [(1000, 60), (833, 72)])
def test_rr_to_hr_integer_examples(rr, hr):
    assert rr_to_hr_integer(rr) == hr


def test_rr_to_hr_integer_rounds_half_away_from_zero():
    # 60000 / 800 = 75 exactly; 60000 / 1200 = 50; pick an exact .5 case
    assert rr_to_hr_integer(60000 / 72.5) == 73
    assert rr_to_hr_integer(60000 / 71.5) == 72


def test_rr_to_hr_integer_domain():
    with pytest.raises(DomainError):
        rr_to_hr_integer(0)


def test_integer_hr_loses_information_at_995():
    assert hr_to_rr(rr_to_hr_integer(995)) != 995


def test_integer_hr_not_injective_on_grid():
    grid = np.arange(993, 1009)  # every integer ms in (992.5, 1008.5)
    assert {rr_to_hr_integer(float(r)) for r in grid} == {60}


# --- magnitude -----------------------------------------------------------

@pytest.mark.parametrize("xyz,expected", [((0, 0, 9.81), 9.81), ((3, 4, 0), 5.0), ((0, 0, 0), 0.0)])
def test_magnitude_examples(xyz, expected):
    assert magnitude(TriaxSample(0, *xyz)) == pytest.approx(expected, abs=1e-12)


def test_vectorised_magnitudes_match_scalar():
    samples = [TriaxSample(i, i * 0.1, -1.0, 2.0 + i) for i in range(5)]
    assert np.allclose(magnitudes(samples), [magnitude(s) for s in samples], rtol=0, atol=1e-12)


# --- bands ---------------------------------------------------------------

@pytest.mark.parametrize("freq,bands", [
    (10, {"alpha"}),
    (5, {"theta"}),
    (14, {"SMR"}),
    (28, {"beta", "gamma"}),
    (3.5, set()),
    (13, {"alpha", "SMR"}),
    (100, {"gamma"}),
])
def test_classify_band_examples(freq, bands):
    assert classify_band(freq) == frozenset(bands)


@pytest.mark.parametrize("freq", [0, -3])
def test_classify_band_domain(freq):
    with pytest.raises(DomainError):
        classify_band(freq)


@given(st.floats(min_value=0.01, max_value=200.0, allow_nan=False))
def test_classify_band_nonempty_exactly_on_band_union(freq):
    inside = any(b.lo_hz <= freq <= b.hi_hz for b in RHYTHM_BANDS)
    assert bool(classify_band(freq)) == inside


def test_band_gaps_are_empty():
    # the published edges leave 7-8 Hz and 15-16 Hz uncovered
    assert classify_band(7.5) == frozenset()
    assert classify_band(15.5) == frozenset()


# --- CSV -----------------------------------------------------------------

def test_parse_single_triax_row():
    (s,) = parse_csv(["t_ms,ax,ay,az", "0,0.0,0.0,9.81"], Modality.ACCEL)
    assert s == TriaxSample(0, 0.0, 0.0, 9.81)


def test_negative_rr_row_error_has_line_number():
    with pytest.raises(RowError) as info:
        parse_csv(["t_ms,rr_ms", "500,-10"], Modality.RR)
    assert info.value.line == 2


def test_bad_header_is_format_error():
    with pytest.raises(DataFormatError):
        parse_csv(["time,rr", "0,800"], "rr")


def test_empty_input_is_format_error():
    with pytest.raises(DataFormatError):
        parse_csv([], "rr")


def test_non_numeric_cell_reports_line():
    with pytest.raises(RowError) as info:
        parse_csv(["t_ms,rr_ms", "0,800", "1000,abc"], "rr")
    assert info.value.line == 3


def test_wrong_field_count():
    with pytest.raises(RowError):
        parse_csv(["t_ms,rr_ms", "0,800,1"], "rr")


def test_non_monotonic_timestamps_are_sequence_error():
    with pytest.raises(SequenceError) as info:
        parse_csv(["t_ms,rr_ms", "0,800", "1000,810", "1000,820"], "rr")
    assert info.value.line == 4


def test_parser_accepts_any_precision_and_blank_lines():
    rows = parse_csv(["t_ms,att,rel,eye", "0,12.3456,7,0.5", "", "20,1e1,50.0,3"], "eeg")
    assert rows[1] == EEGSample(20, 10.0, 50.0, 3.0)


def test_g_unit_scaling():
    (s,) = parse_csv(["t_ms,ax,ay,az", "0,0,0,1"], "accel", scale=G_STANDARD)
    assert s.az == pytest.approx(9.81)


def test_writer_uses_fixed_decimals():
    text = format_csv([TriaxSample(0, 1.0, 2.0, 3.0)], "accel")
    assert text == "t_ms,ax,ay,az\n0,1.000000,2.000000,3.000000\n"
    assert format_csv([RRInterval(5, 800.0)], "rr") == "t_ms,rr_ms\n5,800.000\n"
    assert format_csv([EEGSample(5, 1, 2, 3)], "eeg") == "t_ms,att,rel,eye\n5,1.0,2.0,3.0\n"


def test_simulated_file_round_trips_bit_identically(tmp_path):
    session = generate_session(reference_profiles()["walk-max"])
    samples = session.triax()[:1000]
    text = format_csv(samples, "accel")
    path = tmp_path / "accel.csv"
    with open(path, "w", newline="") as fh:
        write_csv(samples, "accel", fh)
    parsed = read_csv(path, "accel")
    assert len(parsed) == 1000
    assert format_csv(parsed, "accel") == text
    assert path.read_text() == text


@given(st.lists(st.tuples(st.integers(1, 500),
                          st.floats(-50, 50, allow_nan=False),
                          st.floats(-50, 50, allow_nan=False),
                          st.floats(-50, 50, allow_nan=False)), min_size=1, max_size=30))
def test_write_parse_identity_on_canonical_values(rows):
    t = np.cumsum([r[0] for r in rows])
    samples = [TriaxSample(int(ti), *(round(v, 6) for v in r[1:])) for ti, r in zip(t, rows)]
    parsed = parse_csv(io.StringIO(format_csv(samples, "accel")), "accel")
    assert parsed == samples


def test_to_arrays_shapes():
    t, v = to_arrays([RRInterval(0, 800.0), RRInterval(800, 810.0)], "rr")
    assert t.tolist() == [0.0, 800.0] and v.shape == (2, 1)
    t, v = to_arrays([], "eeg")
    assert t.size == 0 and v.shape == (0, 3)
    assert math.isclose(v.sum(), 0.0)
