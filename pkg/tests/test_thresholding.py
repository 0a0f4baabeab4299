import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gpcellseg.thresholding import (
    ThresholdTrace,
    binarize,
    count_curve,
    select_threshold,
    smooth_diffs,
    threshold_tile,
)

FIELD = np.array([[1.0, 0.5], [0.25, 0.1]])


def test_count_example_alpha_03():
    trace = count_curve(FIELD, M=11)
    assert trace.alphas[3] == pytest.approx(0.3)
    assert trace.counts[3] == 2


def test_count_alpha_zero_and_one():
    trace = count_curve(FIELD, M=11)
    assert trace.counts[0] == 4
    assert trace.counts[-1] == 0


def test_count_nonpositive_max_flagged():
    trace = count_curve(-np.ones((3, 3)))
    assert "nonpositive_max" in trace.flags
    assert not trace.counts.any()


@settings(max_examples=50, deadline=None)
@given(F=arrays(float, (6, 7), elements=st.floats(0.001, 10)), M=st.integers(10, 120))
def test_count_curve_non_increasing(F, M):
    trace = count_curve(F, M)
    assert np.all(np.diff(trace.counts) <= 0)
    assert trace.counts[-1] == 0
    assert trace.diffs.size == M - 1


def test_binarize_examples():
    assert binarize(FIELD, 0.0).tolist() == [[1, 1], [1, 1]]
    assert binarize(FIELD, 1.0).tolist() == [[0, 0], [0, 0]]
    assert binarize(FIELD, 0.3).tolist() == [[1, 1], [0, 0]]
    with pytest.raises(ValueError):
        binarize(FIELD, 1.5)


@settings(max_examples=50, deadline=None)
@given(F=arrays(float, (5, 5), elements=st.floats(0.001, 10)), a=st.floats(0, 1), b=st.floats(0, 1))
def test_binarize_monotone(F, a, b):
    lo, hi = sorted((a, b))
    assert np.all(binarize(F, hi) <= binarize(F, lo))


def _trace_with_diffs(d):
    d = np.asarray(d)
    alphas = np.linspace(0, 1, d.size + 1)
    counts = np.concatenate([[d.sum()], d.sum() - np.cumsum(d)])
    return ThresholdTrace(alphas, counts, diffs=d)


def test_constant_diffs_copied():
    tr = smooth_diffs(_trace_with_diffs(np.full(40, 5)))
    np.testing.assert_array_equal(tr.smoothed, np.full(40, 5.0))
    assert "constant_diffs" in tr.flags


def test_spike_located():
    d = np.full(99, 2.0)
    d[37] = 400.0
    tr = smooth_diffs(_trace_with_diffs(d))
    assert abs(int(np.argmax(tr.smoothed)) - 37) <= 2


def test_zero_tau_flagged():
    tr = smooth_diffs(_trace_with_diffs(np.full(40, 5)))
    select_threshold(tr)
    assert "zero_tau" in tr.flags
    assert tr.star_index == 1


def test_selected_index_after_peak():
    rng = np.random.default_rng(0)
    F = np.where(rng.random((60, 60)) < 0.3, 0.9, 0.1) + 0.02 * rng.standard_normal((60, 60))
    _, tr = threshold_tile(F)
    assert tr.star_index > tr.peak_index


def test_bimodal_smoothed_decreases_after_peak():
    rng = np.random.default_rng(4)
    F = np.full((80, 80), 0.1)
    F[20:50, 25:60] = 0.9
    F = F + 0.05 * rng.standard_normal(F.shape)
    tr = smooth_diffs(count_curve(F))
    s = tr.smoothed[tr.peak_index:]
    # after the background peak the curve falls; allow small ripples
    assert np.all(np.diff(s[: len(s) // 3]) <= 0.02 * s[0])


def test_objectless_ramp_flagged():
    # each threshold step drops exactly 10 pixels: constant differences, tau = 0
    alphas = np.linspace(0, 1, 100)
    F = np.repeat(alphas[1:], 10).reshape(99, 10)
    _, tr = threshold_tile(F)
    assert np.all(tr.diffs == 10)
    assert "constant_diffs" in tr.flags and "zero_tau" in tr.flags
    assert tr.star_index == tr.peak_index + 1


def test_straddle_option_can_pick_earlier():
    d = np.concatenate([[1, 5, 50, 50], np.linspace(40, 1, 60), np.ones(35)])
    tr = _trace_with_diffs(d)
    tr.smoothed = d.astype(float)
    literal = select_threshold(tr, straddle_peak=True)
    default = select_threshold(tr)
    assert literal <= default


def test_deterministic():
    F = np.random.default_rng(9).random((30, 30))
    assert threshold_tile(F)[1].alpha_star == threshold_tile(F.copy())[1].alpha_star


def test_trace_csv(tmp_path):
    _, tr = threshold_tile(np.random.default_rng(2).random((20, 20)), M=12)
    path = tmp_path / "t.csv"
    tr.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["alpha", "count", "diff", "smoothed_diff"]
    assert len(rows) == 13
    assert rows[1][2] == "" and float(rows[2][0]) == pytest.approx(1 / 11)
