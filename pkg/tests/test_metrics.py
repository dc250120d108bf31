import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heli_ilqr.metrics import (
    PUBLISHED_RMS,
    EmptyWindowError,
    compare_report,
    compute_stats,
    error_stats,
    settling_times,
)
from heli_ilqr.simulate import Trace

samples = st.lists(st.floats(-100, 100, allow_nan=False), min_size=2, max_size=300)


def make_trace(t, y_pitch, ref_pitch=None, controller="", y_yaw=None, target=None):
    t = np.asarray(t, dtype=float)
    n = len(t)
    ref = np.zeros((n, 2))
    if ref_pitch is not None:
        ref[:, 0] = ref_pitch
    y = np.zeros((n, 2))
    y[:, 0] = y_pitch
    if y_yaw is not None:
        y[:, 1] = y_yaw
    x = np.zeros((n, 6))
    x[:, :2] = y
    tgt = None
    if target is not None:
        tgt = np.zeros((n, 2))
        tgt[:, 0] = target
    return Trace(t=t, ref=ref, x=x, y=y, u=np.zeros((n, 2)), F_hat=np.zeros((n, 2)),
                 disturbance=np.zeros(n), controller=controller, target=tgt)


def two_pass(e):
    n = len(e)
    mean = 0.0
    for v in e:
        mean += v
    mean /= n
    var = 0.0
    sq = 0.0
    for v in e:
        var += (v - mean) ** 2
        sq += v * v
    return math.sqrt(sq / n), math.sqrt(var / n), mean


def test_stats_examples():
    s = error_stats([1.0, -1.0, 1.0, -1.0])
    assert (s.rms, s.std, s.mean) == (1.0, 1.0, 0.0)
    s = error_stats([2.0, 2.0])
    assert (s.rms, s.std, s.mean) == (2.0, 0.0, 2.0)
    s = error_stats([3.0, 4.0])
    assert s.rms == pytest.approx(math.sqrt(12.5))
    assert s.std == pytest.approx(0.5)


def test_stats_in_degrees():
    s = error_stats([math.pi / 180, math.pi / 180])
    assert s.in_degrees() == pytest.approx((1.0, 0.0, 1.0))


def test_random_window_matches_two_pass_oracle():
    rng = np.random.default_rng(2024)
    e = rng.normal(0.3, 2.0, size=1000)
    s = error_stats(e)
    for got, want in zip((s.rms, s.std, s.mean), two_pass(e)):
        assert got == pytest.approx(want, rel=1e-12, abs=1e-15)


@given(samples)
def test_rms_identity(e):
    s = error_stats(e)
    assert s.rms**2 == pytest.approx(s.mean**2 + s.std**2, rel=1e-9, abs=1e-12)


@given(samples, st.floats(-50, 50))
def test_std_shift_invariant(e, c):
    a = error_stats(e)
    b = error_stats(np.asarray(e) + c)
    assert b.std == pytest.approx(a.std, rel=1e-6, abs=1e-6)
    assert b.mean == pytest.approx(a.mean + c, rel=1e-9, abs=1e-9)


def test_empty_window_raises():
    tr = make_trace(np.arange(10) * 0.1, np.zeros(10))
    with pytest.raises(EmptyWindowError):
        compute_stats(tr, "pitch", (5.0, 6.0))
    with pytest.raises(EmptyWindowError):
        error_stats([1.0])
    with pytest.raises(ValueError):
        compute_stats(tr, "roll", (0.0, 1.0))


def test_compute_stats_window_is_closed_and_roundoff_tolerant():
    t = np.arange(0, 101) * 0.002  # 0 .. 0.2 with float drift
    tr = make_trace(t, t)
    s = compute_stats(tr, "pitch", (0.1, 0.2))
    assert s.n_samples == 51


def test_compare_report_winner_and_tie():
    t = np.linspace(0, 1, 11)
    a = make_trace(t, np.full(11, 0.2), controller="lqr_pid")
    b = make_trace(t, np.full(11, 0.1), controller="ilqr_pid")
    rep = compare_report(a, b, [(0.0, 1.0)], axes=("pitch",))
    assert rep.row("pitch", (0, 1)).winner == "ilqr_pid"
    tie = compare_report(a, a, [(0.0, 1.0)], axes=("pitch",))
    assert tie.rows[0].winner is None
    assert "none" in tie.render()


def test_compare_report_grid_mismatch():
    a = make_trace(np.linspace(0, 1, 11), np.zeros(11))
    b = make_trace(np.linspace(0, 1, 12), np.zeros(12))
    with pytest.raises(ValueError):
        compare_report(a, b, [(0.0, 1.0)])


def test_report_render_and_records():
    t = np.linspace(0, 30, 301)
    a = make_trace(t, 0.01 * np.sin(t), controller="lqr_pid", y_yaw=0.02 * np.cos(t))
    b = make_trace(t, 0.005 * np.sin(t), controller="ilqr_pid", y_yaw=0.01 * np.cos(t))
    rep = compare_report(a, b, [(26.0, 30.0)], title="demo", published=PUBLISHED_RMS)
    text = rep.render()
    assert text.startswith("demo\n====")
    assert "6.9951" in text and "2.3304" in text
    recs = rep.records()
    assert len(recs) == 4
    for r in recs:
        assert r["rms_deg"] ** 2 == pytest.approx(r["mean_deg"] ** 2 + r["std_deg"] ** 2, rel=1e-9)


def test_settling_times():
    t = np.arange(0, 10.001, 0.01)
    target = np.where(t < 5, 1.0, -1.0)
    y = target.copy()
    y[(t >= 5) & (t < 6.5)] = 0.0
    tr = make_trace(t, y, ref_pitch=target, target=target)
    edges = settling_times(tr, "pitch", 0.02)
    assert len(edges) == 1
    assert edges[0][0] == pytest.approx(5.0)
    assert edges[0][1] == pytest.approx(1.5)
    y[-1] = 0.0
    tr = make_trace(t, y, ref_pitch=target, target=target)
    assert settling_times(tr, "pitch", 0.02)[0][1] is None


def test_published_table_self_consistency():
    # pitch LQR-PID row of the nominal hardware table: RMS, STD, Mean
    rms, std, mean = 1.5123, 1.2983, 0.7757
    assert rms**2 == pytest.approx(mean**2 + std**2, rel=1e-3)
