"""Tracking-error statistics and paired controller comparison reports."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

AXES = {"pitch": 0, "yaw": 1}
RAD2DEG = 180.0 / math.pi

# Published hardware results in degrees, shown next to simulated values for context.
PUBLISHED_RMS = {
    ("pitch", (26.0, 30.0)): {"lqr_pid": 1.5123, "ilqr_pid": 0.9428},
    ("yaw", (26.0, 30.0)): {"lqr_pid": 6.9951, "ilqr_pid": 2.3304},
}
PUBLISHED_WIND_RMS = {
    ("pitch", (0.0, 45.0)): {"lqr_pid": 5.8598, "ilqr_pid": 5.8673},
    ("yaw", (0.0, 45.0)): {"lqr_pid": 7.7559, "ilqr_pid": 4.0847},
}


PUBLISHED = {"nominal": PUBLISHED_RMS, "wind": PUBLISHED_WIND_RMS}


class EmptyWindowError(ValueError):
    pass


@dataclass(frozen=True)
class ErrorStats:
    """RMS, population standard deviation and mean of ``y - y_d`` (radians)."""

    rms: float
    std: float
    mean: float
    interval: tuple[float, float]
    axis: str
    n_samples: int

    def in_degrees(self) -> tuple[float, float, float]:
        return self.rms * RAD2DEG, self.std * RAD2DEG, self.mean * RAD2DEG


def error_stats(e: np.ndarray, interval=(0.0, 0.0), axis: str = "pitch") -> ErrorStats:
    e = np.asarray(e, dtype=float)
    if e.size < 2:
        raise EmptyWindowError(f"need at least 2 samples in window {interval}, got {e.size}")
    mean = float(np.mean(e))
    std = float(np.std(e))  # ddof=0
    rms = float(np.sqrt(np.mean(e * e)))
    return ErrorStats(rms=rms, std=std, mean=mean, interval=tuple(interval), axis=axis, n_samples=e.size)


def compute_stats(trace, axis: str, interval: Sequence[float]) -> ErrorStats:
    """Statistics of the tracking error over samples with ``t`` in ``[t0, t1]``."""
    if axis not in AXES:
        raise ValueError(f"axis must be one of {sorted(AXES)}")
    t0, t1 = float(interval[0]), float(interval[1])
    t = np.asarray(trace.t)
    # Tolerate grid roundoff at the window edges.
    eps = 1e-9 * max(1.0, abs(t1))
    window = (t >= t0 - eps) & (t <= t1 + eps)
    e = trace.y[window, AXES[axis]] - trace.ref[window, AXES[axis]]
    return error_stats(e, (t0, t1), axis)


@dataclass(frozen=True)
class ComparisonRow:
    axis: str
    interval: tuple[float, float]
    a: ErrorStats
    b: ErrorStats
    winner: Optional[str]


@dataclass(frozen=True)
class Comparison:
    name_a: str
    name_b: str
    rows: tuple[ComparisonRow, ...]
    title: str = ""
    published: Optional[dict] = None

    def row(self, axis: str, interval) -> ComparisonRow:
        key = (float(interval[0]), float(interval[1]))
        for r in self.rows:
            if r.axis == axis and r.interval == key:
                return r
        raise KeyError((axis, interval))

    def records(self) -> list[dict]:
        """Machine-readable rows (degrees)."""
        out = []
        for r in self.rows:
            for name, s in ((self.name_a, r.a), (self.name_b, r.b)):
                rms, std, mean = s.in_degrees()
                out.append(dict(axis=r.axis, t_start=r.interval[0], t_end=r.interval[1],
                                controller=name, rms_deg=rms, std_deg=std, mean_deg=mean,
                                winner=r.winner or ""))
        return out

    def render(self) -> str:
        lines = []
        if self.title:
            lines += [self.title, "=" * len(self.title)]
        header = f"{'axis':<6} {'interval [s]':<14} {'controller':<10} {'RMS [deg]':>12} {'STD [deg]':>12} {'Mean [deg]':>12} {'published':>10}"
        lines += [header, "-" * len(header)]
        for r in self.rows:
            published = (self.published or {}).get((r.axis, r.interval), {})
            span = f"{r.interval[0]:g}-{r.interval[1]:g}"
            for name, s in ((self.name_a, r.a), (self.name_b, r.b)):
                rms, std, mean = s.in_degrees()
                ref = published.get(name)
                ref_txt = f"{ref:10.4f}" if ref is not None else f"{'-':>10}"
                lines.append(f"{r.axis:<6} {span:<14} {name:<10} {rms:12.6f} {std:12.6f} {mean:12.6f} {ref_txt}")
            lines.append(f"{'':<6} {'':<14} {'winner':<10} {r.winner or 'none':>12}")
        return "\n".join(lines) + "\n"


def compare_report(trace_a, trace_b, intervals, axes: Sequence[str] = ("pitch", "yaw"),
                   title: str = "", published: Optional[dict] = None) -> Comparison:
    """Per axis and interval, stats of both traces and the lower-RMS winner.

    Ties (equal RMS) have no winner. ``published`` maps ``(axis, interval)`` to
    hardware RMS values (degrees) that are displayed alongside, never compared.
    """
    if len(trace_a.t) != len(trace_b.t) or not np.array_equal(trace_a.t, trace_b.t):
        raise ValueError("traces are not on the same time grid")
    name_a = trace_a.controller or "a"
    name_b = trace_b.controller or "b"
    if name_a == name_b:
        name_a, name_b = name_a + "_a", name_b + "_b"
    rows = []
    for axis in axes:
        for interval in intervals:
            interval = (float(interval[0]), float(interval[1]))
            sa = compute_stats(trace_a, axis, interval)
            sb = compute_stats(trace_b, axis, interval)
            winner = None
            if sa.rms < sb.rms:
                winner = name_a
            elif sb.rms < sa.rms:
                winner = name_b
            rows.append(ComparisonRow(axis, interval, sa, sb, winner))
    return Comparison(name_a, name_b, tuple(rows), title, published)


def settling_times(trace, axis: str, band: float) -> list[tuple[float, Optional[float]]]:
    """Settling time after every step of the commanded target on ``axis``.

    For each edge, the time from the edge until ``|y - target|`` enters
    ``band`` (radians) for good, i.e. until the next edge or the end of the
    trace. ``None`` when the error is still outside the band at that point.
    """
    i = AXES[axis]
    target = trace.target[:, i]
    err = np.abs(trace.y[:, i] - target)
    t = np.asarray(trace.t)
    edges = np.nonzero(np.diff(target) != 0)[0] + 1
    bounds = list(edges) + [len(t)]
    out = []
    for start, stop in zip(bounds[:-1], bounds[1:]):
        outside = np.nonzero(err[start:stop] > band)[0]
        if len(outside) == 0:
            out.append((float(t[start]), 0.0))
        elif outside[-1] + 1 >= stop - start:
            out.append((float(t[start]), None))
        else:
            out.append((float(t[start]), float(t[start + outside[-1] + 1] - t[start])))
    return out
