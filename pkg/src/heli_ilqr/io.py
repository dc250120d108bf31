"""Scenario files, trace CSVs and the gains summary.

Scenario files are line-oriented ``key = value`` pairs with ``#`` comments and
dotted keys for nested settings. Angles in files are degrees; everything is
converted to radians on load.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from pathlib import Path
from typing import Callable

import numpy as np

from heli_ilqr.controllers import UltraLocalConfig
from heli_ilqr.model import HeliParams, State
from heli_ilqr.riccati import CareSolution, LqrWeights, is_hurwitz
from heli_ilqr.simulate import DEG, DisturbanceSpec, ReferenceSpec, Scenario, Trace

CSV_HEADER = ("t", "theta_ref_deg", "psi_ref_deg", "theta_deg", "psi_deg",
              "u_p_V", "u_y_V", "F_hat_p", "F_hat_y", "disturbance")


class ScenarioParseError(ValueError):
    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class ScenarioValidationError(ValueError):
    pass


def _diag(text: str) -> np.ndarray:
    return np.diag([float(v) for v in text.split(",")])


def _deg(text: str) -> float:
    return float(text) * DEG


def _prefilter(text: str):
    value = float(text)
    return None if value == 0 else value


# key -> (section, field, converter); section None means a top-level Scenario field.
_KEYS: dict[str, tuple[str | None, str, Callable]] = {
    "name": (None, "name", str),
    "duration": (None, "duration", float),
    "dt_plant": (None, "dt_plant", float),
    "dt_control": (None, "dt_control", float),
    "controller": (None, "controller", str),
    "seed": (None, "seed", int),
    "feedback": (None, "feedback", str),
    "initial.theta_deg": ("initial", "theta", _deg),
    "initial.psi_deg": ("initial", "psi", _deg),
    "reference.kind": ("reference", "kind", str),
    "reference.amplitude_deg": ("reference", "amplitude", _deg),
    "reference.period": ("reference", "period", float),
    "reference.offset_deg": ("reference", "offset", _deg),
    "reference.yaw_deg": ("reference", "yaw", _deg),
    "reference.prefilter_wn": (None, "prefilter_wn", _prefilter),
    "disturbance.kind": ("disturbance", "kind", str),
    "disturbance.injection": ("disturbance", "injection", str),
    "disturbance.axis": ("disturbance", "axis", str),
    "disturbance.magnitude_deg": ("disturbance", "magnitude", _deg),
    "disturbance.period": ("disturbance", "period", float),
    "disturbance.delay": ("disturbance", "delay", float),
    "disturbance.width": ("disturbance", "width", float),
    "disturbance.omega": ("disturbance", "omega", float),
    "disturbance.phase": ("disturbance", "phase", float),
    "disturbance.mean_V": ("disturbance", "mean", float),
    "disturbance.noise_V": ("disturbance", "noise", float),
    "disturbance.cutoff": ("disturbance", "cutoff", float),
    "control.alpha_pitch": ("ultra_local", "alpha_pitch", float),
    "control.alpha_yaw": ("ultra_local", "alpha_yaw", float),
    "control.tau_f": (None, "tau_f", float),
    "control.stencil": (None, "stencil", int),
    "control.velocity_source": (None, "velocity_source", str),
    "lqr.Q_diag": ("weights", "Q", _diag),
    "lqr.R_diag": ("weights", "R", _diag),
}
_KEYS.update({f"plant.{f.name}": ("plant", f.name, float) for f in dataclasses.fields(HeliParams)})


def parse_scenario_text(text: str, path="<string>") -> Scenario:
    sections: dict[str | None, dict] = {}
    seen: set[str] = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioParseError(path, line_no, f"expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ScenarioParseError(path, line_no, f"unknown key {key!r}")
        if key in seen:
            raise ScenarioParseError(path, line_no, f"duplicate key {key!r}")
        if not value:
            raise ScenarioParseError(path, line_no, f"missing value for {key!r}")
        seen.add(key)
        section, name, convert = _KEYS[key]
        try:
            sections.setdefault(section, {})[name] = convert(value)
        except ValueError as exc:
            raise ScenarioParseError(path, line_no, f"bad value for {key!r}: {exc}") from exc

    kwargs = dict(sections.get(None, {}))
    try:
        if "initial" in sections:
            kwargs["initial_state"] = dataclasses.replace(Scenario().initial_state, **sections["initial"])
        if "reference" in sections:
            kwargs["reference"] = ReferenceSpec(**sections["reference"])
        if "disturbance" in sections:
            kwargs["disturbance"] = DisturbanceSpec(**sections["disturbance"])
        if "ultra_local" in sections:
            kwargs["ultra_local"] = UltraLocalConfig(**sections["ultra_local"])
        if "weights" in sections:
            default = LqrWeights.default()
            kwargs["weights"] = LqrWeights(sections["weights"].get("Q", default.Q),
                                           sections["weights"].get("R", default.R))
        if "plant" in sections:
            kwargs["plant_deltas"] = sections["plant"]
        return Scenario(**kwargs)
    except (ValueError, KeyError, TypeError) as exc:
        raise ScenarioValidationError(f"{path}: {exc}") from exc


def parse_scenario_file(path) -> Scenario:
    path = Path(path)
    return parse_scenario_text(path.read_text(encoding="utf-8"), path)


def _fmt(v: float) -> str:
    s = f"{v:.9g}"
    return "0" if s == "-0" else s


def emit_csv(trace: Trace, path) -> None:
    """One row per control tick; angles in degrees, 9 significant digits."""
    path = Path(path)
    cols = np.column_stack([
        trace.t,
        np.degrees(trace.ref),
        np.degrees(trace.y),
        trace.u,
        trace.F_hat,
        trace.disturbance,
    ])
    lines = [",".join(CSV_HEADER)]
    lines.extend(",".join(_fmt(v) for v in row) for row in cols)
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write trace CSV {path}: {exc}") from exc


def read_csv(path) -> Trace:
    """Load a trace CSV written by :func:`emit_csv` (state beyond angles is zero)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        data = np.array([[float(v) for v in row] for row in reader], dtype=float).reshape(-1, len(CSV_HEADER))
    ref = np.radians(data[:, 1:3])
    y = np.radians(data[:, 3:5])
    x = np.zeros((len(data), 6))
    x[:, :2] = y
    return Trace(t=data[:, 0], ref=ref, x=x, y=y, u=data[:, 5:7], F_hat=data[:, 7:9],
                 disturbance=data[:, 9])


def _matrix_lines(M: np.ndarray, indent: str = "  ") -> list[str]:
    return [indent + " ".join(f"{v:14.8f}" for v in row) for row in np.atleast_2d(M)]


def format_gains(solution: CareSolution, weights: LqrWeights, A: np.ndarray, B: np.ndarray) -> str:
    lines = ["LQR-PID gain synthesis", ""]
    lines.append("Q =")
    lines += _matrix_lines(weights.Q)
    lines.append("R =")
    lines += _matrix_lines(weights.R)
    lines.append("P =")
    lines += _matrix_lines(solution.P)
    lines.append("K = [K_P | K_D | K_I] =")
    lines += _matrix_lines(solution.K)
    norm_p = float(np.linalg.norm(solution.P))
    lines.append("")
    lines.append(f"sign iterations      : {solution.iterations}")
    lines.append(f"residual ||.||_F     : {solution.residual_norm:.3e}")
    lines.append(f"residual bound       : {1e-9 * (1 + norm_p):.3e}")
    lines.append(f"A - B K Hurwitz      : {is_hurwitz(A - B @ solution.K)}")
    return "\n".join(lines) + "\n"
