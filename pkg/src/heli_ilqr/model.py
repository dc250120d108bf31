"""Physical parameters and the augmented linear model of the 2-DoF helicopter.

State ordering is fixed everywhere as ``[theta, psi, theta_dot, psi_dot,
I_theta, I_psi]``; inputs are ``[u_p, u_y]`` motor voltages. All quantities
are SI (radians, seconds, volts).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

THETA, PSI, THETA_DOT, PSI_DOT, I_THETA, I_PSI = range(6)
N_STATES = 6
N_INPUTS = 2


@dataclass(frozen=True)
class HeliParams:
    """Nominal plant constants of the Quanser 2-DoF helicopter.

    Defaults are the published nominal values; ``u_p_max``/``u_y_max`` are the
    motor voltage limits.
    """

    B_p: float = 0.8
    B_y: float = 0.318
    J_eq_p: float = 0.0384
    J_eq_y: float = 0.0432
    m_h: float = 1.3872
    l: float = 0.186
    K_pp: float = 0.204
    K_py: float = 0.0068
    K_yp: float = 0.0219
    K_yy: float = 0.072
    u_p_max: float = 24.0
    u_y_max: float = 15.0

    def __post_init__(self) -> None:
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value):
                raise ValueError(f"{f.name} must be finite, got {value!r}")
        for name in ("J_eq_p", "J_eq_y", "m_h", "l", "u_p_max", "u_y_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")

    @property
    def pitch_inertia(self) -> float:
        return self.J_eq_p + self.m_h * self.l**2

    @property
    def yaw_inertia(self) -> float:
        return self.J_eq_y + self.m_h * self.l**2

    @property
    def u_max(self) -> np.ndarray:
        return np.array([self.u_p_max, self.u_y_max])


@dataclass(frozen=True)
class State:
    """Named view of the 6-element state vector."""

    theta: float = 0.0
    psi: float = 0.0
    theta_dot: float = 0.0
    psi_dot: float = 0.0
    I_theta: float = 0.0
    I_psi: float = 0.0

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in dataclasses.astuple(self)):
            raise ValueError("state entries must be finite")

    def as_array(self) -> np.ndarray:
        return np.array(dataclasses.astuple(self), dtype=float)

    @classmethod
    def from_array(cls, x) -> "State":
        x = np.asarray(x, dtype=float)
        if x.shape != (N_STATES,):
            raise ValueError(f"expected shape ({N_STATES},), got {x.shape}")
        return cls(*(float(v) for v in x))


@dataclass(frozen=True, eq=False)
class LinearModel:
    """``x_dot = A x + B u``, ``y = C x`` for the augmented 6-state system."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self) -> None:
        if self.A.shape != (N_STATES, N_STATES) or self.B.shape != (N_STATES, N_INPUTS):
            raise ValueError("A must be 6x6 and B 6x2")
        if self.C.shape != (N_INPUTS, N_STATES):
            raise ValueError("C must be 2x6")

    @property
    def accel_state_map(self) -> np.ndarray:
        """Rows of A producing (theta_ddot, psi_ddot)."""
        return self.A[THETA_DOT : PSI_DOT + 1]

    @property
    def accel_input_map(self) -> np.ndarray:
        """Rows of B producing (theta_ddot, psi_ddot)."""
        return self.B[THETA_DOT : PSI_DOT + 1]


def build_linear_model(params: HeliParams) -> LinearModel:
    jp = params.pitch_inertia
    jy = params.yaw_inertia

    A = np.zeros((N_STATES, N_STATES))
    A[THETA, THETA_DOT] = 1.0
    A[PSI, PSI_DOT] = 1.0
    A[THETA_DOT, THETA_DOT] = -params.B_p / jp
    A[PSI_DOT, PSI_DOT] = -params.B_y / jy
    A[I_THETA, THETA] = 1.0
    A[I_PSI, PSI] = 1.0

    B = np.zeros((N_STATES, N_INPUTS))
    B[THETA_DOT] = [params.K_pp / jp, params.K_py / jp]
    B[PSI_DOT] = [params.K_yp / jy, params.K_yy / jy]

    C = np.zeros((N_INPUTS, N_STATES))
    C[0, THETA] = 1.0
    C[1, PSI] = 1.0
    return LinearModel(A, B, C)


def dynamics(model: LinearModel, x: np.ndarray, u: np.ndarray, ref=(0.0, 0.0)) -> np.ndarray:
    """State derivative with the integral rows driven by the tracking error.

    Rows 1-4 are ``A x + B u``; rows 5-6 are ``theta - theta_d`` and
    ``psi - psi_d``. With ``ref = 0`` this is exactly ``A x + B u``.
    """
    xdot = model.A @ x + model.B @ u
    xdot[I_THETA] -= ref[0]
    xdot[I_PSI] -= ref[1]
    return xdot


def saturate(u: np.ndarray, params: HeliParams) -> tuple[np.ndarray, np.ndarray]:
    """Clamp voltages to the actuator box; returns ``(u_sat, clamped_flags)``."""
    u = np.asarray(u, dtype=float)
    limit = params.u_max
    u_sat = np.clip(u, -limit, limit)
    return u_sat, u_sat != u


def perturb_params(params: HeliParams, relative_deltas: Mapping[str, float]) -> HeliParams:
    """Scale each named parameter by ``1 + delta``.

    Used to build a perturbed plant while controllers keep nominal gains.
    """
    names = {f.name for f in dataclasses.fields(params)}
    changes = {}
    for name, delta in relative_deltas.items():
        if name not in names:
            raise KeyError(f"unknown parameter {name!r}")
        changes[name] = getattr(params, name) * (1.0 + delta)
    return dataclasses.replace(params, **changes)
