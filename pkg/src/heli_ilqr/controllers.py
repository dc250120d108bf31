"""LQR-PID and intelligent (ultra-local model) LQR-PID control laws.

The PID gain blocks are the column partition of the 2x6 LQR gain computed on
the state ``[theta, psi, theta_dot, psi_dot, I_theta, I_psi]``. The intelligent
law closes the loop around the ultra-local model ``y'' = F + alpha u`` with
``F`` re-estimated every tick from measured outputs and the last applied input.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from heli_ilqr.model import LinearModel

# Backward-difference stencils, newest sample first.
FIRST_DERIVATIVE_STENCIL = np.array([3.0, -4.0, 1.0]) / 2.0
SECOND_DERIVATIVE_STENCILS = {
    4: np.array([2.0, -5.0, 4.0, -1.0]),
    5: np.array([35.0, -104.0, 114.0, -56.0, 11.0]) / 12.0,
}
BUFFER_LEN = 5


@dataclass(frozen=True, eq=False)
class PidGains:
    K_P: np.ndarray
    K_D: np.ndarray
    K_I: np.ndarray

    def as_matrix(self) -> np.ndarray:
        return np.hstack([self.K_P, self.K_D, self.K_I])


def partition_gain(K: np.ndarray) -> PidGains:
    """Split a 2x6 gain into its (K_P | K_D | K_I) column blocks."""
    K = np.asarray(K, dtype=float)
    if K.shape != (2, 6):
        raise ValueError(f"expected a 2x6 gain, got {K.shape}")
    return PidGains(K[:, 0:2].copy(), K[:, 2:4].copy(), K[:, 4:6].copy())


@dataclass(frozen=True)
class UltraLocalConfig:
    """Ultra-local model ``y^(nu) = F + alpha u``; only ``nu = 2`` is supported."""

    nu: int = 2
    alpha_pitch: float = 1.3
    alpha_yaw: float = 0.43

    def __post_init__(self) -> None:
        if self.nu != 2:
            raise ValueError("only differentiation order nu = 2 is supported")
        if self.alpha_pitch == 0 or self.alpha_yaw == 0:
            raise ValueError("alpha must be nonzero on both axes")

    @property
    def alpha(self) -> np.ndarray:
        return np.array([self.alpha_pitch, self.alpha_yaw])


class DerivativeEstimator:
    """Causal first/second derivative estimates of a sampled 2-vector signal.

    Backward finite differences over a 5-sample ring buffer, each followed by
    a first-order low-pass with time constant ``tau_f`` (``0`` disables it).
    The second derivative uses the 4-sample stencil
    ``(2 y_k - 5 y_{k-1} + 4 y_{k-2} - y_{k-3}) / dt^2`` by default, or the
    5-sample third-order stencil with ``stencil=5``. Estimates are zero until
    the stencil has enough samples.
    """

    def __init__(self, dt: float, tau_f: float = 0.02, stencil: int = 4):
        if dt <= 0:
            raise ValueError("dt must be positive")
        if tau_f < 0:
            raise ValueError("tau_f must be non-negative")
        if stencil not in SECOND_DERIVATIVE_STENCILS:
            raise ValueError(f"stencil must be one of {sorted(SECOND_DERIVATIVE_STENCILS)}")
        self.dt = dt
        self.tau_f = tau_f
        self.stencil = stencil
        self.buffer: deque[np.ndarray] = deque(maxlen=BUFFER_LEN)
        self.samples_seen = 0
        self.velocity = np.zeros(2)
        self.acceleration = np.zeros(2)
        self._gain = dt / (tau_f + dt)

    def _apply(self, coeffs: np.ndarray) -> np.ndarray:
        # buffer[-1] is the newest sample
        out = np.zeros(2)
        for j, c in enumerate(coeffs):
            out += c * self.buffer[-1 - j]
        return out

    def update(self, y) -> tuple[np.ndarray, np.ndarray]:
        """Push one sample; return ``(y_dot_hat, y_ddot_hat)``."""
        self.buffer.append(np.array(y, dtype=float))
        self.samples_seen += 1
        n = len(self.buffer)
        if n >= len(FIRST_DERIVATIVE_STENCIL):
            raw = self._apply(FIRST_DERIVATIVE_STENCIL) / self.dt
            self.velocity = self.velocity + self._gain * (raw - self.velocity)
        coeffs = SECOND_DERIVATIVE_STENCILS[self.stencil]
        if n >= len(coeffs):
            raw = self._apply(coeffs) / self.dt**2
            self.acceleration = self.acceleration + self._gain * (raw - self.acceleration)
        return self.velocity.copy(), self.acceleration.copy()

    @property
    def warmed_up(self) -> bool:
        return self.samples_seen >= len(SECOND_DERIVATIVE_STENCILS[self.stencil])


def estimate_second_derivative(est: DerivativeEstimator, y) -> np.ndarray:
    return est.update(y)[1]


def estimate_F(y_ddot_hat, cfg: UltraLocalConfig, u_prev) -> np.ndarray:
    """``F_hat = y_ddot_hat - alpha * u_prev`` per axis (``u_prev`` post-saturation)."""
    return np.asarray(y_ddot_hat, dtype=float) - cfg.alpha * np.asarray(u_prev, dtype=float)


def pid_term(gains: PidGains, e, e_dot, e_int) -> np.ndarray:
    return gains.K_P @ e + gains.K_D @ e_dot + gains.K_I @ e_int


def lqr_pid_control(gains: PidGains, e, e_dot, e_int) -> np.ndarray:
    return -pid_term(gains, e, e_dot, e_int)


def ilqr_pid_control(F_hat, y_ddot_ref, gains: PidGains, e, e_dot, e_int,
                     cfg: UltraLocalConfig) -> np.ndarray:
    """``u = -(F_hat - y_ddot_ref + K_P e + K_D e_dot + K_I int e) / alpha``."""
    return -(np.asarray(F_hat) - np.asarray(y_ddot_ref) + pid_term(gains, e, e_dot, e_int)) / cfg.alpha


def update_integral(e_int, e, dt: float, saturated) -> np.ndarray:
    """Conditional integration: axes whose actuator saturated keep their integral."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    e_int = np.asarray(e_int, dtype=float)
    return np.where(np.asarray(saturated, dtype=bool), e_int, e_int + np.asarray(e) * dt)


def true_F(model: LinearModel, x, u, cfg: UltraLocalConfig) -> np.ndarray:
    """Exact lumped term ``F = y'' - alpha u`` from the plant equations."""
    y_ddot = model.accel_state_map @ x + model.accel_input_map @ u
    return y_ddot - cfg.alpha * np.asarray(u)


def oracle_ilqr_pid_control(model: LinearModel, x, y_ddot_ref, gains: PidGains, e, e_dot, e_int,
                            cfg: UltraLocalConfig) -> tuple[np.ndarray, np.ndarray]:
    """Intelligent law with ``F_hat`` replaced by the exact ``F`` at the same instant.

    ``F`` depends on the input it produces, so the loop is solved algebraically:
    the law reduces to ``y'' = y_ddot_ref - PID``, i.e.
    ``B_acc u = y_ddot_ref - PID - A_acc x``. Returns ``(u, F)``.
    """
    target = np.asarray(y_ddot_ref) - pid_term(gains, e, e_dot, e_int)
    u = np.linalg.solve(model.accel_input_map, target - model.accel_state_map @ x)
    return u, true_F(model, x, u, cfg)


@dataclass
class ControllerState:
    """Per-run mutable controller memory."""

    estimator: DerivativeEstimator
    integral_error: np.ndarray = field(default_factory=lambda: np.zeros(2))
    u_prev: np.ndarray = field(default_factory=lambda: np.zeros(2))
    F_hat: np.ndarray = field(default_factory=lambda: np.zeros(2))
