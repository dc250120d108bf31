"""Fixed-step closed-loop simulation of the helicopter experiments.

One control tick: sample reference, measure (outputs plus any output-injected
disturbance), update derivative estimates, compute and saturate the control,
then integrate the plant across the tick with RK4 substeps while the control
and disturbances are held.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from heli_ilqr.controllers import (
    ControllerState,
    DerivativeEstimator,
    PidGains,
    UltraLocalConfig,
    estimate_F,
    ilqr_pid_control,
    lqr_pid_control,
    oracle_ilqr_pid_control,
    partition_gain,
    update_integral,
)
from heli_ilqr.model import (
    HeliParams,
    LinearModel,
    State,
    build_linear_model,
    dynamics,
    perturb_params,
    saturate,
)
from heli_ilqr.riccati import CareSolution, LqrWeights, solve_care

logger = logging.getLogger(__name__)

DEG = math.pi / 180.0
DIVERGENCE_LIMIT = 1e6
CONTROLLERS = ("lqr_pid", "ilqr_pid")
AXIS_MASKS = {"pitch": np.array([1.0, 0.0]), "yaw": np.array([0.0, 1.0]), "both": np.array([1.0, 1.0])}


class SimulationError(RuntimeError):
    pass


# --------------------------------------------------------------------------- references


@dataclass(frozen=True)
class ReferenceSpec:
    """Pitch reference waveform; yaw is held at ``yaw``.

    ``square``: ``offset + amplitude`` for the first half of each period,
    ``offset - amplitude`` for the second. ``constant``: ``offset``.
    """

    kind: str = "square"
    amplitude: float = 10.0 * DEG
    period: float = 20.0
    offset: float = 0.0
    yaw: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("square", "constant"):
            raise ValueError(f"unknown reference kind {self.kind!r}")
        if self.kind == "square" and not self.period > 0:
            raise ValueError("square reference needs period > 0")
        if not all(math.isfinite(v) for v in (self.amplitude, self.offset, self.yaw)):
            raise ValueError("reference values must be finite")


def square_reference(t: float, spec: ReferenceSpec) -> float:
    if spec.kind == "constant":
        return spec.offset
    if t % spec.period < spec.period / 2:
        return spec.offset + spec.amplitude
    return spec.offset - spec.amplitude


class ReferencePrefilter:
    """Critically damped second-order filter supplying smooth r, r_dot, r_ddot.

    ``r'' = wn^2 (target - r) - 2 wn r'`` per axis, advanced by one RK4 step
    of ``dt`` per call with the target held.
    """

    def __init__(self, omega_n: float, r0, dt: float):
        if omega_n <= 0:
            raise ValueError("omega_n must be positive")
        self.omega_n = omega_n
        self.r = np.array(r0, dtype=float)
        self.r_dot = np.zeros_like(self.r)
        m = len(self.r)
        eye, zero = np.eye(m), np.zeros((m, m))
        w = omega_n
        F = np.block([[zero, eye], [-w * w * eye, -2.0 * w * eye]])
        G = np.vstack([zero, w * w * eye])
        self._step = HeldInputPropagator(F, G, dt, 1)

    def accel(self, r, r_dot, target):
        w = self.omega_n
        return w * w * (target - r) - 2.0 * w * r_dot

    def outputs(self, target):
        return self.r.copy(), self.r_dot.copy(), self.accel(self.r, self.r_dot, target)

    def advance(self, target) -> None:
        m = len(self.r)
        z = self._step(np.concatenate([self.r, self.r_dot]), np.asarray(target, dtype=float))
        self.r, self.r_dot = z[:m], z[m:]


# --------------------------------------------------------------------------- disturbances


DISTURBANCE_DEFAULTS = {
    "none": dict(injection="output", axis="yaw"),
    "pulse": dict(injection="output", axis="yaw", magnitude=10.0 * DEG, period=35.0, delay=25.0, width=0.1),
    "sine": dict(injection="output", axis="pitch", magnitude=10.0 * DEG, omega=25.0, phase=10.0),
    "wind": dict(injection="input", axis="both", mean=2.0, noise=3.0, cutoff=20.0),
}


@dataclass(frozen=True)
class DisturbanceSpec:
    """Disturbance signal and where it enters the loop.

    Unset parameters take the per-kind defaults. Pulse and sine magnitudes are
    radians; wind ``mean``/``noise`` are volts and ``cutoff`` is rad/s.
    """

    kind: str = "none"
    injection: Optional[str] = None
    axis: Optional[str] = None
    magnitude: Optional[float] = None
    period: Optional[float] = None
    delay: Optional[float] = None
    width: Optional[float] = None
    omega: Optional[float] = None
    phase: Optional[float] = None
    mean: Optional[float] = None
    noise: Optional[float] = None
    cutoff: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in DISTURBANCE_DEFAULTS:
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        for key, value in DISTURBANCE_DEFAULTS[self.kind].items():
            if getattr(self, key) is None:
                object.__setattr__(self, key, value)
        if self.injection not in ("output", "input"):
            raise ValueError(f"injection must be 'output' or 'input', got {self.injection!r}")
        if self.axis not in AXIS_MASKS:
            raise ValueError(f"axis must be one of {sorted(AXIS_MASKS)}, got {self.axis!r}")
        if self.kind == "pulse":
            if not 0 < self.width < 1:
                raise ValueError("pulse width fraction must lie in (0, 1)")
            if not self.period > 0:
                raise ValueError("pulse period must be positive")
        if self.kind == "wind" and not self.cutoff > 0:
            raise ValueError("wind cutoff must be positive")
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and not math.isfinite(v):
                raise ValueError(f"disturbance {f.name} must be finite")

    @property
    def mask(self) -> np.ndarray:
        return AXIS_MASKS[self.axis]


def pulse_disturbance(t: float, spec: DisturbanceSpec) -> float:
    if t < spec.delay:
        return 0.0
    return spec.magnitude if (t - spec.delay) % spec.period < spec.width * spec.period else 0.0


def sine_disturbance(t: float, spec: DisturbanceSpec) -> float:
    return spec.magnitude * math.sin(spec.omega * t + spec.phase)


def wind_gust(n_samples: int, dt: float, spec: DisturbanceSpec, seed: int) -> np.ndarray:
    """Voltage offset: ``mean + noise * n_k`` with ``n_k`` first-order filtered U(-1, 1).

    The filter is the backward-Euler discretisation of ``n' = cutoff (w - n)``
    started at zero; identical ``(seed, grid)`` gives identical samples.
    """
    rng = np.random.default_rng(seed)
    white = rng.uniform(-1.0, 1.0, size=n_samples)
    a = dt * spec.cutoff / (1.0 + dt * spec.cutoff)
    filtered = np.empty(n_samples)
    level = 0.0
    for k in range(n_samples):
        level += a * (white[k] - level)
        filtered[k] = level
    return spec.mean + spec.noise * filtered


def disturbance_series(t: np.ndarray, dt: float, spec: DisturbanceSpec, seed: int) -> np.ndarray:
    if spec.kind == "none":
        return np.zeros_like(t)
    if spec.kind == "pulse":
        return np.array([pulse_disturbance(tk, spec) for tk in t])
    if spec.kind == "sine":
        return spec.magnitude * np.sin(spec.omega * t + spec.phase)
    return wind_gust(len(t), dt, spec, seed)


# --------------------------------------------------------------------------- scenario & trace


@dataclass(frozen=True, eq=False)
class Scenario:
    """One closed-loop experiment.

    Gains are always synthesized from ``params`` (the nominal model); the plant
    is ``params`` perturbed by ``plant_deltas``. ``velocity_source`` selects
    whether the D term uses the differentiated measurement (``measured``) or
    the true angular rates (``state``). ``feedback="continuous"`` evaluates
    the control law inside every RK4 stage from the exact state with the exact
    ``F`` (no estimator, no saturation allowed, no reference prefilter); it
    exists for verification.
    """

    name: str = "nominal"
    duration: float = 45.0
    dt_plant: float = 0.0005
    dt_control: float = 0.002
    reference: ReferenceSpec = field(default_factory=ReferenceSpec)
    disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    plant_deltas: Mapping[str, float] = field(default_factory=dict)
    controller: str = "ilqr_pid"
    initial_state: State = field(default_factory=lambda: State(theta=-40.5 * DEG))
    seed: int = 0
    params: HeliParams = field(default_factory=HeliParams)
    weights: LqrWeights = field(default_factory=LqrWeights.default)
    ultra_local: UltraLocalConfig = field(default_factory=UltraLocalConfig)
    tau_f: float = 0.02
    stencil: int = 4
    velocity_source: str = "measured"
    prefilter_wn: Optional[float] = 2.0
    feedback: str = "sampled"

    def __post_init__(self) -> None:
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if not (self.dt_plant > 0 and self.dt_control > 0):
            raise ValueError("time steps must be positive")
        ratio = self.dt_control / self.dt_plant
        if abs(ratio - round(ratio)) > 1e-9 * ratio or round(ratio) < 1:
            raise ValueError(
                f"dt_control ({self.dt_control}) must be an integer multiple of dt_plant ({self.dt_plant})"
            )
        if self.controller not in CONTROLLERS:
            raise ValueError(f"controller must be one of {CONTROLLERS}, got {self.controller!r}")
        if self.velocity_source not in ("measured", "state"):
            raise ValueError("velocity_source must be 'measured' or 'state'")
        if self.feedback not in ("sampled", "continuous"):
            raise ValueError("feedback must be 'sampled' or 'continuous'")
        if self.prefilter_wn is not None and not self.prefilter_wn > 0:
            raise ValueError("prefilter_wn must be positive when set")
        perturb_params(self.params, self.plant_deltas)  # validates names and positivity

    @property
    def substeps(self) -> int:
        return int(round(self.dt_control / self.dt_plant))

    @property
    def n_ticks(self) -> int:
        return int(round(self.duration / self.dt_control))


@dataclass(frozen=True, eq=False)
class Trace:
    """Uniformly sampled record of one run (one row per control tick).

    ``ref`` is the desired trajectory fed to the controller (prefiltered when
    a prefilter is configured), ``target`` the raw commanded waveform. ``y`` is
    the measured output (angles plus output-injected disturbance); ``x`` the
    true plant state; ``u`` the applied (saturated) input.
    """

    t: np.ndarray
    ref: np.ndarray
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    F_hat: np.ndarray
    disturbance: np.ndarray
    scenario: str = ""
    controller: str = ""
    target: Optional[np.ndarray] = None
    integral: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.target is None:
            object.__setattr__(self, "target", self.ref)
        if self.integral is None:
            object.__setattr__(self, "integral", np.zeros((len(self.t), 2)))
        n = len(self.t)
        for name in ("ref", "target", "x", "y", "u", "F_hat", "disturbance", "integral"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"trace field {name} has inconsistent length")
        for name in ("t", "ref", "x", "y", "u", "F_hat", "disturbance"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"trace field {name} has non-finite entries")
        if n > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("trace time must be strictly increasing")

    def __len__(self) -> int:
        return len(self.t)

    def error(self, axis: int) -> np.ndarray:
        return self.y[:, axis] - self.ref[:, axis]


# --------------------------------------------------------------------------- integration


def rk4_step(f: Callable[[float, np.ndarray], np.ndarray], x: np.ndarray, t: float, dt: float) -> np.ndarray:
    """Classical RK4 step; inputs held by ``f`` over the step."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    k1 = f(t, x)
    k2 = f(t + dt / 2, x + dt / 2 * k1)
    k3 = f(t + dt / 2, x + dt / 2 * k2)
    k4 = f(t + dt, x + dt * k3)
    if not (np.all(np.isfinite(k1)) and np.all(np.isfinite(k2))
            and np.all(np.isfinite(k3)) and np.all(np.isfinite(k4))):
        raise SimulationError(f"non-finite derivative at t={t}")
    return x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


class HeldInputPropagator:
    """``n`` RK4 substeps of ``x' = A x + G w`` (``w`` held) as one affine map.

    For a linear system one RK4 step is ``x <- R(hA) x + h S(hA) G w`` with
    ``R(Z) = I + Z + Z^2/2 + Z^3/6 + Z^4/24`` and
    ``S(Z) = I + Z/2 + Z^2/6 + Z^3/24``; composing ``n`` of them gives the
    tick map. Same arithmetic as calling :func:`rk4_step` n times, fewer
    Python-level operations.
    """

    def __init__(self, A: np.ndarray, G: np.ndarray, h: float, n: int):
        Z = h * A
        eye = np.eye(A.shape[0])
        Z2 = Z @ Z
        Z3 = Z2 @ Z
        R = eye + Z + Z2 / 2 + Z3 / 6 + Z3 @ Z / 24
        S = eye + Z / 2 + Z2 / 6 + Z3 / 24
        step_in = h * S @ G
        Phi = eye
        Gam = np.zeros_like(G)
        for _ in range(n):
            Phi = R @ Phi
            Gam = R @ Gam + step_in
        self.Phi = Phi
        self.Gamma = Gam

    def __call__(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        return self.Phi @ x + self.Gamma @ w


def plant_input_matrix(model: LinearModel) -> np.ndarray:
    """Columns for ``[u_p, u_y, theta_d, psi_d]`` in the plant derivative."""
    G = np.zeros((6, 4))
    G[:, :2] = model.B
    G[4, 2] = -1.0
    G[5, 3] = -1.0
    return G


# --------------------------------------------------------------------------- closed loop


def synthesize_gains(params: HeliParams, weights: LqrWeights) -> tuple[CareSolution, PidGains]:
    model = build_linear_model(params)
    solution = solve_care(model.A, model.B, weights)
    return solution, partition_gain(solution.K)


def run_closed_loop(scenario: Scenario, gains: Optional[PidGains] = None) -> Trace:
    """Simulate ``scenario``; deterministic given the scenario (incl. seed)."""
    if gains is None:
        _, gains = synthesize_gains(scenario.params, scenario.weights)
    plant_params = perturb_params(scenario.params, scenario.plant_deltas)
    plant = build_linear_model(plant_params)
    if scenario.feedback == "continuous":
        return _run_continuous(scenario, plant, plant_params, gains)
    return _run_sampled(scenario, plant, plant_params, gains)


def _run_sampled(scenario: Scenario, plant: LinearModel, plant_params: HeliParams, gains: PidGains) -> Trace:
    dtc = scenario.dt_control
    n = scenario.n_ticks
    t = np.arange(n + 1) * dtc
    dist = disturbance_series(t, dtc, scenario.disturbance, scenario.seed)
    mask = scenario.disturbance.mask
    output_injection = scenario.disturbance.injection == "output"
    cfg = scenario.ultra_local
    intelligent = scenario.controller == "ilqr_pid"
    use_measured_rate = scenario.velocity_source == "measured"

    stepper = HeldInputPropagator(plant.A, plant_input_matrix(plant), scenario.dt_plant, scenario.substeps)
    state = ControllerState(estimator=DerivativeEstimator(dtc, scenario.tau_f, scenario.stencil))
    x = scenario.initial_state.as_array()
    ref_spec = scenario.reference
    prefilter = None
    if scenario.prefilter_wn is not None:
        prefilter = ReferencePrefilter(scenario.prefilter_wn, [square_reference(0.0, ref_spec), ref_spec.yaw], dtc)

    rec_ref = np.empty((n + 1, 2))
    rec_target = np.empty((n + 1, 2))
    rec_int = np.empty((n + 1, 2))
    rec_x = np.empty((n + 1, 6))
    rec_y = np.empty((n + 1, 2))
    rec_u = np.empty((n + 1, 2))
    rec_F = np.zeros((n + 1, 2))
    zero2 = np.zeros(2)

    for k in range(n + 1):
        target = np.array([square_reference(t[k], ref_spec), ref_spec.yaw])
        if prefilter is not None:
            ref, ref_dot, ref_ddot = prefilter.outputs(target)
        else:
            ref, ref_dot, ref_ddot = target, zero2, zero2

        y = x[:2] + dist[k] * mask if output_injection else x[:2].copy()
        rate_hat, accel_hat = state.estimator.update(y)
        e = y - ref
        e_dot = (rate_hat if use_measured_rate else x[2:4]) - ref_dot
        if intelligent:
            state.F_hat = estimate_F(accel_hat, cfg, state.u_prev) if state.estimator.warmed_up else zero2
            u = ilqr_pid_control(state.F_hat, ref_ddot, gains, e, e_dot, state.integral_error, cfg)
        else:
            u = lqr_pid_control(gains, e, e_dot, state.integral_error)
        u_sat, clamped = saturate(u, plant_params)

        rec_ref[k], rec_target[k], rec_x[k], rec_y[k], rec_u[k], rec_F[k] = ref, target, x, y, u_sat, state.F_hat
        rec_int[k] = state.integral_error
        if k == n:
            break

        state.integral_error = update_integral(state.integral_error, e, dtc, clamped)
        state.u_prev = u_sat
        u_plant = u_sat + dist[k] * mask if not output_injection else u_sat
        x = stepper(x, np.concatenate([u_plant, ref]))
        if prefilter is not None:
            prefilter.advance(target)
        if not np.all(np.abs(x) < DIVERGENCE_LIMIT):
            raise SimulationError(
                f"{scenario.name}/{scenario.controller}: state diverged at t={t[k + 1]:.4f} s: {x}"
            )

    return Trace(t=t, ref=rec_ref, x=rec_x, y=rec_y, u=rec_u, F_hat=rec_F, disturbance=dist,
                 scenario=scenario.name, controller=scenario.controller, target=rec_target,
                 integral=rec_int)


def _run_continuous(scenario: Scenario, plant: LinearModel, plant_params: HeliParams,
                    gains: PidGains) -> Trace:
    dtc, dtp = scenario.dt_control, scenario.dt_plant
    n = scenario.n_ticks
    t = np.arange(n + 1) * dtc
    dist = disturbance_series(t, dtc, scenario.disturbance, scenario.seed)
    mask = scenario.disturbance.mask
    output_injection = scenario.disturbance.injection == "output"
    cfg = scenario.ultra_local
    intelligent = scenario.controller == "ilqr_pid"
    ref_spec = scenario.reference
    zero2 = np.zeros(2)

    def control(x, ref, d):
        y = x[:2] + d * mask if output_injection else x[:2]
        e, e_dot, e_int = y - ref, x[2:4], x[4:6]
        if intelligent:
            u, F = oracle_ilqr_pid_control(plant, x, zero2, gains, e, e_dot, e_int, cfg)
        else:
            u, F = lqr_pid_control(gains, e, e_dot, e_int), zero2
        if np.any(np.abs(u) > plant_params.u_max):
            raise SimulationError("continuous feedback requires unsaturated inputs")
        return u, F

    x = scenario.initial_state.as_array()
    rec = {name: np.empty((n + 1, w)) for name, w in (("ref", 2), ("x", 6), ("y", 2), ("u", 2), ("F", 2))}
    for k in range(n + 1):
        ref = np.array([square_reference(t[k], ref_spec), ref_spec.yaw])
        d = dist[k]
        u_in = d * mask if not output_injection else zero2
        u, F = control(x, ref, d if output_injection else 0.0)
        rec["ref"][k], rec["x"][k], rec["u"][k], rec["F"][k] = ref, x, u, F
        rec["y"][k] = x[:2] + d * mask if output_injection else x[:2]
        if k == n:
            break

        def f(_t, z, ref=ref, d=d, u_in=u_in):
            u_stage, _ = control(z, ref, d if output_injection else 0.0)
            return dynamics(plant, z, u_stage + u_in, ref)

        for j in range(scenario.substeps):
            x = rk4_step(f, x, t[k] + j * dtp, dtp)
        if not np.all(np.abs(x) < DIVERGENCE_LIMIT):
            raise SimulationError(f"{scenario.name}: state diverged at t={t[k + 1]:.4f} s")

    return Trace(t=t, ref=rec["ref"], x=rec["x"], y=rec["y"], u=rec["u"], F_hat=rec["F"],
                 disturbance=dist, scenario=scenario.name, controller=scenario.controller,
                 integral=rec["x"][:, 4:6].copy())


def run_state_feedback(A: np.ndarray, B: np.ndarray, K: np.ndarray, x0, dt: float, duration: float) -> Trace:
    """Regulate ``x' = A x + B u`` with continuous ``u = -K x`` (RK4 at ``dt``).

    Returns a generic trace (``ref``/``y``/``F_hat`` empty-width) suitable for
    :func:`heli_ilqr.riccati.evaluate_lqr_cost`.
    """
    A, B, K = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (A, B, K))
    closed = A - B @ K
    n = int(round(duration / dt))
    x = np.asarray(x0, dtype=float)
    xs = np.empty((n + 1, len(x)))
    xs[0] = x
    for k in range(n):
        x = rk4_step(lambda _t, z: closed @ z, x, k * dt, dt)
        xs[k + 1] = x
    us = -(xs @ K.T)
    t = np.arange(n + 1) * dt
    empty = np.zeros((n + 1, 0))
    return Trace(t=t, ref=empty, x=xs, y=empty, u=us, F_hat=empty, disturbance=np.zeros(n + 1))
