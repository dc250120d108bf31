"""Model-free LQR-PID control of a 2-DoF laboratory helicopter.

Gain synthesis (continuous Riccati equation), the classic LQR-PID law, its
intelligent ultra-local-model variant, a fixed-step closed-loop simulator and
tracking-error reports.
"""

from heli_ilqr.model import HeliParams, LinearModel, State, build_linear_model
from heli_ilqr.riccati import CareSolution, LqrWeights, solve_care, solve_lyapunov
from heli_ilqr.controllers import PidGains, UltraLocalConfig, partition_gain
from heli_ilqr.simulate import Scenario, Trace, run_closed_loop
from heli_ilqr.metrics import ErrorStats, compare_report, compute_stats

__all__ = [
    "CareSolution",
    "ErrorStats",
    "HeliParams",
    "LinearModel",
    "LqrWeights",
    "PidGains",
    "Scenario",
    "State",
    "Trace",
    "UltraLocalConfig",
    "build_linear_model",
    "compare_report",
    "compute_stats",
    "partition_gain",
    "run_closed_loop",
    "solve_care",
    "solve_lyapunov",
]
