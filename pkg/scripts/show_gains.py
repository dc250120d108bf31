"""Print the synthesized LQR-PID gain and its certificate for the default rig."""

from heli_ilqr.io import format_gains
from heli_ilqr.model import HeliParams, build_linear_model
from heli_ilqr.riccati import LqrWeights, solve_care

if __name__ == "__main__":
    model = build_linear_model(HeliParams())
    weights = LqrWeights.default()
    print(format_gains(solve_care(model.A, model.B, weights), weights, model.A, model.B))
