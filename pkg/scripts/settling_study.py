"""Pitch settling after each square-wave edge, with and without the reference prefilter.

Without a prefilter the desired acceleration is zero and the closed loop
follows the raw steps; the prefilter supplies a smooth r, r', r'' instead.
"""

import argparse
import dataclasses

from heli_ilqr.metrics import settling_times
from heli_ilqr.simulate import DEG, Scenario, run_closed_loop


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--band-deg", type=float, default=0.2)
    parser.add_argument("--wn", type=float, nargs="*", default=[1.0, 2.0, 3.0])
    args = parser.parse_args()

    base = Scenario(duration=45.0)
    cases = [("no prefilter", None)] + [(f"wn = {w:g}", w) for w in args.wn]
    print(f"{'case':<14} {'controller':<10} settling per edge [s]")
    for label, wn in cases:
        for controller in ("lqr_pid", "ilqr_pid"):
            trace = run_closed_loop(dataclasses.replace(base, prefilter_wn=wn, controller=controller))
            edges = settling_times(trace, "pitch", args.band_deg * DEG)
            cells = " ".join("  -  " if s is None else f"{s:5.2f}" for _, s in edges)
            print(f"{label:<14} {controller:<10} {cells}")


if __name__ == "__main__":
    main()
