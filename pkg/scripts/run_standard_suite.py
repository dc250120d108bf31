"""Run the bundled scenario suite and print every comparison report.

    python3 scripts/run_standard_suite.py --out results/
"""

import argparse
import sys
from pathlib import Path

from heli_ilqr.cli import RunConfig, resolve_suite, run_suite


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("results"))
    parser.add_argument("--suite", default="standard")
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()
    status = run_suite(RunConfig(resolve_suite(args.suite), args.out, jobs=args.jobs))
    if status == 0:
        for report in sorted(args.out.glob("*_report.txt")):
            print(report.read_text())
    return status


if __name__ == "__main__":
    sys.exit(main())
