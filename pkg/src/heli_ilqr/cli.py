"""Command-line front end: run scenario files under both controllers.

    heli-ilqr run --suite standard --out results/
    heli-ilqr run --scenario my.scn --controller ilqr --emit csv,report
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from heli_ilqr.io import emit_csv, format_gains, parse_scenario_file
from heli_ilqr.metrics import PUBLISHED, compare_report
from heli_ilqr.model import build_linear_model
from heli_ilqr.simulate import Scenario, SimulationError, run_closed_loop, synthesize_gains

logger = logging.getLogger("heli_ilqr")

CONTROLLER_CHOICES = {"lqr": ("lqr_pid",), "ilqr": ("ilqr_pid",), "both": ("lqr_pid", "ilqr_pid")}
EMIT_CHOICES = ("csv", "report", "gains")
REPORT_INTERVALS = ((26.0, 30.0), (0.0, 45.0))


@dataclass
class RunConfig:
    scenario_paths: list[Path]
    out_dir: Path = Path("results")
    controllers: tuple[str, ...] = ("lqr_pid", "ilqr_pid")
    seed: Optional[int] = None
    emit: frozenset[str] = field(default_factory=lambda: frozenset(EMIT_CHOICES))
    jobs: int = 1


def bundled_suite(name: str = "standard") -> Path:
    return Path(str(resources.files("heli_ilqr") / "scenarios" / name))


def resolve_suite(arg: str) -> list[Path]:
    path = Path(arg)
    if not path.is_dir():
        bundled = bundled_suite(arg)
        if not bundled.is_dir():
            raise FileNotFoundError(f"suite directory not found: {arg}")
        path = bundled
    files = sorted(path.glob("*.scn"))
    if not files:
        raise FileNotFoundError(f"no .scn files in {path}")
    return files


def _simulate(scenario: Scenario):
    return run_closed_loop(scenario)


def run_suite(config: RunConfig) -> int:
    """Parse every scenario first, simulate, then write artifacts.

    Nothing is written unless every scenario parses and simulates.
    """
    if not config.scenario_paths:
        logger.error("no scenarios given")
        return 2
    scenarios: list[Scenario] = []
    failed = False
    for path in config.scenario_paths:
        try:
            scenario = parse_scenario_file(path)
        except (OSError, ValueError) as exc:
            logger.error("%s: %s", path, exc)
            failed = True
            continue
        if config.seed is not None:
            scenario = dataclasses.replace(scenario, seed=config.seed)
        scenarios.append(scenario)
    if failed:
        return 1
    names = [s.name for s in scenarios]
    if len(set(names)) != len(names):
        logger.error("duplicate scenario names: %s", names)
        return 1
    scenarios.sort(key=lambda s: s.name)

    jobs = [dataclasses.replace(s, controller=c) for s in scenarios for c in config.controllers]
    try:
        if config.jobs > 1:
            with ProcessPoolExecutor(max_workers=config.jobs) as pool:
                traces = list(pool.map(_simulate, jobs))
        else:
            traces = [_simulate(job) for job in jobs]
    except (SimulationError, ValueError) as exc:
        logger.error("simulation failed: %s", exc)
        return 1

    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    by_name: dict[str, dict[str, object]] = {}
    for job, trace in zip(jobs, traces):
        by_name.setdefault(job.name, {})[job.controller] = trace
        if "csv" in config.emit:
            emit_csv(trace, out / f"{job.name}_{job.controller}.csv")

    if "report" in config.emit and len(config.controllers) == 2:
        for scenario in scenarios:
            pair = by_name[scenario.name]
            span = float(pair["lqr_pid"].t[-1])
            intervals = [iv for iv in REPORT_INTERVALS if iv[1] <= span + 1e-9]
            report = compare_report(pair["lqr_pid"], pair["ilqr_pid"], intervals,
                                    title=f"Tracking errors: {scenario.name}",
                                    published=PUBLISHED.get(scenario.name))
            (out / f"{scenario.name}_report.txt").write_text(report.render(), encoding="utf-8")

    if "gains" in config.emit:
        seen = set()
        blocks = []
        for scenario in scenarios:
            key = (scenario.params, tuple(scenario.weights.Q.ravel()), tuple(scenario.weights.R.ravel()))
            if key in seen:
                continue
            seen.add(key)
            solution, _ = synthesize_gains(scenario.params, scenario.weights)
            model = build_linear_model(scenario.params)
            blocks.append(format_gains(solution, scenario.weights, model.A, model.B))
        (out / "gains.txt").write_text("\n".join(blocks), encoding="utf-8")

    for scenario in scenarios:
        logger.info("scenario %s done", scenario.name)
    return 0


def _parse_emit(text: str) -> frozenset[str]:
    items = frozenset(v.strip() for v in text.split(",") if v.strip())
    bad = items - set(EMIT_CHOICES)
    if bad:
        raise argparse.ArgumentTypeError(f"unknown emit flags: {sorted(bad)}")
    return items


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heli-ilqr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="simulate scenarios and write CSVs, reports and gains")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--suite", help="directory of .scn files, or a bundled suite name ('standard')")
    src.add_argument("--scenario", nargs="+", type=Path, help="one or more .scn files")
    run.add_argument("--controller", choices=sorted(CONTROLLER_CHOICES), default="both")
    run.add_argument("--out", type=Path, default=Path("results"))
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--emit", type=_parse_emit, default=frozenset(EMIT_CHOICES),
                     help="comma-separated subset of csv,report,gains")
    run.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "run":
        try:
            paths = resolve_suite(args.suite) if args.suite else list(args.scenario)
        except FileNotFoundError as exc:
            logger.error("%s", exc)
            return 1
        config = RunConfig(scenario_paths=paths, out_dir=args.out,
                           controllers=CONTROLLER_CHOICES[args.controller], seed=args.seed,
                           emit=args.emit, jobs=max(1, args.jobs))
        return run_suite(config)
    return 2


if __name__ == "__main__":
    sys.exit(main())
