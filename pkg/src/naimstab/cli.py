"""Command line front end.

Subcommands: ``simulate``, ``sweep``, ``diagnose``, ``list-scenarios``.
A scenario argument is either a path to a JSON file or the name of a
bundled scenario.  Output directory resolution: ``--out`` if given, else
``$NAIMSTAB_OUT/<scenario>_<command>``, else ``./naimstab_out/...``.

Exit codes: 0 success, 2 bad arguments or scenario validation failure,
3 numerical failure during a run, 4 certificate failure under --strict.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .manifolds import GeometryError
from .feedback import ControlError
from .integrate import SimulationError
from .diagnostics import NotYetConvergedError
from .scenario import (
    OUT_ENV_VAR,
    Scenario,
    ScenarioError,
    bundled_scenario_names,
    bundled_scenario_path,
    load_scenario,
    run_diagnose,
    run_simulate,
    run_sweep,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_CERTIFICATE = 4


def _resolve_scenario(arg: str) -> Scenario:
    path = Path(arg)
    if not path.is_file() and "/" not in arg and not arg.endswith(".json"):
        path = bundled_scenario_path(arg)
    return load_scenario(path)


def _out_dir(args: argparse.Namespace, scenario: Scenario, command: str) -> Path:
    if args.out is not None:
        return Path(args.out)
    root = Path(os.environ.get(OUT_ENV_VAR, "naimstab_out"))
    return root / f"{scenario.name}_{command}"


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("scenario", help="scenario file path or bundled scenario name")
    p.add_argument("--out", default=None, help="output directory (default: see module docs)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="naimstab",
        description="Closed-loop simulation and attractivity certificates "
        "for velocity-field tracking on the sphere and the rotation group.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="integrate the closed loop and write CSV tables")
    _add_common(p_sim)
    p_sim.add_argument(
        "--epsilon", type=float, default=None, help="override the scenario gain"
    )

    p_sweep = sub.add_parser("sweep", help="repeat a run across gains and fit decay rates")
    _add_common(p_sweep)
    p_sweep.add_argument(
        "--epsilons",
        default=None,
        help="comma separated gains; default: the scenario's epsilon list",
    )

    p_diag = sub.add_parser("diagnose", help="run the enabled diagnostics only")
    _add_common(p_diag)
    p_diag.add_argument(
        "--strict",
        action="store_true",
        help="exit with status 4 if any certificate fails",
    )

    sub.add_parser("list-scenarios", help="list bundled scenarios")
    return parser


def _cmd_simulate(args: argparse.Namespace) -> int:
    scenario = _resolve_scenario(args.scenario)
    if args.epsilon is not None:
        if args.epsilon <= 0:
            raise ScenarioError("--epsilon must be positive")
        scenario.epsilon = args.epsilon
    out = _out_dir(args, scenario, "simulate")
    summary = run_simulate(scenario, out)
    print(
        f"simulate {scenario.name}: {summary['trajectories']} trajectories, "
        f"epsilon={summary['epsilon']}, wrote {out}"
    )
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    scenario = _resolve_scenario(args.scenario)
    if args.epsilons is not None:
        try:
            epsilons = [float(tok) for tok in args.epsilons.split(",") if tok.strip()]
        except ValueError as exc:
            raise ScenarioError(f"--epsilons: {exc}") from exc
    elif isinstance(scenario.epsilon, list):
        epsilons = scenario.epsilon
    else:
        epsilons = [scenario.epsilon]
    out = _out_dir(args, scenario, "sweep")
    summary = run_sweep(scenario, epsilons, out)
    for eps, rate, rate_sq, ok in summary["rows"]:
        print(
            f"epsilon={eps:g}: fitted residual-norm rate {rate:.6f} "
            f"(expected {1.0 / eps:.6f}), sandwich_ok={bool(ok)}"
        )
    print(f"sweep {scenario.name}: wrote {out}")
    return EXIT_OK


def _cmd_diagnose(args: argparse.Namespace) -> int:
    scenario = _resolve_scenario(args.scenario)
    out = _out_dir(args, scenario, "diagnose")
    report, failed = run_diagnose(scenario, out)
    if "sandwich" in report:
        n_ok = sum(v["ok"] for v in report["sandwich"])
        print(f"sandwich: {n_ok}/{len(report['sandwich'])} trajectories inside the envelope")
    if "phase" in report:
        for i, rep in enumerate(report["phase"]):
            print(
                f"phase ic{i:02d}: rate={rep['rate']:.6f}, "
                f"terminal_distance={rep['terminal_distance']:.3e}"
            )
    if "bunching" in report:
        b = report["bunching"]
        status = "all passed" if b["all_passed"] else f"{b['failures']} failures"
        print(f"bunching: {b['n_points']} base points x taus={b['taus']}: {status}")
    print(f"diagnose {scenario.name}: wrote {out}")
    if failed and args.strict:
        print("certificate failure under --strict", file=sys.stderr)
        return EXIT_CERTIFICATE
    return EXIT_OK


def _cmd_list(_args: argparse.Namespace) -> int:
    from .scenario import load_scenario as _load

    for name in bundled_scenario_names():
        scenario = _load(bundled_scenario_path(name))
        print(f"{name}: {scenario.description}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    handlers = {
        "simulate": _cmd_simulate,
        "sweep": _cmd_sweep,
        "diagnose": _cmd_diagnose,
        "list-scenarios": _cmd_list,
    }
    try:
        return handlers[args.command](args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SimulationError, GeometryError, ControlError, NotYetConvergedError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
