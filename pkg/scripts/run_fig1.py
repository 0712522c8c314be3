"""Produce the headline figure data: fig1 trajectories plus a gain sweep.

Writes two run directories (simulate + sweep) whose CSV tables and manifests
are everything a plotting frontend needs.
"""

import argparse
from pathlib import Path

from naimstab.scenario import (
    bundled_scenario_path,
    load_scenario,
    run_simulate,
    run_sweep,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="naimstab_out", help="output root directory")
    args = parser.parse_args()
    root = Path(args.out)

    fig1 = load_scenario(bundled_scenario_path("fig1"))
    summary = run_simulate(fig1, root / "fig1_simulate")
    print(f"fig1: {summary['trajectories']} trajectories -> {root / 'fig1_simulate'}")
    diag = summary.get("diagnostics", {})
    if "sandwich" in diag:
        n_ok = sum(v["ok"] for v in diag["sandwich"])
        print(f"  sandwich: {n_ok}/{len(diag['sandwich'])} inside the envelope")
    for i, rep in enumerate(diag.get("phase", [])):
        print(f"  phase ic{i:02d}: rate {rep['rate']:.4f} (1/eps = {1 / fig1.epsilon:.4f})")
    if "bunching" in diag:
        b = diag["bunching"]
        print(f"  bunching: {b['n_points']} points, all_passed={b['all_passed']}")

    sweep = load_scenario(bundled_scenario_path("sweep_demo"))
    result = run_sweep(sweep, list(sweep.epsilon), root / "sweep_demo_sweep")
    for eps, rate, _, ok in result["rows"]:
        print(f"sweep eps={eps:g}: fitted rate {rate:.4f} (1/eps = {1 / eps:.4f}), ok={bool(ok)}")
    print(f"sweep: -> {root / 'sweep_demo_sweep'}")


if __name__ == "__main__":
    main()
