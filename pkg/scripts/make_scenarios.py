"""Regenerate the bundled scenario files under src/naimstab/scenarios/.

Initial conditions are snapped onto the manifold here, at full float
precision, so that loading a bundled file reports snap distances at
machine level.  Run from the repository root:

    python3 scripts/make_scenarios.py
"""

from pathlib import Path

import numpy as np

from naimstab.manifolds import SPHERE, project_tangent, retract
from naimstab.scenario import scenario_from_dict, scenario_to_json

OUT = Path(__file__).resolve().parent.parent / "src" / "naimstab" / "scenarios"


def s2_ic(q_raw, v_raw) -> dict:
    q_raw = np.asarray(q_raw, dtype=float)
    q = retract(SPHERE, q_raw / np.linalg.norm(q_raw))
    v = project_tangent(SPHERE, q, np.asarray(v_raw, dtype=float))
    return {"q": [float(x) for x in q], "v": [float(x) for x in v]}


def so3_ic(R, omega) -> dict:
    R = np.asarray(R, dtype=float)
    V = R @ np.array(
        [
            [0.0, -omega[2], omega[1]],
            [omega[2], 0.0, -omega[0]],
            [-omega[1], omega[0], 0.0],
        ]
    )
    return {
        "q": [[float(x) for x in row] for row in R],
        "v": [[float(x) for x in row] for row in V],
    }


FIG1_RAW = [
    ((1.0, 0.0, 0.0), (0.0, 0.3, 0.8)),
    ((1.0, 1.0, 1.0), (-0.5, 0.2, 0.4)),
    ((-1.0, 0.5, 0.2), (0.3, 0.3, -0.6)),
    ((0.2, -1.0, 0.5), (-0.4, 0.1, 0.2)),
    ((0.1, 0.4, -1.0), (0.6, -0.2, 0.1)),
    ((0.0, 0.0, 1.0), (0.8, -0.3, 0.0)),
]

SCENARIOS = {
    "fig1": {
        "name": "fig1",
        "description": "Equatorial rotation field on S2, six off-graph starts, "
        "gain 1.2: closed-loop solutions spiral onto reference orbits.",
        "manifold": {"kind": "sphere_s2"},
        "field": {"kind": "rotation_s2", "axis": [0.0, 0.0, 1.0]},
        "metric": {"shaping": "same"},
        "epsilon": 1.2,
        "actuation": {"kind": "fully_actuated"},
        "control": {"law": "koditschek"},
        "initial_conditions": [s2_ic(q, v) for q, v in FIG1_RAW],
        "horizon": 15.0,
        "dt": 0.001,
        "record_every": 10,
        "diagnostics": {
            "sandwich": True,
            "phase": True,
            "bunching": {"taus": [1.0], "k": 3, "n_base": 50, "epsilon": 0.1, "fd_step": 1e-05},
        },
        "seed": 0,
    },
    "so3_jets": {
        "name": "so3_jets",
        "description": "Free rigid body with inertia diag(1,2,3) and two control "
        "jets held at zero: principal-axis spin and a tumbling start.",
        "manifold": {"kind": "rotation_so3", "inertia": [1.0, 2.0, 3.0]},
        "field": {"kind": "spin_so3", "axis": [1.0, 0.0, 0.0]},
        "metric": {"shaping": "same"},
        "epsilon": 1.0,
        "actuation": {
            "kind": "linear_columns",
            "generators": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        },
        "control": {"law": "constant", "coefficients": [0.0, 0.0]},
        "initial_conditions": [
            so3_ic(np.eye(3), (1.0, 0.0, 0.0)),
            so3_ic(np.eye(3), (0.3, 0.8, -0.4)),
        ],
        "horizon": 10.0,
        "dt": 0.001,
        "record_every": 10,
        "diagnostics": {"sandwich": False, "phase": False},
        "seed": 0,
    },
    "so3_covariant_oracle": {
        "name": "so3_covariant_oracle",
        "description": "Rigid body with constant jet inputs (0.1, -0.2): cross-check "
        "target for an independent Euler-equation integration.",
        "manifold": {"kind": "rotation_so3", "inertia": [1.0, 2.0, 3.0]},
        "field": {"kind": "spin_so3", "axis": [1.0, 0.0, 0.0]},
        "metric": {"shaping": "same"},
        "epsilon": 1.0,
        "actuation": {
            "kind": "linear_columns",
            "generators": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        },
        "control": {"law": "constant", "coefficients": [0.1, -0.2]},
        "initial_conditions": [so3_ic(np.eye(3), (0.2, -0.1, 0.3))],
        "horizon": 5.0,
        "dt": 0.001,
        "record_every": 10,
        "diagnostics": {"sandwich": False, "phase": False},
        "seed": 0,
    },
    "underactuated": {
        "name": "underactuated",
        "description": "Pole-masked actuation on S2: the start at the north pole "
        "needs a correction in the masked direction, so the residual persists.",
        "manifold": {"kind": "sphere_s2"},
        "field": {"kind": "rotation_s2", "axis": [0.0, 0.0, 1.0]},
        "metric": {"shaping": "same"},
        "epsilon": 4.0,
        "actuation": {"kind": "pole_masked_s2", "mask_radius": 0.9},
        "control": {"law": "koditschek"},
        "initial_conditions": [s2_ic((0.0, 0.0, 1.0), (0.05, 0.0, 0.0))],
        "horizon": 20.0,
        "dt": 0.001,
        "record_every": 10,
        "diagnostics": {"sandwich": False, "phase": False},
        "seed": 0,
    },
    "sweep_demo": {
        "name": "sweep_demo",
        "description": "Gain sweep 0.5 / 1.2 / 2.0 on the rotation field: fitted "
        "residual decay rates follow 1/epsilon.",
        "manifold": {"kind": "sphere_s2"},
        "field": {"kind": "rotation_s2", "axis": [0.0, 0.0, 1.0]},
        "metric": {"shaping": "same"},
        "epsilon": [0.5, 1.2, 2.0],
        "actuation": {"kind": "fully_actuated"},
        "control": {"law": "koditschek"},
        "initial_conditions": [s2_ic((1.0, 0.0, 0.0), (0.0, 0.5, 0.6))],
        "horizon": 10.0,
        "dt": 0.001,
        "record_every": 10,
        "diagnostics": {"sandwich": True, "phase": False},
        "seed": 0,
    },
}


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    for name, doc in SCENARIOS.items():
        scenario = scenario_from_dict(doc)
        assert max(scenario.snap_distances) < 1e-12, name
        path = OUT / f"{name}.json"
        path.write_text(scenario_to_json(scenario))
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
