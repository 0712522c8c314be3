"""Declarative scenario files and the runners behind the command line.

A scenario is a JSON document that pins down everything a run needs:
manifold, reference field, metric shaping, gain(s), actuation, control
law, initial conditions, horizon and sampling, optional diagnostics, and
a seed.  Parsing is strict; serialization is canonical so that
``serialize(parse(file)) == file`` for the bundled scenarios.

Runners write CSV tables plus a manifest with row counts and SHA-256
checksums.  Given the same scenario and seed the CSV bytes are identical
across runs; the manifest additionally records wall-clock timing.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .manifolds import (
    GeometryError,
    ManifoldKind,
    ManifoldSpec,
    MetricSpec,
    ShapingKind,
    check_point,
    check_tangent,
    project_tangent,
    retract,
)
from .fields import (
    FieldKind,
    ReferenceField,
    flow_reference,
    linear_projected_s2,
    rotation_s2,
    spin_so3,
)
from .feedback import ActuationKind, ActuationModel, ControlLaw, FeedbackConfig
from .integrate import TangentState, Trajectory, simulate
from .diagnostics import (
    BunchingReport,
    CoalescenceReport,
    SandwichVerdict,
    asymptotic_phase,
    certificate_sweep,
    fit_exponential_rate,
    metric_bounds,
    residual_series,
    sandwich_check,
)

SNAP_LIMIT = 1e-3
OUT_ENV_VAR = "NAIMSTAB_OUT"


class ScenarioError(ValueError):
    """A scenario file failed validation; message names the bad field."""


@dataclass(eq=False)
class BunchingSettings:
    taus: list[float]
    k: int = 3
    n_base: int = 50
    epsilon: float | None = None  # override of the scenario gain for certificates
    fd_step: float = 1e-5


@dataclass(eq=False)
class DiagnosticsFlags:
    sandwich: bool = False
    phase: bool = False
    bunching: BunchingSettings | None = None


@dataclass(eq=False)
class Scenario:
    name: str
    description: str
    manifold: ManifoldSpec
    fieldspec: ReferenceField
    metric: MetricSpec
    epsilon: float | list[float]
    actuation: ActuationModel
    law: ControlLaw
    constant_controls: list[float] | None
    initial_conditions: list[TangentState]
    snap_distances: list[float]
    horizon: float
    dt: float
    record_every: int
    diagnostics: DiagnosticsFlags
    seed: int
    raw_initial_conditions: list[dict] = field(default_factory=list)

    def config(self, epsilon: float | None = None) -> FeedbackConfig:
        eps = epsilon if epsilon is not None else self.epsilon
        if isinstance(eps, list):
            raise ScenarioError(
                "scenario declares an epsilon sweep; pick one value or use the sweep command"
            )
        return FeedbackConfig(
            manifold=self.manifold,
            metric=self.metric,
            field=self.fieldspec,
            epsilon=float(eps),
            actuation=self.actuation,
            law=self.law,
            constant_controls=(
                np.asarray(self.constant_controls, dtype=float)
                if self.constant_controls is not None
                else None
            ),
        )


def _need(obj: dict, key: str, where: str):
    if key not in obj:
        raise ScenarioError(f"{where}: missing required field {key!r}")
    return obj[key]


def _enum(value: str, enum_cls, where: str):
    for member in enum_cls:
        if member.value == value:
            return member
    valid = ", ".join(m.value for m in enum_cls)
    raise ScenarioError(f"{where}: unknown value {value!r} (expected one of: {valid})")


def _parse_manifold(obj: dict) -> ManifoldSpec:
    kind = _enum(_need(obj, "kind", "manifold"), ManifoldKind, "manifold.kind")
    inertia = obj.get("inertia", [1.0, 1.0, 1.0])
    try:
        return ManifoldSpec(kind, tuple(float(x) for x in inertia))
    except (GeometryError, TypeError) as exc:
        raise ScenarioError(f"manifold: {exc}") from exc


def _parse_field(obj: dict, M: ManifoldSpec) -> ReferenceField:
    kind = _enum(_need(obj, "kind", "field"), FieldKind, "field.kind")
    try:
        if kind is FieldKind.ROTATION_S2:
            return rotation_s2(np.asarray(_need(obj, "axis", "field"), dtype=float))
        if kind is FieldKind.LINEAR_PROJECTED_S2:
            return linear_projected_s2(np.asarray(_need(obj, "matrix", "field"), dtype=float))
        return spin_so3(np.asarray(_need(obj, "axis", "field"), dtype=float))
    except GeometryError as exc:
        raise ScenarioError(f"field: {exc}") from exc


def _parse_metric(obj: dict, M: ManifoldSpec) -> MetricSpec:
    shaping = _enum(obj.get("shaping", "same"), ShapingKind, "metric.shaping")
    try:
        return MetricSpec(
            manifold=M,
            shaping=shaping,
            scale=float(obj.get("scale", 1.0)),
            quadratic_form=(
                np.asarray(obj["quadratic_form"], dtype=float)
                if "quadratic_form" in obj
                else None
            ),
        )
    except GeometryError as exc:
        raise ScenarioError(f"metric: {exc}") from exc


def _parse_actuation(obj: dict) -> ActuationModel:
    kind = _enum(obj.get("kind", "fully_actuated"), ActuationKind, "actuation.kind")
    try:
        if kind is ActuationKind.POLE_MASKED_S2:
            return ActuationModel(kind, mask_radius=float(obj.get("mask_radius", 0.3)))
        if kind is ActuationKind.LINEAR_COLUMNS:
            return ActuationModel(
                kind, generators=np.asarray(_need(obj, "generators", "actuation"), dtype=float)
            )
        return ActuationModel(kind)
    except GeometryError as exc:
        raise ScenarioError(f"actuation: {exc}") from exc


def scenario_from_dict(doc: dict) -> Scenario:
    """Build and validate a scenario from parsed JSON."""
    name = str(_need(doc, "name", "scenario"))
    M = _parse_manifold(_need(doc, "manifold", "scenario"))
    fieldspec = _parse_field(_need(doc, "field", "scenario"), M)
    if fieldspec.manifold_kind is not M.kind:
        raise ScenarioError("field: not defined on the declared manifold")
    metric = _parse_metric(doc.get("metric", {}), M)
    actuation = _parse_actuation(doc.get("actuation", {}))

    eps_raw = _need(doc, "epsilon", "scenario")
    if isinstance(eps_raw, list):
        if not eps_raw:
            raise ScenarioError("epsilon: sweep list must not be empty")
        epsilon: float | list[float] = [float(e) for e in eps_raw]
        if any(e <= 0 for e in epsilon):
            raise ScenarioError("epsilon: all sweep values must be positive")
    else:
        epsilon = float(eps_raw)
        if epsilon <= 0:
            raise ScenarioError("epsilon: must be positive")

    control = doc.get("control", {})
    law = _enum(control.get("law", "koditschek"), ControlLaw, "control.law")
    coeffs = control.get("coefficients")
    if coeffs is not None:
        coeffs = [float(c) for c in coeffs]

    horizon = float(_need(doc, "horizon", "scenario"))
    dt = float(doc.get("dt", 1e-3))
    record_every = int(doc.get("record_every", 10))
    if horizon <= 0 or dt <= 0 or record_every < 1:
        raise ScenarioError("horizon, dt must be positive and record_every >= 1")

    raw_ics = _need(doc, "initial_conditions", "scenario")
    if not raw_ics:
        raise ScenarioError("initial_conditions: need at least one")
    ics: list[TangentState] = []
    snaps: list[float] = []
    for i, ic in enumerate(raw_ics):
        q_in = np.asarray(_need(ic, "q", f"initial_conditions[{i}]"), dtype=float)
        v_in = np.asarray(_need(ic, "v", f"initial_conditions[{i}]"), dtype=float)
        if q_in.shape != M.point_shape or v_in.shape != M.point_shape:
            raise ScenarioError(
                f"initial_conditions[{i}]: expected shape {M.point_shape} entries"
            )
        try:
            q = retract(M, q_in)
        except GeometryError as exc:
            raise ScenarioError(f"initial_conditions[{i}]: {exc}") from exc
        v = project_tangent(M, q, v_in)
        snap = max(float(np.linalg.norm(q - q_in)), float(np.linalg.norm(v - v_in)))
        if snap > SNAP_LIMIT:
            raise ScenarioError(
                f"initial_conditions[{i}]: snap distance {snap:.3e} exceeds {SNAP_LIMIT}"
            )
        check_point(M, q)
        check_tangent(M, q, v)
        ics.append(TangentState(q, v))
        snaps.append(snap)

    diag_doc = doc.get("diagnostics", {})
    bunch = None
    if diag_doc.get("bunching") is not None:
        b = diag_doc["bunching"]
        bunch = BunchingSettings(
            taus=[float(t) for t in _need(b, "taus", "diagnostics.bunching")],
            k=int(b.get("k", 3)),
            n_base=int(b.get("n_base", 50)),
            epsilon=(float(b["epsilon"]) if "epsilon" in b else None),
            fd_step=float(b.get("fd_step", 1e-5)),
        )
        if any(t < 0 for t in bunch.taus) or bunch.k < 0 or bunch.n_base < 1:
            raise ScenarioError("diagnostics.bunching: taus, k, n_base out of range")
    diagnostics = DiagnosticsFlags(
        sandwich=bool(diag_doc.get("sandwich", False)),
        phase=bool(diag_doc.get("phase", False)),
        bunching=bunch,
    )

    scenario = Scenario(
        name=name,
        description=str(doc.get("description", "")),
        manifold=M,
        fieldspec=fieldspec,
        metric=metric,
        epsilon=epsilon,
        actuation=actuation,
        law=law,
        constant_controls=coeffs,
        initial_conditions=ics,
        snap_distances=snaps,
        horizon=horizon,
        dt=dt,
        record_every=record_every,
        diagnostics=diagnostics,
        seed=int(doc.get("seed", 0)),
        raw_initial_conditions=[dict(ic) for ic in raw_ics],
    )
    if law is ControlLaw.CONSTANT or coeffs is not None:
        scenario.config(epsilon[0] if isinstance(epsilon, list) else epsilon)
    return scenario


def scenario_to_dict(s: Scenario) -> dict:
    """Canonical dictionary form, inverse of :func:`scenario_from_dict`."""
    doc: dict = {"name": s.name, "description": s.description}
    man: dict = {"kind": s.manifold.kind.value}
    if s.manifold.kind is ManifoldKind.ROTATION_SO3:
        man["inertia"] = [float(x) for x in s.manifold.inertia]
    doc["manifold"] = man
    f: dict = {"kind": s.fieldspec.kind.value}
    if s.fieldspec.axis is not None:
        f["axis"] = [float(x) for x in s.fieldspec.axis]
    if s.fieldspec.matrix is not None:
        f["matrix"] = [[float(x) for x in row] for row in s.fieldspec.matrix]
    doc["field"] = f
    met: dict = {"shaping": s.metric.shaping.value}
    if s.metric.shaping is ShapingKind.SCALED_BASE:
        met["scale"] = float(s.metric.scale)
    if s.metric.quadratic_form is not None:
        met["quadratic_form"] = [[float(x) for x in row] for row in s.metric.quadratic_form]
    doc["metric"] = met
    doc["epsilon"] = s.epsilon
    act: dict = {"kind": s.actuation.kind.value}
    if s.actuation.kind is ActuationKind.POLE_MASKED_S2:
        act["mask_radius"] = float(s.actuation.mask_radius)
    if s.actuation.kind is ActuationKind.LINEAR_COLUMNS:
        act["generators"] = [[float(x) for x in row] for row in s.actuation.generators]
    doc["actuation"] = act
    ctrl: dict = {"law": s.law.value}
    if s.constant_controls is not None:
        ctrl["coefficients"] = list(s.constant_controls)
    doc["control"] = ctrl
    doc["initial_conditions"] = s.raw_initial_conditions
    doc["horizon"] = s.horizon
    doc["dt"] = s.dt
    doc["record_every"] = s.record_every
    diag: dict = {"sandwich": s.diagnostics.sandwich, "phase": s.diagnostics.phase}
    if s.diagnostics.bunching is not None:
        b = s.diagnostics.bunching
        bd: dict = {"taus": b.taus, "k": b.k, "n_base": b.n_base}
        if b.epsilon is not None:
            bd["epsilon"] = b.epsilon
        bd["fd_step"] = b.fd_step
        diag["bunching"] = bd
    doc["diagnostics"] = diag
    doc["seed"] = s.seed
    return doc


def scenario_to_json(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2) + "\n"


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: top level must be an object")
    return scenario_from_dict(doc)


def bundled_scenario_names() -> list[str]:
    root = resources.files("naimstab") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_scenario_path(name: str) -> Path:
    root = resources.files("naimstab") / "scenarios"
    p = root / f"{name}.json"
    if not p.is_file():
        raise ScenarioError(f"no bundled scenario named {name!r}")
    return Path(str(p))


def _fmt(x: float) -> str:
    return repr(float(x))


def write_csv(path: Path, header: list[str], rows: np.ndarray) -> int:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")
    return rows.shape[0]


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _state_header(M: ManifoldSpec) -> list[str]:
    n = M.ambient_dim
    return ["t"] + [f"q{i + 1}" for i in range(n)] + [f"v{i + 1}" for i in range(n)]


class RunWriter:
    """Collects artifact tables for one run directory and its manifest."""

    def __init__(self, out_dir: Path, scenario: Scenario, command: str):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.scenario = scenario
        self.command = command
        self.artifacts: list[dict] = []
        self._t0 = time.monotonic()

    def add_csv(self, name: str, header: list[str], rows: np.ndarray, **extra) -> None:
        path = self.out_dir / name
        n = write_csv(path, header, rows)
        entry = {"path": name, "rows": n, "sha256": _sha256(path)}
        entry.update(extra)
        self.artifacts.append(entry)

    def add_json(self, name: str, payload: dict) -> None:
        path = self.out_dir / name
        path.write_text(json.dumps(payload, indent=2) + "\n")
        self.artifacts.append({"path": name, "rows": None, "sha256": _sha256(path)})

    def finish(self) -> Path:
        manifest = {
            "scenario": self.scenario.name,
            "command": self.command,
            "package_version": __version__,
            "numpy_version": np.__version__,
            "seed": self.scenario.seed,
            "snap_distances": self.scenario.snap_distances,
            "elapsed_seconds": round(time.monotonic() - self._t0, 3),
            "artifacts": self.artifacts,
        }
        path = self.out_dir / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2) + "\n")
        return path


def _sandwich_payload(v: SandwichVerdict) -> dict:
    return {
        "ok": v.ok,
        "ok_upper": v.ok_upper,
        "ok_lower": v.ok_lower,
        "upper_ratio_excess": v.upper_ratio_excess,
        "lower_ratio_excess": v.lower_ratio_excess,
        "upper_margin": v.upper_margin,
        "lower_margin": v.lower_margin,
    }


def _phase_payload(r: CoalescenceReport) -> dict:
    return {
        "t_match": r.t_match,
        "rate": r.rate,
        "prefactor": r.prefactor,
        "terminal_distance": r.terminal_distance,
    }


def _bunching_payload(rep: BunchingReport) -> dict:
    return {
        "taus": rep.taus,
        "k": rep.k,
        "n_points": rep.n_points,
        "all_passed": rep.all_passed,
        "failures": rep.failures,
        "normal_rates": rep.normal_rates,
        "tangent_rates": rep.tangent_rates,
        "points": [
            [
                {
                    "tau": c.tau,
                    "tangent_norm": c.tangent_norm,
                    "tangent_conorm": c.tangent_conorm,
                    "normal_norm": c.normal_norm,
                    "naim_ok": c.naim_ok,
                    "bunching_ok": c.bunching_ok,
                    "passed": c.passed,
                }
                for c in row
            ]
            for row in rep.certificates
        ],
    }


def _simulate_all(scenario: Scenario, cfg: FeedbackConfig) -> list[Trajectory]:
    return [
        simulate(cfg, ic, scenario.horizon, scenario.dt, scenario.record_every)
        for ic in scenario.initial_conditions
    ]


def run_simulate(scenario: Scenario, out_dir: Path) -> dict:
    """Closed-loop runs, matching reference orbits, residuals, manifest."""
    cfg = scenario.config()
    writer = RunWriter(out_dir, scenario, "simulate")
    header = _state_header(scenario.manifold)
    summary: dict = {"epsilon": cfg.epsilon, "trajectories": len(scenario.initial_conditions)}
    from .fields import eval_field

    trajs = _simulate_all(scenario, cfg)
    for i, (ic, traj) in enumerate(zip(scenario.initial_conditions, trajs)):
        rows = np.column_stack([traj.times, traj.qs, traj.vs])
        writer.add_csv(f"trajectory_ic{i:02d}.csv", header, rows, kind="closed_loop", ic=i)

        ref = flow_reference(
            scenario.manifold,
            scenario.fieldspec,
            ic.q,
            scenario.horizon,
            scenario.dt,
            scenario.record_every,
        )
        shape = (len(ref),) + scenario.manifold.point_shape
        ref_vs = eval_field(scenario.fieldspec, ref.points.reshape(shape)).reshape(len(ref), -1)
        ref_rows = np.column_stack([ref.times, ref.points, ref_vs])
        writer.add_csv(f"reference_ic{i:02d}.csv", header, ref_rows, kind="reference", ic=i)

        rs = residual_series(cfg, traj)
        writer.add_csv(
            f"residual_ic{i:02d}.csv",
            ["t", "res_norm_sq"],
            np.column_stack([rs.times, rs.values]),
            kind="residual",
            ic=i,
            epsilon=cfg.epsilon,
        )
    diag = _run_diagnostics(scenario, cfg, trajs)
    if diag:
        writer.add_json("diagnostics.json", diag)
        summary["diagnostics"] = diag
    writer.finish()
    return summary


def _run_diagnostics(
    scenario: Scenario, cfg: FeedbackConfig, trajs: list[Trajectory] | None = None
) -> dict:
    flags = scenario.diagnostics
    out: dict = {}
    if trajs is None and (flags.sandwich or flags.phase):
        trajs = _simulate_all(scenario, cfg)
    if flags.sandwich:
        mb = metric_bounds(cfg.metric, seed=scenario.seed)
        verdicts = [
            _sandwich_payload(sandwich_check(residual_series(cfg, traj), cfg.epsilon, mb))
            for traj in trajs
        ]
        out["metric_bounds"] = {"c": mb.c, "C": mb.C, "samples": mb.samples}
        out["sandwich"] = verdicts
    if flags.phase:
        reports = []
        for traj in trajs:
            rep = asymptotic_phase(
                cfg, traj, scenario.horizon, dt=scenario.dt, fit_tail_margin=3.0 * cfg.epsilon
            )
            reports.append(_phase_payload(rep))
        out["phase"] = reports
    if flags.bunching is not None:
        b = flags.bunching
        cert_cfg = scenario.config(b.epsilon) if b.epsilon is not None else cfg
        rep = certificate_sweep(
            cert_cfg,
            b.n_base,
            tuple(b.taus),
            b.k,
            seed=scenario.seed,
            dt=scenario.dt,
            fd_step=b.fd_step,
        )
        out["bunching"] = _bunching_payload(rep)
    return out


def run_sweep(scenario: Scenario, epsilons: list[float], out_dir: Path) -> dict:
    """One row per gain: fitted residual decay rates and verdicts."""
    if not epsilons:
        raise ScenarioError("sweep: empty epsilon list")
    if any(e <= 0 for e in epsilons):
        raise ScenarioError("sweep: epsilons must be positive")
    writer = RunWriter(out_dir, scenario, "sweep")
    rows = []
    sandwich_all = True
    for j, eps in enumerate(epsilons):
        cfg = scenario.config(eps)
        ic = scenario.initial_conditions[0]
        traj = simulate(cfg, ic, scenario.horizon, scenario.dt, scenario.record_every)
        rs = residual_series(cfg, traj)
        rate_sq, _ = fit_exponential_rate(rs.times, rs.values)
        writer.add_csv(
            f"residual_eps{j}.csv",
            ["t", "res_norm_sq"],
            np.column_stack([rs.times, rs.values]),
            kind="residual",
            epsilon=eps,
        )
        mb = metric_bounds(cfg.metric, seed=scenario.seed)
        verdict = sandwich_check(rs, eps, mb)
        sandwich_all &= verdict.ok
        rows.append([eps, rate_sq / 2.0, rate_sq, float(verdict.ok)])
    writer.add_csv(
        "sweep.csv",
        ["epsilon", "fitted_rate_norm", "fitted_rate_norm_sq", "sandwich_ok"],
        np.asarray(rows),
    )
    writer.finish()
    return {"epsilons": epsilons, "rows": rows, "sandwich_all_ok": sandwich_all}


def run_diagnose(scenario: Scenario, out_dir: Path) -> tuple[dict, bool]:
    """Full diagnostics; returns the report and whether any certificate failed."""
    cfg = scenario.config(
        scenario.epsilon[0] if isinstance(scenario.epsilon, list) else None
    )
    writer = RunWriter(out_dir, scenario, "diagnose")
    report = _run_diagnostics(scenario, cfg)
    if not report:
        raise ScenarioError("diagnose: scenario enables no diagnostics")
    writer.add_json("diagnostics.json", report)
    writer.finish()
    failed = False
    for v in report.get("sandwich", []):
        failed |= not v["ok"]
    if "bunching" in report:
        failed |= not report["bunching"]["all_passed"]
    return report, failed
