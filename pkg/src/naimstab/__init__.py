"""Feedback stabilization of velocity-field graphs on embedded manifolds.

Given a reference velocity field on the sphere or the rotation group,
the package builds feedback accelerations whose closed loop makes the
field's graph invariant and exponentially attracting inside the tangent
bundle, then checks that claim numerically: residual decay envelopes,
asymptotic-phase fits, and monodromy-based bunching certificates.
"""

__version__ = "0.1.0"

from .manifolds import (
    GeometryError,
    ManifoldKind,
    ManifoldSpec,
    MetricSpec,
    RetractionDomainError,
    SPHERE,
    ShapingKind,
    base_inner,
    geodesic_acceleration,
    project_tangent,
    random_point,
    random_tangent,
    retract,
    shaping_inner,
    sharp_flat,
)
from .fields import (
    FieldKind,
    ReferenceField,
    covariant_derivative,
    eval_field,
    flow_reference,
    flow_reference_point,
    linear_projected_s2,
    rotation_s2,
    spin_so3,
)
from .feedback import (
    ActuationKind,
    ActuationModel,
    ControlError,
    ControlLaw,
    FeedbackConfig,
    InfeasibleError,
    RankDeficientError,
    actuation_columns,
    in_pole_mask,
    koditschek_desired_accel,
    pseudoinverse_feedback,
    realized_accel,
)
from .integrate import (
    Monodromy,
    OffGraphError,
    SimulationError,
    TangentState,
    Trajectory,
    closed_loop_rhs,
    monodromy,
    simulate,
    step,
    tangent_bundle_basis,
)
from .diagnostics import (
    BunchingReport,
    CoalescenceReport,
    MetricBounds,
    NotYetConvergedError,
    PointCertificate,
    ResidualSeries,
    SandwichVerdict,
    asymptotic_phase,
    bunching_certificate,
    certificate_sweep,
    fit_exponential_rate,
    metric_bounds,
    residual_series,
    sandwich_check,
)
from .scenario import (
    Scenario,
    ScenarioError,
    load_scenario,
    run_diagnose,
    run_simulate,
    run_sweep,
    scenario_from_dict,
    scenario_to_json,
)

__all__ = [
    "__version__",
    "GeometryError",
    "ManifoldKind",
    "ManifoldSpec",
    "MetricSpec",
    "RetractionDomainError",
    "SPHERE",
    "ShapingKind",
    "base_inner",
    "geodesic_acceleration",
    "project_tangent",
    "random_point",
    "random_tangent",
    "retract",
    "shaping_inner",
    "sharp_flat",
    "FieldKind",
    "ReferenceField",
    "covariant_derivative",
    "eval_field",
    "flow_reference",
    "flow_reference_point",
    "linear_projected_s2",
    "rotation_s2",
    "spin_so3",
    "ActuationKind",
    "ActuationModel",
    "ControlError",
    "ControlLaw",
    "FeedbackConfig",
    "InfeasibleError",
    "RankDeficientError",
    "actuation_columns",
    "in_pole_mask",
    "koditschek_desired_accel",
    "pseudoinverse_feedback",
    "realized_accel",
    "Monodromy",
    "OffGraphError",
    "SimulationError",
    "TangentState",
    "Trajectory",
    "closed_loop_rhs",
    "monodromy",
    "simulate",
    "step",
    "tangent_bundle_basis",
    "BunchingReport",
    "CoalescenceReport",
    "MetricBounds",
    "NotYetConvergedError",
    "PointCertificate",
    "ResidualSeries",
    "SandwichVerdict",
    "asymptotic_phase",
    "bunching_certificate",
    "certificate_sweep",
    "fit_exponential_rate",
    "metric_bounds",
    "residual_series",
    "sandwich_check",
    "Scenario",
    "ScenarioError",
    "load_scenario",
    "run_diagnose",
    "run_simulate",
    "run_sweep",
    "scenario_from_dict",
    "scenario_to_json",
]
