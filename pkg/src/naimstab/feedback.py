"""Desired accelerations, actuation models, and pseudoinverse allocation.

The desired acceleration is the Koditschek construction

    G(q, v) = nabla_v X - (1/eps) sharp_flat(v - X(q)),

which makes the squared shaping norm of the velocity residual decay at rate
2/eps along the closed loop.  An actuation model then realizes G exactly
(fully actuated), as the closest achievable vector in a constrained
distribution (pole-masked S2), or as a least-squares combination of control
columns via the metric Moore-Penrose pseudoinverse.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .manifolds import (
    GeometryError,
    ManifoldKind,
    ManifoldSpec,
    MetricSpec,
    base_inner,
    body_velocity,
    hat,
    metric_orthonormal_basis,
    project_tangent,
    sharp_flat,
)
from .fields import ReferenceField, check_field_manifold, covariant_derivative, eval_field

RANK_CUTOFF = 1e-10
FEASIBILITY_TOL = 1e-8


class ControlError(ValueError):
    """Base class for allocation failures."""


class RankDeficientError(ControlError):
    """The control columns are numerically dependent."""

    def __init__(self, rank: int, needed: int):
        self.rank = rank
        self.needed = needed
        super().__init__(f"column set has numerical rank {rank}, expected {needed}")


class InfeasibleError(ControlError):
    """The target acceleration is not in the span of the columns."""

    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"target outside column span (residual {residual:.3e})")


class ActuationKind(enum.Enum):
    FULLY_ACTUATED = "fully_actuated"
    POLE_MASKED_S2 = "pole_masked_s2"
    LINEAR_COLUMNS = "linear_columns"


class ControlLaw(enum.Enum):
    KODITSCHEK = "koditschek"
    CONSTANT = "constant"


@dataclass(frozen=True, eq=False)
class ActuationModel:
    """How desired accelerations map to realizable ones.

    ``mask_radius`` is the geodesic radius of the masked polar caps for
    ``POLE_MASKED_S2``.  ``generators`` holds one 3-vector per control
    column for ``LINEAR_COLUMNS``: body torque directions ``b`` giving
    columns ``R hat(I^{-1} b)`` on SO(3), or ambient directions projected
    to the tangent plane on S2.
    """

    kind: ActuationKind = ActuationKind.FULLY_ACTUATED
    mask_radius: float = 0.3
    generators: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind is ActuationKind.POLE_MASKED_S2:
            if not 0.0 < self.mask_radius < 1.0:
                raise GeometryError(f"mask_radius must lie in (0, 1), got {self.mask_radius}")
        if self.kind is ActuationKind.LINEAR_COLUMNS:
            gens = np.asarray(self.generators, dtype=float)
            if gens.ndim != 2 or gens.shape[1] != 3 or gens.shape[0] == 0:
                raise GeometryError("generators must be a nonempty (m, 3) array")
            object.__setattr__(self, "generators", gens)


@dataclass(frozen=True, eq=False)
class FeedbackConfig:
    """Everything the closed loop needs: geometry, field, gain, actuation."""

    manifold: ManifoldSpec
    metric: MetricSpec
    field: ReferenceField
    epsilon: float
    actuation: ActuationModel = ActuationModel()
    law: ControlLaw = ControlLaw.KODITSCHEK
    constant_controls: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.epsilon <= 0.0:
            raise GeometryError(f"epsilon must be positive, got {self.epsilon}")
        if self.metric.manifold.kind is not self.manifold.kind:
            raise GeometryError("metric and manifold specs disagree")
        check_field_manifold(self.field, self.manifold)
        if self.actuation.kind is ActuationKind.POLE_MASKED_S2:
            if self.manifold.kind is not ManifoldKind.SPHERE_S2:
                raise GeometryError("pole-masked actuation is only defined on S2")
        if self.law is ControlLaw.CONSTANT:
            u = np.zeros(0) if self.constant_controls is None else np.asarray(
                self.constant_controls, dtype=float
            )
            if self.actuation.kind is ActuationKind.LINEAR_COLUMNS:
                m = self.actuation.generators.shape[0]
                if u.shape != (m,):
                    raise GeometryError(f"constant controls must have shape ({m},)")
            elif u.size:
                raise GeometryError("constant controls require linear-column actuation")
            object.__setattr__(self, "constant_controls", u)


def koditschek_desired_accel(cfg: FeedbackConfig, q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Desired tangent acceleration ``nabla_v X - (1/eps) sharp_flat(v - X(q))``."""
    nab = covariant_derivative(cfg.manifold, cfg.field, q, v)
    residual = np.asarray(v, dtype=float) - eval_field(cfg.field, q)
    return nab - sharp_flat(cfg.metric, q, residual) / cfg.epsilon


def actuation_columns(M: ManifoldSpec, act: ActuationModel, q: np.ndarray) -> np.ndarray:
    """Stack of tangent control columns at ``q``, shape ``(..., m, ambient_dim)``."""
    if act.kind is not ActuationKind.LINEAR_COLUMNS:
        raise GeometryError("columns are only defined for linear-column actuation")
    q = np.asarray(q, dtype=float)
    gens = act.generators
    if M.kind is ManifoldKind.SPHERE_S2:
        cols = project_tangent(M, q[..., None, :], np.broadcast_to(gens, q.shape[:-1] + gens.shape))
        return cols
    jets = hat(gens / M.inertia_array)  # (m, 3, 3)
    cols = q[..., None, :, :] @ jets
    return cols.reshape(q.shape[:-2] + (gens.shape[0], 9))


def _min_norm_coefficients(
    M: ManifoldSpec, q: np.ndarray, columns: np.ndarray, target: np.ndarray
) -> tuple[np.ndarray, float, int]:
    """Minimum-norm least squares in base-metric coordinates at one point.

    Returns ``(coeffs, residual_gnorm, numerical_rank)`` without raising.
    """
    basis = metric_orthonormal_basis(M, q)  # ambient x d, g-orthonormal
    d = M.dim
    m = columns.shape[0]
    A = np.empty((d, m))
    for j in range(m):
        col = columns[j].reshape(M.point_shape)
        for i in range(d):
            A[i, j] = float(base_inner(M, q, basis[:, i].reshape(M.point_shape), col))
    t = np.array(
        [float(base_inner(M, q, basis[:, i].reshape(M.point_shape), target)) for i in range(d)]
    )
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros(m), float(np.linalg.norm(t)), 0
    rank = int(np.sum(s > RANK_CUTOFF * s[0]))
    inv = np.zeros_like(s)
    inv[:rank] = 1.0 / s[:rank]
    u = Vt.T @ (inv * (U.T @ t))
    residual = float(np.linalg.norm(A @ u - t))
    return u, residual, rank


def pseudoinverse_feedback(
    M: ManifoldSpec,
    q: np.ndarray,
    columns: np.ndarray,
    target: np.ndarray,
    feasibility_tol: float = FEASIBILITY_TOL,
) -> np.ndarray:
    """Coefficients ``u`` with ``sum_j u_j col_j = target``, minimum Euclidean norm.

    Adjoints are taken in the base metric on the tangent space and the
    standard inner product on coefficients, so for fully spanning columns
    this is the metric Moore-Penrose formula ``F^* (F F^*)^{-1} target``.

    Raises :class:`RankDeficientError` when the columns are numerically
    dependent (or fail to span with more columns than dimensions), and
    :class:`InfeasibleError` when the target has a component outside the
    span.
    """
    q = np.asarray(q, dtype=float)
    columns = np.asarray(columns, dtype=float)
    target = np.asarray(target, dtype=float)
    m = columns.shape[0]
    u, residual, rank = _min_norm_coefficients(M, q, columns, target)
    if rank < min(m, M.dim):
        raise RankDeficientError(rank, min(m, M.dim))
    tnorm = float(np.sqrt(base_inner(M, q, target, target)))
    if residual > feasibility_tol * max(1.0, tnorm):
        raise InfeasibleError(residual)
    return u


def in_pole_mask(q: np.ndarray, mask_radius: float) -> np.ndarray:
    """True where ``q`` lies within geodesic ``mask_radius`` of (0, 0, +-1)."""
    q = np.asarray(q, dtype=float)
    return np.abs(q[..., 2]) > np.cos(mask_radius)


def _masked_direction(q: np.ndarray) -> np.ndarray:
    """Basis of the constrained distribution {v tangent : v_1 = 0} near the poles."""
    d = np.zeros_like(q)
    d[..., 1] = q[..., 2]
    d[..., 2] = -q[..., 1]
    return d


def realized_accel(cfg: FeedbackConfig, q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Tangent acceleration the actuation actually produces at ``(q, v)``.

    Under the Koditschek law this is the desired acceleration, its
    best-effort projection onto the achievable distribution (masked poles),
    or its least-squares realization through the control columns.  Under a
    constant law it is the fixed combination of columns, or zero for the
    fully actuated model (free geodesic motion).  Broadcasts over batches.
    """
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    act = cfg.actuation

    if cfg.law is ControlLaw.CONSTANT:
        if act.kind is ActuationKind.LINEAR_COLUMNS:
            cols = actuation_columns(cfg.manifold, act, q)
            flat = np.sum(cfg.constant_controls[:, None] * cols, axis=-2)
            return flat.reshape(q.shape)
        return np.zeros_like(q)

    desired = koditschek_desired_accel(cfg, q, v)

    if act.kind is ActuationKind.FULLY_ACTUATED:
        return desired
    if act.kind is ActuationKind.POLE_MASKED_S2:
        d = _masked_direction(q)
        dd = np.sum(d * d, axis=-1)
        coeff = np.where(dd > 0.0, np.sum(desired * d, axis=-1) / np.where(dd > 0.0, dd, 1.0), 0.0)
        constrained = coeff[..., None] * d
        inside = in_pole_mask(q, act.mask_radius)
        return np.where(inside[..., None], constrained, desired)

    cols = actuation_columns(cfg.manifold, act, q)  # (..., m, N)
    if q.ndim == len(cfg.manifold.point_shape):
        u, _, rank = _min_norm_coefficients(cfg.manifold, q, cols, desired)
        if rank < min(cols.shape[0], cfg.manifold.dim):
            raise RankDeficientError(rank, min(cols.shape[0], cfg.manifold.dim))
        return (u @ cols).reshape(q.shape)
    if cfg.manifold.kind is ManifoldKind.SPHERE_S2:
        # On S2 the base metric is the ambient one, so ambient least squares
        # against the tangent column stack is already the metric solution.
        u = np.linalg.pinv(np.swapaxes(cols, -1, -2), rcond=RANK_CUTOFF) @ desired[..., None]
        return np.squeeze(np.swapaxes(cols, -1, -2) @ u, axis=-1)
    # SO(3): solve in body coordinates, where the metric-orthonormal column
    # matrix is constant across the batch.
    inertia = cfg.manifold.inertia_array
    sqrt_i = np.sqrt(inertia)
    A = (sqrt_i[:, None] * (act.generators / inertia).T)  # (3, m)
    t = sqrt_i * body_velocity(q, desired)
    u = np.linalg.pinv(A, rcond=RANK_CUTOFF) @ t[..., None]
    flat = np.sum(np.squeeze(u, -1)[..., :, None] * cols, axis=-2)
    return flat.reshape(q.shape)
