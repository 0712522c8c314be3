"""Reference velocity fields and their first-order flows.

A reference field ``X`` assigns a tangent vector to every point of the
manifold; the feedback layer steers the second-order system onto the graph
``{(q, X(q))}``.  The catalog is small and closed:

* ``rotation_s2(axis)``: the Killing field ``axis x q`` on S2.
* ``linear_projected_s2(A)``: tangential projection of the linear field
  ``A q`` on S2; hyperbolic equilibria for suitable symmetric ``A``.
* ``spin_so3(axis)``: the left-invariant field ``R hat(axis)`` on SO(3).

All evaluations and Jacobians use smooth ambient extensions of the same
formulas, so they stay meaningful at the slightly off-manifold states an
explicit integrator visits between projections.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .manifolds import (
    GeometryError,
    ManifoldKind,
    ManifoldSpec,
    cross3,
    hat,
    project_tangent,
    retract,
)


class FieldKind(enum.Enum):
    ROTATION_S2 = "rotation_s2"
    LINEAR_PROJECTED_S2 = "linear_projected_s2"
    SPIN_SO3 = "spin_so3"


@dataclass(frozen=True, eq=False)
class ReferenceField:
    kind: FieldKind
    axis: np.ndarray | None = None
    matrix: np.ndarray | None = None

    @property
    def manifold_kind(self) -> ManifoldKind:
        if self.kind is FieldKind.SPIN_SO3:
            return ManifoldKind.ROTATION_SO3
        return ManifoldKind.SPHERE_S2


def rotation_s2(axis: np.ndarray) -> ReferenceField:
    """Rigid rotation field ``X(q) = axis x q`` for a unit axis."""
    axis = np.asarray(axis, dtype=float)
    if axis.shape != (3,) or abs(np.linalg.norm(axis) - 1.0) > 1e-9:
        raise GeometryError("rotation_s2 needs a unit 3-vector axis")
    return ReferenceField(FieldKind.ROTATION_S2, axis=axis)


def linear_projected_s2(matrix: np.ndarray) -> ReferenceField:
    """Projected linear field ``X(q) = A q - <A q, q> q`` on S2."""
    A = np.asarray(matrix, dtype=float)
    if A.shape != (3, 3):
        raise GeometryError("linear_projected_s2 needs a 3x3 matrix")
    return ReferenceField(FieldKind.LINEAR_PROJECTED_S2, matrix=A)


def spin_so3(axis: np.ndarray) -> ReferenceField:
    """Left-invariant spin field ``X(R) = R hat(axis)`` on SO(3)."""
    axis = np.asarray(axis, dtype=float)
    if axis.shape != (3,):
        raise GeometryError("spin_so3 needs a 3-vector axis")
    return ReferenceField(FieldKind.SPIN_SO3, axis=axis)


def check_field_manifold(field: ReferenceField, M: ManifoldSpec) -> None:
    if field.manifold_kind is not M.kind:
        raise GeometryError(
            f"field {field.kind.value} is not defined on manifold {M.kind.value}"
        )


def eval_field(field: ReferenceField, q: np.ndarray) -> np.ndarray:
    """Evaluate the field (ambient extension) at ``q``; broadcasts."""
    q = np.asarray(q, dtype=float)
    if field.kind is FieldKind.ROTATION_S2:
        return cross3(np.broadcast_to(field.axis, q.shape), q)
    if field.kind is FieldKind.LINEAR_PROJECTED_S2:
        Aq = q @ field.matrix.T
        return Aq - np.sum(Aq * q, axis=-1)[..., None] * q
    return q @ hat(field.axis)


def field_jacobian_apply(field: ReferenceField, q: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Directional derivative of the ambient extension: ``DX(q) w``."""
    q = np.asarray(q, dtype=float)
    w = np.asarray(w, dtype=float)
    if field.kind is FieldKind.ROTATION_S2:
        return cross3(np.broadcast_to(field.axis, w.shape), w)
    if field.kind is FieldKind.LINEAR_PROJECTED_S2:
        A = field.matrix
        Aq = q @ A.T
        sq = q @ (A + A.T)
        return w @ A.T - np.sum(sq * w, axis=-1)[..., None] * q - np.sum(Aq * q, axis=-1)[..., None] * w
    return w @ hat(field.axis)


def field_jacobian_matrix(field: ReferenceField, q: np.ndarray) -> np.ndarray:
    """Ambient Jacobian as a matrix on flattened coordinates (row-major)."""
    q = np.asarray(q, dtype=float)
    if field.kind is FieldKind.ROTATION_S2:
        return hat(field.axis)
    if field.kind is FieldKind.LINEAR_PROJECTED_S2:
        A = field.matrix
        return A - np.outer(q, q @ (A + A.T)) - (q @ A.T @ q) * np.eye(3)
    return np.kron(np.eye(3), hat(field.axis).T)


def covariant_derivative(
    M: ManifoldSpec, field: ReferenceField, q: np.ndarray, v: np.ndarray
) -> np.ndarray:
    """Covariant derivative of the field along a tangent vector.

    Computed as the tangential projection of the ambient directional
    derivative, ``Pi_q(DX(q) v)``, which on S2 is the Levi-Civita
    derivative of the round metric.
    """
    return project_tangent(M, q, field_jacobian_apply(field, q, v))


@dataclass(eq=False)
class ReferenceTrajectory:
    """Sampled first-order orbit: ``times[i]`` against ``points[i]``."""

    times: np.ndarray
    points: np.ndarray  # (n, ambient_dim), flattened row-major for SO(3)

    def __len__(self) -> int:
        return len(self.times)


def _rk4_increment(f, y: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _step_count(T: float, dt: float) -> int:
    n = int(round(abs(T) / dt))
    if n == 0 and abs(T) > 0:
        raise GeometryError(f"horizon {T} shorter than one step dt={dt}")
    if abs(n * dt - abs(T)) > 1e-9 * max(1.0, abs(T)):
        raise GeometryError(f"horizon {T} is not a whole number of steps of dt={dt}")
    return n


def flow_reference(
    M: ManifoldSpec,
    field: ReferenceField,
    q0: np.ndarray,
    T: float,
    dt: float,
    record_every: int = 1,
) -> ReferenceTrajectory:
    """Integrate ``qdot = X(q)`` with RK4 plus per-step retraction.

    Negative ``T`` flows backward.  Recording happens every
    ``record_every`` steps and always includes the initial and final states.
    """
    check_field_manifold(field, M)
    q0 = np.asarray(q0, dtype=float)
    n = _step_count(T, dt)
    h = dt if T >= 0 else -dt
    shape = M.point_shape

    def f(y: np.ndarray) -> np.ndarray:
        return eval_field(field, y.reshape(shape)).ravel()

    times = [0.0]
    points = [q0.ravel().copy()]
    y = q0.copy()
    for k in range(1, n + 1):
        y = retract(M, (y.ravel() + _rk4_increment(f, y.ravel(), h)).reshape(shape))
        if k % record_every == 0 or k == n:
            times.append(k * h)
            points.append(y.ravel().copy())
    return ReferenceTrajectory(np.asarray(times), np.asarray(points))


def flow_reference_point(
    M: ManifoldSpec, field: ReferenceField, q0: np.ndarray, T: float, dt: float
) -> np.ndarray:
    """Terminal point of the reference flow, without recording."""
    if abs(T) == 0.0:
        return np.asarray(q0, dtype=float).copy()
    traj = flow_reference(M, field, q0, T, dt, record_every=max(1, _step_count(T, dt)))
    return traj.points[-1].reshape(M.point_shape)
