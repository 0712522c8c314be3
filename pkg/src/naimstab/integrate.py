"""Closed-loop integration on the tangent bundle and monodromy matrices.

States are pairs ``(q, v)`` with ``q`` on the manifold and ``v`` tangent at
``q``.  One step is classical RK4 applied to a smooth ambient extension of
the closed-loop field, followed by a retraction of the base point and a
tangential reprojection of the velocity.  The extension is chosen so the
constraint set is invariant under its exact flow, which keeps the
per-step off-manifold drift at the local truncation order.

The monodromy of the time-tau flow is assembled column by column from
central finite differences of perturbed initial states; all perturbed
trajectories integrate as one batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .manifolds import (
    GeometryError,
    ManifoldKind,
    ManifoldSpec,
    RetractionDomainError,
    base_inner,
    check_point,
    check_tangent,
    geodesic_acceleration,
    project_tangent,
    retract,
    tangent_basis,
)
from .fields import _rk4_increment, _step_count, eval_field, field_jacobian_apply
from .feedback import FeedbackConfig, realized_accel

DEFAULT_DT = 1e-3
DEFAULT_RECORD_EVERY = 10
DEFAULT_FD_STEP = 1e-5
GRAPH_RESIDUAL_TOL = 1e-9


class SimulationError(RuntimeError):
    """Integration failed; carries the time at which it happened."""

    def __init__(self, message: str, t: float):
        self.t = t
        super().__init__(f"{message} (at t={t:.6g})")


class OffGraphError(GeometryError):
    """A graph-based diagnostic was asked to start away from the graph."""


@dataclass
class TangentState:
    """A validated point of the tangent bundle."""

    q: np.ndarray
    v: np.ndarray

    @classmethod
    def make(cls, M: ManifoldSpec, q: np.ndarray, v: np.ndarray) -> "TangentState":
        q = check_point(M, np.asarray(q, dtype=float))
        v = check_tangent(M, q, np.asarray(v, dtype=float))
        return cls(q, v)


@dataclass(eq=False)
class Trajectory:
    """Sampled closed-loop run; rows are flattened ambient coordinates."""

    times: np.ndarray
    qs: np.ndarray  # (n, ambient_dim)
    vs: np.ndarray  # (n, ambient_dim)
    accels: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.times)

    def state(self, M: ManifoldSpec, i: int) -> TangentState:
        shape = M.point_shape
        return TangentState(self.qs[i].reshape(shape), self.vs[i].reshape(shape))


def closed_loop_rhs(
    cfg: FeedbackConfig, q: np.ndarray, v: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Ambient right-hand side ``(dq, dv)`` of the controlled second-order system.

    ``dv`` is the geodesic acceleration plus the realized tangent control;
    with a zero field and no forcing it reduces to the geodesic equation.
    Broadcasts over leading batch axes.
    """
    dv = geodesic_acceleration(cfg.manifold, q, v) + realized_accel(cfg, q, v)
    return np.asarray(v, dtype=float), dv


def _flat_rhs(cfg: FeedbackConfig):
    shape = cfg.manifold.point_shape
    n = cfg.manifold.ambient_dim

    def f(y: np.ndarray) -> np.ndarray:
        q = y[..., :n].reshape(y.shape[:-1] + shape)
        v = y[..., n:].reshape(y.shape[:-1] + shape)
        dq, dv = closed_loop_rhs(cfg, q, v)
        return np.concatenate(
            [dq.reshape(y.shape[:-1] + (n,)), dv.reshape(y.shape[:-1] + (n,))], axis=-1
        )

    return f


def _snap(M: ManifoldSpec, y: np.ndarray) -> np.ndarray:
    """Retract the base and reproject the velocity of flat states ``y``."""
    n = M.ambient_dim
    shape = M.point_shape
    q = retract(M, y[..., :n].reshape(y.shape[:-1] + shape))
    v = project_tangent(M, q, y[..., n:].reshape(y.shape[:-1] + shape))
    return np.concatenate([q.reshape(y.shape[:-1] + (n,)), v.reshape(y.shape[:-1] + (n,))], axis=-1)


def step(cfg: FeedbackConfig, state: TangentState, dt: float) -> TangentState:
    """One RK4 step of length ``dt`` with post-step retraction."""
    M = cfg.manifold
    y = np.concatenate([state.q.ravel(), state.v.ravel()])
    y = _snap(M, y + _rk4_increment(_flat_rhs(cfg), y, dt))
    n = M.ambient_dim
    return TangentState(y[:n].reshape(M.point_shape), y[n:].reshape(M.point_shape))


def simulate(
    cfg: FeedbackConfig,
    state: TangentState,
    T: float,
    dt: float = DEFAULT_DT,
    record_every: int = DEFAULT_RECORD_EVERY,
    record_accel: bool = False,
) -> Trajectory:
    """Integrate the closed loop to horizon ``T``, sampling every few steps.

    The first and last states are always recorded.  Retraction failures
    surface as :class:`SimulationError` with the failing time attached;
    halving ``dt`` is the usual fix.
    """
    M = cfg.manifold
    n_steps = _step_count(T, dt)
    f = _flat_rhs(cfg)
    y = np.concatenate([state.q.ravel(), state.v.ravel()])
    nd = M.ambient_dim

    times = [0.0]
    qs = [y[:nd].copy()]
    vs = [y[nd:].copy()]
    accels = []
    if record_accel:
        accels.append(realized_accel(cfg, state.q, state.v).ravel().copy())
    for k in range(1, n_steps + 1):
        try:
            y = _snap(M, y + _rk4_increment(f, y, dt))
        except RetractionDomainError as exc:
            raise SimulationError(f"retraction failed, try halving dt: {exc}", k * dt) from exc
        if not np.all(np.isfinite(y)):
            raise SimulationError("state is not finite", k * dt)
        if k % record_every == 0 or k == n_steps:
            times.append(k * dt)
            qs.append(y[:nd].copy())
            vs.append(y[nd:].copy())
            if record_accel:
                q = y[:nd].reshape(M.point_shape)
                v = y[nd:].reshape(M.point_shape)
                accels.append(realized_accel(cfg, q, v).ravel().copy())
    return Trajectory(
        np.asarray(times),
        np.asarray(qs),
        np.asarray(vs),
        np.asarray(accels) if record_accel else None,
    )


def _integrate_batch(cfg: FeedbackConfig, Y0: np.ndarray, T: float, dt: float) -> np.ndarray:
    """Terminal flat states of a batch, no recording."""
    n_steps = _step_count(T, dt)
    f = _flat_rhs(cfg)
    y = np.array(Y0, dtype=float)
    for k in range(1, n_steps + 1):
        try:
            y = _snap(cfg.manifold, y + _rk4_increment(f, y, dt))
        except RetractionDomainError as exc:
            raise SimulationError(f"retraction failed, try halving dt: {exc}", k * dt) from exc
    return y


def tangent_bundle_basis(M: ManifoldSpec, q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the tangent space of TQ at ``(q, v)``.

    Works in the flat ambient chart of dimension ``2 * ambient_dim``; the
    subspace is the null space of the linearized membership constraints.
    """
    n = M.ambient_dim
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    if M.kind is ManifoldKind.SPHERE_S2:
        J = np.zeros((2, 2 * n))
        J[0, :n] = 2.0 * q
        J[1, :n] = v
        J[1, n:] = q
    else:
        # Constraints: R^T R = I and sym(R^T V) = 0, six rows each.
        iu = np.triu_indices(3)
        J = np.zeros((12, 2 * n))
        for k in range(2 * n):
            E = np.zeros(2 * n)
            E[k] = 1.0
            A = E[:n].reshape(3, 3)
            B = E[n:].reshape(3, 3)
            dC1 = A.T @ q + q.T @ A
            dC2 = A.T @ v + q.T @ B
            dC2 = 0.5 * (dC2 + dC2.T)
            J[:6, k] = dC1[iu]
            J[6:, k] = dC2[iu]
    _, s, Vt = np.linalg.svd(J)
    rank = int(np.sum(s > 1e-9 * s[0]))
    basis = Vt[rank:].T
    expected = 2 * M.dim
    if basis.shape[1] != expected:
        raise GeometryError(
            f"tangent bundle basis has dimension {basis.shape[1]}, expected {expected}"
        )
    return basis


@dataclass(eq=False)
class Monodromy:
    """Finite-difference linearization of the time-tau closed-loop flow."""

    base_q: np.ndarray
    base_v: np.ndarray
    tau: float
    matrix: np.ndarray  # (2n, 2n), acts on the flat ambient chart
    image_q: np.ndarray
    image_v: np.ndarray


def monodromy(
    cfg: FeedbackConfig,
    state: TangentState,
    tau: float,
    dt: float = DEFAULT_DT,
    fd_step: float = DEFAULT_FD_STEP,
) -> Monodromy:
    """Central-difference monodromy matrix of the time-``tau`` flow.

    The base state must lie on the graph of the reference field (squared
    residual below ``GRAPH_RESIDUAL_TOL``).  Each ambient basis direction is
    projected onto the tangent space of TQ, the two signed perturbations are
    snapped back to TQ, and all columns integrate as a single batch.
    ``tau = 0`` is allowed and produces the projection itself.
    """
    M = cfg.manifold
    q, v = state.q, state.v
    y_res = v - eval_field(cfg.field, q)
    res = float(base_inner(M, q, y_res, y_res))
    if res > GRAPH_RESIDUAL_TOL:
        raise OffGraphError(f"base state is off the graph (residual {res:.3e})")

    n = M.ambient_dim
    base = np.concatenate([q.ravel(), v.ravel()])
    basis = tangent_bundle_basis(M, q, v)
    P = basis @ basis.T
    dirs = P  # column j is the projected ambient basis vector e_j

    plus = _snap(M, base[None, :] + fd_step * dirs.T)
    minus = _snap(M, base[None, :] - fd_step * dirs.T)
    stacked = np.concatenate([plus, minus, base[None, :]], axis=0)
    if tau > 0.0:
        stacked = _integrate_batch(cfg, stacked, tau, dt)
    out_plus = stacked[: 2 * n]
    out_minus = stacked[2 * n : 4 * n]
    image = stacked[-1]
    A = (out_plus - out_minus).T / (2.0 * fd_step)
    return Monodromy(
        q.copy(),
        v.copy(),
        tau,
        A,
        image[:n].reshape(M.point_shape),
        image[n:].reshape(M.point_shape),
    )
