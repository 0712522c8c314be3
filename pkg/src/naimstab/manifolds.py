"""Embedded-manifold primitives for the unit sphere and the rotation group.

Points and tangent vectors are plain numpy arrays in ambient coordinates:
shape ``(3,)`` for S2 in R^3 and shape ``(3, 3)`` for SO(3) in R^{3x3}.
Most operations broadcast over extra leading axes so that batches of states
can be pushed through the same formulas.

Metric conventions:

* S2 carries the round metric, the restriction of the Euclidean inner
  product.  The tangent projection is ``w - <w, q> q`` and the geodesic
  acceleration is ``-<v, v> q``.
* SO(3) carries the left-invariant metric ``<xi, I eta>`` determined by a
  diagonal inertia tensor ``I``.  Tangent projection takes the skew part of
  ``R^T W`` in the Frobenius sense; the geodesic spray is the free rigid
  body motion ``Idot Omega = (I Omega) x Omega``.

A ``MetricSpec`` pairs the canonical base metric with a shaping metric used
by the feedback law: the base itself, a scaled copy, or (on S2 only) the
restriction of an ambient quadratic form.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

TOL_MANIFOLD = 1e-9
TOL_TANGENT = 1e-9
RETRACT_RADIUS = 0.5


class GeometryError(ValueError):
    """An input violates a manifold, tangency, or metric invariant."""


class RetractionDomainError(GeometryError):
    """The point to retract lies outside the safe retraction neighborhood."""


class ManifoldKind(enum.Enum):
    SPHERE_S2 = "sphere_s2"
    ROTATION_SO3 = "rotation_so3"


@dataclass(frozen=True)
class ManifoldSpec:
    """Which manifold we work on, plus the inertia tensor for SO(3).

    ``inertia`` is ignored on S2.  On SO(3) it holds the diagonal of the
    (positive definite) inertia tensor defining the left-invariant metric.
    """

    kind: ManifoldKind
    inertia: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self) -> None:
        if min(self.inertia) <= 0.0:
            raise GeometryError(f"inertia must be positive, got {self.inertia}")

    @property
    def ambient_dim(self) -> int:
        return 3 if self.kind is ManifoldKind.SPHERE_S2 else 9

    @property
    def dim(self) -> int:
        """Dimension of the manifold itself (2 for S2, 3 for SO(3))."""
        return 2 if self.kind is ManifoldKind.SPHERE_S2 else 3

    @property
    def point_shape(self) -> tuple[int, ...]:
        return (3,) if self.kind is ManifoldKind.SPHERE_S2 else (3, 3)

    @property
    def inertia_array(self) -> np.ndarray:
        return np.asarray(self.inertia, dtype=float)


SPHERE = ManifoldSpec(ManifoldKind.SPHERE_S2)


def hat(xi: np.ndarray) -> np.ndarray:
    """Map a 3-vector to the skew matrix with ``hat(xi) w = xi x w``."""
    xi = np.asarray(xi, dtype=float)
    out = np.zeros(xi.shape[:-1] + (3, 3))
    x, y, z = xi[..., 0], xi[..., 1], xi[..., 2]
    out[..., 0, 1] = -z
    out[..., 0, 2] = y
    out[..., 1, 0] = z
    out[..., 1, 2] = -x
    out[..., 2, 0] = -y
    out[..., 2, 1] = x
    return out


def vee(W: np.ndarray, tol: float = TOL_TANGENT) -> np.ndarray:
    """Inverse of :func:`hat`.  Rejects matrices that are not skew to ``tol``."""
    W = np.asarray(W, dtype=float)
    defect = np.max(np.abs(W + np.swapaxes(W, -1, -2)))
    if defect > tol:
        raise GeometryError(f"matrix is not skew-symmetric (defect {defect:.3e})")
    return _vee_unchecked(W)


def _vee_unchecked(W: np.ndarray) -> np.ndarray:
    return np.stack([W[..., 2, 1], W[..., 0, 2], W[..., 1, 0]], axis=-1)


def _skew_part(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A - np.swapaxes(A, -1, -2))


def _sym_part(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum(a * b, axis=-1)


def cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product on the last axis; faster than numpy.cross for 3-vectors."""
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    out[..., 0] = a1 * b2 - a2 * b1
    out[..., 1] = a2 * b0 - a0 * b2
    out[..., 2] = a0 * b1 - a1 * b0
    return out


def point_defect(M: ManifoldSpec, q: np.ndarray) -> float:
    """Distance-like measure of how far ``q`` is from satisfying membership."""
    q = np.asarray(q, dtype=float)
    if M.kind is ManifoldKind.SPHERE_S2:
        return float(np.max(np.abs(_dot(q, q) - 1.0)))
    RtR = np.swapaxes(q, -1, -2) @ q
    ortho = np.max(np.abs(RtR - np.eye(3)))
    det = np.max(np.abs(np.linalg.det(q) - 1.0))
    return float(max(ortho, det))


def check_point(M: ManifoldSpec, q: np.ndarray, tol: float = TOL_MANIFOLD) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape[-len(M.point_shape):] != M.point_shape:
        raise GeometryError(f"point has shape {q.shape}, expected trailing {M.point_shape}")
    defect = point_defect(M, q)
    if defect > tol:
        raise GeometryError(f"point off the manifold (defect {defect:.3e} > {tol:.1e})")
    return q


def tangent_defect(M: ManifoldSpec, q: np.ndarray, v: np.ndarray) -> float:
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    if M.kind is ManifoldKind.SPHERE_S2:
        return float(np.max(np.abs(_dot(q, v))))
    return float(np.max(np.abs(_sym_part(np.swapaxes(q, -1, -2) @ v))))


def check_tangent(
    M: ManifoldSpec, q: np.ndarray, v: np.ndarray, tol: float = TOL_TANGENT
) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    defect = tangent_defect(M, q, v)
    if defect > tol:
        raise GeometryError(f"vector not tangent at base point (defect {defect:.3e})")
    return v


def project_tangent(M: ManifoldSpec, q: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Orthogonal projection of an ambient vector onto the tangent space at ``q``.

    The projection is taken in the ambient inner product (Euclidean on R^3,
    Frobenius on R^{3x3}); it is idempotent and self-adjoint.
    """
    q = np.asarray(q, dtype=float)
    w = np.asarray(w, dtype=float)
    if M.kind is ManifoldKind.SPHERE_S2:
        return w - _dot(w, q)[..., None] * q
    return q @ _skew_part(np.swapaxes(q, -1, -2) @ w)


def retract(M: ManifoldSpec, x: np.ndarray) -> np.ndarray:
    """Snap an ambient point back onto the manifold.

    S2 normalizes; SO(3) takes the special-orthogonal polar factor.  Raises
    :class:`RetractionDomainError` outside a radius-0.5 neighborhood, which
    in the integrator almost always means the step size is too large.
    """
    x = np.asarray(x, dtype=float)
    if M.kind is ManifoldKind.SPHERE_S2:
        n = np.linalg.norm(x, axis=-1)
        if np.any(n < 1.0 - RETRACT_RADIUS) or np.any(n > 1.0 + RETRACT_RADIUS):
            raise RetractionDomainError(
                f"|x| = {float(np.min(n)):.3f}..{float(np.max(n)):.3f} outside "
                f"[{1.0 - RETRACT_RADIUS}, {1.0 + RETRACT_RADIUS}]"
            )
        return x / n[..., None]
    svals = np.linalg.svd(x, compute_uv=False)
    if np.any(svals[..., -1] <= RETRACT_RADIUS):
        raise RetractionDomainError(
            f"smallest singular value {float(np.min(svals)):.3f} <= {RETRACT_RADIUS}"
        )
    return _polar_factor(x)


def _polar_factor(x: np.ndarray) -> np.ndarray:
    """Special-orthogonal polar factor, no domain guard."""
    U, _, Vt = np.linalg.svd(x)
    det = np.linalg.det(U @ Vt)
    U = U.copy()
    U[..., :, -1] *= np.sign(det)[..., None] if np.ndim(det) else np.sign(det)
    return U @ Vt


def body_velocity(R: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Body angular velocity ``Omega`` with ``V = R hat(Omega)``."""
    return _vee_unchecked(_skew_part(np.swapaxes(R, -1, -2) @ V))


def geodesic_acceleration(M: ManifoldSpec, q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Ambient second derivative of the geodesic through ``(q, v)``.

    This is the curve acceleration for which the covariant acceleration
    vanishes: ``-<v, v> q`` on S2, and on SO(3) the free rigid body
    ``R ((Omega^)^2 + hat(Omegadot))`` with ``Omegadot = -I^{-1}(Omega x I Omega)``.
    """
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    if M.kind is ManifoldKind.SPHERE_S2:
        return -_dot(v, v)[..., None] * q
    inertia = M.inertia_array
    omega = body_velocity(q, v)
    omega_dot = -cross3(omega, inertia * omega) / inertia
    W = hat(omega)
    return q @ (W @ W + hat(omega_dot))


def covariant_acceleration_body(M: ManifoldSpec, q: np.ndarray, v: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Body coordinates of the covariant acceleration of a curve on SO(3).

    For a curve with velocity ``v = R hat(Omega)`` and ambient second
    derivative ``a``, returns ``Omegadot + I^{-1}(Omega x I Omega)``.
    """
    if M.kind is not ManifoldKind.ROTATION_SO3:
        raise GeometryError("body-coordinate acceleration is defined on SO(3) only")
    inertia = M.inertia_array
    omega = body_velocity(q, v)
    # Rddot = R (Omega^)^2 + R hat(Omegadot) along curves on SO(3).
    W = hat(omega)
    omega_dot = _vee_unchecked(_skew_part(np.swapaxes(q, -1, -2) @ a - W @ W))
    return omega_dot + cross3(omega, inertia * omega) / inertia


def tangent_basis(M: ManifoldSpec, q: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal tangent basis in the ambient inner product.

    Returns an ``(ambient_dim, dim)`` matrix of flattened column vectors.
    """
    q = np.asarray(q, dtype=float)
    if M.kind is ManifoldKind.SPHERE_S2:
        k = int(np.argmin(np.abs(q)))
        e = np.zeros(3)
        e[k] = 1.0
        t1 = e - q[k] * q
        t1 /= np.linalg.norm(t1)
        t2 = cross3(q, t1)
        return np.stack([t1, t2], axis=1)
    cols = [(q @ hat(e)).ravel() / np.sqrt(2.0) for e in np.eye(3)]
    return np.stack(cols, axis=1)


def metric_orthonormal_basis(M: ManifoldSpec, q: np.ndarray) -> np.ndarray:
    """Tangent basis orthonormal in the base metric (column-flattened)."""
    if M.kind is ManifoldKind.SPHERE_S2:
        return tangent_basis(M, q)
    q = np.asarray(q, dtype=float)
    inertia = M.inertia_array
    cols = [(q @ hat(e / np.sqrt(i))).ravel() for e, i in zip(np.eye(3), inertia)]
    return np.stack(cols, axis=1)


def random_point(M: ManifoldSpec, rng: np.random.Generator) -> np.ndarray:
    if M.kind is ManifoldKind.SPHERE_S2:
        x = rng.standard_normal(3)
        return x / np.linalg.norm(x)
    return _polar_factor(rng.standard_normal((3, 3)))


def random_tangent(
    M: ManifoldSpec, q: np.ndarray, rng: np.random.Generator, scale: float = 1.0
) -> np.ndarray:
    return project_tangent(M, q, scale * rng.standard_normal(M.point_shape))


class ShapingKind(enum.Enum):
    SAME_AS_BASE = "same"
    SCALED_BASE = "scaled"
    AMBIENT_QUADRATIC = "ambient_quadratic"


@dataclass(frozen=True, eq=False)
class MetricSpec:
    """Base metric (canonical for the manifold) plus the shaping metric.

    ``quadratic_form`` is the symmetric positive definite 3x3 matrix ``B``
    of the ambient quadratic shaping ``v^T B v``; it is only meaningful on
    S2 and must be ``None`` otherwise.
    """

    manifold: ManifoldSpec
    shaping: ShapingKind = ShapingKind.SAME_AS_BASE
    scale: float = 1.0
    quadratic_form: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.shaping is ShapingKind.SCALED_BASE and self.scale <= 0.0:
            raise GeometryError(f"shaping scale must be positive, got {self.scale}")
        if self.shaping is ShapingKind.AMBIENT_QUADRATIC:
            if self.manifold.kind is not ManifoldKind.SPHERE_S2:
                raise GeometryError("ambient quadratic shaping is only defined on S2")
            B = np.asarray(self.quadratic_form, dtype=float)
            if B.shape != (3, 3) or np.max(np.abs(B - B.T)) > 1e-12:
                raise GeometryError("quadratic_form must be a symmetric 3x3 matrix")
            if np.min(np.linalg.eigvalsh(B)) <= 0.0:
                raise GeometryError("quadratic_form must be positive definite")
            object.__setattr__(self, "quadratic_form", B)


def base_inner(M: ManifoldSpec, q: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Base-metric inner product of two tangent vectors at ``q``."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if M.kind is ManifoldKind.SPHERE_S2:
        return _dot(v, w)
    q = np.asarray(q, dtype=float)
    xi = body_velocity(q, v)
    eta = body_velocity(q, w)
    return np.sum(xi * (M.inertia_array * eta), axis=-1)


def shaping_inner(ms: MetricSpec, q: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Shaping-metric inner product of two tangent vectors at ``q``."""
    if ms.shaping is ShapingKind.SAME_AS_BASE:
        return base_inner(ms.manifold, q, v, w)
    if ms.shaping is ShapingKind.SCALED_BASE:
        return ms.scale * base_inner(ms.manifold, q, v, w)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    return np.sum(v * (w @ ms.quadratic_form.T), axis=-1)


def metric_eval(
    ms: MetricSpec, which: str, q: np.ndarray, v: np.ndarray, w: np.ndarray
) -> np.ndarray:
    """Evaluate the ``"base"`` or ``"shaping"`` metric on tangent vectors."""
    if which == "base":
        return base_inner(ms.manifold, q, v, w)
    if which == "shaping":
        return shaping_inner(ms, q, v, w)
    raise GeometryError(f"unknown metric selector {which!r}")


def sharp_flat(ms: MetricSpec, q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """The tangent vector ``w`` with ``g(w, .) = gshape(v, .)`` fiberwise.

    This composition of the shaping flat with the base sharp is what the
    feedback law applies to the velocity residual.  For the base and scaled
    shapings it is scalar multiplication; for an ambient quadratic form B on
    S2 it is ``q``-projected ``B v``.
    """
    v = np.asarray(v, dtype=float)
    if ms.shaping is ShapingKind.SAME_AS_BASE:
        return v
    if ms.shaping is ShapingKind.SCALED_BASE:
        return ms.scale * v
    return project_tangent(ms.manifold, q, v @ ms.quadratic_form.T)


def restricted_shaping_eigenvalues(ms: MetricSpec, q: np.ndarray) -> np.ndarray:
    """Eigenvalues of the shaping form in a base-orthonormal tangent basis.

    These are the Rayleigh extremes of ``gshape(v, v)`` over the base-metric
    unit sphere in the tangent space at ``q``, sorted ascending.
    """
    M = ms.manifold
    basis = metric_orthonormal_basis(M, q)
    d = M.dim
    cols = [basis[:, i].reshape(M.point_shape) for i in range(d)]
    form = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            form[i, j] = form[j, i] = float(shaping_inner(ms, q, cols[i], cols[j]))
    return np.linalg.eigvalsh(form)
