"""Numerical certificates for normal attraction of the reference graph.

Four families of checks:

* residual decay: the squared shaping-norm residual ``g(y, y)`` along a
  run, with exact-rate and sandwich-bound comparisons,
* norm-equivalence constants ``c <= C`` of the shaping metric against the
  base metric, estimated by exact fiberwise eigenvalue extremization at
  sampled base points,
* asymptotic phase: distance to a matched reference orbit seeded by
  flowing a late sample backward, with a fitted coalescence rate,
* finite-horizon bunching certificates from monodromy block norms, both
  the k-th order normal-attraction inequality and the center-bunching
  inequality with a 1/2 decay budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .manifolds import (
    GeometryError,
    ManifoldSpec,
    MetricSpec,
    base_inner,
    random_point,
    restricted_shaping_eigenvalues,
    tangent_basis,
)
from .fields import (
    ReferenceField,
    eval_field,
    field_jacobian_apply,
    flow_reference,
    flow_reference_point,
)
from .feedback import FeedbackConfig
from .integrate import (
    DEFAULT_DT,
    DEFAULT_FD_STEP,
    Monodromy,
    TangentState,
    Trajectory,
    monodromy,
)

DECAY_BUDGET = 0.5
FIT_DROP_FRACTION = 0.05
FIT_FLOOR = 1e-12
PHASE_WINDOW = (1e-10, 1e-2)
PHASE_RESIDUAL_TOL = 1e-6
DEFAULT_TAUS = (0.5, 1.0, 2.0, 4.0)


class NotYetConvergedError(RuntimeError):
    """The trajectory has not settled enough for phase matching."""


class FrameError(GeometryError):
    """Could not build the graph frame (degenerate differential)."""


@dataclass(eq=False)
class ResidualSeries:
    """Squared shaping-norm of the velocity residual per recorded sample."""

    times: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.times)


def residual_series(
    cfg: FeedbackConfig, traj: Trajectory, which: str = "base"
) -> ResidualSeries:
    """Series ``g(y, y)`` with ``y = v - X(q)`` in the base (or shaping) metric."""
    M = cfg.manifold
    shape = (len(traj),) + M.point_shape
    qs = traj.qs.reshape(shape)
    vs = traj.vs.reshape(shape)
    ys = vs - eval_field(cfg.field, qs)
    if which == "base":
        vals = base_inner(M, qs, ys, ys)
    else:
        from .manifolds import shaping_inner

        vals = shaping_inner(cfg.metric, qs, ys, ys)
    return ResidualSeries(traj.times.copy(), np.asarray(vals, dtype=float))


def fit_exponential_rate(
    times: np.ndarray,
    values: np.ndarray,
    drop_initial_fraction: float = FIT_DROP_FRACTION,
    floor: float = FIT_FLOOR,
) -> tuple[float, float]:
    """Least-squares fit of ``values ~ prefactor * exp(-rate * t)``.

    Drops an initial transient fraction and samples at or below ``floor``.
    Returns ``(rate, prefactor)``; rate is positive for decaying data.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    start = int(np.ceil(drop_initial_fraction * len(times)))
    keep = np.arange(len(times)) >= start
    keep &= values > floor
    if int(np.sum(keep)) < 2:
        raise NotYetConvergedError("not enough samples above the floor to fit a rate")
    t = times[keep]
    logv = np.log(values[keep])
    slope, intercept = np.polyfit(t, logv, 1)
    return float(-slope), float(np.exp(intercept))


@dataclass(frozen=True)
class MetricBounds:
    """Fiberwise Rayleigh bounds of the shaping metric over the base metric."""

    c: float
    C: float
    samples: int

    def __post_init__(self) -> None:
        if not (0.0 < self.c <= self.C):
            raise GeometryError(f"bounds must satisfy 0 < c <= C, got ({self.c}, {self.C})")


def metric_bounds(ms: MetricSpec, samples: int = 20000, seed: int = 0) -> MetricBounds:
    """Estimate ``c = min`` and ``C = max`` of ``gshape(v, v)`` over unit ``v``.

    Base points are sampled uniformly; at each the restricted form is
    extremized exactly by an eigenvalue computation, so the estimate error
    comes only from base-point coverage.  Shapings proportional to the base
    metric have constant fibers and return exactly ``c = C = scale``.
    """
    from .manifolds import ShapingKind, cross3

    if ms.shaping is ShapingKind.SAME_AS_BASE:
        return MetricBounds(1.0, 1.0, samples)
    if ms.shaping is ShapingKind.SCALED_BASE:
        return MetricBounds(ms.scale, ms.scale, samples)

    # Ambient quadratic shaping on S2: batch the 2x2 restricted forms.
    rng = np.random.default_rng(seed)
    qs = rng.standard_normal((samples, 3))
    qs /= np.linalg.norm(qs, axis=1, keepdims=True)
    k = np.argmin(np.abs(qs), axis=1)
    t1 = np.eye(3)[k] - qs[np.arange(samples), k][:, None] * qs
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = cross3(qs, t1)
    B = ms.quadratic_form
    a11 = np.einsum("ni,ij,nj->n", t1, B, t1)
    a22 = np.einsum("ni,ij,nj->n", t2, B, t2)
    a12 = np.einsum("ni,ij,nj->n", t1, B, t2)
    mean = 0.5 * (a11 + a22)
    radius = np.sqrt(0.25 * (a11 - a22) ** 2 + a12**2)
    return MetricBounds(float(np.min(mean - radius)), float(np.max(mean + radius)), samples)


@dataclass(frozen=True)
class SandwichVerdict:
    """Containment of the residual between the two exponential envelopes.

    Margins are worst signed violations normalized by the initial residual;
    the pass flags gate on them, so a run stays verifiable after the series
    has decayed into float-cancellation noise.  Ratio excesses report the
    multiplicative overshoot (0 when a bound holds pointwise) and are
    informational: deep in the tail they measure noise, not dynamics.
    """

    ok_upper: bool
    ok_lower: bool
    upper_ratio_excess: float
    lower_ratio_excess: float
    upper_margin: float
    lower_margin: float

    @property
    def ok(self) -> bool:
        return self.ok_upper and self.ok_lower


def sandwich_check(
    rs: ResidualSeries, epsilon: float, bounds: MetricBounds, tol: float = 1e-6
) -> SandwichVerdict:
    """Check ``exp(-2C t / eps) g0 <= g(y, y) <= exp(-2c t / eps) g0``."""
    g0 = float(rs.values[0])
    t = rs.times
    vals = rs.values
    if g0 == 0.0:
        ok = bool(np.all(vals <= tol))
        return SandwichVerdict(ok, True, 0.0, 0.0, float(np.max(vals, initial=0.0)), 0.0)
    ub = g0 * np.exp(-2.0 * bounds.c / epsilon * t)
    lb = g0 * np.exp(-2.0 * bounds.C / epsilon * t)
    upper_excess = float(np.max(vals / ub - 1.0))
    positive = np.where(vals > 0.0, vals, np.inf)
    lower_excess = float(np.max(np.where(vals > 0.0, lb / positive, np.where(lb > 0.0, np.inf, 0.0)) - 1.0))
    upper_margin = float(np.max((vals - ub) / g0))
    lower_margin = float(np.max((lb - vals) / g0))
    return SandwichVerdict(
        upper_margin <= tol,
        lower_margin <= tol,
        max(upper_excess, 0.0),
        max(lower_excess, 0.0),
        upper_margin,
        lower_margin,
    )


@dataclass(eq=False)
class CoalescenceReport:
    """Distance to the matched reference orbit and its fitted decay."""

    t_match: float
    times: np.ndarray
    distances: np.ndarray
    rate: float
    prefactor: float
    terminal_distance: float


def asymptotic_phase(
    cfg: FeedbackConfig,
    traj: Trajectory,
    t_match: float,
    dt: float = DEFAULT_DT,
    fit_tail_margin: float = 0.0,
) -> CoalescenceReport:
    """Match a reference orbit at ``t_match`` and fit the coalescence rate.

    The candidate reference seeds at ``t = 0`` by flowing the sample at
    ``t_match`` backward.  The rate fit runs over samples whose distance
    lies in ``PHASE_WINDOW``; ``fit_tail_margin`` additionally excludes
    times within that margin of ``t_match``, where the matching error
    contaminates the exponential.
    """
    M = cfg.manifold
    idx = int(np.argmin(np.abs(traj.times - t_match)))
    t_match = float(traj.times[idx])
    rs = residual_series(cfg, traj)
    if rs.values[idx] > PHASE_RESIDUAL_TOL:
        raise NotYetConvergedError(
            f"squared residual {rs.values[idx]:.3e} at t={t_match} exceeds {PHASE_RESIDUAL_TOL}"
        )
    anchor = traj.qs[idx].reshape(M.point_shape)
    seed = flow_reference_point(M, cfg.field, anchor, -t_match, dt) if t_match > 0 else anchor

    # Rebuild the reference on the trajectory's sampling grid.
    n_record = len(traj) - 1
    if n_record > 0:
        spacing = traj.times[1] - traj.times[0]
        record_every = max(1, int(round(spacing / dt)))
        ref = flow_reference(M, cfg.field, seed, t_match if t_match > 0 else 0.0, dt, record_every)
        pts = ref.points
    else:
        pts = seed.ravel()[None, :]
    m = min(len(pts), len(traj))
    dists = np.linalg.norm(traj.qs[:m] - pts[:m], axis=1)
    times = traj.times[:m]

    lo, hi = PHASE_WINDOW
    window = (dists >= lo) & (dists <= hi) & (times <= t_match - fit_tail_margin)
    if int(np.sum(window)) >= 2:
        rate, pref = fit_exponential_rate(times[window], dists[window], drop_initial_fraction=0.0, floor=0.0)
    else:
        rate, pref = float("nan"), float("nan")
    term = float(dists[np.argmin(np.abs(times - t_match))])
    return CoalescenceReport(t_match, times, dists, rate, pref, term)


@dataclass(eq=False)
class PointCertificate:
    """Monodromy block norms and bunching verdicts at one base point.

    ``tangent_norm``/``tangent_conorm`` are the largest/smallest singular
    values of the graph-tangent block, ``normal_norm`` the largest of the
    normal block.  ``naim_ok[i]`` is the k-th order normal-attraction check
    ``normal_norm <= budget * tangent_conorm^i``; ``bunching_ok[i]`` is
    ``tangent_norm^i * normal_norm < budget * tangent_conorm``.
    """

    base_q: np.ndarray
    tau: float
    k: int
    tangent_norm: float
    tangent_conorm: float
    normal_norm: float
    decay_budget: float
    naim_ok: list[bool]
    bunching_ok: list[bool]

    @property
    def passed(self) -> bool:
        return all(self.naim_ok) and all(self.bunching_ok)

    def consistent(self) -> bool:
        """Booleans recomputed from the recorded scalars must match."""
        for i in range(self.k + 1):
            if self.naim_ok[i] != (self.normal_norm <= self.decay_budget * self.tangent_conorm**i):
                return False
            if self.bunching_ok[i] != (
                self.tangent_norm**i * self.normal_norm < self.decay_budget * self.tangent_conorm
            ):
                return False
        return (
            self.tangent_norm >= self.tangent_conorm >= 0.0 and self.normal_norm >= 0.0
        )


def graph_frames(
    cfg: FeedbackConfig, q: np.ndarray, weight_sqrt: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal frames of the graph tangent and its normal complement.

    Both live inside the tangent space of TQ at ``(q, X(q))`` in the flat
    ambient chart.  ``weight_sqrt`` optionally replaces the ambient inner
    product by a diagonally weighted one (frames are orthonormal after
    scaling coordinates by it).
    """
    from .integrate import tangent_bundle_basis

    M = cfg.manifold
    n = M.ambient_dim
    v = eval_field(cfg.field, q)
    tb = tangent_basis(M, q)
    cols = []
    for i in range(M.dim):
        a = tb[:, i].reshape(M.point_shape)
        da = field_jacobian_apply(cfg.field, q, a)
        cols.append(np.concatenate([a.ravel(), da.ravel()]))
    G = np.stack(cols, axis=1)
    if weight_sqrt is not None:
        G = weight_sqrt[:, None] * G
    Tq, Rq = np.linalg.qr(G)
    if np.min(np.abs(np.diag(Rq))) < 1e-12:
        raise FrameError("differential of the reference field is rank-deficient")

    full = tangent_bundle_basis(M, q, v)
    if weight_sqrt is not None:
        full = weight_sqrt[:, None] * full
        full, _ = np.linalg.qr(full)
    comp = full - Tq @ (Tq.T @ full)
    U, s, _ = np.linalg.svd(comp, full_matrices=False)
    Nq = U[:, : M.dim]
    if s[M.dim - 1] < 1e-9:
        raise FrameError("normal complement collapsed")
    return Tq, Nq


def bunching_certificate(
    cfg: FeedbackConfig,
    state: TangentState,
    tau: float,
    k: int,
    dt: float = DEFAULT_DT,
    fd_step: float = DEFAULT_FD_STEP,
    decay_budget: float = DECAY_BUDGET,
    weight: np.ndarray | None = None,
) -> PointCertificate:
    """Finite-horizon bunching certificate at one graph point.

    Builds the monodromy of the time-``tau`` flow, expresses it in graph
    frames at the base and at the image, and evaluates, for each
    ``0 <= i <= k``, the normal-attraction inequality and the finite-time
    center-bunching inequality with the given decay budget.  ``weight``
    optionally re-weights the ambient inner product used by the frames
    (the verdicts of healthy certificates should not depend on it).
    """
    mono = monodromy(cfg, state, tau, dt=dt, fd_step=fd_step)
    w_sqrt = None if weight is None else np.sqrt(np.asarray(weight, dtype=float))
    T_in, N_in = graph_frames(cfg, state.q, w_sqrt)
    T_out, N_out = graph_frames(cfg, mono.image_q, w_sqrt)
    A = mono.matrix
    if w_sqrt is not None:
        A = (w_sqrt[:, None] * A) / w_sqrt[None, :]
    A_T = T_out.T @ A @ T_in
    A_N = N_out.T @ A @ N_in
    s_T = np.linalg.svd(A_T, compute_uv=False)
    s_N = np.linalg.svd(A_N, compute_uv=False)
    t_norm, t_conorm = float(s_T[0]), float(s_T[-1])
    n_norm = float(s_N[0])
    naim = [bool(n_norm <= decay_budget * t_conorm**i) for i in range(k + 1)]
    bunch = [bool(t_norm**i * n_norm < decay_budget * t_conorm) for i in range(k + 1)]
    return PointCertificate(
        state.q.copy(), tau, k, t_norm, t_conorm, n_norm, decay_budget, naim, bunch
    )


@dataclass(eq=False)
class BunchingReport:
    """Certificates across sampled base points and horizons.

    When more than one horizon is present, per-point exponential rates are
    fitted across horizons: ``normal_rate`` from the normal block norm and
    ``tangent_rate`` from the tangent conorm.  The asymptotic check
    ``asymptotic_naim_ok[i]`` requires the normal decay rate to dominate
    ``i`` times the tangential one; it is invariant under any constant
    rescaling of the frame inner products.
    """

    taus: list[float]
    k: int
    certificates: list[list[PointCertificate]]  # [point][tau index]
    normal_rates: list[float] = field(default_factory=list)
    tangent_rates: list[float] = field(default_factory=list)

    @property
    def n_points(self) -> int:
        return len(self.certificates)

    @property
    def all_passed(self) -> bool:
        return all(cert.passed for row in self.certificates for cert in row)

    @property
    def failures(self) -> int:
        return sum(1 for row in self.certificates for cert in row if not cert.passed)

    def asymptotic_naim_ok(self, i: int) -> list[bool]:
        return [
            bool(a > i * t)
            for a, t in zip(self.normal_rates, self.tangent_rates)
        ]


def sample_orbit_states(
    cfg: FeedbackConfig,
    n_base: int,
    seed: int,
    flow_horizon: float = 5.0,
    dt: float = DEFAULT_DT,
) -> list[TangentState]:
    """Graph states sampled along reference orbits (deterministic in seed)."""
    rng = np.random.default_rng(seed)
    M = cfg.manifold
    out = []
    for _ in range(n_base):
        q0 = random_point(M, rng)
        t_flow = float(rng.uniform(0.0, flow_horizon))
        n = int(round(t_flow / dt))
        q = flow_reference_point(M, cfg.field, q0, n * dt, dt) if n > 0 else q0
        out.append(TangentState(q, eval_field(cfg.field, q)))
    return out


def certificate_sweep(
    cfg: FeedbackConfig,
    n_base: int,
    taus: tuple[float, ...] = DEFAULT_TAUS,
    k: int = 3,
    seed: int = 0,
    dt: float = DEFAULT_DT,
    fd_step: float = DEFAULT_FD_STEP,
    decay_budget: float = DECAY_BUDGET,
) -> BunchingReport:
    """Bunching certificates at base points sampled from reference orbits."""
    states = sample_orbit_states(cfg, n_base, seed, dt=dt)
    certs = [
        [bunching_certificate(cfg, st, tau, k, dt, fd_step, decay_budget) for tau in taus]
        for st in states
    ]
    report = BunchingReport(list(taus), k, certs)
    if len(taus) >= 2:
        tau_arr = np.asarray(taus, dtype=float)
        for row in certs:
            n_norms = np.array([c.normal_norm for c in row])
            t_conorms = np.array([max(c.tangent_conorm, 1e-300) for c in row])
            a_n = -np.polyfit(tau_arr, np.log(np.maximum(n_norms, 1e-300)), 1)[0]
            a_t = -np.polyfit(tau_arr, np.log(t_conorms), 1)[0]
            report.normal_rates.append(float(a_n))
            report.tangent_rates.append(float(a_t))
    return report
