"""Closed-loop integration, retraction bookkeeping, monodromy matrices."""

import numpy as np
import pytest

from naimstab.feedback import (
    ActuationKind,
    ActuationModel,
    ControlLaw,
    FeedbackConfig,
    realized_accel,
)
from naimstab.fields import (
    ReferenceField,
    _rk4_increment,
    eval_field,
    flow_reference,
    linear_projected_s2,
    rotation_s2,
    spin_so3,
)
from naimstab.integrate import (
    Monodromy,
    OffGraphError,
    SimulationError,
    TangentState,
    Trajectory,
    _flat_rhs,
    monodromy,
    simulate,
    step,
    tangent_bundle_basis,
)
from naimstab.manifolds import (
    GeometryError,
    ManifoldKind,
    ManifoldSpec,
    MetricSpec,
    SPHERE,
    base_inner,
    hat,
    point_defect,
    random_point,
    random_tangent,
    tangent_defect,
)

SO3 = ManifoldSpec(ManifoldKind.ROTATION_SO3, (1.0, 2.0, 3.0))
E1 = np.array([1.0, 0.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])


def make_cfg(M, field, epsilon=1.2, law=ControlLaw.KODITSCHEK, u=None):
    return FeedbackConfig(
        manifold=M,
        metric=MetricSpec(M),
        field=field,
        epsilon=epsilon,
        actuation=ActuationModel(),
        law=law,
        constant_controls=u,
    )


FIG_CFG = make_cfg(SPHERE, rotation_s2(E3), epsilon=1.2)
SO3_CFG = make_cfg(SO3, spin_so3(E1), epsilon=1.0)


# --------------------------------------------------------------- rhs/step


def test_closed_loop_rhs_on_graph_example():
    from naimstab.integrate import closed_loop_rhs

    q = np.array([1.0, 0, 0])
    v = np.array([0.0, 1, 0])  # equals X(q), so the control is pure transport
    dq, dv = closed_loop_rhs(FIG_CFG, q, v)
    assert np.allclose(dq, v)
    # covariant part projects to zero here; only the geodesic term remains
    assert np.allclose(dv, [-1.0, 0, 0], atol=1e-14)


def test_closed_loop_rhs_zero_field_at_rest():
    from naimstab.integrate import closed_loop_rhs

    cfg = make_cfg(SPHERE, linear_projected_s2(np.zeros((3, 3))))
    q = np.array([0.0, 0, 1])
    v = np.zeros(3)
    dq, dv = closed_loop_rhs(cfg, q, v)
    assert np.allclose(dq, 0) and np.allclose(dv, 0, atol=1e-15)


def test_step_small_dt_is_near_identity():
    rng = np.random.default_rng(0)
    q = random_point(SPHERE, rng)
    v = random_tangent(SPHERE, q, rng)
    out = step(FIG_CFG, TangentState(q, v), 1e-8)
    assert np.linalg.norm(out.q - q) < 1e-7
    assert np.linalg.norm(out.v - v) < 1e-7


def test_unprojected_step_drift_is_tiny():
    # a raw RK4 step from on-manifold data leaves the constraints satisfied
    # to much better than the retraction tolerance at dt = 1e-3
    rng = np.random.default_rng(1)
    for cfg in [FIG_CFG, SO3_CFG]:
        M = cfg.manifold
        f = _flat_rhs(cfg)
        for _ in range(20):
            q = random_point(M, rng)
            v = random_tangent(M, q, rng)
            y = np.concatenate([q.ravel(), v.ravel()])
            y1 = y + _rk4_increment(f, y, 1e-3)
            n = M.ambient_dim
            q1 = y1[:n].reshape(M.point_shape)
            v1 = y1[n:].reshape(M.point_shape)
            assert point_defect(M, q1) < 1e-12
            assert tangent_defect(M, q1, v1) < 1e-12


def test_state_validation():
    with pytest.raises(GeometryError):
        TangentState.make(SPHERE, np.array([1.1, 0, 0]), np.array([0.0, 1, 0]))
    with pytest.raises(GeometryError):
        TangentState.make(SPHERE, np.array([1.0, 0, 0]), np.array([1.0, 0, 0]))
    st = TangentState.make(SO3, np.eye(3), hat(np.array([0.1, 0, 0])))
    assert st.q.shape == (3, 3)


# --------------------------------------------------------------- simulate


def test_geodesic_great_circle_period():
    # constant (zero) forcing from the equator: a great circle, period 2*pi
    cfg = make_cfg(SPHERE, rotation_s2(E3), law=ControlLaw.CONSTANT)
    dt = 2.0 * np.pi / 6283
    state = TangentState(np.array([1.0, 0, 0]), np.array([0.0, 1, 0]))
    traj = simulate(cfg, state, 2.0 * np.pi, dt=dt)
    assert np.linalg.norm(traj.qs[-1] - state.q) < 1e-6
    assert np.linalg.norm(traj.vs[-1] - state.v) < 1e-6


def test_graph_invariance_matches_reference_flow():
    # started on the graph, the base point tracks the reference flow
    rng = np.random.default_rng(2)
    for cfg, T in [(FIG_CFG, 10.0), (SO3_CFG, 5.0)]:
        M = cfg.manifold
        q0 = random_point(M, rng)
        v0 = eval_field(cfg.field, q0)
        traj = simulate(cfg, TangentState(q0, v0), T, dt=1e-3, record_every=100)
        ref = flow_reference(M, cfg.field, q0, T, dt=1e-3, record_every=100)
        assert np.allclose(traj.times, ref.times)
        assert float(np.max(np.abs(traj.qs - ref.points))) < 1e-6
        fields = eval_field(cfg.field, traj.qs.reshape((-1,) + M.point_shape))
        res = traj.vs - fields.reshape(traj.vs.shape)
        assert float(np.max(np.abs(res))) < 1e-6


def test_speed_bounded_and_residual_monotone():
    q0 = np.array([1.0, 0, 0])
    v0 = np.array([0.0, 0.5, 0.6])
    traj = simulate(FIG_CFG, TangentState(q0, v0), 10.0, dt=1e-3)
    speeds = np.einsum("ij,ij->i", traj.vs, traj.vs)
    assert float(np.max(speeds)) < 10.0  # no blow-up on the compact manifold
    y = traj.vs - eval_field(FIG_CFG.field, traj.qs)
    res = np.einsum("ij,ij->i", y, y)
    assert np.all(np.diff(res) <= 1e-12)
    assert res[-1] < 1e-6 * res[0]


def test_simulate_reports_retraction_failure():
    state = TangentState(np.array([1.0, 0, 0]), np.array([0.0, 3, 0]))
    with pytest.raises(SimulationError) as exc:
        simulate(FIG_CFG, state, 10.0, dt=5.0)
    assert "retraction failed" in str(exc.value)
    assert exc.value.t == 5.0


def test_simulate_rejects_bad_grid():
    state = TangentState(np.array([1.0, 0, 0]), np.array([0.0, 1, 0]))
    with pytest.raises(GeometryError):
        simulate(FIG_CFG, state, 1.0, dt=0.3)


def test_recording_contract():
    state = TangentState(np.array([1.0, 0, 0]), np.array([0.0, 1, 0]))
    traj = simulate(FIG_CFG, state, 1.0, dt=1e-3, record_every=7)
    assert len(traj) == 1 + 1000 // 7 + 1
    assert traj.times[0] == 0.0 and traj.times[-1] == pytest.approx(1.0)
    assert np.all(np.diff(traj.times) > 0)
    assert traj.qs.shape == (len(traj), 3) and traj.vs.shape == (len(traj), 3)
    assert traj.accels is None
    st = traj.state(SPHERE, 0)
    assert np.allclose(st.q, state.q) and np.allclose(st.v, state.v)


def test_record_accel():
    state = TangentState(np.array([1.0, 0, 0]), np.array([0.0, 0.5, 0.6]))
    traj = simulate(FIG_CFG, state, 0.1, dt=1e-3, record_every=10, record_accel=True)
    assert traj.accels is not None and traj.accels.shape == traj.vs.shape
    assert np.allclose(traj.accels[0], realized_accel(FIG_CFG, state.q, state.v))


def test_so3_trajectory_rows_are_flat():
    state = TangentState(np.eye(3), hat(E1))
    traj = simulate(SO3_CFG, state, 0.5, dt=1e-3)
    assert traj.qs.shape[1] == 9
    assert np.allclose(traj.qs[0], np.eye(3).ravel())
    st = traj.state(SO3, len(traj) - 1)
    assert st.q.shape == (3, 3)


# -------------------------------------------------------- bundle geometry


def test_tangent_bundle_basis_shapes_and_orthonormality():
    rng = np.random.default_rng(3)
    for M in [SPHERE, SO3]:
        q = random_point(M, rng)
        v = random_tangent(M, q, rng)
        B = tangent_bundle_basis(M, q, v)
        assert B.shape == (2 * M.ambient_dim, 2 * M.dim)
        assert np.allclose(B.T @ B, np.eye(2 * M.dim), atol=1e-12)


def test_tangent_bundle_basis_satisfies_linearized_constraints():
    rng = np.random.default_rng(4)
    q = random_point(SPHERE, rng)
    v = random_tangent(SPHERE, q, rng)
    B = tangent_bundle_basis(SPHERE, q, v)
    for j in range(B.shape[1]):
        dq, dv = B[:3, j], B[3:, j]
        assert abs(np.dot(q, dq)) < 1e-12
        assert abs(np.dot(dq, v) + np.dot(q, dv)) < 1e-12


def test_tangent_bundle_basis_second_order_defect():
    # moving along a basis direction leaves the constraints to O(t^2)
    rng = np.random.default_rng(5)
    t = 1e-4
    for M in [SPHERE, SO3]:
        q = random_point(M, rng)
        v = random_tangent(M, q, rng)
        B = tangent_bundle_basis(M, q, v)
        n = M.ambient_dim
        for j in range(B.shape[1]):
            q1 = (q.ravel() + t * B[:n, j]).reshape(M.point_shape)
            v1 = (v.ravel() + t * B[n:, j]).reshape(M.point_shape)
            assert point_defect(M, q1) < 100 * t**2
            assert tangent_defect(M, q1, v1) < 100 * t**2


# --------------------------------------------------------------- monodromy


def on_graph_state(cfg, rng):
    q = random_point(cfg.manifold, rng)
    return TangentState(q, eval_field(cfg.field, q))


def test_monodromy_requires_graph_base():
    rng = np.random.default_rng(6)
    q = random_point(SPHERE, rng)
    v = eval_field(FIG_CFG.field, q) + 0.5 * random_tangent(SPHERE, q, rng)
    with pytest.raises(OffGraphError):
        monodromy(FIG_CFG, TangentState(q, v), 0.5)


def test_monodromy_zero_time_is_the_projection():
    rng = np.random.default_rng(7)
    for cfg in [FIG_CFG, SO3_CFG]:
        state = on_graph_state(cfg, rng)
        B = tangent_bundle_basis(cfg.manifold, state.q, state.v)
        P = B @ B.T
        mono = monodromy(cfg, state, 0.0)
        assert mono.tau == 0.0
        assert np.allclose(mono.image_q, state.q, atol=1e-12)
        assert float(np.max(np.abs(mono.matrix - P))) < 1e-6


def test_monodromy_maps_tangent_to_tangent():
    rng = np.random.default_rng(8)
    for cfg, tau in [(FIG_CFG, 0.5), (SO3_CFG, 0.3)]:
        state = on_graph_state(cfg, rng)
        mono = monodromy(cfg, state, tau, dt=1e-3)
        B_in = tangent_bundle_basis(cfg.manifold, state.q, state.v)
        B_out = tangent_bundle_basis(cfg.manifold, mono.image_q, mono.image_v)
        P_out = B_out @ B_out.T
        mapped = mono.matrix @ B_in
        leak = mapped - P_out @ mapped
        assert float(np.max(np.abs(leak))) < 1e-6


def test_monodromy_composition():
    rng = np.random.default_rng(9)
    state = on_graph_state(FIG_CFG, rng)
    tau = 0.5
    m1 = monodromy(FIG_CFG, state, tau, dt=1e-3)
    mid = TangentState(m1.image_q, m1.image_v)
    m2 = monodromy(FIG_CFG, mid, tau, dt=1e-3)
    m_full = monodromy(FIG_CFG, state, 2.0 * tau, dt=1e-3)
    B_in = tangent_bundle_basis(SPHERE, state.q, state.v)
    gap = (m_full.matrix - m2.matrix @ m1.matrix) @ B_in
    assert float(np.max(np.abs(gap))) < 1e-4


def test_monodromy_image_is_the_flow():
    rng = np.random.default_rng(10)
    state = on_graph_state(FIG_CFG, rng)
    mono = monodromy(FIG_CFG, state, 0.25, dt=1e-3)
    traj = simulate(FIG_CFG, state, 0.25, dt=1e-3)
    assert np.allclose(mono.image_q, traj.qs[-1], atol=1e-12)
    assert np.allclose(mono.image_v, traj.vs[-1], atol=1e-12)
