import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptive_mpc import setid
from adaptive_mpc.basis import BasisFamily, RegressorDynamics, build_dynamics
from adaptive_mpc.config import ConstraintSet, ControllerConfig
from adaptive_mpc.explore import (
    PhiHistory,
    cofactor_vector,
    det_linearization,
    explore_step,
    output_envelope,
    volume_bound,
)
from adaptive_mpc.fhocp import build_dbar, solve_fhocp
from adaptive_mpc.setid import ModelSet

from .oracles import vertices, volume

# ---------------------------------------------------------------- envelope


def test_envelope_singleton_at_nominal_is_zero():
    H = np.array([[0.4, -0.7]])
    F = ModelSet.box(H - 1e-12, H + 1e-12)
    phis = np.array([[1.0, 2.0], [0.5, -0.3]])
    env = output_envelope(F, phis, phis @ H.T)
    np.testing.assert_allclose(env.eps_bar, 0.0, atol=1e-9)


def test_envelope_scalar_by_hand():
    F = ModelSet.box([[0.0]], [[1.0]])
    env = output_envelope(F, [[2.0]], [[1.0]])
    assert env.y_hi[0, 0] == pytest.approx(2.0)
    assert env.y_lo[0, 0] == pytest.approx(0.0, abs=1e-12)
    assert env.eps_bar[0, 0] == pytest.approx(1.0)


def test_envelope_zero_regressor():
    F = ModelSet.box([[0.0]], [[1.0]])
    env = output_envelope(F, [[0.0]], [[0.3]])
    assert env.y_hi[0, 0] == 0.0 and env.y_lo[0, 0] == 0.0
    assert env.eps_bar[0, 0] == pytest.approx(0.3)


# ------------------------------------------------------------- determinant


def test_cofactors_two_dim_example():
    dyn = RegressorDynamics(W=np.zeros((2, 2)), Z=np.eye(2), n_u=2)
    lin = det_linearization(np.array([[1.0], [0.0]]), dyn, np.zeros(2))
    np.testing.assert_allclose(lin.V, [0.0, 1.0])
    for u in (np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.zeros(2)):
        direct = np.linalg.det(np.column_stack([[1.0, 0.0], u]))
        assert lin(u) == pytest.approx(direct, abs=1e-15)


def test_zero_regressor_gives_zero_offset():
    dyn = build_dynamics(BasisFamily("laguerre", 0.5, 3), 1)
    lin = det_linearization(np.random.default_rng(0).normal(size=(3, 2)), dyn, np.zeros(3))
    assert lin.n_scalar == 0.0


def test_cofactor_dimension_check():
    with pytest.raises(ValueError):
        cofactor_vector(np.zeros((3, 3)))
    np.testing.assert_array_equal(cofactor_vector(np.zeros((1, 0))), [1.0])


@given(seed=st.integers(0, 10**6), dim=st.integers(1, 6), n_u=st.integers(1, 3))
def test_affine_determinant_identity(seed, dim, n_u):
    rng = np.random.default_rng(seed)
    dyn = RegressorDynamics(W=rng.normal(size=(dim, dim)) / dim, Z=rng.normal(size=(dim, n_u)), n_u=n_u)
    Phi_prime = rng.normal(size=(dim, dim - 1))
    phi = rng.normal(size=dim)
    lin = det_linearization(Phi_prime, dyn, phi)
    for _ in range(100):
        u = rng.normal(size=n_u)
        direct = np.linalg.det(np.column_stack([Phi_prime, dyn.W @ phi + dyn.Z @ u]))
        assert abs(direct - lin(u)) < 1e-8


def test_history_keeps_latest_columns():
    h = PhiHistory(3)
    assert h.Phi_prime.shape == (3, 2) and not np.any(h.Phi_prime)
    for k in range(1, 5):
        h.push(np.full(3, float(k)))
    np.testing.assert_array_equal(h.Phi_prime[0], [3.0, 4.0])


# ------------------------------------------------------------- volume bound


def test_volume_bound_scalar():
    assert volume_bound([[2.0]], 0.05, 0.05) == pytest.approx(0.1)
    F = setid.update(ModelSet.box([[-5.0]], [[5.0]]), [2.0], [1.0], [0.05], [0.05])
    lo, hi = vertices(F.A[0], F.b[0]).ravel()[[0, -1]]
    assert abs(hi - lo) <= 0.1 + 1e-12


def test_volume_bound_scales_inversely():
    assert volume_bound([[4.0]], 0.05, 0.05) == pytest.approx(volume_bound([[2.0]], 0.05, 0.05) / 2)
    assert volume_bound(np.zeros((2, 2)), 0.1, 0.1) == np.inf


def _after_updates(rng, dim):
    H = rng.uniform(-1, 1, dim)
    F = ModelSet.box([H - 2.0], [H + 2.0])
    eps_d, eps_v = 0.05, 0.03
    Phi = rng.normal(size=(dim, dim))
    for col in Phi.T:
        y = H @ col + rng.uniform(-1, 1) * eps_d + rng.uniform(-1, 1) * eps_v
        F = setid.update(F, col, [y], [eps_d], [eps_v])
    return F, Phi, eps_d, eps_v


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_volume_below_bound(dim):
    rng = np.random.default_rng(dim)
    for _ in range(20):
        F, Phi, eps_d, eps_v = _after_updates(rng, dim)
        assert volume(F.A[0], F.b[0]) <= volume_bound(Phi, eps_d, eps_v) * (1 + 1e-9)


# ----------------------------------------------------------------- stage 2


def _instance(fam, H, halfwidth, r, u_max=1.0, du_max=5.0, y_max=50.0, N=4):
    H = np.atleast_2d(H)
    dyn = build_dynamics(fam, 1)
    F = ModelSet.box(H - halfwidth, H + halfwidth)
    cons = ConstraintSet.boxes([u_max], [du_max], [y_max], [0.01], [0.01])
    cfg = ControllerConfig(N=N, Q=[[1.0]], S=[[0.01]], R=[[0.01]], r_explore=r, explore=True)
    return dyn, F, cons, cfg


def _stage(dyn, F, cons, cfg, H_c, phi_t, hist, y_des, u_prev=0.0, d_hat=0.0):
    d_hat = np.atleast_1d(d_hat)
    plan = solve_fhocp(phi_t, H_c @ phi_t + d_hat, F, H_c, d_hat, y_des, cfg, cons, dyn, [u_prev])
    env = output_envelope(F, plan.phis, plan.y_hat, d_hat)
    lin = det_linearization(hist, dyn, phi_t)
    new, explored = explore_step(plan, phi_t, F, env, lin, H_c, d_hat, y_des, cfg, cons, dyn, [u_prev],
                                 debug=True, hist=hist)
    return plan, new, explored, env


def test_zero_width_tube_keeps_outputs():
    fam = BasisFamily("laguerre", 0.5, 2)
    H = np.array([[0.8, 0.3]])
    dyn, F, cons, cfg = _instance(fam, H, 1e-12, r=1.0)
    phi_t = np.array([0.4, -0.1])
    hist = np.array([[0.3], [0.2]])
    plan, new, explored, env = _stage(dyn, F, cons, cfg, H, phi_t, hist, np.full((4, 1), 0.5))
    assert np.max(env.eps_bar) < 1e-8
    np.testing.assert_allclose(new.y_hat, plan.y_hat, atol=1e-8)


def test_no_dependence_on_first_input_returns_stage_one():
    fam = BasisFamily("laguerre", 0.5, 2)
    H = np.array([[0.8, 0.3]])
    dyn, F, cons, cfg = _instance(fam, H, 0.2, r=1.5)
    # history columns span Z, so V' Z = 0
    hist = dyn.Z.copy()
    plan, new, explored, _ = _stage(dyn, F, cons, cfg, H, np.array([0.1, 0.2]), hist, np.full((4, 1), 0.5))
    assert not explored
    assert new is plan


def test_scalar_instance_picks_best_input_vertex():
    fam = BasisFamily("laguerre", 0.5, 1)
    H = np.array([[1.0]])
    dyn, F, cons, cfg = _instance(fam, H, 0.5, r=1e3)
    phi_t = np.array([0.3])
    plan, new, explored, _ = _stage(dyn, F, cons, cfg, H, phi_t, np.zeros((1, 0)), np.full((4, 1), 0.2))
    assert explored
    w, z = dyn.W[0, 0], dyn.Z[0, 0]
    best = max((-1.0, 1.0), key=lambda u: abs(z * u + w * phi_t[0]))
    assert new.U[0, 0] == pytest.approx(best, abs=1e-6)


@given(seed=st.integers(0, 10**6))
def test_stage_two_respects_tubes_and_robust_constraints(seed):
    rng = np.random.default_rng(seed)
    fam = BasisFamily("laguerre", 0.5, 2)
    H = rng.uniform(0.3, 1.0, size=(1, 2))
    dyn, F, cons, cfg = _instance(fam, H, 0.15, r=1.5, u_max=1.0, du_max=0.6, y_max=1.2)
    phi_t = rng.uniform(-0.3, 0.3, 2)
    hist = rng.normal(size=(2, 1))
    d_hat = rng.uniform(-0.01, 0.01)
    H_c = H + rng.uniform(-0.05, 0.05, size=H.shape)
    y_des = np.full((cfg.N, 1), rng.uniform(-1, 1))
    plan, new, explored, env = _stage(dyn, F, cons, cfg, H_c, phi_t, hist, y_des, d_hat=d_hat)
    dbar = build_dbar(cons.E, cons.eps_d)
    centre = plan.y_hat - d_hat
    for v in vertices(F.A[0], F.b[0]):
        y = new.phis @ v
        assert np.all(np.abs(y - centre[:, 0]) <= cfg.r_explore * env.eps_bar[:, 0] + 1e-6)
        for yk in y:
            assert np.all(cons.E @ [yk] + dbar <= cons.p + 1e-6)
    assert np.all(np.abs(new.U) <= 1 + 1e-7)


def test_stage_two_never_worse_determinant():
    fam = BasisFamily("laguerre", 0.5, 2)
    H = np.array([[0.8, 0.3]])
    dyn, F, cons, cfg = _instance(fam, H, 0.3, r=1.5)
    phi_t = np.array([0.2, 0.1])
    hist = np.array([[0.5], [-0.4]])
    plan, new, explored, _ = _stage(dyn, F, cons, cfg, H, phi_t, hist, np.full((4, 1), 0.3))
    lin = det_linearization(hist, dyn, phi_t)
    assert abs(lin(new.U[0])) >= abs(lin(plan.U[0])) - 1e-9
