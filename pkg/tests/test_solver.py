import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptive_mpc.solver import LP_BACKENDS, QP_BACKENDS, LinearProgram, QuadraticProgram, SolverSettings, solve_lp, solve_qp
from adaptive_mpc.solver.problems import Status

LPS = sorted(LP_BACKENDS)
QPS = sorted(QP_BACKENDS)


@pytest.mark.parametrize("backend", LPS)
def test_lp_lower_bound(backend):
    res = solve_lp(LinearProgram(c=[1.0], A_ub=[[-1.0]], b_ub=[-1.0]), backend=backend)
    assert res.status is Status.OPTIMAL
    assert res.x[0] == pytest.approx(1.0, abs=1e-7)


@pytest.mark.parametrize("backend", LPS)
def test_lp_max_over_box(backend):
    res = solve_lp(LinearProgram(c=[1.0, 1.0], bounds=[(0, 1), (0, 1)], sense="max"), backend=backend)
    assert res.ok
    assert res.objective == pytest.approx(2.0, abs=1e-7)
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-7)


@pytest.mark.parametrize("backend", LPS)
def test_lp_triangle_incenter(backend):
    # max r s.t. the ball of radius r around (x, y) fits in x>=0, y>=0, x+y<=1
    A = np.array([[-1.0, 0.0, 1.0], [0.0, -1.0, 1.0], [1.0, 1.0, math.sqrt(2.0)]])
    res = solve_lp(LinearProgram(c=[0, 0, 1.0], A_ub=A, b_ub=[0, 0, 1.0], sense="max"), backend=backend)
    rho = 1 / (2 + math.sqrt(2))
    np.testing.assert_allclose(res.x, [rho, rho, rho], atol=1e-7)


@pytest.mark.parametrize("backend", LPS)
def test_lp_infeasible(backend):
    res = solve_lp(LinearProgram(c=[1.0], A_ub=[[1.0], [-1.0]], b_ub=[0.0, -1.0]), backend=backend)
    assert res.status is Status.INFEASIBLE
    assert not res.ok


@pytest.mark.parametrize("backend", LPS)
def test_lp_unbounded(backend):
    res = solve_lp(LinearProgram(c=[-1.0], A_ub=[[-1.0]], b_ub=[0.0]), backend=backend)
    assert res.status is Status.UNBOUNDED


@pytest.mark.parametrize("backend", LPS)
def test_lp_equality(backend):
    res = solve_lp(LinearProgram(c=[1.0, 2.0], A_eq=[[1.0, 1.0]], b_eq=[1.0], bounds=[(0, None), (0, None)]),
                   backend=backend)
    np.testing.assert_allclose(res.x, [1.0, 0.0], atol=1e-7)


def test_lp_unknown_backend():
    with pytest.raises(ValueError, match="unknown LP backend"):
        solve_lp(LinearProgram(c=[1.0], bounds=[(0, 1)]), backend="nope")


def test_lp_shape_validation():
    with pytest.raises(ValueError):
        LinearProgram(c=[1.0, 2.0], A_ub=[[1.0]], b_ub=[1.0])


@pytest.mark.parametrize("backend", QPS)
def test_qp_unconstrained(backend):
    res = solve_qp(QuadraticProgram(P=[[2.0]], c=[-6.0]), backend=backend)
    assert res.x[0] == pytest.approx(3.0, abs=1e-7)


@pytest.mark.parametrize("backend", QPS)
def test_qp_lower_bound(backend):
    res = solve_qp(QuadraticProgram(P=[[2.0]], c=[0.0], A_ub=[[-1.0]], b_ub=[-1.0]), backend=backend)
    assert res.x[0] == pytest.approx(1.0, abs=1e-7)


@pytest.mark.parametrize("backend", QPS)
def test_qp_box_projection(backend):
    x0 = np.array([2.0, 0.5])
    A = np.vstack([np.eye(2), -np.eye(2)])
    res = solve_qp(QuadraticProgram(P=2 * np.eye(2), c=-2 * x0, A_ub=A, b_ub=[1, 1, 1, 1.0]), backend=backend)
    np.testing.assert_allclose(res.x, [1.0, 0.5], atol=1e-7)


@pytest.mark.parametrize("backend", QPS)
def test_qp_infeasible(backend):
    res = solve_qp(QuadraticProgram(P=np.eye(1), c=[0.0], A_ub=[[1.0], [-1.0]], b_ub=[0.0, -1.0]), backend=backend)
    assert res.status is Status.INFEASIBLE


def test_qp_rejects_indefinite():
    with pytest.raises(ValueError):
        QuadraticProgram(P=[[1.0, 0.0], [0.0, -1.0]], c=[0.0, 0.0])


def test_settings_defaults():
    s = SolverSettings()
    assert s.feas_tol == 1e-8 and s.opt_tol == 1e-8


def _random_lp(seed, n, m):
    """Feasible and bounded: a box plus random cuts through an interior point."""
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(-1, 1, n)
    A = np.vstack([rng.normal(size=(m, n)), np.eye(n), -np.eye(n)])
    b = np.concatenate([A[:m] @ x0 + rng.uniform(0.1, 1.0, m), 3 * np.ones(2 * n)])
    return rng.normal(size=n), A, b


@pytest.mark.parametrize("backend", LPS)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 8), m=st.integers(1, 8))
def test_strong_duality(backend, seed, n, m):
    c, A, b = _random_lp(seed, n, m)
    res = solve_lp(LinearProgram(c=c, A_ub=A, b_ub=b), backend=backend)
    assert res.ok
    y = res.dual_ub
    assert np.all(y >= -1e-8)
    # dual feasibility A'y = -c and equal objectives
    np.testing.assert_allclose(A.T @ y, -c, atol=1e-6)
    assert -b @ y == pytest.approx(res.objective, abs=1e-7 * (1 + abs(res.objective)))


@pytest.mark.parametrize("backend", LPS)
def test_determinism(backend):
    c, A, b = _random_lp(7, 6, 5)
    r1 = solve_lp(LinearProgram(c=c, A_ub=A, b_ub=b), backend=backend)
    r2 = solve_lp(LinearProgram(c=c, A_ub=A, b_ub=b), backend=backend)
    assert r1.status is r2.status
    assert abs(r1.objective - r2.objective) <= 1e-10


@given(seed=st.integers(0, 10**6))
def test_backends_agree(seed):
    c, A, b = _random_lp(seed, 4, 6)
    objs = [solve_lp(LinearProgram(c=c, A_ub=A, b_ub=b), backend=name).objective for name in LPS]
    assert max(objs) - min(objs) <= 1e-6 * (1 + abs(objs[0]))
