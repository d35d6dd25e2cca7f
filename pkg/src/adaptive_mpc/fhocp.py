"""Finite-horizon optimal control problem with robust output constraints.

Decision vector is ``x = [U; lambda]`` where ``U`` stacks the N future inputs
and ``lambda`` holds one nonnegative dual vector per (output-constraint row,
prediction step). The robust constraint ``E H phi(k|t) + d_bar <= p`` for all
``H`` in the model set is replaced by its LP dual:

    A(t)' lambda_lk = stack_j(e_lj phi(k|t)),   b(t)' lambda_lk <= p_l - d_bar_l,   lambda_lk >= 0

which is exact by strong duality because every ``F_j`` is a nonempty
polytope.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .basis import RegressorDynamics
from .config import ConstraintSet, ControllerConfig
from .setid import ModelSet
from .solver import LinearProgram, QuadraticProgram, SolverSettings, Status, solve_lp, solve_qp

log = logging.getLogger(__name__)


class InfeasibleError(RuntimeError):
    """No input sequence satisfies the robust constraints."""


class SolverNumericFailure(RuntimeError):
    pass


@dataclass
class Plan:
    U: np.ndarray        # (N, n_u)
    phis: np.ndarray     # (N, n) predicted phi(t+1..t+N | t)
    y_hat: np.ndarray    # (N, n_y) nominal predictions
    J: float
    solve_time: float = 0.0
    fallback: bool = False
    lambdas: Optional[np.ndarray] = field(default=None, repr=False)


# ----------------------------------------------------------- prediction


def prediction_matrices(dyn: RegressorDynamics, N: int):
    """``phi(t+k|t) = M[k-1] phi(t) + G[k-1] U`` for k = 1..N."""
    n, n_u = dyn.dim, dyn.n_u
    M = np.zeros((N, n, n))
    G = np.zeros((N, n, N * n_u))
    Mk = np.eye(n)
    Gk = np.zeros((n, N * n_u))
    for k in range(N):
        Mk = dyn.W @ Mk
        Gk = dyn.W @ Gk
        Gk[:, k * n_u:(k + 1) * n_u] += dyn.Z
        M[k], G[k] = Mk, Gk
    return M, G


def predict_regressors(phi_t, U, dyn: RegressorDynamics) -> np.ndarray:
    U = np.asarray(U, dtype=float).reshape(-1, dyn.n_u)
    phis = np.zeros((U.shape[0], dyn.dim))
    phi = np.asarray(phi_t, dtype=float)
    for k, u in enumerate(U):
        phi = dyn.W @ phi + dyn.Z @ u
        phis[k] = phi
    return phis


def estimate_disturbance(y_meas, H_c, phi_t) -> np.ndarray:
    return np.atleast_1d(np.asarray(y_meas, float)) - np.asarray(H_c, float) @ np.asarray(phi_t, float)


def build_dbar(E, eps_d) -> np.ndarray:
    return np.abs(np.atleast_2d(E)) @ np.atleast_1d(np.asarray(eps_d, float))


# ---------------------------------------------------------- constraints


@dataclass
class LinearBlock:
    """Linear rows over the full decision vector ``[U; lambda]``."""

    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray


def dualize(mset: ModelSet, E, rhs, d_bar, M, G, phi_t, n_lambda_offset: int, n_vars: int) -> LinearBlock:
    """Dual rows enforcing ``E H phi(k|t) + d_bar <= rhs[k]`` for all ``H`` in ``mset``.

    ``rhs`` is ``(N, n_rows)`` so the bound may vary per step. The dual
    vectors occupy ``x[n_lambda_offset:]`` in (step, row) major order.
    """
    E = np.atleast_2d(E)
    N = M.shape[0]
    n_rows = E.shape[0]
    A_blk, b_blk = mset.stacked()
    r = A_blk.shape[0]
    n_y, n = mset.n_y, mset.dim
    eq_rows = N * n_rows * n_y * n
    A_eq = np.zeros((eq_rows, n_vars))
    b_eq = np.zeros(eq_rows)
    A_ub = np.zeros((N * n_rows + N * n_rows * r, n_vars))
    b_ub = np.zeros(N * n_rows + N * n_rows * r)
    nU = G.shape[2]
    row_eq = 0
    row_ub = 0
    for k in range(N):
        phi0 = M[k] @ phi_t
        for l in range(n_rows):
            off = n_lambda_offset + (k * n_rows + l) * r
            sel = slice(row_eq, row_eq + n_y * n)
            # A' lambda - stack_j(e_lj phi(k|t)) = 0
            A_eq[sel, off:off + r] = A_blk.T
            A_eq[sel, :nU] = -np.kron(E[l][:, None], G[k])
            b_eq[sel] = np.kron(E[l], phi0)
            row_eq += n_y * n
            A_ub[row_ub, off:off + r] = b_blk
            b_ub[row_ub] = rhs[k, l] - d_bar[l]
            row_ub += 1
    # lambda >= 0
    n_lam = N * n_rows * r
    A_ub[row_ub:row_ub + n_lam, n_lambda_offset:n_lambda_offset + n_lam] = -np.eye(n_lam)
    return LinearBlock(A_ub, b_ub, A_eq, b_eq)


def terminal_constraint(dyn: RegressorDynamics, M, G, phi_t, n_vars: int) -> LinearBlock:
    """``(I - W) phi(t+N|t) = Z u(t+N-1|t)`` as equality rows."""
    n, n_u = dyn.dim, dyn.n_u
    nU = G.shape[2]
    IW = np.eye(n) - dyn.W
    A_eq = np.zeros((n, n_vars))
    A_eq[:, :nU] = IW @ G[-1]
    A_eq[:, nU - n_u:nU] -= dyn.Z
    b_eq = -IW @ (M[-1] @ phi_t)
    return LinearBlock(np.zeros((0, n_vars)), np.zeros(0), A_eq, b_eq)


def input_constraints(cons: ConstraintSet, N: int, u_prev, n_vars: int) -> LinearBlock:
    n_u = cons.n_u
    u_prev = np.atleast_1d(np.asarray(u_prev, float))
    ni, nr = cons.C.shape[0], cons.L.shape[0]
    A = np.zeros((N * (ni + nr), n_vars))
    b = np.zeros(N * (ni + nr))
    row = 0
    for k in range(N):
        A[row:row + ni, k * n_u:(k + 1) * n_u] = cons.C
        b[row:row + ni] = cons.g
        row += ni
        A[row:row + nr, k * n_u:(k + 1) * n_u] = cons.L
        if k == 0:
            b[row:row + nr] = cons.f + cons.L @ u_prev
        else:
            A[row:row + nr, (k - 1) * n_u:k * n_u] = -cons.L
            b[row:row + nr] = cons.f
        row += nr
    return LinearBlock(A, b, np.zeros((0, n_vars)), np.zeros(0))


def stack_blocks(*blocks: LinearBlock) -> LinearBlock:
    return LinearBlock(
        np.vstack([bl.A_ub for bl in blocks]),
        np.concatenate([bl.b_ub for bl in blocks]),
        np.vstack([bl.A_eq for bl in blocks]),
        np.concatenate([bl.b_eq for bl in blocks]),
    )


def robust_constraint_system(phi_t, mset, dyn, cons, u_prev, N, E, rhs, d_bar) -> tuple[LinearBlock, int]:
    """All FHOCP constraints over ``[U; lambda]``; returns the block and the variable count."""
    M, G = prediction_matrices(dyn, N)
    nU = N * dyn.n_u
    r = sum(mset.faces)
    n_vars = nU + N * np.atleast_2d(E).shape[0] * r
    block = stack_blocks(
        input_constraints(cons, N, u_prev, n_vars),
        dualize(mset, E, rhs, d_bar, M, G, phi_t, nU, n_vars),
        terminal_constraint(dyn, M, G, phi_t, n_vars),
    )
    return block, n_vars


# ------------------------------------------------------------------ cost


def _cost_terms(phi_t, H_c, d_hat, y_des, cfg: ControllerConfig, dyn, u_prev):
    """Quadratic cost ``U'PU/2 + q'U + const`` of the nominal tracking objective."""
    N, n_u = cfg.N, dyn.n_u
    M, G = prediction_matrices(dyn, N)
    H_c = np.atleast_2d(H_c)
    n_y = H_c.shape[0]
    Gy = np.vstack([H_c @ G[k] for k in range(N)])
    y0 = np.concatenate([H_c @ (M[k] @ phi_t) + d_hat for k in range(N)])
    c0 = y0 - np.asarray(y_des, float).reshape(N * n_y)
    Qb = np.kron(np.eye(N), cfg.Q)
    Sb = np.kron(np.eye(N), cfg.S)
    Rb = np.kron(np.eye(N), cfg.R)
    D = np.eye(N * n_u) - np.eye(N * n_u, k=-n_u)
    delta0 = np.zeros(N * n_u)
    delta0[:n_u] = np.atleast_1d(u_prev)
    P = 2.0 * (Gy.T @ Qb @ Gy + Sb + D.T @ Rb @ D)
    q = 2.0 * (Gy.T @ Qb @ c0 - D.T @ Rb @ delta0)
    const = float(c0 @ Qb @ c0 + delta0 @ Rb @ delta0)
    return 0.5 * (P + P.T), q, const


def plan_cost(U, phi_t, H_c, d_hat, y_des, cfg, dyn, u_prev) -> float:
    P, q, const = _cost_terms(phi_t, H_c, d_hat, y_des, cfg, dyn, u_prev)
    U = np.asarray(U, float).ravel()
    return float(0.5 * U @ P @ U + q @ U + const)


def make_plan(U, phi_t, H_c, d_hat, dyn, J, **kw) -> Plan:
    U = np.asarray(U, float).reshape(-1, dyn.n_u)
    phis = predict_regressors(phi_t, U, dyn)
    y_hat = phis @ np.atleast_2d(H_c).T + d_hat
    return Plan(U=U, phis=phis, y_hat=y_hat, J=J, **kw)


def solve_fhocp(
    phi_t,
    y_meas,
    mset: ModelSet,
    H_c,
    d_hat,
    y_des,
    cfg: ControllerConfig,
    cons: ConstraintSet,
    dyn: RegressorDynamics,
    u_prev,
) -> Plan:
    """Stage-one QP: nominal tracking cost under robust input/output constraints.

    ``y_des`` is ``(N, n_y)``, the reference for steps t+1..t+N. Raises
    :class:`InfeasibleError` when the robust constraints admit no input
    sequence and :class:`SolverNumericFailure` when the backend fails.
    """
    t0 = time.perf_counter()
    phi_t = np.asarray(phi_t, float)
    d_hat = np.atleast_1d(np.asarray(d_hat, float))
    N = cfg.N
    nU = N * dyn.n_u
    d_bar = build_dbar(cons.E, cons.eps_d)
    rhs = np.tile(cons.p, (N, 1))
    block, n_vars = robust_constraint_system(phi_t, mset, dyn, cons, u_prev, N, cons.E, rhs, d_bar)
    Pu, qu, const = _cost_terms(phi_t, H_c, d_hat, y_des, cfg, dyn, u_prev)
    P = np.zeros((n_vars, n_vars))
    P[:nU, :nU] = Pu
    q = np.zeros(n_vars)
    q[:nU] = qu
    res = solve_qp(QuadraticProgram(P, q, block.A_ub, block.b_ub, block.A_eq, block.b_eq), cfg.solver)
    if res.status is Status.NUMERIC_FAILURE:
        P[:nU, :nU] += 1e-10 * np.eye(nU)
        res = solve_qp(QuadraticProgram(P, q, block.A_ub, block.b_ub, block.A_eq, block.b_eq), cfg.solver)
    if res.status is Status.INFEASIBLE:
        raise InfeasibleError(f"FHOCP infeasible: no input sequence satisfies the robust constraints ({res.info})")
    if not res.ok:
        raise SolverNumericFailure(f"FHOCP solve failed: {res.status.value} ({res.info})")
    U = res.x[:nU]
    J = plan_cost(U, phi_t, H_c, d_hat, y_des, cfg, dyn, u_prev)
    return make_plan(U, phi_t, H_c, d_hat, dyn, J, solve_time=time.perf_counter() - t0, lambdas=res.x[nU:])


# ------------------------------------------------------- duality helpers


def worst_case_output(mset: ModelSet, e_row, phi, settings: Optional[SolverSettings] = None) -> float:
    """Primal ``max_{H in F} sum_j e_j phi' H_j``."""
    e_row = np.atleast_1d(np.asarray(e_row, float))
    A_blk, b_blk = mset.stacked()
    c = np.kron(e_row, np.asarray(phi, float))
    res = solve_lp(LinearProgram(c=c, A_ub=A_blk, b_ub=b_blk, sense="max"), settings)
    if not res.ok:
        raise RuntimeError(f"primal worst-case LP failed: {res.status.value}")
    return res.objective


def dual_bound(mset: ModelSet, e_row, phi, settings: Optional[SolverSettings] = None) -> tuple[float, np.ndarray]:
    """Dual ``min b' lambda  s.t.  A' lambda = stack_j(e_j phi), lambda >= 0``."""
    e_row = np.atleast_1d(np.asarray(e_row, float))
    A_blk, b_blk = mset.stacked()
    r = A_blk.shape[0]
    res = solve_lp(
        LinearProgram(c=b_blk, A_eq=A_blk.T, b_eq=np.kron(e_row, np.asarray(phi, float)), bounds=[(0, None)] * r),
        settings,
    )
    if not res.ok:
        raise RuntimeError(f"dual LP failed: {res.status.value}")
    return res.objective, res.x
