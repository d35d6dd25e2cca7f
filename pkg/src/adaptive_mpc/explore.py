"""Second, information-seeking stage of the controller.

The stage-one plan fixes a nominal output trajectory. Around it we allow a
tube of half-width ``r * eps_bar`` where ``eps_bar`` is the largest deviation
any model in the current set could produce along that plan. Inside the tube
(and the usual robust constraints) the first input is re-chosen to make
``|det Phi(t+1|t)|`` as large as possible, which shrinks the guaranteed
volume of the next model set. The determinant is affine in ``u(t|t)``, so
the problem reduces to two LPs (max and min of ``k'u``).
"""

from __future__ import annotations

import logging
import time
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .basis import RegressorDynamics
from .config import ConstraintSet, ControllerConfig
from .fhocp import Plan, build_dbar, make_plan, plan_cost, robust_constraint_system
from .setid import ModelSet
from .solver import LinearProgram, SolverSettings, solve_lp

log = logging.getLogger(__name__)


@dataclass
class Envelope:
    y_hi: np.ndarray     # (N, n_y)
    y_lo: np.ndarray
    eps_bar: np.ndarray


@dataclass
class DetLinearization:
    k_vec: np.ndarray
    n_scalar: float
    V: np.ndarray

    def __call__(self, u) -> float:
        return float(self.k_vec @ np.atleast_1d(u) + self.n_scalar)


class PhiHistory:
    """The last ``n - 1`` regressors consumed by the identifier."""

    def __init__(self, dim: int, initial=None):
        self.dim = dim
        self._cols: deque = deque(maxlen=max(dim - 1, 0))
        for _ in range(max(dim - 1, 0)):
            self._cols.append(np.zeros(dim))
        if initial is not None:
            for col in initial:
                self.push(col)

    def push(self, phi) -> None:
        if self.dim > 1:
            self._cols.append(np.asarray(phi, float).copy())

    @property
    def Phi_prime(self) -> np.ndarray:
        if self.dim <= 1:
            return np.zeros((self.dim, 0))
        return np.column_stack(list(self._cols))


def output_envelope(mset: ModelSet, phis, y_hat, d_hat=None, settings: Optional[SolverSettings] = None) -> Envelope:
    """Range of outputs over the model set along a fixed regressor trajectory.

    ``y_hi[k, j] = max_{H_j in F_j} H_j' phi(k) + d_hat_j`` (and min for
    ``y_lo``); ``eps_bar`` is the larger one-sided gap to ``y_hat``.
    """
    phis = np.atleast_2d(phis)
    y_hat = np.atleast_2d(y_hat)
    N = phis.shape[0]
    d_hat = np.zeros(mset.n_y) if d_hat is None else np.atleast_1d(d_hat)
    y_hi = np.zeros((N, mset.n_y))
    y_lo = np.zeros((N, mset.n_y))
    for j in range(mset.n_y):
        A, b = mset.A[j], mset.b[j]
        for k in range(N):
            if not np.any(phis[k]):
                continue
            for sense, out in (("max", y_hi), ("min", y_lo)):
                res = solve_lp(LinearProgram(c=phis[k], A_ub=A, b_ub=b, sense=sense), settings)
                if not res.ok:
                    raise RuntimeError(f"envelope LP failed (output {j}, step {k}): {res.status.value}")
                out[k, j] = res.objective
    y_hi += d_hat
    y_lo += d_hat
    eps_bar = np.maximum(np.maximum(y_hi - y_hat, y_hat - y_lo), 0.0)
    return Envelope(y_hi=y_hi, y_lo=y_lo, eps_bar=eps_bar)


def cofactor_vector(Phi_prime) -> np.ndarray:
    """Cofactors of the last column of ``[Phi', x]``: ``det = V' x``."""
    Phi_prime = np.atleast_2d(Phi_prime)
    n = Phi_prime.shape[0]
    if Phi_prime.shape[1] != n - 1:
        raise ValueError(f"Phi' must be {n}x{n - 1}, got {Phi_prime.shape}")
    if n == 1:
        return np.ones(1)
    V = np.empty(n)
    for i in range(n):
        minor = np.delete(Phi_prime, i, axis=0)
        V[i] = (-1) ** (i + n - 1) * np.linalg.det(minor)
    return V


def det_linearization(hist, dyn: RegressorDynamics, phi_t) -> DetLinearization:
    """``det [Phi', W phi(t) + Z u] = k'u + n``."""
    Phi_prime = hist.Phi_prime if isinstance(hist, PhiHistory) else np.asarray(hist, float)
    V = cofactor_vector(Phi_prime)
    return DetLinearization(k_vec=V @ dyn.Z, n_scalar=float(V @ dyn.W @ np.asarray(phi_t, float)), V=V)


def volume_bound(Phi, eps_d_j: float, eps_v_j: float) -> float:
    """Volume bound ``(2 (eps_d + eps_v))^n / |det Phi|`` for the next polytope."""
    Phi = np.atleast_2d(np.asarray(Phi, float))
    det = abs(np.linalg.det(Phi))
    if det == 0.0:
        return np.inf
    return (2.0 * (eps_d_j + eps_v_j)) ** Phi.shape[0] / det


def explore_step(
    plan: Plan,
    phi_t,
    mset: ModelSet,
    env: Envelope,
    lin: DetLinearization,
    H_c,
    d_hat,
    y_des,
    cfg: ControllerConfig,
    cons: ConstraintSet,
    dyn: RegressorDynamics,
    u_prev,
    debug: bool = False,
    hist=None,
) -> tuple[Plan, bool]:
    """Re-choose the plan for information; returns ``(plan, explored)``.

    Falls back to the stage-one plan whenever the determinant does not
    depend on the first input or both LPs fail.
    """
    t0 = time.perf_counter()
    if not np.any(np.abs(lin.k_vec) > 1e-12):
        return plan, False
    N, n_y = cfg.N, mset.n_y
    nU = N * dyn.n_u
    d_hat = np.atleast_1d(np.asarray(d_hat, float))
    E2 = np.vstack([np.eye(n_y), -np.eye(n_y), cons.E])
    d_bar2 = np.concatenate([np.zeros(2 * n_y), build_dbar(cons.E, cons.eps_d)])
    # tube is stated on model outputs H phi, so the disturbance estimate is taken off
    tube = cfg.r_explore * env.eps_bar
    centre = plan.y_hat - d_hat
    rhs = np.hstack([centre + tube, -centre + tube, np.tile(cons.p, (N, 1))])
    block, n_vars = robust_constraint_system(np.asarray(phi_t, float), mset, dyn, cons, u_prev, N, E2, rhs, d_bar2)

    candidates = []
    for sense in ("max", "min"):
        c = np.zeros(n_vars)
        c[:dyn.n_u] = lin.k_vec
        res = solve_lp(LinearProgram(c=c, A_ub=block.A_ub, b_ub=block.b_ub, A_eq=block.A_eq, b_eq=block.b_eq,
                                     sense=sense), cfg.solver)
        if res.ok:
            candidates.append((abs(res.objective + lin.n_scalar), res.x[:nU]))
        else:
            log.debug("exploration LP (%s) failed: %s", sense, res.status.value)
    if not candidates:
        return plan, False
    # larger |det| wins
    _, U = max(candidates, key=lambda item: item[0])
    if debug and hist is not None:
        Phi_prime = hist.Phi_prime if isinstance(hist, PhiHistory) else hist
        u0 = U[:dyn.n_u]
        full = np.column_stack([Phi_prime, dyn.W @ phi_t + dyn.Z @ u0])
        assert abs(np.linalg.det(full) - lin(u0)) <= 1e-8 * max(1.0, abs(lin(u0)))
    J = plan_cost(U, phi_t, H_c, d_hat, y_des, cfg, dyn, u_prev)
    new = make_plan(U, phi_t, H_c, d_hat, dyn, J, solve_time=time.perf_counter() - t0)
    return new, True
