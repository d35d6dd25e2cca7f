"""Stateful receding-horizon controller: identify, pick nominal model, plan, apply."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import explore as ex
from . import setid
from .basis import BasisFamily, build_dynamics
from .config import ConstraintSet, ControllerConfig
from .fhocp import InfeasibleError, Plan, SolverNumericFailure, estimate_disturbance, make_plan, plan_cost, solve_fhocp

log = logging.getLogger(__name__)


@dataclass
class StepInfo:
    u: np.ndarray
    d_hat: np.ndarray
    xi: np.ndarray
    faces: list
    J: float
    explored: bool
    fallback: bool
    t_identify: float
    t_fhocp: float
    t_explore: float
    plan: Plan = field(repr=False)


class AdaptiveMPC:
    """Adaptive MPC with optional exploration.

    Args:
        family: basis parametrization.
        initial_set: prior model set F(0).
        constraints: input, rate and output constraints plus noise bounds.
            ``eps_d`` must already include any unmodeled-dynamics allowance.
        config: horizon, weights and tuning.
        phi0: regressor at t = 0 (e.g. from :func:`warmup_regressor`).
        u_prev: input applied at t = -1.
        history: regressors preceding phi0, oldest first, to seed the
            exploration determinant (zeros when omitted).
    """

    def __init__(
        self,
        family: BasisFamily,
        initial_set: setid.ModelSet,
        constraints: ConstraintSet,
        config: ControllerConfig,
        phi0=None,
        u_prev=None,
        history=None,
        debug: bool = False,
    ):
        self.family = family
        self.cons = constraints
        self.cfg = config
        self.dyn = build_dynamics(family, constraints.n_u)
        if initial_set.dim != self.dyn.dim:
            raise ValueError(f"model set dimension {initial_set.dim} != n_u*m = {self.dyn.dim}")
        if initial_set.n_y != constraints.n_y:
            raise ValueError("model set and constraints disagree on the number of outputs")
        self.r_max = config.r_max if config.r_max is not None else 20 * self.dyn.dim
        self.mset = initial_set
        self.phi = np.zeros(self.dyn.dim) if phi0 is None else np.asarray(phi0, float).copy()
        self.u_prev = np.zeros(constraints.n_u) if u_prev is None else np.atleast_1d(np.asarray(u_prev, float)).copy()
        self.nominal = setid.initial_nominal(initial_set, config.solver)
        self.hist = ex.PhiHistory(self.dyn.dim, history)
        self.plan: Optional[Plan] = None
        self.debug = debug
        self.t = 0

    def _reference(self, y_des) -> np.ndarray:
        """Pad/trim the reference to N rows, holding the last value."""
        y_des = np.atleast_2d(np.asarray(y_des, float))
        if y_des.shape[1] != self.cons.n_y and y_des.shape[0] == self.cons.n_y:
            y_des = y_des.T
        N = self.cfg.N
        if y_des.shape[0] >= N:
            return y_des[:N]
        return np.vstack([y_des, np.repeat(y_des[-1:], N - y_des.shape[0], axis=0)])

    def _shifted_plan(self, d_hat, y_des) -> Plan:
        U = np.vstack([self.plan.U[1:], self.plan.U[-1:]])
        J = plan_cost(U, self.phi, self.nominal.H_c, d_hat, y_des, self.cfg, self.dyn, self.u_prev)
        return make_plan(U, self.phi, self.nominal.H_c, d_hat, self.dyn, J, fallback=True)

    def step(self, y_meas, y_des) -> StepInfo:
        """One pass of the algorithm at time t; returns the input to apply.

        ``y_des`` holds references for t+1..t+N (shorter inputs are held).
        Raises :class:`setid.EmptySetError` or :class:`InfeasibleError`.
        """
        y_meas = np.atleast_1d(np.asarray(y_meas, float))
        y_des = self._reference(y_des)
        cfg = self.cfg

        t0 = time.perf_counter()
        self.mset = setid.update(self.mset, self.phi, y_meas, self.cons.eps_d, self.cons.eps_v,
                                 r_max=self.r_max, settings=cfg.solver)
        self.nominal = setid.nominal_model(self.mset, self.nominal, cfg.alpha, cfg.solver)
        self.hist.push(self.phi)
        t1 = time.perf_counter()

        d_hat = estimate_disturbance(y_meas, self.nominal.H_c, self.phi)
        fallback = False
        try:
            plan = solve_fhocp(self.phi, y_meas, self.mset, self.nominal.H_c, d_hat, y_des, cfg, self.cons,
                               self.dyn, self.u_prev)
        except (InfeasibleError, SolverNumericFailure) as exc:
            if self.plan is None:
                raise InfeasibleError(f"t={self.t}: {exc}") from exc
            log.warning("t=%d: %s; applying the shifted previous plan", self.t, exc)
            plan = self._shifted_plan(d_hat, y_des)
            fallback = True
        t2 = time.perf_counter()

        explored = False
        if cfg.explore and not fallback:
            env = ex.output_envelope(self.mset, plan.phis, plan.y_hat, d_hat, cfg.solver)
            lin = ex.det_linearization(self.hist, self.dyn, self.phi)
            plan, explored = ex.explore_step(plan, self.phi, self.mset, env, lin, self.nominal.H_c, d_hat, y_des,
                                             cfg, self.cons, self.dyn, self.u_prev, debug=self.debug, hist=self.hist)
        t3 = time.perf_counter()

        u = plan.U[0].copy()
        info = StepInfo(u=u, d_hat=d_hat, xi=self.nominal.xi.copy(), faces=self.mset.faces, J=plan.J,
                        explored=explored, fallback=fallback, t_identify=t1 - t0, t_fhocp=t2 - t1,
                        t_explore=t3 - t2, plan=plan)
        # advance internal state
        self.phi = self.dyn.W @ self.phi + self.dyn.Z @ u
        self.u_prev = u
        self.plan = plan
        self.t += 1
        return info
