"""One audited entry point for every LP and QP in the package.

Backends are looked up by name from :class:`SolverSettings`:

* ``"highs"``     -- scipy's HiGHS wrapper (LP only)
* ``"clarabel"``  -- Clarabel interior point (LP and QP)
* ``"reference"`` -- the in-repo dense interior point (LP and QP)

Every backend result is re-checked here: an ``OPTIMAL`` status is only
reported when the primal residual is within ``feas_tol`` (relative to the
problem scale); otherwise the result is downgraded to ``NUMERIC_FAILURE``.
"""

from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from . import reference
from .problems import (
    LinearProgram,
    QuadraticProgram,
    SolveResult,
    SolverSettings,
    Status,
)

__all__ = [
    "LinearProgram",
    "QuadraticProgram",
    "SolveResult",
    "SolverSettings",
    "Status",
    "solve_lp",
    "solve_qp",
    "LP_BACKENDS",
    "QP_BACKENDS",
]

log = logging.getLogger(__name__)

DEFAULT_SETTINGS = SolverSettings()


def _standard_form(lp: LinearProgram):
    G_b, h_b = lp.bound_rows()
    G = np.vstack([lp.A_ub, G_b])
    h = np.concatenate([lp.b_ub, h_b])
    c = -lp.c if lp.sense == "max" else lp.c
    return c, G, h


def _residual_ok(x, G, h, A, b, tol) -> tuple[bool, float]:
    res = 0.0
    scale = 1.0
    if h.size:
        res = max(res, float(np.max(G @ x - h, initial=0.0)))
        scale = max(scale, 1.0 + np.abs(h).max() + np.abs(G).max() * np.abs(x).max(initial=0.0))
    if b.size:
        res = max(res, float(np.abs(A @ x - b).max()))
        scale = max(scale, 1.0 + np.abs(b).max() + np.abs(A).max() * np.abs(x).max(initial=0.0))
    return res <= tol * scale, res


# ----------------------------------------------------------------- backends


def _highs_lp(c, G, h, A, b, settings: SolverSettings):
    from scipy.optimize import linprog

    res = linprog(
        c,
        A_ub=G if h.size else None,
        b_ub=h if h.size else None,
        A_eq=A if b.size else None,
        b_eq=b if b.size else None,
        bounds=(None, None),
        method="highs",
        options={
            "primal_feasibility_tolerance": settings.feas_tol,
            "dual_feasibility_tolerance": settings.opt_tol,
        },
    )
    if res.status == 0:
        z = -np.asarray(res.ineqlin.marginals) if h.size else np.zeros(0)
        return Status.OPTIMAL, np.asarray(res.x), z, res.message
    if res.status == 2:
        return Status.INFEASIBLE, None, None, res.message
    if res.status == 3:
        return Status.UNBOUNDED, None, None, res.message
    return Status.NUMERIC_FAILURE, None, None, res.message


def _clarabel(P, c, G, h, A, b, settings: SolverSettings):
    import clarabel
    from scipy import sparse

    n = c.size
    M = sparse.csc_matrix(np.vstack([A, G])) if (A.size or G.size) else sparse.csc_matrix((0, n))
    rhs = np.concatenate([b, h])
    cones = []
    if b.size:
        cones.append(clarabel.ZeroConeT(b.size))
    if h.size:
        cones.append(clarabel.NonnegativeConeT(h.size))
    opts = clarabel.DefaultSettings()
    opts.verbose = False
    opts.tol_feas = settings.feas_tol
    opts.tol_gap_abs = settings.opt_tol
    opts.tol_gap_rel = settings.opt_tol
    opts.max_iter = settings.max_iter
    solver = clarabel.DefaultSolver(sparse.triu(sparse.csc_matrix(P), format="csc"), c, M, rhs, cones, opts)
    sol = solver.solve()
    st = str(sol.status)
    if st in ("Solved", "AlmostSolved"):
        z = np.asarray(sol.z)[b.size:]
        return Status.OPTIMAL, np.asarray(sol.x), z, st
    if "PrimalInfeasible" in st:
        return Status.INFEASIBLE, None, None, st
    if "DualInfeasible" in st:
        return Status.UNBOUNDED, None, None, st
    return Status.NUMERIC_FAILURE, None, None, st


def _reference(P, c, G, h, A, b, settings: SolverSettings):
    return reference.solve(P, c, G, h, A, b, settings)


LP_BACKENDS = {
    "highs": lambda c, G, h, A, b, s: _highs_lp(c, G, h, A, b, s),
    "clarabel": lambda c, G, h, A, b, s: _clarabel(np.zeros((c.size, c.size)), c, G, h, A, b, s),
    "reference": lambda c, G, h, A, b, s: _reference(np.zeros((c.size, c.size)), c, G, h, A, b, s),
}

QP_BACKENDS = {
    "clarabel": _clarabel,
    "reference": _reference,
}


# ------------------------------------------------------------------ public


def solve_lp(lp: LinearProgram, settings: Optional[SolverSettings] = None, backend: Optional[str] = None) -> SolveResult:
    """Solve a linear program.

    ``dual_ub`` holds nonnegative multipliers for the ``A_ub`` rows of the
    minimization form (for ``sense="max"`` they certify the maximum).
    """
    settings = settings or DEFAULT_SETTINGS
    name = backend or settings.lp_backend
    if name not in LP_BACKENDS:
        raise ValueError(f"unknown LP backend {name!r}; choose from {sorted(LP_BACKENDS)}")
    c, G, h = _standard_form(lp)
    try:
        status, x, z, info = LP_BACKENDS[name](c, G, h, lp.A_eq, lp.b_eq, settings)
    except Exception as exc:  # backend crashed: surface, never raise past here
        log.debug("LP backend %s raised %r", name, exc)
        return SolveResult(Status.NUMERIC_FAILURE, info=f"{type(exc).__name__}: {exc}", backend=name)
    if status is not Status.OPTIMAL:
        return SolveResult(status, info=str(info), backend=name)
    ok, res = _residual_ok(x, G, h, lp.A_eq, lp.b_eq, settings.feas_tol)
    if not ok:
        return SolveResult(Status.NUMERIC_FAILURE, x=x, info=f"primal residual {res:.3e} after {info}", backend=name)
    obj = float(lp.c @ x)
    dual = None if z is None else np.asarray(z)[: lp.b_ub.size]
    return SolveResult(Status.OPTIMAL, x=x, objective=obj, dual_ub=dual, info=str(info), backend=name,
                       extra={"primal_residual": res})


def solve_qp(qp: QuadraticProgram, settings: Optional[SolverSettings] = None, backend: Optional[str] = None) -> SolveResult:
    """Solve a convex quadratic program; objective is ``1/2 x'Px + c'x``."""
    settings = settings or DEFAULT_SETTINGS
    name = backend or settings.qp_backend
    if name not in QP_BACKENDS:
        raise ValueError(f"unknown QP backend {name!r}; choose from {sorted(QP_BACKENDS)}")
    try:
        status, x, z, info = QP_BACKENDS[name](qp.P, qp.c, qp.A_ub, qp.b_ub, qp.A_eq, qp.b_eq, settings)
    except Exception as exc:
        log.debug("QP backend %s raised %r", name, exc)
        return SolveResult(Status.NUMERIC_FAILURE, info=f"{type(exc).__name__}: {exc}", backend=name)
    if status is not Status.OPTIMAL:
        return SolveResult(status, info=str(info), backend=name)
    ok, res = _residual_ok(x, qp.A_ub, qp.b_ub, qp.A_eq, qp.b_eq, settings.feas_tol)
    if not ok:
        return SolveResult(Status.NUMERIC_FAILURE, x=x, info=f"primal residual {res:.3e} after {info}", backend=name)
    obj = float(0.5 * x @ qp.P @ x + qp.c @ x)
    return SolveResult(Status.OPTIMAL, x=x, objective=obj, dual_ub=None if z is None else np.asarray(z),
                       info=str(info), backend=name, extra={"primal_residual": res})
