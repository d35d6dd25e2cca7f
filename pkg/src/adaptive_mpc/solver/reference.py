"""Dense primal-dual interior-point method for convex QPs (and LPs).

Solves

    min 1/2 x'Px + c'x   s.t.  Gx <= h,  Ax = b

with Mehrotra's predictor-corrector on the slack formulation ``Gx + s = h``.
No external solver is involved, so it doubles as the dependency-free
reference backend. Infeasible and unbounded problems are classified with a
phase-one feasibility solve after the main iteration fails to converge.
"""

from __future__ import annotations

import numpy as np

from .problems import SolverSettings, Status

_REG = 1e-11


def _kkt_solve(P, G, A, d, rhs_x, rhs_y):
    n, p = P.shape[0], A.shape[0]
    K = np.zeros((n + p, n + p))
    K[:n, :n] = P + (G.T * d) @ G + _REG * np.eye(n)
    K[:n, n:] = A.T
    K[n:, :n] = A
    K[n:, n:] = -_REG * np.eye(p)
    rhs = np.concatenate([rhs_x, rhs_y])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    # one step of iterative refinement against the unregularized system
    K[:n, :n] -= _REG * np.eye(n)
    K[n:, n:] = 0.0
    res = rhs - K @ sol
    K[:n, :n] += _REG * np.eye(n)
    K[n:, n:] = -_REG * np.eye(p)
    try:
        sol = sol + np.linalg.solve(K, res)
    except np.linalg.LinAlgError:
        pass
    return sol[:n], sol[n:]


def _max_step(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return min(1.0, float(np.min(-v[neg] / dv[neg])))


def _ipm(P, c, G, h, A, b, settings: SolverSettings):
    n, m, p = c.size, h.size, b.size
    x = np.zeros(n)
    if p:
        x = np.linalg.lstsq(A, b, rcond=None)[0]
    s = np.maximum(h - G @ x, 1.0) if m else np.zeros(0)
    z = np.ones(m)
    y = np.zeros(p)

    scale_c = 1.0 + np.abs(c).max(initial=0.0)
    scale_h = 1.0 + np.abs(h).max(initial=0.0)
    scale_b = 1.0 + np.abs(b).max(initial=0.0)

    for it in range(settings.max_iter):
        r_d = P @ x + c + A.T @ y + G.T @ z
        r_p = A @ x - b
        r_g = G @ x + s - h
        gap = float(s @ z)
        obj = 0.5 * x @ P @ x + c @ x
        converged = (
            np.abs(r_d).max(initial=0.0) <= settings.opt_tol * scale_c
            and np.abs(r_p).max(initial=0.0) <= settings.feas_tol * scale_b
            and np.abs(r_g).max(initial=0.0) <= settings.feas_tol * scale_h
            and gap <= settings.opt_tol * (1.0 + abs(obj))
        )
        if converged:
            return Status.OPTIMAL, x, z, it
        if not np.all(np.isfinite(x)) or np.abs(x).max(initial=0.0) > 1e12:
            return Status.NUMERIC_FAILURE, x, z, it

        mu = gap / m if m else 0.0
        d = z / s if m else np.zeros(0)

        def direction(r_c):
            # r_c is the complementarity residual target: S dz + Z ds = r_c
            rhs_x = -r_d - G.T @ ((r_c + z * r_g) / s) if m else -r_d
            dx, dy = _kkt_solve(P, G, A, d, rhs_x, -r_p)
            if m:
                ds = -r_g - G @ dx
                dz = (r_c - z * ds) / s
            else:
                ds = dz = np.zeros(0)
            return dx, dy, ds, dz

        # predictor
        dx, dy, ds, dz = direction(-s * z)
        a_aff = min(_max_step(s, ds), _max_step(z, dz)) if m else 1.0
        if m:
            mu_aff = float((s + a_aff * ds) @ (z + a_aff * dz)) / m
            sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
            # corrector
            dx, dy, ds, dz = direction(-s * z + sigma * mu - ds * dz)
            alpha = min(1.0, 0.99 * min(_max_step(s, ds), _max_step(z, dz)))
        else:
            alpha = 1.0
        x = x + alpha * dx
        y = y + alpha * dy
        s = s + alpha * ds
        z = z + alpha * dz
        if m:
            s = np.maximum(s, 1e-300)
            z = np.maximum(z, 1e-300)
    return Status.NUMERIC_FAILURE, x, z, settings.max_iter


def _phase_one(G, h, A, b, settings):
    """min sum of constraint violations; returns the optimal violation."""
    n, m, p = G.shape[1], h.size, b.size
    # variables: x (n), t (1), e_plus (p), e_minus (p)
    nv = n + 1 + 2 * p
    c = np.zeros(nv)
    c[n] = 1.0
    c[n + 1:] = 1.0
    G1 = np.zeros((m + 1 + 2 * p, nv))
    h1 = np.zeros(m + 1 + 2 * p)
    G1[:m, :n] = G
    G1[:m, n] = -1.0
    h1[:m] = h
    G1[m, n] = -1.0
    G1[m + 1:, n + 1:] = -np.eye(2 * p)
    A1 = np.zeros((p, nv))
    A1[:, :n] = A
    A1[:, n + 1:n + 1 + p] = np.eye(p)
    A1[:, n + 1 + p:] = -np.eye(p)
    status, x, _, _ = _ipm(np.zeros((nv, nv)), c, G1, h1, A1, b, settings)
    if status is not Status.OPTIMAL:
        return np.inf
    return float(c @ x)


def solve(P, c, G, h, A, b, settings: SolverSettings):
    """Return ``(status, x, z, info)`` for the standard-form QP."""
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _solve(P, c, G, h, A, b, settings)


def _solve(P, c, G, h, A, b, settings):
    status, x, z, iters = _ipm(P, c, G, h, A, b, settings)
    if status is Status.OPTIMAL:
        return status, x, z, f"converged in {iters} iterations"
    viol = _phase_one(G, h, A, b, settings)
    scale = 1.0 + max(np.abs(h).max(initial=0.0), np.abs(b).max(initial=0.0))
    if viol > 1e3 * settings.feas_tol * scale:
        return Status.INFEASIBLE, None, None, f"phase-one violation {viol:.3e}"
    if np.all(np.isfinite(x)) and np.abs(x).max(initial=0.0) > 1e10:
        return Status.UNBOUNDED, None, None, "iterates diverged on a feasible problem"
    return Status.NUMERIC_FAILURE, x, z, f"no convergence after {iters} iterations"
