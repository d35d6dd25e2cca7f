"""Recursive set-membership identification over per-output polytopes.

Each output ``j`` keeps a polytope ``F_j = {H_j : A_j H_j <= b_j}`` of
coefficient rows consistent with all data so far. A measurement adds the
slab ``|y_j - phi' H_j| <= eps_d_j + eps_v_j``; redundant faces are pruned by
one LP per face and the face count is capped by greedily dropping the face
whose removal least inflates the Chebyshev radius. Rows of the initial set
are flagged ``protected`` and are never dropped, which keeps every polytope
bounded.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .solver import LinearProgram, SolverSettings, Status, solve_lp

log = logging.getLogger(__name__)

REDUNDANCY_TOL = 1e-9


class EmptySetError(RuntimeError):
    """The data is inconsistent with the prior bounds or the model class."""


@dataclass(frozen=True)
class ModelSet:
    A: tuple
    b: tuple
    protected: tuple

    @classmethod
    def from_arrays(cls, A: Sequence, b: Sequence, protected: Optional[Sequence] = None) -> "ModelSet":
        A = tuple(np.atleast_2d(np.asarray(a, dtype=float)) for a in A)
        b = tuple(np.asarray(v, dtype=float).ravel() for v in b)
        if protected is None:
            protected = tuple(np.ones(len(v), dtype=bool) for v in b)
        else:
            protected = tuple(np.asarray(p, dtype=bool).ravel() for p in protected)
        if not (len(A) == len(b) == len(protected)):
            raise ValueError("A, b and protected must list the same number of outputs")
        dims = {a.shape[1] for a in A}
        if len(dims) != 1:
            raise ValueError("all outputs must share the coefficient dimension")
        for a, v, p in zip(A, b, protected):
            if a.shape[0] != v.size or p.size != v.size:
                raise ValueError("row counts of A, b and protected disagree")
        return cls(A, b, protected)

    @classmethod
    def box(cls, lo: Sequence, hi: Sequence) -> "ModelSet":
        """Per-output boxes ``lo[j] <= H_j <= hi[j]`` (rows ``[I; -I]``)."""
        A, b = [], []
        for l_, h_ in zip(lo, hi):
            l_ = np.asarray(l_, float).ravel()
            h_ = np.asarray(h_, float).ravel()
            if np.any(l_ > h_):
                raise ValueError("box lower bound exceeds upper bound")
            p = l_.size
            A.append(np.vstack([np.eye(p), -np.eye(p)]))
            b.append(np.concatenate([h_, -l_]))
        return cls.from_arrays(A, b)

    @property
    def n_y(self) -> int:
        return len(self.A)

    @property
    def dim(self) -> int:
        return self.A[0].shape[1]

    @property
    def faces(self) -> list[int]:
        return [a.shape[0] for a in self.A]

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        """Block-diagonal ``A(t)`` and stacked ``b(t)`` over all outputs."""
        from scipy.linalg import block_diag

        return block_diag(*self.A), np.concatenate(self.b)

    def slack(self, H) -> np.ndarray:
        """``b_j - A_j H_j`` for every face, concatenated over outputs."""
        H = np.atleast_2d(np.asarray(H, dtype=float))
        return np.concatenate([b - A @ h for A, b, h in zip(self.A, self.b, H)])

    def contains(self, H, tol: float = 1e-9) -> bool:
        return bool(np.all(self.slack(H) >= -tol))


@dataclass(frozen=True)
class NominalModel:
    H_c: np.ndarray
    xi: np.ndarray


# ------------------------------------------------------------ polytopes


def chebyshev_ball(A, b, settings: Optional[SolverSettings] = None) -> tuple[np.ndarray, float]:
    """Center and radius of the largest inscribed ball; raises on empty/unbounded."""
    A = np.atleast_2d(A)
    norms = np.linalg.norm(A, axis=1)
    p = A.shape[1]
    c = np.zeros(p + 1)
    c[-1] = 1.0
    res = solve_lp(LinearProgram(c=c, A_ub=np.hstack([A, norms[:, None]]), b_ub=b, sense="max"), settings)
    if res.status is Status.INFEASIBLE or (res.ok and res.x[-1] < -REDUNDANCY_TOL):
        raise EmptySetError("polytope is empty")
    if res.status is Status.UNBOUNDED:
        return np.full(p, np.nan), np.inf
    if not res.ok:
        raise RuntimeError(f"Chebyshev LP failed: {res.status.value} ({res.info})")
    return res.x[:-1], float(res.x[-1])


def remove_redundant(A, b, tol: float = REDUNDANCY_TOL, keep=None, settings: Optional[SolverSettings] = None):
    """Drop faces implied by the others.

    Face ``i`` is redundant iff ``max a_i x`` over the remaining faces (with
    face ``i`` relaxed by one unit, so the LP stays bounded) is within
    ``tol`` of ``b_i``. Faces flagged in ``keep`` are never removed. Returns
    ``(A', b', kept_mask)``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    r = A.shape[0]
    alive = np.ones(r, dtype=bool)
    keep = np.zeros(r, dtype=bool) if keep is None else np.asarray(keep, dtype=bool)
    for i in range(r):
        if keep[i]:
            continue
        if not np.any(A[i]):
            if b[i] >= -tol:
                alive[i] = False
            continue
        others = alive.copy()
        others[i] = False
        rows = np.vstack([A[others], A[i]])
        rhs = np.concatenate([b[others], [b[i] + 1.0]])
        res = solve_lp(LinearProgram(c=A[i], A_ub=rows, b_ub=rhs, sense="max"), settings)
        if res.status is Status.INFEASIBLE:
            raise EmptySetError("polytope is empty")
        if not res.ok:
            raise RuntimeError(f"redundancy LP failed on face {i}: {res.status.value} ({res.info})")
        if res.objective <= b[i] + tol:
            alive[i] = False
    return A[alive], b[alive], alive


def cap_complexity(A, b, r_max: int, protected=None, settings: Optional[SolverSettings] = None):
    """Outer-approximate a polytope by at most ``r_max`` faces.

    Deletes unprotected faces one at a time, each time picking the face whose
    removal gives the smallest Chebyshev radius (ties: the latest face). The
    result always contains the input; it keeps more than ``r_max`` faces only
    if every further deletion would make the set unbounded. Returns ``(A', b', kept_mask)``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    r = A.shape[0]
    protected = np.zeros(r, dtype=bool) if protected is None else np.asarray(protected, dtype=bool)
    if r_max < protected.sum():
        raise ValueError(f"r_max={r_max} is smaller than the {int(protected.sum())} protected faces")
    alive = np.ones(r, dtype=bool)
    while alive.sum() > r_max:
        cand = np.flatnonzero(alive & ~protected)
        radii = np.full(cand.size, np.inf)
        for n, i in enumerate(cand):
            trial = alive.copy()
            trial[i] = False
            radii[n] = chebyshev_ball(A[trial], b[trial], settings)[1]
        if not np.isfinite(radii).any():
            break  # every removal would unbound the set
        # ties go to the most recently added face
        best = cand[np.flatnonzero(radii <= radii.min() + REDUNDANCY_TOL)[-1]]
        alive[best] = False
    return A[alive], b[alive], alive


# ---------------------------------------------------------------- update


def update(
    mset: ModelSet,
    phi,
    y_meas,
    eps_d,
    eps_v,
    r_max: Optional[int] = None,
    settings: Optional[SolverSettings] = None,
) -> ModelSet:
    """Intersect each ``F_j`` with the slab of models consistent with ``y_meas``."""
    phi = np.asarray(phi, dtype=float).ravel()
    y = np.atleast_1d(np.asarray(y_meas, dtype=float))
    w = np.atleast_1d(np.asarray(eps_d, dtype=float)) + np.atleast_1d(np.asarray(eps_v, dtype=float))
    if phi.size != mset.dim:
        raise ValueError(f"regressor length {phi.size} does not match model dimension {mset.dim}")
    if y.size != mset.n_y or w.size != mset.n_y:
        raise ValueError("measurement and noise bounds need one entry per output")
    As, bs, ps = [], [], []
    for j in range(mset.n_y):
        A = np.vstack([mset.A[j], phi, -phi])
        b = np.concatenate([mset.b[j], [y[j] + w[j], -y[j] + w[j]]])
        prot = np.concatenate([mset.protected[j], [False, False]])
        try:
            chebyshev_ball(A, b, settings)
        except EmptySetError as exc:
            raise EmptySetError(
                f"model set for output {j} became empty: the measurement {y[j]:.6g} is "
                "inconsistent with the prior bounds or the model class"
            ) from exc
        A, b, kept = remove_redundant(A, b, keep=prot, settings=settings)
        prot = prot[kept]
        if r_max is not None and A.shape[0] > r_max:
            A, b, kept = cap_complexity(A, b, r_max, protected=prot, settings=settings)
            prot = prot[kept]
            log.debug("output %d capped to %d faces", j, A.shape[0])
        As.append(A)
        bs.append(b)
        ps.append(prot)
    return ModelSet.from_arrays(As, bs, ps)


# --------------------------------------------------------- nominal model


def nominal_model(
    mset: ModelSet,
    previous: Optional[NominalModel] = None,
    alpha: float = 0.1,
    settings: Optional[SolverSettings] = None,
) -> NominalModel:
    """Regularized Chebyshev centers, one LP per output.

    Maximizes ``xi_j - alpha * ||H_prev_j - H_j||_1`` subject to the
    inscribed-ball condition on every face of ``F_j``.
    """
    p = mset.dim
    H = np.zeros((mset.n_y, p))
    xi = np.zeros(mset.n_y)
    for j in range(mset.n_y):
        A, b = mset.A[j], mset.b[j]
        norms = np.linalg.norm(A, axis=1)
        r = A.shape[0]
        if previous is None or alpha == 0.0:
            c = np.concatenate([np.zeros(p), [1.0]])
            A_ub = np.hstack([A, norms[:, None]])
            b_ub = b
        else:
            # variables [H (p), xi, s (p)] with s >= |H - H_prev|
            hp = np.asarray(previous.H_c[j], float)
            c = np.concatenate([np.zeros(p), [1.0], -alpha * np.ones(p)])
            I = np.eye(p)
            A_ub = np.block([
                [A, norms[:, None], np.zeros((r, p))],
                [I, np.zeros((p, 1)), -I],
                [-I, np.zeros((p, 1)), -I],
            ])
            b_ub = np.concatenate([b, hp, -hp])
            # xi >= 0 keeps the center inside F_j: in a thin wedge the L1 pull
            # toward an outside H_prev can otherwise beat the radius term
            row = np.zeros(2 * p + 1)
            row[p] = -1.0
            A_ub = np.vstack([A_ub, row])
            b_ub = np.append(b_ub, 0.0)
        res = solve_lp(LinearProgram(c=c, A_ub=A_ub, b_ub=b_ub, sense="max"), settings)
        if res.status is Status.INFEASIBLE or (res.ok and res.x[p] < -REDUNDANCY_TOL):
            raise EmptySetError(f"model set for output {j} is empty")
        if not res.ok:
            raise RuntimeError(f"nominal-model LP failed for output {j}: {res.status.value} ({res.info})")
        H[j] = res.x[:p]
        xi[j] = max(res.x[p], 0.0)
    return NominalModel(H_c=H, xi=xi)


def initial_nominal(mset: ModelSet, settings: Optional[SolverSettings] = None) -> NominalModel:
    """Chebyshev center, nudged off the origin when it lands exactly there."""
    nom = nominal_model(mset, None, 0.0, settings)
    H = nom.H_c.copy()
    for j in range(mset.n_y):
        if np.any(H[j] != 0.0):
            continue
        # step along the coordinate axis with the most room
        A, b = mset.A[j], mset.b[j]
        best_axis, best_room = 0, -np.inf
        for i in range(mset.dim):
            col = A[:, i]
            pos = col > 0
            room = np.min(b[pos] / col[pos]) if np.any(pos) else np.inf
            if room > best_room:
                best_axis, best_room = i, room
        H[j, best_axis] = nom.xi[j] / 2.0
    return NominalModel(H_c=H, xi=nom.xi)
