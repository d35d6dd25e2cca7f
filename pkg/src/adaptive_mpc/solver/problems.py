"""Problem and result records shared by every backend."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERIC_FAILURE = "numeric_failure"


@dataclass(frozen=True)
class SolverSettings:
    """Single source of numerical tolerances and backend choice.

    ``lp_backend`` / ``qp_backend`` name a registered backend
    (``"highs"``, ``"clarabel"`` or ``"reference"``).
    """

    feas_tol: float = 1e-8
    opt_tol: float = 1e-8
    max_iter: int = 200
    lp_backend: str = "highs"
    qp_backend: str = "clarabel"


def _as_2d(a, n):
    if a is None:
        return np.zeros((0, n))
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return np.zeros((0, n))
    return a


def _as_1d(b):
    if b is None:
        return np.zeros(0)
    return np.atleast_1d(np.asarray(b, dtype=float)).ravel()


@dataclass
class LinearProgram:
    """``min``/``max`` c'x  s.t.  A_ub x <= b_ub, A_eq x = b_eq, bounds."""

    c: np.ndarray
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    bounds: Optional[Sequence[tuple]] = None
    sense: str = "min"

    def __post_init__(self):
        self.c = _as_1d(self.c)
        n = self.c.size
        self.A_ub = _as_2d(self.A_ub, n)
        self.b_ub = _as_1d(self.b_ub)
        self.A_eq = _as_2d(self.A_eq, n)
        self.b_eq = _as_1d(self.b_eq)
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")
        if self.A_ub.shape != (self.b_ub.size, n):
            raise ValueError(f"A_ub shape {self.A_ub.shape} inconsistent with b_ub ({self.b_ub.size}) and c ({n})")
        if self.A_eq.shape != (self.b_eq.size, n):
            raise ValueError(f"A_eq shape {self.A_eq.shape} inconsistent with b_eq ({self.b_eq.size}) and c ({n})")
        if self.bounds is not None and len(self.bounds) != n:
            raise ValueError("bounds must have one (lo, hi) pair per variable")

    @property
    def n(self) -> int:
        return self.c.size

    def bound_rows(self):
        """Finite variable bounds rewritten as extra inequality rows."""
        if self.bounds is None:
            return np.zeros((0, self.n)), np.zeros(0)
        rows, rhs = [], []
        for i, (lo, hi) in enumerate(self.bounds):
            if hi is not None and np.isfinite(hi):
                r = np.zeros(self.n)
                r[i] = 1.0
                rows.append(r)
                rhs.append(hi)
            if lo is not None and np.isfinite(lo):
                r = np.zeros(self.n)
                r[i] = -1.0
                rows.append(r)
                rhs.append(-lo)
        if not rows:
            return np.zeros((0, self.n)), np.zeros(0)
        return np.array(rows), np.array(rhs)


@dataclass
class QuadraticProgram:
    """min 1/2 x'Px + c'x  s.t.  A_ub x <= b_ub, A_eq x = b_eq."""

    P: np.ndarray
    c: np.ndarray
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None

    def __post_init__(self):
        self.c = _as_1d(self.c)
        n = self.c.size
        self.P = np.asarray(self.P, dtype=float).reshape(n, n)
        self.A_ub = _as_2d(self.A_ub, n)
        self.b_ub = _as_1d(self.b_ub)
        self.A_eq = _as_2d(self.A_eq, n)
        self.b_eq = _as_1d(self.b_eq)
        if self.A_ub.shape != (self.b_ub.size, n):
            raise ValueError(f"A_ub shape {self.A_ub.shape} inconsistent with b_ub ({self.b_ub.size}) and c ({n})")
        if self.A_eq.shape != (self.b_eq.size, n):
            raise ValueError(f"A_eq shape {self.A_eq.shape} inconsistent with b_eq ({self.b_eq.size}) and c ({n})")
        if not np.allclose(self.P, self.P.T, atol=1e-8):
            raise ValueError("P must be symmetric")
        if n and np.linalg.eigvalsh(0.5 * (self.P + self.P.T)).min() < -1e-8 * max(1.0, np.abs(self.P).max()):
            raise ValueError("P must be positive semidefinite")

    @property
    def n(self) -> int:
        return self.c.size


@dataclass
class SolveResult:
    status: Status
    x: Optional[np.ndarray] = None
    objective: float = float("nan")
    dual_ub: Optional[np.ndarray] = None
    info: str = ""
    backend: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL
