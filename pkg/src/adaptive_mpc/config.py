"""Configuration records for constraints and the controller."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .solver import SolverSettings


def _mat(x, ncols=None):
    a = np.atleast_2d(np.asarray(x, dtype=float))
    if ncols is not None and a.size == 0:
        return np.zeros((0, ncols))
    return a


def _vec(x):
    return np.atleast_1d(np.asarray(x, dtype=float)).ravel()


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Input ``C u <= g``, rate ``L du <= f``, output ``E y <= p`` and noise bounds."""

    C: np.ndarray
    g: np.ndarray
    L: np.ndarray
    f: np.ndarray
    E: np.ndarray
    p: np.ndarray
    eps_d: np.ndarray
    eps_v: np.ndarray

    def __post_init__(self):
        for name in ("C", "L", "E"):
            object.__setattr__(self, name, _mat(getattr(self, name)))
        for name in ("g", "f", "p", "eps_d", "eps_v"):
            object.__setattr__(self, name, _vec(getattr(self, name)))
        errs = self.validation_errors()
        if errs:
            raise ValueError("; ".join(errs))

    def validation_errors(self) -> list[str]:
        errs = []
        if self.C.shape[0] != self.g.size:
            errs.append("C and g row counts differ")
        if self.L.shape[0] != self.f.size:
            errs.append("L and f row counts differ")
        if self.E.shape[0] != self.p.size:
            errs.append("E and p row counts differ")
        if self.L.shape[1] != self.C.shape[1]:
            errs.append("C and L column counts differ (both act on the inputs)")
        if self.eps_d.size != self.E.shape[1] or self.eps_v.size != self.E.shape[1]:
            errs.append("eps_d and eps_v need one entry per output (columns of E)")
        if np.any(self.eps_d <= 0) or np.any(self.eps_v <= 0):
            errs.append("eps_d and eps_v must be positive")
        if np.any(self.f < 0):
            errs.append("rate constraint set must contain the origin (f >= 0)")
        return errs

    @property
    def n_u(self) -> int:
        return self.C.shape[1]

    @property
    def n_y(self) -> int:
        return self.E.shape[1]

    @classmethod
    def boxes(cls, u_max, du_max, y_max, eps_d, eps_v, y_min=None) -> "ConstraintSet":
        """Symmetric boxes on inputs, input rates and (optionally asymmetric) outputs."""
        u_max, du_max, y_max = _vec(u_max), _vec(du_max), _vec(y_max)
        y_min = -y_max if y_min is None else _vec(y_min)
        n_u, n_y = u_max.size, y_max.size
        return cls(
            C=np.vstack([np.eye(n_u), -np.eye(n_u)]), g=np.concatenate([u_max, u_max]),
            L=np.vstack([np.eye(n_u), -np.eye(n_u)]), f=np.concatenate([du_max, du_max]),
            E=np.vstack([np.eye(n_y), -np.eye(n_y)]), p=np.concatenate([y_max, -y_min]),
            eps_d=eps_d, eps_v=eps_v,
        )


@dataclass(frozen=True, eq=False)
class ControllerConfig:
    """Receding-horizon settings.

    ``alpha`` weights the nominal-model hysteresis, ``r_explore`` inflates the
    output tubes of the exploring stage, and ``r_max`` caps faces per output
    (``None`` means ``20 * n_u * m``).
    """

    N: int
    Q: np.ndarray
    S: np.ndarray
    R: np.ndarray
    alpha: float = 0.1
    r_explore: float = 1.5
    explore: bool = False
    r_max: Optional[int] = None
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        for name in ("Q", "S", "R"):
            object.__setattr__(self, name, _mat(getattr(self, name)))

    def validation_errors(self, m: Optional[int] = None, n_u: Optional[int] = None, n_y: Optional[int] = None) -> list[str]:
        errs = []
        if self.N < 1:
            errs.append("N must be positive")
        if m is not None and self.N < m:
            errs.append(f"N: horizon must satisfy N >= m (got N={self.N}, m={m})")
        for name, size in (("Q", n_y), ("S", n_u), ("R", n_u)):
            M = getattr(self, name)
            if size is not None and M.shape != (size, size):
                errs.append(f"{name} must be {size}x{size}, got {M.shape}")
                continue
            if M.shape[0] != M.shape[1] or not np.allclose(M, M.T):
                errs.append(f"{name} must be symmetric")
            elif np.linalg.eigvalsh(M).min() < -1e-10:
                errs.append(f"{name} must be positive semidefinite")
        if self.alpha < 0:
            errs.append("alpha must be nonnegative")
        if self.r_explore < 1:
            errs.append("r_explore must be >= 1")
        if self.r_max is not None and self.r_max < 1:
            errs.append("r_max must be positive")
        return errs
