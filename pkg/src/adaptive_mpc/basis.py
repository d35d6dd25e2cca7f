"""Orthonormal basis-function parametrizations and their regressor dynamics.

A basis family turns each plant input ``u_i`` into ``m`` filtered signals
``zeta(L_k, u_i)``; stacking them over inputs gives the regressor ``phi`` with
``phi(t) = W phi(t-1) + Z u(t-1)``.

Impulse and Laguerre use the closed-form ``(w, z)`` blocks. Kautz and the
combined impulse/orthonormal family are realized as a cascade of filter
stages whose state is then mapped onto the basis outputs, so that the state
*is* the regressor.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class BasisKind(str, enum.Enum):
    IMPULSE = "impulse"
    LAGUERRE = "laguerre"
    KAUTZ = "kautz"
    COMBINED = "combined"


@dataclass(frozen=True)
class BasisFamily:
    """Choice of basis functions ``L_1 .. L_m`` sharing the pole parameter ``a``.

    Args:
        kind: which family.
        a: real part of the pole parameter (the whole parameter for
            impulse/Laguerre).
        m: number of basis functions per input-output pair.
        a_imag: imaginary part of ``a``; only meaningful for Kautz (or a
            Kautz-based combined family).
        n: number of leading pure delays ``q^-k`` (combined family only).
        base: orthonormal family used after the delays (combined only).
    """

    kind: BasisKind
    a: float
    m: int
    a_imag: float = 0.0
    n: int = 0
    base: BasisKind = BasisKind.LAGUERRE

    def __post_init__(self):
        object.__setattr__(self, "kind", BasisKind(self.kind))
        object.__setattr__(self, "base", BasisKind(self.base))
        for msg in self.validation_errors():
            raise ValueError(msg)

    def validation_errors(self) -> list[str]:
        errs = []
        if int(self.m) != self.m or self.m < 1:
            errs.append(f"m must be a positive integer, got {self.m}")
            return errs
        mag = abs(self.pole)
        if self.kind is BasisKind.IMPULSE:
            if mag > 1.0:
                errs.append(f"a: impulse family requires |a| <= 1, got |a|={mag:g}")
        elif mag >= 1.0:
            errs.append(f"a: {self.kind.value} family requires |a| < 1, got |a|={mag:g}")
        if self.kind in (BasisKind.IMPULSE, BasisKind.LAGUERRE) and self.a_imag != 0.0:
            errs.append(f"a_imag: {self.kind.value} family requires a real pole")
        if self.kind is BasisKind.KAUTZ and self.m % 2:
            errs.append(f"m: Kautz family requires an even m, got {self.m}")
        if self.kind is BasisKind.COMBINED:
            if self.base not in (BasisKind.LAGUERRE, BasisKind.KAUTZ):
                errs.append("base: combined family needs a laguerre or kautz base")
            if not 0 <= self.n < self.m:
                errs.append(f"n: combined family requires 0 <= n < m, got n={self.n}, m={self.m}")
            elif self.base is BasisKind.KAUTZ and (self.m - self.n) % 2:
                errs.append("m - n must be even for a Kautz-based combined family")
            if self.base is BasisKind.LAGUERRE and self.a_imag != 0.0:
                errs.append("a_imag: Laguerre base requires a real pole")
        return errs

    @property
    def pole(self) -> complex:
        return complex(self.a, self.a_imag)

    @property
    def b(self) -> float:
        """Kautz ``b = (a + a*) / (1 + a a*)``."""
        p = self.pole
        return 2.0 * p.real / (1.0 + abs(p) ** 2)

    @property
    def c(self) -> float:
        """Kautz ``c = -a a*``."""
        return -abs(self.pole) ** 2

    def truncation_length(self, tol: float = 1e-12) -> int:
        """Length after which ``|a|^L`` falls below ``tol``."""
        mag = abs(self.pole)
        if self.kind is BasisKind.IMPULSE or mag == 0.0:
            return self.m + 1
        return int(math.ceil(math.log(tol) / math.log(mag)))


@dataclass(frozen=True)
class RegressorDynamics:
    W: np.ndarray
    Z: np.ndarray
    n_u: int

    @property
    def dim(self) -> int:
        return self.W.shape[0]


# ---------------------------------------------------------------- blocks


def _impulse_block(fam: BasisFamily):
    m, a = fam.m, fam.a
    w = np.diag(np.full(m - 1, a), -1) if m > 1 else np.zeros((1, 1))
    z = np.zeros(m)
    z[0] = a
    return w, z


def _laguerre_block(a: float, m: int):
    w = np.zeros((m, m))
    for i in range(m):
        w[i, i] = a
        for j in range(i):
            w[i, j] = (-a) ** (i - j - 1) * (1.0 - a * a)
    z = math.sqrt(1.0 - a * a) * (-a) ** np.arange(m)
    return w, z


# A cascade stage: x+ = A x + B s ; outputs = C x ; next stage input = P x + D s.


def _delay_stage():
    return np.zeros((1, 1)), np.ones(1), np.ones((1, 1)), np.ones(1), 0.0


def _laguerre_stage(a: float):
    # first-order section (q - a)^-1, then all-pass (1 - a q)/(q - a) = -a + (1 - a^2)/(q - a)
    A = np.array([[a]])
    B = np.ones(1)
    C = np.array([[math.sqrt(1.0 - a * a)]])
    return A, B, C, np.array([1.0 - a * a]), -a


def _kautz_stage(b: float, c: float):
    # controllable canonical form of 1/D, D(q) = q^2 + b(c-1) q - c; x1 = s/D, x2 = q s/D
    A = np.array([[0.0, 1.0], [c, -b * (c - 1.0)]])
    B = np.array([0.0, 1.0])
    g = math.sqrt(1.0 - c * c)
    C = np.array([[-g * b, g], [g * math.sqrt(1.0 - b * b), 0.0]])
    # all-pass (-c q^2 + b(c-1) q + 1)/D = -c + [(1 - c^2) + b(c-1)(1+c) q]/D
    P = np.array([1.0 - c * c, b * (c - 1.0) * (1.0 + c)])
    return A, B, C, P, -c


def _cascade(stages):
    """Series connection of stages; returns ``(A, B, C)`` of the whole bank."""
    dims = [st[0].shape[0] for st in stages]
    nx = sum(dims)
    A = np.zeros((nx, nx))
    B = np.zeros(nx)
    C = np.zeros((sum(st[2].shape[0] for st in stages), nx))
    # stage input as a linear function of (global state, u)
    F = np.zeros(nx)
    G = 1.0
    off = row = 0
    for (As, Bs, Cs, Ps, Ds), d in zip(stages, dims):
        sl = slice(off, off + d)
        A[sl, :] += np.outer(Bs, F)
        A[sl, sl] += As
        B[sl] = Bs * G
        C[row:row + Cs.shape[0], sl] = Cs
        newF = Ds * F
        newF[sl] += Ps
        F, G = newF, Ds * G
        off += d
        row += Cs.shape[0]
    return A, B, C


def _orthonormal_stages(kind: BasisKind, fam: BasisFamily, count: int):
    if kind is BasisKind.LAGUERRE:
        return [_laguerre_stage(fam.a) for _ in range(count)]
    return [_kautz_stage(fam.b, fam.c) for _ in range(count // 2)]


def _cascade_block(stages):
    A, B, C = _cascade(stages)
    Cinv = np.linalg.inv(C)
    return C @ A @ Cinv, C @ B


def single_block(fam: BasisFamily) -> tuple[np.ndarray, np.ndarray]:
    """The ``m x m`` block ``w`` and ``m``-vector ``z`` for one input."""
    if fam.kind is BasisKind.IMPULSE:
        return _impulse_block(fam)
    if fam.kind is BasisKind.LAGUERRE:
        return _laguerre_block(fam.a, fam.m)
    if fam.kind is BasisKind.KAUTZ:
        return _cascade_block(_orthonormal_stages(BasisKind.KAUTZ, fam, fam.m))
    stages = [_delay_stage() for _ in range(fam.n)]
    stages += _orthonormal_stages(fam.base, fam, fam.m - fam.n)
    return _cascade_block(stages)


def build_dynamics(fam: BasisFamily, n_u: int) -> RegressorDynamics:
    if n_u < 1:
        raise ValueError(f"n_u must be positive, got {n_u}")
    w, z = single_block(fam)
    eye = np.eye(n_u)
    return RegressorDynamics(W=np.kron(eye, w), Z=np.kron(eye, z[:, None]), n_u=n_u)


# ------------------------------------------------------- impulse responses


def impulse_responses(fam: BasisFamily, L: int) -> np.ndarray:
    """``Psi[k-1, l-1] = Psi_k(a, l)`` for ``k = 1..m``, ``l = 1..L``."""
    w, z = single_block(fam)
    out = np.empty((fam.m, L))
    x = z.copy()
    for l in range(L):
        out[:, l] = x
        x = w @ x
    return out


def impulse_response(fam: BasisFamily, k: int, l: int) -> float:
    if not 1 <= k <= fam.m:
        raise ValueError(f"basis index k must be in 1..{fam.m}, got {k}")
    if l < 1:
        raise ValueError(f"lag l must be >= 1, got {l}")
    return float(impulse_responses(fam, l)[k - 1, l - 1])


# ------------------------------------------------------------- regressors


def advance_regressor(phi: np.ndarray, u, dyn: RegressorDynamics) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if phi.shape != (dyn.dim,):
        raise ValueError(f"regressor has shape {phi.shape}, expected ({dyn.dim},)")
    if u.shape != (dyn.n_u,):
        raise ValueError(f"input has shape {u.shape}, expected ({dyn.n_u},)")
    return dyn.W @ phi + dyn.Z @ u


def warmup_regressor(fam: BasisFamily, n_u: int, past_inputs: Sequence) -> np.ndarray:
    """phi(0) from the known inputs u(-T1) .. u(-1), starting at rest."""
    dyn = build_dynamics(fam, n_u)
    phi = np.zeros(dyn.dim)
    past = np.asarray(past_inputs, dtype=float).reshape(-1, n_u)
    for u in past:
        phi = advance_regressor(phi, u, dyn)
    return phi
