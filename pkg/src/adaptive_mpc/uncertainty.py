"""Prior coefficient bounds from interval-uncertain transfer functions.

Each SISO channel is ``g q^-tau prod(q - z) / prod(q - p)`` with every
parameter known only up to an interval. Its basis coefficients are the
normalized projections of the channel impulse response on the basis impulse
responses; bounds are taken over a full-factorial grid of the parameter box
(integer delays enumerated exactly) and then inflated outward.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.signal import lfilter

from .basis import BasisFamily, impulse_responses
from .setid import ModelSet
from .solver import LinearProgram, SolverSettings, solve_lp


@dataclass(frozen=True)
class UncertainTF:
    g_lo: float
    g_hi: float
    tau_lo: int = 0
    tau_hi: int = 0
    z_lo: tuple = ()
    z_hi: tuple = ()
    p_lo: tuple = ()
    p_hi: tuple = ()

    def __post_init__(self):
        for name in ("z_lo", "z_hi", "p_lo", "p_hi"):
            object.__setattr__(self, name, tuple(float(v) for v in np.atleast_1d(getattr(self, name))))
        errs = self.validation_errors()
        if errs:
            raise ValueError("; ".join(errs))

    def validation_errors(self) -> list[str]:
        errs = []
        if self.g_lo > self.g_hi:
            errs.append("g_lo > g_hi")
        if int(self.tau_lo) != self.tau_lo or int(self.tau_hi) != self.tau_hi:
            errs.append("delays must be integers")
        if self.tau_lo < 0 or self.tau_hi < self.tau_lo:
            errs.append("delay bounds must satisfy 0 <= tau_lo <= tau_hi")
        if len(self.z_lo) != len(self.z_hi):
            errs.append("z_lo and z_hi differ in length")
        elif any(lo > hi for lo, hi in zip(self.z_lo, self.z_hi)):
            errs.append("z_lo > z_hi")
        if len(self.p_lo) != len(self.p_hi):
            errs.append("p_lo and p_hi differ in length")
        elif any(lo > hi for lo, hi in zip(self.p_lo, self.p_hi)):
            errs.append("p_lo > p_hi")
        if any(abs(v) >= 1.0 for v in self.p_lo + self.p_hi):
            errs.append("all poles must lie strictly inside the unit circle")
        if len(self.z_lo) > len(self.p_lo) + self.tau_lo - 1:
            errs.append("transfer function must be strictly proper for every delay in the box")
        return errs

    @property
    def max_pole(self) -> float:
        return max((abs(v) for v in self.p_lo + self.p_hi), default=0.0)


@dataclass(frozen=True)
class GridSpec:
    points_per_dim: int = 7
    inflation: float = 1.1
    tail_length: Optional[int] = None
    tail_tol: float = 1e-12

    def __post_init__(self):
        if self.points_per_dim < 2:
            raise ValueError("points_per_dim must be >= 2")
        if self.inflation < 1.0:
            raise ValueError("inflation must be >= 1")


@dataclass(frozen=True)
class CoefficientBounds:
    h_lo: np.ndarray
    h_hi: np.ndarray
    eta_bar: float = 0.0


def channel_impulse_response(g, tau, zeros, poles, L: int) -> np.ndarray:
    """Samples ``l = 1..L`` of ``g q^-tau prod(q - z)/prod(q - p)``."""
    zeros = np.atleast_1d(np.asarray(zeros, dtype=float))
    poles = np.atleast_1d(np.asarray(poles, dtype=float))
    if np.any(np.abs(poles) >= 1.0):
        raise ValueError("unstable pole: all poles must satisfy |p| < 1")
    rel = int(tau) + poles.size - zeros.size
    if rel < 1:
        raise ValueError("channel must be strictly proper")
    num = np.poly(zeros) if zeros.size else np.ones(1)
    den = np.poly(poles) if poles.size else np.ones(1)
    imp = np.zeros(L)
    if rel <= L:
        imp[rel - 1] = 1.0  # response sample l corresponds to index l-1
    return g * lfilter(num, den, imp)


def default_tail_length(fam: BasisFamily, max_pole: float, tau_hi: int = 0, n_p: int = 0, tol: float = 1e-12) -> int:
    rho = max(abs(fam.pole), max_pole)
    base = fam.truncation_length(tol) if rho == abs(fam.pole) else (
        int(math.ceil(math.log(tol) / math.log(rho))) if rho > 0 else 1)
    # repeated poles add polynomial factors; pad for them and the delay
    return base + int(tau_hi) + 4 * (n_p + fam.m) + fam.m


def project_coefficients(g, tau, zeros, poles, fam: BasisFamily, tail_length: int) -> np.ndarray:
    psi = channel_impulse_response(g, tau, zeros, poles, tail_length)
    basis = impulse_responses(fam, tail_length)
    return (basis @ psi) / np.einsum("kl,kl->k", basis, basis)


def _grid_points(tf: UncertainTF, points: int):
    axes = [np.linspace(tf.g_lo, tf.g_hi, points) if tf.g_hi > tf.g_lo else np.array([tf.g_lo])]
    for lo, hi in zip(tf.z_lo + tf.p_lo, tf.z_hi + tf.p_hi):
        axes.append(np.linspace(lo, hi, points) if hi > lo else np.array([lo]))
    delays = range(int(tf.tau_lo), int(tf.tau_hi) + 1)
    nz = len(tf.z_lo)
    for tau in delays:
        for pt in itertools.product(*axes):
            yield pt[0], tau, pt[1:1 + nz], pt[1 + nz:]


def _inflate(lo, hi, factor):
    # widen both ends by a fraction of the larger magnitude; a purely relative
    # rule would leave extrema near zero uninflated
    pad = (factor - 1.0) * np.maximum(np.abs(lo), np.abs(hi))
    return lo - pad, hi + pad


def _scan(tf: UncertainTF, fam: BasisFamily, grid: GridSpec):
    L = grid.tail_length or default_tail_length(fam, tf.max_pole, tf.tau_hi, len(tf.p_lo), grid.tail_tol)
    basis = impulse_responses(fam, L)
    norms = np.einsum("kl,kl->k", basis, basis)
    H, R = [], []
    for g, tau, zs, ps in _grid_points(tf, grid.points_per_dim):
        psi = channel_impulse_response(g, tau, zs, ps, L)
        h = (basis @ psi) / norms
        H.append(h)
        R.append(np.abs(psi - h @ basis).sum())
    if not H:
        raise ValueError("empty parameter grid")
    return np.array(H), np.array(R)


def coefficient_bounds(tf: UncertainTF, fam: BasisFamily, grid: GridSpec = GridSpec()) -> CoefficientBounds:
    H, _ = _scan(tf, fam, grid)
    lo, hi = _inflate(H.min(axis=0), H.max(axis=0), grid.inflation)
    return CoefficientBounds(h_lo=lo, h_hi=hi)


def unmodeled_bound(tf: UncertainTF, fam: BasisFamily, u_bar: float, grid: GridSpec = GridSpec()) -> float:
    if u_bar < 0:
        raise ValueError("u_bar must be nonnegative")
    _, R = _scan(tf, fam, grid)
    return float(grid.inflation * u_bar * R.max())


def channel_bounds(tf: UncertainTF, fam: BasisFamily, u_bar: float, grid: GridSpec = GridSpec()) -> CoefficientBounds:
    """Coefficient bounds and unmodeled-dynamics bound from a single grid scan."""
    H, R = _scan(tf, fam, grid)
    lo, hi = _inflate(H.min(axis=0), H.max(axis=0), grid.inflation)
    return CoefficientBounds(h_lo=lo, h_hi=hi, eta_bar=float(grid.inflation * u_bar * R.max()))


def max_input_magnitude(C, g, i: int, settings: Optional[SolverSettings] = None) -> float:
    """max |u_i| over {u : C u <= g}, as the larger of two LPs."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    g = np.asarray(g, dtype=float).ravel()
    n_u = C.shape[1]
    if not 0 <= i < n_u:
        raise ValueError(f"input index {i} out of range for {n_u} inputs")
    best = 0.0
    for sense in ("max", "min"):
        c = np.zeros(n_u)
        c[i] = 1.0
        res = solve_lp(LinearProgram(c=c, A_ub=C, b_ub=g, sense=sense), settings)
        if not res.ok:
            raise ValueError(f"input polytope is {res.status.value} ({res.info})")
        best = max(best, abs(res.objective))
    return best


def assemble_initial_set(bounds: Sequence[Sequence[CoefficientBounds]], eps_d) -> tuple[ModelSet, np.ndarray]:
    """Box model set F(0) from per-channel bounds; ``bounds[j][i]`` is channel i -> j.

    Returns the model set and the disturbance bound augmented by the
    unmodeled-dynamics bounds, ``eps_d_j + sum_i eta_bar_ji``.
    """
    eps_d = np.asarray(eps_d, dtype=float).ravel()
    n_y = len(bounds)
    if eps_d.size != n_y:
        raise ValueError("eps_d must have one entry per output")
    lo = [np.concatenate([np.asarray(cb.h_lo, float) for cb in row]) for row in bounds]
    hi = [np.concatenate([np.asarray(cb.h_hi, float) for cb in row]) for row in bounds]
    for l_, h_ in zip(lo, hi):
        if not (np.all(np.isfinite(l_)) and np.all(np.isfinite(h_))):
            raise ValueError("channel bounds must be finite")
    eta = np.array([sum(cb.eta_bar for cb in row) for row in bounds])
    return ModelSet.box(lo, hi), eps_d + eta
