"""Closed-loop simulation: true plant, bounded signals, run log and metrics."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.signal import tf2ss

from .basis import BasisFamily, build_dynamics, warmup_regressor
from .config import ConstraintSet, ControllerConfig
from .controller import AdaptiveMPC
from .fhocp import InfeasibleError
from .setid import EmptySetError, ModelSet
from .uncertainty import default_tail_length, project_coefficients

log = logging.getLogger(__name__)

VIOLATION_TOL = 1e-6


# ----------------------------------------------------------------- plants


class CoefficientPlant:
    """In-class plant ``y = H* phi + d`` driven by the basis regressor."""

    in_class = True

    def __init__(self, H, family: BasisFamily, n_u: int):
        self.H = np.atleast_2d(np.asarray(H, float))
        self.family, self.n_u = family, n_u
        self.dyn = build_dynamics(family, n_u)
        if self.H.shape[1] != self.dyn.dim:
            raise ValueError(f"H has {self.H.shape[1]} columns, expected n_u*m = {self.dyn.dim}")
        self.phi = np.zeros(self.dyn.dim)

    @property
    def n_y(self) -> int:
        return self.H.shape[0]

    def fresh(self) -> "CoefficientPlant":
        return CoefficientPlant(self.H, self.family, self.n_u)

    def reference_coefficients(self, family: BasisFamily) -> np.ndarray:
        return self.H

    def output(self) -> np.ndarray:
        return self.H @ self.phi

    def advance(self, u) -> None:
        self.phi = self.dyn.W @ self.phi + self.dyn.Z @ np.atleast_1d(u)


@dataclass(frozen=True)
class Channel:
    """``gain q^-delay prod(q - z) / prod(q - p)`` from input ``i`` to output ``j`` (0-based)."""

    output: int
    input: int
    gain: float
    poles: tuple = ()
    zeros: tuple = ()
    delay: int = 0


class TransferFunctionPlant:
    """Bank of rational SISO channels simulated by state-space recursion."""

    in_class = False

    def __init__(self, channels: Sequence[Channel], n_y: int, n_u: int):
        self.n_y, self.n_u = n_y, n_u
        self.channels = list(channels)
        self._ss = []
        for ch in self.channels:
            poles = np.atleast_1d(np.asarray(ch.poles, float))
            if np.any(np.abs(poles) >= 1.0):
                raise ValueError(f"channel {ch.input + 1}->{ch.output + 1} is unstable")
            num = ch.gain * (np.poly(ch.zeros) if len(ch.zeros) else np.ones(1))
            den = np.poly(poles) if poles.size else np.ones(1)
            den = np.concatenate([den, np.zeros(int(ch.delay))])
            if num.size >= den.size:
                raise ValueError(f"channel {ch.input + 1}->{ch.output + 1} must be strictly proper")
            A, B, C, D = tf2ss(num, den)
            self._ss.append([A, B.ravel(), C.ravel(), np.zeros(A.shape[0])])

    def fresh(self) -> "TransferFunctionPlant":
        return TransferFunctionPlant(self.channels, self.n_y, self.n_u)

    def reference_coefficients(self, family: BasisFamily) -> np.ndarray:
        return self.projected_coefficients(family)

    def output(self) -> np.ndarray:
        y = np.zeros(self.n_y)
        for ch, (_, _, C, x) in zip(self.channels, self._ss):
            y[ch.output] += C @ x
        return y

    def advance(self, u) -> None:
        u = np.atleast_1d(u)
        for ch, st in zip(self.channels, self._ss):
            A, B, _, x = st
            st[3] = A @ x + B * u[ch.input]

    def projected_coefficients(self, family: BasisFamily) -> np.ndarray:
        """In-class part ``H*'``: basis projection of every channel."""
        H = np.zeros((self.n_y, self.n_u * family.m))
        for ch in self.channels:
            L = default_tail_length(family, max((abs(p) for p in ch.poles), default=0.0), ch.delay, len(ch.poles))
            h = project_coefficients(ch.gain, ch.delay, ch.zeros, ch.poles, family, L)
            H[ch.output, ch.input * family.m:(ch.input + 1) * family.m] += h
        return H


# ---------------------------------------------------------------- signals


class SignalKind(str, enum.Enum):
    CONSTANT = "constant"
    STEP_TRAIN = "step-train"
    UNIFORM = "uniform-random"
    CORNER = "worst-case-corner"


@dataclass(frozen=True)
class SignalSpec:
    """Bounded signal; samples lie in ``[-scale*bound, scale*bound]`` per channel."""

    kind: SignalKind = SignalKind.UNIFORM
    scale: float = 1.0
    period: int = 10
    switch_prob: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "kind", SignalKind(self.kind))
        if not 0.0 <= self.scale <= 1.0:
            raise ValueError("scale must lie in [0, 1]")
        if self.period < 1:
            raise ValueError("period must be positive")

    def generate(self, bound, T: int, rng: np.random.Generator) -> np.ndarray:
        bound = np.atleast_1d(np.asarray(bound, float))
        amp = self.scale * bound
        n = bound.size
        if self.kind is SignalKind.CONSTANT:
            out = np.tile(amp, (T, 1))
        elif self.kind is SignalKind.UNIFORM:
            out = rng.uniform(-1.0, 1.0, size=(T, n)) * amp
        elif self.kind is SignalKind.STEP_TRAIN:
            levels = rng.uniform(-1.0, 1.0, size=(T // self.period + 1, n))
            out = levels[np.arange(T) // self.period] * amp
        else:
            sign = np.where(rng.uniform(size=n) < 0.5, -1.0, 1.0)
            out = np.empty((T, n))
            flips = rng.uniform(size=(T, n)) < self.switch_prob
            for t in range(T):
                sign = np.where(flips[t], -sign, sign)
                out[t] = sign * amp
        assert np.all(np.abs(out) <= bound + 0.0), "generated signal violates its bound"
        return out


# ------------------------------------------------------------------- runs


@dataclass
class RunLog:
    n_u: int
    n_y: int
    rows: list = field(default_factory=list)
    timing: list = field(default_factory=list)
    status: str = "ok"
    message: str = ""

    def columns(self) -> list[str]:
        cols = ["t"]
        cols += [f"u_{i + 1}" for i in range(self.n_u)]
        cols += [f"y_meas_{j + 1}" for j in range(self.n_y)]
        cols += [f"y_{j + 1}" for j in range(self.n_y)]
        cols += [f"y_des_{j + 1}" for j in range(self.n_y)]
        cols += [f"d_hat_{j + 1}" for j in range(self.n_y)]
        cols += [f"xi_{j + 1}" for j in range(self.n_y)]
        cols += [f"faces_{j + 1}" for j in range(self.n_y)]
        cols += ["J", "explored", "fallback", "output_residual", "input_residual", "rate_residual", "member_slack",
                 "class_residual"]
        return cols

    @staticmethod
    def timing_columns() -> list[str]:
        return ["t", "t_identify", "t_fhocp", "t_explore"]

    def as_arrays(self) -> dict[str, np.ndarray]:
        arr = np.array(self.rows, dtype=float).reshape(-1, len(self.columns()))
        return {c: arr[:, i] for i, c in enumerate(self.columns())}


@dataclass
class Scenario:
    family: BasisFamily
    constraints: ConstraintSet
    controller: ControllerConfig
    initial_set: ModelSet
    plant: object
    reference: np.ndarray           # (T + N + 1, n_y), y_des(0..)
    T: int
    disturbance: SignalSpec = field(default_factory=SignalSpec)
    noise: SignalSpec = field(default_factory=SignalSpec)
    past_inputs: Optional[np.ndarray] = None
    seed: int = 0
    eta_bar: Optional[np.ndarray] = None
    name: str = "scenario"

    def with_changes(self, **kw) -> "Scenario":
        from dataclasses import replace

        return replace(self, **kw)


def _residual(M, x, rhs) -> float:
    if M.shape[0] == 0:
        return -np.inf
    return float(np.max(M @ x - rhs))


def simulate(scenario: Scenario, explore: Optional[bool] = None, seed: Optional[int] = None) -> RunLog:
    """Run the closed loop for ``scenario.T`` steps.

    The disturbance ``d`` uses the *raw* bound ``eps_d`` from the constraint
    set minus any unmodeled-dynamics allowance, so that the true output error
    respects the bound the identifier assumes.
    """
    sc = scenario
    cons = sc.constraints
    cfg = sc.controller
    if explore is not None:
        from dataclasses import replace

        cfg = replace(cfg, explore=explore)
    seed = sc.seed if seed is None else seed
    rng_d, rng_v = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2)]
    n_u, n_y = cons.n_u, cons.n_y
    eps_d_signal = cons.eps_d if sc.eta_bar is None else cons.eps_d - np.asarray(sc.eta_bar).sum(axis=1)
    d = sc.disturbance.generate(eps_d_signal, sc.T, rng_d)
    v = sc.noise.generate(cons.eps_v, sc.T, rng_v)

    plant = sc.plant.fresh()

    past = np.zeros((0, n_u)) if sc.past_inputs is None else np.asarray(sc.past_inputs, float).reshape(-1, n_u)
    for u in past:
        plant.advance(u)
    phi0 = warmup_regressor(sc.family, n_u, past)
    dyn = build_dynamics(sc.family, n_u)
    hist, phi = [], np.zeros(dyn.dim)
    for u in past:
        hist.append(phi)
        phi = dyn.W @ phi + dyn.Z @ u
    u_prev = past[-1] if len(past) else np.zeros(n_u)
    ctl = AdaptiveMPC(sc.family, sc.initial_set, cons, cfg, phi0=phi0, u_prev=u_prev, history=hist[-(dyn.dim - 1):] if dyn.dim > 1 else None)

    # H* in class, otherwise the projected in-class part H*'
    H_ref = plant.reference_coefficients(sc.family)
    runlog = RunLog(n_u=n_u, n_y=n_y)
    N = cfg.N
    for t in range(sc.T):
        phi_t = ctl.phi.copy()
        y = plant.output() + d[t]
        y_meas = y + v[t]
        ref = sc.reference[np.minimum(np.arange(t + 1, t + 1 + N), len(sc.reference) - 1)]
        try:
            info = ctl.step(y_meas, ref)
        except (InfeasibleError, EmptySetError) as exc:
            runlog.status = "infeasible" if isinstance(exc, InfeasibleError) else "empty_set"
            runlog.message = f"t={t}: {exc}"
            log.error(runlog.message)
            break
        slack = float(ctl.mset.slack(H_ref).min())
        class_res = float(np.max(np.abs(y - H_ref @ phi_t) - cons.eps_d))
        u = info.u
        row = [t, *u, *y_meas, *y, *sc.reference[min(t, len(sc.reference) - 1)], *info.d_hat, *info.xi,
               *[float(f) for f in info.faces], info.J, float(info.explored), float(info.fallback),
               _residual(cons.E, y, cons.p), _residual(cons.C, u, cons.g),
               _residual(cons.L, u - u_prev, cons.f), slack, class_res]
        runlog.rows.append([float(x) for x in row])
        runlog.timing.append([t, info.t_identify, info.t_fhocp, info.t_explore])
        u_prev = u
        plant.advance(u)
    return runlog


# ---------------------------------------------------------------- metrics


@dataclass
class Metrics:
    rmse: float
    max_residual: float
    infeasible_steps: int
    final_xi_sum: float
    steps: int
    completed: bool
    membership_violations: int
    class_violations: int = 0
    mean_time_identify: float = float("nan")
    mean_time_fhocp: float = float("nan")
    mean_time_explore: float = float("nan")

    @property
    def violation_free(self) -> bool:
        return (self.completed and self.max_residual <= VIOLATION_TOL and self.infeasible_steps == 0
                and self.membership_violations == 0 and self.class_violations == 0)


def summarize(data: dict, timing: Optional[dict] = None, completed: bool = True) -> Metrics:
    """Metrics from a log given as column arrays (``RunLog.as_arrays`` or a read CSV)."""
    n_y = sum(1 for c in data if c.startswith("y_des_"))
    steps = len(data["t"])
    if steps == 0:
        return Metrics(0.0, 0.0, 0, float("nan"), 0, completed, 0)
    err = np.column_stack([data[f"y_{j + 1}"] - data[f"y_des_{j + 1}"] for j in range(n_y)])
    rmse = float(np.sqrt(np.mean(err ** 2)))
    res = np.column_stack([data[c] for c in ("output_residual", "input_residual", "rate_residual")])
    res = res[np.isfinite(res)]
    max_res = float(max(0.0, res.max(initial=0.0)))
    infeasible = int(np.sum(data["fallback"] > 0))
    xi = sum(data[f"xi_{j + 1}"][-1] for j in range(n_y))
    slack = data.get("member_slack", np.full(steps, np.nan))
    member_viol = int(np.sum(slack[np.isfinite(slack)] < -1e-9))
    cres = data.get("class_residual", np.full(steps, np.nan))
    class_viol = int(np.sum(cres[np.isfinite(cres)] > VIOLATION_TOL))
    m = Metrics(rmse, max_res, infeasible, float(xi), steps, completed, member_viol, class_viol)
    if timing is not None and len(timing.get("t", [])):
        m.mean_time_identify = float(np.mean(timing["t_identify"]))
        m.mean_time_fhocp = float(np.mean(timing["t_fhocp"]))
        m.mean_time_explore = float(np.mean(timing["t_explore"]))
    return m
