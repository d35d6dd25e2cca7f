"""Scenario and plant-description files (TOML).

Scenario grammar (all tables optional unless marked)::

    name = "demo"
    T = 200                      # required, run length
    seed = 1

    [basis]                      # required
    kind = "laguerre"            # impulse | laguerre | kautz | combined
    a = 0.6
    m = 2
    a_imag = 0.0                 # kautz
    n = 0                        # combined: number of leading delays
    base = "laguerre"            # combined: laguerre | kautz

    [plant]                      # required: either H or channels
    H = [[1.0, 0.3]]             # in-class coefficients, n_y x n_u*m
    # [[plant.channel]]          # out-of-class rational channels (1-based indices)
    # output = 1
    # input = 1
    # gain = 1.0
    # poles = [0.7]
    # zeros = []
    # delay = 0

    [model_set]                  # required: inline box or file
    h_lo = [[0.5, -0.2]]
    h_hi = [[1.5, 0.8]]
    # file = "f0.modelset"       # relative to the scenario file

    [constraints]                # required: explicit matrices or box shortcuts
    u_max = [1.0]                # or C, g
    du_max = [0.5]               # or L, f
    y_max = [1.5]                # or E, p (y_min optional)
    eps_d = [0.02]
    eps_v = [0.01]

    [controller]                 # required
    N = 6
    Q = [[1.0]]
    S = [[0.01]]
    R = [[0.1]]
    alpha = 0.1
    r_explore = 1.5
    explore = false
    r_max = 40

    [solver]
    lp_backend = "highs"
    qp_backend = "clarabel"
    feas_tol = 1e-8
    opt_tol = 1e-8

    [reference]                  # required
    kind = "constant"            # constant | steps | file
    value = [1.0]                # constant
    # times = [0, 50]            # steps: switching times
    # values = [[1.0], [-0.5]]
    # file = "ref.csv"           # columns y_des_1 .. y_des_ny

    [disturbance]                # same keys for [noise]
    kind = "worst-case-corner"   # constant | step-train | uniform-random | worst-case-corner
    scale = 1.0
    period = 10
    switch_prob = 0.2

    [warmup]
    T1 = 20
    kind = "zero"                # zero | uniform | explicit
    # inputs = [[0.1], [0.2]]    # explicit, oldest first

Unknown keys are rejected. Validation collects every error before failing.
"""

from __future__ import annotations

import csv
import sys
from pathlib import Path
from typing import Any, Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .basis import BasisFamily, BasisKind
from .config import ConstraintSet, ControllerConfig
from .io import ModelSetFormatError, read_model_set
from .setid import ModelSet
from .sim import Channel, CoefficientPlant, Scenario, SignalSpec, TransferFunctionPlant
from .solver import SolverSettings
from .uncertainty import GridSpec, UncertainTF


class ScenarioError(ValueError):
    """Invalid scenario; ``errors`` lists every problem found."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.errors))


_ALLOWED = {
    "": {"name", "T", "seed", "basis", "plant", "model_set", "constraints", "controller", "solver", "reference",
         "disturbance", "noise", "warmup"},
    "basis": {"kind", "a", "m", "a_imag", "n", "base"},
    "plant": {"H", "channel"},
    "model_set": {"h_lo", "h_hi", "file"},
    "constraints": {"C", "g", "L", "f", "E", "p", "u_max", "du_max", "y_max", "y_min", "eps_d", "eps_v"},
    "controller": {"N", "Q", "S", "R", "alpha", "r_explore", "explore", "r_max"},
    "solver": {"lp_backend", "qp_backend", "feas_tol", "opt_tol", "max_iter"},
    "reference": {"kind", "value", "times", "values", "file"},
    "disturbance": {"kind", "scale", "period", "switch_prob"},
    "noise": {"kind", "scale", "period", "switch_prob"},
    "warmup": {"T1", "kind", "inputs"},
    "channel": {"output", "input", "gain", "poles", "zeros", "delay"},
}


class _Collector:
    def __init__(self):
        self.errors: list[str] = []

    def add(self, msg: str) -> None:
        self.errors.append(msg)

    def attempt(self, field: str, fn, *args, **kw):
        try:
            return fn(*args, **kw)
        except (ValueError, TypeError, KeyError) as exc:
            self.add(f"{field}: {exc}")
            return None


def _check_keys(table: dict, section: str, errs: _Collector, allowed_key: Optional[str] = None) -> None:
    allowed = _ALLOWED[allowed_key if allowed_key is not None else section]
    for key in table:
        if key not in allowed:
            errs.add(f"{section or '<top>'}.{key}: unknown key")


def _need(table: dict, key: str, section: str, errs: _Collector) -> Any:
    if key not in table:
        errs.add(f"{section}.{key}: missing required field")
        return None
    return table[key]


def load_toml(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


# ---------------------------------------------------------------- pieces


def _basis(tbl: dict, errs: _Collector) -> Optional[BasisFamily]:
    _check_keys(tbl, "basis", errs)
    kind, a, m = (_need(tbl, k, "basis", errs) for k in ("kind", "a", "m"))
    if kind is None or a is None or m is None:
        return None
    try:
        kind = BasisKind(kind)
    except ValueError:
        errs.add(f"basis.kind: unknown family {kind!r}")
        return None
    base = tbl.get("base", "laguerre")
    try:
        base = BasisKind(base)
    except ValueError:
        errs.add(f"basis.base: unknown family {base!r}")
        return None
    fam = BasisFamily.__new__(BasisFamily)
    for k, v in dict(kind=kind, a=float(a), m=int(m), a_imag=float(tbl.get("a_imag", 0.0)),
                     n=int(tbl.get("n", 0)), base=base).items():
        object.__setattr__(fam, k, v)
    bad = fam.validation_errors()
    for msg in bad:
        errs.add(f"basis.{msg}")
    return None if bad else fam


def _constraints(tbl: dict, errs: _Collector) -> Optional[ConstraintSet]:
    _check_keys(tbl, "constraints", errs)
    eps_d, eps_v = _need(tbl, "eps_d", "constraints", errs), _need(tbl, "eps_v", "constraints", errs)
    parts = {}
    for mat, vec, short in (("C", "g", "u_max"), ("L", "f", "du_max"), ("E", "p", "y_max")):
        if mat in tbl or vec in tbl:
            if mat not in tbl or vec not in tbl:
                errs.add(f"constraints: {mat} and {vec} must be given together")
                return None
            parts[mat] = np.atleast_2d(np.asarray(tbl[mat], float))
            parts[vec] = np.asarray(tbl[vec], float).ravel()
        elif short in tbl:
            bound = np.asarray(tbl[short], float).ravel()
            n = bound.size
            parts[mat] = np.vstack([np.eye(n), -np.eye(n)])
            lower = bound
            if short == "y_max" and "y_min" in tbl:
                lower = -np.asarray(tbl["y_min"], float).ravel()
            parts[vec] = np.concatenate([bound, lower])
        else:
            errs.add(f"constraints: need either {mat}/{vec} or {short}")
            return None
    if eps_d is None or eps_v is None:
        return None
    cons = ConstraintSet.__new__(ConstraintSet)
    vals = dict(parts, eps_d=np.asarray(eps_d, float).ravel(), eps_v=np.asarray(eps_v, float).ravel())
    for k, v in vals.items():
        object.__setattr__(cons, k, v)
    bad = cons.validation_errors()
    for msg in bad:
        errs.add(f"constraints: {msg}")
    return None if bad else cons


def _solver(tbl: dict, errs: _Collector) -> SolverSettings:
    _check_keys(tbl, "solver", errs)
    from .solver import LP_BACKENDS, QP_BACKENDS

    s = SolverSettings(**{k: tbl[k] for k in tbl if k in _ALLOWED["solver"]})
    if s.lp_backend not in LP_BACKENDS:
        errs.add(f"solver.lp_backend: unknown backend {s.lp_backend!r}")
    if s.qp_backend not in QP_BACKENDS:
        errs.add(f"solver.qp_backend: unknown backend {s.qp_backend!r}")
    return s


def _controller(tbl: dict, solver: SolverSettings, fam, cons, errs: _Collector) -> Optional[ControllerConfig]:
    _check_keys(tbl, "controller", errs)
    req = [_need(tbl, k, "controller", errs) for k in ("N", "Q", "S", "R")]
    if any(v is None for v in req):
        return None
    cfg = ControllerConfig(
        N=int(tbl["N"]), Q=tbl["Q"], S=tbl["S"], R=tbl["R"], alpha=float(tbl.get("alpha", 0.1)),
        r_explore=float(tbl.get("r_explore", 1.5)), explore=bool(tbl.get("explore", False)),
        r_max=tbl.get("r_max"), solver=solver,
    )
    bad = cfg.validation_errors(
        m=fam.m if fam else None, n_u=cons.n_u if cons else None, n_y=cons.n_y if cons else None)
    for msg in bad:
        errs.add(f"controller.{msg}")
    return None if bad else cfg


def _plant(tbl: dict, fam, cons, errs: _Collector):
    _check_keys(tbl, "plant", errs)
    if fam is None or cons is None:
        return None
    if ("H" in tbl) == ("channel" in tbl):
        errs.add("plant: give exactly one of H (in-class) or [[plant.channel]] (rational)")
        return None
    if "H" in tbl:
        H = np.atleast_2d(np.asarray(tbl["H"], float))
        if H.shape != (cons.n_y, cons.n_u * fam.m):
            errs.add(f"plant.H: expected shape {(cons.n_y, cons.n_u * fam.m)}, got {H.shape}")
            return None
        return CoefficientPlant(H, fam, cons.n_u)
    chans = []
    for idx, ch in enumerate(tbl["channel"]):
        _check_keys(ch, f"plant.channel[{idx}]", errs, allowed_key="channel")
        out, inp, gain = (_need(ch, k, f"plant.channel[{idx}]", errs) for k in ("output", "input", "gain"))
        if out is None or inp is None or gain is None:
            continue
        if not (1 <= out <= cons.n_y and 1 <= inp <= cons.n_u):
            errs.add(f"plant.channel[{idx}]: output/input index out of range")
            continue
        poles = tuple(float(p) for p in ch.get("poles", []))
        if any(abs(p) >= 1 for p in poles):
            errs.add(f"plant.channel[{idx}].poles: all poles must lie strictly inside the unit circle")
            continue
        chans.append(Channel(out - 1, inp - 1, float(gain), poles, tuple(float(z) for z in ch.get("zeros", [])),
                             int(ch.get("delay", 0))))
    return errs.attempt("plant.channel", TransferFunctionPlant, chans, cons.n_y, cons.n_u)


def _model_set(tbl: dict, base: Path, fam, cons, errs: _Collector):
    _check_keys(tbl, "model_set", errs)
    if fam is None or cons is None:
        return None, None
    p = cons.n_u * fam.m
    if "file" in tbl:
        path = (base / tbl["file"]).resolve()
        if not path.exists():
            errs.add(f"model_set.file: {path} does not exist")
            return None, None
        try:
            mset, n_u, m, eta = read_model_set(path)
        except (ModelSetFormatError, ValueError) as exc:
            errs.add(f"model_set.file: {exc}")
            return None, None
        if n_u != cons.n_u or m != fam.m or mset.n_y != cons.n_y:
            errs.add(f"model_set.file: dimensions (n_y={mset.n_y}, n_u={n_u}, m={m}) disagree with the scenario")
            return None, None
        return mset, eta
    lo, hi = tbl.get("h_lo"), tbl.get("h_hi")
    if lo is None or hi is None:
        errs.add("model_set: need h_lo and h_hi, or file")
        return None, None
    lo, hi = np.atleast_2d(np.asarray(lo, float)), np.atleast_2d(np.asarray(hi, float))
    if lo.shape != (cons.n_y, p) or hi.shape != (cons.n_y, p):
        errs.add(f"model_set: h_lo/h_hi must have shape {(cons.n_y, p)}")
        return None, None
    if np.any(lo > hi):
        errs.add("model_set: h_lo exceeds h_hi")
        return None, None
    return ModelSet.box(lo, hi), None


def _reference(tbl: dict, base: Path, T: int, N: int, n_y: int, errs: _Collector):
    _check_keys(tbl, "reference", errs)
    kind = tbl.get("kind", "constant")
    length = T + N + 1
    if kind == "constant":
        val = _need(tbl, "value", "reference", errs)
        if val is None:
            return None
        val = np.asarray(val, float).ravel()
        if val.size != n_y:
            errs.add(f"reference.value: need {n_y} entries")
            return None
        return np.tile(val, (length, 1))
    if kind == "steps":
        times, values = _need(tbl, "times", "reference", errs), _need(tbl, "values", "reference", errs)
        if times is None or values is None:
            return None
        values = np.atleast_2d(np.asarray(values, float))
        if len(times) != values.shape[0] or values.shape[1] != n_y:
            errs.add("reference: times and values must align, each value with n_y entries")
            return None
        if list(times) != sorted(times) or times[0] != 0:
            errs.add("reference.times: must be increasing and start at 0")
            return None
        idx = np.searchsorted(np.asarray(times), np.arange(length), side="right") - 1
        return values[idx]
    if kind == "file":
        fname = _need(tbl, "file", "reference", errs)
        if fname is None:
            return None
        path = (base / fname).resolve()
        if not path.exists():
            errs.add(f"reference.file: {path} does not exist")
            return None
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [f"y_des_{j + 1}" for j in range(n_y) if f"y_des_{j + 1}" not in header]
            if missing:
                errs.add(f"reference.file: missing column(s) {', '.join(missing)}")
                return None
            rows = [[float(r[f"y_des_{j + 1}"]) for j in range(n_y)] for r in reader]
        if not rows:
            errs.add("reference.file: no data rows")
            return None
        ref = np.array(rows)
        if ref.shape[0] < length:
            ref = np.vstack([ref, np.repeat(ref[-1:], length - ref.shape[0], axis=0)])
        return ref
    errs.add(f"reference.kind: unknown kind {kind!r}")
    return None


def _signal(tbl: dict, section: str, errs: _Collector) -> Optional[SignalSpec]:
    _check_keys(tbl, section, errs)
    return errs.attempt(section, SignalSpec, **{k: tbl[k] for k in tbl if k in _ALLOWED[section]})


def _warmup(tbl: dict, seed: int, cons, errs: _Collector):
    _check_keys(tbl, "warmup", errs)
    if not tbl or cons is None:
        return None
    kind = tbl.get("kind", "zero")
    if kind == "explicit":
        inputs = _need(tbl, "inputs", "warmup", errs)
        if inputs is None:
            return None
        arr = np.atleast_2d(np.asarray(inputs, float))
        if arr.shape[1] != cons.n_u:
            errs.add(f"warmup.inputs: rows need {cons.n_u} entries")
            return None
        return arr
    T1 = _need(tbl, "T1", "warmup", errs)
    if T1 is None:
        return None
    if int(T1) < 1:
        errs.add("warmup.T1: must be >= 1")
        return None
    if kind == "zero":
        return np.zeros((int(T1), cons.n_u))
    if kind == "uniform":
        # half the input box keeps the past sequence comfortably admissible
        rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
        from .uncertainty import max_input_magnitude

        ubar = np.array([max_input_magnitude(cons.C, cons.g, i) for i in range(cons.n_u)])
        past = rng.uniform(-0.5, 0.5, size=(int(T1), cons.n_u)) * ubar
        keep = np.all(past @ cons.C.T <= cons.g, axis=1)
        past[~keep] = 0.0
        return past
    errs.add(f"warmup.kind: unknown kind {kind!r}")
    return None


# ------------------------------------------------------------------ entry


def validate_scenario(path) -> Scenario:
    """Parse and fully validate a scenario file; raises :class:`ScenarioError`."""
    path = Path(path)
    errs = _Collector()
    try:
        raw = load_toml(path)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ScenarioError([f"{path}: {exc}"]) from exc
    return scenario_from_dict(raw, path.parent, errs)


def scenario_from_dict(raw: dict, base: Path = Path("."), errs: Optional[_Collector] = None) -> Scenario:
    errs = errs or _Collector()
    _check_keys(raw, "", errs)
    for sec in ("basis", "plant", "model_set", "constraints", "controller", "reference"):
        if sec not in raw:
            errs.add(f"{sec}: missing required section")
    T = raw.get("T")
    if T is None:
        errs.add("T: missing required field")
    elif int(T) < 1:
        errs.add("T: must be positive")
    seed = int(raw.get("seed", 0))
    fam = _basis(raw.get("basis", {}), errs) if "basis" in raw else None
    cons = _constraints(raw.get("constraints", {}), errs) if "constraints" in raw else None
    solver = _solver(raw.get("solver", {}), errs)
    cfg = _controller(raw.get("controller", {}), solver, fam, cons, errs) if "controller" in raw else None
    plant = _plant(raw.get("plant", {}), fam, cons, errs) if "plant" in raw else None
    mset, eta = _model_set(raw.get("model_set", {}), base, fam, cons, errs) if "model_set" in raw else (None, None)
    ref = None
    if "reference" in raw and cons is not None and T is not None:
        ref = _reference(raw["reference"], base, int(T), cfg.N if cfg else 1, cons.n_y, errs)
    dist = _signal(raw.get("disturbance", {}), "disturbance", errs)
    noise = _signal(raw.get("noise", {}), "noise", errs)
    past = _warmup(raw.get("warmup", {}), seed, cons, errs)
    if errs.errors:
        raise ScenarioError(errs.errors)
    if eta is not None:
        # unmodeled dynamics widen the disturbance bound the identifier assumes
        from dataclasses import replace

        cons = replace(cons, eps_d=cons.eps_d + eta.sum(axis=1))
    return Scenario(family=fam, constraints=cons, controller=cfg, initial_set=mset, plant=plant, reference=ref,
                    T=int(T), disturbance=dist, noise=noise, past_inputs=past, seed=seed, eta_bar=eta,
                    name=str(raw.get("name", "scenario")))


# ------------------------------------------------------------ bounds file


def load_bounds_problem(path):
    """Parse an uncertain-plant description for the ``bounds`` command.

    Grammar::

        [basis]  ... as in scenarios
        [inputs]
        C = [[1.0], [-1.0]]      # or u_max = [1.0]
        g = [1.0, 1.0]
        [grid]
        points_per_dim = 7
        inflation = 1.1
        tail_length = 200        # optional
        [[channel]]
        output = 1
        input = 1
        g = [0.8, 1.2]           # gain interval
        tau = [0, 1]             # delay interval
        zeros = [[lo, hi], ...]
        poles = [[0.5, 0.7]]

    Returns ``(family, C, g, grid, channels)`` with ``channels[(j, i)]`` an
    :class:`UncertainTF`.
    """
    path = Path(path)
    raw = load_toml(path)
    errs = _Collector()
    for key in raw:
        if key not in ("basis", "inputs", "grid", "channel"):
            errs.add(f"<top>.{key}: unknown key")
    fam = _basis(raw.get("basis", {}), errs) if "basis" in raw else errs.add("basis: missing required section")
    inputs = raw.get("inputs", {})
    if "C" in inputs:
        C = np.atleast_2d(np.asarray(inputs["C"], float))
        g = np.asarray(inputs.get("g", []), float).ravel()
    elif "u_max" in inputs:
        umax = np.asarray(inputs["u_max"], float).ravel()
        C = np.vstack([np.eye(umax.size), -np.eye(umax.size)])
        g = np.concatenate([umax, umax])
    else:
        errs.add("inputs: need C/g or u_max")
        C = g = None
    grid = errs.attempt("grid", GridSpec, **raw.get("grid", {}))
    channels = {}
    for idx, ch in enumerate(raw.get("channel", [])):
        sec = f"channel[{idx}]"
        try:
            gl, gh = ch["g"]
            tl, th = ch.get("tau", [0, 0])
            zs = np.asarray(ch.get("zeros", []), float).reshape(-1, 2)
            ps = np.asarray(ch.get("poles", []), float).reshape(-1, 2)
            tf = UncertainTF(float(gl), float(gh), int(tl), int(th), tuple(zs[:, 0]), tuple(zs[:, 1]),
                             tuple(ps[:, 0]), tuple(ps[:, 1]))
            channels[(int(ch["output"]) - 1, int(ch["input"]) - 1)] = tf
        except (KeyError, ValueError, TypeError) as exc:
            errs.add(f"{sec}: {exc}")
    if not channels:
        errs.add("channel: at least one [[channel]] required")
    if C is not None and channels:
        n_u = C.shape[1]
        n_y = max(j for j, _ in channels) + 1
        for j in range(n_y):
            for i in range(n_u):
                if (j, i) not in channels:
                    errs.add(f"channel: missing channel input {i + 1} -> output {j + 1}")
    if errs.errors:
        raise ScenarioError(errs.errors)
    return fam, C, g, grid, channels
