"""Model-set files and CSV run logs.

Model-set file (version 1), plain text, one record per line::

    MODELSET 1
    n_y 1
    n_u 1
    m 2
    eta_bar 0.0013            # optional, n_y*n_u values, row-major (output, input)
    output 1 rows 4 protected 4
    1 0 | 1.5
    ...

Rows are ``a_1 ... a_p | b`` in ``%.17g``. Protected (prior) rows come first
in each output block. ``#`` starts a comment.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .setid import ModelSet

FORMAT_VERSION = 1


class ModelSetFormatError(ValueError):
    pass


def _fmt(x: float) -> str:
    return "%.17g" % x


def write_model_set(path, mset: ModelSet, n_u: int, m: int, eta_bar: Optional[np.ndarray] = None) -> None:
    if mset.dim != n_u * m:
        raise ValueError(f"model dimension {mset.dim} != n_u*m = {n_u * m}")
    lines = [f"MODELSET {FORMAT_VERSION}", f"n_y {mset.n_y}", f"n_u {n_u}", f"m {m}"]
    if eta_bar is not None:
        eta = np.asarray(eta_bar, float).reshape(mset.n_y, n_u)
        lines.append("eta_bar " + " ".join(_fmt(v) for v in eta.ravel()))
    for j in range(mset.n_y):
        order = np.concatenate([np.flatnonzero(mset.protected[j]), np.flatnonzero(~mset.protected[j])])
        lines.append(f"output {j + 1} rows {len(order)} protected {int(mset.protected[j].sum())}")
        for i in order:
            lines.append(" ".join(_fmt(v) for v in mset.A[j][i]) + " | " + _fmt(mset.b[j][i]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_model_set(path) -> tuple[ModelSet, int, int, Optional[np.ndarray]]:
    """Returns ``(model_set, n_u, m, eta_bar or None)``."""
    raw = Path(path).read_text().splitlines()
    lines = [(no + 1, ln.split("#", 1)[0].strip()) for no, ln in enumerate(raw)]
    lines = [(no, ln) for no, ln in lines if ln]
    it = iter(lines)

    def nxt(expect):
        try:
            return next(it)
        except StopIteration:
            raise ModelSetFormatError(f"{path}: unexpected end of file, expected {expect}") from None

    no, ln = nxt("header")
    if ln.split() != ["MODELSET", str(FORMAT_VERSION)]:
        raise ModelSetFormatError(f"{path}:{no}: expected 'MODELSET {FORMAT_VERSION}', got {ln!r}")
    header = {}
    for key in ("n_y", "n_u", "m"):
        no, ln = nxt(key)
        parts = ln.split()
        if len(parts) != 2 or parts[0] != key:
            raise ModelSetFormatError(f"{path}:{no}: expected '{key} <int>'")
        header[key] = int(parts[1])
    n_y, n_u, m = header["n_y"], header["n_u"], header["m"]
    p = n_u * m
    eta = None
    A, b, prot = [], [], []
    pending = nxt("output block")
    if pending[1].startswith("eta_bar"):
        vals = pending[1].split()[1:]
        if len(vals) != n_y * n_u:
            raise ModelSetFormatError(f"{path}:{pending[0]}: eta_bar needs {n_y * n_u} values")
        eta = np.array([float(v) for v in vals]).reshape(n_y, n_u)
        pending = nxt("output block")
    for j in range(n_y):
        no, ln = pending
        parts = ln.split()
        if len(parts) != 6 or parts[0] != "output" or parts[2] != "rows" or parts[4] != "protected" or int(parts[1]) != j + 1:
            raise ModelSetFormatError(f"{path}:{no}: expected 'output {j + 1} rows <r> protected <k>'")
        r, k = int(parts[3]), int(parts[5])
        Aj, bj = np.zeros((r, p)), np.zeros(r)
        for i in range(r):
            no, ln = nxt(f"row {i + 1} of output {j + 1}")
            if "|" not in ln:
                raise ModelSetFormatError(f"{path}:{no}: row must read 'a_1 ... a_{p} | b'")
            lhs, rhs = ln.split("|")
            coeffs = lhs.split()
            if len(coeffs) != p:
                raise ModelSetFormatError(f"{path}:{no}: expected {p} coefficients, got {len(coeffs)}")
            Aj[i] = [float(v) for v in coeffs]
            bj[i] = float(rhs)
        A.append(Aj)
        b.append(bj)
        prot.append(np.arange(r) < k)
        if j + 1 < n_y:
            pending = nxt("output block")
    return ModelSet.from_arrays(A, b, prot), n_u, m, eta


# ----------------------------------------------------------------- CSV


def write_csv(path, columns: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = [[float(v) for v in row] for row in reader if row]
    arr = np.array(data, dtype=float).reshape(-1, len(header))
    return {name: arr[:, i] for i, name in enumerate(header)}
