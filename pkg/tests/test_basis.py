import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.signal import lfilter

from adaptive_mpc.basis import (
    BasisFamily,
    BasisKind,
    advance_regressor,
    build_dynamics,
    impulse_response,
    impulse_responses,
    single_block,
    warmup_regressor,
)

from .oracles import convolve_response

# ------------------------------------------------------------------ oracles
# Impulse responses by long division of the transfer functions, written in
# powers of q^-1 and evaluated with lfilter (independent of the state-space
# realization used by the package).


def _tf_response(num, den, L):
    x = np.zeros(L + 1)
    x[0] = 1.0
    return lfilter(num, den, x)[1:]  # coefficient of q^-l for l = 1..L


def laguerre_oracle(a, m, L):
    first_num = np.array([0.0, math.sqrt(1 - a * a)])
    den = np.array([1.0, -a])
    allpass_num = np.array([-a, 1.0])
    out = []
    num, dd = first_num, den
    for _ in range(m):
        out.append(_tf_response(num, dd, L))
        num, dd = np.convolve(num, allpass_num), np.convolve(dd, den)
    return np.array(out)


def kautz_oracle(a: complex, m, L):
    b = 2 * a.real / (1 + abs(a) ** 2)
    c = -abs(a) ** 2
    D = np.array([1.0, b * (c - 1), -c])
    allpass = np.array([-c, b * (c - 1), 1.0])
    odd = math.sqrt(1 - c * c) * np.array([0.0, 1.0, -b])
    even = math.sqrt((1 - c * c) * (1 - b * b)) * np.array([0.0, 0.0, 1.0])
    out = []
    ap_num, ap_den = np.ones(1), np.ones(1)
    for _ in range(m // 2):
        for base in (odd, even):
            out.append(_tf_response(np.convolve(base, ap_num), np.convolve(D, ap_den), L))
        ap_num, ap_den = np.convolve(ap_num, allpass), np.convolve(ap_den, D)
    return np.array(out)


def combined_oracle(fam: BasisFamily, L):
    n = fam.n
    taps = np.zeros((n, L))
    for k in range(n):
        taps[k, k] = 1.0
    if fam.base is BasisKind.LAGUERRE:
        rest = laguerre_oracle(fam.a, fam.m - n, L + n)
    else:
        rest = kautz_oracle(fam.pole, fam.m - n, L + n)
    shifted = np.zeros((fam.m - n, L))
    shifted[:, n:] = rest[:, :L - n]
    return np.vstack([taps, shifted])


FAMILIES = [
    BasisFamily("impulse", 0.8, 4),
    BasisFamily("laguerre", 0.6, 4),
    BasisFamily("kautz", 0.5, 4, a_imag=0.5),
    BasisFamily("combined", 0.5, 5, n=2, base="laguerre"),
    BasisFamily("combined", 0.4, 5, a_imag=0.3, n=1, base="kautz"),
]


# ------------------------------------------------------------- validation


@pytest.mark.parametrize("kind", ["laguerre", "kautz"])
def test_unit_pole_rejected(kind):
    with pytest.raises(ValueError, match="a: .*\\|a\\| < 1"):
        BasisFamily(kind, 1.0, 2)


def test_impulse_allows_unit_a():
    assert BasisFamily("impulse", 1.0, 3).a == 1.0
    with pytest.raises(ValueError):
        BasisFamily("impulse", 1.5, 3)


def test_kautz_needs_even_m():
    with pytest.raises(ValueError, match="even"):
        BasisFamily("kautz", 0.5, 3, a_imag=0.2)


def test_combined_needs_n_below_m():
    with pytest.raises(ValueError, match="n < m"):
        BasisFamily("combined", 0.5, 3, n=3)


def test_truncation_length():
    assert BasisFamily("laguerre", 0.5, 2).truncation_length() == math.ceil(math.log(1e-12) / math.log(0.5))


# ------------------------------------------------------- impulse responses


def test_laguerre_zero_pole_is_unit_delay():
    fam = BasisFamily("laguerre", 0.0, 1)
    assert impulse_response(fam, 1, 1) == 1.0
    assert all(impulse_response(fam, 1, l) == 0.0 for l in range(2, 6))


def test_laguerre_first_function_value():
    fam = BasisFamily("laguerre", 0.6, 3)
    assert impulse_response(fam, 1, 3) == pytest.approx(math.sqrt(1 - 0.36) * 0.36, abs=1e-15)
    assert impulse_response(fam, 1, 3) == pytest.approx(0.288, abs=1e-15)


def test_impulse_family_response_follows_realization():
    # the closed-form realization places a on every subdiagonal entry, so the
    # k-th tap carries a^k
    fam = BasisFamily("impulse", 0.5, 3)
    assert impulse_response(fam, 2, 2) == pytest.approx(0.25)
    assert impulse_response(fam, 2, 1) == 0.0
    assert impulse_response(fam, 1, 1) == 0.5


def test_impulse_response_index_errors():
    fam = BasisFamily("laguerre", 0.5, 2)
    with pytest.raises(ValueError):
        impulse_response(fam, 3, 1)
    with pytest.raises(ValueError):
        impulse_response(fam, 1, 0)


@pytest.mark.parametrize("a", [0.3, 0.6, 0.9, -0.5])
def test_laguerre_matches_long_division(a):
    fam = BasisFamily("laguerre", a, 5)
    np.testing.assert_allclose(impulse_responses(fam, 80), laguerre_oracle(a, 5, 80), atol=1e-13)


@pytest.mark.parametrize("pole", [0.5 + 0.5j, 0.3 - 0.6j, 0.7 + 0.0j])
def test_kautz_matches_long_division(pole):
    fam = BasisFamily("kautz", pole.real, 6, a_imag=pole.imag)
    np.testing.assert_allclose(impulse_responses(fam, 80), kautz_oracle(pole, 6, 80), atol=1e-13)


@pytest.mark.parametrize("fam", [f for f in FAMILIES if f.kind is BasisKind.COMBINED], ids=str)
def test_combined_matches_long_division(fam):
    np.testing.assert_allclose(impulse_responses(fam, 60), combined_oracle(fam, 60), atol=1e-13)


@pytest.mark.parametrize(
    "fam",
    [BasisFamily("laguerre", a, 6) for a in (0.3, 0.6, 0.9)]
    + [BasisFamily("kautz", 0.5, 6, a_imag=0.5), BasisFamily("combined", 0.6, 5, n=2)],
    ids=str,
)
def test_orthonormality(fam):
    L = fam.truncation_length(1e-12)
    if fam.kind is BasisKind.COMBINED:
        L += fam.n
    psi = impulse_responses(fam, L)
    np.testing.assert_allclose(psi @ psi.T, np.eye(fam.m), atol=1e-6)


# --------------------------------------------------------------- dynamics


def test_impulse_block_closed_form():
    a = 0.37
    dyn = build_dynamics(BasisFamily("impulse", a, 2), 1)
    assert np.array_equal(dyn.W, np.array([[0.0, 0.0], [a, 0.0]]))
    assert np.array_equal(dyn.Z.ravel(), np.array([a, 0.0]))


def test_laguerre_block_instance():
    dyn = build_dynamics(BasisFamily("laguerre", 0.6, 2), 1)
    np.testing.assert_allclose(dyn.W, [[0.6, 0.0], [0.64, 0.6]], atol=1e-15)
    np.testing.assert_allclose(dyn.Z.ravel(), 0.8 * np.array([1.0, -0.6]), atol=1e-15)


def _closed_form_laguerre(a: Fraction, m: int):
    w = [[Fraction(0)] * m for _ in range(m)]
    for i in range(m):
        w[i][i] = a
        for j in range(i):
            w[i][j] = (-a) ** (i - j - 1) * (1 - a * a)
    z = [(-a) ** k for k in range(m)]  # times sqrt(1 - a^2)
    return w, z


@pytest.mark.parametrize("a", [Fraction(1, 2), Fraction(1, 4), Fraction(-3, 8)])
def test_laguerre_block_exact_on_dyadic_a(a):
    """For dyadic a every closed-form entry is a float, so equality is exact."""
    m = 5
    w, z = single_block(BasisFamily("laguerre", float(a), m))
    pw, pz = _closed_form_laguerre(a, m)
    s = math.sqrt(1 - float(a) ** 2)
    for i in range(m):
        for j in range(m):
            assert Fraction(w[i, j]) == pw[i][j]
        assert z[i] == s * float(pz[i])


def test_laguerre_block_pythagorean_a():
    a = Fraction(3, 5)  # sqrt(1 - a^2) = 4/5 is rational
    m = 4
    w, z = single_block(BasisFamily("laguerre", float(a), m))
    pw, pz = _closed_form_laguerre(a, m)
    np.testing.assert_array_max_ulp(w, np.array([[float(v) for v in r] for r in pw]), maxulp=4)
    np.testing.assert_array_max_ulp(z, np.array([float(Fraction(4, 5) * v) for v in pz]), maxulp=4)


@pytest.mark.parametrize("fam", FAMILIES, ids=str)
def test_block_diagonal_structure(fam):
    w, z = single_block(fam)
    dyn = build_dynamics(fam, 3)
    assert np.array_equal(dyn.W, np.kron(np.eye(3), w))
    assert np.array_equal(dyn.Z, np.kron(np.eye(3), z[:, None]))
    assert max(abs(np.linalg.eigvals(dyn.W))) < 1.0 or fam.kind is BasisKind.IMPULSE


# -------------------------------------------------------------- regressors


def test_zero_regressor_stays_zero():
    dyn = build_dynamics(BasisFamily("laguerre", 0.5, 3), 2)
    assert not np.any(advance_regressor(np.zeros(6), np.zeros(2), dyn))


def test_impulse_regressor_ordering():
    a = 0.7
    dyn = build_dynamics(BasisFamily("impulse", a, 3), 1)
    phi = np.zeros(3)
    for u in (1.0, 0.0, 0.0):
        phi = advance_regressor(phi, [u], dyn)
    # the third tap carries Psi_3(a, 3) = a^3 under this realization
    np.testing.assert_allclose(phi, [0.0, 0.0, a ** 3], atol=1e-15)


def test_laguerre_one_step():
    dyn = build_dynamics(BasisFamily("laguerre", 0.6, 2), 1)
    np.testing.assert_allclose(advance_regressor(np.zeros(2), [1.0], dyn), [0.8, -0.48], atol=1e-15)


def test_advance_shape_errors():
    dyn = build_dynamics(BasisFamily("laguerre", 0.6, 2), 1)
    with pytest.raises(ValueError):
        advance_regressor(np.zeros(3), [1.0], dyn)
    with pytest.raises(ValueError):
        advance_regressor(np.zeros(2), [1.0, 2.0], dyn)


def test_warmup_zero_inputs():
    assert not np.any(warmup_regressor(BasisFamily("laguerre", 0.5, 3), 2, np.zeros((10, 2))))


def test_warmup_single_input_impulse():
    a = 0.5
    fam = BasisFamily("impulse", a, 3)
    phi = warmup_regressor(fam, 1, [[2.0]])
    np.testing.assert_allclose(phi, [a * 2.0, 0.0, 0.0])


def test_warmup_tail_bound_first_order():
    # m = 1: W = a, so one more earlier input moves phi(0) by exactly |a|^T1 |u| |z|
    a = 0.5
    fam = BasisFamily("laguerre", a, 1)
    T1 = math.ceil(math.log(1e-9) / math.log(a))
    rng = np.random.default_rng(0)
    u = rng.uniform(-1, 1, size=(T1, 1))
    _, z = single_block(fam)
    delta = abs(warmup_regressor(fam, 1, np.vstack([[[1.0]], u]))[0] - warmup_regressor(fam, 1, u)[0])
    assert delta <= a ** T1 * np.linalg.norm(z) + 1e-15  # absolute slack for cancellation


@pytest.mark.parametrize("fam", FAMILIES[1:], ids=str)
def test_warmup_tail_bound(fam):
    # higher-order blocks are not normal; the geometric factor picks up a
    # polynomial, so the exact change is W^T1 z u
    T1 = 40
    rng = np.random.default_rng(1)
    u = rng.uniform(-1, 1, size=(T1, 1))
    w, z = single_block(fam)
    delta = warmup_regressor(fam, 1, np.vstack([[[1.0]], u])) - warmup_regressor(fam, 1, u)
    np.testing.assert_allclose(delta, np.linalg.matrix_power(w, T1) @ z, atol=1e-14)
    rho = abs(fam.pole)
    assert np.linalg.norm(delta) <= T1 ** fam.m * rho ** (T1 - fam.m) * np.linalg.norm(z)


@pytest.mark.parametrize("fam", FAMILIES, ids=str)
@given(seed=st.integers(0, 2**32 - 1), n_u=st.integers(1, 3), T=st.integers(1, 50))
def test_recursion_equals_convolution(fam, seed, n_u, T):
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1, 1, size=(T, n_u))
    phi = warmup_regressor(fam, n_u, u)
    psi = impulse_responses(fam, T)
    expect = np.concatenate([[convolve_response(psi[k], u[:, i]) for k in range(fam.m)] for i in range(n_u)])
    np.testing.assert_allclose(phi, expect, atol=1e-9)
