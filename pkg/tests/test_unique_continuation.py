import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import dblquad, quad

from legendrian_lab.qgraph import QGraph
from legendrian_lab.unique_continuation import (
    GridFunction, beltrami_residual, carleman_ratio, cauchy_transform, comparability, dbar,
    dbar_identity_error, morrey_norms, partint_identity_check, smooth_cutoff, solve_w,
    vanishing_product, winding_of,
)


@pytest.fixture(scope="module")
def disk_transform():
    gf = GridFunction.from_function(lambda z: 1.0, 256, 1.5, support_radius=1.0)
    return gf, cauchy_transform(gf, support=(0, 1.0))


def _t_inside(z0):
    # polar coordinates about z0: (1/pi) int 1/(z0 - xi) dA = -(1/pi) int e^{-i th} rho(th) dth
    def rho(th):
        b = np.real(np.conj(z0) * np.exp(1j * th))
        return -b + np.sqrt(b * b + 1 - abs(z0) ** 2)

    re = quad(lambda th: -np.cos(th) * rho(th), 0, 2 * np.pi, limit=200)[0]
    im = quad(lambda th: np.sin(th) * rho(th), 0, 2 * np.pi, limit=200)[0]
    return (re + 1j * im) / np.pi


def _t_outside(z0):
    f = lambda r, th, part: part(r / (z0 - r * np.exp(1j * th)))  # noqa: E731
    re = dblquad(lambda r, th: f(r, th, np.real), 0, 2 * np.pi, 0, 1)[0]
    im = dblquad(lambda r, th: f(r, th, np.imag), 0, 2 * np.pi, 0, 1)[0]
    return (re + 1j * im) / np.pi


@pytest.mark.parametrize("z0", [0.3 + 0.2j, -0.5 + 0.6j, 1.2 - 0.3j])
def test_cauchy_transform_of_disk_against_quadrature(disk_transform, z0):
    gf, T = disk_transform
    i = np.argmin(np.abs(gf.s - z0.real))
    j = np.argmin(np.abs(gf.s - z0.imag))
    zn = gf.s[i] + 1j * gf.s[j]
    ref = _t_inside(zn) if abs(zn) < 1 else _t_outside(zn)
    assert abs(T.values[i, j] - ref) < 1e-4


def test_cauchy_transform_closed_form(disk_transform):
    gf, T = disk_transform
    z = gf.z
    exact = np.where(np.abs(z) <= 1, np.conj(z), 1 / np.where(z == 0, 1, z))
    assert np.max(np.abs(T.values - exact)) < 1e-4


def test_dbar_identity_converges():
    f = lambda z: np.cos(np.abs(z) ** 2 * np.pi / 2) ** 2  # noqa: E731  vanishes to 2nd order at r = 1
    e1 = dbar_identity_error(f, 64)
    e2 = dbar_identity_error(f, 128)
    assert e2 < e1 and 1.5 < e1 / e2 < 8


def test_smooth_cutoff_profile():
    r = np.linspace(0, 3, 301)
    c = smooth_cutoff(r, 1.0)
    assert np.all(c[r <= 1] == 1) and np.all(c[r >= 2] == 0)
    assert np.all(np.diff(c) <= 0)


def test_solve_w_zero_nu_is_identity():
    res = solve_w(lambda z: 0 * z, 0.1, n=64)
    z = res.w.z
    m = np.abs(z) <= 0.1
    assert np.array_equal(res.w.values[m], z[m])
    assert res.u_sup == 0


@pytest.mark.parametrize("c", [0.05, 0.05 - 0.05j])
def test_solve_w_constant_nu(c):
    R = 0.1
    res = solve_w(lambda z: c + 0 * z, R, n=128)
    assert res.converged and res.contraction_ratio < 1
    z = res.w.z
    m = np.abs(z) <= R
    # w = z - c zbar solves dbar w + c dw = 0 and has the form (1 + u) z
    assert np.max(np.abs(res.w.values - (z - c * np.conj(z)))[m]) < 2e-4


def test_beltrami_residual_of_exact_solution():
    s = np.linspace(-0.25, 0.25, 64)
    z = s[:, None] + 1j * s[None, :]
    c = 0.1j
    w = GridFunction(s, z - c * np.conj(z))
    assert beltrami_residual(w, lambda z: c + 0 * z, 0.1) < 1e-12


def test_vanishing_product_comparability():
    s = np.linspace(-0.3, 0.3, 121)
    z = s[:, None] + 1j * s[None, :]
    w = GridFunction(s, z)
    pts = [0.05, -0.02 + 0.03j]
    g = vanishing_product(w, pts)
    K1, K2 = comparability(g, pts, 0.2)
    assert K1 == pytest.approx(1, abs=1e-12) and K2 == pytest.approx(1, abs=1e-12)
    assert winding_of(g, 0, 0.15) == 2
    assert winding_of(g, 0.2, 0.05) == 0


def test_morrey_norms_of_linear_function():
    s = np.linspace(-1, 1, 81)
    mn = morrey_norms(GridFunction(s, s[:, None] + 1j * s[None, :]), lam=0.5)
    assert mn.l_inf == pytest.approx(np.sqrt(2))
    h = s[1] - s[0]
    assert mn.l2_grad == pytest.approx(2 * (81 * h) ** 2)


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3))
def test_carleman_closed_form(k, N):
    # sigma = z^k g with g a product of N factors: sigma/g = z^k
    s = np.linspace(-1, 1, 401)
    z = s[:, None] + 1j * s[None, :]
    pts = [0.05 * np.exp(2j * np.pi * j / N + 0.3j) for j in range(N)]
    g = vanishing_product(GridFunction(s, z), pts)
    r = 0.4
    res = carleman_ratio(z**k * g.values, np.zeros(z.shape), g, r)
    m = 2 * k + 2
    exact = (r / 4) ** m / ((2 * r) ** m - r**m)
    assert res.K == pytest.approx(exact, rel=2e-2)


def test_carleman_rejects_unbounded_quotient():
    s = np.linspace(-1, 1, 101)
    z = s[:, None] + 1j * s[None, :]
    g = vanishing_product(GridFunction(s, z), [0.0])
    with pytest.raises(ValueError):
        carleman_ratio(np.ones(z.shape), np.zeros(z.shape), g, 0.4, cap=1e3)


def test_partint_smooth_gap_vanishes():
    s = np.linspace(-1, 1, 128)
    z = s[:, None] + 1j * s[None, :]
    f = smooth_cutoff(np.abs(z), 0.3) * (z**2 + np.conj(z))
    res = partint_identity_check(GridFunction(s, f))
    assert res.lhs > 0 and res.gap < 1e-3 * res.lhs


def test_partint_branched_gap_halves():
    gaps = []
    for n in (64, 128, 256):
        s = np.linspace(-1, 1, n)
        z = s[:, None] + 1j * s[None, :]
        r = smooth_cutoff(np.abs(z), 0.3) * np.sqrt(z)
        phi = np.stack([r, -r], -1)
        gaps.append(partint_identity_check(QGraph(1.0, s, phi, np.zeros(phi.shape),
                                                  branch_points=(0j,))).gap)
    ratios = np.array(gaps[:-1]) / np.array(gaps[1:])
    assert np.all((ratios > 1.8) & (ratios < 2.2))


def test_dbar_of_holomorphic():
    s = np.linspace(-1, 1, 64)
    z = s[:, None] + 1j * s[None, :]
    assert np.max(np.abs(dbar(z**2, s[1] - s[0])[1:-1, 1:-1])) < 1e-12
