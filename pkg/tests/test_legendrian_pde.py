import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from legendrian_lab.ambient_geometry import fiber_vector, j_apply
from legendrian_lab.legendrian_pde import (
    ChartCoefficients, ConstantCoefficients, FlatCoefficients, beltrami_from_AB,
    chart_coefficients, dirichlet_energy, extract_j_coefficients, firstattempt_residual,
    graph_mass, holder_decay_fit, pde_chart, pde_coefficients_from_j, reassemble_j_ds, residual,
    solve_branch, sphere_pair_qgraph, tilted_sphere_qgraph,
)
from legendrian_lab.qgraph import qgraph_from_sampler
from legendrian_lab.scenarios import sqrt_sampler, zk_sampler

small = st.floats(-0.6, 0.6, allow_nan=False)


@pytest.fixture(scope="module")
def chart():
    return pde_chart()


def test_center_coefficients(chart):
    jc = extract_j_coefficients(chart, np.zeros(5))
    assert np.allclose(jc.as_array(), [0, 1, 0, 0, 0], atol=1e-12)
    A, B, C, F = pde_coefficients_from_j(jc)
    assert np.allclose([A, B, C, F], [1, 0, 0, 0], atol=1e-9)
    co = chart_coefficients(chart, np.zeros(5))
    assert abs(co.nu) < 1e-9 and abs(co.mu) < 1e-9 and np.allclose(co.h, 0, atol=1e-9)


def test_reassembled_j_matches_extended_j(chart, rng):
    x = rng.uniform(-0.05, 0.05, (50, 5))
    jc = extract_j_coefficients(chart, x)
    Jm = chart.jacobian(x)
    p = chart.psi(x)
    v = fiber_vector(p)
    ds, da = Jm[..., 0], Jm[..., 4]
    kap = np.sum(ds * v, -1) / np.sum(da * v, -1)
    direct = j_apply(p, ds - kap[:, None] * da) + kap[:, None] * da
    assert np.max(np.abs(reassemble_j_ds(chart, x, jc) - direct)) < 1e-12


def test_firstattempt_backsubstitution(chart, rng):
    x = rng.uniform(-0.05, 0.05, (200, 5))
    jc = extract_j_coefficients(chart, x)
    bt, ct = rng.normal(size=(2, 200))
    assert firstattempt_residual(jc, bt, ct) < 1e-12


@settings(max_examples=60, deadline=None)
@given(small, small, small, small, small, small)
def test_beltrami_solves_real_system(A0, B, C, F, bt, ct):
    # independent route: build phi_s, phi_t from the real system and test the
    # complex equation dbar phi + nu d phi = mu / 2
    A = 1 + A0 * 0.5
    nu, mu = beltrami_from_AB(A, B, C, F)
    bs = A * ct + B * bt + C
    cs = -A * bt + B * ct + F
    phs, pht = bs + 1j * cs, bt + 1j * ct
    dbar_, d_ = 0.5 * (phs + 1j * pht), 0.5 * (phs - 1j * pht)
    assert abs(dbar_ + nu * d_ - 0.5 * mu) < 1e-12


def test_beltrami_singular():
    with pytest.raises(ValueError):
        beltrami_from_AB(-1.0, 0.0)


def test_flat_coefficients_residual_of_holomorphic_graph():
    qg = qgraph_from_sampler(zk_sampler(2), 1.0, 64)
    rep = residual(qg, FlatCoefficients())
    assert rep.cr_sup < 1e-12 and rep.alpha_sup == 0


def test_sqrt_residual_with_masking():
    errs = []
    for n in (64, 128):
        qg = qgraph_from_sampler(sqrt_sampler, 1.0, n, branch_points=(0j,))
        rep = residual(qg, FlatCoefficients(), radius=0.9)
        assert rep.masked > 0
        ring = rep.valid & (np.abs(qg.z) > 0.2)
        errs.append(rep.cr[ring].max())
    # second order on an annulus away from the branch point
    assert errs[1] < 1e-3 and 3 < errs[0] / errs[1] < 5


def test_tilted_sphere_residual_is_second_order():
    sups = []
    for n in (64, 128):
        qg, ch = tilted_sphere_qgraph(0.3, 0.05, n)
        sups.append(residual(qg, ChartCoefficients(ch)).cr_sup)
        if n == 64:
            flat = residual(qg, FlatCoefficients()).cr_sup
    assert sups[1] < 1e-8
    assert 3 < sups[0] / sups[1] < 5
    # the nonflat coefficients matter at this scale
    assert flat > 1e-4


def test_solve_branch_flat_polynomial():
    sol = solve_branch(lambda th: (np.exp(2j * th) + 0.3 * np.exp(1j * th), 0 * th),
                       FlatCoefficients(), n=64)
    z = sol.qgraph.z
    m = np.abs(z) <= 1
    assert np.max(np.abs(sol.qgraph.phi[..., 0] - z**2 - 0.3 * z)[m]) < 1e-10


@pytest.mark.parametrize("nu", [0.1, 0.15 - 0.1j])
def test_solve_branch_constant_nu(nu):
    sol = solve_branch(lambda th: (np.exp(1j * th) - nu * np.exp(-1j * th), 0 * th),
                       ConstantCoefficients(nu=nu), n=128)
    z = sol.qgraph.z
    m = np.abs(z) <= 1
    assert sol.converged
    assert np.max(np.abs(sol.qgraph.phi[..., 0] - (z - nu * np.conj(z)))[m]) < 1e-3


def test_solve_branch_rejects_large_nu():
    with pytest.raises(ValueError):
        solve_branch(lambda th: (np.exp(1j * th), 0 * th), ConstantCoefficients(nu=0.6), n=32)


def test_solve_branch_alpha_poisson():
    # grad alpha = h constant, boundary alpha = h . x: alpha is that linear function
    h = (0.2, -0.1)
    errs = []
    for n in (32, 128):
        sol = solve_branch(lambda th: (0 * th + 0j, h[0] * np.cos(th) + h[1] * np.sin(th)),
                           ConstantCoefficients(h=h), n=n)
        z = sol.qgraph.z
        m = np.abs(z) <= 0.95
        errs.append(np.max(np.abs(sol.qgraph.alpha[..., 0] - h[0] * z.real - h[1] * z.imag)[m]))
    # first order: the staircase Dirichlet boundary dominates
    assert errs[1] < 2e-3 and errs[0] / errs[1] > 3


def test_energy_of_z_and_sqrt():
    e = dirichlet_energy(qgraph_from_sampler(lambda z: (z[..., None], 0 * z.real[..., None]), 1.0, 128))
    assert e.total == pytest.approx(2 * np.pi, rel=1e-2)
    qg = qgraph_from_sampler(sqrt_sampler, 1.0, 128, branch_points=(0j,))
    e = dirichlet_energy(qg)
    # two branches, |d sqrt z / dz|^2 = 1/(4|z|): 2 * 2 * int 1/(4r) = 2 pi
    assert e.total == pytest.approx(2 * np.pi, rel=2e-2)
    assert e.filled > 0


def test_calibration_equals_mass_for_holomorphic():
    qg = qgraph_from_sampler(zk_sampler(1), 1.0, 96)
    e = dirichlet_energy(qg)
    # for holomorphic branches area = int (1 + jac) with jac = |phi'|^2
    assert np.allclose(e.calibration, graph_mass(qg), rtol=2e-3)


def test_holder_fit_exponents():
    radii = np.geomspace(0.03, 1, 6)
    fz = qgraph_from_sampler(zk_sampler(1), 1.0, 128)
    fit = holder_decay_fit(fz, radii)
    assert fit.delta == pytest.approx(2, abs=0.05) and fit.r2 > 0.99
    fs = qgraph_from_sampler(sqrt_sampler, 1.0, 128, branch_points=(0j,))
    fit = holder_decay_fit(fs, radii)
    assert fit.delta == pytest.approx(1, abs=0.05) and fit.r2 > 0.99


def test_holder_fit_needs_range():
    qg = qgraph_from_sampler(zk_sampler(1), 1.0, 32)
    with pytest.raises(ValueError):
        holder_decay_fit(qg, [0.5, 0.6, 0.7, 0.8, 0.9])


def test_holder_fit_degenerate():
    qg = qgraph_from_sampler(lambda z: (0 * z[..., None], 0 * z.real[..., None]), 1.0, 32)
    fit = holder_decay_fit(qg, np.geomspace(0.03, 1, 5))
    assert fit.notice and np.isnan(fit.delta)


def test_sphere_pair_graph_solves_chart_pde():
    qg, ch = sphere_pair_qgraph(R=0.1, n=48)
    rep = residual(qg, ChartCoefficients(ch), mask_radius_cells=2)
    assert rep.cr_sup < 1e-4
    # the two sheets separate linearly from the common point
    z = qg.z
    gap = np.abs(qg.phi[..., 0] - qg.phi[..., 1])
    ring = (np.abs(z) > 0.03) & (np.abs(z) < 0.09)
    q = gap[ring] / np.abs(z[ring])
    assert q.min() > 1 and q.max() < 2
