import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from legendrian_lab.qgraph import (
    QGraph, average, branch_derivatives, cell_disk_weights, collision_gap, match_to,
    qgraph_from_sampler, trace_loops,
)
from legendrian_lab.scenarios import sqrt_sampler, theta_sampler, tilted_sampler, zk_sampler


def test_shape_validation():
    with pytest.raises(ValueError):
        QGraph(1.0, np.linspace(-1, 1, 4), np.zeros((4, 4)), np.zeros((4, 4)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 5), st.integers(2, 4))
def test_average_is_labelling_independent(seed, Q):
    rng = np.random.default_rng(seed)
    phi = rng.normal(size=(6, 6, Q)) + 1j * rng.normal(size=(6, 6, Q))
    alpha = rng.normal(size=(6, 6, Q))
    perm = rng.permutation(Q)
    s = np.linspace(-1, 1, 6)
    a = average(QGraph(1.0, s, phi, alpha))
    b = average(QGraph(1.0, s, phi[..., perm], alpha[..., perm]))
    assert np.allclose(a[0], b[0]) and np.allclose(a[1], b[1])


def test_match_to_recovers_permutation(rng):
    ref = rng.normal(size=(10, 3, 3))
    perm = np.array([2, 0, 1])
    out = match_to(ref, ref[:, perm] + 1e-6)
    assert np.allclose(out, ref, atol=1e-5)


def test_collision_gap():
    v = np.zeros((2, 3))
    v[1, 0] = 0.5
    assert collision_gap(v) == pytest.approx(0.5)
    assert collision_gap(v[:1]) == np.inf


def test_derivatives_of_tilted_plane():
    qg = qgraph_from_sampler(tilted_sampler(0.3 + 0.2j), 1.0, 32)
    bd = branch_derivatives(qg)
    inner = slice(2, -2)
    assert np.allclose(bd.ds[inner, inner, 0, 0], 0.3)
    assert np.allclose(bd.dt[inner, inner, 0, 1], 0.3)
    assert np.allclose(bd.dt[inner, inner, 0, 0], -0.2)


def test_derivatives_of_sqrt_match_closed_form():
    qg = qgraph_from_sampler(sqrt_sampler, 1.0, 128, branch_points=(0j,))
    bd = branch_derivatives(qg)
    z = qg.z
    ok = bd.valid & (np.abs(z) > 0.2) & (np.abs(z) < 0.9)
    # |d phi / ds| = |1 / (2 sqrt z)| on both branches
    mag = np.hypot(bd.ds[..., 0, 0], bd.ds[..., 0, 1])
    assert np.max(np.abs(mag[ok] - 0.5 / np.sqrt(np.abs(z[ok])))) < 5e-3
    assert not bd.valid[np.abs(z) < qg.h].any()


def test_trace_loops_monodromy():
    loops = trace_loops(sqrt_sampler, 0.0, 0.5, 360)
    assert len(loops) == 1 and loops[0].laps == 2
    loops = trace_loops(zk_sampler(2), 0.0, 0.5, 360)
    assert len(loops) == 2 and all(lp.laps == 1 for lp in loops)
    loops = trace_loops(theta_sampler(1, 0.3, 2.5), 0.0, 0.5, 720)
    assert len(loops) == 1 and loops[0].laps == 2


def test_trace_on_sampled_graph_matches_sampler():
    qg = qgraph_from_sampler(sqrt_sampler, 1.0, 64, branch_points=(0j,))
    qg.sampler = None  # force interpolation
    loops = trace_loops(qg, 0.0, 0.6, 360)
    assert len(loops) == 1 and loops[0].laps == 2


def test_cell_disk_weights_total_area():
    s = np.linspace(-1.2, 1.2, 121)
    w = cell_disk_weights(s, 0.1 + 0.05j, 0.8)
    h = s[1] - s[0]
    assert (w.sum() * h * h) == pytest.approx(np.pi * 0.64, rel=1e-6)
    assert w.min() >= 0 and w.max() <= 1 + 1e-12
