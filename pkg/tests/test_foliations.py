import numpy as np
import pytest

from legendrian_lab.ambient_geometry import (
    Plane2, SpherePoint, horizontal_projection, j_apply, omega_eval, to_real,
)
from legendrian_lab.foliations import (
    Direction, build_leaf, chart_build, chart_with_base_plane, leaf_through,
    leaf_through_bruteforce, legendrian_sphere_in_leaf, polar_family, positivity_samples,
    rotation_between, stabilizer_rotation,
)


def test_direction_normalisation_and_distance():
    X = Direction(2, 4)
    assert max(abs(X.Z), abs(X.W)) == pytest.approx(1)
    assert X.ratio == pytest.approx(0.5)
    assert X.fs_distance(Direction(1, 2)) == pytest.approx(0, abs=1e-12)
    assert Direction(0, 1).fs_distance(Direction(1, 0)) == pytest.approx(np.pi / 2)
    with pytest.raises(ValueError):
        Direction(0, 0)


def test_chart_rejects_inadmissible_direction():
    with pytest.raises(ValueError):
        chart_build(X=Direction(2, 1))
    with pytest.raises(TypeError):
        build_leaf(X=0.5)


def test_stabilizer_is_su3_and_fixes_e1(rng):
    for z in rng.normal(size=5) + 1j * rng.normal(size=5):
        R = stabilizer_rotation(Direction(z, 1))
        assert np.allclose(R.conj().T @ R, np.eye(3), atol=1e-12)
        assert abs(np.linalg.det(R) - 1) < 1e-12
        assert np.allclose(R[:, 0], [1, 0, 0])


def test_chart_center_and_inverse(rng):
    ch = chart_build(X=Direction(0.3 - 0.2j, 1))
    assert np.allclose(ch.psi(np.zeros(5)), np.eye(6)[0])
    x = rng.uniform(-0.08, 0.08, (200, 5))
    assert np.allclose(ch.inverse(ch.psi(x)), x, atol=1e-10)


def test_chart_jacobian_matches_finite_differences(rng):
    ch = chart_build(X=Direction(0.5, 1))
    x = rng.uniform(-0.05, 0.05, 5)
    J = ch.jacobian(x)
    h = 1e-6
    for k in range(5):
        e = np.zeros(5)
        e[k] = h
        fd = (ch.psi(x + e) - ch.psi(x - e)) / (2 * h)
        assert np.allclose(J[:, k], fd, atol=1e-8)


def test_default_chart_frame_at_center():
    e = np.eye(6)
    J = chart_build().jacobian(np.zeros(5))
    assert np.allclose(J[:, 0], e[3]) and np.allclose(J[:, 1], -e[5])
    assert np.allclose(J[:, 2], e[2]) and np.allclose(J[:, 3], e[4])
    assert np.allclose(J[:, 4], e[1])


def test_leaf_sheets_are_special_legendrian(rng):
    # each theta-slice of a leaf is horizontal, J-invariant and positively calibrated
    leaf = build_leaf(X=Direction(0.4j, 1), eps=0.1)
    k = rng.choice(len(leaf.b), 30, replace=False)
    T = leaf.tangent(leaf.b[k], leaf.c[k], 0 * leaf.theta[k])
    p = leaf.evaluate(leaf.b[k], leaf.c[k], 0 * leaf.theta[k])
    vb, vc = T[:, 0], T[:, 1]
    assert np.max(np.abs(horizontal_projection(p, vb) - vb)) < 1e-12
    # J maps the sheet tangent plane to itself
    for k in range(len(p)):
        B = np.stack([vb[k], vc[k]], 1)
        jb = j_apply(p[k], vb[k])
        coef, *_ = np.linalg.lstsq(B, jb, rcond=None)
        assert np.linalg.norm(B @ coef - jb) < 1e-10 * np.linalg.norm(jb)
    assert np.all(omega_eval(p, vb, vc) > 0)


def test_leaf_evaluate_matches_tangent(rng):
    leaf = build_leaf(X=Direction(0.2, 1))
    b, c, th, h = 0.03, -0.02, 0.01, 1e-6
    T = leaf.tangent(b, c, th)
    fd = (leaf.evaluate(b + h, c, th) - leaf.evaluate(b - h, c, th)) / (2 * h)
    assert np.allclose(T[0], fd, atol=1e-8)
    fd = (leaf.evaluate(b, c, th + h) - leaf.evaluate(b, c, th - h)) / (2 * h)
    assert np.allclose(T[2], fd, atol=1e-8)


def test_leaves_of_a_chart_are_disjoint(rng):
    # distinct leaf labels never share a point: inverse recovers the label
    ch = chart_build(X=Direction(0.7, 1))
    x = rng.uniform(-0.05, 0.05, (500, 5))
    lab = ch.transverse_coords(ch.psi(x))
    assert np.allclose(lab, x[:, :2], atol=1e-10)


def test_chart_with_base_plane_puts_plane_at_st():
    e = np.eye(6)
    ch = chart_with_base_plane(SpherePoint(np.array([1, 0, 0])), Plane2(e[2], e[4]))
    J = ch.jacobian(np.zeros(5))
    assert np.allclose(J[:, 0], e[2]) and np.allclose(J[:, 1], e[4])
    assert np.allclose(j_apply(e[0], J[:, 2]), J[:, 3], atol=1e-12)


def test_leaf_through_agrees_with_bruteforce():
    ch = chart_build()
    p = ch.psi(np.array([0.02, -0.01, 0.03, 0.01, 0.02]))
    Y = Direction(0.3 + 0.1j, 1)
    res = leaf_through(p, Y, ch)
    w_bf, X_bf = leaf_through_bruteforce(p, Y, ch)
    assert res.residual_point < 1e-10 and res.residual_angle < 1e-8
    assert abs(res.w - w_bf) < 1e-6
    assert res.X.fs_distance(X_bf) < 1e-5


def test_rotation_between_maps_directions():
    X, Y = Direction(0.2, 1), Direction(-0.1j, 1)
    R = rotation_between(X, Y)
    assert np.allclose(R @ stabilizer_rotation(X), stabilizer_rotation(Y))


def test_polar_family_members_pass_through_fiber():
    fam = polar_family(U_radius=0.05, n_members=3)
    e1 = np.eye(6)[0]
    for leaf in fam.members:
        assert np.allclose(leaf.evaluate(0.0, 0.0, 0.0), e1)
    with pytest.raises(ValueError):
        polar_family(U_radius=0.5)


def test_legendrian_sphere_in_leaf_is_calibrated_surface():
    q = SpherePoint(np.array([1, 0, 0]))
    pts = legendrian_sphere_in_leaf(q, Direction(0.3, 1), n=50)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1)
    # the sphere lies in a real 3-plane of C^3 which is special Lagrangian
    u, s, _ = np.linalg.svd(pts.T)
    assert s[3] < 1e-10
    B = u[:, :3]
    from legendrian_lab.ambient_geometry import Omega_eval
    assert abs(abs(Omega_eval(B[:, 0], B[:, 1], B[:, 2])) - 1) < 1e-10


def test_positivity_small_sample():
    signs, dets = positivity_samples(50, seed=1)
    assert np.all(signs == 1)
    assert np.all(dets > 0)
