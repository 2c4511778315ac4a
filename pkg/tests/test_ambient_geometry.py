from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from legendrian_lab.ambient_geometry import (
    Plane2, Plane3, SpherePoint, comass_estimate, fiber_vector, frame_at, horizontal_projection,
    intersection_sign, is_special_legendrian_plane, j_apply, L_coords, L_point, omega_eval,
    param_rotation, plane_orientation_sign, random_sphere_points, random_tangent_frames,
    special_lagrangian_eval, special_legendrian_eval, special_unitary_frame, su3_act_real,
    su3_random, su3_transport, to_complex, to_real,
)


def _perm_sign(p):
    p = list(p)
    s = 1
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            s = -s
    return s


def _omega_by_wedge(p, u, w):
    # dz1 ^ dz2 ^ dz3 (p, u, w) expanded over permutations of the arguments
    vecs = [to_complex(p), to_complex(u), to_complex(w)]
    tot = 0j
    for perm in permutations(range(3)):
        tot += _perm_sign(perm) * vecs[perm[0]][0] * vecs[perm[1]][1] * vecs[perm[2]][2]
    return tot.real


finite = st.floats(-10, 10, allow_nan=False)


@given(arrays(float, 6, elements=finite))
def test_real_complex_roundtrip(v):
    assert np.allclose(to_real(to_complex(v)), v)


def test_omega_matches_permutation_expansion(rng):
    p = random_sphere_points(rng, 50)
    fr = random_tangent_frames(rng, p)
    for k in range(50):
        a = omega_eval(p[k], fr[k, 0], fr[k, 1])
        b = _omega_by_wedge(p[k], fr[k, 0], fr[k, 1])
        assert abs(a - b) < 1e-12


def test_spherepoint_rejects_off_sphere():
    with pytest.raises(ValueError):
        SpherePoint(np.array([1, 1, 0]))
    assert np.isclose(np.linalg.norm(SpherePoint.normalized([1, 1j, 0]).z), 1)


def test_j_squares_to_minus_one_on_horizontal(rng):
    p = random_sphere_points(rng, 200)
    v = horizontal_projection(p, rng.normal(size=(200, 6)))
    jv = j_apply(p, v)
    # J keeps H, is an isometry and squares to -1
    assert np.max(np.abs(np.sum(jv * fiber_vector(p), 1))) < 1e-12
    assert np.max(np.abs(np.sum(jv * p, 1))) < 1e-12
    assert np.allclose(np.linalg.norm(jv, axis=1), np.linalg.norm(v, axis=1))
    assert np.allclose(j_apply(p, jv), -v, atol=1e-12)


def test_j_compatible_with_omega(rng):
    p = random_sphere_points(rng, 100)
    u = horizontal_projection(p, rng.normal(size=(100, 6)))
    w = horizontal_projection(p, rng.normal(size=(100, 6)))
    assert np.allclose(np.sum(u * w, 1), omega_eval(p, u, j_apply(p, w)), atol=1e-12)


def test_frame_at_j_matrix_is_complex_structure(rng):
    for p in random_sphere_points(rng, 5):
        F = frame_at(p)
        assert np.allclose(F.h_basis @ F.h_basis.T, np.eye(4), atol=1e-12)
        assert np.allclose(F.j_matrix @ F.j_matrix, -np.eye(4), atol=1e-10)
        # the transported standard structure agrees with j_apply
        jb = np.array([j_apply(p, h) for h in F.h_basis])
        assert np.allclose(F.h_basis @ jb.T, F.j_matrix, atol=1e-10)


def test_special_unitary_frame(rng):
    for _ in range(10):
        z = rng.normal(size=3) + 1j * rng.normal(size=3)
        z /= np.linalg.norm(z)
        g = special_unitary_frame(z)
        assert np.allclose(g[:, 0], z)
        assert np.allclose(g.conj().T @ g, np.eye(3), atol=1e-12)
        assert abs(np.linalg.det(g) - 1) < 1e-12


def test_su3_random_and_transport(rng):
    g = su3_random(rng)
    assert np.allclose(g.conj().T @ g, np.eye(3), atol=1e-12)
    assert abs(np.linalg.det(g) - 1) < 1e-10
    p = SpherePoint(np.array([1, 0, 0]))
    q = SpherePoint.normalized([0.3, 1j, -0.5])
    T = su3_transport(p, q)
    assert np.allclose(T @ p.z, q.z)


def test_omega_su3_invariant(rng):
    p = random_sphere_points(rng, 20)
    fr = random_tangent_frames(rng, p)
    g = su3_random(rng)
    a = omega_eval(p, fr[:, 0], fr[:, 1])
    b = omega_eval(su3_act_real(g, p), su3_act_real(g, fr[:, 0]), su3_act_real(g, fr[:, 1]))
    assert np.allclose(a, b, atol=1e-12)


def test_l0_tangent_is_calibrated():
    e = np.eye(6)
    pl = Plane2(e[2], e[4])  # d/dx2, d/dx3 at (1,0,0)
    assert special_legendrian_eval(e[0], pl) == pytest.approx(1.0)
    assert is_special_legendrian_plane(e[0], pl)
    assert plane_orientation_sign(e[0], pl) == 1
    assert plane_orientation_sign(e[0], Plane2(e[4], e[2])) == -1


def test_l_tangent_is_calibrated():
    e = np.eye(6)
    pl = Plane2(e[3], -e[5])
    assert special_legendrian_eval(e[0], pl) == pytest.approx(1.0)


def test_special_legendrian_eval_rejects_nontangent():
    e = np.eye(6)
    with pytest.raises(ValueError):
        special_legendrian_eval(e[0], Plane2(e[0], e[2]))


def test_special_lagrangian_real_plane():
    assert special_lagrangian_eval(np.eye(6)[[0, 2, 4]]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        special_lagrangian_eval(np.ones((3, 6)))


def test_comass_of_zero_form_is_zero():
    val, _ = comass_estimate("zero", 100)
    assert val == 0.0


def test_comass_monotone_in_samples():
    a, _ = comass_estimate("omega", 500, refine_steps=5, seed=3)
    b, _ = comass_estimate("omega", 4000, refine_steps=5, seed=3)
    assert b >= a
    assert b <= 1 + 1e-9


def test_comass_unknown_form():
    with pytest.raises(ValueError):
        comass_estimate("theta")


def test_param_rotation_and_L_coords():
    ss, tt = np.meshgrid(np.linspace(-0.5, 0.5, 7), np.linspace(-0.5, 0.5, 7))
    for s, t in zip(ss.ravel(), tt.ravel()):
        A = param_rotation(s, t)
        assert np.allclose(A.conj().T @ A, np.eye(3), atol=1e-12)
        assert abs(np.linalg.det(A) - 1) < 1e-12
        assert np.allclose(L_coords(L_point(s, t)), (s, t), atol=1e-12)


def test_param_rotation_derivatives():
    s, t, h = 0.2, -0.1, 1e-6
    _, As, At = param_rotation(s, t, derivs=True)
    fd_s = (param_rotation(s + h, t) - param_rotation(s - h, t)) / (2 * h)
    fd_t = (param_rotation(s, t + h) - param_rotation(s, t - h)) / (2 * h)
    assert np.allclose(As, fd_s, atol=1e-8)
    assert np.allclose(At, fd_t, atol=1e-8)


def test_intersection_sign_of_transversal_pair():
    e = np.eye(6)
    p = e[0]
    # L0 tangent against the leaf spanned by the L tangent and the fiber
    S = Plane2(e[2], e[4])
    T = Plane3.from_vectors(e[3], -e[5], e[1])
    assert intersection_sign(p, S, T) in (1, -1)
    assert intersection_sign(p, S, Plane3.from_vectors(e[2], e[3], e[1])) == 0


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 2 * np.pi), st.floats(-1, 1), st.floats(-1, 1))
def test_every_horizontal_j_line_is_calibrated(phase, a, b):
    p = to_real(np.array([np.cos(phase), 0.6j * np.sin(phase), 0.8 * np.sin(phase)]))
    v = horizontal_projection(p, np.array([0.1, a, b, 1.0, -0.3, a * b]))
    if np.linalg.norm(v) < 1e-6:
        return
    v = v / np.linalg.norm(v)
    assert omega_eval(p, v, j_apply(p, v)) == pytest.approx(1.0, abs=1e-12)
