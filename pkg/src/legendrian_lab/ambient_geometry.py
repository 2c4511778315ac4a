"""Special Legendrian calibration on the unit sphere S^5 in C^3.

Real vectors are stored as (x1, y1, x2, y2, x3, y3); the complex vector with
components x_k + i y_k is obtained by :func:`to_complex`.  The holomorphic volume
form is Omega = dz1 ^ dz2 ^ dz3 and the calibration on S^5 is its contraction
with the outward normal, omega_p(u, w) = Re det[p, u, w].
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Storage order is (x1,y1,x2,y2,x3,y3); the orientation of R^6 used for
# intersection signs is dx1 dx2 dx3 dy1 dy2 dy3.
_ORIENT_ROWS = np.array([0, 2, 4, 1, 3, 5])

DET_ZERO_TOL = 1e-9


def to_complex(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v[..., 0::2] + 1j * v[..., 1::2]


def to_real(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Complex bilinear cross product (no conjugation)."""
    return np.stack(
        [
            a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
            a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
            a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
        ],
        axis=-1,
    )


def det3c(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    return np.sum(a * cross3(b, c), axis=-1)


@dataclass(frozen=True)
class SpherePoint:
    z: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=complex).reshape(3)
        n = np.linalg.norm(z)
        if abs(n - 1.0) > 1e-12:
            raise ValueError(f"point not on S^5: |z| = {n}")
        object.__setattr__(self, "z", z)

    @classmethod
    def normalized(cls, z) -> "SpherePoint":
        z = np.asarray(z, dtype=complex).reshape(3)
        return cls(z / np.linalg.norm(z))

    @property
    def real(self) -> np.ndarray:
        return to_real(self.z)


def tangent_projection(p: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Project real 6-vectors v onto T_p S^5 (p real, unit)."""
    return v - np.sum(v * p, axis=-1, keepdims=True) * p


def fiber_vector(p: np.ndarray) -> np.ndarray:
    """Unit Hopf fiber direction i*p at the real point p."""
    return to_real(1j * to_complex(p))


def horizontal_projection(p: np.ndarray, v: np.ndarray) -> np.ndarray:
    ip = fiber_vector(p)
    v = tangent_projection(p, v)
    return v - np.sum(v * ip, axis=-1, keepdims=True) * ip


def omega_eval(p: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """omega_p(u, w) = Re det[p, u, w] for real 6-vectors (broadcasting)."""
    return det3c(to_complex(p), to_complex(u), to_complex(w)).real


def omega_complex(p: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    return det3c(to_complex(p), to_complex(u), to_complex(w))


def Omega_eval(u: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    return det3c(to_complex(u), to_complex(v), to_complex(w)).real


def j_apply(p: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Complex structure of the horizontal bundle: J_p w = conj(p x w).

    It is the unique J with <u, w> = omega_p(u, J w) on H_p, squares to -1 on
    H_p and is SU(3)-equivariant.  Non-horizontal components of w are
    projected out first.
    """
    w = horizontal_projection(p, w)
    return to_real(np.conj(cross3(to_complex(p), to_complex(w))))


def special_unitary_frame(p: np.ndarray, prefer=None) -> np.ndarray:
    """Complete the unit complex vector p to a matrix in SU(3) with first column p.

    Gram-Schmidt on (p, e2, e3, e1) with the phase of the last column fixed so
    that the determinant is one.  ``prefer`` may supply a second column.
    """
    p = np.asarray(p, dtype=complex).reshape(3)
    cols = [p]
    cands = [] if prefer is None else [np.asarray(prefer, dtype=complex)]
    cands += [np.eye(3, dtype=complex)[k] for k in (1, 2, 0)]
    for c in cands:
        v = c.copy()
        for u in cols:
            v = v - np.vdot(u, v) * u
        n = np.linalg.norm(v)
        if n > 1e-6:
            cols.append(v / n)
        if len(cols) == 2:
            break
    cols.append(np.conj(cross3(cols[0], cols[1])))
    g = np.stack(cols, axis=1)
    return g


@dataclass
class HorizontalFrame:
    """Orthonormal frame of T_p S^5 = H_p + R(ip) with J on H_p."""

    p: np.ndarray
    h_basis: np.ndarray  # (4, 6)
    vertical: np.ndarray  # (6,)
    j_matrix: np.ndarray  # (4, 4), column k = coordinates of J h_k
    transport: np.ndarray = field(default=None, repr=False)

    def j(self, v: np.ndarray) -> np.ndarray:
        return j_apply(self.p, v)


def frame_at(p) -> HorizontalFrame:
    """Horizontal frame at p with J given in that frame.

    The basis is Gram-Schmidt of the coordinate vectors (dx2, dy2, dx3, dy3,
    dx1, dy1) projected onto H_p, so at p = (e^{i theta}, 0, 0) it is the
    coordinate frame.  J is computed by transporting the standard structure
    at (1,0,0) with an element of SU(3) taking (1,0,0) to p.
    """
    if isinstance(p, SpherePoint):
        pr = p.real
    else:
        pr = np.asarray(p, dtype=float)
        if pr.shape == (3,) or np.iscomplexobj(p):
            pr = SpherePoint(np.asarray(p, dtype=complex)).real
        elif abs(np.linalg.norm(pr) - 1.0) > 1e-12:
            raise ValueError("point not on S^5")
    pc = to_complex(pr)
    vert = fiber_vector(pr)
    basis = []
    for k in (2, 3, 4, 5, 0, 1):
        v = horizontal_projection(pr, np.eye(6)[k])
        for b in basis:
            v = v - np.dot(b, v) * b
        n = np.linalg.norm(v)
        if n > 1e-6:
            basis.append(v / n)
        if len(basis) == 4:
            break
    hb = np.array(basis)
    g = special_unitary_frame(pc)
    # J at (1,0,0): dx2 -> dx3, dy2 -> -dy3, dx3 -> -dx2, dy3 -> dy2.
    gc = g
    ginv = gc.conj().T
    jb = []
    for v in hb:
        w = ginv @ to_complex(v)
        jw0 = np.array([0.0, np.conj(w[2]) * -1.0, np.conj(w[1])])
        # J0 (w2, w3) = (-conj w3, conj w2) in the complex coordinates of H_{e1}
        jb.append(to_real(gc @ jw0))
    jb = np.array(jb)
    jm = hb @ jb.T  # jm[i, k] = <h_i, J h_k>
    return HorizontalFrame(p=pr, h_basis=hb, vertical=vert, j_matrix=jm, transport=g)


@dataclass(frozen=True)
class Plane2:
    """Oriented 2-plane given by an orthonormal pair."""

    e1: np.ndarray
    e2: np.ndarray

    @classmethod
    def from_vectors(cls, u, v) -> "Plane2":
        u = np.asarray(u, float)
        v = np.asarray(v, float)
        a = u / np.linalg.norm(u)
        b = v - np.dot(a, v) * a
        nb = np.linalg.norm(b)
        if nb < 1e-14:
            raise ValueError("degenerate plane")
        return cls(a, b / nb)

    def projector(self) -> np.ndarray:
        return np.outer(self.e1, self.e1) + np.outer(self.e2, self.e2)


@dataclass(frozen=True)
class Plane3:
    e1: np.ndarray
    e2: np.ndarray
    e3: np.ndarray

    @classmethod
    def from_vectors(cls, u, v, w) -> "Plane3":
        q, r = np.linalg.qr(np.stack([u, v, w], axis=1))
        s = np.sign(np.diag(r))
        if np.any(np.abs(np.diag(r)) < 1e-14):
            raise ValueError("degenerate 3-plane")
        q = q * s
        return cls(q[:, 0], q[:, 1], q[:, 2])


def is_special_legendrian_plane(p, plane: Plane2, tol: float = 1e-10) -> bool:
    """Horizontal and J-invariant with J e1 = e2 (the calibrated orientation).

    Tested directly on the geometry, not through the value of omega, so that
    the equivalence with omega(e1, e2) = 1 can be checked independently.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    pr = p.real if isinstance(p, SpherePoint) else np.asarray(p, float)
    _, hor, jd = legendrian_checks(pr, plane.e1, plane.e2)
    return bool(hor <= tol and jd <= tol)


def plane_orientation_sign(p, plane: Plane2) -> int:
    """+1 if J e1 is along e2, -1 if along -e2, 0 if the plane is not J-stable."""
    pr = p.real if isinstance(p, SpherePoint) else np.asarray(p, float)
    je1 = j_apply(pr, plane.e1)
    c = float(np.dot(je1, plane.e2))
    if abs(abs(c) - 1.0) > 1e-8:
        return 0
    return 1 if c > 0 else -1


def legendrian_checks(p: np.ndarray, e1: np.ndarray, e2: np.ndarray):
    """Vectorised tests: (omega value, horizontality defect, |J e1 - e2|)."""
    val = omega_eval(p, e1, e2)
    ip = fiber_vector(p)
    hor = np.maximum(np.abs(np.sum(e1 * ip, -1)), np.abs(np.sum(e2 * ip, -1)))
    jd = np.linalg.norm(j_apply(p, e1) - e2, axis=-1)
    return val, hor, jd


def orientation_det(vectors: np.ndarray) -> np.ndarray:
    """det of 6 column vectors in the orientation dx1 dx2 dx3 dy1 dy2 dy3.

    ``vectors`` has shape (..., 6, 6) with the last axis indexing columns.
    """
    m = np.asarray(vectors)[..., _ORIENT_ROWS, :]
    return np.linalg.det(m)


def intersection_sign(p, plane: Plane2, leaf_tangent: Plane3) -> int:
    """Sign of e1 ^ e2 ^ f1 ^ f2 ^ f3 against the orientation of T_p S^5.

    T_p S^5 is oriented by contraction with the outward normal: a frame F is
    positive when det[F, p] > 0.  Returns 0 for non-transversal pairs.
    """
    pr = p.real if isinstance(p, SpherePoint) else np.asarray(p, float)
    cols = np.stack(
        [plane.e1, plane.e2, leaf_tangent.e1, leaf_tangent.e2, leaf_tangent.e3, pr],
        axis=1,
    )
    d = orientation_det(cols)
    if abs(d) < DET_ZERO_TOL:
        return 0
    return int(np.sign(d))


def random_sphere_points(rng: np.random.Generator, n: int) -> np.ndarray:
    z = rng.normal(size=(n, 6))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def random_tangent_frames(rng: np.random.Generator, p: np.ndarray) -> np.ndarray:
    """Random orthonormal 2-frames in T_p S^5, shape (n, 2, 6)."""
    n = p.shape[0]
    a = tangent_projection(p[:, None, :], rng.normal(size=(n, 2, 6)))
    q, r = np.linalg.qr(np.transpose(a, (0, 2, 1)))
    q = q * np.sign(np.diagonal(r, axis1=1, axis2=2))[:, None, :]
    return np.transpose(q, (0, 2, 1))


def _omega_grad(p: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Vector g with omega_p(u, w) = <u, g> for all u."""
    return _Omega_grad(w, p)


def _Omega_grad(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Vector g with Re det[u, v, w] = <u, g> for all u."""
    return to_real(np.conj(cross3(to_complex(v), to_complex(w))))


def _orthonormalize(frames: np.ndarray) -> np.ndarray:
    """Row-wise QR of (n, k, d) frames keeping orientation of the first rows."""
    q, r = np.linalg.qr(np.transpose(frames, (0, 2, 1)))
    q = q * np.sign(np.diagonal(r, axis1=1, axis2=2))[:, None, :]
    return np.transpose(q, (0, 2, 1))


def comass_estimate(
    form: str = "omega",
    n_samples: int = 10000,
    refine_steps: int = 60,
    seed: int = 0,
):
    """Estimate the comass of ``form`` in {"omega", "Omega", "zero"}.

    Random unit simple multivectors (2-vectors tangent to S^5 for omega,
    3-vectors of R^6 for Omega) are refined by projected gradient ascent with
    a QR retraction.  Returns (value, argmax) where argmax is (p, frame) for
    omega and (None, frame) for Omega.  The estimate is a running maximum over
    seeded batches, hence non-decreasing in n_samples.
    """
    if form not in ("omega", "Omega", "zero"):
        raise ValueError(f"unknown form {form!r}")
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    rng = np.random.default_rng(seed)
    best = -np.inf
    arg = None
    chunk = 2048
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        if form == "omega":
            p = random_sphere_points(rng, m)
            fr = random_tangent_frames(rng, p)
        else:
            p = None
            fr = _orthonormalize(rng.normal(size=(m, 3, 6)))
        step = 0.5
        for _ in range(refine_steps if form != "zero" else 0):
            if form == "omega":
                g = np.stack([_omega_grad(p, fr[:, 1]), -_omega_grad(p, fr[:, 0])], 1)
                new = tangent_projection(p[:, None, :], fr + step * g)
            else:
                g = np.stack(
                    [
                        _Omega_grad(fr[:, 1], fr[:, 2]),
                        _Omega_grad(fr[:, 2], fr[:, 0]),
                        _Omega_grad(fr[:, 0], fr[:, 1]),
                    ],
                    1,
                )
                new = fr + step * g
            fr = _orthonormalize(new)
        if form == "omega":
            vals = omega_eval(p, fr[:, 0], fr[:, 1])
        elif form == "Omega":
            vals = Omega_eval(fr[:, 0], fr[:, 1], fr[:, 2])
        else:
            vals = np.zeros(m)
        vals = np.abs(vals)
        k = int(np.argmax(vals))
        if vals[k] > best:
            best = float(vals[k])
            arg = (None if p is None else p[k].copy(), fr[k].copy())
        done += m
    return best, arg


def _check_unit_simple(vectors: np.ndarray, tol: float = 1e-9) -> None:
    g = vectors @ vectors.T
    if np.max(np.abs(g - np.eye(len(vectors)))) > tol:
        raise ValueError("input is not an orthonormal frame (unit simple multivector)")


def special_lagrangian_eval(frame) -> float:
    """Omega on the unit simple 3-vector e1 ^ e2 ^ e3 (rows of ``frame``)."""
    fr = np.asarray(frame, float)
    if isinstance(frame, Plane3):
        fr = np.stack([frame.e1, frame.e2, frame.e3])
    _check_unit_simple(fr)
    return float(Omega_eval(fr[0], fr[1], fr[2]))


def special_legendrian_eval(p, plane: Plane2) -> float:
    """omega_p on the unit 2-vector of ``plane``; the plane must be tangent."""
    pr = p.real if isinstance(p, SpherePoint) else np.asarray(p, float)
    fr = np.stack([plane.e1, plane.e2])
    _check_unit_simple(fr)
    if np.max(np.abs(fr @ pr)) > 1e-10:
        raise ValueError("plane is not tangent to S^5 at p")
    return float(omega_eval(pr, plane.e1, plane.e2))


def su3_random(rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    return q / np.linalg.det(q) ** (1 / 3)


def su3_transport(p, q) -> np.ndarray:
    """Some element of SU(3) taking p to q (unit complex 3-vectors)."""
    p = np.asarray(p.z if isinstance(p, SpherePoint) else p, dtype=complex)
    q = np.asarray(q.z if isinstance(q, SpherePoint) else q, dtype=complex)
    return special_unitary_frame(q) @ special_unitary_frame(p).conj().T


# Skew generators on R^3 = span(e1, i e2, i e3): d/ds moves e1 towards i e2,
# d/dt towards -i e3.
_GS = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
_GT = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
_MD = np.array([1.0, 1j, 1j])


def _rodrigues_coeffs(x):
    """f1 = sin r / r, f2 = (1 - cos r)/r^2 and their x-derivatives, x = r^2."""
    x = np.asarray(x, float)
    r = np.sqrt(x)
    small = x < 1e-6
    rs = np.where(small, 1.0, r)
    f1 = np.where(small, 1 - x / 6 + x * x / 120, np.sin(rs) / rs)
    f2 = np.where(small, 0.5 - x / 24 + x * x / 720, (1 - np.cos(rs)) / rs**2)
    d1 = np.where(small, -1 / 6 + x / 60, (rs * np.cos(rs) - np.sin(rs)) / (2 * rs**3))
    d2 = np.where(
        small, -1 / 24 + x / 360, (rs * np.sin(rs) - 2 * (1 - np.cos(rs))) / (2 * rs**4)
    )
    return f1, f2, d1, d2


def param_rotation(s, t, derivs: bool = False):
    """A(s,t) in SU(3): geodesic rotation of the parameter sphere L.

    L = {(x1, i y2, i y3)} and A(s,t) = exp(s G_s + t G_t) acting on
    span(e1, i e2, i e3), so A(s,t) e1 = (cos r, i s sinc r, -i t sinc r)
    with r^2 = s^2 + t^2 and the rotation axis lies in the (y2, y3) plane.
    Returns complex (..., 3, 3) matrices, plus d/ds and d/dt when asked.
    """
    s = np.asarray(s, float)
    t = np.asarray(t, float)
    x = s * s + t * t
    f1, f2, d1, d2 = _rodrigues_coeffs(x)
    K = s[..., None, None] * _GS + t[..., None, None] * _GT
    K2 = K @ K
    eye = np.eye(3)
    O = eye + f1[..., None, None] * K + f2[..., None, None] * K2
    scale = _MD[:, None] / _MD[None, :]
    A = O * scale
    if not derivs:
        return A
    outs = []
    for G, c in ((_GS, s), (_GT, t)):
        dO = (
            (2 * c * d1)[..., None, None] * K
            + f1[..., None, None] * G
            + (2 * c * d2)[..., None, None] * K2
            + f2[..., None, None] * (G @ K + K @ G)
        )
        outs.append(dO * scale)
    return A, outs[0], outs[1]


def L_point(s, t) -> np.ndarray:
    """Point of the parameter sphere L at normal coordinates (s, t)."""
    return param_rotation(s, t)[..., :, 0]


def L_coords(q) -> tuple[float, float]:
    """Inverse of :func:`L_point` for q on L (principal branch, r < pi)."""
    q = np.asarray(q.z if isinstance(q, SpherePoint) else q, dtype=complex)
    if np.max(np.abs([q[0].imag, q[1].real, q[2].real])) > 1e-10:
        raise ValueError("point is not on the parameter sphere L")
    y2, y3 = q[1].imag, q[2].imag
    rho = np.hypot(y2, y3)
    r = np.arctan2(rho, q[0].real)
    k = 1.0 if rho < 1e-300 else r / rho
    return float(y2 * k), float(-y3 * k)


def complex_to_real_matrix(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=complex)
    n = g.shape[-1]
    out = np.zeros(g.shape[:-2] + (2 * n, 2 * n))
    out[..., 0::2, 0::2] = g.real
    out[..., 0::2, 1::2] = -g.imag
    out[..., 1::2, 0::2] = g.imag
    out[..., 1::2, 1::2] = g.real
    return out


def rotation_to(q) -> np.ndarray:
    """Real 6x6 matrix of the rotation A_q sending (1,0,0) to q on L.

    A_q is the SU(3) element rotating along the geodesic of L from (1,0,0);
    it acts diagonally on R^3 + R^3 and commutes with the Hopf action.
    """
    s, t = L_coords(q)
    return complex_to_real_matrix(param_rotation(s, t))


def su3_act_real(g: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Apply g in SU(3) to real 6-vectors (last axis)."""
    return to_real(to_complex(v) @ np.asarray(g).T)
