"""Foliations of a neighbourhood of (1,0,0) in S^5 by 3-surfaces Sigma_q^X.

Sigma_0 = {(a e^{i theta}, b e^{-i theta}, c)} is the union of the special
Legendrian spheres diag(e^{i theta}, e^{-i theta}, 1) L_0, all attached along
the Hopf fiber of (1,0,0).  Rotating Sigma_0 by the stabiliser element R_X
(taking the J-line [0:1] of H_{(1,0,0)} to X) and then along the parameter
sphere L by A_q gives Sigma_q^X.  For fixed X the leaves over q in L are
disjoint and give chart coordinates (s, t, b, c, theta).

J-complex coordinates on H_{(1,0,0)}: u1 = s + i t along (dy2, -dy3) and
u2 = b + i c along (dx2, dx3).  A direction [Z:W] is the J-line spanned by
Z.e_s + W.e_b with J-complex scalars.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .ambient_geometry import (
    Plane2,
    Plane3,
    SpherePoint,
    fiber_vector,
    horizontal_projection,
    intersection_sign,
    j_apply,
    param_rotation,
    special_unitary_frame,
    to_complex,
    to_real,
)

DEFAULT_EPS = 0.1
DEFAULT_U_RADIUS = 1.0


class ConvergenceError(RuntimeError):
    """Raised when an iterative solver fails to converge."""


@dataclass(frozen=True)
class Direction:
    """Point [Z:W] of CP^1, stored with max(|Z|, |W|) = 1."""

    Z: complex
    W: complex

    def __post_init__(self):
        Z, W = complex(self.Z), complex(self.W)
        m = max(abs(Z), abs(W))
        if m == 0:
            raise ValueError("direction [0:0] is undefined")
        object.__setattr__(self, "Z", Z / m)
        object.__setattr__(self, "W", W / m)

    @classmethod
    def from_ratio(cls, zeta: complex) -> "Direction":
        return cls(zeta, 1.0)

    @property
    def ratio(self) -> complex:
        if self.W == 0:
            return complex(np.inf)
        return self.Z / self.W

    def unit(self) -> np.ndarray:
        """Representative (Z, W)/|(Z, W)| with W real and non-negative."""
        v = np.array([self.Z, self.W], dtype=complex)
        if abs(v[1]) > 0:
            v = v * np.conj(v[1]) / abs(v[1])
        return v / np.linalg.norm(v)

    def fs_distance(self, other: "Direction") -> float:
        a, b = self.unit(), other.unit()
        c = np.vdot(b, a)
        ph = c / abs(c) if abs(c) > 0 else 1.0
        d = np.linalg.norm(a - b * ph)
        return float(2 * np.arcsin(min(1.0, d / 2)))

    def in_admissible(self, radius: float = DEFAULT_U_RADIUS) -> bool:
        return self.W != 0 and abs(self.ratio) <= radius + 1e-12


VERTICAL_DIRECTION = Direction(0, 1)
HORIZONTAL_DIRECTION = Direction(1, 0)


def stabilizer_rotation(X) -> np.ndarray:
    """R_X in SU(3) fixing (1,0,0) whose differential maps [0:1] to X.

    Accepts a Direction or an array of ratios zeta = Z/W; returns (..., 3, 3).
    """
    zeta = np.asarray(X.ratio if isinstance(X, Direction) else X, dtype=complex)
    n = np.sqrt(1 + np.abs(zeta) ** 2)
    # J-combination Z.e_s + W.e_b in standard complex coordinates (z2, z3)
    al = (1 + 1j * zeta.real) / n
    be = (-1j * zeta.imag) / n
    R = np.zeros(zeta.shape + (3, 3), dtype=complex)
    R[..., 0, 0] = 1
    R[..., 1, 1] = al
    R[..., 2, 1] = be
    R[..., 1, 2] = -np.conj(be)
    R[..., 2, 2] = np.conj(al)
    return R


def _sigma(b, c):
    """Conformal parametrisation of the real unit sphere near e1."""
    q = (b * b + c * c) / 4
    d = 1 + q
    s = np.stack([(1 - q) / d, b / d, c / d], -1)
    d2 = d * d
    sb = np.stack([-b / d2, (d - b * b / 2) / d2, -b * c / (2 * d2)], -1)
    sc = np.stack([-c / d2, -b * c / (2 * d2), (d - c * c / 2) / d2], -1)
    return s, sb, sc


def _check_direction(X: Direction, u_radius: float):
    if not isinstance(X, Direction):
        raise TypeError("direction must be a Direction")
    if not X.in_admissible(u_radius):
        raise ValueError(f"direction {X} outside the admissible set |Z| <= {u_radius}|W|")


@dataclass
class FoliationChart:
    """Chart psi(s, t, b, c, theta) = G A(s,t) R_X D_theta sigma(b, c).

    G in SU(3) moves (1,0,0) to the centre; (s, t) label the leaf,
    (b, c, theta) the point on it.  Coordinate order (s,t,b,c,theta) is
    positively oriented.
    """

    center: SpherePoint
    direction: Direction
    frame: np.ndarray = field(default=None, repr=False)
    radius: float = DEFAULT_EPS

    def __post_init__(self):
        if self.frame is None:
            self.frame = special_unitary_frame(self.center.z)
        self._R = stabilizer_rotation(self.direction)

    # forward map ---------------------------------------------------------
    def _parts(self, x, zeta=None):
        x = np.asarray(x, float)
        s, t, b, c, th = (x[..., k] for k in range(5))
        A, As, At = param_rotation(s, t, derivs=True)
        R = self._R if zeta is None else stabilizer_rotation(zeta)
        sg, sb, sc = _sigma(b, c)
        e = np.exp(1j * th)
        dvec = np.stack([e, np.conj(e), np.ones_like(e)], -1)
        P = dvec * sg
        Pb = dvec * sb
        Pc = dvec * sc
        Pth = np.stack([1j * e, -1j * np.conj(e), np.zeros_like(e)], -1) * sg
        GA = self.frame @ A
        M = GA @ R
        return M, P, Pb, Pc, Pth, self.frame @ As @ R, self.frame @ At @ R

    def psi_complex(self, x, zeta=None) -> np.ndarray:
        M, P, *_ = self._parts(x, zeta)
        return np.einsum("...ij,...j->...i", M, P)

    def psi(self, x, zeta=None) -> np.ndarray:
        return to_real(self.psi_complex(x, zeta))

    def jacobian(self, x, zeta=None) -> np.ndarray:
        """Exact derivative, shape (..., 6, 5); columns d/ds, d/dt, d/db, d/dc, d/dtheta."""
        M, P, Pb, Pc, Pth, Ms, Mt = self._parts(x, zeta)
        mv = lambda m, v: np.einsum("...ij,...j->...i", m, v)  # noqa: E731
        cols = [mv(Ms, P), mv(Mt, P), mv(M, Pb), mv(M, Pc), mv(M, Pth)]
        return np.stack([to_real(c) for c in cols], -1)

    # inverse -------------------------------------------------------------
    def inverse(self, p, zeta=None, tol: float = 1e-13, max_iter: int = 50) -> np.ndarray:
        """Gauss-Newton inversion of psi; p real (..., 6)."""
        p = np.asarray(p, float)
        shape = p.shape[:-1]
        pf = p.reshape(-1, 6)
        zf = None
        if zeta is not None:
            zf = np.broadcast_to(np.asarray(zeta, complex), shape).reshape(-1)
        # initial guess from the linearisation at the centre
        loc = to_real(to_complex(pf) @ np.conj(self.frame))  # G^{-1} p
        x = np.zeros((pf.shape[0], 5))
        x[:, 0] = loc[:, 3]
        x[:, 1] = -loc[:, 5]
        x[:, 4] = loc[:, 1]
        if zf is None:
            zz = self.direction.ratio
            uv = stabilizer_rotation(zz).conj().T @ to_complex(loc).T
            x[:, 2] = uv[1].real
            x[:, 3] = uv[2].real
        else:
            Rinv = np.conj(np.transpose(stabilizer_rotation(zf), (0, 2, 1)))
            uv = np.einsum("nij,nj->ni", Rinv, to_complex(loc))
            x[:, 2] = uv[:, 1].real
            x[:, 3] = uv[:, 2].real
        for _ in range(max_iter):
            r = self.psi(x, zf) - pf
            Jm = self.jacobian(x, zf)
            JT = np.transpose(Jm, (0, 2, 1))
            dx = np.linalg.solve(JT @ Jm, np.einsum("nij,nj->ni", JT, r)[..., None])[..., 0]
            x = x - dx
            if np.max(np.abs(dx)) < tol:
                break
        err = np.max(np.linalg.norm(self.psi(x, zf) - pf, axis=1)) if len(pf) else 0.0
        if not np.isfinite(err) or err > 1e-9:
            raise ConvergenceError(f"chart inversion failed, residual {err:.3e}")
        return x.reshape(shape + (5,))

    def transverse_coords(self, p) -> np.ndarray:
        """Leaf label (s, t) of points p."""
        return self.inverse(p)[..., :2]

    def leaf_tangent(self, x) -> Plane3:
        Jm = self.jacobian(x)
        return Plane3.from_vectors(Jm[:, 2], Jm[:, 3], Jm[:, 4])


def chart_build(center=None, X: Direction = VERTICAL_DIRECTION, frame=None,
                radius: float = DEFAULT_EPS, u_radius: float = DEFAULT_U_RADIUS) -> FoliationChart:
    if center is None:
        center = SpherePoint(np.array([1, 0, 0], dtype=complex))
    _check_direction(X, u_radius)
    return FoliationChart(center=center, direction=X, frame=frame, radius=radius)


def chart_with_base_plane(center, plane: Plane2) -> FoliationChart:
    """Chart at ``center`` whose leaf-label plane span(d/ds, d/dt) is ``plane``.

    ``plane`` must be special Legendrian at the centre; the leaves are then
    J-orthogonal to it.
    """
    pc = center.z
    v = to_complex(plane.e1)
    f2 = -1j * v
    f3 = np.conj(np.cross(pc, f2))
    G = np.stack([pc, f2, f3], axis=1)
    return FoliationChart(center=center, direction=VERTICAL_DIRECTION, frame=G)


@dataclass
class Leaf:
    """Sampled Sigma_q^X with the (a e^{i theta}, b e^{-i theta}, c) parametrisation."""

    birth_point: SpherePoint
    direction: Direction
    st: tuple
    eps: float
    b: np.ndarray
    c: np.ndarray
    theta: np.ndarray
    points: np.ndarray  # (n, 6)
    chart: FoliationChart = field(default=None, repr=False)

    def _M(self):
        A = param_rotation(*self.st)
        G = self.chart.frame if self.chart is not None else np.eye(3)
        return G @ A @ stabilizer_rotation(self.direction)

    def tangent(self, b, c, theta) -> np.ndarray:
        """Exact tangent vectors (d/db, d/dc, d/dtheta), shape (..., 3, 6)."""
        b, c, theta = (np.asarray(v, float) for v in (b, c, theta))
        a = np.sqrt(1 - b * b - c * c)
        e = np.exp(1j * theta)
        z0 = np.zeros_like(e)
        vb = np.stack([-b / a * e, np.conj(e), z0], -1)
        vc = np.stack([-c / a * e, z0, np.ones_like(e)], -1)
        vt = np.stack([1j * a * e, -1j * b * np.conj(e), z0], -1)
        M = self._M()
        out = [to_real(np.einsum("ij,...j->...i", M, v)) for v in (vb, vc, vt)]
        return np.stack(out, -2)

    def evaluate(self, b, c, theta) -> np.ndarray:
        b, c, theta = (np.asarray(v, float) for v in (b, c, theta))
        a = np.sqrt(1 - b * b - c * c)
        e = np.exp(1j * theta)
        z = np.stack([a * e, b * np.conj(e), c + 0j], -1)
        return to_real(np.einsum("ij,...j->...i", self._M(), z))

    def to_rows(self) -> np.ndarray:
        return np.column_stack([self.b, self.c, self.theta, self.points])


def build_leaf(q=None, X: Direction = VERTICAL_DIRECTION, eps: float = DEFAULT_EPS,
               resolution=(16, 16, 8), eps0: float = 0.5, u_radius: float = DEFAULT_U_RADIUS,
               chart: FoliationChart | None = None) -> Leaf:
    """Sample Sigma_q^X over (b, c) in the eps-disk and theta in (-eps, eps)."""
    _check_direction(X, u_radius)
    if not 0 < eps < eps0:
        raise ValueError(f"eps must lie in (0, {eps0})")
    if q is None:
        q = SpherePoint(np.array([1, 0, 0], dtype=complex))
    from .ambient_geometry import L_coords

    st = L_coords(q)
    nb, nc, nt = resolution
    bb, cc, tt = np.meshgrid(np.linspace(-eps, eps, nb), np.linspace(-eps, eps, nc),
                             np.linspace(-eps, eps, nt), indexing="ij")
    keep = bb**2 + cc**2 <= eps**2
    b, c, th = bb[keep], cc[keep], tt[keep]
    leaf = Leaf(q, X, st, eps, b, c, th, np.zeros((len(b), 6)), chart)
    leaf.points = leaf.evaluate(b, c, th)
    return leaf


# horizontal identification of H_p with C^2 -------------------------------

def horizontal_identification(chart: FoliationChart, p: np.ndarray):
    """J-unitary basis (f1, f2) of H_p: f1 ~ d/ds, f2 ~ d/db of the chart centre."""
    G = chart.frame
    es = to_real(G @ np.array([0, 1j, 0]))
    eb = to_real(G @ np.array([0, 1, 0]))
    f1 = horizontal_projection(p, es)
    f1 /= np.linalg.norm(f1, axis=-1, keepdims=True)
    jf1 = j_apply(p, f1)
    v = horizontal_projection(p, eb)
    v = v - np.sum(v * f1, -1, keepdims=True) * f1 - np.sum(v * jf1, -1, keepdims=True) * jf1
    f2 = v / np.linalg.norm(v, axis=-1, keepdims=True)
    return f1, f2


def j_line_ratio(p, v, f1, f2) -> np.ndarray:
    """Affine coordinate Z/W of the J-line through the horizontal vector v."""
    jf1, jf2 = j_apply(p, f1), j_apply(p, f2)
    Z = np.sum(v * f1, -1) + 1j * np.sum(v * jf1, -1)
    W = np.sum(v * f2, -1) + 1j * np.sum(v * jf2, -1)
    return Z / W


def _leaf_direction_ratio(chart: FoliationChart, p: np.ndarray, zeta) -> np.ndarray:
    """For each zeta: ratio of T_p Sigma^X cap H_p through p (X = [zeta:1])."""
    zeta = np.asarray(zeta, complex)
    P = np.broadcast_to(p, zeta.shape + (6,))
    x = chart.inverse(P, zeta)
    Jm = chart.jacobian(x, zeta)
    vb = horizontal_projection(P, Jm[..., 2])
    f1, f2 = horizontal_identification(chart, P)
    return j_line_ratio(P, vb, f1, f2), x


@dataclass
class LeafThroughResult:
    w: complex
    X: Direction
    coords: np.ndarray
    residual_point: float
    residual_angle: float
    iterations: int


def leaf_through(p, Y: Direction, chart: FoliationChart | None = None,
                 tol: float = 1e-12, max_iter: int = 40) -> LeafThroughResult:
    """Find (w, X) with p in Sigma_w^X and T_p Sigma cap H_p = Y (damped Newton)."""
    if chart is None:
        chart = chart_build()
    pr = p.real if isinstance(p, SpherePoint) else np.asarray(p, float)
    target = Y.ratio

    def F(z):
        r, _ = _leaf_direction_ratio(chart, pr, np.array([z]))
        return r[0] - target

    z = complex(target)
    fz = F(z)
    it = 0
    h = 1e-7
    while abs(fz) > tol and it < max_iter:
        it += 1
        d1 = (F(z + h) - F(z - h)) / (2 * h)
        d2 = (F(z + 1j * h) - F(z - 1j * h)) / (2 * h)
        Jm = np.array([[d1.real, d2.real], [d1.imag, d2.imag]])
        step = np.linalg.solve(Jm, [-fz.real, -fz.imag])
        lam = 1.0
        while lam > 1e-4:
            zn = z + lam * complex(step[0], step[1])
            fn = F(zn)
            if abs(fn) < abs(fz):
                break
            lam /= 2
        else:
            raise ConvergenceError("leaf_through: damped Newton stalled")
        z, fz = zn, fn
    if abs(fz) > 1e-9:
        raise ConvergenceError(f"leaf_through did not converge, |F|={abs(fz):.2e}")
    _, x = _leaf_direction_ratio(chart, pr, np.array([z]))
    x = x[0]
    dist = float(np.linalg.norm(chart.psi(x, np.array(z)) - pr))
    ang = _angle_to_direction(chart, pr, x, z, Y)
    return LeafThroughResult(complex(x[0], x[1]), Direction(z, 1), x, dist, ang, it)


def _angle_to_direction(chart, pr, x, z, Y: Direction) -> float:
    """Fubini-Study angle between the leaf's horizontal J-line at p and Y."""
    r, _ = _leaf_direction_ratio(chart, pr, np.array([z]))
    return Direction(r[0], 1).fs_distance(Y)


def leaf_through_bruteforce(p, Y: Direction, chart: FoliationChart | None = None,
                            zeta_radius: float = 1.0, n_grid: int = 41):
    """Oracle: exhaustive grid over X, then derivative-free polishing."""
    if chart is None:
        chart = chart_build()
    pr = p.real if isinstance(p, SpherePoint) else np.asarray(p, float)
    g = np.linspace(-zeta_radius, zeta_radius, n_grid)
    zz = (g[:, None] + 1j * g[None, :]).ravel()
    zz = zz[np.abs(zz) <= zeta_radius]
    r, _ = _leaf_direction_ratio(chart, pr, zz)
    k = int(np.argmin(np.abs(r - Y.ratio)))

    def obj(v):
        rr, _ = _leaf_direction_ratio(chart, pr, np.array([complex(v[0], v[1])]))
        return abs(rr[0] - Y.ratio) ** 2

    res = optimize.minimize(obj, [zz[k].real, zz[k].imag], method="Nelder-Mead",
                            options={"xatol": 1e-11, "fatol": 1e-24, "maxiter": 4000})
    z = complex(res.x[0], res.x[1])
    _, x = _leaf_direction_ratio(chart, pr, np.array([z]))
    return complex(x[0, 0], x[0, 1]), Direction(z, 1)


# polar family --------------------------------------------------------------

@dataclass
class PolarFamily:
    q: SpherePoint
    Y: Direction
    u_radius: float
    members: list
    chart: FoliationChart = field(default=None, repr=False)

    def member_through(self, p) -> Direction:
        """The X near Y with p on Sigma_q^X (Newton in the ratio)."""
        pr = p.real if isinstance(p, SpherePoint) else np.asarray(p, float)
        from .ambient_geometry import L_coords

        w = np.array(L_coords(self.q))

        def G(v):
            x = self.chart.inverse(pr, np.array(complex(v[0], v[1])))
            return x[:2] - w

        sol = optimize.root(G, [self.Y.ratio.real, self.Y.ratio.imag], method="hybr",
                            options={"xtol": 1e-13})
        if not sol.success:
            raise ConvergenceError("no polar family member through the point")
        return Direction(complex(sol.x[0], sol.x[1]), 1)


def polar_family(q=None, Y: Direction = VERTICAL_DIRECTION, U_radius: float = 0.1,
                 n_members: int = 9, eps: float = DEFAULT_EPS) -> PolarFamily:
    """Leaves Sigma_q^X through the fiber of q for X within U_radius of Y."""
    if U_radius > 0.1 + 1e-12:
        raise ValueError("U_radius must be at most 0.1")
    if q is None:
        q = SpherePoint(np.array([1, 0, 0], dtype=complex))
    _check_direction(Y, DEFAULT_U_RADIUS)
    g = np.linspace(-U_radius, U_radius, n_members)
    members = []
    for a in g:
        for b in g:
            if a * a + b * b <= U_radius**2:
                X = Direction(Y.ratio + complex(a, b), 1)
                members.append(build_leaf(q, X, eps=eps, resolution=(9, 9, 5)))
    return PolarFamily(q, Y, U_radius, members, chart_build())


def rotation_between(X: Direction, Y: Direction, q=None) -> np.ndarray:
    """R_{X,Y}: fixes the fiber of q, differential maps X to Y (complex 3x3)."""
    from .ambient_geometry import L_coords

    A = np.eye(3, dtype=complex)
    if q is not None:
        A = param_rotation(*L_coords(q))
    R = stabilizer_rotation(Y) @ stabilizer_rotation(X).conj().T
    return A @ R @ A.conj().T


def legendrian_sphere_in_leaf(q, Y: Direction, n: int = 200, rng=None):
    """Points of L^Y: the theta = 0 slice of Sigma_q^Y (a special Legendrian sphere)."""
    from .ambient_geometry import L_coords

    rng = np.random.default_rng(0) if rng is None else rng
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    M = param_rotation(*L_coords(q)) @ stabilizer_rotation(Y)
    return to_real(v.astype(complex) @ M.T)


def positivity_samples(n: int = 1000, seed: int = 0, chart_radius: float = DEFAULT_EPS,
                       u_radius: float = DEFAULT_U_RADIUS):
    """Random (special Legendrian plane, leaf tangent) pairs in the chart ball.

    Returns the array of intersection signs and the determinant magnitudes.
    """
    rng = np.random.default_rng(seed)
    base = chart_build()
    signs = np.zeros(n, dtype=int)
    dets = np.zeros(n)
    from .ambient_geometry import orientation_det

    for k in range(n):
        while True:
            x = rng.uniform(-1, 1, size=5) * chart_radius
            if np.linalg.norm(x) <= chart_radius:
                break
        p = base.psi(x)
        while True:
            zeta = complex(*rng.uniform(-1, 1, size=2)) * u_radius
            if abs(zeta) <= u_radius:
                break
        ch = chart_build(X=Direction(zeta, 1))
        xl = ch.inverse(p)
        T = ch.leaf_tangent(xl)
        v = horizontal_projection(p, rng.normal(size=6))
        v /= np.linalg.norm(v)
        S = Plane2(v, j_apply(p, v))
        signs[k] = intersection_sign(p, S, T)
        dets[k] = orientation_det(np.stack([S.e1, S.e2, T.e1, T.e2, T.e3, p], 1))
    return signs, dets


def fiber_of(p: np.ndarray) -> np.ndarray:
    return fiber_vector(p)
