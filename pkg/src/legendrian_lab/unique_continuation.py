"""Solid Cauchy transform, the almost-holomorphic map w, vanishing products,
Morrey norms and the Carleman and partial-integration diagnostics.

Wirtinger derivatives are d/dz = (d/ds - i d/dt)/2 and d/dzbar = (d/ds + i d/dt)/2,
so that T f = (1/pi) int f(xi)/(z - xi) dA(xi) has dbar(T f) = f.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve

from .foliations import ConvergenceError
from .qgraph import cell_disk_weights


@dataclass
class GridFunction:
    """Complex values at the nodes of a uniform square grid.

    Node (i, j) is z = s[i] + i s[j]; it stands for the cell of side h centred
    there.  ``weights`` (cell area fractions) restrict to an irregular support.
    """

    s: np.ndarray
    values: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, complex)
        n = len(self.s)
        if self.values.shape != (n, n):
            raise ValueError("values must have shape (n, n)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function values must be finite")

    @property
    def h(self) -> float:
        return float(self.s[1] - self.s[0])

    @property
    def z(self) -> np.ndarray:
        return self.s[:, None] + 1j * self.s[None, :]

    @classmethod
    def from_function(cls, f, n: int, half_width: float, support_radius: float | None = None):
        s = np.linspace(-half_width, half_width, n)
        z = s[:, None] + 1j * s[None, :]
        w = None if support_radius is None else cell_disk_weights(s, 0.0, support_radius)
        vals = np.asarray(f(z), complex) * np.ones_like(z)
        if w is not None:
            vals = np.where(w > 0, vals, 0)
        return cls(s, vals, w)

    def rows(self) -> np.ndarray:
        S, T = np.meshgrid(self.s, self.s, indexing="ij")
        return np.column_stack([S.ravel(), T.ravel(), self.values.real.ravel(),
                                self.values.imag.ravel()])


def _cell_potential(x, y):
    """Corner potential of 1/(x + i y): d^2/dxdy of (P - iQ) equals (x - iy)/(x^2+y^2)."""
    r2 = x * x + y * y
    lg = np.log(np.where(r2 > 0, r2, 1.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        ax = np.where(x != 0, x * np.arctan(y / np.where(x != 0, x, 1)), 0.0)
        ay = np.where(y != 0, y * np.arctan(x / np.where(y != 0, y, 1)), 0.0)
    P = 0.5 * y * lg + ax
    Q = 0.5 * x * lg + ay
    return P - 1j * Q


def cell_kernel(offsets_x: np.ndarray, offsets_y: np.ndarray, h: float) -> np.ndarray:
    """(1/pi) times the exact integral of 1/eta over the h-cell centred at each offset."""
    X, Y = np.meshgrid(offsets_x, offsets_y, indexing="ij")
    a = h / 2
    F = _cell_potential
    val = F(X + a, Y + a) - F(X - a, Y + a) - F(X + a, Y - a) + F(X - a, Y - a)
    return val / np.pi


def cauchy_transform(density: GridFunction, support: tuple | None = None,
                     near_cells: int = 8) -> GridFunction:
    """T f(z) = (1/pi) int f(xi) / (z - xi) dA(xi) at every node.

    The density is taken piecewise constant on cells (times cell weights) and
    each cell is integrated against the kernel exactly, so the singular cell
    needs no special treatment.  Evaluated by FFT convolution.

    ``support = (center, radius)`` declares the density's support to be that
    disk: cells cut by the circle are then integrated exactly over their
    covered part (contour integral) for targets within ``near_cells`` cells.
    """
    s, h = density.s, density.h
    n = len(s)
    f = density.values if density.weights is None else density.values * density.weights
    off = h * np.arange(-(n - 1), n)
    K = cell_kernel(off, off, h)
    out = fftconvolve(f, K, mode="full")[n - 1:2 * n - 1, n - 1:2 * n - 1]
    if support is not None:
        out = out + _partial_cell_correction(density, complex(support[0]), float(support[1]),
                                             near_cells)
    return GridFunction(s, out)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _contour_integral(pieces, z: np.ndarray, splits: int = 4) -> np.ndarray:
    """int over the region bounded by ``pieces`` of dA / (z - xi), for targets z.

    Green's formula with the bounded integrand (conj(xi) - conj(z)) / (z - xi):
    the conj(z) term cancels the point contribution of z, so one formula holds
    for targets inside, outside and on the boundary.
    """
    tot = np.zeros(z.shape, complex)
    u = (0.5 * (_GL_X + 1)[None, :] + np.arange(splits)[:, None]).ravel() / splits
    wq = np.tile(0.5 * _GL_W, splits) / splits
    for kind, a, b, c, R in pieces:
        if kind == "seg":
            xi = a + (b - a) * u
            dxi = (b - a) * wq
        else:  # arc from angle a to b on circle (c, R)
            t = a + (b - a) * u
            xi = c + R * np.exp(1j * t)
            dxi = 1j * R * np.exp(1j * t) * (b - a) * wq
        num = np.conj(xi)[None, :] - np.conj(z)[:, None]
        den = z[:, None] - xi[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(den != 0, num / np.where(den != 0, den, 1), 0.0)
        tot += np.sum(q * dxi[None, :], 1)
    return tot / 2j


def _cell_disk_pieces(x0, x1, y0, y1, c, R):
    """Counterclockwise boundary of [x0,x1]x[y0,y1] intersected with the disk (c, R).

    Clipped square edges plus the circle arcs between consecutive edge
    crossings whose midpoint lies inside the square.
    """
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
    pieces = []
    angles = []
    for k in range(4):
        p, q = corners[k], corners[(k + 1) % 4]
        d = q - p
        A = abs(d) ** 2
        B = 2 * ((p - c).real * d.real + (p - c).imag * d.imag)
        C = abs(p - c) ** 2 - R * R
        disc = B * B - 4 * A * C
        if disc <= 0:
            continue
        sq = np.sqrt(disc)
        r1, r2 = (-B - sq) / (2 * A), (-B + sq) / (2 * A)
        for r in (r1, r2):
            if -1e-12 <= r <= 1 + 1e-12:
                angles.append(np.angle(p + min(max(r, 0.0), 1.0) * d - c))
        t1, t2 = max(0.0, r1), min(1.0, r2)
        if t2 > t1:
            pieces.append(("seg", p + t1 * d, p + t2 * d, c, R))
    if angles:
        ang = np.unique(np.round(np.mod(angles, 2 * np.pi), 13))
        nxt = np.append(ang[1:], ang[0] + 2 * np.pi)
        for a0, a1 in zip(ang, nxt):
            if a1 - a0 < 1e-13:
                continue
            m = c + R * np.exp(1j * 0.5 * (a0 + a1))
            if x0 < m.real < x1 and y0 < m.imag < y1:
                pieces.append(("arc", a0, a1, c, R))
    elif x0 < c.real - R and c.real + R < x1 and y0 < c.imag - R and c.imag + R < y1:
        pieces.append(("arc", 0.0, 2 * np.pi, c, R))
    return pieces


@lru_cache(maxsize=16)
def _partial_cell_blocks(n: int, s0: float, h: float, c: complex, R: float, near: int):
    """Per cut cell: (i, j, target window, exact minus weighted cell kernel)."""
    s = s0 + h * np.arange(n)
    z = s[:, None] + 1j * s[None, :]
    w = cell_disk_weights(s, c, R)
    blocks = []
    for i, j in np.argwhere((w > 0) & (w < 1)):
        x0, x1 = s[i] - h / 2, s[i] + h / 2
        y0, y1 = s[j] - h / 2, s[j] + h / 2
        pieces = _cell_disk_pieces(x0, x1, y0, y1, c, R)
        i0, i1 = max(0, i - near), min(n, i + near + 1)
        j0, j1 = max(0, j - near), min(n, j + near + 1)
        zt = z[i0:i1, j0:j1]
        exact = _contour_integral(pieces, zt.ravel()).reshape(zt.shape) / np.pi
        approx = w[i, j] * cell_kernel(s[i0:i1] - s[i], s[j0:j1] - s[j], h)
        blocks.append((int(i), int(j), i0, i1, j0, j1, exact - approx))
    return w, blocks


def _partial_cell_correction(density: GridFunction, c: complex, R: float, near: int) -> np.ndarray:
    s, h = density.s, density.h
    n = len(s)
    w, blocks = _partial_cell_blocks(n, float(s[0]), float(h), c, R, near)
    if density.weights is not None and not np.allclose(density.weights, w):
        raise ValueError("density weights do not match the declared disk support")
    corr = np.zeros((n, n), complex)
    v = density.values
    for i, j, i0, i1, j0, j1, blk in blocks:
        if v[i, j] != 0:
            corr[i0:i1, j0:j1] += v[i, j] * blk
    return corr


def dbar(values: np.ndarray, h: float) -> np.ndarray:
    """Central-difference dbar = (d/ds + i d/dt)/2 (one-sided on the edge)."""
    gs, gt = np.gradient(values, h, h)
    return 0.5 * (gs + 1j * gt)


def dz(values: np.ndarray, h: float) -> np.ndarray:
    gs, gt = np.gradient(values, h, h)
    return 0.5 * (gs - 1j * gt)


def dbar_identity_error(f, n: int, half_width: float = 1.5, support_radius: float = 1.0,
                        band: float = 0.0) -> float:
    """sup |dbar(T f) - f| over nodes in the disk, at least ``band`` from its edge."""
    gf = GridFunction.from_function(f, n, half_width, support_radius)
    T = cauchy_transform(gf)
    err = np.abs(dbar(T.values, gf.h) - gf.values)
    r = np.abs(gf.z)
    sel = r <= support_radius - band
    return float(err[sel].max())


# the map w ----------------------------------------------------------------------

def smooth_cutoff(r: np.ndarray, R: float) -> np.ndarray:
    """Radial C^infinity cutoff: 1 on D_R, 0 outside D_2R."""
    x = np.clip((np.asarray(r, float) - R) / R, 0.0, 1.0)

    def e(t):
        return np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)

    return e(1 - x) / (e(1 - x) + e(x))


@dataclass
class SolveWResult:
    w: GridFunction
    u: GridFunction
    iterations: int
    contraction: list
    u_sup: float
    converged: bool
    trace: list = field(default_factory=list)

    @property
    def contraction_ratio(self) -> float:
        c = [x for x in self.contraction if np.isfinite(x)]
        return float(np.max(c)) if c else 0.0


def solve_w(nu, R: float, n: int = 256, half_width: float | None = None, tol: float = 1e-10,
            max_iter: int = 200) -> SolveWResult:
    """Fixed point u = T[-chi nu du - chi (nu/xi)(1 + u)], w = chi_R (1 + u) z.

    ``nu`` is a callable of z or a GridFunction on the solver grid.  The grid
    covers [-half_width, half_width]^2 (default 2.5 R) so that supp chi_R sits
    inside.  Raises ConvergenceError when successive sup-changes stop
    contracting (ratio >= 1 for 5 consecutive sweeps).
    """
    hw = 2.5 * R if half_width is None else half_width
    s = np.linspace(-hw, hw, n)
    z = s[:, None] + 1j * s[None, :]
    h = s[1] - s[0]
    nuv = nu.values if isinstance(nu, GridFunction) else np.asarray(nu(z), complex) * np.ones_like(z)
    chi = smooth_cutoff(np.abs(z), R)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(np.abs(z) > 0, nuv / np.where(z == 0, 1, z), 0.0)
    # n even keeps nodes off the origin; at a node on 0 use the neighbour mean
    if np.any(z == 0):
        i0 = np.argwhere(z == 0)[0]
        q[tuple(i0)] = np.mean([q[i0[0] + 1, i0[1]], q[i0[0] - 1, i0[1]],
                                q[i0[0], i0[1] + 1], q[i0[0], i0[1] - 1]])
    a = chi * nuv
    b = chi * q
    u = np.zeros_like(z)
    prev = None
    ratios, trace = [], []
    bad = 0
    converged = False
    k = 0
    for k in range(1, max_iter + 1):
        f = -a * dz(u, h) - b * (1 + u)
        u_new = cauchy_transform(GridFunction(s, f)).values
        change = float(np.max(np.abs(u_new - u)))
        scale = max(1.0, float(np.max(np.abs(u_new))))
        ratio = change / prev if prev not in (None, 0.0) else np.nan
        ratios.append(ratio)
        trace.append({"iteration": k, "change": change, "contraction": ratio})
        u = u_new
        if change <= tol * scale:
            converged = True
            break
        if np.isfinite(ratio) and ratio >= 1:
            bad += 1
            if bad >= 5:
                raise ConvergenceError(f"solve_w not contracting (ratio {ratio:.3g})")
        else:
            bad = 0
        prev = change
    w = chi * (1 + u) * z
    inside = np.abs(z) <= R
    return SolveWResult(GridFunction(s, w), GridFunction(s, u), k, ratios,
                        float(np.max(np.abs(u[inside]))), converged, trace)


def beltrami_residual(w: GridFunction, nu, R: float) -> float:
    """sup over D_R (two cells in from the edge) of |dbar w + nu dw|."""
    z = w.z
    nuv = nu.values if isinstance(nu, GridFunction) else np.asarray(nu(z), complex) * np.ones_like(z)
    res = np.abs(dbar(w.values, w.h) + nuv * dz(w.values, w.h))
    sel = np.abs(z) <= R - 2 * w.h
    return float(res[sel].max())


def vanishing_product(w: GridFunction, points) -> GridFunction:
    """g = prod_i (w(z) - w(q_i)); w(q_i) by bilinear interpolation."""
    g = np.ones_like(w.values)
    for q in points:
        g = g * (w.values - _interp(w, complex(q)))
    return GridFunction(w.s, g)


def comparability(g: GridFunction, points, R: float, exclude: float | None = None):
    """Measured (K1, K2) with K1 prod|z-q_i| <= |g| <= K2 prod|z-q_i| on D_R."""
    z = g.z
    ex = 2 * g.h if exclude is None else exclude
    p = np.ones(z.shape)
    sel = np.abs(z) <= R
    for q in points:
        p = p * np.abs(z - q)
        sel &= np.abs(z - q) > ex
    if not len(points):
        ratio = np.abs(g.values[sel])
    else:
        ratio = np.abs(g.values[sel]) / p[sel]
    return float(ratio.min()), float(ratio.max())


def _interp(gf: GridFunction, z0: complex) -> complex:
    s, h = gf.s, gf.h
    x = (z0.real - s[0]) / h
    y = (z0.imag - s[0]) / h
    i = int(np.clip(np.floor(x), 0, len(s) - 2))
    j = int(np.clip(np.floor(y), 0, len(s) - 2))
    fx, fy = x - i, y - j
    v = gf.values
    return complex((1 - fx) * (1 - fy) * v[i, j] + fx * (1 - fy) * v[i + 1, j]
                   + (1 - fx) * fy * v[i, j + 1] + fx * fy * v[i + 1, j + 1])


def winding_of(gf: GridFunction, center: complex, radius: float, n: int = 2048) -> int:
    """Winding number of a grid function around 0 along a circle."""
    th = np.linspace(0, 2 * np.pi, n, endpoint=False)
    pts = center + radius * np.exp(1j * th)
    vals = np.array([_interp(gf, p) for p in pts])
    d = np.angle(np.roll(vals, -1) / vals)
    return int(round(d.sum() / (2 * np.pi)))


# Morrey norms ------------------------------------------------------------------------

@dataclass
class MorreyNorms:
    l_inf: float
    l2_grad: float
    morrey_grad: float
    lam: float


def morrey_norms(f: GridFunction, lam: float = 0.5, radii=None, stride: int = 4) -> MorreyNorms:
    """sup|f|, int |Df|^2 and sup over windows of rho^-lam int_{B_rho(x0)} |Df|^2.

    Windows are centred on every ``stride``-th node, radii default to a dyadic
    ladder from 2h to the grid half-width.
    """
    h = f.h
    gs, gt = np.gradient(f.values, h, h)
    dens = (np.abs(gs) ** 2 + np.abs(gt) ** 2) * h * h
    l2 = float(dens.sum())
    if radii is None:
        hw = (f.s[-1] - f.s[0]) / 2
        radii = [2 * h * 2**k for k in range(int(np.log2(hw / (2 * h))) + 1)]
    best = 0.0
    n = len(f.s)
    # integrals over discs by convolution with an indicator kernel
    for rho in radii:
        m = int(np.ceil(rho / h))
        o = h * np.arange(-m, m + 1)
        disk = (o[:, None] ** 2 + o[None, :] ** 2 <= rho * rho).astype(float)
        conv = fftconvolve(dens, disk, mode="same")
        best = max(best, float(conv[::stride, ::stride].max()) / rho**lam)
    return MorreyNorms(float(np.abs(f.values).max()), l2, best, lam)


# Carleman and partial integration ---------------------------------------------------

@dataclass
class CarlemanResult:
    lhs: float
    rhs: float
    quotient_max: float

    @property
    def K(self) -> float:
        if self.rhs == 0:
            return 0.0 if self.lhs == 0 else np.inf
        return self.lhs / self.rhs


def carleman_ratio(sigma: np.ndarray, tau: np.ndarray, g: GridFunction, r: float,
                   center: complex = 0.0, cap: float = 1e12) -> CarlemanResult:
    """lhs = int_{B_r/4} sum_j |sigma_j/g|^2 + |tau_j/g|^2, rhs over B_2r minus B_r.

    ``sigma`` (n, n, Q) complex and ``tau`` (n, n, Q) real live on g's grid.
    Cell weights are exact disk coverages; nodes where g vanishes to round-off
    are dropped from the quadrature, and the quotient bound is checked on the
    remaining nodes.
    """
    s, h = g.s, g.h
    sigma = np.asarray(sigma)
    tau = np.asarray(tau)
    if sigma.ndim == 2:
        sigma = sigma[..., None]
    if tau.ndim == 2:
        tau = tau[..., None]
    num = np.sum(np.abs(sigma) ** 2 + np.abs(tau) ** 2, -1)
    if not np.any(num):
        return CarlemanResult(0.0, 0.0, 0.0)
    gv = np.abs(g.values) ** 2
    good = gv > 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        quot = np.where(good, num / np.where(good, gv, 1), 0.0)
    w_in = cell_disk_weights(s, center, r / 4)
    w_out = cell_disk_weights(s, center, 2 * r) - cell_disk_weights(s, center, r)
    qmax = float(np.sqrt(quot[(w_in > 0) | (w_out > 0)].max()))
    if qmax > cap:
        raise ValueError("quotient sigma/g unbounded: the points are not zeros of the difference graph")
    lhs = float(np.sum(quot * w_in) * h * h)
    rhs = float(np.sum(quot * w_out) * h * h)
    return CarlemanResult(lhs, rhs, qmax)


@dataclass
class PartIntResult:
    lhs: float
    rhs: float

    @property
    def gap(self) -> float:
        return abs(self.lhs - self.rhs)


def partint_identity_check(field, weights=None, mask_radius_cells: int = 2) -> PartIntResult:
    """int sum_j |dbar f_j|^2 against int sum_j |d f_j|^2 for compactly supported f.

    ``field`` is a QGraph whose phi holds the branches f_j (already multiplied
    by the cutoff) or a single-valued GridFunction.  Branch derivatives use
    local matching; nodes masked around branch collisions are dropped, so for
    branched data the gap is the flux through the small masked discs.
    """
    from .qgraph import QGraph, branch_derivatives

    if isinstance(field, GridFunction):
        v = field.values[..., None]
        field = QGraph(float(field.s[-1]), field.s, v, np.zeros(v.shape))
    if not np.any(field.phi):
        return PartIntResult(0.0, 0.0)
    bd = branch_derivatives(field, mask_radius_cells)
    fs = bd.ds[..., 0] + 1j * bd.ds[..., 1]
    ft = bd.dt[..., 0] + 1j * bd.dt[..., 1]
    db = np.sum(np.abs(0.5 * (fs + 1j * ft)) ** 2, -1)
    d = np.sum(np.abs(0.5 * (fs - 1j * ft)) ** 2, -1)
    w = bd.valid.astype(float) if weights is None else weights * bd.valid
    h = field.h
    return PartIntResult(float(np.sum(db * w) * h * h), float(np.sum(d * w) * h * h))
