"""The first-order system of special Legendrian graphs in a foliation chart.

In chart coordinates (s, t, b, c, a) a smooth branch Psi = (phi, alpha),
phi = b + i c, of a special Legendrian graph satisfies

    b_s = A c_t + B b_t + C,    c_s = -A b_t + B c_t + F,    grad alpha = h,

equivalently dbar phi + nu d phi - mu / 2 = 0 with the Wirtinger operators
d = (d_s - i d_t)/2, dbar = (d_s + i d_t)/2 and mu = (1 + nu)(C + i F).
The coefficients come from J extended to T S^5 by J(d/da) = d/da.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .ambient_geometry import Plane2, SpherePoint, fiber_vector, j_apply
from .foliations import ConvergenceError, FoliationChart, chart_with_base_plane
from .qgraph import (QGraph, average, branch_derivatives, cell_disk_weights,
                     qgraph_from_sampler, trace_loops)
from .unique_continuation import GridFunction, cauchy_transform

__all__ = [
    "JCoefficients", "PDECoefficients", "QGraph", "average", "extract_j_coefficients",
    "pde_coefficients_from_j", "beltrami_from_AB", "chart_coefficients", "residual",
    "solve_branch", "dirichlet_energy", "holder_decay_fit",
]


@dataclass
class JCoefficients:
    """J(d/ds) = sigma d/ds + lam d/dt + eta d/da + beta d/db + gamma d/dc."""

    varsigma: np.ndarray
    lam: np.ndarray
    eta: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.stack([self.varsigma, self.lam, self.eta, self.beta, self.gamma], -1)


@dataclass
class PDECoefficients:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    F: np.ndarray
    nu: np.ndarray
    mu: np.ndarray
    h: np.ndarray  # (..., 2)


def pde_chart(center=None, plane: Plane2 | None = None) -> FoliationChart:
    """Chart with d/ds, d/dt = d/dx2, d/dx3 at (1,0,0), leaf directions b, c, a."""
    if center is None:
        center = SpherePoint(np.array([1, 0, 0], dtype=complex))
    if plane is None:
        e = np.eye(6)
        plane = Plane2(e[2], e[4])
    return chart_with_base_plane(center, plane)


def extract_j_coefficients(chart: FoliationChart, x) -> JCoefficients:
    """Coefficients of the extended J applied to d/ds at chart points x (..., 5).

    d/ds splits obliquely as (horizontal part) + kappa d/da with
    kappa = <d/ds, v>/<d/da, v>; J acts by J_p on the first and as the
    identity on d/da.  The image is expanded in the chart frame.
    """
    x = np.asarray(x, float)
    Jm = chart.jacobian(x)  # (..., 6, 5): s, t, b, c, a
    p = chart.psi(x)
    v = fiber_vector(p)
    ds = Jm[..., 0]
    da = Jm[..., 4]
    kappa = np.sum(ds * v, -1) / np.sum(da * v, -1)
    hor = ds - kappa[..., None] * da
    Jds = j_apply(p, hor) + kappa[..., None] * da
    coef = _lstsq(Jm, Jds)
    s_, l_, b_, c_, e_ = (coef[..., k] for k in range(5))
    return JCoefficients(s_, l_, e_, b_, c_)


def _lstsq(M: np.ndarray, y: np.ndarray) -> np.ndarray:
    MT = np.swapaxes(M, -1, -2)
    return np.linalg.solve(MT @ M, (MT @ y[..., None]))[..., 0]


def reassemble_j_ds(chart: FoliationChart, x, jc: JCoefficients) -> np.ndarray:
    """sum of coefficients times frame vectors, as a 6-vector."""
    Jm = chart.jacobian(np.asarray(x, float))
    c = np.stack([jc.varsigma, jc.lam, jc.beta, jc.gamma, jc.eta], -1)
    return np.einsum("...ij,...j->...i", Jm, c)


def pde_coefficients_from_j(jc: JCoefficients):
    """(A, B, C, F) of the real system from the J-coefficients."""
    d = 1 + jc.varsigma**2
    A = jc.lam / d
    B = -jc.lam * jc.varsigma / d
    C = (jc.varsigma * jc.beta - jc.gamma) / d
    F = (jc.beta + jc.varsigma * jc.gamma) / d
    return A, B, C, F


def beltrami_from_AB(A, B, C=None, F=None):
    """nu from [[1+A, -B], [B, 1+A]] (nu1, nu2) = (1-A, -B); with C, F also mu.

    Returns nu, or (nu, mu) with mu = (1 + nu)(C + i F) when C and F are given.
    """
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    det = (1 + A) ** 2 + B**2
    if np.any(det <= 1e-12):
        raise ValueError("singular Beltrami system (outside the admissible chart)")
    nu1 = ((1 + A) * (1 - A) + B * (-B)) / det
    nu2 = ((1 + A) * (-B) - B * (1 - A)) / det
    nu = nu1 + 1j * nu2
    if C is None:
        return nu
    mu = (1 + nu) * (np.asarray(C) + 1j * np.asarray(F))
    return nu, mu


def firstattempt_residual(jc: JCoefficients, b_t, c_t) -> float:
    """Back-substitute the solved b_s, c_s into the J-coefficient identities."""
    A, B, C, F = pde_coefficients_from_j(jc)
    b_s = A * c_t + B * b_t + C
    c_s = -A * b_t + B * c_t + F
    r1 = -c_s + jc.beta - (jc.lam * b_t + jc.varsigma * b_s)
    r2 = b_s + jc.gamma - (jc.lam * c_t + jc.varsigma * c_s)
    return float(np.max(np.abs(np.stack([r1, r2]))))


def chart_coefficients(chart: FoliationChart, x) -> PDECoefficients:
    """All PDE coefficients at chart points x = (s, t, b, c, a)."""
    x = np.asarray(x, float)
    jc = extract_j_coefficients(chart, x)
    A, B, C, F = pde_coefficients_from_j(jc)
    nu, mu = beltrami_from_AB(A, B, C, F)
    Jm = chart.jacobian(x)
    v = fiber_vector(chart.psi(x))
    va = np.sum(Jm[..., 4] * v, -1)
    h = -np.stack([np.sum(Jm[..., 0] * v, -1), np.sum(Jm[..., 1] * v, -1)], -1) / va[..., None]
    return PDECoefficients(A, B, C, F, nu, mu, h)


class CoefficientModel:
    """Coefficients as functions of (z, phi, alpha)."""

    def __call__(self, z, phi, alpha) -> PDECoefficients:  # pragma: no cover - interface
        raise NotImplementedError


class FlatCoefficients(CoefficientModel):
    def __call__(self, z, phi, alpha):
        sh = np.broadcast(z, phi, alpha).shape
        zero = np.zeros(sh)
        return PDECoefficients(np.ones(sh), zero, zero, zero, zero.astype(complex),
                               zero.astype(complex), np.zeros(sh + (2,)))


@dataclass
class ConstantCoefficients(CoefficientModel):
    nu: complex = 0.0
    mu: complex = 0.0
    h: tuple = (0.0, 0.0)

    def __call__(self, z, phi, alpha):
        sh = np.broadcast(z, phi, alpha).shape
        nan = np.full(sh, np.nan)
        return PDECoefficients(nan, nan, nan, nan, np.full(sh, complex(self.nu)),
                               np.full(sh, complex(self.mu)),
                               np.broadcast_to(np.asarray(self.h, float), sh + (2,)).copy())


@dataclass
class ChartCoefficients(CoefficientModel):
    chart: FoliationChart = field(default_factory=pde_chart)

    def __call__(self, z, phi, alpha):
        z, phi, alpha = np.broadcast_arrays(np.asarray(z, complex), np.asarray(phi, complex),
                                            np.asarray(alpha, float))
        x = np.stack([z.real, z.imag, phi.real, phi.imag, alpha], -1)
        return chart_coefficients(self.chart, x)


# sampled special Legendrian graphs ------------------------------------------------

def tilt_rotation(angle: float) -> np.ndarray:
    """Element of SU(3) fixing (1,0,0) and acting on (z2, z3) by exp(i angle sigma_x)."""
    c, s = np.cos(angle), np.sin(angle)
    U = np.eye(3, dtype=complex)
    U[1:, 1:] = [[c, 1j * s], [1j * s, c]]
    return U


def great_sphere_points(U: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Real points of U . S^2_R (S^2_R the real unit sphere), conformal coordinates u."""
    from .foliations import _sigma
    from .ambient_geometry import to_real

    sg, _, _ = _sigma(u[..., 0], u[..., 1])
    return to_real(np.einsum("ij,...j->...i", U, sg.astype(complex)))


def graph_over_chart(chart: FoliationChart, surface, z: np.ndarray, u0=None, tol: float = 1e-13,
                     max_iter: int = 40, fd: float = 1e-6):
    """(phi, alpha) of the graph of a parametrised surface over the leaf labels.

    ``surface(u)`` maps (..., 2) parameters to points of S^5.  Gauss-Newton
    on (b, c, a, u) solves psi(s, t, b, c, a) = surface(u) with (s, t) fixed;
    the surface derivative is a central difference.  ``u0`` is the parameter
    of the chart centre on the surface (default 0).
    """
    z = np.asarray(z, complex)
    zf = z.reshape(-1)
    m = len(zf)
    u0 = np.zeros(2) if u0 is None else np.asarray(u0, float)
    x = np.zeros((m, 5))
    x[:, 0], x[:, 1] = zf.real, zf.imag
    # first-order guess for u from d tau / du at the centre
    J0 = _surface_jac(surface, u0[None], fd)[0]
    Jc = chart.jacobian(np.zeros(5))
    G = np.linalg.lstsq(Jc, J0, rcond=None)[0]  # chart components of d surface / du
    u = u0 + np.linalg.solve(G[:2], np.stack([zf.real, zf.imag])).T
    for _ in range(max_iter):
        r = chart.psi(x) - surface(u)
        Jm = chart.jacobian(x)[..., 2:]
        M = np.concatenate([Jm, -_surface_jac(surface, u, fd)], -1)  # (m, 6, 5)
        MT = np.swapaxes(M, 1, 2)
        d = np.linalg.solve(MT @ M, (MT @ r[..., None]))[..., 0]
        x[:, 2:] -= d[:, :3]
        u = u - d[:, 3:]
        if np.max(np.abs(d)) < tol:
            break
    err = np.max(np.linalg.norm(chart.psi(x) - surface(u), axis=1)) if m else 0.0
    if not np.isfinite(err) or err > 1e-9:
        raise ConvergenceError(f"graph sampling did not converge (residual {err:.2e})")
    phi = (x[:, 2] + 1j * x[:, 3]).reshape(z.shape)
    return phi, x[:, 4].reshape(z.shape)


def _surface_jac(surface, u, fd):
    cols = []
    for k in range(2):
        e = np.zeros(2)
        e[k] = fd
        cols.append((surface(u + e) - surface(u - e)) / (2 * fd))
    return np.stack(cols, -1)


def tilted_sphere_qgraph(angle: float = 0.3, R: float = 0.05, n: int = 128,
                         chart: FoliationChart | None = None) -> tuple[QGraph, FoliationChart]:
    """Single-valued graph of a tilted great special Legendrian sphere."""
    ch = pde_chart() if chart is None else chart
    U = tilt_rotation(angle)

    def sampler(z):
        phi, alpha = graph_over_chart(ch, lambda u: great_sphere_points(U, u), z)
        return phi[..., None], alpha[..., None]

    qg = qgraph_from_sampler(sampler, R, n, "tilted-sphere")
    return qg, ch


# residuals --------------------------------------------------------------------------

@dataclass
class ResidualReport:
    cr: np.ndarray  # (n, n, Q) |dbar phi + nu d phi - mu/2|
    alpha: np.ndarray  # (n, n, Q) |grad alpha - h|
    valid: np.ndarray  # (n, n) nodes used
    masked: int
    cr_sup: float
    alpha_sup: float


def residual(qg: QGraph, coeffs: CoefficientModel, radius: float | None = None,
             mask_radius_cells: int = 2, edge_cells: int = 1) -> ResidualReport:
    """Per-branch residual fields of the complex equation and of grad alpha = h.

    Derivatives are central differences with local branch matching; nodes
    near branch collisions are masked and counted.  ``radius`` restricts the
    reported sup norms to a disk; the outermost ``edge_cells`` grid rows,
    where the stencil is one-sided, are excluded from the sups.
    """
    bd = branch_derivatives(qg, mask_radius_cells)
    ds, dt = bd.ds, bd.dt
    phs = ds[..., 0] + 1j * ds[..., 1]
    pht = dt[..., 0] + 1j * dt[..., 1]
    dbar_ = 0.5 * (phs + 1j * pht)
    d_ = 0.5 * (phs - 1j * pht)
    z = qg.z[..., None]
    co = coeffs(z, qg.phi, qg.alpha)
    cr = np.abs(dbar_ + co.nu * d_ - 0.5 * co.mu)
    ga = np.stack([ds[..., 2], dt[..., 2]], -1)
    ar = np.linalg.norm(ga - co.h, axis=-1)
    n = qg.n
    inner = np.zeros((n, n), bool)
    e = edge_cells
    inner[e:n - e, e:n - e] = True
    reg = qg.disk_mask(radius) if radius is not None else np.ones((n, n), bool)
    use = bd.valid & inner & reg
    masked = int(np.sum(~bd.valid & inner & reg))
    crs = float(cr[use].max()) if use.any() else 0.0
    ars = float(ar[use].max()) if use.any() else 0.0
    return ResidualReport(cr, ar, use, masked, crs, ars)


# solver -----------------------------------------------------------------------------

@dataclass
class BranchSolution:
    qgraph: QGraph
    iterations: int
    history: list
    converged: bool


def _holomorphic_extension(g_samples: np.ndarray, z: np.ndarray, R: float,
                           max_modes: int | None = None) -> np.ndarray:
    """sum_{k>=0} g_k (z/R)^k from equispaced boundary samples (negative modes dropped)."""
    M = len(g_samples)
    ghat = np.fft.fft(g_samples) / M
    K = M // 2 if max_modes is None else min(max_modes, M // 2)
    coef = ghat[:K]
    big = np.abs(coef) > 1e-15 * max(1.0, np.abs(coef).max())
    kmax = int(np.nonzero(big)[0].max()) + 1 if big.any() else 1
    w = z / R
    out = np.zeros(z.shape, complex)
    for k in range(kmax - 1, -1, -1):  # Horner
        out = out * w + coef[k]
    return out


def _poisson_dirichlet(rhs: np.ndarray, bval: np.ndarray, inside: np.ndarray, h: float) -> np.ndarray:
    """5-point Laplacian = rhs on ``inside`` nodes, Dirichlet values bval elsewhere."""
    n = rhs.shape[0]
    idx = -np.ones((n, n), int)
    ii = np.argwhere(inside)
    idx[inside] = np.arange(len(ii))
    rows, cols, vals = [], [], []
    b = rhs[inside] * h * h
    for k, (i, j) in enumerate(ii):
        rows.append(k)
        cols.append(k)
        vals.append(-4.0)
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a, c = i + di, j + dj
            if idx[a, c] >= 0:
                rows.append(k)
                cols.append(idx[a, c])
                vals.append(1.0)
            else:
                b[k] -= bval[a, c]
    L = sp.csr_matrix((vals, (rows, cols)), shape=(len(ii), len(ii)))
    out = bval.copy()
    out[inside] = spla.spsolve(L, b)
    return out


def solve_branch(boundary, coeffs: CoefficientModel, n: int = 128, R: float = 1.0,
                 tol: float = 1e-10, max_iter: int = 100, n_boundary: int | None = None,
                 nu_max: float = 0.25) -> BranchSolution:
    """Single-valued branch on D_R with given boundary values of (phi, alpha).

    ``boundary(theta)`` returns (phi, alpha) on the circle.  Picard sweeps:
    f = -nu d phi + mu/2 from the current iterate; phi = T_D f + H where H is
    the holomorphic extension of (boundary phi - T_D f) from the circle;
    alpha solves Laplace(alpha) = div h with the boundary alpha.  Raises
    ConvergenceError if the sup-change ratio stays >= 1 for 5 sweeps, and
    ValueError if |nu| > nu_max on the disk.
    """
    s = np.linspace(-R, R, n)
    h = s[1] - s[0]
    z = s[:, None] + 1j * s[None, :]
    wts = cell_disk_weights(s, 0.0, R)
    inside = np.abs(z) < R
    M = n_boundary or 4 * n
    th = np.linspace(0, 2 * np.pi, M, endpoint=False)
    zb = R * np.exp(1j * th)
    gphi, galpha = boundary(th)
    gphi = np.asarray(gphi, complex)
    galpha = np.asarray(galpha, float)
    phi = _holomorphic_extension(gphi, z, R)
    # radial extension of boundary alpha to the exterior nodes
    ang = np.angle(z) % (2 * np.pi)
    a_ext = np.interp(ang, np.append(th, 2 * np.pi), np.append(galpha, galpha[0]))
    alpha = _poisson_dirichlet(np.zeros((n, n)), a_ext, inside & _interior(n), h)
    history = []
    prev = None
    bad = 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        co = coeffs(z, phi, alpha)
        if np.max(np.abs(co.nu[inside])) > nu_max:
            raise ValueError(f"|nu| exceeds {nu_max} on the disk: outside the contraction regime")
        gs, gt = np.gradient(phi, h, h)
        dphi = 0.5 * (gs - 1j * gt)
        f = np.where(wts > 0, -co.nu * dphi + 0.5 * co.mu, 0)
        Tf = cauchy_transform(GridFunction(s, f, wts), support=(0.0, R)).values
        Tb = _bilinear(Tf, s, zb)
        phi_new = Tf + _holomorphic_extension(gphi - Tb, z, R)
        dv = np.gradient(co.h[..., 0], h, axis=0) + np.gradient(co.h[..., 1], h, axis=1)
        alpha_new = _poisson_dirichlet(dv, a_ext, inside & _interior(n), h)
        change = float(max(np.max(np.abs(phi_new - phi)[inside]),
                           np.max(np.abs(alpha_new - alpha)[inside])))
        ratio = change / prev if prev else np.nan
        history.append({"iteration": it, "change": change, "contraction": ratio})
        phi, alpha = phi_new, alpha_new
        if change < tol:
            converged = True
            break
        if np.isfinite(ratio) and ratio >= 1:
            bad += 1
            if bad >= 5:
                raise ConvergenceError(f"Picard iteration not contracting (ratio {ratio:.3g})")
        else:
            bad = 0
        prev = change
    qg = QGraph(R, s, phi[..., None], alpha[..., None], None, (), "solve_branch")
    return BranchSolution(qg, it, history, converged)


def _interior(n: int) -> np.ndarray:
    m = np.zeros((n, n), bool)
    m[1:-1, 1:-1] = True
    return m


def _bilinear(v: np.ndarray, s: np.ndarray, z: np.ndarray) -> np.ndarray:
    h = s[1] - s[0]
    x = (z.real - s[0]) / h
    y = (z.imag - s[0]) / h
    i = np.clip(np.floor(x).astype(int), 0, len(s) - 2)
    j = np.clip(np.floor(y).astype(int), 0, len(s) - 2)
    fx, fy = x - i, y - j
    return ((1 - fx) * (1 - fy) * v[i, j] + fx * (1 - fy) * v[i + 1, j]
            + (1 - fx) * fy * v[i, j + 1] + fx * fy * v[i + 1, j + 1])


# energies ----------------------------------------------------------------------------

@dataclass
class EnergyReport:
    total: float
    per_branch: np.ndarray
    calibration: np.ndarray  # int Psi_j^* omega_0 per branch
    phi_energy: float  # sum_j int |D phi_j|^2 only
    filled: float  # energy assigned to masked discs around branch points
    masked_nodes: int


def _slice_area_energy(qg: QGraph, center: complex, rho: float, n: int = 1440) -> float:
    """sum_j int_{D_rho(center)} |D phi_j|^2 via the boundary identity.

    For holomorphic branches int |D phi|^2 = oint Im(conj(phi) d phi/dtheta) dtheta;
    loops are traced through the monodromy so multi-lap loops are continuous.
    """
    loops = trace_loops(qg, center, rho, n)
    tot = 0.0
    for lp in loops:
        phi = lp.values[:, 0, 0] + 1j * lp.values[:, 0, 1]
        dphi = np.roll(phi, -1) - phi
        mid = 0.5 * (phi + np.roll(phi, -1))
        tot += float(np.sum(np.imag(np.conj(mid) * dphi)))
    return tot


def dirichlet_energy(qg: QGraph, radius: float | None = None, center: complex = 0.0,
                     mask_radius_cells: int = 2) -> EnergyReport:
    """sum_j int_{D_r} |D phi_j|^2 + |D alpha_j|^2 with exact cell-disk weights.

    Around each branch point inside the region the masked disc (radius a few
    cells) is excluded from the quadrature and its phi-energy taken from the
    boundary identity on the disc's circle; other masked nodes get the mean
    energy density of their valid neighbours.
    """
    r = qg.R if radius is None else radius
    bd = branch_derivatives(qg, mask_radius_cells)
    dens_phi = np.sum(bd.ds[..., :2] ** 2 + bd.dt[..., :2] ** 2, -1)  # (n, n, Q)
    dens_a = bd.ds[..., 2] ** 2 + bd.dt[..., 2] ** 2
    jac = bd.ds[..., 0] * bd.dt[..., 1] - bd.dt[..., 0] * bd.ds[..., 1]
    h = qg.h
    w = cell_disk_weights(qg.s, center, r)
    filled = 0.0
    rho_m = (mask_radius_cells + 2.5) * h
    for bp in qg.branch_points:
        # shrink the disc so it stays inside D_r (all of D_r when centred there)
        rho = min(rho_m, r - abs(bp - center))
        if rho > 0.25 * h:
            w = w - cell_disk_weights(qg.s, bp, rho)
            filled += _slice_area_energy(qg, bp, rho)
    w = np.clip(w, 0, 1)
    valid = bd.valid
    if (~valid & (w > 0)).any():
        dens_phi = _fill_masked(dens_phi, valid)
        dens_a = _fill_masked(dens_a, valid)
        jac = _fill_masked(jac, valid)
    per = (np.sum((dens_phi + dens_a) * w[..., None], (0, 1)) * h * h)
    phi_e = float(np.sum(dens_phi * w[..., None]) * h * h) + filled
    Q = qg.Q
    per = per + filled / Q
    cal = np.sum((1 + jac) * w[..., None], (0, 1)) * h * h
    return EnergyReport(float(per.sum()), per, cal, phi_e, filled, int(np.sum(~valid & (w > 0))))


def _fill_masked(d: np.ndarray, valid: np.ndarray, rounds: int = 50) -> np.ndarray:
    out = d.copy()
    known = valid.copy()
    for _ in range(rounds):
        if known.all():
            break
        acc = np.zeros_like(out)
        cnt = np.zeros(known.shape)
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            sh_k = np.roll(known, (di, dj), (0, 1))
            sh_v = np.roll(out, (di, dj), (0, 1))
            acc += np.where(sh_k[..., None] if out.ndim == 3 else sh_k, sh_v, 0)
            cnt += sh_k
        new = ~known & (cnt > 0)
        c = np.where(cnt > 0, cnt, 1)
        val = acc / (c[..., None] if out.ndim == 3 else c)
        out = np.where(new[..., None] if out.ndim == 3 else new, val, out)
        known = known | new
    return out


def graph_mass(qg: QGraph, radius: float | None = None) -> np.ndarray:
    """Area of each branch's graph over D_r in the flat chart metric."""
    r = qg.R if radius is None else radius
    bd = branch_derivatives(qg)
    w = cell_disk_weights(qg.s, 0.0, r)
    a = bd.ds.copy()
    b = bd.dt.copy()
    E = 1 + np.sum(a * a, -1)
    G = 1 + np.sum(b * b, -1)
    Fm = np.sum(a * b, -1)
    area = np.sqrt(np.maximum(E * G - Fm * Fm, 0))
    area = _fill_masked(area, bd.valid)
    return np.sum(area * w[..., None], (0, 1)) * qg.h**2


@dataclass
class HolderFit:
    C: float
    delta: float
    r2: float
    radii: np.ndarray
    values: np.ndarray
    notice: str = ""


def holder_decay_fit(qg: QGraph, radii, center: complex = 0.0) -> HolderFit:
    """Least-squares fit of log y(r) = log C + delta log r, y(r) = sum_j int_{D_r} |D phi_j|^2."""
    radii = np.sort(np.asarray(radii, float))
    if len(radii) < 5 or radii[-1] / radii[0] < 10**1.5 * (1 - 1e-9):
        raise ValueError("need at least 5 radii spanning 1.5 decades")
    y = np.array([dirichlet_energy(qg, r, center).phi_energy for r in radii])
    if np.all(np.abs(y) < 1e-14):
        return HolderFit(0.0, np.nan, np.nan, radii, y, "degenerate fit: energy vanishes at all radii")
    pos = y > 0
    lx, ly = np.log(radii[pos]), np.log(y[pos])
    A = np.column_stack([np.ones_like(lx), lx])
    (c0, d), *_ = np.linalg.lstsq(A, ly, rcond=None)
    pred = A @ np.array([c0, d])
    ss = np.sum((ly - pred) ** 2)
    st = np.sum((ly - ly.mean()) ** 2)
    r2 = 1 - ss / st if st > 0 else 1.0
    return HolderFit(float(np.exp(c0)), float(d), float(r2), radii, y)


# the two great spheres through (1,0,0) as a 2-valued graph ---------------------------

L_ROTATION = np.diag([1, -1j, -1j])  # L = diag(1, -i, -i) . S^2_R as a set


def sphere_pair_chart() -> FoliationChart:
    """Chart at (1,0,0) whose leaves are transversal to both L0 and L."""
    from .foliations import Direction, chart_build

    return chart_build(X=Direction(1, 1))


def sphere_pair_sampler(chart: FoliationChart | None = None):
    """Sampler z -> (phi, alpha) of shape (..., 2) for L0 + L near (1,0,0)."""
    ch = sphere_pair_chart() if chart is None else chart
    rots = (np.eye(3, dtype=complex), L_ROTATION)

    def f(z):
        out = [graph_over_chart(ch, lambda u, U=U: great_sphere_points(U, u), z) for U in rots]
        return np.stack([o[0] for o in out], -1), np.stack([o[1] for o in out], -1)

    return f


def sphere_pair_qgraph(R: float = 0.1, n: int = 128, chart: FoliationChart | None = None):
    ch = sphere_pair_chart() if chart is None else chart
    qg = qgraph_from_sampler(sphere_pair_sampler(ch), R, n, "l0-plus-l-graph", branch_points=(0j,))
    return qg, ch


def averaged_nu_field(chart: FoliationChart | None = None):
    """z -> nu(z, phi~, alpha~) for the average of the L0 + L graph."""
    ch = sphere_pair_chart() if chart is None else chart
    smp = sphere_pair_sampler(ch)
    coeffs = ChartCoefficients(ch)

    def nu(z):
        phi, alpha = smp(np.asarray(z, complex))
        return coeffs(z, phi.mean(-1), alpha.mean(-1)).nu

    return nu
