"""Pair lifts, the stretch map S_delta, sphere-valued maps and degrees.

For a pair of branches (zeta_1, zeta_2) over z the map
v(xi, t) = (g, a + t phi_delta(Delta)) / norm, with a = alpha_1 - alpha_2 and
g = (phi_1 - phi_2) / max(|a|, D eps), is pushed through the stretch map and
its degree over (loop) x (t-line) is computed as a sum of signed spherical
triangle areas.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .qgraph import QGraph, trace_loops

__all__ = [
    "PairLift", "StretchParams", "delta_ratio", "stretch_map", "g_normalized", "cutoff_profile",
    "v_map", "u_map", "winding_number", "degree_integral", "rescale_difference",
    "DegenerateValueError", "ResolutionWarning",
]


class DegenerateValueError(ValueError):
    """Raised on the diagonal zeta_1 = zeta_2 or a vanishing normalisation."""


class ResolutionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PairLift:
    zeta1: tuple  # (phi, alpha)
    zeta2: tuple
    z: complex = 0j

    @property
    def dphi(self):
        return np.asarray(self.zeta1[0], complex) - np.asarray(self.zeta2[0], complex)

    @property
    def dalpha(self):
        return np.asarray(self.zeta1[1], float) - np.asarray(self.zeta2[1], float)


@dataclass(frozen=True)
class StretchParams:
    delta: float = 0.5
    eps: float = 0.1
    regular: bool = True

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.eps <= 0:
            raise ValueError("eps must be positive")

    @property
    def D(self) -> float:
        return 1.0 / np.sqrt(1.0 / self.delta - 1.0)


def _diffs(xi):
    if isinstance(xi, PairLift):
        return xi.dphi, xi.dalpha
    dphi, dalpha = xi
    return np.asarray(dphi, complex), np.asarray(dalpha, float)


def delta_ratio(xi) -> np.ndarray:
    """|a|^2 / (|a|^2 + |dphi|^2); ``xi`` is a PairLift or (dphi, dalpha)."""
    dphi, da = _diffs(xi)
    num = da**2
    den = num + np.abs(dphi) ** 2
    if np.any(den == 0):
        raise DegenerateValueError("Delta undefined on the diagonal")
    return num / den


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3 - 2 * x)


def stretch_map(p, sp: StretchParams) -> np.ndarray:
    """Axially symmetric, norm-preserving clamp of near-polar points to the poles.

    With rho = z^2/|p|^2: identity for rho < delta/2, the pole sgn(z)|p| for
    rho > delta, and in between the colatitude is scaled by 1 - smoothstep.
    """
    p = np.asarray(p, float)
    r = np.linalg.norm(p, axis=-1)
    zc = p[..., 2]
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.where(r > 0, zc**2 / np.where(r > 0, r, 1) ** 2, 0.0)
    d = sp.delta
    S = _smoothstep((rho - d / 2) / (d / 2))
    out = p.copy()
    band = (rho >= d / 2) & (r > 0)
    if np.any(band):
        pb = p[band]
        rb = r[band]
        sg = np.where(pb[:, 2] >= 0, 1.0, -1.0)
        col = np.arccos(np.clip(np.abs(pb[:, 2]) / rb, -1, 1))
        col_new = col * (1 - S[band])
        rxy = np.hypot(pb[:, 0], pb[:, 1])
        ex = np.where(rxy > 0, pb[:, 0] / np.where(rxy > 0, rxy, 1), 1.0)
        ey = np.where(rxy > 0, pb[:, 1] / np.where(rxy > 0, rxy, 1), 0.0)
        sn = np.sin(col_new)
        q = np.stack([rb * sn * ex, rb * sn * ey, sg * rb * np.cos(col_new)], -1)
        full = rho[band] > d
        q[full] = np.stack([np.zeros(full.sum()), np.zeros(full.sum()), sg[full] * rb[full]], -1)
        out[band] = q
    return out


def g_normalized(xi, sp: StretchParams) -> np.ndarray:
    """(phi_1 - phi_2) / max(|alpha_1 - alpha_2|, D eps)."""
    dphi, da = _diffs(xi)
    if np.any((dphi == 0) & (da == 0)):
        raise DegenerateValueError("g undefined on the diagonal")
    return dphi / np.maximum(np.abs(da), sp.D * sp.eps)


def cutoff_profile(s, sp: StretchParams) -> np.ndarray:
    """phi_delta: 1 below delta, 0 above 2 delta, smoothstep between."""
    return 1.0 - _smoothstep((np.asarray(s, float) - sp.delta) / sp.delta)


def v_map(xi, t, sp: StretchParams) -> np.ndarray:
    dphi, da = _diffs(xi)
    g = g_normalized((dphi, da), sp)
    third = da + np.asarray(t, float) * cutoff_profile(delta_ratio((dphi, da)), sp)
    g, third = np.broadcast_arrays(g, third)
    vec = np.stack([g.real, g.imag, third], -1)
    nrm = np.linalg.norm(vec, axis=-1)
    if np.any(nrm <= 1e-14):
        raise DegenerateValueError("v has a vanishing denominator (diagonal contamination)")
    return vec / nrm[..., None]


def u_map(xi, t, sp: StretchParams) -> np.ndarray:
    """u = S_delta o v, a point of S^2."""
    return stretch_map(v_map(xi, t, sp), sp)


def is_regular_value(delta_samples, delta: float, tol: float = 1e-3) -> bool:
    """False if any sampled Delta lies within ``tol`` of delta."""
    return not bool(np.any(np.abs(np.asarray(delta_samples) - delta) < tol))


# winding numbers ---------------------------------------------------------------------

@dataclass
class PairLoop:
    theta: np.ndarray
    dphi: np.ndarray
    dalpha: np.ndarray
    laps: int


def pair_loop(source, pair=(0, 1), center: complex = 0j, rho: float = 0.3, n: int = 720) -> PairLoop:
    """The difference of a branch pair along the lifted loop over a circle.

    ``source`` is a QGraph or a sampler.  The pair is followed through the
    monodromy until it closes as an ordered pair, so the loop may cover the
    circle several times.
    """
    lp = trace_loops(source, center, rho, n, tuples=[tuple(pair)])[0]
    v = lp.values  # (M, 2, 3)
    d = v[:, 0] - v[:, 1]
    return PairLoop(lp.theta, d[:, 0] + 1j * d[:, 1], d[:, 2], lp.laps)


def _loop_winding(source, pair, center, rho, n, tol) -> int:
    pl = pair_loop(source, pair, center, rho, n)
    d = pl.dphi
    if np.min(np.abs(d)) <= tol * max(1.0, np.max(np.abs(d))):
        raise DegenerateValueError("phi_i - phi_j vanishes on the loop")
    steps = np.angle(np.roll(d, -1) / d)
    if np.max(np.abs(steps)) >= np.pi / 2:
        raise DegenerateValueError("loop under-resolved: phase step of pi/2 or more")
    return int(round(steps.sum() / (2 * np.pi)))


def winding_number(source, pair=(0, 1), center: complex = 0j, rho: float = 0.3,
                   n: int = 720, tol: float = 1e-12) -> int:
    """Winding of (phi_i - phi_j)/|phi_i - phi_j| along the lifted closed loop.

    Nearest-value matching silently swaps an antipodal pair when the true
    phase step exceeds pi/2, so the step bound alone cannot detect
    under-resolution; the count is repeated with 2n samples and must agree.
    """
    w = _loop_winding(source, pair, center, rho, n, tol)
    if _loop_winding(source, pair, center, rho, 2 * n, tol) != w:
        raise DegenerateValueError("loop under-resolved: winding changes under refinement")
    return w


# degrees -----------------------------------------------------------------------------

def spherical_triangle_areas(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Signed areas of geodesic triangles with unit vertices (Van Oosterom-Strackee)."""
    num = np.einsum("...i,...i->...", a, np.cross(b, c))
    den = 1 + np.einsum("...i,...i->...", a, b) + np.einsum("...i,...i->...", b, c) \
        + np.einsum("...i,...i->...", c, a)
    return 2 * np.arctan2(num, den)


def sphere_map_degree(U: np.ndarray, periodic: bool = True) -> float:
    """Normalised pulled-back area of a grid of unit vectors U (M, N, 3).

    The first axis is the loop parameter (periodic), the second the t-line.
    """
    A = U
    B = np.roll(U, -1, axis=0) if periodic else U[1:]
    if not periodic:
        A = U[:-1]
    A0, A1 = A[:, :-1], A[:, 1:]
    B0, B1 = B[:, :-1], B[:, 1:]
    tot = spherical_triangle_areas(A0, B0, B1).sum() + spherical_triangle_areas(A0, B1, A1).sum()
    return float(tot / (4 * np.pi))


@dataclass
class DegreeReport:
    value: float
    nearest: int
    distance: float
    laps: int
    t_max: float


def degree_integral(source, pair=(0, 1), center: complex = 0j, rho: float = 0.3,
                    sp: StretchParams | None = None, n_loop: int = 720, n_t: int = 801,
                    t_max: float | None = None) -> DegreeReport:
    """int of u^* omega over (lifted loop) x [-T, T], omega the unit-mass area form.

    T defaults to 4/eps.  The t-samples are graded towards t = 0, where the
    map turns over; a ResolutionWarning is issued when the result is more
    than 0.2 from an integer.
    """
    sp = StretchParams() if sp is None else sp
    T = 4.0 / sp.eps if t_max is None else float(t_max)
    if T < 2.0 / sp.eps:
        raise ValueError("t-interval must contain [-2/eps, 2/eps]")
    pl = pair_loop(source, pair, center, rho, n_loop)
    x = np.linspace(-1, 1, n_t)
    t = T * np.sinh(4 * x) / np.sinh(4)
    U = u_map((pl.dphi[:, None], pl.dalpha[:, None]), t[None, :], sp)
    val = sphere_map_degree(U)
    k = int(round(val))
    dist = abs(val - k)
    if dist > 0.2:
        warnings.warn(f"degree integral {val:.3f} is far from an integer", ResolutionWarning)
    return DegreeReport(val, k, dist, pl.laps, T)


def degree_from_map(u_fn, n_theta: int = 400, n_t: int = 400, t_max: float = 1.0) -> float:
    """Degree of a map u(theta, t) from a (periodic theta) x [-t_max, t_max] grid."""
    th = np.linspace(0, 2 * np.pi, n_theta, endpoint=False)
    t = np.linspace(-t_max, t_max, n_t)
    U = np.asarray(u_fn(th[:, None], t[None, :]), float)
    return sphere_map_degree(U)


# blow-up of a pair difference --------------------------------------------------------

@dataclass
class RescaledPair:
    rho: float
    z: np.ndarray  # unit-disk sample points
    theta2: np.ndarray  # (Theta^rho)^2, single valued for a swapped pair
    theta_abs: np.ndarray
    xi_abs: np.ndarray
    sup_xi: float
    norm: float


def _pair_values(source, z):
    ev = source.evaluate if isinstance(source, QGraph) else source
    phi, alpha = ev(z)
    return np.asarray(phi, complex), np.asarray(alpha, float)


def rescale_difference(source, pair=(0, 1), z_l: complex = 0j, rho: float = 0.1,
                       n: int = 64, isolation_tol: float = 1e-10) -> RescaledPair:
    """(Theta^rho, Xi^rho) on the unit disk for the branch pair (i, j).

    The pair difference is defined up to the monodromy; its square and
    absolute values are returned, which are single valued.  Raises if the
    difference vanishes away from z_l (non-isolated coincidence).
    """
    s = np.linspace(-1, 1, n)
    zz = s[:, None] + 1j * s[None, :]
    zz = zz[np.abs(zz) <= 1]
    phi, alpha = _pair_values(source, z_l + rho * zz)
    i, j = pair
    dphi = phi[..., i] - phi[..., j]
    da = alpha[..., i] - alpha[..., j]
    norm = float(np.max(np.abs(dphi)))
    if norm == 0:
        raise DegenerateValueError("pair coincides identically: not an isolated coincidence")
    away = np.abs(zz) > 2.0 / n
    if np.any(np.abs(dphi[away]) < isolation_tol * norm):
        raise DegenerateValueError("coincidence point is not isolated")
    th = dphi / norm
    xi = np.abs(da) / norm
    return RescaledPair(rho, zz, th**2, np.abs(th), xi, float(xi.max()), norm)


@dataclass
class ThetaFit:
    lam: complex
    mu: complex
    tau: float
    residual: float


def fit_theta_model(rp: RescaledPair) -> ThetaFit:
    """Fit Theta^2 = (lam z + mu zbar)^(2 tau) on the unit disk.

    tau comes from the radial log-log slope of |Theta|, rounded to a half
    integer; lam and mu by least squares on the complex residual.
    """
    z = rp.z
    r = np.abs(z)
    sel = r > 0.2
    slope = np.polyfit(np.log(r[sel]), np.log(np.maximum(rp.theta_abs[sel], 1e-300)), 1)[0]
    tau = max(0.5, round(2 * slope) / 2)
    m = int(round(2 * tau))
    target = rp.theta2[sel]
    zs = z[sel]

    def res(p):
        lam = p[0] + 1j * p[1]
        mu = p[2] + 1j * p[3]
        d = (lam * zs + mu * np.conj(zs)) ** m - target
        return np.concatenate([d.real, d.imag])

    # initial lam from the mean phase, mu = 0
    lam0 = np.mean(target / zs**m)
    lam0 = np.abs(lam0) ** (1 / m) * np.exp(1j * np.angle(lam0) / m)
    best = None
    for kk in range(m):  # the m-th roots of lam0^m are all candidates
        l0 = lam0 * np.exp(2j * np.pi * kk / m)
        sol = least_squares(res, [l0.real, l0.imag, 0.0, 0.0], xtol=1e-14, ftol=1e-14)
        if best is None or sol.cost < best.cost:
            best = sol
    p = best.x
    rr = float(np.sqrt(2 * best.cost / len(zs)))
    return ThetaFit(p[0] + 1j * p[1], p[2] + 1j * p[3], tau, rr)
