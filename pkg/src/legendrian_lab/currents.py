"""Discrete integral 2-currents: oriented triangle soups with integer weights.

Vertices live either on S^5 (in R^6) or in a flat chart R^5.  The triangle
(v0, v1, v2) carries the orientation of (v1 - v0) ^ (v2 - v0) times its
orientation flag, and a nonzero integer multiplicity.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ambient_geometry import Plane2, to_complex
from .qgraph import QGraph, stack_values, trace_loops

AREA_TOL = 1e-14


class PreconditionError(ValueError):
    """An operation's documented precondition does not hold."""


@dataclass
class DiscreteCurrent2:
    vertices: np.ndarray  # (T, 3, D)
    orientation: np.ndarray  # (T,) of +-1
    multiplicity: np.ndarray  # (T,) nonzero integers
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, float)
        T = self.vertices.shape[0]
        self.orientation = np.broadcast_to(np.asarray(self.orientation, int), (T,)).copy()
        self.multiplicity = np.broadcast_to(np.asarray(self.multiplicity, int), (T,)).copy()
        if self.vertices.ndim != 3 or self.vertices.shape[1] != 3:
            raise ValueError("vertices must have shape (T, 3, D)")
        if np.any(self.multiplicity == 0):
            raise ValueError("multiplicities must be nonzero integers")
        if not np.all(np.isin(self.orientation, (-1, 1))):
            raise ValueError("orientation flags must be +-1")
        if T and np.min(triangle_areas(self.vertices)) < AREA_TOL:
            raise ValueError("degenerate triangle (area < 1e-14)")

    @property
    def dim(self) -> int:
        return self.vertices.shape[2]

    @property
    def weights(self) -> np.ndarray:
        """Signed weights orientation * multiplicity."""
        return self.orientation * self.multiplicity

    def __len__(self):
        return self.vertices.shape[0]

    def subset(self, idx) -> "DiscreteCurrent2":
        return DiscreteCurrent2(self.vertices[idx], self.orientation[idx],
                                self.multiplicity[idx], dict(self.metadata))

    def scaled(self, m: int) -> "DiscreteCurrent2":
        return DiscreteCurrent2(self.vertices, self.orientation, self.multiplicity * m,
                                dict(self.metadata))

    def __add__(self, other: "DiscreteCurrent2") -> "DiscreteCurrent2":
        return DiscreteCurrent2(
            np.concatenate([self.vertices, other.vertices]),
            np.concatenate([self.orientation, other.orientation]),
            np.concatenate([self.multiplicity, other.multiplicity]),
            {**self.metadata, **other.metadata},
        )

    def rows(self) -> np.ndarray:
        T = len(self)
        v = self.vertices.reshape(T, -1)
        return np.column_stack([v, self.orientation, self.multiplicity])

    @classmethod
    def from_rows(cls, rows: np.ndarray, dim: int = 6) -> "DiscreteCurrent2":
        rows = np.atleast_2d(rows)
        v = rows[:, : 3 * dim].reshape(-1, 3, dim)
        return cls(v, rows[:, 3 * dim].astype(int), rows[:, 3 * dim + 1].astype(int))


def triangle_areas(v: np.ndarray) -> np.ndarray:
    a = v[:, 1] - v[:, 0]
    b = v[:, 2] - v[:, 0]
    aa = np.sum(a * a, 1)
    bb = np.sum(b * b, 1)
    ab = np.sum(a * b, 1)
    return 0.5 * np.sqrt(np.maximum(aa * bb - ab * ab, 0.0))


def triangle_frames(v: np.ndarray):
    """Orthonormal oriented (e1, e2) for each triangle, shape (T, 2, D)."""
    a = v[:, 1] - v[:, 0]
    b = v[:, 2] - v[:, 0]
    e1 = a / np.linalg.norm(a, axis=1, keepdims=True)
    b = b - np.sum(b * e1, 1, keepdims=True) * e1
    e2 = b / np.linalg.norm(b, axis=1, keepdims=True)
    return np.stack([e1, e2], 1)


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float


def _disk_sector_area(a: np.ndarray, b: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Signed area of disk(0, R) intersected with the triangle (0, a, b); 2D inputs."""
    d = b - a
    A = np.sum(d * d, -1)
    B = 2 * np.sum(a * d, -1)
    C = np.sum(a * a, -1) - R * R
    disc = B * B - 4 * A * C
    has = (disc > 0) & (A > 0)
    sq = np.sqrt(np.where(has, disc, 0.0))
    A_ = np.where(A > 0, A, 1.0)
    t1 = np.where(has, np.clip((-B - sq) / (2 * A_), 0, 1), 1.0)
    t2 = np.where(has, np.clip((-B + sq) / (2 * A_), 0, 1), 1.0)
    pts = [a, a + t1[..., None] * d, a + t2[..., None] * d, b]
    total = np.zeros(a.shape[:-1])
    for p, q in zip(pts[:-1], pts[1:]):
        cr = p[..., 0] * q[..., 1] - p[..., 1] * q[..., 0]
        dt = np.sum(p * q, -1)
        mid = 0.5 * (p + q)
        inside = np.sum(mid * mid, -1) < R * R
        total += np.where(inside, 0.5 * cr, 0.5 * R * R * np.arctan2(cr, dt))
    return total


def clipped_areas(v: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    """Exact area of each triangle intersected with the ball B(center, radius).

    The ball meets the triangle's plane in a disk; the triangle-disk area is
    summed edge by edge from the disk centre.
    """
    v0 = v[:, 0]
    fr = triangle_frames(v)
    rel = v - center[None, None, :]
    # 2D coordinates in the triangle plane relative to the foot of the centre
    c2 = np.einsum("tkd,td->tk", fr, -rel[:, 0])  # centre projected, relative to v0
    foot = v0 + np.einsum("tk,tkd->td", c2, fr)
    dist2 = np.sum((foot - center) ** 2, 1)
    R2 = radius * radius - dist2
    out = np.zeros(len(v))
    ok = R2 > 0
    if not ok.any():
        return out
    P = np.einsum("tvd,tkd->tvk", v[ok] - foot[ok, None, :], fr[ok])  # (T, 3, 2)
    R = np.sqrt(R2[ok])
    acc = np.zeros(ok.sum())
    for i in range(3):
        acc += _disk_sector_area(P[:, i], P[:, (i + 1) % 3], R)
    acc = np.abs(acc)
    # sector sums of triangles missing the disk cancel only up to roundoff
    acc[acc < 1e-13 * (R * R + triangle_areas(v[ok]))] = 0.0
    out[ok] = acc
    return out


def mass(C: DiscreteCurrent2, region: Ball | None = None) -> float:
    """Sum of |multiplicity| * area, clipped exactly to a ball if given."""
    if region is None:
        a = triangle_areas(C.vertices)
    else:
        a = clipped_areas(C.vertices, np.asarray(region.center, float), region.radius)
    return float(np.sum(np.abs(C.multiplicity) * a))


def dilate(C: DiscreteCurrent2, x0, r: float) -> DiscreteCurrent2:
    """Push forward under x -> (x - x0)/r in the ambient coordinates."""
    if r <= 0:
        raise ValueError("dilation factor must be positive")
    x0 = np.asarray(x0, float)
    return DiscreteCurrent2((C.vertices - x0) / r, C.orientation, C.multiplicity,
                            dict(C.metadata))


def density_ratio(C: DiscreteCurrent2, x0, r: float) -> float:
    if r <= 0:
        raise ValueError("radius must be positive")
    return mass(C, Ball(np.asarray(x0, float), r)) / (np.pi * r * r)


def density_ladder(C: DiscreteCurrent2, x0, radii) -> np.ndarray:
    return np.array([density_ratio(C, x0, r) for r in radii])


def is_monotone_nonincreasing(values, slack: float = 0.02) -> bool:
    """Each value at a smaller radius is at most (1 + slack) times the previous."""
    v = np.asarray(values, float)
    return bool(np.all(v[1:] <= v[:-1] * (1 + slack) + 1e-15))


# boundaries ------------------------------------------------------------------

def boundary_edges(C: DiscreteCurrent2, decimals: int = 10):
    """Edges of the 1-current boundary with their net integer weights.

    Returns a list of (start, end, weight); vertices are identified after
    rounding to ``decimals`` places.
    """
    T = len(C)
    if T == 0:
        return []
    v = C.vertices.reshape(-1, C.dim)
    _, first, ids = np.unique(np.round(v, decimals), axis=0, return_index=True,
                              return_inverse=True)
    ids = ids.reshape(T, 3)
    a = np.concatenate([ids[:, 0], ids[:, 1], ids[:, 2]])
    b = np.concatenate([ids[:, 1], ids[:, 2], ids[:, 0]])
    w = np.tile(C.weights, 3)
    sgn = np.where(a < b, 1, -1)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    keys, inv = np.unique(np.stack([lo, hi], 1), axis=0, return_inverse=True)
    net = np.zeros(len(keys), dtype=int)
    np.add.at(net, inv.ravel(), (w * sgn).astype(int))
    out = []
    for (i, j), m in zip(keys, net):
        if m != 0:
            out.append((v[first[i]], v[first[j]], int(m)))
    return out


def mesh_length(C: DiscreteCurrent2) -> float:
    v = C.vertices
    e = [np.linalg.norm(v[:, (i + 1) % 3] - v[:, i], axis=1) for i in range(3)]
    return float(np.max(e)) if len(v) else 0.0


# Kronecker index ---------------------------------------------------------------

@dataclass
class LeafSlice:
    """A leaf {x : tau(x) = w} with transverse coordinates tau.

    ``domain`` is a ball; the leaf's boundary is its intersection with the
    ball's sphere.  For currents on S^5 tau is the leaf label of a
    FoliationChart; for flat currents it is a linear projection.
    """

    w: np.ndarray
    domain: Ball
    chart: object = None
    basis: np.ndarray | None = None  # (2, D) for flat leaves
    origin: np.ndarray | None = None

    def tau(self, x: np.ndarray) -> np.ndarray:
        if self.chart is not None:
            # mesh vertices repeat across triangles; invert the chart once per point
            x = np.asarray(x, float)
            flat = x.reshape(-1, x.shape[-1])
            uniq, inv = np.unique(flat, axis=0, return_inverse=True)
            t = self.chart.transverse_coords(uniq)[inv.reshape(-1)]
            return t.reshape(x.shape[:-1] + (2,)) - self.w
        return (x - self.origin) @ self.basis.T - self.w

    def moved(self, dw) -> "LeafSlice":
        return LeafSlice(self.w + np.asarray(dw, float), self.domain, self.chart,
                         self.basis, self.origin)


def leaf_slice(chart, w, radius: float | None = None) -> LeafSlice:
    r = chart.radius if radius is None else radius
    return LeafSlice(np.array([np.real(w), np.imag(w)], float),
                     Ball(chart.center.real, r), chart=chart)


def flat_leaf(origin, plane: Plane2, w, radius: float) -> LeafSlice:
    """3-plane through origin + w orthogonal to ``plane`` (flat chart currents)."""
    basis = np.stack([plane.e1, plane.e2])
    o = np.asarray(origin, float)
    return LeafSlice(np.asarray(w, float), Ball(o, radius), basis=basis, origin=o)


def _crossing_sum(tau: np.ndarray, weights: np.ndarray, tol: float):
    t0, t1, t2 = tau[:, 0], tau[:, 1], tau[:, 2]
    e1 = t1 - t0
    e2 = t2 - t0
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    # barycentric coordinates of the origin
    with np.errstate(divide="ignore", invalid="ignore"):
        l1 = (-t0[:, 0] * e2[:, 1] + t0[:, 1] * e2[:, 0]) / det
        l2 = (-e1[:, 0] * t0[:, 1] + e1[:, 1] * t0[:, 0]) / det
    l0 = 1 - l1 - l2
    lam = np.stack([l0, l1, l2], 1)
    inside = np.all(lam > 0, 1) & np.isfinite(det) & (det != 0)
    scale = np.maximum(np.sum(e1 * e1, 1), np.sum(e2 * e2, 1))
    near_edge = np.any(np.abs(lam) < tol, 1) & np.all(lam > -tol, 1)
    tangential = inside & (np.abs(det) < 1e-6 * scale)
    return int(np.sum(weights[inside] * np.sign(det[inside]))), bool(np.any(near_edge)), \
        bool(np.any(tangential)), int(inside.sum())


@dataclass
class KroneckerResult:
    index: int
    crossings: int
    margin: float
    retries: int


def kronecker_index(S: DiscreteCurrent2, leaf: LeafSlice, margin: float | None = None,
                    rng=None, max_retries: int = 5) -> KroneckerResult:
    """Signed count of triangle-leaf crossings, weighted by multiplicity.

    A crossing of a triangle with the leaf is a preimage of 0 under the
    transverse coordinates; its sign is the orientation of the projected
    triangle, which equals the sign of T S ^ T Sigma.  Checks the boundary
    conditions spt S cap spt d(Sigma) = 0 and spt Sigma cap spt dS = 0 with a
    margin of two local mesh lengths (edges of triangles meeting the leaf's
    domain ball).
    """
    c = np.asarray(leaf.domain.center, float)
    dist = np.linalg.norm(S.vertices - c, axis=2)
    inner = np.all(dist < leaf.domain.radius, 1)
    straddle = np.any(dist < leaf.domain.radius, 1) & ~inner
    if margin is None:
        near = inner | straddle
        margin = 2 * mesh_length(S.subset(near)) if near.any() else 0.0
    if not inner.any():
        return KroneckerResult(0, 0, margin, 0)
    sub = S.subset(inner)
    tau = leaf.tau(sub.vertices.reshape(-1, S.dim)).reshape(-1, 3, 2)
    # the leaf must keep off the boundary of S: edges of the clipped current
    # that are boundary edges of S itself
    bd = boundary_edges(S)
    if bd:
        P = np.array([b[0] for b in bd])
        Qp = np.array([b[1] for b in bd])
        inb = (np.linalg.norm(P - c, axis=1) < leaf.domain.radius) & (
            np.linalg.norm(Qp - c, axis=1) < leaf.domain.radius)
        if inb.any():
            tp = leaf.tau(P[inb])
            tq = leaf.tau(Qp[inb])
            if np.min(_seg_dist0(tp, tq)) < margin:
                raise PreconditionError("leaf passes within the margin of the boundary of S")
    # S must keep off the leaf's boundary: triangles straddling the domain
    # sphere must not come near the leaf
    if straddle.any():
        st = S.vertices[straddle]
        ok = np.all(np.linalg.norm(st - c, axis=2) < leaf.domain.radius * 1.5, 1)
        if ok.any():
            try:
                tst = leaf.tau(st[ok].reshape(-1, S.dim)).reshape(-1, 3, 2)
                dmin = np.min(np.linalg.norm(tst, axis=2), 1)
                if np.any(dmin < margin):
                    raise PreconditionError("S meets the boundary of the leaf")
            except PreconditionError:
                raise
            except Exception:
                pass
    rng = np.random.default_rng(0) if rng is None else rng
    retries = 0
    shift = np.zeros(2)
    while True:
        idx, near, tang, cnt = _crossing_sum(tau - shift, sub.weights, 1e-12)
        if not near and not tang:
            return KroneckerResult(idx, cnt, margin, retries)
        retries += 1
        if retries > max_retries:
            raise PreconditionError("degenerate (edge or tangential) leaf crossing persists")
        shift = rng.normal(size=2) * margin * 1e-3


def _seg_dist0(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Distance from the origin to segments [p, q] in R^2."""
    d = q - p
    L = np.sum(d * d, 1)
    t = np.clip(-np.sum(p * d, 1) / np.where(L > 0, L, 1), 0, 1)
    x = p + t[:, None] * d
    return np.linalg.norm(x, axis=1)


# slices of graph currents -------------------------------------------------------

@dataclass
class Arc:
    points: np.ndarray  # (M, 5) closed polyline in (s, t, Re phi, Im phi, alpha)
    multiplicity: int
    laps: int


@dataclass
class Slice1:
    radius: float
    arcs: list

    def boundary_pairing(self, f) -> float:
        """<d slice, f> = sum over arcs of m (f(end) - f(start))."""
        tot = 0.0
        for a in self.arcs:
            tot += a.multiplicity * (f(a.points[-1]) - f(a.points[0]))
        return float(tot)


def slice_circle(qg: QGraph, r: float, n: int = 720, max_nudges: int = 10) -> Slice1:
    """Slice <C, |z|, r> of the graph current of a QGraph.

    r is nudged outward by one mesh length while a branch collision lies
    within two mesh lengths of the circle.
    """
    h = qg.h
    rr = r
    for k in range(max_nudges + 1):
        if _regular_radius(qg, rr, 2 * h):
            break
        rr += h
    else:
        raise PreconditionError("no regular radius found near r")
    loops = trace_loops(qg, 0.0, rr, n)
    arcs = []
    for lp in loops:
        z = np.append(lp.z, lp.z[0])
        vals = np.concatenate([lp.values[:, 0], lp.values[:1, 0]])
        pts = np.column_stack([z.real, z.imag, vals])
        for a in arcs:
            if a.points.shape == pts.shape and np.max(np.abs(a.points - pts)) < 1e-9:
                a.multiplicity += 1
                break
        else:
            arcs.append(Arc(pts, 1, lp.laps))
    return Slice1(rr, arcs)


def _regular_radius(qg: QGraph, r: float, band: float) -> bool:
    pts = list(qg.branch_points)
    for bp in pts:
        if abs(abs(bp) - r) < band:
            return False
    th = np.linspace(0, 2 * np.pi, 360, endpoint=False)
    z = r * np.exp(1j * th)
    phi, alpha = qg.evaluate(z)
    from .qgraph import collision_gap

    gap = collision_gap(stack_values(np.asarray(phi), np.asarray(alpha)))
    if qg.Q > 1 and np.all(gap < 1e-12):
        return True  # coincident sheets everywhere, e.g. Q copies of a disk
    return bool(np.all((gap > 1e-9) | (gap < 1e-12)))


def current_from_qgraph(qg: QGraph, radius: float | None = None) -> DiscreteCurrent2:
    """Triangulated graph current in the flat chart R^5 = (s, t, b, c, alpha).

    Each grid square gives two triangles; on each triangle the Q sheets are
    obtained by matching the vertex values to the first vertex.
    """
    from .qgraph import match_to

    R = qg.R if radius is None else radius
    n = qg.n
    V = stack_values(qg.phi, qg.alpha)
    S, T = np.meshgrid(qg.s, qg.s, indexing="ij")
    tris = []
    for (a, b, c) in (((0, 0), (1, 0), (1, 1)), ((0, 0), (1, 1), (0, 1))):
        ia = (slice(a[0], n - 1 + a[0]), slice(a[1], n - 1 + a[1]))
        ib = (slice(b[0], n - 1 + b[0]), slice(b[1], n - 1 + b[1]))
        ic = (slice(c[0], n - 1 + c[0]), slice(c[1], n - 1 + c[1]))
        va = V[ia]
        vb = match_to(va, V[ib])
        vc = match_to(va, V[ic])
        za = np.stack([S[ia], T[ia]], -1)
        zb = np.stack([S[ib], T[ib]], -1)
        zc = np.stack([S[ic], T[ic]], -1)
        cen = (za + zb + zc) / 3
        keep = np.hypot(cen[..., 0], cen[..., 1]) <= R
        for q in range(qg.Q):
            pa = np.concatenate([za, va[..., q, :]], -1)[keep]
            pb = np.concatenate([zb, vb[..., q, :]], -1)[keep]
            pc = np.concatenate([zc, vc[..., q, :]], -1)[keep]
            tris.append(np.stack([pa, pb, pc], 1))
    v = np.concatenate(tris)
    return DiscreteCurrent2(v, 1, 1, {"source": qg.name})


# tangent cones ----------------------------------------------------------------

@dataclass
class ConeComponent:
    plane: Plane2
    multiplicity: int
    mass_fraction: float


@dataclass
class TangentConeEstimate:
    components: list
    residual: float
    radius: float = 0.0
    history: list = field(default_factory=list)
    flag: str = ""

    def to_json(self) -> dict:
        return {
            "components": [
                {"e1": c.plane.e1.tolist(), "e2": c.plane.e2.tolist(),
                 "multiplicity": c.multiplicity, "mass_fraction": c.mass_fraction}
                for c in self.components
            ],
            "residual": self.residual,
            "radius": self.radius,
            "flag": self.flag,
            "history": self.history,
        }


def plane_angle(P1: np.ndarray, P2: np.ndarray) -> np.ndarray:
    """Largest principal angle between 2-planes given as (..., 2, D) orthonormal rows."""
    M = np.einsum("...id,...jd->...ij", P1, P2)
    sv = np.linalg.svd(M, compute_uv=False)
    return np.arccos(np.clip(sv[..., -1], -1.0, 1.0))


def _mean_plane(frames: np.ndarray, w: np.ndarray, oriented: np.ndarray) -> Plane2:
    """Weighted mean of projectors; orientation from the mean 2-vector."""
    proj = np.einsum("t,tkd,tke->de", w, frames, frames)
    vals, vecs = np.linalg.eigh(proj)
    e1, e2 = vecs[:, -1], vecs[:, -2]
    biv = np.einsum("t,td,te->de", w * oriented, frames[:, 0], frames[:, 1])
    biv = biv - biv.T
    if e1 @ biv @ e2 < 0:
        e2 = -e2
    return Plane2(e1, e2)


def _pairwise_plane_angles(frames: np.ndarray) -> np.ndarray:
    """Condensed matrix of largest principal angles between all pairs."""
    M = np.einsum("aid,bjd->abij", frames, frames)
    fro = np.sum(M * M, (-1, -2))
    det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    smin2 = 0.5 * (fro - np.sqrt(np.maximum(fro * fro - 4 * det * det, 0.0)))
    ang = np.arccos(np.clip(np.sqrt(np.maximum(smin2, 0.0)), -1.0, 1.0))
    iu = np.triu_indices(len(frames), 1)
    return ang[iu]


def _cluster(frames: np.ndarray, w: np.ndarray, tol: float, max_link: int = 1500):
    """Single-linkage clustering of triangle planes at angular threshold tol.

    A curved sheet chains into one cluster while planes separated by more
    than tol with nothing in between stay apart.  Above ``max_link``
    triangles the heaviest ones are linked and the rest join the nearest
    cluster mean.
    """
    from scipy.cluster.hierarchy import fcluster, linkage

    T = len(frames)
    if T == 1:
        labels = np.zeros(1, int)
    else:
        core = np.argsort(-w)[:max_link]
        Z = linkage(_pairwise_plane_angles(frames[core]), method="single")
        lab_core = fcluster(Z, t=tol, criterion="distance") - 1
        labels = np.full(T, -1)
        labels[core] = lab_core
    K = labels.max() + 1
    reps = []
    for k in range(K):
        sel = labels == k
        pl = _mean_plane(frames[sel], w[sel], np.ones(sel.sum()))
        reps.append(np.stack([pl.e1, pl.e2]))
    reps = np.array(reps)
    rest = labels < 0
    if rest.any():
        labels[rest] = np.argmin(plane_angle(frames[rest][:, None], reps[None]), 1)
    spread = plane_angle(frames, reps[labels])
    return labels, reps, spread


def tangent_cone(C: DiscreteCurrent2, x0, radii, cluster_tol: float = 0.05,
                 min_fraction: float = 0.02) -> TangentConeEstimate:
    """Cluster blown-up triangle planes near x0 into a sum of disks.

    At each radius r the triangles meeting B_r(x0) are clustered by largest
    principal angle (single linkage).  Each cluster's
    multiplicity is the Kronecker index of the cluster against a leaf (a
    transversal slice) crossing it at distance r/2 from x0.  The estimate at
    the smallest radius is returned; ``history`` keeps all radii.
    """
    radii = sorted(np.asarray(radii, float), reverse=True)
    if len(radii) < 3 or radii[0] / radii[-1] < 10 - 1e-9:
        raise PreconditionError("need at least 3 radii spanning one decade")
    x0 = np.asarray(x0, float)
    on_sphere = C.dim == 6 and abs(np.linalg.norm(x0) - 1) < 1e-9
    history = []
    est = None
    residuals = []
    for r in radii:
        area = clipped_areas(C.vertices, x0, r)
        sel = area > 1e-12 * r * r
        if not sel.any():
            raise PreconditionError("no support near x0")
        v = C.vertices[sel]
        w = area[sel] * np.abs(C.multiplicity[sel])
        frames = triangle_frames(v)
        labels, reps, spread = _cluster(frames, w, cluster_tol)
        comps = []
        res = 0.0
        tot = w.sum()
        for k in range(len(reps)):
            ks = labels == k
            frac = float(w[ks].sum() / tot)
            if frac < min_fraction:
                continue
            pl = _mean_plane(frames[ks], w[ks], C.orientation[sel][ks] * np.sign(C.multiplicity[sel][ks]))
            sub = C.subset(np.nonzero(sel)[0][ks])
            m = _cluster_multiplicity(sub, x0, pl, r, on_sphere)
            res = max(res, float(spread[ks].max()))
            comps.append(ConeComponent(pl, abs(m), frac))
        residuals.append(res)
        est = TangentConeEstimate(comps, res, r)
        history.append({"radius": r, "n_planes": len(comps), "residual": res,
                        "multiplicities": [c.multiplicity for c in comps],
                        "mass_fractions": [c.mass_fraction for c in comps],
                        "planes": [[c.plane.e1.tolist(), c.plane.e2.tolist()] for c in comps]})
    est.history = history
    if len(residuals) >= 2 and residuals[-1] >= residuals[0] and residuals[0] > 1e-9:
        est.flag = "no cone detected at this resolution"
    elif any(c.multiplicity == 0 for c in est.components):
        # a cluster with mass but no crossing: its triangles exceed the leaf domain
        est.flag = "multiplicity unresolved at this mesh"
    return est


def _cluster_multiplicity(sub: DiscreteCurrent2, x0, plane: Plane2, r: float,
                          on_sphere: bool) -> int:
    if on_sphere:
        from .ambient_geometry import SpherePoint, horizontal_projection, j_apply
        from .foliations import chart_with_base_plane

        e1 = horizontal_projection(x0, plane.e1)
        e1 /= np.linalg.norm(e1)
        base = Plane2(e1, j_apply(x0, e1))
        ch = chart_with_base_plane(SpherePoint.normalized(to_complex(x0)), base)
        # orient the leaf label plane like the cluster plane
        sgn = 1 if np.dot(base.e2, plane.e2) * np.dot(base.e1, plane.e1) >= 0 else -1
        leaf = leaf_slice(ch, 0.5 * r, radius=1.5 * r)
        k = kronecker_index(sub, leaf, margin=min(2 * mesh_length(sub), 0.2 * r))
        return sgn * k.index
    leaf = flat_leaf(x0, plane, np.array([0.5 * r, 0.0]), 1.5 * r)
    return kronecker_index(sub, leaf, margin=min(2 * mesh_length(sub), 0.2 * r)).index


def planes_hausdorff(C: DiscreteCurrent2, planes, radius: float = 1.0) -> float:
    """Max distance from support points of C in the unit ball to the union of planes."""
    pts = np.concatenate([C.vertices.reshape(-1, C.dim), C.vertices.mean(1)])
    pts = pts[np.linalg.norm(pts, axis=1) <= radius]
    return float(np.max(_dist_to_planes(pts, planes))) if len(pts) else 0.0


def _dist_to_planes(pts: np.ndarray, planes) -> np.ndarray:
    ds = []
    for pl in planes:
        B = np.stack([pl.e1, pl.e2])
        proj = pts @ B.T @ B
        ds.append(np.linalg.norm(pts - proj, axis=1))
    return np.min(ds, 0)


def conic_neighborhood_check(C: DiscreteCurrent2, cone: TangentConeEstimate, eps: float,
                             R: float, x0=None, rho: float = 1.0):
    """Whether spt of the blow-up at scale rho meets A_R only inside E_eps.

    Support points x (vertices, edge midpoints, centroids) of the blow-up
    with R <= |x| <= 1 must satisfy dist(x, cone) <= eps |x|.  Returns
    (ok, max of dist(x, cone)/|x|).
    """
    if not 0 < R < 1:
        raise ValueError("need 0 < R < 1")
    D = C if x0 is None and rho == 1.0 else dilate(C, np.zeros(C.dim) if x0 is None else x0, rho)
    v = D.vertices
    pts = np.concatenate([v.reshape(-1, D.dim), v.mean(1),
                          0.5 * (v[:, 0] + v[:, 1]), 0.5 * (v[:, 1] + v[:, 2]),
                          0.5 * (v[:, 0] + v[:, 2])])
    nr = np.linalg.norm(pts, axis=1)
    sel = (nr >= R) & (nr <= 1)
    if not sel.any():
        return True, 0.0
    viol = _dist_to_planes(pts[sel], [c.plane for c in cone.components]) / nr[sel]
    m = float(viol.max())
    return bool(m <= eps), m


def lipschitz_cone_gap(qg: QGraph, x0: complex = 0.0, window: float = 0.1,
                       n_probe: int = 400, seed: int = 0) -> float:
    """max |(zeta, a) - (zeta', a')| / |z - z'| between the fiber over x0 and probes.

    Probes are uniform in the punctured window disk; each probe value is
    compared with the nearest value of the fiber over x0.
    """
    rng = np.random.default_rng(seed)
    rad = window * np.sqrt(rng.uniform(0.01, 1, n_probe))
    ang = rng.uniform(0, 2 * np.pi, n_probe)
    z = x0 + rad * np.exp(1j * ang)
    phi, alpha = qg.evaluate(z)
    p0, a0 = qg.evaluate(np.array([x0]))
    V = stack_values(np.asarray(phi), np.asarray(alpha))  # (n, Q, 3)
    V0 = stack_values(np.asarray(p0), np.asarray(a0))[0]  # (Q, 3)
    d = np.linalg.norm(V[:, :, None, :] - V0[None, None], axis=-1).min(-1)  # (n, Q)
    return float(np.max(d.max(1) / np.abs(z - x0)))
