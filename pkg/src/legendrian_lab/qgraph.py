"""Q-valued graphs over a disk and branch bookkeeping.

A QGraph stores, at each node of a uniform grid over [-R, R]^2, an unordered
list of Q values (phi, alpha) in C x R.  Labels are never global: derivatives
and loops use local nearest-value matching between neighbouring samples.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations
from typing import Callable, Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

Sampler = Callable[[np.ndarray], tuple]


@dataclass
class QGraph:
    R: float
    s: np.ndarray  # 1D node coordinates, shared by both axes
    phi: np.ndarray  # (n, n, Q) complex, index [i, j] <-> (s_i, t_j)
    alpha: np.ndarray  # (n, n, Q) real
    sampler: Optional[Sampler] = field(default=None, repr=False)
    branch_points: tuple = ()
    name: str = ""

    def __post_init__(self):
        if self.phi.shape != self.alpha.shape or self.phi.ndim != 3:
            raise ValueError("phi and alpha must both have shape (n, n, Q)")

    @property
    def Q(self) -> int:
        return self.phi.shape[2]

    @property
    def n(self) -> int:
        return len(self.s)

    @property
    def h(self) -> float:
        return float(self.s[1] - self.s[0])

    @property
    def z(self) -> np.ndarray:
        return self.s[:, None] + 1j * self.s[None, :]

    def disk_mask(self, radius: float | None = None) -> np.ndarray:
        r = self.R if radius is None else radius
        return np.abs(self.z) <= r

    def evaluate(self, z: np.ndarray):
        """Unordered values at arbitrary points (analytic sampler if present)."""
        z = np.asarray(z, complex)
        if self.sampler is not None:
            return self.sampler(z)
        return _interpolate(self, z)

    def rows(self) -> np.ndarray:
        """Rows (s, t, branch, Re phi, Im phi, alpha) in node order."""
        n, Q = self.n, self.Q
        S, T = np.meshgrid(self.s, self.s, indexing="ij")
        out = np.empty((n, n, Q, 6))
        out[..., 0] = S[..., None]
        out[..., 1] = T[..., None]
        out[..., 2] = np.arange(Q)
        out[..., 3] = self.phi.real
        out[..., 4] = self.phi.imag
        out[..., 5] = self.alpha
        return out.reshape(-1, 6)


def qgraph_from_sampler(sampler: Sampler, R: float, n: int, name: str = "",
                        branch_points=(), pad: float = 1.0) -> QGraph:
    """Sample on n x n nodes over [-pad R, pad R]^2 (n even avoids a node at 0)."""
    s = np.linspace(-pad * R, pad * R, n)
    z = s[:, None] + 1j * s[None, :]
    phi, alpha = sampler(z)
    return QGraph(R, s, np.asarray(phi, complex), np.asarray(alpha, float), sampler,
                  tuple(branch_points), name)


def stack_values(phi: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """(..., Q) complex + (..., Q) real -> (..., Q, 3) real points of R^3."""
    return np.stack([phi.real, phi.imag, alpha], -1)


def average(qg: QGraph):
    """Nodewise mean (phi~, alpha~); symmetric, so labelling-independent."""
    return qg.phi.mean(axis=2), qg.alpha.mean(axis=2)


def _perms(Q: int) -> np.ndarray:
    return np.array(list(permutations(range(Q))), dtype=int)


def match_to(ref: np.ndarray, other: np.ndarray) -> np.ndarray:
    """Reorder ``other`` (..., Q, 3) to best match ``ref`` pointwise.

    Brute force over permutations (Q <= 5) with squared-distance cost.
    """
    Q = ref.shape[-2]
    if Q == 1:
        return other
    P = _perms(Q)
    # cost[..., p] = sum_k |ref_k - other_{P[p,k]}|^2
    d = np.sum((ref[..., :, None, :] - other[..., None, :, :]) ** 2, -1)  # (..., Q, Q)
    cost = np.zeros(ref.shape[:-2] + (len(P),))
    for k in range(Q):
        cost += d[..., k, P[:, k]]
    best = P[np.argmin(cost, -1)]  # (..., Q)
    return np.take_along_axis(other, best[..., None], axis=-2)


def collision_gap(vals: np.ndarray) -> np.ndarray:
    """Minimum pairwise distance between branches, (..., Q, 3) -> (...)."""
    Q = vals.shape[-2]
    if Q == 1:
        return np.full(vals.shape[:-2], np.inf)
    d = np.linalg.norm(vals[..., :, None, :] - vals[..., None, :, :], axis=-1)
    iu = np.triu_indices(Q, 1)
    return d[..., iu[0], iu[1]].min(-1)


@dataclass
class BranchDerivatives:
    ds: np.ndarray  # (n, n, Q, 3) derivative of (Re phi, Im phi, alpha) in s
    dt: np.ndarray
    valid: np.ndarray  # (n, n) nodes with well-defined local labelling
    collision: np.ndarray  # (n, n) nodes flagged as near a branch collision


def branch_derivatives(qg: QGraph, mask_radius_cells: int = 2) -> BranchDerivatives:
    """Second-order central differences with per-node local branch matching.

    Collisions are the nodes near declared branch points or, when none are
    declared, nodes where matching is ambiguous (branch gap below three
    matched jumps); they and nodes within ``mask_radius_cells`` are masked.
    One-sided first-order differences are used on the grid edge.
    """
    V = stack_values(qg.phi, qg.alpha)  # (n, n, Q, 3)
    n, h = qg.n, qg.h
    pad = np.pad(V, ((1, 1), (1, 1), (0, 0), (0, 0)), mode="edge")
    c = pad[1:-1, 1:-1]
    sp = match_to(c, pad[2:, 1:-1])
    sm = match_to(c, pad[:-2, 1:-1])
    tp = match_to(c, pad[1:-1, 2:])
    tm = match_to(c, pad[1:-1, :-2])
    i = np.arange(n)
    fs = np.where((i == 0) | (i == n - 1), 1.0, 2.0)[:, None, None, None]
    ds = (sp - sm) / (fs * h)
    dt = (tp - tm) / (fs.transpose(1, 0, 2, 3) * h)
    jump = np.max(
        np.stack([np.linalg.norm(x - c, axis=-1).max(-1) for x in (sp, sm, tp, tm)]), 0
    )
    if qg.branch_points:
        # declared singular set: branches that merely touch (e.g. both tending
        # to 0 under a cutoff) stay differentiable and are not masked
        coll = np.zeros((n, n), bool)
        for bp in qg.branch_points:
            coll |= np.abs(qg.z - bp) < 1.5 * h
    else:
        coll = collision_gap(c) < 3 * jump
    masked = _dilate(coll, mask_radius_cells)
    return BranchDerivatives(ds, dt, ~masked, coll)


def _dilate(m: np.ndarray, k: int) -> np.ndarray:
    out = m.copy()
    if k <= 0 or not m.any():
        return out
    ii, jj = np.nonzero(m)
    n0, n1 = m.shape
    for di in range(-k, k + 1):
        for dj in range(-k, k + 1):
            if di * di + dj * dj <= k * k:
                a = np.clip(ii + di, 0, n0 - 1)
                b = np.clip(jj + dj, 0, n1 - 1)
                out[a, b] = True
    return out


def _interpolate(qg: QGraph, z: np.ndarray):
    """Bilinear interpolation with labels matched to the lower-left corner."""
    s = qg.s
    h = qg.h
    x = (z.real - s[0]) / h
    y = (z.imag - s[0]) / h
    i = np.clip(np.floor(x).astype(int), 0, qg.n - 2)
    j = np.clip(np.floor(y).astype(int), 0, qg.n - 2)
    fx = x - i
    fy = y - j
    V = stack_values(qg.phi, qg.alpha)
    v00 = V[i, j]
    v10 = match_to(v00, V[i + 1, j])
    v01 = match_to(v00, V[i, j + 1])
    v11 = match_to(v00, V[i + 1, j + 1])
    fx = fx[..., None, None]
    fy = fy[..., None, None]
    v = (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 + (1 - fx) * fy * v01 + fx * fy * v11
    return v[..., 0] + 1j * v[..., 1], v[..., 2]


# loops ---------------------------------------------------------------------

@dataclass
class LiftedLoop:
    """A closed loop of the multigraph over a circle, possibly multi-lap."""

    theta: np.ndarray  # (M,) lifted angle, spanning laps * 2 pi
    z: np.ndarray  # (M,) base points
    values: np.ndarray  # (M, k, 3) tracked values of the k tracked branches
    laps: int
    start: tuple


def sample_circle(qg_or_sampler, center: complex, rho: float, n: int):
    th = np.linspace(0, 2 * np.pi, n, endpoint=False)
    z = center + rho * np.exp(1j * th)
    ev = qg_or_sampler.evaluate if isinstance(qg_or_sampler, QGraph) else qg_or_sampler
    phi, alpha = ev(z)
    return th, z, stack_values(np.asarray(phi, complex), np.asarray(alpha, float))


def _step_assignments(V: np.ndarray) -> np.ndarray:
    """perm[k][a] = index at sample k+1 continuing branch a at sample k (cyclic)."""
    M, Q, _ = V.shape
    perms = np.empty((M, Q), dtype=int)
    for k in range(M):
        a = V[k]
        b = V[(k + 1) % M]
        cost = np.sum((a[:, None, :] - b[None, :, :]) ** 2, -1)
        _, col = linear_sum_assignment(cost)
        perms[k] = col
    return perms


def trace_loops(qg_or_sampler, center: complex, rho: float, n: int = 720,
                tuples=None, min_gap: float = 0.0) -> list[LiftedLoop]:
    """Follow branches (or tuples of branches) around the circle until closing.

    ``tuples`` is a list of index tuples at angle 0 to follow simultaneously;
    by default every single branch.  Returns one LiftedLoop per orbit of the
    monodromy acting on the tuples.
    """
    th, z, V = sample_circle(qg_or_sampler, center, rho, n)
    M, Q, _ = V.shape
    perms = _step_assignments(V)
    if tuples is None:
        tuples = [(a,) for a in range(Q)]
    seen = set()
    loops = []
    for tup in tuples:
        if tup in seen:
            continue
        cur = tuple(tup)
        path_idx = []
        laps = 0
        while True:
            seen.add(cur)
            for k in range(M):
                path_idx.append(cur)
                cur = tuple(perms[k][c] for c in cur)
            laps += 1
            if cur == tuple(tup) or laps > Q * Q + 1:
                break
        idx = np.array(path_idx)  # (laps*M, k)
        kk = np.tile(np.arange(M), laps)
        vals = V[kk[:, None], idx]
        lifted = np.concatenate([th + 2 * np.pi * L for L in range(laps)])
        loops.append(LiftedLoop(lifted, np.tile(z, laps), vals, laps, tuple(tup)))
    return loops


def cell_disk_weights(s: np.ndarray, center: complex = 0.0, radius: float = 1.0) -> np.ndarray:
    """Exact area fraction of each grid cell (centred at the nodes) inside a disk."""
    from .currents import clipped_areas

    h = s[1] - s[0]
    X, Y = np.meshgrid(s, s, indexing="ij")
    c = np.array([np.real(center), np.imag(center)])
    # only cells meeting the disk boundary need clipping
    d = np.hypot(X - c[0], Y - c[1])
    out = (d <= radius).astype(float)
    band = np.abs(d - radius) <= h
    if band.any():
        x, y = X[band], Y[band]
        corners = np.stack([np.stack([x - h / 2, y - h / 2], -1), np.stack([x + h / 2, y - h / 2], -1),
                            np.stack([x + h / 2, y + h / 2], -1), np.stack([x - h / 2, y + h / 2], -1)], 1)
        t1 = corners[:, [0, 1, 2]]
        t2 = corners[:, [0, 2, 3]]
        a = clipped_areas(t1, c, radius) + clipped_areas(t2, c, radius)
        out[band] = a / (h * h)
    return out
