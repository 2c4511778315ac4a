"""Built-in scenarios: triangulated special Legendrian cycles and Q-valued graphs."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ambient_geometry import omega_eval
from .currents import DiscreteCurrent2, triangle_frames
from .qgraph import QGraph, qgraph_from_sampler

SCENARIOS = ("l0", "l", "l0-plus-l", "flat-disk-Q", "sqrt-branch", "zk-branch",
             "tilted-plane", "theta-model")

E1 = np.array([1.0, 0, 0, 0, 0, 0])


@dataclass
class Annotation:
    """Ground-truth value attached to a scenario.

    ``source`` is "closed-form" for values known analytically and
    "construction" for values that hold by how the artifact is built.
    """

    kind: str
    value: object
    source: str
    where: object = None


@dataclass
class Scenario:
    name: str
    params: dict
    current: DiscreteCurrent2 | None = None
    qgraph: QGraph | None = None
    annotations: list = field(default_factory=list)


# meshes ----------------------------------------------------------------------

def _strip(a0: int, na: int, b0: int, nb: int, pa: float = 0.0, pb: float = 0.0) -> list:
    """Triangles joining ring A (na points) to ring B (nb points) by angle merging.

    Point k of a ring sits at angle (k + phase) / n of a turn; rings with one
    point are poles.
    """
    tris = []
    i = o = 0
    ang_a = (lambda m: (m + pa) / na) if na > 1 else (lambda m: 0.0)
    ang_b = lambda m: (m + pb) / nb  # noqa: E731
    while o < nb or (na > 1 and i < na):
        if na == 1 or (o < nb and ang_b(o + 1) <= ang_a(i + 1) + 1e-12):
            tris.append((a0 + i % na, b0 + o % nb, b0 + (o + 1) % nb))
            o += 1
        else:
            tris.append((a0 + i % na, b0 + o % nb, a0 + (i + 1) % na))
            i += 1
    return tris


def ring_mesh(radii: np.ndarray, counts, closed: bool):
    """Index triangles for a pole plus concentric rings (and a closing pole).

    ``radii`` are ring parameters (polar angle or radius) after the pole;
    returns (ring parameters, angles, triangles) with vertex 0 the first pole.
    """
    params = [0.0]
    angs = [0.0]
    starts = [0]
    tris = []
    nprev, pprev = 1, 0.0
    pos = 1
    for k, (r, n) in enumerate(zip(radii, counts)):
        ph = 0.5 * (k % 2)
        starts.append(pos)
        tris += _strip(starts[-2], nprev, pos, n, pprev, ph)
        params += [r] * n
        angs += list(2 * np.pi * (np.arange(n) + ph) / n)
        nprev, pprev = n, ph
        pos += n
    if closed:
        tris += [(b, a, c) for (a, b, c) in _strip(pos, 1, starts[-1], nprev, 0.0, pprev)]
        params.append(np.pi)
        angs.append(0.0)
    return np.array(params), np.array(angs), np.array(tris, dtype=int)


def sphere_rings(spacing: float, pole_ratio: float = 0.7, pole_min: float = 0.02):
    """Polar angles and ring sizes of a near-uniform sphere mesh.

    Ring spacing is ``spacing`` away from the poles and shrinks geometrically
    (factor ``pole_ratio``) to ``pole_min * spacing`` at each pole.
    """
    steps = [spacing * pole_min]
    while steps[-1] < spacing:
        steps.append(steps[-1] / pole_ratio)
    cap = np.cumsum(steps[:-1])
    n_mid = max(1, int(round((np.pi - 2 * cap[-1]) / spacing)))
    mid = np.linspace(cap[-1], np.pi - cap[-1], n_mid + 1)[1:-1]
    psi = np.concatenate([cap, mid, np.pi - cap[::-1]])
    counts = np.maximum(6, np.round(2 * np.pi * np.sin(psi) / spacing)).astype(int)
    return psi, counts


def sphere_triangles(points_fn, spacing: float) -> np.ndarray:
    psi, counts = sphere_rings(spacing)
    p, a, tri = ring_mesh(psi, counts, closed=True)
    P = points_fn(p, a)
    return P[tri]


def calibrated_orientation(v: np.ndarray) -> np.ndarray:
    """Orientation flags making omega positive on each triangle of a sphere mesh."""
    fr = triangle_frames(v)
    c = v.mean(1)
    c /= np.linalg.norm(c, axis=1, keepdims=True)
    val = omega_eval(c, fr[:, 0], fr[:, 1])
    return np.where(val >= 0, 1, -1)


def _l0_points(psi, phi):
    x = np.zeros(np.broadcast(psi, phi).shape + (6,))
    x[..., 0] = np.cos(psi)
    x[..., 2] = np.sin(psi) * np.cos(phi)
    x[..., 4] = np.sin(psi) * np.sin(phi)
    return x


def _l_points(psi, phi):
    x = np.zeros(np.broadcast(psi, phi).shape + (6,))
    x[..., 0] = np.cos(psi)
    x[..., 3] = np.sin(psi) * np.cos(phi)
    x[..., 5] = np.sin(psi) * np.sin(phi)
    return x


def sphere_current(which: str, resolution: int = 64) -> DiscreteCurrent2:
    """Great special Legendrian sphere L0 (real) or L = {(x1, i y2, i y3)}.

    ``resolution`` is the number of rings between the poles +-e1 away from
    the pole refinement; 64 gives about 10^4 triangles.
    """
    fn = _l0_points if which == "l0" else _l_points
    v = sphere_triangles(fn, np.pi / resolution)
    return DiscreteCurrent2(v, calibrated_orientation(v), 1, {"source": which})


def polar_disk_triangles(radius: float = 1.0, rings: int = 40) -> np.ndarray:
    """Concentric triangulation of a disk (6k vertices on ring k).

    Ring radii are scaled by a common factor so that the polygon area equals
    pi radius^2 exactly; 6 rings^2 triangles.
    """
    nmax = 6 * rings
    corr = np.sqrt(np.pi / (0.5 * nmax * np.sin(2 * np.pi / nmax)))
    rings_pts = [np.zeros((1, 2))]
    for k in range(1, rings + 1):
        t = 2 * np.pi * np.arange(6 * k) / (6 * k)
        rk = radius * corr * k / rings
        rings_pts.append(np.column_stack([rk * np.cos(t), rk * np.sin(t)]))
    tris = []
    for k in range(1, rings + 1):
        inner, outer = rings_pts[k - 1], rings_pts[k]
        ni, no = len(inner), len(outer)
        # merge the two rings by angle, stepping along whichever is behind
        i = o = 0
        ai = lambda m: m / ni if ni > 1 else 0.0  # noqa: E731
        ao = lambda m: m / no  # noqa: E731
        while o < no or (ni > 1 and i < ni):
            if ni == 1 or (o < no and ao(o + 1) <= ai(i + 1) + 1e-12):
                tris.append([inner[i % ni], outer[o % no], outer[(o + 1) % no]])
                o += 1
            else:
                tris.append([inner[i % ni], outer[o % no], inner[(i + 1) % ni]])
                i += 1
    return np.array(tris)


def flat_disk_current(Q: int = 1, radius: float | None = None, rings: int = 40,
                      space: str = "chart", chart=None) -> DiscreteCurrent2:
    """Q [[D0]]: flat disk in the (s, t)-plane of the chart R^5, or its image
    on S^5 under the chart map (a disk of the parameter sphere L).

    Default radius is 1 in the chart and 0.05 on S^5.
    """
    if radius is None:
        radius = 1.0 if space == "chart" else 0.05
    t2 = polar_disk_triangles(radius, rings)
    v = np.zeros(t2.shape[:2] + (5,))
    v[..., :2] = t2
    if space == "s5":
        from .foliations import chart_build

        ch = chart_build() if chart is None else chart
        v = ch.psi(v.reshape(-1, 5)).reshape(-1, 3, 6)
    return DiscreteCurrent2(v, 1, Q, {"source": "flat-disk-Q"})


# graph models ------------------------------------------------------------------

def sqrt_sampler(z):
    r = np.sqrt(np.asarray(z, complex))
    phi = np.stack([r, -r], -1)
    return phi, np.zeros(phi.shape)


def zk_sampler(k: int, zeros=()):
    def f(z):
        z = np.asarray(z, complex)
        g = 0.5 * z**k
        for q in zeros:
            g = g * (z - q)
        phi = np.stack([g, -g], -1)
        return phi, np.zeros(phi.shape)

    return f


def tilted_sampler(slope: complex):
    def f(z):
        z = np.asarray(z, complex)
        return (slope * z)[..., None], np.zeros(z.shape + (1,))

    return f


def theta_sampler(lam: complex = 1.0, mu: complex = 0.2, tau: float = 1.5,
                  alpha_coef: float = 0.0):
    """Two branches +-(lam z + mu zbar)^tau / 2 (tau a half-integer or integer)."""
    def f(z):
        z = np.asarray(z, complex)
        w = lam * z + mu * np.conj(z)
        p = 0.5 * np.exp(tau * np.log(np.where(w == 0, 1e-300, w)))
        p = np.where(w == 0, 0, p)
        a = 0.5 * alpha_coef * np.abs(z) ** 2
        return np.stack([p, -p], -1), np.stack([a, -a], -1)

    return f


def flat_sampler(Q: int):
    def f(z):
        z = np.asarray(z, complex)
        return np.zeros(z.shape + (Q,), complex), np.zeros(z.shape + (Q,))

    return f


# registry --------------------------------------------------------------------

def scenario_build(name: str, params: dict | None = None, resolution: int | None = None,
                   seed: int = 0) -> Scenario:
    """Deterministic scenario artifacts for a name, parameters and resolution."""
    params = dict(params or {})
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    res = resolution
    if name in ("l0", "l", "l0-plus-l"):
        n = res or 64
        parts = [sphere_current(w, n) for w in (("l0",) if name == "l0" else ("l",) if name == "l" else ("l0", "l"))]
        C = parts[0]
        for p in parts[1:]:
            C = C + p
        C.metadata["source"] = name
        sc = Scenario(name, {"resolution": n}, current=C)
        t_l0 = (np.eye(6)[2], np.eye(6)[4])
        t_l = (np.eye(6)[3], -np.eye(6)[5])
        if name in ("l0", "l0-plus-l"):
            sc.annotations.append(Annotation("mass", 4 * np.pi, "closed-form", "l0"))
        if name == "l0-plus-l":
            sc.annotations += [
                Annotation("density", 2, "closed-form", [1, 0, 0, 0, 0, 0]),
                Annotation("density", 2, "closed-form", [-1, 0, 0, 0, 0, 0]),
                Annotation("tangent_planes", [t_l0, t_l], "closed-form", [1, 0, 0, 0, 0, 0]),
            ]
        else:
            sc.annotations.append(Annotation("density", 1, "closed-form", "smooth points"))
        return sc
    n = res or 128
    if name == "flat-disk-Q":
        Q = int(params.get("Q", 1))
        space = params.get("space", "chart")
        radius = float(params.get("radius", 1.0 if space == "chart" else 0.05))
        rings = int(params.get("rings", 40))
        C = flat_disk_current(Q, radius, rings, space)
        qg = qgraph_from_sampler(flat_sampler(Q), radius, n, name)
        return Scenario(name, {"Q": Q, "radius": radius, "space": space}, current=C,
                        qgraph=qg, annotations=[
                            Annotation("density", Q, "construction", "center"),
                            Annotation("mass", Q * np.pi * radius**2, "closed-form")])
    R = float(params.get("R", 1.0))
    if name == "sqrt-branch":
        qg = qgraph_from_sampler(sqrt_sampler, R, n, name, branch_points=(0j,))
        return Scenario(name, {"R": R}, qgraph=qg, annotations=[
            Annotation("winding", 1, "closed-form", 0j),
            Annotation("energy", 2 * np.pi * R, "closed-form")])
    if name == "zk-branch":
        k = int(params.get("k", 2))
        zeros = tuple(complex(q) for q in params.get("zeros", ()))
        bps = (0j,) + zeros
        qg = qgraph_from_sampler(zk_sampler(k, zeros), R, n, name, branch_points=bps)
        return Scenario(name, {"R": R, "k": k, "zeros": [str(q) for q in zeros]}, qgraph=qg,
                        annotations=[Annotation("winding", k, "closed-form", 0j)])
    if name == "tilted-plane":
        slope = complex(params.get("slope", 0.3))
        qg = qgraph_from_sampler(tilted_sampler(slope), R, n, name)
        return Scenario(name, {"R": R, "slope": str(slope)}, qgraph=qg, annotations=[
            Annotation("lipschitz_gap", abs(slope), "construction")])
    # theta-model
    lam = complex(params.get("lam", 1.0))
    mu = complex(params.get("mu", 0.2))
    tau = float(params.get("tau", 1.5))
    ac = float(params.get("alpha_coef", 0.0))
    qg = qgraph_from_sampler(theta_sampler(lam, mu, tau, ac), R, n, name, branch_points=(0j,))
    wind = int(round(2 * tau)) if abs(tau - round(tau)) > 1e-9 else int(round(tau))
    return Scenario(name, {"R": R, "lam": str(lam), "mu": str(mu), "tau": tau}, qgraph=qg,
                    annotations=[Annotation("winding", wind, "closed-form", 0j)])
