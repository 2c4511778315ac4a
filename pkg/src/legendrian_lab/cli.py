"""Command line harness: ``legendrian-lab <command> [options]``.

Each command resolves its configuration (JSON file sections, then flags),
runs one pipeline and writes a run directory with ``manifest.json``, CSV
tables and, with ``--plot``, SVG figures.  Exit codes: 0 success, 2 invalid
input, 3 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .currents import PreconditionError
from .foliations import ConvergenceError
from .io import config_hash, versions, write_csv, write_json

COMMANDS = ("calibrate-check", "foliate", "monotonicity", "tangent-cone", "kronecker",
            "pde-residual", "solve", "energy", "holder-fit", "cauchy", "solve-w", "carleman",
            "winding", "degree")

# per-command defaults; every key can be set from the config file or --param
DEFAULTS = {
    "calibrate-check": {"samples": 10000, "refine_steps": 60},
    "foliate": {"samples": 1000},
    "monotonicity": {"scenario": "l0-plus-l", "scenario_params": {}, "point": [1, 0, 0, 0, 0, 0], "radii": "0.4:0.0125:dyadic"},
    "tangent-cone": {"scenario": "l0-plus-l", "scenario_params": {}, "point": [1, 0, 0, 0, 0, 0], "radii": "0.04:0.0025:dyadic"},
    "kronecker": {"Q": [1, 2, 3], "w": [0.01, 0.005], "leaf_radius": 0.08, "disk_radius": 0.05},
    "pde-residual": {"angle": 0.3, "R": 0.05, "grids": [128, 256]},
    "solve": {"coefficients": "constant", "nu": [0.1, 0.0], "n": 128},
    "energy": {"scenario": "sqrt-branch", "scenario_params": {}},
    "holder-fit": {"scenario": "sqrt-branch", "scenario_params": {}, "radii": "0.03:1.0:geom:6"},
    "cauchy": {"grids": [64, 128, 256, 512]},
    "solve-w": {"nu": "builtin", "R": 0.1, "n": 256},
    "carleman": {"k": 1, "r": 0.4, "N": [1, 2, 3], "zero_radius": 0.05},
    "winding": {"scenario": "sqrt-branch", "scenario_params": {}, "center": [0.0, 0.0], "rho": 0.3},
    "degree": {"scenario": "sqrt-branch", "scenario_params": {}, "center": [0.0, 0.0], "rho": 0.3, "delta": 0.5, "eps": 0.1},
}


class ValidationError(ValueError):
    pass


@dataclass
class ScenarioRun:
    run_id: str
    command: str
    config: dict
    tables: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    wall_clock: float = 0.0


# parsing helpers -------------------------------------------------------------------

def parse_radii(text) -> list[float]:
    """'a:b:dyadic', 'a:b:geom:N' or a comma list / JSON list of radii."""
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    parts = str(text).split(":")
    try:
        if len(parts) >= 3 and parts[2] == "dyadic":
            a, b = float(parts[0]), float(parts[1])
            out = [a]
            while out[-1] / 2 >= b * (1 - 1e-9):
                out.append(out[-1] / 2)
            return out
        if len(parts) == 4 and parts[2] == "geom":
            return list(np.geomspace(float(parts[0]), float(parts[1]), int(parts[3])))
        return [float(x) for x in str(text).split(",")]
    except ValueError as exc:
        raise ValidationError(f"cannot parse radii {text!r}") from exc


def _floats(v, n=None) -> list[float]:
    if isinstance(v, str):
        v = [x for x in v.replace(";", ",").split(",") if x.strip()]
    out = [float(x) for x in np.atleast_1d(v)]
    if n is not None and len(out) != n:
        raise ValidationError(f"expected {n} numbers, got {len(out)}")
    return out


def _complex(v) -> complex:
    if isinstance(v, (int, float, complex)):
        return complex(v)
    if isinstance(v, str):
        try:
            return complex(v.replace(" ", ""))
        except ValueError:
            pass
    f = _floats(v)
    return complex(f[0], f[1] if len(f) > 1 else 0.0)


def _ints(v) -> list[int]:
    return [int(x) for x in _floats(v)]


def _coerce(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def resolve_config(command: str, args) -> dict:
    cfg = {"command": command, "seed": int(args.seed), "resolution": args.resolution}
    params = dict(DEFAULTS[command])
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ValidationError("config must be a JSON object with per-command sections")
        for key in data:
            if key not in COMMANDS and key not in ("seed", "resolution"):
                raise ValidationError(f"unknown config section {key!r}")
        params.update(data.get(command, {}))
        if "seed" in data and args.seed_given is False:
            cfg["seed"] = int(data["seed"])
        if "resolution" in data and args.resolution is None:
            cfg["resolution"] = data["resolution"]
    for key in ("scenario", "point", "radii", "samples", "center", "rho"):
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    for kv in args.param or []:
        if "=" not in kv:
            raise ValidationError(f"--param expects KEY=VALUE, got {kv!r}")
        k, v = kv.split("=", 1)
        params[k] = _coerce(v)
    unknown = set(params) - set(DEFAULTS[command])
    if unknown:
        raise ValidationError(f"unknown parameter(s) for {command}: {', '.join(sorted(unknown))}")
    cfg["params"] = params
    return cfg


# commands --------------------------------------------------------------------------

def cmd_calibrate_check(cfg, p):
    from .ambient_geometry import comass_estimate

    rows = []
    for form in ("omega", "Omega"):
        val, _ = comass_estimate(form, int(p["samples"]), int(p["refine_steps"]), cfg["seed"])
        rows.append([form, int(p["samples"]), val])
    return {"comass": (["form", "samples", "value"], rows)}, {"omega": rows[0][2], "Omega": rows[1][2]}


def cmd_foliate(cfg, p):
    from .foliations import positivity_samples

    signs, dets = positivity_samples(int(p["samples"]), cfg["seed"])
    rows = [[k, int(s), float(d)] for k, (s, d) in enumerate(zip(signs, dets))]
    return ({"positivity": (["sample", "sign", "det"], rows)},
            {"samples": len(rows), "all_positive": bool(np.all(signs == 1)), "min_det": float(dets.min())})


def _scenario(cfg, p, name=None, params=None):
    from .scenarios import scenario_build

    try:
        return scenario_build(name or p["scenario"], params if params is not None else p.get("scenario_params"),
                              cfg["resolution"], cfg["seed"])
    except KeyError as exc:
        raise ValidationError(str(exc)) from exc


def cmd_monotonicity(cfg, p):
    from .currents import density_ladder, is_monotone_nonincreasing

    sc = _scenario(cfg, p)
    if sc.current is None:
        raise ValidationError(f"scenario {sc.name} has no current")
    radii = parse_radii(p["radii"])
    x0 = np.asarray(_floats(p["point"], 6))
    vals = density_ladder(sc.current, x0, radii)
    rows = [[r, v] for r, v in zip(radii, vals)]
    return ({"density": (["r", "ratio"], rows)},
            {"limit": float(vals[-1]), "monotone": bool(is_monotone_nonincreasing(vals))})


def cmd_tangent_cone(cfg, p):
    from .currents import tangent_cone

    sc = _scenario(cfg, p)
    radii = parse_radii(p["radii"])
    est = tangent_cone(sc.current, np.asarray(_floats(p["point"], 6)), radii)
    rows = []
    for h in est.history:
        for k, (m, f, pl) in enumerate(zip(h["multiplicities"], h["mass_fractions"], h["planes"])):
            rows.append([h["radius"], k, m, f, *pl[0], *pl[1]])
    hdr = ["r", "component", "multiplicity", "mass_fraction"] + [f"e1_{i}" for i in range(6)] \
        + [f"e2_{i}" for i in range(6)]
    return ({"tangent_cone": (hdr, rows)},
            {"planes": len(est.components), "multiplicities": [c.multiplicity for c in est.components],
             "residual": est.residual})


def cmd_kronecker(cfg, p):
    from .currents import kronecker_index, leaf_slice
    from .foliations import Direction, chart_build
    from .scenarios import flat_disk_current

    ch = chart_build(X=Direction(0.5, 1))
    w = _complex(p["w"])
    rows = []
    for Q in _ints(p["Q"]):
        C = flat_disk_current(Q, float(p["disk_radius"]), space="s5")
        res = kronecker_index(C, leaf_slice(ch, w, float(p["leaf_radius"])),
                              rng=np.random.default_rng(cfg["seed"]))
        rows.append([Q, w.real, w.imag, res.index, res.crossings, res.margin])
    return ({"kronecker": (["Q", "w_re", "w_im", "index", "crossings", "margin"], rows)},
            {"indices": [r[3] for r in rows]})


def cmd_pde_residual(cfg, p):
    from .legendrian_pde import ChartCoefficients, residual, tilted_sphere_qgraph

    grids = _ints(cfg["resolution"] or p["grids"])
    rows = []
    for n in grids:
        qg, ch = tilted_sphere_qgraph(float(p["angle"]), float(p["R"]), n)
        r = residual(qg, ChartCoefficients(ch))
        rows.append([n, qg.h, r.cr_sup, r.alpha_sup, r.masked])
    return ({"residual": (["n", "h", "complex_residual", "alpha_residual", "masked"], rows)},
            {"complex_residual": [r[2] for r in rows]})


def cmd_solve(cfg, p):
    from .legendrian_pde import ConstantCoefficients, FlatCoefficients, solve_branch

    n = int(cfg["resolution"] or p["n"])
    kind = p["coefficients"]
    if kind == "flat":
        co = FlatCoefficients()
        nu = 0j
    elif kind == "constant":
        nu = _complex(p["nu"])
        co = ConstantCoefficients(nu=nu)
    else:
        raise ValidationError("coefficients must be 'flat' or 'constant'")

    def bnd(th):
        e = np.exp(1j * th)
        return e - nu * np.conj(e), np.zeros_like(th)

    sol = solve_branch(bnd, co, n=n, R=1.0)
    z = sol.qgraph.z
    m = np.abs(z) < 1
    err = float(np.max(np.abs(sol.qgraph.phi[..., 0] - (z - nu * np.conj(z)))[m]))
    rows = [[h["iteration"], h["change"], h["contraction"]] for h in sol.history]
    return ({"trace": (["iteration", "change", "contraction"], rows)},
            {"iterations": sol.iterations, "converged": sol.converged, "sup_error": err})


def _graph_scenario(cfg, p):
    sc = _scenario(cfg, p)
    if sc.qgraph is None:
        raise ValidationError(f"scenario {sc.name} has no multivalued graph")
    return sc


def cmd_energy(cfg, p):
    from .legendrian_pde import dirichlet_energy

    sc = _graph_scenario(cfg, p)
    e = dirichlet_energy(sc.qgraph)
    rows = [[j, float(e.per_branch[j]), float(e.calibration[j])] for j in range(sc.qgraph.Q)]
    return ({"energy": (["branch", "energy", "calibration"], rows)},
            {"total": e.total, "phi_energy": e.phi_energy})


def cmd_holder_fit(cfg, p):
    from .legendrian_pde import holder_decay_fit

    sc = _graph_scenario(cfg, p)
    fit = holder_decay_fit(sc.qgraph, parse_radii(p["radii"]))
    rows = [[r, y] for r, y in zip(fit.radii, fit.values)]
    return ({"decay": (["r", "energy"], rows)},
            {"C": fit.C, "delta": fit.delta, "r2": fit.r2, "notice": fit.notice})


def cmd_cauchy(cfg, p):
    from .unique_continuation import dbar_identity_error

    rows = []
    for n in _ints(p["grids"]):
        f = lambda z: np.maximum(1 - np.abs(z) ** 2, 0)  # noqa: E731
        err = dbar_identity_error(f, n)
        rows.append([n, 3.0 / (n - 1), err])
    ratios = [rows[k][2] / rows[k + 1][2] for k in range(len(rows) - 1)]
    return ({"refinement": (["n", "h", "sup_error"], rows)}, {"ratios": ratios})


def cmd_solve_w(cfg, p):
    from .legendrian_pde import averaged_nu_field
    from .unique_continuation import beltrami_residual, solve_w

    R = float(p["R"])
    n = int(cfg["resolution"] or p["n"])
    if p["nu"] == "builtin":
        nu = averaged_nu_field()
    elif p["nu"] == "zero":
        nu = lambda z: np.zeros_like(z)  # noqa: E731
    else:
        c = _complex(p["nu"])
        nu = lambda z: np.full(np.shape(z), c)  # noqa: E731
    res = solve_w(nu, R, n=n)
    rows = [[t["iteration"], t["change"], t["contraction"]] for t in res.trace]
    z = res.w.z
    m = (np.abs(z) <= R) & (z != 0)
    K = float(np.max(np.abs(res.w.values - z)[m] / (R * np.abs(z[m]))))
    return ({"trace": (["iteration", "change", "contraction"], rows)},
            {"contraction_ratio": res.contraction_ratio, "u_sup": res.u_sup, "K": K,
             "residual": beltrami_residual(res.w, nu, R), "converged": res.converged})


def cmd_carleman(cfg, p):
    from .scenarios import zk_sampler
    from .unique_continuation import GridFunction, carleman_ratio, vanishing_product

    k = int(p["k"])
    r = float(p["r"])
    n = int(cfg["resolution"] or 256)
    s = np.linspace(-1, 1, n)
    z = s[:, None] + 1j * s[None, :]
    rows = []
    for N in _ints(p["N"]):
        q = [float(p["zero_radius"]) * np.exp(2j * np.pi * j / N + 0.3j) for j in range(N)]
        phi, alpha = zk_sampler(k, q)(z)
        g = vanishing_product(GridFunction(s, z), q)
        c = carleman_ratio(phi, alpha, g, r)
        rows.append([N, c.lhs, c.rhs, c.K, c.quotient_max])
    Ks = [x[3] for x in rows]
    return ({"carleman": (["N", "lhs", "rhs", "K", "quotient_max"], rows)},
            {"K_spread": float(max(Ks) / min(Ks) - 1) if min(Ks) > 0 else float("nan")})


def _pairs(Q):
    return [(i, j) for i in range(Q) for j in range(i + 1, Q)]


def cmd_winding(cfg, p):
    from .degree_lab import winding_number

    sc = _graph_scenario(cfg, p)
    c = _complex(p["center"])
    rows = []
    for pr in _pairs(sc.qgraph.Q):
        rows.append([f"{pr[0]}-{pr[1]}", winding_number(sc.qgraph.sampler or sc.qgraph, pr, c, float(p["rho"]))])
    return {"winding": (["pair", "winding"], rows)}, {"winding": [r[1] for r in rows]}


def cmd_degree(cfg, p):
    from .degree_lab import StretchParams, degree_integral, winding_number

    sc = _graph_scenario(cfg, p)
    c = _complex(p["center"])
    sp = StretchParams(float(p["delta"]), float(p["eps"]))
    rows = []
    for pr in _pairs(sc.qgraph.Q):
        src = sc.qgraph.sampler or sc.qgraph
        d = degree_integral(src, pr, c, float(p["rho"]), sp)
        w = winding_number(src, pr, c, float(p["rho"]))
        rows.append([f"{pr[0]}-{pr[1]}", w, d.value, d.nearest, d.distance, d.laps])
    return ({"degree": (["pair", "winding", "degree_integral", "nearest", "distance", "laps"], rows)},
            {"degree": [r[2] for r in rows]})


HANDLERS = {
    "calibrate-check": cmd_calibrate_check, "foliate": cmd_foliate, "monotonicity": cmd_monotonicity,
    "tangent-cone": cmd_tangent_cone, "kronecker": cmd_kronecker, "pde-residual": cmd_pde_residual,
    "solve": cmd_solve, "energy": cmd_energy, "holder-fit": cmd_holder_fit, "cauchy": cmd_cauchy,
    "solve-w": cmd_solve_w, "carleman": cmd_carleman, "winding": cmd_winding, "degree": cmd_degree,
}

PLOTS = {
    "monotonicity": ("density", "r", ["ratio"], True, False),
    "holder-fit": ("decay", "r", ["energy"], True, True),
    "cauchy": ("refinement", "n", ["sup_error"], True, True),
    "solve": ("trace", "iteration", ["change"], False, True),
    "solve-w": ("trace", "iteration", ["change"], False, True),
    "pde-residual": ("residual", "n", ["complex_residual"], True, True),
}


def run(command: str, cfg: dict, out: Path | None = None, plot: bool = False) -> ScenarioRun:
    """Execute one command with a resolved config and write its run directory."""
    if command not in HANDLERS:
        raise ValidationError(f"unknown command {command!r}")
    chash = config_hash(cfg)
    t0 = time.perf_counter()
    tables, summary = HANDLERS[command](cfg, cfg["params"])
    wall = time.perf_counter() - t0
    rid = f"{command}-{chash}"
    sr = ScenarioRun(rid, command, cfg, tables, summary, wall)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        files = []
        for name, (hdr, rows) in tables.items():
            write_csv(out / f"{name}.csv", hdr, rows, chash)
            files.append(f"{name}.csv")
        if plot and command in PLOTS:
            from .plotting import line_plot

            tname, xcol, ycols, lx, ly = PLOTS[command]
            hdr, rows = tables[tname]
            arr = np.array([[float(r[hdr.index(c)]) for c in [xcol] + ycols] for r in rows])
            line_plot(out / f"{tname}.svg", arr[:, 0], {c: arr[:, k + 1] for k, c in enumerate(ycols)},
                      xcol, ", ".join(ycols), lx, ly, command)
            files.append(f"{tname}.svg")
        write_json(out / "manifest.json", {
            "run_id": rid, "command": command, "config": cfg, "config_hash": chash,
            "versions": versions(), "files": files, "summary": summary,
            "timings": {"wall_clock_s": round(wall, 3)},
        })
    return sr


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="legendrian-lab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"legendrian-lab {__version__}")
    ap.add_argument("command", choices=COMMANDS, metavar="command", help=" | ".join(COMMANDS))
    ap.add_argument("--scenario")
    ap.add_argument("--config", help="JSON file with per-command sections")
    ap.add_argument("--out", help="run directory (default runs/<command>-<hash>)")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--resolution", type=int, default=None)
    ap.add_argument("--point", help="comma separated point of R^6")
    ap.add_argument("--radii", help="a:b:dyadic, a:b:geom:N or a comma list")
    ap.add_argument("--samples", type=int)
    ap.add_argument("--center", help="complex centre, e.g. 0 or 0.1+0.2j")
    ap.add_argument("--rho", type=float)
    ap.add_argument("--param", action="append", metavar="KEY=VALUE", help="override a parameter")
    ap.add_argument("--plot", action="store_true", help="also emit SVG plots")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = 0
    try:
        cfg = resolve_config(args.command, args)
        out = Path(args.out) if args.out else Path("runs") / f"{args.command}-{config_hash(cfg)}"
        sr = run(args.command, cfg, out, args.plot)
    except ConvergenceError as exc:
        print(f"error: no convergence: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, PreconditionError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for k, v in sr.summary.items():
        print(f"{k}: {json.dumps(v) if not isinstance(v, float) else format(v, '.6g')}")
    print(f"run directory: {out}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
