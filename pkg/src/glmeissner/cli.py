"""Command-line driver: one JSON config in, reproducible artifacts out.

Subcommands: london, normstar, energy, minimize, sweep, splitcheck, oracle.
Every run writes manifest.json (the fully resolved configuration) plus
results.json and command-specific CSV/VTK files into the output directory,
and prints a one-line JSON summary to stdout.  Exit codes: 0 success,
2 invalid input, 3 solver failure.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass, field as dfield

import numpy as np

from . import __version__
from .errors import (
    GLMeissnerError,
    MeshTooCoarse,
    NotDivergenceFree,
    ParseError,
    SolverFailure,
    ValidationError,
    ValidationFailure,
)
from .exprparse import compile_expression
from .fields import VectorField, write_csv_nodes, write_vtk
from .glcore import GLState, gl_total_energy, meissner_state, vorticity
from .london import ball_norm_star_exact, analytic_ball_B0, hc1_leading, solve_london, uniform_field
from .mesh import build_mesh, make_shape
from .minimize import (
    MinimizeOptions,
    hc1_sweep,
    is_vortexless,
    minimize,
    perturbed_meissner,
    seed_vortex,
)
from .normstar import norm_star

_DOMAIN_KEYS = {
    "ball": {"shape", "R"},
    "box": {"shape", "a", "b", "c"},
    "ellipsoid": {"shape", "a", "b", "c"},
}
_TOL_DEFAULTS = {
    "london": 1e-8,
    "normstar": 1e-4,
    "grad": 1e-4,
    "bc": 1e-10,
}
_MINIMIZE_DEFAULTS = {
    "max_iters": 2000,
    "grad_tol": None,        # falls back to tolerances["grad"]
    "step_rule": "backtracking",
    "eta": 0.1,
    "momentum": 0.0,
    "gauge_fix_every": 0,
    "record_history": False,
    "plateau_tol": 0.0,
    "plateau_window": 25,
}
_STATE_DEFAULTS = {
    "kind": "meissner",       # or "seeded"
    "amplitude": 0.0,         # random perturbation of the start
    "core_radius": None,      # seeded start: defaults to max(2h, eps)
}
_TOP_KEYS = {
    "domain", "spacing", "pad", "applied_field", "eps", "hex", "hex_list",
    "tolerances", "seed", "output_dir", "state", "minimize",
}


@dataclass
class RunConfig:
    domain: dict
    spacing: float
    pad: int
    applied_field: object
    eps: float
    hex: float
    hex_list: list
    tolerances: dict
    seed: int
    output_dir: str
    state: dict
    minimize: dict
    raw: dict = dfield(default_factory=dict)

    def resolved(self):
        return {
            "domain": self.domain,
            "spacing": self.spacing,
            "pad": self.pad,
            "applied_field": self.applied_field,
            "eps": self.eps,
            "hex": self.hex,
            "hex_list": self.hex_list,
            "tolerances": self.tolerances,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "state": self.state,
            "minimize": self.minimize,
            "version": __version__,
        }


def _reject_unknown(mapping, allowed, where):
    unknown = set(mapping) - set(allowed)
    if unknown:
        raise ValidationError(f"unknown key(s) {sorted(unknown)} in {where}")


def parse_config(text, check_divergence=True):
    """Validate a JSON run configuration; see the README for the schema."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"config is not valid JSON: {exc.msg} at "
                         f"line {exc.lineno} column {exc.colno}") from exc
    if not isinstance(raw, dict):
        raise ValidationError("config must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "config")

    domain = raw.get("domain")
    if not isinstance(domain, dict) or "shape" not in domain:
        raise ValidationError("domain: must be an object with a 'shape' key")
    kind = domain["shape"]
    if kind not in _DOMAIN_KEYS:
        raise ValidationError(f"domain.shape: unknown shape {kind!r}")
    _reject_unknown(domain, _DOMAIN_KEYS[kind], "domain")
    for key, val in domain.items():
        if key != "shape" and (not isinstance(val, (int, float)) or val <= 0):
            raise ValidationError(f"domain.{key}: must be a positive number")

    spacing = raw.get("spacing")
    if not isinstance(spacing, (int, float)) or spacing <= 0:
        raise ValidationError("spacing: must be a positive number")

    shape = make_shape(domain)
    default_pad = int(round(2.0 * shape.half_extent().max() / spacing))
    pad = raw.get("pad", default_pad)
    if not isinstance(pad, int) or pad < 0:
        raise ValidationError("pad: must be a nonnegative integer")

    eps = raw.get("eps")
    if not isinstance(eps, (int, float)) or not 0.0 < eps < 1.0:
        raise ValidationError("eps: must be a number in (0, 1)")

    hex_val = raw.get("hex")
    hex_list = raw.get("hex_list")
    if hex_val is not None and hex_list is not None:
        raise ValidationError("hex and hex_list are mutually exclusive")
    if hex_val is not None and (not isinstance(hex_val, (int, float)) or hex_val < 0):
        raise ValidationError("hex: must be a nonnegative number")
    if hex_list is not None:
        if (not isinstance(hex_list, list) or not hex_list
                or any(not isinstance(v, (int, float)) or v < 0 for v in hex_list)):
            raise ValidationError("hex_list: must be a list of nonnegative numbers")
        if list(hex_list) != sorted(hex_list):
            raise ValidationError("hex_list: must be ascending")

    tol = dict(_TOL_DEFAULTS)
    user_tol = raw.get("tolerances", {})
    if not isinstance(user_tol, dict):
        raise ValidationError("tolerances: must be an object")
    _reject_unknown(user_tol, _TOL_DEFAULTS, "tolerances")
    for key, val in user_tol.items():
        if not isinstance(val, (int, float)) or val <= 0:
            raise ValidationError(f"tolerances.{key}: must be a positive number")
        tol[key] = float(val)

    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ValidationError("seed: must be an integer")

    output_dir = raw.get("output_dir", "out")
    if not isinstance(output_dir, str):
        raise ValidationError("output_dir: must be a string")

    applied = raw.get("applied_field", "uniform_z")
    if applied != "uniform_z":
        if (not isinstance(applied, dict) or set(applied) != {"custom"}
                or not isinstance(applied["custom"], list)
                or len(applied["custom"]) != 3):
            raise ValidationError(
                "applied_field: 'uniform_z' or {'custom': [ex, ey, ez]}")
        for comp in applied["custom"]:
            if not isinstance(comp, str):
                raise ValidationError("applied_field.custom: three expression strings")

    state = dict(_STATE_DEFAULTS)
    user_state = raw.get("state", {})
    if not isinstance(user_state, dict):
        raise ValidationError("state: must be an object")
    _reject_unknown(user_state, _STATE_DEFAULTS, "state")
    state.update(user_state)
    if state["kind"] not in ("meissner", "seeded"):
        raise ValidationError("state.kind: 'meissner' or 'seeded'")

    mini = dict(_MINIMIZE_DEFAULTS)
    user_min = raw.get("minimize", {})
    if not isinstance(user_min, dict):
        raise ValidationError("minimize: must be an object")
    _reject_unknown(user_min, _MINIMIZE_DEFAULTS, "minimize")
    mini.update(user_min)

    cfg = RunConfig(domain=domain, spacing=float(spacing), pad=pad,
                    applied_field=applied, eps=float(eps),
                    hex=None if hex_val is None else float(hex_val),
                    hex_list=None if hex_list is None else [float(v) for v in hex_list],
                    tolerances=tol, seed=seed, output_dir=output_dir,
                    state=state, minimize=mini, raw=raw)
    if applied != "uniform_z" and check_divergence:
        mesh = build_mesh(cfg.domain, cfg.spacing, cfg.pad)
        field = applied_field_on(mesh, cfg)
        _check_divergence_free(mesh, field)
    return cfg


def applied_field_on(mesh, cfg):
    if cfg.applied_field == "uniform_z":
        return uniform_field(mesh, (0.0, 0.0, 1.0))
    fns = [compile_expression(expr) for expr in cfg.applied_field["custom"]]
    x, y, z = mesh.grid_points()
    comps = tuple(np.broadcast_to(fn(x, y, z), mesh.nshape).copy() for fn in fns)
    return VectorField(mesh, "node", comps)


def _check_divergence_free(mesh, field):
    h = mesh.h
    div = np.zeros(mesh.nshape)
    c = (slice(1, -1),) * 3
    acc = np.zeros_like(div[c])
    for ax, comp in enumerate(field.comps):
        sl_p = [slice(1, -1)] * 3
        sl_m = [slice(1, -1)] * 3
        sl_p[ax] = slice(2, None)
        sl_m[ax] = slice(0, -2)
        acc += (comp[tuple(sl_p)] - comp[tuple(sl_m)]) / (2 * h)
    div[c] = acc
    hmax = max(np.abs(comp).max() for comp in field.comps)
    if np.abs(div).max() > 1e-6 * max(hmax, 1e-300):
        raise NotDivergenceFree(
            f"custom applied field has max |div| = {np.abs(div).max():.3e} "
            f"(limit 1e-6 * max |H| = {1e-6 * hmax:.3e})")


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _dump_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def _write_manifest(cfg, outdir, subcommand):
    payload = cfg.resolved()
    payload["subcommand"] = subcommand
    _dump_json(os.path.join(outdir, "manifest.json"), payload)


def _write_curve_csv(path, value, curve):
    with open(path, "w") as fh:
        fh.write(f"# value={value!r} closed={curve.closed} "
                 f"multiplicity={curve.multiplicity}\n")
        fh.write("x,y,z\n")
        for v in curve.vertices:
            fh.write(f"{v[0]!r},{v[1]!r},{v[2]!r}\n")


def _write_vorticity_csv(path, mesh, vort):
    axes = ("x", "y", "z")
    h = mesh.h
    with open(path, "w") as fh:
        fh.write("x,y,z,orientation,winding_over_2pi\n")
        for ax, w in enumerate(vort.windings):
            idx = np.argwhere(np.abs(w) > 1e-9)
            others = [i for i in range(3) if i != ax]
            for ijk in idx:
                p = mesh.origin + h * ijk
                for o in others:
                    p[o] += h / 2.0
                fh.write(f"{p[0]!r},{p[1]!r},{p[2]!r},{axes[ax]},"
                         f"{w[tuple(ijk)] / (2 * np.pi)!r}\n")


def _mk_minopts(cfg):
    mo = dict(cfg.minimize)
    if mo["grad_tol"] is None:
        mo["grad_tol"] = cfg.tolerances["grad"]
    return MinimizeOptions(**mo)


def _build_state(cfg, mesh, md, hex_value):
    kind = cfg.state["kind"]
    if kind == "meissner":
        amp = cfg.state["amplitude"]
        if amp:
            return perturbed_meissner(mesh, md, cfg.eps, hex_value,
                                      amplitude=amp, seed=cfg.seed)
        return meissner_state(mesh, md, cfg.eps, hex_value)
    value, curve = norm_star(mesh, md.B0, tol=cfg.tolerances["normstar"])
    core = cfg.state["core_radius"] or max(2.0 * mesh.h, cfg.eps)
    shift = np.array([mesh.h / 2.0, mesh.h / 2.0, 0.0])
    from .normstar import CurveCurrent
    seeded = CurveCurrent(curve.vertices + shift, closed=curve.closed,
                          endpoints_on_boundary=curve.endpoints_on_boundary)
    u = seed_vortex(mesh, seeded, core)
    return GLState(mesh, u, VectorField.zeros(mesh, "edge"),
                   cfg.eps, hex_value, md)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _solve(cfg, mesh):
    field = applied_field_on(mesh, cfg)
    if cfg.applied_field != "uniform_z":
        _check_divergence_free(mesh, field)
    return solve_london(mesh, field, tol=cfg.tolerances["london"])


def cmd_london(cfg, outdir):
    mesh = build_mesh(cfg.domain, cfg.spacing, cfg.pad)
    md = _solve(cfg, mesh)
    write_vtk(os.path.join(outdir, "b0.vtk"), mesh,
              vectors={"B0": md.B0.comps, "curlB0": md.curlB0.comps})
    write_csv_nodes(os.path.join(outdir, "b0.csv"), mesh,
                    {"B0x": md.B0.comps[0], "B0y": md.B0.comps[1],
                     "B0z": md.B0.comps[2]})
    results = md.summary()
    _dump_json(os.path.join(outdir, "results.json"), results)
    return results


def cmd_normstar(cfg, outdir):
    mesh = build_mesh(cfg.domain, cfg.spacing, cfg.pad)
    md = _solve(cfg, mesh)
    value, curve = norm_star(mesh, md.B0, tol=cfg.tolerances["normstar"])
    from .fields import line_integral
    results = {
        "value": value,
        "length": curve.length() if curve else 0.0,
        "integral": line_integral(md.B0, curve) if curve else 0.0,
        "closed": bool(curve.closed) if curve else False,
        "n_vertices": int(len(curve.vertices)) if curve else 0,
        "hc1_leading": hc1_leading(cfg.eps, value) if value > 0 else None,
    }
    if curve:
        _write_curve_csv(os.path.join(outdir, "curve.csv"), value, curve)
    _dump_json(os.path.join(outdir, "results.json"), results)
    return results


def cmd_energy(cfg, outdir):
    if cfg.hex is None:
        raise ValidationError("energy: config must set hex")
    mesh = build_mesh(cfg.domain, cfg.spacing, cfg.pad)
    md = _solve(cfg, mesh)
    state = _build_state(cfg, mesh, md, cfg.hex)
    rep = gl_total_energy(state)
    vort = vorticity(state)
    _write_vorticity_csv(os.path.join(outdir, "vorticity.csv"), mesh, vort)
    results = rep.as_dict()
    results["vortex_mass"] = vort.total_mass()
    _dump_json(os.path.join(outdir, "results.json"), results)
    return results


def cmd_minimize(cfg, outdir):
    if cfg.hex is None:
        raise ValidationError("minimize: config must set hex")
    if cfg.spacing > cfg.eps:
        raise MeshTooCoarse(
            f"vortex cores need h <= eps: h = {cfg.spacing}, eps = {cfg.eps}")
    mesh = build_mesh(cfg.domain, cfg.spacing, cfg.pad)
    md = _solve(cfg, mesh)
    state = _build_state(cfg, mesh, md, cfg.hex)
    opts = _mk_minopts(cfg)
    term, trace = minimize(state, opts)
    flag, min_u, vort = is_vortexless(term)
    rep = gl_total_energy(term)
    results = rep.as_dict()
    results.update(vortexless=flag, min_abs_u=min_u,
                   vortex_mass=vort.total_mass(),
                   iterations=trace["iterations"], reason=trace["reason"],
                   grad_norm=trace["grad_norm"])
    if "history" in trace:
        with open(os.path.join(outdir, "trace.csv"), "w") as fh:
            fh.write("iteration,energy\n")
            for i, e in enumerate(trace["history"]):
                fh.write(f"{i},{e!r}\n")
    _dump_json(os.path.join(outdir, "results.json"), results)
    return results


def cmd_sweep(cfg, outdir):
    if cfg.hex_list is None:
        raise ValidationError("sweep: config must set hex_list")
    if cfg.spacing > cfg.eps:
        raise MeshTooCoarse(
            f"vortex cores need h <= eps: h = {cfg.spacing}, eps = {cfg.eps}")
    mesh = build_mesh(cfg.domain, cfg.spacing, cfg.pad)
    md = _solve(cfg, mesh)
    res = hc1_sweep(mesh, md, cfg.eps, cfg.hex_list, opts=_mk_minopts(cfg))
    with open(os.path.join(outdir, "sweep.csv"), "w") as fh:
        cols = ["hex", "start", "energy", "total_energy", "meissner_energy",
                "vortex_mass", "min_abs_u", "vortexless", "iterations", "reason"]
        fh.write(",".join(cols) + "\n")
        for row in res.branch_rows:
            fh.write(",".join(repr(row[c]) if not isinstance(row[c], str)
                              else row[c] for c in cols) + "\n")
    results = res.as_dict()
    _dump_json(os.path.join(outdir, "results.json"), results)
    return results


def cmd_splitcheck(cfg, outdir):
    from .glcore import gl_energy
    from .fields import ComplexField
    residuals = []
    spacings = [cfg.spacing, cfg.spacing / 2.0, cfg.spacing / 4.0]
    for h in spacings:
        mesh = build_mesh(cfg.domain, h, min(cfg.pad, 2))
        md = _solve(cfg, mesh)
        x, y, z = mesh.grid_points()
        r2 = (x**2 + y**2 + z**2) * np.ones(mesh.nshape)
        rmax = float(mesh.shape_obj.half_extent().min())
        bump = np.maximum(0.0, 1.0 - r2 / (0.7 * rmax) ** 2) ** 2
        psi = 0.8 * bump * np.sin(2 * x + y) * np.ones(mesh.nshape)
        u = ComplexField(mesh, np.exp(1j * psi))
        hexv = cfg.hex if cfg.hex is not None else 1.0
        state = GLState(mesh, u, VectorField.zeros(mesh, "edge"),
                        cfg.eps, hexv, md)
        rep = gl_total_energy(state)
        residuals.append(abs(rep.total - gl_energy(state)))
    slope = float(np.polyfit(np.log(spacings), np.log(residuals), 1)[0])
    results = {"spacings": spacings, "residuals": residuals, "slope": slope}
    _dump_json(os.path.join(outdir, "results.json"), results)
    return results


def cmd_oracle(cfg, outdir):
    if cfg.domain["shape"] != "ball":
        raise ValidationError("oracle: closed forms exist for the ball only")
    R = float(cfg.domain["R"])
    ns = ball_norm_star_exact(R)
    samples = {}
    for name, p in (("center", (0.0, 0.0, 0.0)),
                    ("half_axis", (0.0, 0.0, R / 2.0)),
                    ("equator", (R / 2.0, 0.0, 0.0))):
        samples[name] = [float(v) for v in analytic_ball_B0(R, np.array(p))]
    results = {
        "R": R,
        "eps": cfg.eps,
        "norm_star": ns,
        "hc1_leading": hc1_leading(cfg.eps, ns),
        "b0_samples": samples,
    }
    _dump_json(os.path.join(outdir, "results.json"), results)
    return results


_COMMANDS = {
    "london": cmd_london,
    "normstar": cmd_normstar,
    "energy": cmd_energy,
    "minimize": cmd_minimize,
    "sweep": cmd_sweep,
    "splitcheck": cmd_splitcheck,
    "oracle": cmd_oracle,
}


def run_subcommand(name, cfg, output_dir=None):
    """Dispatch one subcommand; returns (exit_code, summary dict)."""
    outdir = output_dir or cfg.output_dir
    os.makedirs(outdir, exist_ok=True)
    _write_manifest(cfg, outdir, name)
    summary = _COMMANDS[name](cfg, outdir)
    return 0, summary


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="glmeissner",
        description="Screened-field and vortex-nucleation experiments "
                    "on voxelized domains.")
    parser.add_argument("subcommand", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="JSON config path")
    parser.add_argument("--output", default=None, help="output directory")
    parser.add_argument("--threads", type=int,
                        default=int(os.environ.get("GLMEISSNER_THREADS", "0")),
                        help="cap BLAS thread pools (0 = leave unchanged)")
    args = parser.parse_args(argv)

    if args.threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print(json.dumps({"error": f"cannot read config: {exc}"}))
        return 2
    try:
        cfg = parse_config(text)
        code, summary = run_subcommand(args.subcommand, cfg, args.output)
    except ValidationFailure as exc:
        print(json.dumps({"error": str(exc), "kind": type(exc).__name__}))
        return 2
    except SolverFailure as exc:
        print(json.dumps({"error": str(exc), "kind": type(exc).__name__}))
        return 3
    except GLMeissnerError as exc:
        print(json.dumps({"error": str(exc), "kind": type(exc).__name__}))
        return 2
    except Exception as exc:  # never crash on bad input
        print(json.dumps({"error": f"internal failure: {exc}",
                          "kind": type(exc).__name__}))
        return 3
    print(json.dumps(summary, sort_keys=True, default=float))
    return code


if __name__ == "__main__":
    sys.exit(main())
