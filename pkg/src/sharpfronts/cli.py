"""Batch command-line frontend: sharpfronts <command> --model M [options]."""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import io
from .classify import classify
from .convergence import run_convergence
from .errors import NumericalError, PreconditionError
from .evolve import BOUNDARIES, evolve, field_from_profile, measure_speed, sup_drift
from .model import load_model, validate_assumptions
from .pasting import build_pieces, paste, weak_residuals
from .profile import DIRECTIONS, semi_wavefront
from .zsolver import SolverOptions, critical_speed, solve_z

EXIT_OK, EXIT_PRECONDITION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


def _floats(text: str):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str):
    return [int(v) for v in text.split(",") if v.strip()]


def _common(p: argparse.ArgumentParser):
    p.add_argument("--model", required=True, help="model spec file (JSON) or built-in model name")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--tol", type=float, default=None, help="solver relative tolerance (bisection width for cstar)")
    p.add_argument("--seed", type=int, default=0, help="seed for the weak-residual test functions")
    p.add_argument("--grid", type=int, default=4097, help="points of the uniform profile grid")
    p.add_argument("--eps-top", type=float, default=None, help="seed offset at rho_bar")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sharpfronts", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve for z(phi) at one speed")
    _common(p)
    p.add_argument("--c", type=float, required=True)

    p = sub.add_parser("profile", help="reconstruct a semi-wavefront profile")
    _common(p)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--direction", choices=DIRECTIONS, default="from-top")
    p.add_argument("--window", type=float, nargs=2, default=None, metavar=("XI_MIN", "XI_MAX"))

    p = sub.add_parser("classify", help="sharp/classical and strict/non-strict verdicts")
    _common(p)
    p.add_argument("--c", type=float, required=True)

    p = sub.add_parser("cstar", help="critical speed by bisection")
    _common(p)
    p.add_argument("--lo", type=float, default=0.0)
    p.add_argument("--hi", type=float, default=2.0)

    p = sub.add_parser("converge", help="convergence of g_n = g0 + (rho_bar - rho)/n")
    _common(p)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--n-list", type=_ints, default=[1, 2, 4, 8, 16, 32])

    p = sub.add_parser("paste", help="traveling waves through rho0")
    _common(p)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--pattern", choices=("phi1", "phi2", "phi3", "phi4", "plateau"), default="phi1")
    p.add_argument("--plateau-width", type=float, default=0.0)
    p.add_argument("--tests", type=int, default=20, help="test functions per junction")

    p = sub.add_parser("evolve", help="evolve the PDE from a computed profile")
    _common(p)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--direction", choices=DIRECTIONS, default="from-top")
    p.add_argument("--dx", type=float, default=1.0 / 512)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--scheme", choices=("explicit", "rkl2"), default="rkl2")
    p.add_argument("--frames", type=int, default=10)
    p.add_argument("--stride", type=int, default=1, help="write every stride-th cell")
    p.add_argument("--level", type=float, default=None, help="density level for the speed fit")
    p.add_argument("--domain", type=float, nargs=2, default=None, metavar=("X_MIN", "X_MAX"))
    p.add_argument("--frame-speed", type=float, default=0.0, help="evolve in a frame moving at this speed")
    p.add_argument("--boundary", choices=BOUNDARIES, default="dirichlet", help="end cells held fixed or zero-flux")

    p = sub.add_parser("sweep", help="solve and classify over several speeds and models")
    _common(p)
    p.add_argument("--c-list", type=_floats, required=True)
    p.add_argument("--jobs", type=int, default=1)
    return ap


def _opts(args) -> SolverOptions:
    kw = {}
    if args.tol is not None and args.command != "cstar":
        kw["rel_tol"] = args.tol
    if args.eps_top is not None:
        kw["eps_top"] = args.eps_top
    return SolverOptions(**kw)


def _load(args):
    model = load_model(args.model)
    report = validate_assumptions(model)
    if not report.ok:
        bad = report.failures()[0]
        raise PreconditionError(f"assumption {bad.tag} fails at rho={bad.witness!r}: {bad.detail}", witness=bad.witness)
    return model, report


def _path(args, name):
    return os.path.join(args.out, name)


def cmd_solve(args, model):
    z = solve_z(model, args.c, _opts(args))
    io.write_csv(_path(args, "z.csv"), ["phi", "z"], z.to_rows())
    io.write_json(_path(args, "z.meta.json"), z.sidecar())
    return {"command": "solve", "solution": z.sidecar()}


def cmd_profile(args, model):
    p = semi_wavefront(model, args.c, args.direction, _opts(args), window=args.window, n=args.grid)
    io.write_csv(_path(args, "profile.csv"), ["xi", "phi"], p.rows())
    io.write_json(_path(args, "profile.meta.json"), p.sidecar())
    return {"command": "profile", "profile": p.sidecar(), "warnings": p.meta.get("warnings", [])}


def cmd_classify(args, model):
    z = solve_z(model, args.c, _opts(args))
    cl = classify(model, args.c, z)
    io.write_json(_path(args, "classify.meta.json"), cl.sidecar())
    return {"command": "classify", "c": args.c, "classification": cl.sidecar()}


def cmd_cstar(args, model):
    tol = args.tol if args.tol is not None else 1e-6
    cs = critical_speed(model, args.lo, args.hi, tol=tol, opts=_opts(args))
    io.write_csv(_path(args, "cstar.csv"), ["c", "z0", "z0_is_zero"], cs.history)
    return {"command": "cstar", "c_star": cs.c_star, "c_lo": cs.c_lo, "c_hi": cs.c_hi, "tol": tol}


def cmd_converge(args, model):
    rep = run_convergence(model, args.n_list, args.c, opts=_opts(args), n_grid=args.grid)
    io.write_csv(_path(args, "convergence.csv"), ["n", "z_sup_err", "c0_err", "c1_err", "ordering_ok"], rep.rows())
    return {"command": "converge", "report": rep.to_dict()}


def cmd_paste(args, model):
    pieces = build_pieces(model, args.c, _opts(args), n=args.grid)
    res = paste(pieces, args.pattern, args.plateau_width)
    wr = weak_residuals(res, model, n=args.tests, seed=args.seed)
    side = res.sidecar()
    side.update(seed=args.seed, weak_residual_max=float(np.max(np.abs(wr))),
                range=[float(res.joined.phi_values.min()), float(res.joined.phi_values.max())])
    io.write_csv(_path(args, "paste.csv"), ["xi", "phi"], res.joined.rows())
    io.write_json(_path(args, "paste.meta.json"), side)
    return {"command": "paste", "paste": side}


def cmd_evolve(args, model):
    p = semi_wavefront(model, args.c, args.direction, _opts(args), n=args.grid)
    if args.domain is not None:
        a, b = args.domain
    else:
        lo = p.xi_grid[0] if math.isfinite(p.xi_grid[0]) else -10.0
        hi = p.xi_grid[-1]
        span = hi - lo
        a, b = lo - 0.5 * span, hi + 0.5 * span
        if math.isfinite(p.varpi) and abs(float(model.g(0.0))) > 1e-14:
            b = min(b, p.varpi) if p.direction == "from-top" else b
    n = int(round((b - a) / args.dx))
    x = b - args.dx * np.arange(n, -1, -1)
    f0 = field_from_profile(p, x)
    tr = evolve(f0, model, args.T, dt=args.dt, scheme=args.scheme, frames=args.frames, frame=args.frame_speed,
                boundary=args.boundary)
    rows = []
    for f in tr:
        xs = f.x_grid[:: args.stride] + args.frame_speed * f.time
        for xv, rv in zip(xs, f.values[:: args.stride]):
            rows.append((f.time, xv, rv))
    io.write_csv(_path(args, "trajectory.csv"), ["t", "x", "rho"], rows)
    out = {"command": "evolve", "c": args.c, "dx": args.dx, "T": args.T, "scheme": args.scheme,
           "sup_drift": sup_drift(tr[0], tr[-1]), "clamp_events": tr[-1].clamp_events}
    level = args.level if args.level is not None else 0.5 * model.rho_bar
    try:
        fit = measure_speed(tr, level)
        out.update(measured_speed=fit.speed, fit_residual=fit.residual, level=level)
    except NumericalError as exc:
        out.update(measured_speed=None, speed_error=str(exc))
    return out


def _sweep_one(model_name, c, out, opts_kw):
    model = load_model(model_name)
    z = solve_z(model, c, SolverOptions(**opts_kw))
    cl = classify(model, c, z)
    d = os.path.join(out, f"c={io.fmt(c)}")
    io.write_csv(os.path.join(d, "z.csv"), ["phi", "z"], z.to_rows())
    io.write_json(os.path.join(d, "z.meta.json"), z.sidecar())
    io.write_json(os.path.join(d, "classify.meta.json"), cl.sidecar())
    return {"c": c, "z0": z.z0, "kind": cl.kind, "front_slope": cl.front_slope, "monotonicity": cl.monotonicity}


def cmd_sweep(args, model):
    kw = {}
    if args.tol is not None:
        kw["rel_tol"] = args.tol
    if args.eps_top is not None:
        kw["eps_top"] = args.eps_top
    jobs = [(args.model, c, args.out, kw) for c in args.c_list]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            rows = list(ex.map(_sweep_one, *zip(*jobs)))
    else:
        rows = [_sweep_one(*j) for j in jobs]
    return {"command": "sweep", "runs": rows}


COMMANDS = {
    "solve": cmd_solve,
    "profile": cmd_profile,
    "classify": cmd_classify,
    "cstar": cmd_cstar,
    "converge": cmd_converge,
    "paste": cmd_paste,
    "evolve": cmd_evolve,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        model, report = _load(args)
        summary = COMMANDS[args.command](args, model)
        summary["model"] = model.name
        summary["assumptions"] = report.to_dict()
        if args.command == "paste":
            summary["seed"] = args.seed
        io.write_json(_path(args, "summary.json"), summary)
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(os.path.join(args.out, "summary.json"))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
