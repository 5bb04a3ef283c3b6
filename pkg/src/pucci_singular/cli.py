"""Command-line front end.

Every subcommand reads its inputs from flags and CSV files and writes JSON or
CSV. Numbers are written with 17 significant digits so that binary64 values
round-trip exactly. Exit status is 0 on success, 1 on a domain error (with a
one-line JSON object on stderr) and 2 on a usage error.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import inspect
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .barriers import _KINDS, KINDS, certify_sign, default_grid, make_barrier
from .classifier import classify
from .comparison import check_annulus, check_ball
from .constants import classify_regime, constants_for, explicit_K
from .emden_fowler import X_MAX, X_MIN, EFState, equilibria, integrate
from .errors import CertificationFailure, KUndefined, PucciSingularError
from .monotone_scheme import Case, run_scheme
from .radial_pucci import LogGrid, RadialFunction, residual_main

log = logging.getLogger("pucci_singular")

FLOAT_FMT = "%.17g"
JOBS_ENV = "PUCCI_SINGULAR_JOBS"


class UsageError(Exception):
    """Bad flag combination detected after argparse; exits with status 2."""


class InputError(PucciSingularError):
    code = "InputError"


# ------------------------------------------------------------------ output

def _encode(obj):
    """JSON text with floats at 17 significant digits."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return FLOAT_FMT % x
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    if hasattr(obj, "value"):  # enums
        return _encode(obj.value)
    return json.dumps(str(obj))


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline="\n"), True


def write_json(obj, path=None):
    fh, close = _open_out(path)
    try:
        fh.write(_encode(obj) + "\n")
    finally:
        if close:
            fh.close()


def write_csv(columns, header, path=None):
    data = np.column_stack([np.asarray(col, dtype=float) for col in columns]) if columns else None
    fh, close = _open_out(path)
    try:
        fh.write(",".join(header) + "\n")
        if data is not None:
            for row in data:
                fh.write(",".join(FLOAT_FMT % v for v in row) + "\n")
    finally:
        if close:
            fh.close()


def read_csv(path):
    """Columns of a headed, comma-separated numeric file."""
    try:
        data = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read {path}: {exc}", path=str(path)) from None
    if data.dtype.names is None or data.size == 0:
        raise InputError(f"{path} has no data rows", path=str(path))
    data = np.atleast_1d(data)
    cols = {name: np.asarray(data[name], dtype=float) for name in data.dtype.names}
    for name, col in cols.items():
        if np.isnan(col).any():
            row = int(np.argmax(np.isnan(col))) + 2
            raise InputError(f"{path}: non-numeric value in column {name!r} on line {row}",
                             path=str(path), column=name, line=row)
    return cols


def read_radial(path) -> RadialFunction:
    """``r,u[,du,ddu]`` CSV; missing derivatives come from finite differences."""
    cols = read_csv(path)
    if "r" not in cols or "u" not in cols:
        raise InputError(f"{path} needs columns r,u[,du,ddu]", path=str(path))
    try:
        grid = LogGrid.from_nodes(cols["r"])
    except ValueError as exc:
        raise InputError(f"{path}: {exc}", path=str(path)) from None
    if "du" in cols and "ddu" in cols:
        return RadialFunction(grid, cols["u"], cols["du"], cols["ddu"])
    if not grid.is_geometric(rtol=1e-6):
        raise InputError(f"{path}: finite differences need log-uniform radii", path=str(path))
    return RadialFunction.from_samples(grid, cols["u"])


def _constants(args, p=None):
    return constants_for(args.lam, args.Lam, args.N, args.mu, args.p if p is None else p)


def _require_p(args):
    if args.p is None:
        raise UsageError("--p is required for this subcommand")
    return args.p


# -------------------------------------------------------------- subcommands

def cmd_constants(args):
    c = _constants(args)
    out = c.as_dict()
    if args.p is not None:
        out["regime"] = classify_regime(args.p, c, args.eq_tol).name
    write_json(out, args.output)


def cmd_residual(args):
    p = _require_p(args)
    u = read_radial(args.input)
    res = residual_main(u, _constants(args), p)
    write_csv([u.r, res], ["r", "residual"], args.output)


_BARRIER_FLAGS = ("c", "gamma", "direction", "delta", "eps", "a", "b", "r0", "K1", "K2",
                  "u_r0", "C", "c1", "c2", "pairing")


def cmd_barrier(args):
    p = _require_p(args)
    c = _constants(args)
    accepted = set(inspect.signature(_KINDS[args.kind].build).parameters) - {"c", "p"}
    free = {}
    for name in _BARRIER_FLAGS:
        val = getattr(args, name, None)
        if val is None:
            continue
        key = "c_" if name == "c" else name
        if key not in accepted:
            raise UsageError(f"--{name.replace('_', '-')} does not apply to {args.kind}")
        free[name] = val
    b = make_barrier(args.kind, c, p, args.eq_tol, **free)
    grid = default_grid(b, n=args.nodes)
    cert = certify_sign(b, grid, strict=False)
    out = b.to_dict()
    out["certificate"] = dict(cert.__dict__)
    write_json(out, args.output)
    if args.csv:
        f = b.radial(grid)
        write_csv([f.r, f.u], ["r", "value"], args.csv)
    if not cert.holds:
        raise CertificationFailure(
            f"{args.kind} residual has the wrong sign at {cert.n_violations} nodes",
            worst_r=cert.worst_r, worst_margin=cert.worst_margin)


def cmd_ef_integrate(args):
    p = _require_p(args)
    c = _constants(args)
    start = EFState(args.t0, args.x0, args.xp0)
    traj = integrate(start, p, c, args.t_span, args.direction, args.rel_tol, args.abs_tol,
                     x_max=args.x_max, x_min=args.x_min, raise_on_failure=True)
    if traj.termination.value != "SpanReached":
        log.warning("integration stopped early: %s at t=%s", traj.termination.value,
                    FLOAT_FMT % traj.t[-1])
    write_csv([traj.t, traj.x, traj.xp], ["t", "x", "xp"], args.output)


def cmd_ef_equilibria(args):
    p = _require_p(args)
    eqs = equilibria(p, _constants(args))
    out = []
    for e in eqs:
        ev = [complex(z) for z in e.eigenvalues]
        real = all(z.imag == 0 for z in ev)
        out.append({"x": e.x,
                    "eigenvalues": [z.real for z in ev] if real else [[z.real, z.imag] for z in ev],
                    "saddle": bool(e.is_saddle)})
    write_json(out, args.output)


def cmd_scheme(args):
    p = _require_p(args)
    res = run_scheme(args.case, _constants(args), p, n_max=args.n_max, nodes=args.nodes,
                     eq_tol=args.eq_tol)
    out = res.to_dict()
    out["converged_radius"] = res.converged_radius()
    write_json(out, args.output)
    if args.csv:
        u = res.trusted_limit() if args.trusted else res.limit
        write_csv([u.r, u.u], ["r", "u"], args.csv)


def _tail_decades(args, u):
    span = math.log10(u.r[-1] / u.r[0]) - args.skip_decades
    if args.tail_decades is not None:
        return args.tail_decades
    if span < 3:
        log.warning("samples span %.3g decades; fitting over all of them", span)
    return min(3.0, span)


def cmd_classify(args):
    p = _require_p(args)
    c = _constants(args)
    u = read_radial(args.input)
    regime = classify_regime(p, c, args.eq_tol)
    if regime.name == "LogCritical" and u.r[0] > 1e-10:
        log.warning("log-critical fits need deep tails; r_min = %s > 1e-10", FLOAT_FMT % u.r[0])
    a = classify(u, c, p, tail_decades=_tail_decades(args, u), skip_decades=args.skip_decades,
                 eq_tol=args.eq_tol, slope_tol=args.slope_tol)
    write_json(a.to_dict(), args.output)


def cmd_scaled(args):
    cols = read_csv(args.input)
    if "r" not in cols or "u" not in cols:
        raise InputError(f"{args.input} needs columns r,u", path=str(args.input))
    r, u = cols["r"], cols["u"]
    scaled = r**args.exponent * u
    if args.log_exponent:
        scaled = scaled * (-np.log(r)) ** args.log_exponent
    write_csv([r, scaled], ["r", "scaled"], args.output)


def cmd_compare(args):
    p = _require_p(args)
    c = _constants(args)
    u, v = read_radial(args.u), read_radial(args.v)
    if args.mode == "annulus":
        if args.c1g is not None or args.c2g is not None:
            raise UsageError("--c1g/--c2g only apply to --mode ball")
        rep = check_annulus(u, v, c, p)
    else:
        rep = check_ball(u, v, c, p, c1g=args.c1g, c2g=args.c2g)
    write_json(rep.to_dict(), args.output)


# -------------------------------------------------------------------- sweep

SWEEP_COLUMNS = ("mu", "p", "regime", "p_star", "p_star_star", "tau_plus", "tau_minus", "K",
                 "case", "variant", "exponent", "constant", "error")
_AUTO_CASE = {"Subcritical": Case.TAU_PLUS, "Intermediate": Case.TAU_MINUS,
              "LogCritical": Case.LOG_CRITICAL}


def sweep_row(lam, Lam, N, mu, p, n_max=16, nodes=2048, eq_tol=1e-12):
    """One sweep row; domain errors are recorded in the ``error`` field."""
    row = dict.fromkeys(SWEEP_COLUMNS, None)
    row.update(mu=mu, p=p, error="")
    try:
        c = constants_for(lam, Lam, N, mu, p)
        regime = classify_regime(p, c, eq_tol)
        row.update(regime=regime.name, p_star=c.p_star, p_star_star=c.p_star_star,
                   tau_plus=c.tau_plus, tau_minus=c.tau_minus)
        try:
            row["K"] = explicit_K(p, c)
        except KUndefined:
            pass
        case = _AUTO_CASE.get(regime.name)
        if case is None:
            # no singular scheme in the supercritical range; the exact solution is classified
            row["case"] = "exact"
            grid = LogGrid.build(1e-8, 1.0, nodes)
            g = 2.0 / (p - 1)
            u = RadialFunction(grid, row["K"] * grid.nodes**-g, -g * row["K"] * grid.nodes**(-g - 1),
                               g * (g + 1) * row["K"] * grid.nodes**(-g - 2))
            tail = 3.0
        else:
            row["case"] = case.value
            res = run_scheme(case, c, p, n_max=n_max, nodes=nodes, eq_tol=eq_tol)
            u = res.trusted_limit()
            tail = min(1.0, math.log10(u.r[-1] / u.r[0]))
        a = classify(u, c, p, tail_decades=tail, eq_tol=eq_tol)
        row.update(variant=a.variant, exponent=a.exponent, constant=a.constant)
    except PucciSingularError as exc:
        row["error"] = f"{exc.code}: {exc}"
    return row


def _jobs_default():
    raw = os.environ.get(JOBS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_sweep(lam, Lam, N, mus, ps, jobs=1, **kw):
    """Rows for the cartesian product, in ``(mu, p)`` order whatever ``jobs`` is."""
    points = [(mu, p) for mu in mus for p in ps]
    if jobs <= 1 or len(points) <= 1:
        return [sweep_row(lam, Lam, N, mu, p, **kw) for mu, p in points]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        futs = [pool.submit(sweep_row, lam, Lam, N, mu, p, **kw) for mu, p in points]
        return [f.result() for f in futs]


def cmd_sweep(args):
    rows = run_sweep(args.lam, args.Lam, args.N, args.mu_list, args.p_list, jobs=args.jobs,
                     n_max=args.n_max, nodes=args.nodes, eq_tol=args.eq_tol)
    if args.format == "json":
        config = {"lambda": args.lam, "Lambda": args.Lam, "N": args.N, "mu": args.mu_list,
                  "p": args.p_list, "n_max": args.n_max, "nodes": args.nodes,
                  "eq_tol": args.eq_tol, "seed": args.seed}
        write_json({"config": config, "rows": rows}, args.output)
        return
    fh, close = _open_out(args.output)
    try:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for row in rows:
            cells = []
            for k in SWEEP_COLUMNS:
                v = row[k]
                if v is None:
                    cells.append("")
                elif isinstance(v, float):
                    cells.append(FLOAT_FMT % v)
                else:
                    cells.append(str(v).replace(",", ";").replace("\n", " "))
            fh.write(",".join(cells) + "\n")
    finally:
        if close:
            fh.close()


# ------------------------------------------------------------------- parser

def _float_list(text):
    if text.strip() == "":
        return []
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_params(sp, need_mu=True):
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--Lambda", dest="Lam", type=float, required=True)
    sp.add_argument("--N", type=float, required=True)
    if need_mu:
        sp.add_argument("--mu", type=float, required=True)
        sp.add_argument("--p", type=float, default=None)
    sp.add_argument("--eq-tol", type=float, default=1e-12)
    sp.add_argument("-o", "--output", default=None, help="output path (default stdout)")


def build_parser():
    ap = argparse.ArgumentParser(prog="pucci-singular", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--seed", type=int, default=0, help="seed recorded with randomized runs")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("constants", help="closed-form constants as JSON")
    _add_params(sp)
    sp.set_defaults(func=cmd_constants)

    sp = sub.add_parser("residual", help="residual of sampled u (CSV r,u[,du,ddu])")
    _add_params(sp)
    sp.add_argument("--input", required=True)
    sp.set_defaults(func=cmd_residual)

    sp = sub.add_parser("barrier", help="build and certify a catalogue barrier")
    _add_params(sp)
    sp.add_argument("--kind", required=True, choices=KINDS)
    for name in ("c", "gamma", "delta", "eps", "a", "b", "r0", "K1", "K2", "C", "c1", "c2"):
        sp.add_argument(f"--{name}", type=float, default=None)
    sp.add_argument("--u-r0", dest="u_r0", type=float, default=None)
    sp.add_argument("--direction", choices=("Sub", "Super"), default=None)
    sp.add_argument("--no-pairing", dest="pairing", action="store_const", const=False,
                    default=None)
    sp.add_argument("--nodes", type=int, default=2048)
    sp.add_argument("--csv", default=None, help="write r,value samples here")
    sp.set_defaults(func=cmd_barrier)

    ef = sub.add_parser("ef", help="Emden-Fowler system").add_subparsers(dest="ef_command",
                                                                          required=True)
    sp = ef.add_parser("integrate", help="integrate from (x0, xp0); CSV t,x,xp")
    _add_params(sp)
    sp.add_argument("--x0", type=float, required=True)
    sp.add_argument("--xp0", type=float, required=True)
    sp.add_argument("--t0", type=float, default=0.0)
    sp.add_argument("--t-span", type=float, required=True)
    sp.add_argument("--direction", choices=("forward", "backward"), default="forward")
    sp.add_argument("--rel-tol", type=float, default=1e-10)
    sp.add_argument("--abs-tol", type=float, default=1e-12)
    sp.add_argument("--x-max", type=float, default=X_MAX)
    sp.add_argument("--x-min", type=float, default=X_MIN)
    sp.set_defaults(func=cmd_ef_integrate)
    sp = ef.add_parser("equilibria", help="equilibria and their eigenvalues as JSON")
    _add_params(sp)
    sp.set_defaults(func=cmd_ef_equilibria)

    sp = sub.add_parser("scheme", help="monotone annulus scheme; JSON certificate")
    _add_params(sp)
    sp.add_argument("--case", required=True, type=Case.parse,
                    help="tau-plus, tau-minus or log-critical")
    sp.add_argument("--n-max", type=int, default=16)
    sp.add_argument("--nodes", type=int, default=2048)
    sp.add_argument("--csv", default=None, help="write the limit as r,u here")
    sp.add_argument("--full", dest="trusted", action="store_false",
                    help="write the whole limit instead of its converged range")
    sp.set_defaults(func=cmd_scheme)

    sp = sub.add_parser("classify", help="asymptotic class of CSV r,u samples")
    _add_params(sp)
    sp.add_argument("--input", required=True)
    sp.add_argument("--tail-decades", type=float, default=None,
                    help="fit window in decades (default 3, or the whole span if shorter)")
    sp.add_argument("--skip-decades", type=float, default=0.0)
    sp.add_argument("--slope-tol", type=float, default=None)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("scaled", help="CSV r, r^q u [(-log r)^k] for plotting")
    sp.add_argument("--input", required=True)
    sp.add_argument("--exponent", type=float, required=True)
    sp.add_argument("--log-exponent", type=float, default=0.0)
    sp.add_argument("-o", "--output", default=None)
    sp.set_defaults(func=cmd_scaled)

    sp = sub.add_parser("compare", help="comparison harness on CSV u and v")
    _add_params(sp)
    sp.add_argument("--u", required=True)
    sp.add_argument("--v", required=True)
    sp.add_argument("--mode", choices=("annulus", "ball"), required=True)
    sp.add_argument("--c1g", type=float, default=None)
    sp.add_argument("--c2g", type=float, default=None)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("sweep", help="regime, constants and class over a (mu, p) grid")
    _add_params(sp, need_mu=False)
    sp.add_argument("--mu", dest="mu_list", type=_float_list, required=True,
                    help="comma-separated values")
    sp.add_argument("--p", dest="p_list", type=_float_list, required=True,
                    help="comma-separated values")
    sp.add_argument("--jobs", type=int, default=_jobs_default())
    sp.add_argument("--n-max", type=int, default=16)
    sp.add_argument("--nodes", type=int, default=2048)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None):
    logging.basicConfig(format="%(levelname)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"{parser.prog}: error: {exc}\n")
        return 2
    except PucciSingularError as exc:
        sys.stderr.write(_encode(exc.to_dict()) + "\n")
        return 1
    except (ValueError, OSError) as exc:
        sys.stderr.write(_encode({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
