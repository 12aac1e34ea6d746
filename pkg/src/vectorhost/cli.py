"""Command-line interface: ``vectorhost <subcommand> [options]``.

Exit codes: 0 success, 1 a verification verdict failed, 2 usage error,
3 bad model configuration, 4 bad numerics, 5 computation failure.  Every
failure also writes a one-line JSON error record to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .analytic import ConstantParams, constant_case_report
from .discretization import build_grid
from .dynamics_check import check_threshold_dynamics
from .errors import VectorHostError
from .model import (HeterogeneityParams, constant_spec, load_spec, parametric_spec,
                    validate_model)
from .numerics import Numerics
from .periodic import find_periodic_orbit, logistic_upper_state
from .solver import StateField, simulate_full, simulate_modified, write_trajectory_csv
from .spectral import SCHEMA_VERSION, _clean, threshold_quantities
from .sweep import OUTPUTS, SweepSpec, run_sweep, write_metadata, write_table

# "section5" is accepted as an alias of the cosine-modulated parametric family
FAMILY_ALIASES = {"section5": "parametric"}
FAMILIES = ("parametric", "constant", *FAMILY_ALIASES)

EXIT_OK, EXIT_FAILED_CHECK, EXIT_USAGE, EXIT_CONFIG, EXIT_NUMERICS, EXIT_COMPUTE = 0, 1, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, code, kind, message):
        super().__init__(message)
        self.code = code
        self.kind = kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error(EXIT_USAGE, "usage", message)
        self.print_usage(sys.stderr)
        sys.exit(EXIT_USAGE)


def _emit_error(code, kind, message):
    rec = {"error": kind, "message": message, "exit_code": code, "schema_version": SCHEMA_VERSION}
    print(json.dumps(rec), file=sys.stderr)


def _family(name):
    return FAMILY_ALIASES.get(name, name)


def _floats(text, count=None, sep=","):
    try:
        vals = [float(v) for v in text.split(sep)]
    except ValueError:
        raise CliError(EXIT_CONFIG, "config", f"cannot parse numbers from {text!r}") from None
    if count is not None and len(vals) != count:
        raise CliError(EXIT_CONFIG, "config", f"expected {count} values, got {len(vals)}")
    return vals


# -- option groups ----------------------------------------------------------

def _model_args(p):
    g = p.add_argument_group("model")
    g.add_argument("--config", help="JSON model configuration document")
    g.add_argument("--family", choices=FAMILIES,
                   help="built-in family instead of --config")
    g.add_argument("--p", help="p1,p2,p3,p4 for the parametric family")
    g.add_argument("--q", help="q1,q2,q3,q4 for the parametric family")
    g.add_argument("--params", help="a1,b1,c1,l1,a2,b2,c2,l2 for the constant family")
    g.add_argument("--bc", choices=("neumann", "dirichlet"), default="neumann",
                   help="boundary type for built-in families")


def _numerics_args(p):
    g = p.add_argument_group("numerics")
    g.add_argument("--N", type=int, help="grid intervals (default 200)")
    g.add_argument("--dt", type=float, help="time step (default T/1000)")
    g.add_argument("--orbit-tol", type=float)
    g.add_argument("--max-periods", type=int)
    g.add_argument("--eig-tol", type=float)
    g.add_argument("--max-iter", type=int)
    g.add_argument("--root-rtol", type=float)
    g.add_argument("--no-richardson", action="store_true",
                   help="report raw values at dt instead of the dt, dt/2 combination")


def _output_args(p, default_format="json"):
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default=default_format)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vectorhost", description="Periodic vector-host epidemic models")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="integrate the full system")
    _model_args(s), _numerics_args(s), _output_args(s, "csv")
    s.add_argument("--t-end", type=float, required=True)
    s.add_argument("--init", required=True,
                   help="four profiles hu;hi;vu;vi (numbers or expressions in x)")
    s.add_argument("--save-every", type=int, default=1)
    s.add_argument("--layout", choices=("long", "average"), default="long")
    s.add_argument("--system", choices=("full", "modified"), default="full")

    s = sub.add_parser("periodic", help="extract a periodic orbit")
    _model_args(s), _numerics_args(s), _output_args(s, "csv")
    s.add_argument("--system", choices=("full", "host", "vector"), default="full")
    s.add_argument("--init", help="hu;hi;vu;vi for the full system (default: constants)")

    for name, text in (("eigen", "principal eigenvalues zeta1, zeta2, lambda"),
                       ("r0", "reproduction numbers R01, R02, R0")):
        s = sub.add_parser(name, help=text)
        _model_args(s), _numerics_args(s), _output_args(s)

    s = sub.add_parser("verify-constant", help="numeric vs closed form, constant coefficients")
    s.add_argument("--params", required=True, help="a1,b1,c1,l1,a2,b2,c2,l2")
    s.add_argument("--tolerance", type=float, default=1e-3)
    _numerics_args(s), _output_args(s)

    s = sub.add_parser("sweep", help="threshold quantities on a parameter lattice")
    s.add_argument("--spec", help="JSON sweep specification")
    s.add_argument("--vary", action="append", default=[], metavar="NAME:LO:HI:COUNT")
    s.add_argument("--fix", action="append", default=[], metavar="NAME=VALUE")
    s.add_argument("--link", action="append", default=[], metavar="NAME=[-]SOURCE")
    s.add_argument("--outputs", default=",".join(OUTPUTS))
    s.add_argument("--family", choices=FAMILIES, default="parametric")
    s.add_argument("--workers", type=int)
    s.add_argument("--out", required=True, help="CSV destination")
    s.add_argument("--meta", help="metadata JSON (default: <out>.meta.json)")
    _numerics_args(s)

    s = sub.add_parser("dynamics-check", help="long-run behaviour vs threshold prediction")
    _model_args(s), _numerics_args(s), _output_args(s)
    s.add_argument("--init", required=True, help="hu;hi;vu;vi")
    s.add_argument("--horizon", type=int, default=500)
    s.add_argument("--tol", type=float, default=1e-3)
    return parser


# -- builders ---------------------------------------------------------------

def _config_doc(args):
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                return json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(EXIT_CONFIG, "config", f"cannot read {args.config}: {exc}") from None
    return {}


def build_model(args):
    try:
        if args.config:
            if args.family:
                raise CliError(EXIT_CONFIG, "config", "use either --config or --family")
            spec = load_spec(args.config)
        elif _family(args.family) == "parametric":
            p = _floats(args.p, 4) if args.p else [0.0] * 4
            q = _floats(args.q, 4) if args.q else [0.0] * 4
            spec = parametric_spec(HeterogeneityParams.from_pq(p, q), args.bc)
        elif args.family == "constant":
            if not args.params:
                raise CliError(EXIT_CONFIG, "config", "--family constant needs --params")
            spec = constant_spec(_floats(args.params, 8), bc=args.bc)
        else:
            raise CliError(EXIT_CONFIG, "config", "a model is required: --config or --family")
    except VectorHostError as exc:
        raise CliError(EXIT_CONFIG, "config", str(exc)) from None
    report = validate_model(spec)
    if not report.ok:
        raise CliError(EXIT_CONFIG, "config", "; ".join(report.violations))
    return spec


def build_numerics(args, doc=None) -> Numerics:
    base = dict((doc or {}).get("numerics", {}))
    for flag, key in (("N", "N"), ("dt", "dt"), ("orbit_tol", "orbit_tol"),
                      ("max_periods", "max_periods"), ("eig_tol", "eig_tol"),
                      ("max_iter", "max_iter"), ("root_rtol", "root_rtol")):
        v = getattr(args, flag, None)
        if v is not None:
            base[key] = v
    if getattr(args, "no_richardson", False):
        base["richardson"] = False
    try:
        return Numerics(**base)
    except (VectorHostError, TypeError) as exc:
        raise CliError(EXIT_NUMERICS, "numerics", str(exc)) from None


def _init_state(text, n, length):
    grid = build_grid(length, n)
    parts = [s.strip() for s in text.split(";")]
    if len(parts) != 4:
        raise CliError(EXIT_CONFIG, "config", "--init needs four profiles separated by ';'")
    vals = []
    for s in parts:
        try:
            vals.append(float(s))
        except ValueError:
            vals.append(s)
    try:
        return StateField.from_expressions(grid, vals)
    except (VectorHostError, SyntaxError) as exc:
        raise CliError(EXIT_CONFIG, "config", f"bad initial data: {exc}") from None


def _write(args, text):
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(record) -> str:
    return json.dumps(_clean(record), indent=2) + "\n"


def _check_dt(num, spec):
    try:
        return num.step(spec.period)
    except VectorHostError as exc:
        raise CliError(EXIT_NUMERICS, "numerics", str(exc)) from None


# -- commands ---------------------------------------------------------------

def cmd_simulate(args):
    spec = build_model(args)
    num = build_numerics(args, _config_doc(args))
    dt = _check_dt(num, spec)
    init = _init_state(args.init, num.N, spec.length)
    fn = simulate_modified if args.system == "modified" else simulate_full
    traj = fn(spec, init, args.t_end, dt, args.save_every)
    if args.format == "csv":
        if args.out:
            traj.to_csv(args.out, args.layout)
        else:
            write_trajectory_csv(traj, sys.stdout, args.layout)
    else:
        avg = traj.spatial_average()
        _write(args, _dump({"times": traj.times.tolist(),
                            "averages": {c: avg[:, i].tolist() for i, c in enumerate(traj.components)},
                            "metadata": traj.metadata, "schema_version": SCHEMA_VERSION}))
    return EXIT_OK


def cmd_periodic(args):
    spec = build_model(args)
    num = build_numerics(args, _config_doc(args))
    dt = _check_dt(num, spec)
    if args.system == "full":
        if args.init:
            init = _init_state(args.init, num.N, spec.length)
        else:
            H = logistic_upper_state("host", spec, num.N)[0]
            V = logistic_upper_state("vector", spec, num.N)[0]
            init = StateField(0.5 * H, 0.5 * H, 0.5 * V, 0.5 * V)
    else:
        init = logistic_upper_state(args.system, spec, num.N)
    orbit = find_periodic_orbit(args.system, spec, init, num.orbit_tol, num.max_periods, dt=dt)
    if args.format == "csv":
        if not args.out:
            raise CliError(EXIT_USAGE, "usage", "CSV orbit export needs --out")
        orbit.to_csv(args.out)
    else:
        avg = orbit.values.mean(axis=(0, 2))
        _write(args, _dump({"system": args.system, "residual": orbit.residual,
                            "periods_used": orbit.periods_used, "dt": orbit.dt,
                            "N": num.N, "mean": dict(zip(orbit.components, avg.tolist())),
                            "min": float(orbit.values.min()), "schema_version": SCHEMA_VERSION}))
    return EXIT_OK


def _threshold(args):
    spec = build_model(args)
    num = build_numerics(args, _config_doc(args))
    _check_dt(num, spec)
    return threshold_quantities(spec, num)


def cmd_eigen(args):
    rep = _threshold(args)
    rec = {"zeta1": rep.zeta1, "zeta2": rep.zeta2, "lambda": rep.lam, "status": rep.status,
           "diagnostics": rep.diagnostics, "schema_version": SCHEMA_VERSION}
    return _emit_record(args, rec, ("zeta1", "zeta2", "lambda"))


def cmd_r0(args):
    rep = _threshold(args)
    note = None
    if rep.R0 is not None and rep.lam is not None:
        same = (rep.R0 > 1) == (rep.lam < 0) or abs(rep.R0 - 1) < 1e-6
        note = "sign(R0-1) = sign(-lambda)" if same else "SIGN MISMATCH between R0-1 and -lambda"
    rec = {"R01": rep.R01, "R02": rep.R02, "R0": rep.R0, "lambda": rep.lam,
           "zeta1": rep.zeta1, "zeta2": rep.zeta2, "status": rep.status, "sign_check": note,
           "diagnostics": rep.diagnostics, "schema_version": SCHEMA_VERSION}
    return _emit_record(args, rec, ("R01", "R02", "R0"))


def _emit_record(args, rec, keys):
    if args.format == "csv":
        text = "quantity,value\n" + "".join(
            f"{k},{'' if rec[k] is None else format(rec[k], '.12g')}\n" for k in keys)
        _write(args, text)
    else:
        _write(args, _dump(rec))
    return EXIT_OK


def _rel(a, b):
    if a is None or b is None:
        return None
    return abs(a - b) / max(abs(b), 1e-300) if b != 0 else abs(a)


def cmd_verify_constant(args):
    try:
        params = ConstantParams.from_values(_floats(args.params, 8))
    except VectorHostError as exc:
        raise CliError(EXIT_CONFIG, "config", str(exc)) from None
    num = build_numerics(args)
    spec = constant_spec(params.as_dict())
    dt = _check_dt(num, spec)
    exact = constant_case_report(params)
    rep = threshold_quantities(spec, num)
    rows = []
    for key, ex in (("zeta1", exact.zeta1), ("zeta2", exact.zeta2), ("R01", exact.R01),
                    ("R02", exact.R02), ("lambda", exact.lam), ("R0", exact.R0)):
        rows.append({"quantity": key, "numeric": rep.value(key), "closed_form": ex,
                     "rel_gap": _rel(rep.value(key), ex)})
    if exact.equilibrium is not None:
        grid = build_grid(1.0, num.N)
        H, V = exact.H, exact.V
        init = StateField.constant(grid, 0.5 * H, 0.5 * H, 0.5 * V, 0.5 * V)
        orbit = find_periodic_orbit("full", spec, init, num.orbit_tol, num.max_periods, dt=dt)
        final = orbit.values[-1]
        for i, name in enumerate(("Hu", "Hi", "Vu", "Vi")):
            sup_gap = float(np.max(np.abs(final[i] - exact.equilibrium[i])))
            rows.append({"quantity": name, "numeric": float(final[i].mean()),
                         "closed_form": exact.equilibrium[i],
                         "rel_gap": sup_gap / exact.equilibrium[i]})
    gaps = [r["rel_gap"] for r in rows if r["rel_gap"] is not None]
    worst = max(gaps) if gaps else 0.0
    ok = worst < args.tolerance
    if args.format == "csv":
        lines = ["quantity,numeric,closed_form,rel_gap"]
        for r in rows:
            lines.append(",".join([r["quantity"]] + [
                "" if r[k] is None else format(r[k], ".12g")
                for k in ("numeric", "closed_form", "rel_gap")]))
        _write(args, "\n".join(lines) + "\n")
    else:
        _write(args, _dump({"rows": rows, "max_rel_gap": worst, "tolerance": args.tolerance,
                            "pass": ok, "regime": exact.regime.value,
                            "schema_version": SCHEMA_VERSION}))
    return EXIT_OK if ok else EXIT_FAILED_CHECK


def _parse_link(text):
    try:
        name, src = text.split("=")
    except ValueError:
        raise CliError(EXIT_CONFIG, "config", f"bad --link {text!r}") from None
    src = src.strip()
    factor = 1.0
    if src.startswith("-"):
        factor, src = -1.0, src[1:]
    return name.strip(), (src, factor)


def cmd_sweep(args):
    try:
        if args.spec:
            with open(args.spec, encoding="utf-8") as fh:
                doc = json.load(fh)
        else:
            doc = {"family": _family(args.family), "varied": [], "fixed": {}, "linked": {}}
            for v in args.vary:
                parts = v.split(":")
                if len(parts) != 4:
                    raise CliError(EXIT_CONFIG, "config", f"bad --vary {v!r}")
                doc["varied"].append([parts[0], float(parts[1]), float(parts[2]), int(parts[3])])
            for f in args.fix:
                k, _, val = f.partition("=")
                doc["fixed"][k.strip()] = float(val)
            for ln in args.link:
                k, v = _parse_link(ln)
                doc["linked"][k] = list(v)
            doc["outputs"] = [o.strip() for o in args.outputs.split(",") if o.strip()]
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        if isinstance(exc, VectorHostError):
            raise
        raise CliError(EXIT_CONFIG, "config", str(exc)) from None
    num = build_numerics(args, doc)
    doc = {**doc, "numerics": num}
    try:
        spec = SweepSpec.from_dict(doc)
    except (VectorHostError, KeyError, TypeError) as exc:
        raise CliError(EXIT_CONFIG, "config", f"invalid sweep specification: {exc}") from None
    table = run_sweep(spec, args.workers)
    write_table(table, args.out)
    write_metadata(table, args.meta or f"{args.out}.meta.json")
    return EXIT_OK


def cmd_dynamics_check(args):
    spec = build_model(args)
    num = build_numerics(args, _config_doc(args))
    _check_dt(num, spec)
    init = _init_state(args.init, num.N, spec.length)
    rep = check_threshold_dynamics(spec, init, args.horizon, args.tol, num)
    _write(args, rep.to_json(indent=2) + "\n")
    return EXIT_OK if rep.verdict != "fail" else EXIT_FAILED_CHECK


COMMANDS = {
    "simulate": cmd_simulate,
    "periodic": cmd_periodic,
    "eigen": cmd_eigen,
    "r0": cmd_r0,
    "verify-constant": cmd_verify_constant,
    "sweep": cmd_sweep,
    "dynamics-check": cmd_dynamics_check,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        _emit_error(exc.code, exc.kind, str(exc))
        return exc.code
    except VectorHostError as exc:
        _emit_error(EXIT_COMPUTE, type(exc).__name__, str(exc))
        return EXIT_COMPUTE
    except OSError as exc:
        _emit_error(EXIT_COMPUTE, "io", str(exc))
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
