"""Command-line front end.

Exit status: 0 success, 1 bad input, 2 walk not transient or rate not
almost surely constant, 3 methods disagree (``compare``).
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys

import numpy as np

from . import io
from .amalgam.encode import encode_as_regular_language
from .amalgam.model import recurrence_check, validate_amalgam
from .amalgam.rates import applicable_methods, default_method, dgf_terms, exit_rate, lp_terms, solve_amalgam_Gbar, solve_amalgam_H
from .exceptions import (AmalgamError, EscapeRateError, NoConvergence, NonDeterministicRate, NotTransient,
                         ParseError, RowDefect, SingularSystem, WalkError)
from .exit_chain import escape_rate
from .simulate import SimConfig, simulate_amalgam, simulate_walk
from .walk import validate_walk

EXIT_OK, EXIT_INPUT, EXIT_RATE, EXIT_DISAGREE = 0, 1, 2, 3


class _Fail(Exception):
    def __init__(self, code, report):
        super().__init__(code)
        self.code = code
        self.report = report


def _sig(x, digits):
    """Round floats (recursively) to ``digits`` significant digits."""
    if isinstance(x, dict):
        return {k: _sig(v, digits) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_sig(v, digits) for v in x]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if x == 0 or not np.isfinite(x):
            return x if np.isfinite(x) else str(x)
        return float(f"{x:.{digits}g}")
    if isinstance(x, np.integer):
        return int(x)
    return x


def _load(path):
    kind = io.file_kind(path)
    model = io.parse_walk_file(path) if kind == "walk" else io.parse_amalgam_file(path)
    return kind, model


def _base(args, kind):
    return {"command": args.command, "input": str(args.file), "digest": io.file_digest(args.file),
            "kind": kind}


# ---- solving ----------------------------------------------------------------

def _walk_methods(args, walk, report):
    if args.method not in ("exit-time", "all", None):
        raise _Fail(EXIT_INPUT, {**report, "error": f"method {args.method!r} applies to amalgams only"})
    try:
        rep = escape_rate(walk, tol=args.tol, assume_all=args.assume_all_reachable or None)
    except NonDeterministicRate as exc:
        report["diagnostics"] = {"transient": True, "irreducible": False,
                                 "closed_class_count": len(exc.classes), "closed_classes": exc.classes}
        report["class_rates"] = getattr(exc, "class_rates", [])
        report["error"] = str(exc)
        raise _Fail(EXIT_RATE, report)
    report["diagnostics"] = {"transient": rep.transient, "irreducible": rep.irreducible,
                             "closed_class_count": rep.closed_class_count, "residuals": rep.residuals}
    entry = {"ell": rep.ell}
    if rep.transient:
        entry.update({"Lambda": rep.Lambda, "Delta": rep.Delta, "speed": rep.speed_natural,
                      "nu": rep.nu.as_dict(), "xi": {str(k): v for k, v in _xi_dict(rep).items()}})
    report["methods"] = {"exit-time": entry}
    if not rep.transient:
        report["note"] = rep.note
        raise _Fail(EXIT_RATE, report)
    return report


def _xi_dict(rep):
    tens = rep.xi.tensors
    fmt = rep.xi.walk.format_word
    return {fmt(bc): float(rep.xi.pair_values[p]) for bc, p in tens.pair_index.items()}


def _amalgam_method_list(args, spec, report):
    ok = applicable_methods(spec)
    if args.method in (None, "auto"):
        return [default_method(spec)]
    if args.method == "all":
        return list(ok)
    if args.method not in ok:
        need = "the natural word length" if args.method == "limit-process" else \
            "lengths constant on double cosets H g H"
        raise _Fail(EXIT_INPUT, {**report, "error": f"the {args.method} formula needs {need}"})
    return [args.method]


def _amalgam_methods(args, spec, report, methods):
    diag = validate_amalgam(spec)
    if recurrence_check(spec):
        report["diagnostics"] = {"transient": False, "recurrent": True, "indices": list(diag.indices)}
        report["methods"] = {m: {"ell": 0.0} for m in methods}
        report["note"] = "two factors with index two: the walk is recurrent and the rate of escape is 0"
        raise _Fail(EXIT_RATE, report)
    H = solve_amalgam_H(spec, tol=args.tol)
    Gbar = None
    out = {}
    residuals = {"H": H.residual}
    for m in methods:
        if m in ("exit-time", "dgf") and Gbar is None:
            Gbar = solve_amalgam_Gbar(spec, H)
            residuals["Gbar"] = Gbar.residual
        if m == "exit-time":
            try:
                rep = exit_rate(spec, H=H, Gbar=Gbar)
            except NonDeterministicRate as exc:
                report["diagnostics"] = {"transient": True, "irreducible": False,
                                         "closed_class_count": len(exc.classes), "closed_classes": exc.classes}
                report["error"] = str(exc)
                raise _Fail(EXIT_RATE, report)
            out[m] = {"ell": rep.ell, "Lambda": rep.Lambda, "Delta": rep.Delta,
                      "nu": rep.nu.as_dict(), "xi": rep.xi.tolist()}
            residuals["stationary"] = rep.nu.residual
            residuals["kernel_rows"] = rep.kernel.row_defect
        elif m == "dgf":
            t = dgf_terms(spec, H=H, Gbar=Gbar)
            out[m] = {"ell": t.ell, "upsilon1": t.upsilon1, "upsilon2": t.upsilon2}
        elif m == "limit-process":
            t = lp_terms(spec, H=H)
            out[m] = {"ell": t.ell, "rho": t.rho.tolist(), "G_ee": t.G_ee, "xi": t.xi.tolist()}
        elif m == "encoded":
            rep = escape_rate(encode_as_regular_language(spec))
            out[m] = {"ell": rep.ell, "Lambda": rep.Lambda, "Delta": rep.Delta}
    report["diagnostics"] = {"transient": True, "recurrent": False, "indices": list(diag.indices),
                             "irreducible": True, "closed_class_count": 1,
                             "residuals": residuals}
    report["methods"] = out
    return report


def _agreement(report):
    ells = [v["ell"] for v in report.get("methods", {}).values()]
    return max((abs(a - b) for a, b in itertools.combinations(ells, 2)), default=0.0)


def cmd_solve(args):
    kind, model = _load(args.file)
    report = _base(args, kind)
    if kind == "walk":
        _walk_methods(args, model, report)
    else:
        _amalgam_methods(args, model, report, _amalgam_method_list(args, model, report))
    report["agreement"] = _agreement(report)
    return EXIT_OK, report


def cmd_compare(args):
    kind, model = _load(args.file)
    report = _base(args, kind)
    if kind == "walk":
        args.method = "exit-time"
        _walk_methods(args, model, report)
    else:
        args.method = "all"
        methods = _amalgam_method_list(args, model, report)
        if args.encoded:
            methods.append("encoded")
        _amalgam_methods(args, model, report, methods)
    agree = _agreement(report)
    report["agreement"] = agree
    report["agree_tol"] = args.agree_tol
    if agree > args.agree_tol:
        return EXIT_DISAGREE, report
    return EXIT_OK, report


def cmd_validate(args):
    kind, model = _load(args.file)
    report = _base(args, kind)
    if kind == "walk":
        d = validate_walk(model)
        report["diagnostics"] = {"stochastic": d.stochastic, "boundary_complete": d.boundary_complete,
                                 "letters": model.n_letters, "pair_rows": len(model.pair_rows),
                                 "reachable_pairs": sorted(str(p) for p in d.reachable_pairs)}
    else:
        d = validate_amalgam(model)
        report["diagnostics"] = {"factors": d.r, "indices": list(d.indices), "recurrent": d.recurrent,
                                 "subgroup_order": len(model.subgroup), "mass": d.mass}
    return EXIT_OK, report


def cmd_simulate(args):
    kind, model = _load(args.file)
    report = _base(args, kind)
    cfg = SimConfig(args.steps, args.trials, args.seed, args.burn_in)
    est = simulate_walk(model, cfg=cfg) if kind == "walk" else simulate_amalgam(model, cfg=cfg)
    report["simulation"] = {"mean": est.mean, "stderr": est.stderr, "trials": est.trials,
                            "steps": est.steps, "seed": args.seed}
    return EXIT_OK, report


def cmd_encode(args):
    kind, model = _load(args.file)
    if kind != "amalgam":
        raise _Fail(EXIT_INPUT, {"error": "encode takes an amalgam file"})
    walk = encode_as_regular_language(model)
    text = io.dump_yaml(io.walk_to_dict(walk))
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
        report = _base(args, kind)
        report["output"] = args.output
        report["letters"] = walk.n_letters
        report["pair_rows"] = len(walk.pair_rows)
        return EXIT_OK, report
    return EXIT_OK, text


# ---- output -----------------------------------------------------------------

def _human(report, digits) -> str:
    if isinstance(report, str):
        return report
    r = _sig(report, digits)
    lines = []
    for key in ("command", "input", "kind", "digest"):
        if key in r:
            lines.append(f"{key:<12} {r[key]}")
    for name, entry in r.get("methods", {}).items():
        lines.append(f"{name:<16} ell = {entry['ell']}")
        for k, v in entry.items():
            if k != "ell":
                lines.append(f"  {k:<14} {v}")
    for key in ("simulation", "diagnostics"):
        if key in r:
            lines.append(key)
            for k, v in r[key].items():
                lines.append(f"  {k:<18} {v}")
    for key in ("agreement", "agree_tol", "class_rates", "note", "error", "output", "letters", "pair_rows"):
        if key in r:
            lines.append(f"{key:<12} {r[key]}")
    return "\n".join(lines)


def _emit(report, args, stream):
    digits = getattr(args, "digits", 6)
    if isinstance(report, str):
        stream.write(report)
        return
    if getattr(args, "format", "table") == "json":
        json.dump(_sig(report, digits), stream, indent=2, ensure_ascii=False)
        stream.write("\n")
    else:
        stream.write(_human(report, digits) + "\n")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="escaperate",
                                description="Rate of escape of random walks on regular languages and amalgams.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help="walk or amalgam YAML file")
    common.add_argument("--format", choices=("table", "json"), default="table")
    common.add_argument("--digits", type=int, default=6, help="significant digits in reports")
    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--tol", type=float, default=1e-14, help="fixed-point residual tolerance")
    solver.add_argument("--assume-all-reachable", action="store_true",
                        help="treat every pair with a row as reachable (walks without boundary rows)")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check a file")
    s = sub.add_parser("solve", parents=[common, solver], help="compute the rate of escape")
    s.add_argument("--method", choices=("exit-time", "dgf", "limit-process", "all"), default=None)
    c = sub.add_parser("compare", parents=[common, solver], help="run every applicable method and compare")
    c.add_argument("--agree-tol", type=float, default=1e-8)
    c.add_argument("--encoded", action="store_true",
                   help="also run the regular-language engine on the encoded amalgam")
    m = sub.add_parser("simulate", parents=[common], help="Monte Carlo estimate")
    m.add_argument("--steps", type=int, default=100_000)
    m.add_argument("--trials", type=int, default=200)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--burn-in", type=float, default=0.0, help="fraction of steps discarded")
    e = sub.add_parser("encode", parents=[common], help="write an amalgam as a regular-language walk")
    e.add_argument("-o", "--output", default=None)
    return p


COMMANDS = {"validate": cmd_validate, "solve": cmd_solve, "compare": cmd_compare,
            "simulate": cmd_simulate, "encode": cmd_encode}


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        code, report = COMMANDS[args.command](args)
    except _Fail as fail:
        code, report = fail.code, fail.report
    except (ParseError, WalkError, AmalgamError, ValueError, OSError) as exc:
        code, report = EXIT_INPUT, {"command": args.command, "input": str(args.file),
                                    "error": f"{type(exc).__name__}: {exc}"}
    except (NotTransient, SingularSystem, NoConvergence, RowDefect, EscapeRateError) as exc:
        code, report = EXIT_RATE, {"command": args.command, "input": str(args.file),
                                   "error": f"{type(exc).__name__}: {exc}"}
    _emit(report, args, stdout if code in (EXIT_OK, EXIT_DISAGREE, EXIT_RATE) else stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
