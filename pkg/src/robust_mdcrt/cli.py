"""Command-line front end.

Every subcommand reads one JSON document (a file path, ``-`` for stdin, or
the JSON text itself) and writes JSON to stdout; ``simulate`` writes CSV
unless ``--format json`` is given.

Exit status: 0 success, 1 domain error (``{"code", "message"}`` on
stderr), 2 malformed input.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Callable

from . import freqsim, intalg, lattice, mdcrt, realcrt
from .errors import AmbiguousClosestPointError, MDCRTError
from .serialize import (
    SchemaError,
    format_real,
    matrix_to_json,
    parse_matrix,
    parse_real_matrix,
    parse_real_vector,
    parse_vector,
    real_vector_to_json,
    vector_to_json,
)


class UsageError(Exception):
    """Malformed input; maps to exit status 2."""


def _load(source: str):
    try:
        if source == "-":
            return json.load(sys.stdin)
        if source.lstrip().startswith(("{", "[")):
            return json.loads(source)
        with open(source) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"invalid JSON: {exc}") from None
    except OSError as exc:
        raise UsageError(f"cannot read input: {exc}") from None


def _field(doc, name):
    if not isinstance(doc, dict):
        raise UsageError("input must be a JSON object")
    try:
        return doc[name]
    except KeyError:
        raise UsageError(f"missing field {name!r}") from None


def _moduli(doc) -> list:
    ms = _field(doc, "moduli")
    if not isinstance(ms, list):
        raise UsageError("'moduli' must be a list of matrices")
    return [parse_matrix(M) for M in ms]


def _optional_matrix(doc, name):
    return parse_matrix(doc[name]) if doc.get(name) is not None else None


def _optional_int(doc, name):
    v = doc.get(name)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, str)):
        raise UsageError(f"{name!r} must be an integer")
    try:
        return int(v)
    except ValueError:
        raise UsageError(f"{name!r} must be an integer") from None


def _pair_table(table: dict) -> list:
    return [{"i": i, "j": j, "value": format_real(v)} for (i, j), v in sorted(table.items())]


def _robust_result(res, system) -> dict:
    return {
        "lambda": _pair_table(system.lambda_table),
        "reference": system.reference,
        "robustness_bound": format_real(system.robustness_bound),
        "lcrm": matrix_to_json(system.lcrm),
        "cvp_points": [None if p is None else real_vector_to_json(p) for p in res.cvp_points],
        "cvp_unique": list(res.cvp_unique),
        "folding_vectors": [vector_to_json(n) for n in res.folding_vectors],
        "folded": [vector_to_json(f) for f in res.folded],
        "estimate": real_vector_to_json(res.estimate),
        "rounded": vector_to_json(res.rounded),
        "within_range": res.within_range,
    }


# --------------------------------------------------------------------------
# subcommands


def cmd_smith(doc, args):
    dec = intalg.smith_normal_form(parse_matrix(_field(doc, "matrix")))
    return {
        "U": matrix_to_json(dec.U), "S": matrix_to_json(dec.S), "V": matrix_to_json(dec.V),
        "invariant_factors": [str(x) for x in dec.invariant_factors],
    }


def cmd_gcld(doc, args):
    cert = intalg.gcld(parse_matrix(_field(doc, "M")), parse_matrix(_field(doc, "N")))
    return {"gcld": matrix_to_json(cert.L), "P": matrix_to_json(cert.P), "Q": matrix_to_json(cert.Q)}


def cmd_lcrm(doc, args):
    R = intalg.lcrm_many(_moduli(doc))
    return {"lcrm": matrix_to_json(R), "abs_det": str(abs(intalg.determinant(R)))}


def cmd_svp(doc, args):
    B = lattice.LatticeBasis(parse_real_matrix(_field(doc, "basis")), args.norm)
    v, length = B.shortest_vector()
    return {"vector": real_vector_to_json(v), "length": format_real(length)}


def cmd_cvp(doc, args):
    B = lattice.LatticeBasis(parse_real_matrix(_field(doc, "basis")), args.norm)
    res = B.closest_point(parse_real_vector(_field(doc, "target")))
    if not res.unique and not args.allow_ties:
        raise AmbiguousClosestPointError("closest lattice point is not unique")
    return {
        "point": real_vector_to_json(res.point),
        "coefficients": vector_to_json(res.coefficients),
        "distance": format_real(res.distance),
        "unique": res.unique,
    }


def cmd_crt(doc, args):
    moduli = _moduli(doc)
    rs = [parse_vector(r) for r in _field(doc, "remainders")]
    if doc.get("closed_form"):
        m = mdcrt.crt_closed_form_coprime(moduli, rs)
        R = moduli[0]
        for M in moduli[1:]:
            R = R @ M
    else:
        plan = mdcrt.plan_cascade(moduli, _optional_matrix(doc, "lcrm"))
        m, R = mdcrt.crt_reconstruct(plan, rs), plan.lcrm
    return {"m": vector_to_json(m), "lcrm": matrix_to_json(R)}


def cmd_robust_crt(doc, args):
    system = mdcrt.build_system(
        _moduli(doc), args.norm, _optional_int(doc, "reference"), _optional_matrix(doc, "lcrm"))
    rs = [parse_vector(r) for r in _field(doc, "remainders")]
    res = mdcrt.robust_reconstruct(system, rs, strict=not args.allow_ties)
    return _robust_result(res, system)


def cmd_robust_crt_real(doc, args):
    Psi = [parse_matrix(P) for P in _field(doc, "Psi")]
    system = realcrt.build_real_system(
        Psi, parse_real_matrix(_field(doc, "M")), args.norm,
        _optional_int(doc, "reference"), _optional_matrix(doc, "lcrm"))
    rs = [parse_real_vector(r) for r in _field(doc, "remainders")]
    res = realcrt.robust_reconstruct_real(system, rs, strict=not args.allow_ties)
    return _robust_result(res, system)


def cmd_redundant(doc, args):
    return {"redundant": [{"index": b, "witness": list(pair)} for b, pair in mdcrt.detect_redundant(_moduli(doc))]}


def cmd_bounds(doc, args):
    system = mdcrt.build_system(_moduli(doc), args.norm, _optional_int(doc, "reference"))
    return {
        "lambda": _pair_table(system.lambda_table),
        "reference": system.reference,
        "robustness_bound": format_real(system.robustness_bound),
        "per_modulus": [format_real(t) for t in mdcrt.per_modulus_bounds(system)],
        "lcrm": matrix_to_json(system.lcrm),
    }


def cmd_simulate(doc, args):
    if not isinstance(doc, dict):
        raise UsageError("config must be a JSON object")
    doc = dict(doc)
    if args.seed is not None:
        doc["rng_seed"] = args.seed
    if args.trials is not None:
        doc["trials"] = args.trials
    if args.norm_given:
        doc["norm"] = args.norm
    try:
        config = freqsim.ExperimentConfig.from_dict(doc)
    except (KeyError, TypeError) as exc:
        raise UsageError(f"bad experiment config: {exc}") from None
    result = freqsim.run_sweep(config)
    if args.format == "csv":
        return result.to_csv()
    return {
        "mode": result.mode,
        "points": [
            {
                "grid_value": format_real(p.grid_value),
                "mean_error": format_real(p.mean_error),
                "mean_relative_error": format_real(p.mean_relative_error),
                "detection_probability": format_real(p.detection_probability),
                "trials": p.trials,
            }
            for p in result.points
        ],
    }


COMMANDS: dict[str, tuple[Callable, str]] = {
    "smith": (cmd_smith, "Smith normal form U M V = S of {'matrix'}"),
    "gcld": (cmd_gcld, "gcld with Bezout matrices of {'M', 'N'}"),
    "lcrm": (cmd_lcrm, "lcrm of {'moduli'}"),
    "svp": (cmd_svp, "shortest vector of {'basis'}"),
    "cvp": (cmd_cvp, "closest lattice point of {'basis'} to {'target'}"),
    "crt": (cmd_crt, "exact CRT of {'moduli', 'remainders'}"),
    "robust-crt": (cmd_robust_crt, "robust CRT of {'moduli', 'remainders'}"),
    "robust-crt-real": (cmd_robust_crt_real, "robust CRT of real remainders {'Psi', 'M', 'remainders'}"),
    "redundant": (cmd_redundant, "redundant moduli of {'moduli'}"),
    "bounds": (cmd_bounds, "robustness bounds of {'moduli'}"),
    "simulate": (cmd_simulate, "frequency-estimation sweep from an experiment config"),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="robust-mdcrt", description="Multidimensional CRT toolkit.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        s = sub.add_parser(name, help=help_text)
        s.add_argument("input", help="JSON file, '-' for stdin, or inline JSON")
        s.add_argument("-o", "--output", help="write the result here instead of stdout")
        s.add_argument("--norm", choices=lattice.NORMS, default=None)
        if name in ("cvp", "robust-crt", "robust-crt-real"):
            s.add_argument("--allow-ties", action="store_true",
                           help="return a flagged result instead of failing on a closest-point tie")
        if name == "simulate":
            s.add_argument("--seed", type=int)
            s.add_argument("--trials", type=int)
            s.add_argument("--format", choices=("csv", "json"), default="csv")
    return p


def _emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    args.norm_given = args.norm is not None
    if args.norm is None:
        args.norm = "l2"
    handler = COMMANDS[args.command][0]
    try:
        doc = _load(args.input)
        out = handler(doc, args)
    except (UsageError, SchemaError) as exc:
        print(json.dumps({"code": "malformed_input", "message": str(exc)}), file=sys.stderr)
        return 2
    except MDCRTError as exc:
        print(json.dumps({"code": exc.code, "message": str(exc)}), file=sys.stderr)
        return 1
    except ValueError as exc:
        print(json.dumps({"code": "domain_error", "message": str(exc)}), file=sys.stderr)
        return 1
    text = out if isinstance(out, str) else json.dumps(out, indent=2) + "\n"
    _emit(text, args.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
