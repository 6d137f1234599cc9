"""Command-line surface: analyze, moments, tail, bound, verify, sharpness, simulate.

Reports are emitted as CSV or JSON with a deterministic row order and floats
rendered to 17 significant digits, so identical invocations produce byte
identical files.  Exit codes: 0 success, 1 validation error, 2 verification
failure, 3 I/O or parse error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import bounds as bounds_mod
from . import exact_moments as em
from . import montecarlo as mc
from . import proof_lab as pl
from .chain_core import center_observable, load_chain_spec
from .errors import ChainConcError, ChainSpecError, ParamOutOfRange

_FLOAT_FMT = ".17g"


def _fmt_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, _FLOAT_FMT)
    return str(value)


def _json_value(value):
    if isinstance(value, float):
        # normalize through the 17-digit rendering so CSV and JSON agree
        return float(format(value, _FLOAT_FMT))
    return value


def emit_report(rows, columns, fmt: str, path=None) -> None:
    """Write homogeneous rows with a fixed column order.

    CSV always includes the header row (so an empty report is header-only);
    JSON preserves the column order inside each object.
    """
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt_cell(row.get(col)) for col in columns])
        text = buf.getvalue()
    elif fmt == "json":
        payload = [{col: _json_value(row.get(col)) for col in columns} for row in rows]
        text = json.dumps(payload, indent=2) + "\n"
    else:
        raise ParamOutOfRange(f"unknown format {fmt!r}")
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)


def _load_chain(path, need_f: bool):
    chain, f = load_chain_spec(path)
    if need_f and f is None:
        raise ParamOutOfRange(f"chain spec {path} carries no observable 'f'")
    return chain, f


# ---------------------------------------------------------------------------
# subcommand handlers

_BOUND_COLUMNS = [
    "bound_id", "q", "p", "n", "lambda", "a", "C", "rhs", "lhs", "lhs_method", "ratio", "valid",
]
_LEMMA_COLUMNS = ["lemma", "instance", "lhs", "rhs", "ratio", "passed", "conservative"]


def _cmd_analyze(args) -> int:
    chain, f = load_chain_spec(args.chain)
    print(f"states:      {chain.n_states}")
    print(f"pi:          {np.array2string(chain.pi, precision=12)}")
    print(f"lambda:      {format(chain.lam, _FLOAT_FMT)}")
    print(f"reversible:  {chain.reversible}")
    if f is not None:
        print(f"observable:  dim={f.dim} lattice={f.lattice is not None}")
    if args.out is not None:
        row = {
            "n_states": chain.n_states,
            "lambda": chain.lam,
            "reversible": chain.reversible,
            "pi": " ".join(format(x, _FLOAT_FMT) for x in chain.pi),
        }
        emit_report([row], ["n_states", "lambda", "reversible", "pi"], args.format, args.out)
    return 0


def _cmd_moments(args) -> int:
    chain, f = _load_chain(args.chain, need_f=True)
    n, K = args.n, int(args.q)
    table = em.exact_raw_moments(chain, f, n, K)
    fc = center_observable(f, chain.pi)
    dist = None
    if fc.lattice is not None and fc.values.ndim == 1:
        try:
            dist = em.exact_distribution(chain, fc, n)
        except ChainConcError:
            dist = None
    rows = []
    for k in range(K + 1):
        central = None
        if k >= 1:
            if dist is not None:
                central = em.abs_moment_from_distribution(dist, n, 0.0, k) ** (1.0 / k)
            elif k % 2 == 0:
                central = em.exact_central_abs_moment(chain, f, n, k) ** (1.0 / k)
        rows.append({"k": k, "raw": float(table.raw[k]), "central_norm": central})
    emit_report(rows, ["k", "raw", "central_norm"], args.format, args.out)
    return 0


def _cmd_tail(args) -> int:
    chain, f = _load_chain(args.chain, need_f=True)
    fc = center_observable(f, chain.pi)
    dist = em.exact_distribution(chain, fc, n=args.n)
    tail = em.tail_from_distribution(dist, args.n, 0.0, args.a)
    emit_report(
        [{"n": args.n, "a": args.a, "tail": tail}], ["n", "a", "tail"], args.format, args.out
    )
    return 0


def _bound_row(report: bounds_mod.BoundReport) -> dict:
    p = report.params
    return {
        "bound_id": report.bound_id,
        "q": p.get("q"),
        "p": p.get("p"),
        "n": p.get("n"),
        "lambda": p.get("lam"),
        "a": p.get("a"),
        "C": p.get("C"),
        "rhs": report.rhs,
        "lhs": report.lhs,
        "lhs_method": report.lhs_method,
        "ratio": report.ratio,
        "valid": report.valid,
    }


def _cmd_bound(args) -> int:
    kind = args.kind
    if args.chain is not None:
        if args.method == "mc" and args.seed is None:
            raise ParamOutOfRange("--method mc requires an explicit --seed")
        chain, f = _load_chain(args.chain, need_f=True)
        report = bounds_mod.compare(
            kind,
            chain,
            f,
            n=args.n,
            q=args.q,
            p=args.p,
            a=args.a,
            C=args.C,
            c=args.c,
            method=args.method,
            trials=args.trials,
            seed=args.seed if args.seed is not None else 0,
        )
    else:
        if args.lam is None:
            raise ParamOutOfRange("--lambda is required when no --chain is given")
        if kind == "moment":
            rhs = bounds_mod.moment_bound(args.q, args.lam, args.n, args.norm, args.C)
        elif kind == "gillman":
            rhs = bounds_mod.gillman_bound(args.q, args.lam, args.n, args.norm, args.C)
        elif kind == "subtwo":
            rhs = bounds_mod.subtwo_bound(args.q, args.lam, args.n, args.norm, args.C)
        elif kind == "tail":
            if args.a is None:
                raise ParamOutOfRange("--kind tail requires --a")
            rhs = bounds_mod.corollary_tail(args.a, args.q, args.lam, args.n, args.c)
        elif kind == "vector":
            if args.p is None:
                raise ParamOutOfRange("--kind vector requires --p")
            rhs = bounds_mod.vector_moment_bound(args.q, args.p, args.lam, args.n, args.norm, args.C)
        else:
            raise ParamOutOfRange(f"unknown bound kind {kind!r}")
        report = bounds_mod.BoundReport(
            bound_id=kind,
            params={"q": args.q, "p": args.p, "n": args.n, "lam": args.lam, "a": args.a, "C": args.C},
            rhs=rhs,
        )
    emit_report([_bound_row(report)], _BOUND_COLUMNS, args.format, args.out)
    return 0


def _verify_reports(args) -> list[pl.LemmaReport]:
    lemma = args.lemma
    cases = args.cases
    if lemma in ("increasing", "alternate", "splitting"):
        if args.seed is None:
            raise ParamOutOfRange(f"--lemma {lemma} draws random instances and needs --seed")
        rng = np.random.default_rng(args.seed)
        reports = []
        for _ in range(cases):
            if lemma == "increasing":
                inst = pl.random_increasing_instance(rng)
            elif lemma == "alternate":
                inst = pl.random_alternate_instance(rng)
            else:
                inst = pl.random_splitting_instance(rng)
            reports.append(pl.verify_lemma(lemma, inst))
        return reports
    if lemma == "finb":
        grid = pl.finb_grid()[:cases]
        return [pl.verify_lemma("finb", inst) for inst in grid]
    if lemma == "product_bound":
        ms = [args.m] if args.m is not None else list(range(1, min(cases, 8) + 1))
        return [pl.verify_product_bound(m) for m in ms]
    raise ParamOutOfRange(f"unknown lemma {lemma!r}")


def _cmd_verify(args) -> int:
    reports = _verify_reports(args)
    rows = [
        {
            "lemma": r.lemma,
            "instance": r.instance,
            "lhs": r.lhs,
            "rhs": r.rhs,
            "ratio": r.ratio,
            "passed": r.passed,
            "conservative": r.conservative,
        }
        for r in reports
    ]
    emit_report(rows, _LEMMA_COLUMNS, args.format, args.out)
    if args.lemma != "finb" and any(not r.passed for r in reports):
        return 2
    return 0


def _cmd_sharpness(args) -> int:
    ratio = bounds_mod.sharpness_ratio(args.family, args.lam, args.q, args.n, args.eps)
    row = {
        "bound_id": f"sharpness_{args.family}",
        "q": args.q,
        "p": None,
        "n": args.n,
        "lambda": args.lam,
        "a": None,
        "C": 1.0,
        "rhs": 1.0,
        "lhs": ratio,
        "lhs_method": "exact",
        "ratio": ratio,
        "valid": True,
    }
    emit_report([row], _BOUND_COLUMNS, args.format, args.out)
    return 0


def _cmd_simulate(args) -> int:
    chain, f = _load_chain(args.chain, need_f=True)
    rows = []
    if args.q is not None:
        est = mc.empirical_moment(chain, f, args.n, args.q, args.trials, args.seed, p=args.p or 2.0)
        rows.append(
            {"kind": "moment", "parameter": args.q, "value": est.value,
             "stderr": est.stderr, "trials": est.trials, "seed": est.seed}
        )
    if args.a is not None:
        est = mc.empirical_tail(chain, f, args.n, args.a, args.trials, args.seed, p=args.p or 2.0)
        rows.append(
            {"kind": "tail", "parameter": args.a, "value": est.value,
             "stderr": est.stderr, "trials": est.trials, "seed": est.seed}
        )
    if not rows:
        raise ParamOutOfRange("simulate needs --q and/or --a")
    emit_report(rows, ["kind", "parameter", "value", "stderr", "trials", "seed"], args.format, args.out)
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chainconc")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, chain_flag=True):
        if chain_flag:
            p.add_argument("--chain", help="path to a chain spec JSON file")
        p.add_argument("--out", help="report path (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("analyze", help="print chain size, law, gap value, reversibility")
    p.add_argument("chain", help="path to a chain spec JSON file")
    common(p, chain_flag=False)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("moments", help="exact raw and central moments of S_n")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--q", type=float, required=True, help="largest order")
    p.set_defaults(func=_cmd_moments)

    p = sub.add_parser("tail", help="exact deviation probability for a lattice observable")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--a", type=float, required=True)
    p.set_defaults(func=_cmd_tail)

    p = sub.add_parser("bound", help="evaluate a bound kernel, optionally against a chain")
    common(p)
    p.add_argument("--kind", required=True, choices=("moment", "gillman", "subtwo", "tail", "vector"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--p", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--norm", type=float, default=1.0, help="observable norm for kernel-only mode")
    p.add_argument("--method", choices=("exact", "mc"), default="exact")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("verify", help="run inequality checks and emit one row per report")
    common(p, chain_flag=False)
    p.add_argument("--lemma", required=True,
                   choices=("increasing", "alternate", "splitting", "finb", "product_bound"))
    p.add_argument("--cases", type=int, default=100)
    p.add_argument("--seed", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("sharpness", help="near-extremal family ratio against the bound kernel")
    common(p, chain_flag=False)
    p.add_argument("--family", required=True, choices=("theorem", "subtwo"))
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--eps", type=float)
    p.set_defaults(func=_cmd_sharpness)

    p = sub.add_parser("simulate", help="seeded empirical moments and tails")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--q", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=_cmd_simulate)

    return parser


def run(argv=None) -> int:
    """Parse argv and execute; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (ChainSpecError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ChainConcError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
