"""Command-line surface: tables, conditional states, sweeps, sampling,
estimation, fidelity, and figure-data reproduction.

Exit codes: 0 success, 2 usage error (argparse), 1 computation error.
Relative output paths honour $TWINBEAM_OUTDIR.  All numeric output uses
full-precision, locale-independent formatting.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import serialize
from .conditional import (
    ConditionalState,
    SelectionRule,
    build_conditional,
    cond_count_dist,
)
from .core import joint_table, marginal_dist
from .errors import TwinbeamError
from .estimation import estimate_params, fidelity
from .figures import FIGURE_IDS, reproduce
from .nongauss import nongauss_report, sweep
from .params import ExperimentParams
from .sampling import sample_run

_AXIS_FLAGS = {"mt": "M_t", "t": "t", "eta": "eta", "mu": "mu"}


def _add_params(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mu", type=float, required=True, help="number of modes (>= 1)")
    parser.add_argument("--eta", type=float, required=True, help="detection efficiency in (0, 1)")
    parser.add_argument("--mean", type=float, required=True, help="mean counts per beam")


def _add_output(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", default=None, help="output path (default: stdout)")
    parser.add_argument("--format", choices=("csv", "json"), default=None,
                        help="output format (default: from extension, else csv)")


def _params(args) -> ExperimentParams:
    return ExperimentParams(args.mu, args.eta, args.mean)


def _pick_format(args) -> str:
    if args.format:
        return args.format
    if args.out and str(args.out).lower().endswith(".json"):
        return "json"
    return "csv"


def _emit(args, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text)
    else:
        path = serialize.write_text(args.out, text)
        print(f"wrote {path}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twinbeam",
        description="Counting statistics of multimode twin-beam light: joint and "
                    "conditional distributions, nonGaussianity, sampling, inference.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("joint", help="joint count probability table")
    _add_params(p)
    p.add_argument("--tol", type=float, default=1e-12)
    _add_output(p)

    p = sub.add_parser("marginal", help="one-beam count distribution")
    _add_params(p)
    p.add_argument("--tol", type=float, default=1e-12)
    _add_output(p)

    p = sub.add_parser("conditional", help="count distribution of a selected state")
    _add_params(p)
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--t", type=int, help="exact trigger count")
    grp.add_argument("--above", type=int, help="keep t > threshold (strict)")
    grp.add_argument("--below", type=int, help="keep t < threshold (strict)")
    grp.add_argument("--at-least", type=int, help="keep t >= threshold (inclusive)")
    grp.add_argument("--at-most", type=int, help="keep t <= threshold (inclusive)")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--verify", action="store_true",
                   help="cross-check the Bayes route against the measurement route")
    p.add_argument("--state-out", default=None,
                   help="also write the spectral state JSON (exact rule only)")
    _add_output(p)

    p = sub.add_parser("nongauss", help="entropy gap of an exact-trigger state")
    _add_params(p)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--tol", type=float, default=1e-12)
    _add_output(p)

    p = sub.add_parser("sweep", help="renormalised nonGaussianity along one axis")
    p.add_argument("--axis", choices=sorted(_AXIS_FLAGS), required=True)
    p.add_argument("--values", required=True, help="comma-separated grid values")
    p.add_argument("--mt", type=float, help="fixed conditional mean")
    p.add_argument("--t", type=float, help="fixed trigger count")
    p.add_argument("--eta", type=float, help="fixed efficiency")
    p.add_argument("--mu", type=float, help="fixed mode count")
    p.add_argument("--tol", type=float, default=1e-12)
    _add_output(p)

    p = sub.add_parser("sample", help="synthetic shot record from the model")
    _add_params(p)
    p.add_argument("--shots", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--workers", type=int, default=1)
    _add_output(p)

    p = sub.add_parser("estimate", help="recover parameters from a shot record")
    p.add_argument("--input", required=True, help="shot record (csv or json)")
    p.add_argument("--refine", action="store_true",
                   help="maximum-likelihood refinement of (mu, M)")
    p.add_argument("--bootstrap", type=int, default=200)
    p.add_argument("--bootstrap-seed", type=int, default=0)
    p.add_argument("--no-fidelity", action="store_true",
                   help="skip the model-table fidelity score")
    p.add_argument("--out", default=None, help="write the JSON report here")

    p = sub.add_parser("fidelity", help="Bhattacharyya overlap of two tables")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)

    p = sub.add_parser("reproduce", help="emit all plot data for one figure")
    p.add_argument("figure", choices=FIGURE_IDS)
    p.add_argument("--outdir", default=".")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-10)

    return parser


def _selection_rule(args) -> SelectionRule:
    if args.t is not None:
        return SelectionRule.exact(args.t)
    if args.above is not None:
        return SelectionRule.above(args.above)
    if args.below is not None:
        return SelectionRule.below(args.below)
    if args.at_least is not None:
        # inclusive bounds map onto the strict rules on integer outcomes
        return SelectionRule.above(args.at_least - 1)
    return SelectionRule.below(args.at_most + 1)


def _run(args) -> int:
    if args.command == "joint":
        table = joint_table(_params(args), tol=args.tol)
        text = serialize.format_joint_json(table) if _pick_format(args) == "json" \
            else serialize.format_joint_csv(table)
        _emit(args, text)

    elif args.command == "marginal":
        dist = marginal_dist(_params(args), tol=args.tol)
        text = serialize.format_counts_json(dist) if _pick_format(args) == "json" \
            else serialize.format_counts_csv(dist)
        _emit(args, text)

    elif args.command == "conditional":
        params = _params(args)
        rule = _selection_rule(args)
        dist = cond_count_dist(params, rule, tol=args.tol, verify=args.verify)
        if args.state_out is not None:
            state = build_conditional(params, rule, tol=args.tol)
            if not isinstance(state, ConditionalState):
                raise TwinbeamError("--state-out needs an exact trigger rule (--t)")
            path = serialize.write_text(args.state_out, serialize.format_state_json(state))
            print(f"wrote {path}", file=sys.stderr)
        text = serialize.format_counts_json(dist) if _pick_format(args) == "json" \
            else serialize.format_counts_csv(dist)
        _emit(args, text)

    elif args.command == "nongauss":
        report = nongauss_report(_params(args), args.t, tol=args.tol)
        payload = {
            "schema": serialize.SCHEMA,
            "t": report.t,
            "params": serialize.params_to_dict(report.params),
            "S_state": report.S_state,
            "S_ref": report.S_ref,
            "delta": report.delta,
            "delta_R": report.delta_R,
            "nbar_per_mode": report.nbar_per_mode,
            "log_base": "e",
            "tol": args.tol,
        }
        _emit(args, json.dumps(payload) + "\n")

    elif args.command == "sweep":
        axis = _AXIS_FLAGS[args.axis]
        values = [float(v) for v in args.values.split(",") if v.strip()]
        fixed = {}
        for flag, key in (("mt", "M_t"), ("t", "t"), ("eta", "eta"), ("mu", "mu")):
            value = getattr(args, flag)
            if value is not None:
                fixed[key] = value
        rows = sweep(axis, values, fixed, tol=args.tol)
        if _pick_format(args) == "json":
            text = serialize.format_sweep_json(rows, {"fixed": fixed, "tol": args.tol})
        else:
            text = serialize.format_sweep_csv(rows)
        _emit(args, text)

    elif args.command == "sample":
        record = sample_run(_params(args), args.shots, args.seed, workers=args.workers)
        text = serialize.format_shots_json(record) if _pick_format(args) == "json" \
            else serialize.format_shots_csv(record)
        _emit(args, text)

    elif args.command == "estimate":
        record = serialize.read_record(args.input)
        report = estimate_params(
            record,
            refine=args.refine,
            n_bootstrap=args.bootstrap,
            bootstrap_seed=args.bootstrap_seed,
            compute_fidelity=not args.no_fidelity,
        )
        payload = {
            "schema": serialize.SCHEMA,
            "M_hat": report.M_hat,
            "eta_hat": report.eta_hat,
            "mu_hat": report.mu_hat,
            "R_hat": report.R_hat,
            "fidelity": report.fidelity,
            "standard_errors": report.standard_errors,
            "diagnostics": list(report.diagnostics),
            "n_shots": report.n_shots,
        }
        se = report.standard_errors
        print(f"shots      : {report.n_shots}")
        print(f"mean counts: {report.M_hat!r} +- {se.get('M', float('nan'))!r}")
        print(f"efficiency : {report.eta_hat!r} +- {se.get('eta', float('nan'))!r}")
        print(f"modes      : {report.mu_hat!r} +- {se.get('mu', float('nan'))!r}")
        print(f"noise red. : {report.R_hat!r} +- {se.get('R', float('nan'))!r}")
        print(f"fidelity   : {report.fidelity!r}")
        for note in report.diagnostics:
            print(f"note       : {note}")
        if args.out is not None:
            path = serialize.write_text(args.out, json.dumps(payload) + "\n")
            print(f"wrote {path}", file=sys.stderr)

    elif args.command == "fidelity":
        a = serialize.read_table(args.a)
        b = serialize.read_table(args.b)
        print(repr(fidelity(a, b)))

    elif args.command == "reproduce":
        manifest = reproduce(args.figure, args.outdir, seed=args.seed, tol=args.tol)
        print(json.dumps({"figure": args.figure, "files": [f["path"] for f in manifest["files"]]}))

    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except TwinbeamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
