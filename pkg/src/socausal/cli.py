"""Command-line interface: ``socausal {infer,simulate,fisher-check,gate-demo}``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .closedform import (
    GaussMixtureModel,
    GaussSigmoidModel,
    causal_gate_table,
    minimal_tanh_degree,
    or_gate_kernel,
    and_gate_kernel,
    gate_joint_table,
    reverse_gate_degree,
    sample_gauss_mixture,
    sample_gauss_sigmoid,
)
from .data import hints_from_strings, load_csv, prepare
from .fisher import (
    appendix_matrix_pxy,
    appendix_matrix_py,
    appendix_matrix_pyx,
    matrix_rank,
    smallest_singular_value,
    split_sample_experiment,
)
from .fitting import FitOptions
from .inference import InferenceOptions, decision_from_scores, infer_orderings

SIMULATORS = ("gauss-mixture", "gauss-sigmoid", "independent")
MODEL_DEFAULTS = {
    "gauss-mixture": {"gamma": 0.5, "nu0": -2.0, "nu1": 2.0, "rho": 1.0},
    "gauss-sigmoid": {"nu": 0.0, "sigma": 1.0, "alpha": 2.0, "beta": 0.0},
    "independent": {"p": 0.5, "nu": 0.0, "sigma": 1.0},
}


class CliError(Exception):
    pass


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="random seed (recorded in every report)")
    p.add_argument("--format", choices=("table", "json", "csv"), default="table")
    p.add_argument("--output", help="write the report (or simulated CSV) here instead of stdout")
    p.add_argument("--jobs", type=int, default=1, help="concurrent conditional fits")
    p.add_argument("--grid", type=int, default=512, help="grid resolution for continuous domains")
    p.add_argument("--trunc-sigmas", type=float, default=8.0, help="truncation half-width in standard deviations")
    p.add_argument("--threshold", type=float, default=1e-4, help="relative score threshold")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="socausal", description="Causal inference with second order models")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("infer", help="score causal orderings of CSV columns")
    _common(p)
    p.add_argument("--input", help="CSV file")
    p.add_argument("--columns", help="comma-separated column names (default: all)")
    p.add_argument("--domain", action="append", default=[], metavar="NAME=HINT",
                   help="domain hint, e.g. day=angle:365 or x=binary (repeatable)")
    p.add_argument("--bins", type=int, help="bin continuous columns into this many intervals")
    p.add_argument("--scores", help="replay mode: comma-separated scores for X->Y and Y->X")
    p.add_argument("--max-vars", type=int, default=5)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("simulate", help="sample a closed-form model to CSV")
    _common(p)
    p.add_argument("--model", choices=SIMULATORS, default="gauss-mixture")
    p.add_argument("--params", default="", help="comma-separated name=value overrides")
    p.add_argument("--n", type=int, default=2000)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fisher-check", help="gradient-matrix rank checks and the split-sample experiment")
    _common(p)
    p.add_argument("--random-points", type=int, default=5, help="extra randomized generic parameter points")
    p.add_argument("--degenerate", action="store_true", help="also report constructed singular cases")
    p.add_argument("--experiment", action="store_true", help="run the split-sample experiment and its control")
    p.add_argument("--direction", choices=("mixture-forward", "sigmoid-forward"), default="mixture-forward")
    p.add_argument("--sizes", default="100,1000,10000,100000")
    p.add_argument("--n-seeds", type=int, default=20)
    p.set_defaults(func=cmd_fisher_check)

    p = sub.add_parser("gate-demo", help="tanh-degree analysis of a noisy OR (or AND) gate")
    _common(p)
    p.add_argument("--n", type=int, default=4, help="number of variables (inputs plus output)")
    p.add_argument("--k", type=float, default=30.0, help="gate sharpness")
    p.add_argument("--gate", choices=("or", "and"), default="or")
    p.set_defaults(func=cmd_gate_demo)
    return parser


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _report(args, result: dict) -> dict:
    return {"tool": "socausal", "version": __version__, "command": args.command,
            "seed": args.seed, "config": _config(args), "result": result}


def _emit(args, report: dict, table: str, rows=None) -> None:
    if args.format == "json":
        text = json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    elif args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for r in rows or []:
            w.writerow(r)
        text = buf.getvalue()
    else:
        text = table if table.endswith("\n") else table + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# -- infer -------------------------------------------------------------------

def _ordering_label(o, names) -> str:
    return " → ".join(names[i] for i in o)


def _verdict_label(decision, names) -> str:
    if decision.verdict == "forward":
        return f"{names[0]}→{names[1]}"
    if decision.verdict == "backward":
        return f"{names[1]}→{names[0]}"
    if decision.verdict == "undecided":
        return "?"
    return "{" + "; ".join(_ordering_label(o, names) for o in sorted(decision.selected)) + "}"


def cmd_infer(args) -> int:
    if args.scores:
        vals = [float(v) for v in args.scores.split(",")]
        if len(vals) != 2:
            raise CliError("--scores takes exactly two values: L(X→Y),L(Y→X)")
        names = ["X", "Y"]
        decision = decision_from_scores({(0, 1): vals[0], (1, 0): vals[1]}, args.threshold)
    else:
        if not args.input:
            raise CliError("infer needs --input (or --scores for replay)")
        ds = load_csv(args.input, hints=hints_from_strings(args.domain))
        if args.columns:
            ds = ds.select([c.strip() for c in args.columns.split(",")])
        if len(ds.columns) < 2:
            raise CliError("select at least two columns")
        ds = prepare(ds, args.bins)
        names = list(ds.column_names)
        opts = InferenceOptions(fit=FitOptions(resolution=args.grid, trunc_sigmas=args.trunc_sigmas),
                                threshold_rel=args.threshold, max_vars=args.max_vars, jobs=args.jobs)
        decision = infer_orderings(list(ds.columns), list(ds.domains), opts)
    verdict = _verdict_label(decision, names)
    result = decision.to_dict()
    result["variables"] = names
    result["verdict_label"] = verdict
    ranked = sorted(decision.scores.items(), key=lambda kv: (kv[1], kv[0]))
    lines = [f"{'ordering':<30} {'score':>10}"]
    lines += [f"{_ordering_label(o, names):<30} {s:>10.4f}" for o, s in ranked]
    lines.append(f"selected: {', '.join(_ordering_label(o, names) for o in sorted(decision.selected))}")
    lines.append(f"verdict: {verdict}")
    lines.append(f"relative gap: {decision.relative_gap:.3e} (threshold {decision.threshold_used:g})")
    rows = [["ordering", "score", "selected"]] + [
        [_ordering_label(o, names), f"{s:.4f}", int(o in decision.selected)] for o, s in ranked]
    _emit(args, _report(args, result), "\n".join(lines), rows)
    return 0


# -- simulate ----------------------------------------------------------------

def _parse_params(text: str, defaults: dict) -> dict:
    out = dict(defaults)
    for item in filter(None, (t.strip() for t in text.split(","))):
        k, sep, v = item.partition("=")
        if not sep or k not in defaults:
            raise CliError(f"bad parameter {item!r}; expected one of {sorted(defaults)}")
        out[k] = float(v)
    return out


def cmd_simulate(args) -> int:
    params = _parse_params(args.params, MODEL_DEFAULTS[args.model])
    if args.n < 1:
        raise CliError("--n must be positive")
    rng = np.random.default_rng(args.seed)
    if args.model == "gauss-mixture":
        x, y = sample_gauss_mixture(GaussMixtureModel(**params), args.n, rng)
    elif args.model == "gauss-sigmoid":
        x, y = sample_gauss_sigmoid(GaussSigmoidModel(**params), args.n, rng)
    else:
        if not 0 < params["p"] < 1 or params["sigma"] <= 0:
            raise CliError("independent model needs 0 < p < 1 and sigma > 0")
        x = (rng.random(args.n) < params["p"]).astype(float)
        y = params["nu"] + params["sigma"] * rng.standard_normal(args.n)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y"])
    for a, b in zip(x, y):
        w.writerow([repr(float(a)), repr(float(b))])
    meta = _report(args, {"model": args.model, "params": params, "rows": args.n, "columns": ["x", "y"]})
    meta_text = json.dumps(meta, indent=2, sort_keys=True) + "\n"
    if args.output:
        Path(args.output).write_text(buf.getvalue(), encoding="utf-8")
        Path(args.output + ".meta.json").write_text(meta_text, encoding="utf-8")
    else:
        sys.stdout.write(buf.getvalue())
    return 0


# -- fisher-check --------------------------------------------------------------

REFERENCE_POINTS = {
    "sigmoid p(y|x=1)": ((1.0, 1.0, 1.0, 1.0), 0.0, (1.0, 2.0, 3.0, 4.0)),
    "mixture p(y)": ((0.5, 0.0, 1.0, 1.0), (1.0, 2.0, 3.0, 4.0)),
    "logistic p(x=1|y)": ((1.0, 1.0), (1.0, 2.0)),
}


def _matrix_entry(family, label, m, expect_singular):
    sv = smallest_singular_value(m)
    ok = sv < 1e-10 if expect_singular else sv > 1e-6
    return {"family": family, "case": label, "smallest_singular_value": sv,
            "determinant": float(np.linalg.det(m)), "rank": matrix_rank(m),
            "expected": "singular" if expect_singular else "nonsingular", "ok": bool(ok)}


def _rank_checks(args) -> list:
    eta, y0, pts = REFERENCE_POINTS["sigmoid p(y|x=1)"]
    theta, ypts = REFERENCE_POINTS["mixture p(y)"]
    lo, lpts = REFERENCE_POINTS["logistic p(x=1|y)"]
    out = [
        _matrix_entry("sigmoid p(y|x=1)", "reference point", appendix_matrix_pyx(eta, y0, pts), False),
        _matrix_entry("mixture p(y)", "reference point", appendix_matrix_py(theta, ypts), False),
        _matrix_entry("logistic p(x=1|y)", "reference point", appendix_matrix_pxy(lo, lpts), False),
    ]
    rng = np.random.default_rng(args.seed)
    for r in range(args.random_points):
        e = (rng.uniform(0.5, 2), rng.normal(), rng.uniform(0.5, 2) * rng.choice([-1, 1]), rng.normal())
        p = np.sort(rng.uniform(-3, 3, 5))
        out.append(_matrix_entry("sigmoid p(y|x=1)", f"random {r}", appendix_matrix_pyx(e, p[0], p[1:]), False))
        t = (rng.uniform(0.2, 0.8), rng.normal(-1, 0.5), rng.normal(1, 0.5), rng.uniform(0.5, 1.5))
        out.append(_matrix_entry("mixture p(y)", f"random {r}", appendix_matrix_py(t, np.sort(rng.uniform(-2, 2, 4))), False))
        le = (rng.uniform(0.5, 2) * rng.choice([-1, 1]), rng.uniform(0.5, 2))
        out.append(_matrix_entry("logistic p(x=1|y)", f"random {r}", appendix_matrix_pxy(le, np.sort(rng.uniform(-2, 2, 2))), False))
    if args.degenerate:
        out += [
            _matrix_entry("sigmoid p(y|x=1)", "alpha=beta=0", appendix_matrix_pyx((1, 1, 0, 0), 0, pts), True),
            _matrix_entry("sigmoid p(y|x=1)", "duplicated point", appendix_matrix_pyx(eta, y0, (1, 2, 3, 3)), True),
            _matrix_entry("mixture p(y)", "nu0=nu1", appendix_matrix_py((0.5, 1, 1, 1), ypts), True),
            _matrix_entry("mixture p(y)", "duplicated point", appendix_matrix_py(theta, (1, 2, 3, 3)), True),
            _matrix_entry("logistic p(x=1|y)", "beta=0", appendix_matrix_pxy((1, 0), lpts), True),
            _matrix_entry("logistic p(x=1|y)", "duplicated point", appendix_matrix_pxy(lo, (1, 1)), True),
        ]
    return out


def cmd_fisher_check(args) -> int:
    checks = _rank_checks(args)
    result = {"rank_checks": checks}
    lines = [f"{'family':<20} {'case':<18} {'min sv':>11} {'det':>11} {'rank':>4}  status"]
    for c in checks:
        lines.append(f"{c['family']:<20} {c['case']:<18} {c['smallest_singular_value']:>11.3e} "
                     f"{c['determinant']:>11.3e} {c['rank']:>4}  {c['expected']}{'' if c['ok'] else ' FAILED'}")
    rows = [["family", "case", "smallest_singular_value", "determinant", "rank", "expected", "ok"]]
    rows += [[c["family"], c["case"], repr(c["smallest_singular_value"]), repr(c["determinant"]), c["rank"],
              c["expected"], int(c["ok"])] for c in checks]
    if args.experiment:
        sizes = [int(s) for s in args.sizes.split(",")]
        seeds = [args.seed + i for i in range(args.n_seeds)]
        if args.direction == "mixture-forward":
            true, mod = (0.4, -1.0, 1.5, 0.8), 0.7
        else:
            true, mod = (0.0, 1.0, 2.0, 0.0), 0.3
        rep = split_sample_experiment(args.direction, true, mod, sizes, seeds)
        ctl = split_sample_experiment(args.direction, true, mod, sizes, seeds, control=True)
        result["experiment"] = rep.to_dict()
        result["control"] = ctl.to_dict()
        lines.append("")
        lines.append(f"split-sample experiment ({args.direction}), median -log2 e per k:")
        for k, b, c in zip(sizes, rep.median_proxy_bits(), ctl.median_proxy_bits()):
            lines.append(f"  k={k:<8d} dependent {b:8.3f}   control {c:8.3f}")
        lines.append(f"  slope: dependent {rep.fitted_slope:.3f}, control {ctl.fitted_slope:.3f}")
        rows.append([])
        rows.append(["k", "seed", "e", "proxy_bits", "control"])
        for r, flag in ((rep, 0), (ctl, 1)):
            for k in r.sample_sizes:
                for s, e, b in zip(r.seeds, r.residuals[k], r.proxy_bits[k]):
                    rows.append([k, s, repr(e), repr(b), flag])
    _emit(args, _report(args, result), "\n".join(lines), rows)
    return 0 if all(c["ok"] for c in checks) else 1


# -- gate-demo -----------------------------------------------------------------

def cmd_gate_demo(args) -> int:
    n, k = args.n, args.k
    if not 3 <= n <= 12:
        raise CliError("--n must be between 3 and 12")
    make = or_gate_kernel if args.gate == "or" else and_gate_kernel
    kernel = make(k, n - 1)
    joint = gate_joint_table(kernel, n)
    p_out = sum(p for s, p in joint.items() if s[-1] == 1)
    causal = minimal_tanh_degree(causal_gate_table(kernel), max_degree=n - 1)
    reverse = reverse_gate_degree(n, k, gate=args.gate)
    result = {
        "gate": args.gate, "n": n, "k": k,
        "joint_states": len(joint), "p_output_1": p_out,
        "min_state_probability": min(joint.values()), "max_state_probability": max(joint.values()),
        "causal_degree": causal.degree, "causal_residuals": causal.residuals,
        "reverse_degree": reverse.degree, "reverse_residuals": reverse.residuals,
        "expected_reverse_degree": n - 2,
    }
    lines = [
        f"{args.gate.upper()} gate, n={n} variables, k={k:g}",
        f"joint table: {len(joint)} states, P(output=1)={p_out:.6f}",
        f"causal conditional: minimal tanh degree {causal.degree} (residual {causal.residuals[causal.degree]:.2e})",
        f"reverse conditional: minimal tanh degree {reverse.degree} (expected {n - 2})",
        "residual by degree: " + ", ".join(f"{d}:{r:.2e}" for d, r in enumerate(reverse.residuals)),
    ]
    rows = [["side", "degree", "residual"]]
    rows += [["causal", d, repr(r)] for d, r in enumerate(causal.residuals)]
    rows += [["reverse", d, repr(r)] for d, r in enumerate(reverse.residuals)]
    _emit(args, _report(args, result), "\n".join(lines), rows)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ValueError, OSError, FloatingPointError) as exc:
        print(f"socausal {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
