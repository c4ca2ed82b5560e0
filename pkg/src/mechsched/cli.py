"""Command-line front end: ``mechsched run | verify | gen | bench``.

Exit codes: 0 when every bound holds, 2 when a bound or checked invariant is
violated, 1 on misuse (bad flags, unreadable or malformed files).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
import warnings
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import instances as gens
from .core import (
    INF,
    Instance,
    MechSchedError,
    Prediction,
    encode_vector,
    makespan,
    prediction_error,
    to_float,
)
from .makespan import get_solver, opt_oracle
from .mechanisms import (
    ERROR_TOLERANT,
    FOLLOW_PREDICTION,
    GREEDY,
    MECHANISMS,
    SCALED,
    GammaRangeWarning,
    run_mechanism,
)
from .payments import first_price_payments, job_payment
from .verify import (
    CSV_COLUMNS,
    SLACK,
    adversarial_pairs,
    evaluate_consistency,
    evaluate_error_curve,
    evaluate_robustness,
    fixture_pairs,
    fuzz_strategyproofness,
    max_reporter_rule,
    monotonicity_campaign,
    random_instances,
    theoretical_bound,
)

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION = 0, 1, 2
SUITES = ("monotonicity", "strategyproof", "consistency", "robustness", "error-curve")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _mechanism(name: str) -> str:
    if name not in MECHANISMS:
        raise argparse.ArgumentTypeError(
            f"unknown mechanism {name!r}; accepted: {', '.join(MECHANISMS)}")
    return name


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def workers() -> int:
    """Thread count from MECHSCHED_THREADS, default 1."""
    raw = os.environ.get("MECHSCHED_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"MECHSCHED_THREADS must be an integer, got {raw!r}") from None


def _json_default(v):
    if isinstance(v, Fraction):
        return float(v)
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, (set, frozenset, tuple)):
        return sorted(v) if isinstance(v, (set, frozenset)) else list(v)
    raise TypeError(f"cannot serialise {type(v).__name__}")


def _clean(v):
    """Replace non-finite floats by the string encoding the file formats use."""
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, default=_json_default) + "\n"


def _csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(_clean(row))
    return buf.getvalue()


def _emit(text: str, path) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _read(path: str, cls):
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return cls.from_json(raw.decode()), hashlib.sha256(raw).hexdigest()
    except (ValueError, UnicodeDecodeError) as exc:
        raise UsageError(f"{path}: {exc}") from None


# -- run -------------------------------------------------------------------

def _machine_payments(inst, plan, alloc):
    pay = [0.0] * inst.n
    for j, i in enumerate(alloc):
        pay[i] += job_payment(inst, plan, j, i)
    return pay


def cmd_run(args) -> int:
    inst, inst_digest = _read(args.instance, Instance)
    pred, pred_digest = (None, None)
    if args.prediction:
        pred, pred_digest = _read(args.prediction, Prediction)
    elif args.mechanism != GREEDY:
        raise UsageError(f"mechanism {args.mechanism!r} needs --prediction")
    if args.mechanism in (SCALED, ERROR_TOLERANT) and args.gamma is None:
        raise UsageError(f"mechanism {args.mechanism!r} needs --gamma")
    if args.mechanism == ERROR_TOLERANT and args.eta_bar is None:
        raise UsageError("mechanism 'error-tolerant' needs --eta-bar")

    out = run_mechanism(args.mechanism, inst, pred, args.gamma, args.eta_bar, get_solver(args.solver))
    ms = makespan(inst, out.alloc)
    opt = opt_oracle(inst)
    ratio = (1.0 if ms == 0 else INF) if opt == 0 else ms / opt
    eta = prediction_error(inst, pred, exact_value=True) if pred is not None else Fraction(1)
    bound = theoretical_bound(args.mechanism, inst.n, out.solver_alpha, args.gamma, args.eta_bar, eta)
    within = not ratio > bound * (1 + SLACK)
    record = {
        "mechanism": args.mechanism,
        "params": {"gamma": args.gamma, "eta_bar": args.eta_bar, "solver": args.solver,
                   "alpha": out.solver_alpha},
        "instance_sha256": inst_digest,
        "prediction_sha256": pred_digest,
        "n": inst.n, "m": inst.m, "eta": to_float(eta),
        "alloc": list(out.alloc),
        "makespan": ms, "opt": opt, "ratio": ratio, "bound": bound,
        "within_bound": within,
        "j_sets": [sorted(s) for s in out.plan.j_sets],
    }
    if args.payments:
        record["payments"] = encode_vector(_machine_payments(inst, out.plan, out.alloc))
    if args.format == "csv":
        text = _csv([{
            "mechanism": args.mechanism, "n": inst.n, "m": inst.m,
            "gamma": "" if args.gamma is None else args.gamma,
            "eta_bar": "" if args.eta_bar is None else args.eta_bar,
            "eta": to_float(eta), "trials": 1, "max_ratio": ratio, "bound": bound,
            "violations": int(not within),
        }])
    else:
        text = _dumps(record)
    _emit(text, args.output)
    return EXIT_OK if within else EXIT_VIOLATION


# -- verify ----------------------------------------------------------------

def _suite_params(args):
    gamma = args.gamma if args.mechanism in (SCALED, ERROR_TOLERANT) else None
    eta_bar = args.eta_bar if args.mechanism == ERROR_TOLERANT else None
    return gamma, eta_bar


def _run_suite(suite: str, args, threads: int):
    """Returns ``(report dict, csv rows, passed)``."""
    solver = get_solver(args.solver)
    draw = random_instances(2, args.nmax, 1, args.mmax)
    pairs = adversarial_pairs(draw)
    gamma, eta_bar = _suite_params(args)
    kind = args.mechanism

    if suite == "monotonicity":
        rule = max_reporter_rule if args.fixture == "broken" else None
        rep = monotonicity_campaign(kind, pairs, args.trials, args.deviations, args.seed,
                                    gamma, eta_bar, solver, rule=rule, workers=threads)
        d = rep.to_dict()
        d["rule"] = "max-reporter" if rule else kind
        return d, [], rep.holds

    if suite == "strategyproof":
        extra = {}
        if args.fixture == "broken":
            kind, gamma, eta_bar = GREEDY, None, None
            extra["payment_rule"] = first_price_payments
        if kind == FOLLOW_PREDICTION:
            # every job is a monopoly of its predicted machine; pay a flat cap instead
            extra.update(monopolist="cap", cap=args.cap)
        rep = fuzz_strategyproofness(kind, pairs, args.trials, args.misreports, args.seed, gamma,
                                     eta_bar, solver, workers=threads, **extra)
        d = rep.to_dict()
        d["payment_rule"] = "first-price" if args.fixture == "broken" else "critical-value"
        return d, [], rep.ok

    if suite == "consistency":
        rep = evaluate_consistency(kind, draw, args.trials, args.seed, gamma, eta_bar, solver, threads)
        return rep.to_dict(), [rep.csv_row(eta=1)], rep.ok

    if suite == "robustness":
        rep = evaluate_robustness(kind, pairs, args.trials, args.seed, gamma, eta_bar, solver, threads,
                                  fixtures=fixture_pairs())
        return rep.to_dict(), [rep.csv_row(eta="mixed")], rep.ok

    # error-curve always measures the error-tolerant mechanism
    reps = evaluate_error_curve(args.gamma, args.eta_bar, args.eta_levels, draw, args.trials,
                                args.seed, solver, threads)
    d = {f"{level:g}": r.to_dict() for level, r in reps.items()}
    rows = [r.csv_row(eta=level) for level, r in reps.items()]
    return d, rows, all(r.ok for r in reps.values())


def cmd_verify(args) -> int:
    # small campaigns sit below the gamma range where both guarantees combine
    warnings.simplefilter("ignore", GammaRangeWarning)
    threads = workers()
    if args.suite == "all":
        suites = [s for s in SUITES if s != "error-curve" or args.mechanism == ERROR_TOLERANT]
    else:
        suites = [args.suite]
    report, rows, passed = {}, [], True
    for suite in suites:
        d, r, ok = _run_suite(suite, args, threads)
        d["passed"] = ok
        report[suite] = d
        rows.extend(r)
        passed &= ok
        levels = [v for v in d.values() if isinstance(v, dict)] if suite == "error-curve" else [d]
        broken = sorted({name for rep in levels
                         for name, count in rep.get("invariant_failures", {}).items() if count})
        note = f" (invariant failures: {', '.join(broken)})" if broken else ""
        print(f"{suite}: {'ok' if ok else 'VIOLATION'}{note}", file=sys.stderr)
    report["passed"] = passed
    report["config"] = {k: v for k, v in vars(args).items() if k not in ("func", "output", "format")}
    _emit(_csv(rows) if args.format == "csv" else _dumps(report), args.output)
    return EXIT_OK if passed else EXIT_VIOLATION


# -- gen -------------------------------------------------------------------

def cmd_gen(args) -> int:
    family = args.family
    params = {}
    n, m = args.n, args.m
    if family == "figure1":
        n, m = n or 2, m or 2
        params = {"K": args.K, "eps": args.eps}
    elif family == "figure2":
        if n is None:
            raise UsageError("figure2 needs --n")
        if m is not None and m != 2 * n - 2:
            raise UsageError(f"figure2 with n={n} has m = 2n - 2 = {2 * n - 2}, got --m {m}")
        m = 2 * n - 2
        params = {"eps": args.eps}
    else:
        if n is None or m is None:
            raise UsageError(f"family {family!r} needs --n and --m")
        if family == "perturbed":
            params = {"eta": args.eta}
    setup = gens.GeneratorSpec(family, n, m, args.lo, args.hi, args.seed, params)
    inst, pred = gens.generate(setup)
    _emit(inst.to_json() + "\n", args.out_instance)
    if args.out_prediction:
        Path(args.out_prediction).write_text(pred.to_json() + "\n")
    return EXIT_OK


# -- bench -----------------------------------------------------------------

BENCH_COLUMNS = ("mechanism", "solver", "n", "m", "trials", "mean_seconds", "max_seconds")


def cmd_bench(args) -> int:
    warnings.simplefilter("ignore", GammaRangeWarning)
    solver = get_solver(args.solver)
    rows = []
    for kind in args.mechanisms:
        for n in range(2, args.nmax + 1):
            for m in range(n, args.mmax + 1):
                times = []
                for k in range(args.trials):
                    rng = np.random.default_rng([args.seed, n, m, k])
                    inst = gens.gen_uniform(n, m, 1.0, 10.0, rng)
                    pred = gens.gen_perturbed(inst, 1.5, rng)
                    start = time.perf_counter()
                    run_mechanism(kind, inst, pred, args.gamma, args.eta_bar, solver)
                    times.append(time.perf_counter() - start)
                rows.append({"mechanism": kind, "solver": args.solver, "n": n, "m": m,
                             "trials": args.trials, "mean_seconds": f"{np.mean(times):.6g}",
                             "max_seconds": f"{np.max(times):.6g}"})
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mechsched", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run one mechanism on instance/prediction files")
    run.add_argument("--mechanism", type=_mechanism, required=True)
    run.add_argument("--instance", required=True)
    run.add_argument("--prediction")
    run.add_argument("--gamma", type=float)
    run.add_argument("--eta-bar", type=float)
    run.add_argument("--solver", choices=("exact", "greedy"), default="exact")
    run.add_argument("--payments", action="store_true")
    run.add_argument("--output")
    run.add_argument("--format", choices=("json", "csv"), default="json")
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="run a verification campaign")
    ver.add_argument("--suite", choices=SUITES + ("all",), required=True)
    ver.add_argument("--mechanism", type=_mechanism, default=SCALED)
    ver.add_argument("--gamma", type=float, default=1.0)
    ver.add_argument("--eta-bar", type=float, default=2.0)
    ver.add_argument("--eta-levels", type=float, nargs="+", default=[1.0, 1.5, 2.0])
    ver.add_argument("--trials", type=_positive_int, default=200)
    ver.add_argument("--deviations", type=_positive_int, default=10,
                     help="deviations per base instance in the monotonicity suite")
    ver.add_argument("--misreports", type=_positive_int, default=10)
    ver.add_argument("--cap", type=float, default=1e3,
                     help="flat payment for jobs with no finite competitor")
    ver.add_argument("--nmax", type=_positive_int, default=4)
    ver.add_argument("--mmax", type=_positive_int, default=6)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--solver", choices=("exact", "greedy"), default="exact")
    ver.add_argument("--fixture", choices=("broken",),
                     help="swap in the anti-monotone rule / first-price payments")
    ver.add_argument("--output")
    ver.add_argument("--format", choices=("json", "csv"), default="json")
    ver.set_defaults(func=cmd_verify)

    gen = sub.add_parser("gen", help="generate instance and prediction files")
    gen.add_argument("--family", choices=gens.FAMILIES, required=True)
    gen.add_argument("--n", type=_positive_int)
    gen.add_argument("--m", type=_positive_int)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--lo", type=float, default=1.0)
    gen.add_argument("--hi", type=float, default=10.0)
    gen.add_argument("--K", type=float, default=100.0)
    gen.add_argument("--eps", type=float, default=0.01)
    gen.add_argument("--eta", type=float, default=1.0)
    gen.add_argument("--out-instance")
    gen.add_argument("--out-prediction")
    gen.set_defaults(func=cmd_gen)

    bench = sub.add_parser("bench", help="time mechanisms over a grid of sizes, CSV output")
    bench.add_argument("--mechanisms", type=_mechanism, nargs="+", default=list(MECHANISMS))
    bench.add_argument("--solver", choices=("exact", "greedy"), default="exact")
    bench.add_argument("--gamma", type=float, default=1.0)
    bench.add_argument("--eta-bar", type=float, default=2.0)
    bench.add_argument("--nmax", type=_positive_int, default=4)
    bench.add_argument("--mmax", type=_positive_int, default=6)
    bench.add_argument("--trials", type=_positive_int, default=5)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--output")
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, MechSchedError, ValueError) as exc:
        print(f"mechsched {args.command}: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
