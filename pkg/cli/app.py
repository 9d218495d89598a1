import argparse
import logging
import os
import sys

# ---------------- PATH SETUP ----------------
BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.append(BASE_DIR)

import config
from classifier.method_classifier import classify_method
from cli.report import FORMATS, Report, render, trace_frame
from engine.errors import InputError, UsageError
from engine.hfunction import acceptance_region, h_eval, invert_h
from engine.models import GridPolicy, MethodRun, round_down, round_up
from extractor.limits_file import load_limits, write_limits
from kernels.binomial import binom_cdf
from services import coverage_engine, diff_service, gauss_service, mpair_service, prop_service, refine_service

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_NONCONVERGED = 3

REFINE_SUFFIX = {"none": "", "M": "^M", "Minf": "^Minf"}


class HFArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------- ARGUMENT HELPERS ----------------
def _point(text):
    try:
        values = [int(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"sample point must be comma-separated integers, got {text!r}") from None
    return values[0] if len(values) == 1 else tuple(values)


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _grid(args):
    if not args.grid:
        return GridPolicy.from_config()
    try:
        return GridPolicy.parse(args.grid)
    except InputError as e:
        raise UsageError(str(e)) from e


def model_from_text(text):
    """prop:n | diff:n1,n2 | mpair:n"""
    kind, _, params = (text or "").partition(":")
    try:
        nums = [int(v) for v in params.split(",")]
    except ValueError:
        raise UsageError(f"--model expects prop:n, diff:n1,n2 or mpair:n, got {text!r}") from None
    if kind == "prop" and len(nums) == 1:
        return prop_service.build_prop_model(nums[0])
    if kind == "diff" and len(nums) == 2:
        return diff_service.build_diff_model(*nums)
    if kind == "mpair" and len(nums) == 1:
        return mpair_service.build_mpair_model(nums[0])
    raise UsageError(f"--model expects prop:n, diff:n1,n2 or mpair:n, got {text!r}")


# ---------------- SHARED PIPELINE ----------------
def run_method(model, table, label, alpha, refine, grid, args, score=True):
    final, trace = refine_service.apply_refinement(model, table, alpha, refine, grid, args.max_k, args.threads)
    coverage = coverage_engine.score(model, final, args.threads) if score and not args.no_icp else None
    return MethodRun(label + REFINE_SUFFIX[refine], final, coverage, trace)


def source_spec(model, table, run, refine, exact_spec):
    """The h-function the reported interval was inverted from."""
    if refine == "none":
        return exact_spec or refine_service.t2_spec(model, table)
    if refine == "M":
        return refine_service.t2_spec(model, table)
    return refine_service.t2_spec(model, run.table)


def add_point_notes(report, args, model, table, run, refine, exact_spec, grid):
    if args.pvalue_at is not None and args.at is None:
        raise UsageError("--pvalue-at needs --at")
    if args.at is not None:
        report.notes["interval_at"] = list(run.table.reported().interval_at(args.at))
    if args.pvalue_at is None and args.accept_at is None:
        return
    spec = source_spec(model, table, run, refine, exact_spec)
    if args.pvalue_at is not None:
        report.notes["p_value"] = h_eval(model, spec, args.at, args.pvalue_at, grid)
    if args.accept_at is not None:
        report.notes["acceptance_region"] = acceptance_region(model, spec, args.accept_at, args.alpha, grid)


def emit(report, args):
    text = render(report, args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
        logger.info("report written to %s", args.out)
    else:
        sys.stdout.write(text)
    traced = [run for run in report.runs if run.trace is not None]
    if args.trace_out and traced:
        frame = trace_frame(traced[0])
        if args.trace_out.endswith(".json"):
            frame.to_json(args.trace_out, orient="records", indent=2)
        else:
            frame.to_csv(args.trace_out, index=False)
    if any(not run.trace.converged for run in traced):
        return EXIT_NONCONVERGED
    return EXIT_OK


# ---------------- COMMANDS ----------------
def cmd_prop(args):
    method = classify_method(args.method, "prop")
    refine = classify_method(args.refine, "refine")
    grid = _grid(args)
    values = _floats(args.values) if args.values else None
    model = prop_service.build_prop_model(args.n)
    table = prop_service.prop_limits(args.n, args.alpha, method, grid, args.threads, values)
    if args.complete_by_symmetry:
        table = prop_service.complete_by_symmetry(table)
    run = run_method(model, table, method, args.alpha, refine, grid, args)
    report = Report("prop", {"n": args.n, "alpha": args.alpha, "method": method, "refine": refine},
                    grid.describe(), [run])
    exact = prop_service.h_spec(args.n, method) if method in prop_service.EXACT_METHODS else None
    add_point_notes(report, args, model, table, run, refine, exact, grid)
    return emit(report, args)


def cmd_diff(args):
    method = classify_method(args.method, "diff")
    refine = classify_method(args.refine, "refine")
    grid = _grid(args)
    model = diff_service.build_diff_model(args.n1, args.n2)
    design = {"n1": args.n1, "n2": args.n2, "alpha": args.alpha, "method": method, "refine": refine}
    exact = (diff_service.h_spec_d(args.n1, args.n2, method, grid)
             if method in diff_service.EXACT_METHODS else None)

    if exact is not None and refine == "none" and args.at is not None and not args.complete_by_symmetry:
        # one point only: invert h there instead of building the whole table
        inv = invert_h(model, exact, args.at, args.alpha, grid)
        report = Report("diff", design, grid.describe())
        lo, hi = max(-1.0, inv.lower), min(1.0, inv.upper)
        report.notes["interval_at"] = [float(round_down(lo)), float(round_up(hi))]
        if args.pvalue_at is not None:
            report.notes["p_value"] = h_eval(model, exact, args.at, args.pvalue_at, grid)
        if args.accept_at is not None:
            report.notes["acceptance_region"] = acceptance_region(model, exact, args.accept_at, args.alpha, grid)
        return emit(report, args)

    table = diff_service.diff_limits(args.n1, args.n2, args.alpha, method, grid, args.threads)
    if args.complete_by_symmetry:
        table = diff_service.complete_by_symmetry_d(table, args.n1, args.n2)
    run = run_method(model, table, method, args.alpha, refine, grid, args)
    report = Report("diff", design, grid.describe(), [run])
    add_point_notes(report, args, model, table, run, refine, exact, grid)
    return emit(report, args)


def cmd_mpair(args):
    refine = classify_method(args.refine, "refine")
    grid = _grid(args)
    model = mpair_service.build_mpair_model(args.n)
    table = load_limits(args.limits, model)
    label = table.meta.get("method", "baseline")
    run = run_method(model, table, label, args.alpha, refine, grid, args)
    report = Report("mpair", {"n": args.n, "alpha": args.alpha, "baseline": label, "refine": refine},
                    grid.describe(), [run])
    add_point_notes(report, args, model, table, run, refine, None, grid)
    return emit(report, args)


def cmd_refine(args):
    grid = _grid(args)
    model = model_from_text(args.model)
    table = load_limits(args.limits, model)
    label = table.meta.get("method", "limits")
    if args.mode == "two-sided":
        refine = classify_method(args.refine, "refine")
        run = run_method(model, table, label, args.alpha, refine, grid, args)
    else:
        operator = (refine_service.modify_lower_one_sided if args.mode == "lower"
                    else refine_service.modify_upper_one_sided)
        final = operator(model, table, args.alpha, grid, args.threads)
        coverage = None if args.no_icp else coverage_engine.score(model, final, args.threads)
        run = MethodRun(f"{label}^M({args.mode})", final, coverage)
    report = Report("refine", {"model": args.model, "alpha": args.alpha, "mode": args.mode, "input": label},
                    grid.describe(), [run])
    if run.trace is not None:
        report.notes["nonincreasing"] = run.trace.nonincreasing
    if args.write_limits:
        write_limits(args.write_limits, run.table)
    return emit(report, args)


def cmd_icp(args):
    model = model_from_text(args.model)
    table = load_limits(args.limits, model)
    run = MethodRun(table.meta.get("method", "limits"), table,
                    coverage_engine.score(model, table, args.threads))
    report = Report("icp", {"model": args.model}, {}, [run])
    return emit(report, args)


def cmd_gauss(args):
    if args.case == "tmod":
        res = gauss_service.one_sided_t_modify(args.c, args.n, args.alpha)
        notes = {"case": res.case, "threshold": res.threshold}
        if args.xbar is not None and args.s is not None:
            iv = res.interval(args.xbar, args.s, args.n, args.c)
            notes.update(lower=iv.lower, upper=iv.upper)
    elif args.case == "binlower":
        cdf = lambda k, theta: binom_cdf(k, args.n, theta)
        notes = {"lower": gauss_service.stochastic_lower(cdf, args.x, args.alpha, (0.0, 1.0))}
    else:
        spec = gauss_service.GaussianSpec(n=args.n, sigma=args.sigma, alpha=args.alpha, a=args.a, b=args.b)
        if args.case == "zab":
            iv = gauss_service.c_zab(args.xbar, spec)
        else:
            iv = gauss_service.refine_box(args.xbar, args.a, args.b, spec)
        notes = {"case": iv.case, "lower": iv.lower, "upper": iv.upper}
        if iv.levels:
            notes.update(alpha1=iv.levels[0], alpha2=iv.levels[1])
    design = {k: v for k, v in vars(args).items() if k in ("case", "n", "sigma", "alpha", "a", "b", "c", "xbar", "x")}
    return emit(Report("gauss", design, {}, notes=notes), args)


# ---------------- TABLE REPRODUCTION ----------------
def _levels(args, default):
    text = args.refine or default
    return [classify_method(r, "refine") for r in text.split(",")]


def cmd_table(args):
    grid = _grid(args)
    alpha = args.alpha
    report = Report("table", {"id": args.id, "alpha": alpha}, grid.describe())

    if args.id in (1, 3, 4):
        ns = args.n or ([16, 30, 100] if args.id == 1 else [16])
        methods = {1: ("cp", "blaker", "lrt"), 3: ("wald", "wilson", "sample_prop"), 4: ("cp", "blaker", "lrt")}
        levels = _levels(args, {1: "none,M", 3: "none,M,Minf", 4: "none,M"}[args.id])
        for n in ns:
            model = prop_service.build_prop_model(n)
            for method in methods[args.id]:
                table = prop_service.prop_limits(n, alpha, method, grid, args.threads)
                for refine in levels:
                    run = run_method(model, table, method, alpha, refine, grid, args)
                    if args.id == 1:
                        report.summary.append({"n": n, "method": run.label, "ICP": run.coverage.icp,
                                               "TIL": run.coverage.til})
                    else:
                        report.runs.append(run)
        report.design["n"] = ns
        return emit(report, args)

    if args.id in (2, 5):
        n1, n2 = (args.n1 or (8 if args.id == 2 else 23)), (args.n2 or (10 if args.id == 2 else 32))
        at = args.at if args.at is not None else (21, 19)
        levels = _levels(args, "none,M,Minf" if args.id == 2 else "none")
        model = diff_service.build_diff_model(n1, n2)
        for method in ("lrt", "score", "wald", "mle"):
            table = diff_service.diff_limits(n1, n2, alpha, method, grid, args.threads)
            for refine in levels:
                run = run_method(model, table, method, alpha, refine, grid, args, score=args.id == 2)
                row = {"n1": n1, "n2": n2, "method": run.label}
                if args.id == 2:
                    row.update(ICP=run.coverage.icp, TIL=run.coverage.til)
                else:
                    row["lower"], row["upper"] = run.table.reported().interval_at(at)
                report.summary.append(row)
        return emit(report, args)

    if args.id == 6:
        if not args.limits:
            raise UsageError("table 6 needs --limits with a matched-pair baseline")
        n = args.n[0] if args.n else 21
        at = args.at if args.at is not None else (1, 13)
        model = mpair_service.build_mpair_model(n)
        table = load_limits(args.limits, model)
        label = table.meta.get("method", "baseline")
        for refine in _levels(args, "none,M,Minf"):
            run = run_method(model, table, label, alpha, refine, grid, args)
            source = refine_service.t2_spec(model, table if refine != "Minf" else run.table)
            report.summary.append({
                "method": run.label,
                "lower": run.table.reported().interval_at(at)[0],
                "upper": run.table.reported().interval_at(at)[1],
                "p_value": h_eval(model, source, at, 0.0, grid),
                "ICP": run.coverage.icp,
                "TIL": run.coverage.til,
            })
        return emit(report, args)

    raise UsageError(f"--id must be 1..6, got {args.id}")


# ---------------- PARSER ----------------
def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alpha", type=float, default=0.05)
    common.add_argument("--grid", help="theta_points,nuisance_points[,polish]")
    common.add_argument("--threads", type=int, default=config.THREADS)
    common.add_argument("--format", choices=FORMATS, default="text")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--max-k", type=int, default=config.MAX_K)
    common.add_argument("--trace-out", help="refinement trace as CSV (or JSON by extension)")
    common.add_argument("--no-icp", action="store_true", help="skip coverage scoring")
    common.add_argument("-v", "--verbose", action="count", default=0)

    point = argparse.ArgumentParser(add_help=False)
    point.add_argument("--at", type=_point, help="sample point, e.g. 3 or 21,19")
    point.add_argument("--pvalue-at", type=float, help="p-value at θ₀ for the point given by --at")
    point.add_argument("--accept-at", type=float, help="acceptance region at θ₀")

    parser = HFArgumentParser(prog="hfunc", description="Exact confidence intervals by h-function inversion")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prop", parents=[common, point], help="single binomial proportion")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--method", required=True)
    p.add_argument("--refine", default="none")
    p.add_argument("--values", help="per-x values for custom_point")
    p.add_argument("--complete-by-symmetry", action="store_true",
                   help="rebuild upper limits from lower ones, U(x) = 1 - L(n - x)")
    p.set_defaults(handler=cmd_prop)

    p = sub.add_parser("diff", parents=[common, point], help="difference of two proportions")
    p.add_argument("--n1", type=int, required=True)
    p.add_argument("--n2", type=int, required=True)
    p.add_argument("--method", required=True)
    p.add_argument("--refine", default="none")
    p.add_argument("--complete-by-symmetry", action="store_true",
                   help="rebuild upper limits from lower ones, U(x, y) = -L(n1 - x, n2 - y)")
    p.set_defaults(handler=cmd_diff)

    p = sub.add_parser("mpair", parents=[common, point], help="matched-pair difference")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--limits", required=True)
    p.add_argument("--refine", default="Minf")
    p.set_defaults(handler=cmd_mpair)

    p = sub.add_parser("refine", parents=[common], help="modify any limits table")
    p.add_argument("--limits", required=True)
    p.add_argument("--model", required=True, help="prop:n | diff:n1,n2 | mpair:n")
    p.add_argument("--mode", choices=("two-sided", "lower", "upper"), default="two-sided")
    p.add_argument("--refine", default="Minf")
    p.add_argument("--write-limits", help="write the refined table as a LimitsFile")
    p.set_defaults(handler=cmd_refine)

    p = sub.add_parser("icp", parents=[common], help="ICP and TIL of a limits table")
    p.add_argument("--limits", required=True)
    p.add_argument("--model", required=True)
    p.set_defaults(handler=cmd_icp)

    p = sub.add_parser("gauss", parents=[common], help="closed-form normal-mean cases")
    p.add_argument("case", choices=("zab", "box", "tmod", "binlower"))
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=0.0)
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--xbar", type=float, default=0.0)
    p.add_argument("--s", type=float)
    p.add_argument("--x", type=int, default=0)
    p.set_defaults(handler=cmd_gauss)

    p = sub.add_parser("table", parents=[common], help="reproduce a published table layout")
    p.add_argument("--id", type=int, required=True)
    p.add_argument("--n", type=int, nargs="*")
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--at", type=_point)
    p.add_argument("--limits")
    p.add_argument("--refine", help="comma-separated refinement levels")
    p.set_defaults(handler=cmd_table)
    return parser


def _configure_logging(verbose):
    level = logging.DEBUG if verbose > 1 else logging.INFO if verbose == 1 else config.LOG_LEVEL
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    _configure_logging(args.verbose)
    try:
        return args.handler(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
