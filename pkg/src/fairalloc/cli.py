"""Command-line front end.

Exit codes: 0 success, 1 bad input, 2 verification mismatch.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Sequence

from . import distributions as dist
from . import generators, metrics, oracles, solvers
from .instance import Instance, Mode, ScenarioError, instance_from_dict

EXIT_OK, EXIT_INPUT, EXIT_MISMATCH = 0, 1, 2
SIG_DIGITS = 12
VERIFY_ATOL = 1e-9
GRID_POINTS_TARGET = 2000
TOL_ENV = "FAIRALLOC_TOL"


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# formatting
# ---------------------------------------------------------------------------

def _num(x):
    if isinstance(x, float):
        if not math.isfinite(x):
            return None
        return float(f"{x:.{SIG_DIGITS}g}")
    return x


def _rounded(obj):
    if isinstance(obj, dict):
        return {k: _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    return _num(obj)


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.{SIG_DIGITS}g}"
    return str(x)


def _csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(doc) -> str:
    return json.dumps(_rounded(doc), indent=2) + "\n"


# ---------------------------------------------------------------------------
# inputs
# ---------------------------------------------------------------------------

def load_scenario(path: str) -> Instance:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return instance_from_dict(doc)
    except ScenarioError as exc:
        raise InputError(f"{path}: {exc}") from None


def _tolerance() -> float | None:
    raw = os.environ.get(TOL_ENV)
    if raw is None or raw == "":
        return None
    try:
        tol = float(raw)
    except ValueError:
        raise InputError(f"{TOL_ENV}={raw!r} is not a number") from None
    if not tol > 0.0:
        raise InputError(f"{TOL_ENV} must be > 0")
    return tol


def _grid_step(inst: Instance) -> float:
    """Coarsest-acceptable grid spacing that keeps the grid under the oracle guard."""
    n = len(inst)
    per_axis = GRID_POINTS_TARGET if n <= 2 else int(oracles.MAX_CANDIDATES ** (1.0 / (n - 1))) - 1
    per_axis = max(1, min(GRID_POINTS_TARGET, per_axis))
    return max(inst.budget, 1e-12) / per_axis


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def _solve(inst: Instance, objective: str, epsilon: float, rtol):
    if objective == "max":
        return solvers.max_utilization(inst, rtol=rtol)
    if inst.mode is Mode.INTEGER:
        # no polynomial integer fair solver: the exhaustive oracle is the solver
        res = oracles.exhaustive_discrete_fair(inst, epsilon, reduce_symmetry=True)
        profile = metrics.service_profile(inst, res.best_allocation)
        return solvers.SolveReport(res.best_allocation, res.best_value, profile, None, res.evaluated,
                                   abs(res.best_allocation.total - inst.budget))
    return solvers.fair_band(inst, epsilon, rtol=rtol)


def _verify(inst: Instance, report, objective: str, epsilon: float, rtol) -> dict:
    budget_tol = solvers.budget_tolerance(inst.budget, rtol)
    out = {"residual_ok": report.residual <= budget_tol or (objective == "fair" and inst.mode is Mode.INTEGER)}
    try:
        if inst.mode is Mode.INTEGER:
            if objective == "max":
                ref = oracles.exhaustive_discrete_max(inst, reduce_symmetry=True)
            else:
                ref = oracles.exhaustive_discrete_fair(inst, epsilon)
            slack = VERIFY_ATOL
            out.update(oracle="exhaustive", oracle_value=ref.best_value, slack=slack)
            ok = abs(report.utilization - ref.best_value) <= slack
        else:
            step = _grid_step(inst)
            ref = oracles.grid_fractional(inst, None if objective == "max" else epsilon, step)
            slack = oracles.grid_slack(inst, step)
            out.update(oracle="grid", oracle_value=ref.best_value, step=step, slack=slack)
            ok = (not ref.feasible) or report.utilization >= ref.best_value - slack
            if objective == "fair":
                ok = ok and report.profile.gap <= epsilon + 1e-8
    except oracles.EnumerationTooLarge as exc:
        out.update(skipped=str(exc), agree=True)
        return out
    out["agree"] = bool(ok and out["residual_ok"])
    return out


def cmd_solve(args) -> int:
    inst = load_scenario(args.scenario)
    rtol = _tolerance()
    if args.objective == "fair" and args.epsilon is None:
        raise InputError("--objective fair requires --epsilon")
    epsilon = 0.0 if args.epsilon is None else args.epsilon
    report = _solve(inst, args.objective, epsilon, rtol)
    verify = _verify(inst, report, args.objective, epsilon, rtol) if args.verify else None
    amounts = report.allocation.amounts
    if args.format == "json":
        doc = {"objective": args.objective, "epsilon": args.epsilon if args.objective == "fair" else None,
               "allocation": list(amounts), "utilization": report.utilization,
               "q_values": list(report.profile.q_values), "gap": report.profile.gap,
               "level": report.level, "iterations": report.iterations, "residual": report.residual}
        if verify is not None:
            doc["verify"] = verify
        text = _json(doc)
    else:
        header = ["group", "allocation", "expected_served", "q_value", "gap", "level", "residual", "verified"]
        served = [dist.expected_min(d, a) for d, a in zip(inst.demands, amounts)]
        rows = [[name, a, s, q, None, None, None, None]
                for name, a, s, q in zip(inst.names, amounts, served, report.profile.q_values)]
        rows.append(["summary", report.allocation.total, report.utilization, None, report.profile.gap,
                     report.level, report.residual, None if verify is None else verify["agree"]])
        text = _csv(header, rows)
    _emit(text, args.out)
    return EXIT_MISMATCH if verify is not None and not verify["agree"] else EXIT_OK


# ---------------------------------------------------------------------------
# pof
# ---------------------------------------------------------------------------

def cmd_pof(args) -> int:
    inst = load_scenario(args.scenario)
    report = metrics.price_of_fairness(inst, args.epsilon)
    if args.format == "json":
        text = _json(report.to_dict())
    else:
        fields = list(metrics.PofReport.FIELDS)
        header = ["group", "max_allocation", "fair_allocation"] + fields
        rows = [[name, a, b] + [None] * len(fields)
                for name, a, b in zip(inst.names, report.max_allocation, report.fair_allocation)]
        d = report.to_dict()
        rows.append(["summary", None, None] + [d[f] for f in fields])
        text = _csv(header, rows)
    _emit(text, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    try:
        if args.kind == "discrete":
            if args.epsilon is None:
                raise InputError("--kind discrete requires --epsilon")
            result = generators.adversarial_discrete(args.epsilon, args.rho)
        else:
            result = generators.adversarial_fractional(args.rho, args.k, args.p1)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    measured = generators.measured_pof(result)
    doc = result.to_dict()
    doc["meta"]["measured_pof"] = measured
    # scenario files keep full precision so they read back identically
    text = json.dumps(doc, indent=2) + "\n"
    summary = {"pof_lower_bound": result.pof_lower_bound,
               "predicted_pof": result.construction_params["predicted_pof"],
               "measured_pof": measured}
    if args.out:
        _emit(text, args.out)
        sys.stdout.write(_json({**summary, "out": args.out}))
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _parse_allocation(raw: str, n: int) -> list[float]:
    try:
        amounts = [float(x) for x in raw.split(",")]
    except ValueError:
        raise InputError(f"--allocation: cannot parse {raw!r} as comma-separated numbers") from None
    if len(amounts) != n:
        raise InputError(f"--allocation: {len(amounts)} values for {n} groups")
    if any(not (a >= 0.0 and math.isfinite(a)) for a in amounts):
        raise InputError("--allocation: values must be finite and >= 0")
    return amounts


def cmd_simulate(args) -> int:
    inst = load_scenario(args.scenario)
    amounts = _parse_allocation(args.allocation, len(inst))
    if args.reps <= 0:
        raise InputError(f"--reps must be >= 1, got {args.reps}")
    if args.workers <= 0:
        raise InputError(f"--workers must be >= 1, got {args.workers}")
    est = oracles.monte_carlo(inst, amounts, args.reps, args.seed, workers=args.workers)
    analytic = metrics.utilization(inst, amounts)
    if args.format == "json":
        text = _json({"allocation": amounts, "reps": args.reps, "seed": args.seed,
                      "util_estimate": est.util_estimate, "util_stderr": est.util_stderr,
                      "util_analytic": analytic, "q_estimates": list(est.q_estimates)})
    else:
        header = ["group", "allocation", "q_estimate", "util_estimate", "util_stderr", "util_analytic"]
        rows = [[name, a, q, None, None, None] for name, a, q in zip(inst.names, amounts, est.q_estimates)]
        rows.append(["summary", math.fsum(amounts), None, est.util_estimate, est.util_stderr, analytic])
        text = _csv(header, rows)
    _emit(text, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# check-family
# ---------------------------------------------------------------------------

def cmd_check_family(args) -> int:
    inst = load_scenario(args.scenario)
    result = metrics.scaled_family_check(inst, args.grid_points)
    if args.format == "json":
        text = _json({"scaled_family": result, "grid_points": args.grid_points})
    else:
        rows = [[name, None] for name in inst.names] + [["summary", result]]
        text = _csv(["group", "scaled_family"], rows)
    _emit(text, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fairalloc", description="Fair allocation under stochastic demand.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("scenario", help="scenario JSON file")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--out", help="write the report here instead of stdout")

    p = sub.add_parser("solve", help="max-utilization or epsilon-fair allocation")
    common(p)
    p.add_argument("--objective", choices=("max", "fair"), default="max")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--verify", action="store_true", help="cross-check against a brute-force oracle")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("pof", help="Price of Fairness with theoretical bounds")
    common(p)
    p.add_argument("--epsilon", type=float, required=True)
    p.set_defaults(func=cmd_pof)

    p = sub.add_parser("generate", help="adversarial instance with PoF above rho")
    p.add_argument("--kind", choices=("discrete", "fractional"), required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--k", type=float, default=1.0)
    p.add_argument("--p1", type=float, default=0.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="Monte Carlo estimate for a given allocation")
    common(p)
    p.add_argument("--allocation", required=True, help='comma-separated, e.g. "1,1"')
    p.add_argument("--reps", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check-family", help="test whether the CDFs are rescalings of each other")
    common(p)
    p.add_argument("--grid-points", type=int, default=64)
    p.set_defaults(func=cmd_check_family)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ValueError) as exc:
        print(f"fairalloc: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"fairalloc: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
