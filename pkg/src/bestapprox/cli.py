"""
Command-line front end.

Runs one or more solvers on a problem file or a built-in problem and
writes the metric trace as CSV (``unit,metric`` for a single run, one
column per run otherwise).  Parameters default to the values used in
the worked examples and can be overridden flag by flag.

Exit codes: 0 success, 2 bad flags, 3 problem errors, 4 solver errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass, field

import numpy as np

from .harness import BudgetError, BudgetPolicy, Trace, run
from .problem import (
    Pair,
    ProblemError,
    ProblemInstance,
    builtin_boxes,
    builtin_toy,
    load_problem_file,
    pair_constraints,
)
from .solvers import ALGORITHMS, SolverConfig, StepSchedule

EXIT_OK, EXIT_USAGE, EXIT_PROBLEM, EXIT_SOLVER = 0, 2, 3, 4


@dataclass
class RunSpec:
    problem: ProblemInstance
    config: SolverConfig
    budget: BudgetPolicy
    metric: str = "known"
    delta: float = 0.1
    start: Pair | None = None
    pairs: list[tuple[int, int]] = field(default_factory=list)
    label: str = ""
    keep_iterates: bool = False

    def __post_init__(self):
        if self.metric == "known" and self.problem.known_solution is None:
            raise ValueError("the known metric needs a problem with a known solution")
        if not self.label:
            self.label = self.config.algorithm + ("+pp" if self.pairs else "")

    def execute(self) -> Trace:
        problem = pair_constraints(self.problem, self.pairs) if self.pairs else self.problem
        return run(
            problem,
            self.config,
            self.budget,
            metric=self.metric,
            start=self.start,
            delta=self.delta,
            keep_iterates=self.keep_iterates,
        )


def _fmt(v: float) -> str:
    return format(v, ".17g")


def emit_compare(specs: list[RunSpec], out=None) -> str:
    """Run every spec and return the traces side by side as CSV text.

    Columns are ``unit`` followed by one metric column per spec (named by
    its label; a single spec gets ``metric``, and optionally iterate
    coordinates ``x1..xn,y1..yn``).  Shorter traces leave trailing cells empty.
    """
    if not specs:
        raise ValueError("no runs requested")
    first = specs[0]
    for s in specs[1:]:
        if s.problem != first.problem:
            raise ValueError("all runs must share the same problem")
        if s.budget != first.budget:
            raise ValueError("all runs must share the same budget")
    traces = [s.execute() for s in specs]
    buf = io.StringIO() if out is None else out
    w = csv.writer(buf, lineterminator="\n")
    if len(specs) == 1:
        tr = traces[0]
        header = ["unit", "metric"]
        if tr.iterates is not None:
            n = first.problem.dimension
            header += [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)]
        w.writerow(header)
        for rec in tr:
            row = [str(rec.unit_index), _fmt(rec.metric_value)]
            if rec.iterate is not None:
                row += [_fmt(v) for v in rec.iterate.x] + [_fmt(v) for v in rec.iterate.y]
            w.writerow(row)
    else:
        labels = [s.label for s in specs]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate run labels: {labels}")
        w.writerow(["unit"] + labels)
        rows = max(len(t) for t in traces)
        every = first.budget.sample_every
        for j in range(rows):
            row = [str((j + 1) * every)]
            row += [_fmt(float(t.values[j])) if j < len(t) else "" for t in traces]
            w.writerow(row)
    return buf.getvalue() if out is None else ""


# ---------------------------------------------------------------------------
# argument handling


class _UsageError(Exception):
    pass


def _parse_pairs(text: str) -> list[tuple[int, int]]:
    pairs = []
    for item in text.split(","):
        i, sep, j = item.strip().partition(":")
        if not sep:
            raise _UsageError(f"bad --pair entry {item!r}; expected i:j")
        try:
            pairs.append((int(i), int(j)))
        except ValueError:
            raise _UsageError(f"bad --pair entry {item!r}") from None
    return pairs


def _parse_start(text: str | None, n: int) -> Pair | None:
    if text is None:
        return None
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise _UsageError(f"bad --start {text!r}") from None
    if len(vals) == n:
        return Pair(vals, vals)
    if len(vals) == 2 * n:
        return Pair(vals[:n], vals[n:])
    raise _UsageError(f"--start needs {n} (x = y) or {2 * n} coordinates, got {len(vals)}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="bestapprox",
        description="Run best-approximation-pair solvers and write CSV convergence traces.",
    )
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--problem", metavar="PATH", help="JSON problem file")
    src.add_argument("--builtin", choices=["toy", "boxes"], help="built-in problem")
    p.add_argument("--n", type=int, default=1000, help="dimension of the boxes problem")
    p.add_argument(
        "--algorithm",
        required=True,
        help="comma-separated list from {%s}; append +pp to use --pair" % ",".join(ALGORITHMS),
    )
    p.add_argument("--alpha", type=float)
    p.add_argument("--p", type=int, choices=[1, 2])
    p.add_argument("--lambda", dest="lambda_relax", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--Ldual", type=float)
    p.add_argument("--rho0", type=float)
    p.add_argument("--rhomax", type=float)
    p.add_argument("--L", dest="L_penalty", type=float)
    p.add_argument("--eta", help="SSD step sizes: const:R or sqrt")
    p.add_argument("--anchor", choices=["fixed", "dynamic"], help="ACJ anchor mode")
    p.add_argument("--seed", type=int)
    p.add_argument("--budget", type=int, required=True, help="total operation units")
    p.add_argument("--sample-every", type=int, default=1)
    p.add_argument("--metric", choices=["known", "ddelta"])
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--start", help="x = y coordinates (n values) or x then y (2n values)")
    p.add_argument("--pair", help="constraint pairs i:j,i:j,... (0-based)")
    p.add_argument("--iterates", action="store_true", help="add iterate columns (single run)")
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    return p


def _config(args, algo: str, example: str) -> SolverConfig:
    overrides = {}
    for name in ("alpha", "p", "lambda_relax", "epsilon", "rho0", "L_penalty", "seed"):
        val = getattr(args, name)
        if val is not None:
            overrides[name] = val
    if args.Ldual is not None:
        overrides["L_dual"] = args.Ldual
    if args.rhomax is not None:
        overrides["rho_max"] = args.rhomax
    if args.anchor is not None:
        overrides["acj_anchor_mode"] = args.anchor
    if args.eta is not None:
        overrides["step_schedule"] = StepSchedule.parse(args.eta)
    return SolverConfig.example_defaults(algo, example, **overrides)


def _load(args) -> ProblemInstance:
    if args.problem:
        return load_problem_file(args.problem)
    if args.builtin == "toy":
        return builtin_toy()
    return builtin_boxes(args.n)


def _specs(args, problem: ProblemInstance) -> list[RunSpec]:
    tokens = [t.strip().lower() for t in args.algorithm.split(",") if t.strip()]
    if not tokens:
        raise _UsageError("--algorithm is empty")
    pairs = _parse_pairs(args.pair) if args.pair else []
    any_pp = any(t.endswith("+pp") for t in tokens)
    if any_pp and not pairs:
        raise _UsageError("+pp runs need --pair")
    example = "boxes" if args.builtin == "boxes" else "toy"
    metric = args.metric or ("known" if problem.known_solution is not None else "ddelta")
    budget = BudgetPolicy(args.budget, args.sample_every)
    start = _parse_start(args.start, problem.dimension)
    specs = []
    for tok in tokens:
        algo, pp = (tok[:-3], True) if tok.endswith("+pp") else (tok, False)
        if algo not in ALGORITHMS:
            raise _UsageError(f"unknown algorithm {algo!r}")
        use_pairs = pairs if (pp or (pairs and not any_pp)) else []
        specs.append(
            RunSpec(
                problem=problem,
                config=_config(args, algo, example),
                budget=budget,
                metric=metric,
                delta=args.delta,
                start=start,
                pairs=use_pairs,
                label=tok,
                keep_iterates=args.iterates and len(tokens) == 1,
            )
        )
    return specs


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        problem = _load(args)
    except ProblemError as exc:
        print(f"bestapprox: problem error: {exc}", file=sys.stderr)
        return EXIT_PROBLEM
    try:
        specs = _specs(args, problem)
        if len(specs) == 1:
            specs[0].label = "metric"
    except (_UsageError, ValueError) as exc:
        if isinstance(exc, ProblemError):
            print(f"bestapprox: problem error: {exc}", file=sys.stderr)
            return EXIT_PROBLEM
        print(f"bestapprox: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        text = emit_compare(specs)
    except ProblemError as exc:
        print(f"bestapprox: problem error: {exc}", file=sys.stderr)
        return EXIT_PROBLEM
    except (BudgetError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"bestapprox: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
