"""
Operation-counted evaluation of the solvers.

Algorithms are compared on a common currency of *units*: one unit per
projection onto a single ``A_i`` or ``B_i`` and one per prox/argmax
evaluation.  An iteration that consumes ``u`` units only produces its
output at the end, so that output is recorded for all ``u`` unit slots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .problem import Pair, ProblemInstance, pair_norm
from .solvers import SolverConfig, make_solver

__all__ = [
    "BudgetError",
    "BudgetPolicy",
    "TraceRecord",
    "Trace",
    "metric_known",
    "metric_ddelta",
    "run",
]

DEFAULT_DELTA = 0.1


class BudgetError(ValueError):
    pass


@dataclass(frozen=True)
class BudgetPolicy:
    total_units: int
    sample_every: int = 1

    def __post_init__(self):
        if self.total_units < 1 or self.sample_every < 1:
            raise BudgetError("total_units and sample_every must be positive")
        if self.sample_every > self.total_units:
            raise BudgetError("sample_every exceeds total_units")


@dataclass(frozen=True)
class TraceRecord:
    unit_index: int
    metric_value: float
    iterate: Pair | None = None


@dataclass
class Trace:
    """Metric samples of one run.

    ``units[j]`` is a multiple of ``sample_every`` and ``values[j]`` the
    metric after the iteration that covers that unit slot.
    """

    algorithm: str
    units: np.ndarray
    values: np.ndarray
    consumed: int
    remainder: int
    iterations: int
    sample_every: int
    iterates: list[Pair] | None = None

    def __len__(self) -> int:
        return len(self.units)

    def __iter__(self) -> Iterator[TraceRecord]:
        its = self.iterates
        for j, (u, v) in enumerate(zip(self.units.tolist(), self.values.tolist())):
            yield TraceRecord(u, v, its[j] if its is not None else None)

    @property
    def records(self) -> list[TraceRecord]:
        return list(self)

    @property
    def final(self) -> float:
        return float(self.values[-1])

    def value_at(self, unit: int) -> float:
        """Metric recorded for unit slot ``unit`` (must be a sampled slot)."""
        j = unit // self.sample_every - 1
        if j < 0 or j >= len(self.units) or self.units[j] != unit:
            raise KeyError(unit)
        return float(self.values[j])


def metric_known(z: Pair, solution: Pair | None) -> float:
    """Distance ``||z - solution||`` in the pair space."""
    if solution is None:
        raise ValueError("problem has no known solution")
    return pair_norm(z - solution)


def _ddelta_arr(problem: ProblemInstance, z: np.ndarray, delta: float) -> float:
    gap = float(np.linalg.norm(z[0] - z[1]))
    da = problem.a_stack.distances(z[0])
    db = problem.b_stack.distances(z[1])
    return gap + float(np.sum(np.sqrt(da * da + db * db))) / delta


def metric_ddelta(z: Pair, problem: ProblemInstance, delta: float = DEFAULT_DELTA) -> float:
    """``||x - y|| + (1/delta) sum_i d_{C_i}(x, y)`` with
    ``d_{C_i}(x, y) = sqrt(d_{A_i}(x)^2 + d_{B_i}(y)^2)``.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    return _ddelta_arr(problem, z.stack(), delta)


def _metric_fn(problem: ProblemInstance, metric: str, delta: float):
    if metric == "known":
        sol = problem.known_solution
        if sol is None:
            raise ValueError("the 'known' metric needs a problem with a known solution")
        s = sol.stack().ravel()

        def known(z):
            d = z.ravel() - s
            return math.sqrt(float(d @ d))

        return known
    if metric == "ddelta":
        if not delta > 0:
            raise ValueError("delta must be positive")
        return lambda z: _ddelta_arr(problem, z, delta)
    raise ValueError(f"unknown metric {metric!r}")


def run(
    problem: ProblemInstance,
    config: SolverConfig,
    budget: BudgetPolicy,
    metric: str = "known",
    start: Pair | None = None,
    delta: float = DEFAULT_DELTA,
    keep_iterates: bool = False,
) -> Trace:
    """Step a solver until the next iteration would overrun the budget.

    Units not spent at the end (possible when iteration costs vary, as in
    ACJ) are reported in ``Trace.remainder``.
    """
    evaluate = _metric_fn(problem, metric, delta)
    solver = make_solver(problem, config, start)
    total, every = budget.total_units, budget.sample_every
    if solver.next_cost() > total:
        raise BudgetError(
            f"budget of {total} units is smaller than the first iteration ({solver.next_cost()})"
        )
    cap = total // every
    units = np.empty(cap, dtype=np.int64)
    values = np.empty(cap)
    iterates: list[Pair] | None = [] if keep_iterates else None
    used = 0
    count = 0
    next_sample = every
    while True:
        cost = solver.next_cost()
        if used + cost > total:
            break
        solver.step()
        used += cost
        if next_sample <= used:
            z = solver.primal_arr
            val = evaluate(z)
            it = Pair.from_stack(z) if keep_iterates else None
            while next_sample <= used:
                units[count] = next_sample
                values[count] = val
                if iterates is not None:
                    iterates.append(it)
                count += 1
                next_sample += every
    return Trace(
        algorithm=config.algorithm,
        units=units[:count],
        values=values[:count],
        consumed=used,
        remainder=total - used,
        iterations=solver.iteration,
        sample_every=every,
        iterates=iterates,
    )
