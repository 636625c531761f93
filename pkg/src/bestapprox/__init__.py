"""Best approximation pairs between two finite intersections of convex sets."""

from .harness import BudgetPolicy, Trace, TraceRecord, metric_ddelta, metric_known, run
from .operators import (
    argmax_dual,
    distance,
    project,
    project_product,
    prox_norm_diff,
    prox_sqnorm_diff,
    sign_vec,
    subgrad_distance,
    subgrad_norm_diff,
)
from .problem import (
    Ball,
    Box,
    Halfspace,
    Pair,
    PairedHalfspaces,
    ProblemError,
    ProblemInstance,
    ProductConstraint,
    builtin_boxes,
    builtin_toy,
    dump_problem,
    load_problem,
    pair_constraints,
    pair_norm,
)
from .solvers import ALGORITHMS, SolverConfig, StepSchedule, make_solver

__version__ = "0.1.0"
