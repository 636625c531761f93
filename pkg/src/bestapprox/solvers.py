"""
Iterative solvers for best approximation pairs.

Every solver is a small stateful stepper.  ``step()`` performs one
iteration and returns the number of operation units it consumed (one
unit per projection onto a single ``A_i`` or ``B_i`` and one per
prox/argmax evaluation of the coupling term); ``primal_arr`` is the
current estimate ``(a, b)`` as a ``(2, n)`` array, ``a`` near ``A``
and ``b`` near ``B``.

Available algorithms:

* ``acj``    alternating anchored (HLWB) sweeps
* ``dr``     Douglas-Rachford on the product of ``m + 1`` copies
* ``dpg``    dual proximal gradient on a strongly convex perturbation
* ``fdpg``   FISTA-accelerated ``dpg``
* ``pda``    proximal distance algorithm
* ``accpda`` Nesterov-accelerated ``pda``
* ``ssd``    stochastic subgradient descent on an exact-penalty form
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .operators import (
    SetStack,
    argmax_dual_arr,
    prox_norm_diff_arr,
    prox_sqnorm_diff_arr,
    unit_cost,
)
from .problem import Pair, ProblemInstance, cyclic_index

__all__ = [
    "ALGORITHMS",
    "StepSchedule",
    "SolverConfig",
    "Solver",
    "ACJ",
    "DouglasRachford",
    "DPG",
    "FDPG",
    "PDA",
    "AccPDA",
    "SSD",
    "make_solver",
    "acj_sweep_length",
    "hlwb_sweep",
    "pda_rho",
    "fista_t_next",
    "accpda_coefficient",
]

ALGORITHMS = ("acj", "dr", "dpg", "fdpg", "pda", "accpda", "ssd")


@dataclass(frozen=True)
class StepSchedule:
    """SSD step sizes: ``scale`` (const) or ``scale / sqrt(k + 1)`` (sqrt)."""

    kind: str = "sqrt"
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("const", "sqrt"):
            raise ValueError(f"unknown step schedule {self.kind!r}")
        if not self.scale > 0:
            raise ValueError("step scale must be positive")

    def __call__(self, k: int) -> float:
        if self.kind == "const":
            return self.scale
        return self.scale / math.sqrt(k + 1)

    @classmethod
    def parse(cls, text: str) -> "StepSchedule":
        """``"sqrt"``, ``"sqrt:c"`` or ``"const:c"``."""
        kind, _, val = text.partition(":")
        if kind == "sqrt":
            return cls("sqrt", float(val) if val else 1.0)
        if kind == "const" and val:
            return cls("const", float(val))
        raise ValueError(f"bad step schedule {text!r}; expected const:R or sqrt")


@dataclass(frozen=True)
class SolverConfig:
    algorithm: str
    alpha: float = 1.0
    p: int = 1
    lambda_relax: float = 1.0
    epsilon: float = 0.25
    L_dual: float | None = None  # None -> m / epsilon
    rho0: float = 1.0
    rho_max: float = 1e5
    L_penalty: float = 1.0
    step_schedule: StepSchedule = field(default_factory=StepSchedule)
    seed: int = 0
    acj_anchor_mode: str = "dynamic"
    fdpg_momentum: bool = True

    def __post_init__(self):
        algo = self.algorithm.lower()
        object.__setattr__(self, "algorithm", algo)
        if algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.p not in (1, 2):
            raise ValueError("p must be 1 or 2")
        if not 0 < self.lambda_relax < 2:
            raise ValueError("lambda_relax must lie in (0, 2)")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not (self.rho0 > 0 and self.rho_max >= self.rho0):
            raise ValueError("need 0 < rho0 <= rho_max")
        if not self.L_penalty > 0:
            raise ValueError("L_penalty must be positive")
        if self.acj_anchor_mode not in ("fixed", "dynamic"):
            raise ValueError("acj_anchor_mode must be 'fixed' or 'dynamic'")

    def dual_step_constant(self, m: int) -> float:
        L = m / self.epsilon if self.L_dual is None else float(self.L_dual)
        if L < m / self.epsilon * (1 - 1e-12):
            raise ValueError(f"L_dual = {L} is below m / epsilon = {m / self.epsilon}")
        return L

    @classmethod
    def example_defaults(cls, algorithm: str, example: str = "toy", **overrides) -> "SolverConfig":
        """Parameters used in the two worked examples (``toy`` or ``boxes``)."""
        algo = algorithm.lower()
        base: dict = {
            "acj": {"acj_anchor_mode": "dynamic"},
            "dr": {"p": 1, "alpha": 5.0, "lambda_relax": 1.0},
            "dpg": {"alpha": 1.0, "epsilon": 0.25},
            "fdpg": {"alpha": 1.0, "epsilon": 0.25},
            "pda": {"alpha": 1.0, "rho0": 1.0, "rho_max": 1e5},
            "accpda": {"alpha": 1.0, "rho0": 1.0, "rho_max": 1e5},
            "ssd": {"alpha": 1.0, "L_penalty": 1.0, "step_schedule": StepSchedule("sqrt", 1.0)},
        }.get(algo, {})
        if example == "boxes":
            if algo in ("dpg", "fdpg"):
                base["epsilon"] = 0.1
            if algo == "ssd":
                base["L_penalty"] = 10.0
        elif example != "toy":
            raise ValueError(f"unknown example {example!r}")
        base.update(overrides)
        return cls(algorithm=algo, **base)

    def with_overrides(self, **kw) -> "SolverConfig":
        return replace(self, **kw)


def _start_array(problem: ProblemInstance, start: Pair | None) -> np.ndarray:
    if start is None:
        return np.zeros((2, problem.dimension))
    if start.dim != problem.dimension:
        raise ValueError(f"start pair has dimension {start.dim}, problem has {problem.dimension}")
    return start.stack()


class Solver:
    """Base class; subclasses implement ``step`` and ``next_cost``."""

    name = ""

    def __init__(self, problem: ProblemInstance, config: SolverConfig, start: Pair | None = None):
        self.problem = problem
        self.config = config
        self.m = problem.m
        self.a_stack: SetStack = problem.a_stack
        self.b_stack: SetStack = problem.b_stack
        self.iteration = 0
        self.ops_used = 0
        self._z = _start_array(problem, start)

    @property
    def primal_arr(self) -> np.ndarray:
        """Current ``(2, n)`` estimate; callers must not modify it."""
        return self._z

    def primal(self) -> Pair:
        return Pair.from_stack(self.primal_arr)

    def next_cost(self) -> int:
        raise NotImplementedError

    def step(self) -> int:
        raise NotImplementedError

    def _product_cost(self) -> int:
        return self.a_stack.total_cost + self.b_stack.total_cost

    def _project_pairs(self, R: np.ndarray) -> np.ndarray:
        """Project block ``R[i]`` (shape ``(m, 2, n)``) onto ``C_i``."""
        out = np.empty_like(R)
        out[:, 0, :] = self.a_stack.project_rows(R[:, 0, :])
        out[:, 1, :] = self.b_stack.project_rows(R[:, 1, :])
        return out


# ---------------------------------------------------------------------------
# ACJ


def acj_sweep_length(k: int) -> int:
    """``floor(1.1 ** k)``, computed exactly."""
    return 11**k // 10**k


def hlwb_sweep(sets, target: np.ndarray, start: np.ndarray, n: int) -> tuple[np.ndarray, int]:
    """Anchored sweep ``w_{i+1} = lam_{i+1} target + (1 - lam_{i+1}) P_{i+1}(w_i)``.

    ``w_0 = start`` and ``lam_j = 1 / (j + 1)``; set ``P_j`` is taken
    cyclically from ``sets`` (a ``SetStack`` or a sequence of sets).
    The step counter restarts at 1 on every call.  Returns ``w_n`` and
    the operation units spent.
    """
    if n < 1:
        raise ValueError("sweep length must be positive")
    stack = sets if isinstance(sets, SetStack) else SetStack(sets)
    m = stack.m
    target = np.asarray(target, dtype=float)
    w = np.array(start, dtype=float)
    if stack.halfspaces:
        rows, off, nsq = stack._rows, stack._off, stack._nsq
        for j in range(1, n + 1):
            i = cyclic_index(j, m)
            excess = float(rows[i] @ w) - off[i]
            if excess > 0.0:
                w -= (excess / nsq[i]) * rows[i]
            # w <- lam * target + (1 - lam) * w
            w -= (w - target) * (1.0 / (j + 1))
    else:
        project = stack.project_one
        for j in range(1, n + 1):
            lam = 1.0 / (j + 1)
            w = lam * target + (1.0 - lam) * project(cyclic_index(j, m), w)
    return w, _sweep_cost(stack, n)


def _sweep_cost(stack: SetStack, n: int) -> int:
    if stack.total_cost == stack.m:
        return n
    full, rest = divmod(n, stack.m)
    return full * stack.total_cost + sum(stack.costs[:rest])


def _steps_within(stack: SetStack, units: int) -> int:
    """Longest sweep (at least one step) whose cost fits in ``units``."""
    if stack.total_cost == stack.m:
        return units
    full, rest = divmod(units, stack.total_cost)
    steps = full * stack.m
    spent = full * stack.total_cost
    for c in stack.costs:
        if spent + c > units:
            break
        spent += c
        steps += 1
    return max(steps, 1)


class ACJ(Solver):
    """Alternating anchored sweeps.

    Internally ``a`` tracks the ``A`` side and ``b`` the ``B`` side.  Even
    outer steps refresh ``a`` by a sweep over the ``A_i`` aimed at ``b``;
    odd steps refresh ``b`` by a sweep over the ``B_i`` aimed at ``a``.
    Sweep ``k`` is allowed ``floor(1.1**k)`` units, i.e. that many
    projections when every set costs one unit, and starts from the
    previous value of the side being refreshed (dynamic mode) or from
    the initial point (fixed mode).
    """

    name = "acj"

    def __init__(self, problem, config, start=None):
        super().__init__(problem, config, start)
        self._a0 = self._z[0].copy()
        self._b0 = self._z[1].copy()

    def _sweep_plan(self) -> tuple[SetStack, int]:
        k = self.iteration
        stack = self.a_stack if k % 2 == 0 else self.b_stack
        return stack, _steps_within(stack, acj_sweep_length(k))

    def next_cost(self) -> int:
        stack, steps = self._sweep_plan()
        return _sweep_cost(stack, steps)

    def step(self) -> int:
        stack, steps = self._sweep_plan()
        a, b = self._z[0], self._z[1]
        dynamic = self.config.acj_anchor_mode == "dynamic"
        if self.iteration % 2 == 0:
            # the previous A-side value equals the current one on even steps
            start = a if dynamic else self._a0
            new, cost = hlwb_sweep(stack, b, start, steps)
            self._z = np.stack([new, b])
        else:
            start = b if dynamic else self._b0
            new, cost = hlwb_sweep(stack, a, start, steps)
            self._z = np.stack([a, new])
        self.iteration += 1
        self.ops_used += cost
        return cost


# ---------------------------------------------------------------------------
# Douglas-Rachford


class DouglasRachford(Solver):
    """Douglas-Rachford splitting over ``f_0 = alpha ||x - y||^p`` and the ``m``
    indicator functions, run on ``m + 1`` copies of the pair space.
    The reported estimate is the average of the copies.
    """

    name = "dr"

    def __init__(self, problem, config, start=None):
        super().__init__(problem, config, start)
        self.Z = np.repeat(self._z[None], self.m + 1, axis=0)
        self._zbar = self.Z.mean(axis=0)
        self._cost = 1 + self._product_cost()

    @property
    def primal_arr(self):
        return self._zbar

    def _prox_f0(self, z):
        cfg = self.config
        if cfg.p == 1:
            return prox_norm_diff_arr(cfg.alpha, z)
        # alpha ||x - y||^2 = (2 alpha) / 2 ||x - y||^2
        return prox_sqnorm_diff_arr(2.0 * cfg.alpha, z)

    def next_cost(self) -> int:
        return self._cost

    def step(self) -> int:
        Z, zbar = self.Z, self._zbar
        R = 2.0 * zbar[None] - Z
        X = np.empty_like(Z)
        X[0] = self._prox_f0(R[0])
        X[1:] = self._project_pairs(R[1:])
        Z += self.config.lambda_relax * (X - zbar[None])
        self._zbar = Z.mean(axis=0)
        self.iteration += 1
        self.ops_used += self._cost
        return self._cost


# ---------------------------------------------------------------------------
# dual proximal gradient


class DPG(Solver):
    """Dual proximal gradient for ``f_0(x, y) = alpha/2 ||x-y||^2 + eps/2 (||x||^2 + ||y||^2)``
    plus the indicators of the ``C_i``.

    Dual blocks start at zero.  The estimate is the argmax of
    ``<s, w> - f_0(w)`` at the current dual sum ``s``.
    """

    name = "dpg"

    def __init__(self, problem, config, start=None, dual_start: np.ndarray | None = None):
        super().__init__(problem, config, start)
        self.L = config.dual_step_constant(self.m)
        if dual_start is None:
            self.Z = np.zeros((self.m, 2, problem.dimension))
        else:
            self.Z = np.array(dual_start, dtype=float).reshape(self.m, 2, problem.dimension)
        self._primal = self._argmax(self.Z)
        self._cost = 1 + self._product_cost()

    @property
    def primal_arr(self):
        return self._primal

    def _argmax(self, blocks: np.ndarray) -> np.ndarray:
        return argmax_dual_arr(self.config.alpha, self.config.epsilon, blocks.sum(axis=0))

    def _dual_update(self, W: np.ndarray, u: np.ndarray) -> np.ndarray:
        L = self.L
        P = self._project_pairs(u[None] - L * W)
        return W - u[None] / L + P / L

    def dual_objective(self) -> float:
        """Dual value ``-f_0^*(s) - sum_i sigma_{C_i}(-z_i)`` at the current blocks.

        Only finite when every support function is; used as a monotonicity
        diagnostic.
        """
        cfg = self.config
        s = self.Z.sum(axis=0)
        w = self._argmax(self.Z)
        d = w[0] - w[1]
        f0 = 0.5 * cfg.alpha * float(d @ d) + 0.5 * cfg.epsilon * float(np.sum(w * w))
        conj = float(np.sum(s * w)) - f0
        support = 0.0
        for i, c in enumerate(self.problem.constraints):
            support += _support(c.a_side, -self.Z[i, 0]) + _support(c.b_side, -self.Z[i, 1])
        return -conj - support

    def next_cost(self) -> int:
        return self._cost

    def step(self) -> int:
        self.Z = self._dual_update(self.Z, self._primal)
        self._primal = self._argmax(self.Z)
        self.iteration += 1
        self.ops_used += self._cost
        return self._cost


def _support(s, v: np.ndarray) -> float:
    """``sup_{w in s} <v, w>`` for a halfspace or box (may be ``inf``)."""
    from .problem import Box, Halfspace

    if isinstance(s, Halfspace):
        if not np.any(v):
            return 0.0
        # v must be a nonnegative multiple of the normal
        t = float(v @ s.normal) / s.norm_sq
        if t < 0 or np.linalg.norm(v - t * s.normal) > 1e-9 * max(1.0, np.linalg.norm(v)):
            return math.inf
        return t * s.offset
    if isinstance(s, Box):
        total = 0.0
        for vi, lo, hi in zip(v, s.lower, s.upper):
            if vi > 0:
                total += vi * hi
            elif vi < 0:
                total += vi * lo
        return total
    raise TypeError(f"support function not available for {type(s).__name__}")


class FDPG(DPG):
    """FISTA-accelerated dual proximal gradient.

    The extrapolation acts on the whole dual block vector:
    ``W_{k+1} = Z_{k+1} + ((t_k - 1) / t_{k+1}) (Z_{k+1} - Z_k)``.
    With ``fdpg_momentum=False`` the iterates coincide with DPG's.
    """

    name = "fdpg"

    def __init__(self, problem, config, start=None, dual_start=None):
        super().__init__(problem, config, start, dual_start)
        self.W = self.Z.copy()
        self.t = 1.0

    def step(self) -> int:
        u = self._argmax(self.W)
        Z_new = self._dual_update(self.W, u)
        t_new = fista_t_next(self.t)
        if self.config.fdpg_momentum:
            self.W = Z_new + ((self.t - 1.0) / t_new) * (Z_new - self.Z)
        else:
            self.W = Z_new
        self.Z = Z_new
        self.t = t_new
        self._primal = self._argmax(self.Z)
        self.iteration += 1
        self.ops_used += self._cost
        return self._cost


def fista_t_next(t: float) -> float:
    return (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0


# ---------------------------------------------------------------------------
# proximal distance


_LOG_12 = math.log(1.2)


def pda_rho(k: int, rho0: float, rho_max: float) -> float:
    """Penalty schedule ``min(1.2**k * rho0, rho_max)`` without overflow."""
    if k * _LOG_12 + math.log(rho0) >= math.log(rho_max):
        return rho_max
    return min(rho0 * 1.2**k, rho_max)


def accpda_coefficient(k: int) -> float:
    return (k - 1) / (k + 2)


class PDA(Solver):
    """Proximal distance algorithm with ``h = alpha ||x - y||``:
    average the ``m`` product projections, then apply the prox of ``h / rho_k``.
    """

    name = "pda"

    def __init__(self, problem, config, start=None):
        super().__init__(problem, config, start)
        self._cost = 1 + self._product_cost()

    def next_cost(self) -> int:
        return self._cost

    def _map(self, w: np.ndarray, k: int) -> np.ndarray:
        cfg = self.config
        avg = np.stack([
            self.a_stack.project_point(w[0]).mean(axis=0),
            self.b_stack.project_point(w[1]).mean(axis=0),
        ])
        rho = pda_rho(k, cfg.rho0, cfg.rho_max)
        return prox_norm_diff_arr(cfg.alpha / rho, avg)

    def step(self) -> int:
        self._z = self._map(self._z, self.iteration)
        self.iteration += 1
        self.ops_used += self._cost
        return self._cost


class AccPDA(PDA):
    """PDA with extrapolation ``w_k = z_k + (k-1)/(k+2) (z_k - z_{k-1})``, ``z_{-1} = z_0``."""

    name = "accpda"

    def __init__(self, problem, config, start=None):
        super().__init__(problem, config, start)
        self._z_prev = self._z.copy()

    def step(self) -> int:
        k = self.iteration
        z = self._z
        w = z + accpda_coefficient(k) * (z - self._z_prev)
        self._z_prev = z
        self._z = self._map(w, k)
        self.iteration += 1
        self.ops_used += self._cost
        return self._cost


# ---------------------------------------------------------------------------
# stochastic subgradient


_SSD_BLOCK = 4096
_U64 = (1 << 64) - 1


class SSD(Solver):
    """Stochastic subgradient descent on ``alpha ||x - y|| + L sum_i d_{C_i}``.

    Step ``k`` samples ``i_k`` uniformly from ``{0, ..., m}``; index 0 is the
    coupling term.  Indices come from a Philox stream keyed by
    ``(seed, k // 4096)``, so the sequence depends only on the seed.
    """

    name = "ssd"

    def __init__(self, problem, config, start=None):
        super().__init__(problem, config, start)
        self._block_id = -1
        self._block: list[int] = []
        self._costs = [1] + [
            max(unit_cost(c.a_side), unit_cost(c.b_side)) for c in problem.constraints
        ]
        self._uniform_cost = all(c == 1 for c in self._costs)
        self._fast = self.a_stack.halfspaces and self.b_stack.halfspaces
        self._x, self._y = self._z[0], self._z[1]
        if self._fast:
            A, B = self.a_stack, self.b_stack
            self._a_rows, self._a_off, self._a_nsq = A._rows, A._off, A._nsq
            self._b_rows, self._b_off, self._b_nsq = B._rows, B._off, B._nsq

    def sample_index(self, k: int) -> int:
        block = k // _SSD_BLOCK
        if block != self._block_id:
            key = np.array([self.config.seed & _U64, block], dtype=np.uint64)
            rng = np.random.Generator(np.random.Philox(key=key))
            self._block = rng.integers(0, self.m + 1, size=_SSD_BLOCK).tolist()
            self._block_id = block
        return self._block[k % _SSD_BLOCK]

    def next_cost(self) -> int:
        if self._uniform_cost:
            return 1
        return self._costs[self.sample_index(self.iteration)]

    def _constraint_step(self, j: int, eta: float) -> None:
        x, y = self._x, self._y
        if self._fast:
            ra, rb = self._a_rows[j], self._b_rows[j]
            ea = float(ra @ x) - self._a_off[j]
            eb = float(rb @ y) - self._b_off[j]
            # z - P_C z = (ea * ra, eb * rb) after scaling by 1/||row||^2
            ea = ea / self._a_nsq[j] if ea > 0.0 else 0.0
            eb = eb / self._b_nsq[j] if eb > 0.0 else 0.0
            r = math.sqrt(ea * ea * self._a_nsq[j] + eb * eb * self._b_nsq[j])
            if r > 0.0:
                c = eta * self.config.L_penalty / r
                if ea:
                    x -= (c * ea) * ra
                if eb:
                    y -= (c * eb) * rb
            return
        dx = x - self.a_stack.project_one(j, x)
        dy = y - self.b_stack.project_one(j, y)
        r = math.sqrt(float(dx @ dx) + float(dy @ dy))
        if r > 0.0:
            c = eta * self.config.L_penalty / r
            x -= c * dx
            y -= c * dy

    def step(self) -> int:
        k = self.iteration
        i = self.sample_index(k)
        eta = self.config.step_schedule(k)
        if i == 0:
            x, y = self._x, self._y
            d = x - y
            r = math.sqrt(float(d @ d))
            if r > 0.0:
                d *= eta * self.config.alpha / r
                x -= d
                y += d
        else:
            self._constraint_step(i - 1, eta)
        cost = self._costs[i]
        self.iteration += 1
        self.ops_used += cost
        return cost


_SOLVERS = {
    "acj": ACJ,
    "dr": DouglasRachford,
    "dpg": DPG,
    "fdpg": FDPG,
    "pda": PDA,
    "accpda": AccPDA,
    "ssd": SSD,
}


def make_solver(problem: ProblemInstance, config: SolverConfig, start: Pair | None = None) -> Solver:
    """Instantiate the solver named by ``config.algorithm``, starting from ``start``
    (the zero pair by default)."""
    return _SOLVERS[config.algorithm](problem, config, start)
