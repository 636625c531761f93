"""
Problem model: points, pairs, simple convex sets and problem instances.

A problem consists of two families of simple closed convex sets
``A_1, ..., A_m`` and ``B_1, ..., B_m`` in R^n.  The goal is a pair
``(a, b)`` with ``a`` in every ``A_i``, ``b`` in every ``B_i`` and
``||a - b||`` minimal.  Constraint ``i`` is the product set
``C_i = A_i x B_i`` of the pair space ``R^n x R^n``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Sequence, Union

import numpy as np

__all__ = [
    "ProblemError",
    "Pair",
    "Halfspace",
    "Box",
    "Ball",
    "PairedHalfspaces",
    "ConvexSet",
    "ProductConstraint",
    "ProblemInstance",
    "as_vector",
    "pair_norm",
    "cyclic_index",
    "load_problem",
    "load_problem_file",
    "dump_problem",
    "problem_to_dict",
    "builtin_toy",
    "builtin_boxes",
    "whole_space",
    "pair_constraints",
]

KNOWN_SOLUTION_TOL = 1e-9


class ProblemError(ValueError):
    """Invalid problem data (bad document, inconsistent dimensions, ...)."""


def as_vector(values, name: str = "vector", allow_inf: bool = False) -> np.ndarray:
    """Return a read-only 1-D float copy of ``values``, checking finiteness."""
    try:
        arr = np.array(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ProblemError(f"{name}: not a numeric vector") from exc
    if arr.ndim != 1 or arr.size == 0:
        raise ProblemError(f"{name}: expected a non-empty 1-D vector, got shape {arr.shape}")
    bad = np.isnan(arr) if allow_inf else ~np.isfinite(arr)
    if bad.any():
        raise ProblemError(f"{name}: entries must be finite")
    arr.flags.writeable = False
    return arr


def _arrays_equal(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and bool(np.array_equal(a, b))


@dataclass(frozen=True, eq=False)
class Pair:
    """A point ``(x, y)`` of the pair space ``R^n x R^n``."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = as_vector(self.x, "Pair.x")
        y = as_vector(self.y, "Pair.y")
        if x.shape != y.shape:
            raise ProblemError(f"Pair: x has dimension {x.size}, y has {y.size}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def dim(self) -> int:
        return self.x.size

    def stack(self) -> np.ndarray:
        """Writable ``(2, n)`` array with rows ``x`` and ``y``."""
        return np.stack([self.x, self.y])

    @classmethod
    def from_stack(cls, z: np.ndarray) -> "Pair":
        return cls(z[0], z[1])

    @classmethod
    def zeros(cls, n: int) -> "Pair":
        return cls(np.zeros(n), np.zeros(n))

    def __sub__(self, other: "Pair") -> "Pair":
        return Pair(self.x - other.x, self.y - other.y)

    def __add__(self, other: "Pair") -> "Pair":
        return Pair(self.x + other.x, self.y + other.y)

    def __eq__(self, other):
        if not isinstance(other, Pair):
            return NotImplemented
        return _arrays_equal(self.x, other.x) and _arrays_equal(self.y, other.y)

    __hash__ = None


def pair_norm(p: Pair) -> float:
    """Norm of the pair space, ``sqrt(||x||^2 + ||y||^2)``."""
    return math.sqrt(float(p.x @ p.x + p.y @ p.y))


# ---------------------------------------------------------------------------
# simple convex sets


@dataclass(frozen=True, eq=False)
class Halfspace:
    """``{w : <normal, w> <= offset}``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        a = as_vector(self.normal, "Halfspace.normal")
        nrm = float(np.linalg.norm(a))
        if not nrm > 0.0:
            raise ProblemError("Halfspace.normal must be nonzero")
        offset = float(self.offset)
        if not math.isfinite(offset):
            raise ProblemError("Halfspace.offset must be finite")
        object.__setattr__(self, "normal", a)
        object.__setattr__(self, "offset", offset)

    @property
    def dim(self) -> int:
        return self.normal.size

    @cached_property
    def norm_sq(self) -> float:
        return float(self.normal @ self.normal)

    def __eq__(self, other):
        if not isinstance(other, Halfspace):
            return NotImplemented
        return _arrays_equal(self.normal, other.normal) and self.offset == other.offset

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Box:
    """``{w : lower <= w <= upper}``; entries may be infinite."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = as_vector(self.lower, "Box.lower", allow_inf=True)
        hi = as_vector(self.upper, "Box.upper", allow_inf=True)
        if lo.shape != hi.shape:
            raise ProblemError("Box: lower and upper differ in dimension")
        if np.any(lo > hi) or np.any(lo == np.inf) or np.any(hi == -np.inf):
            raise ProblemError("Box: empty (lower > upper somewhere)")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def is_whole_space(self) -> bool:
        return bool(np.all(self.lower == -np.inf) and np.all(self.upper == np.inf))

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return _arrays_equal(self.lower, other.lower) and _arrays_equal(self.upper, other.upper)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Ball:
    """Closed Euclidean ball."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = as_vector(self.center, "Ball.center")
        r = float(self.radius)
        if not (math.isfinite(r) and r > 0):
            raise ProblemError("Ball.radius must be positive and finite")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", r)

    @property
    def dim(self) -> int:
        return self.center.size

    def __eq__(self, other):
        if not isinstance(other, Ball):
            return NotImplemented
        return _arrays_equal(self.center, other.center) and self.radius == other.radius

    __hash__ = None


@dataclass(frozen=True, eq=False)
class PairedHalfspaces:
    """Intersection of two halfspaces, projected onto in closed form.

    Construction fails if the intersection is empty, which can only
    happen for opposed parallel normals.
    """

    first: Halfspace
    second: Halfspace

    def __post_init__(self):
        if not (isinstance(self.first, Halfspace) and isinstance(self.second, Halfspace)):
            raise ProblemError("PairedHalfspaces needs two Halfspace members")
        if self.first.dim != self.second.dim:
            raise ProblemError("PairedHalfspaces: dimension mismatch")
        par = self.parallel
        if par is not None and par < 0:
            # {<a,w> <= b1} and {<a,w> >= b2/c} with c = par < 0
            lo = self.second.offset / par
            if lo > self.first.offset + 1e-12 * max(1.0, abs(self.first.offset)):
                raise ProblemError("PairedHalfspaces: the two halfspaces do not intersect")

    @property
    def dim(self) -> int:
        return self.first.dim

    @cached_property
    def parallel(self) -> float | None:
        """Scale ``c`` with ``second.normal == c * first.normal``, or None."""
        a1, a2 = self.first.normal, self.second.normal
        n1, n2 = self.first.norm_sq, self.second.norm_sq
        g = float(a1 @ a2)
        # Gram determinant relative to its scale
        if n1 * n2 - g * g > 1e-14 * n1 * n2:
            return None
        return g / n1

    def __eq__(self, other):
        if not isinstance(other, PairedHalfspaces):
            return NotImplemented
        return self.first == other.first and self.second == other.second

    __hash__ = None


ConvexSet = Union[Halfspace, Box, Ball, PairedHalfspaces]
_SET_TYPES = (Halfspace, Box, Ball, PairedHalfspaces)


def whole_space(n: int) -> Box:
    return Box(np.full(n, -np.inf), np.full(n, np.inf))


@dataclass(frozen=True, eq=False)
class ProductConstraint:
    """The product set ``a_side x b_side``."""

    a_side: ConvexSet
    b_side: ConvexSet

    def __post_init__(self):
        for s in (self.a_side, self.b_side):
            if not isinstance(s, _SET_TYPES):
                raise ProblemError(f"unsupported set type {type(s).__name__}")
        if self.a_side.dim != self.b_side.dim:
            raise ProblemError(
                f"ProductConstraint: A side has dimension {self.a_side.dim}, "
                f"B side {self.b_side.dim}"
            )

    @property
    def dim(self) -> int:
        return self.a_side.dim

    def __eq__(self, other):
        if not isinstance(other, ProductConstraint):
            return NotImplemented
        return self.a_side == other.a_side and self.b_side == other.b_side

    __hash__ = None


def cyclic_index(j: int, m: int) -> int:
    """0-based position of the set used at 1-based step ``j`` of a cyclic sweep.

    Sets are repeated periodically: ``A_j = A_{1 + rem(j - 1, m)}``.
    """
    if j < 1 or m < 1:
        raise ValueError("cyclic_index needs j >= 1 and m >= 1")
    return (j - 1) % m


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    dimension: int
    constraints: tuple[ProductConstraint, ...]
    known_solution: Pair | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        n = self.dimension
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ProblemError("dimension must be a positive integer")
        object.__setattr__(self, "dimension", int(n))
        cons = tuple(self.constraints)
        if not cons:
            raise ProblemError("a problem needs at least one constraint")
        for i, c in enumerate(cons):
            if not isinstance(c, ProductConstraint):
                raise ProblemError(f"constraint {i} is not a ProductConstraint")
            if c.dim != n:
                raise ProblemError(f"constraint {i} has dimension {c.dim}, expected {n}")
        object.__setattr__(self, "constraints", cons)
        sol = self.known_solution
        if sol is not None:
            if sol.dim != n:
                raise ProblemError("known_solution has the wrong dimension")
            self._check_solution(sol)

    def _check_solution(self, sol: Pair) -> None:
        from .operators import distance

        for i, c in enumerate(self.constraints):
            da = distance(c.a_side, sol.x)
            db = distance(c.b_side, sol.y)
            if da > KNOWN_SOLUTION_TOL or db > KNOWN_SOLUTION_TOL:
                raise ProblemError(
                    f"known_solution violates constraint {i} "
                    f"(d_A = {da:.3g}, d_B = {db:.3g})"
                )

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def a_sets(self) -> tuple[ConvexSet, ...]:
        return tuple(c.a_side for c in self.constraints)

    @property
    def b_sets(self) -> tuple[ConvexSet, ...]:
        return tuple(c.b_side for c in self.constraints)

    @cached_property
    def a_stack(self):
        from .operators import SetStack

        return SetStack(self.a_sets)

    @cached_property
    def b_stack(self):
        from .operators import SetStack

        return SetStack(self.b_sets)

    def __eq__(self, other):
        if not isinstance(other, ProblemInstance):
            return NotImplemented
        return (
            self.dimension == other.dimension
            and self.constraints == other.constraints
            and self.known_solution == other.known_solution
        )

    __hash__ = None


# ---------------------------------------------------------------------------
# JSON documents


def _bound_list(values) -> list:
    return [None if not math.isfinite(v) else float(v) for v in values]


def _set_to_dict(s: ConvexSet) -> dict[str, Any]:
    if isinstance(s, Halfspace):
        return {"type": "halfspace", "normal": s.normal.tolist(), "offset": s.offset}
    if isinstance(s, Box):
        return {"type": "box", "lower": _bound_list(s.lower), "upper": _bound_list(s.upper)}
    if isinstance(s, Ball):
        return {"type": "ball", "center": s.center.tolist(), "radius": s.radius}
    if isinstance(s, PairedHalfspaces):
        return {
            "type": "paired_halfspaces",
            "first": _set_to_dict(s.first),
            "second": _set_to_dict(s.second),
        }
    raise TypeError(f"cannot serialize {type(s).__name__}")


def _bounds(values, default: float, name: str) -> np.ndarray:
    if not isinstance(values, list):
        raise ProblemError(f"{name} must be a list")
    return np.array([default if v is None else v for v in values], dtype=float)


def _set_from_dict(d: Any, n: int, where: str) -> ConvexSet:
    if not isinstance(d, dict) or "type" not in d:
        raise ProblemError(f"{where}: set specification must be an object with a 'type'")
    kind = d["type"]
    try:
        if kind == "halfspace":
            s = Halfspace(d["normal"], d["offset"])
        elif kind == "box":
            s = Box(_bounds(d["lower"], -np.inf, "lower"), _bounds(d["upper"], np.inf, "upper"))
        elif kind == "ball":
            s = Ball(d["center"], d["radius"])
        elif kind == "paired_halfspaces":
            first = _set_from_dict(d["first"], n, where + ".first")
            second = _set_from_dict(d["second"], n, where + ".second")
            s = PairedHalfspaces(first, second)
        else:
            raise ProblemError(f"{where}: unknown set type {kind!r}")
    except KeyError as exc:
        raise ProblemError(f"{where}: missing field {exc.args[0]!r}") from None
    except ProblemError as exc:
        raise ProblemError(f"{where}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ProblemError(f"{where}: {exc}") from None
    if s.dim != n:
        raise ProblemError(f"{where}: dimension {s.dim} does not match problem dimension {n}")
    return s


def problem_to_dict(problem: ProblemInstance) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "dimension": problem.dimension,
        "A": [_set_to_dict(s) for s in problem.a_sets],
        "B": [_set_to_dict(s) for s in problem.b_sets],
    }
    if problem.known_solution is not None:
        doc["known_solution"] = {
            "x": problem.known_solution.x.tolist(),
            "y": problem.known_solution.y.tolist(),
        }
    return doc


def dump_problem(problem: ProblemInstance) -> str:
    """Serialize to the JSON problem-file format."""
    return json.dumps(problem_to_dict(problem), indent=2)


def load_problem(document: str | bytes | dict) -> ProblemInstance:
    """Parse and validate a problem document.

    The shorter of the ``A``/``B`` lists is padded with whole-space boxes
    so that both sides share one index set.
    """
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ProblemError(f"invalid JSON: {exc}") from None
    else:
        doc = document
    if not isinstance(doc, dict):
        raise ProblemError("problem document must be a JSON object")
    for key in ("dimension", "A", "B"):
        if key not in doc:
            raise ProblemError(f"missing field {key!r}")
    n = doc["dimension"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ProblemError("dimension must be a positive integer")
    if not isinstance(doc["A"], list) or not isinstance(doc["B"], list):
        raise ProblemError("'A' and 'B' must be lists")
    a_sets = [_set_from_dict(d, n, f"A[{i}]") for i, d in enumerate(doc["A"])]
    b_sets = [_set_from_dict(d, n, f"B[{i}]") for i, d in enumerate(doc["B"])]
    m = max(len(a_sets), len(b_sets))
    if m == 0:
        raise ProblemError("'A' and 'B' are both empty")
    a_sets += [whole_space(n) for _ in range(m - len(a_sets))]
    b_sets += [whole_space(n) for _ in range(m - len(b_sets))]
    sol = None
    if doc.get("known_solution") is not None:
        ks = doc["known_solution"]
        try:
            sol = Pair(ks["x"], ks["y"])
        except (KeyError, TypeError):
            raise ProblemError("known_solution must be an object with 'x' and 'y'") from None
    return ProblemInstance(
        dimension=n,
        constraints=tuple(ProductConstraint(a, b) for a, b in zip(a_sets, b_sets)),
        known_solution=sol,
        name=str(doc.get("name", "")),
    )


def load_problem_file(path) -> ProblemInstance:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ProblemError(f"cannot read {path}: {exc.strerror}") from None
    return load_problem(text)


# ---------------------------------------------------------------------------
# built-in problems

_TOY_A = [((4.0, 3.0), 17.0), ((1.0, 0.0), -4.0), ((1.0, 1.0), -11.0), ((0.0, 1.0), -5.0)]
_TOY_B = [((5.0, -4.0), 30.0), ((1.0, -2.0), 0.0), ((-1.0, -4.0), -24.0), ((-2.0, -1.0), -13.0)]


def builtin_toy() -> ProblemInstance:
    """Two polygons in the plane, four linear inequalities each.

    The unique best approximation pair is ``((-6, -5), (4, 5))``.
    """
    cons = tuple(
        ProductConstraint(Halfspace(a, alpha), Halfspace(b, beta))
        for (a, alpha), (b, beta) in zip(_TOY_A, _TOY_B)
    )
    return ProblemInstance(2, cons, Pair((-6.0, -5.0), (4.0, 5.0)), name="toy")


def builtin_boxes(n: int) -> ProblemInstance:
    """Orthants ``{x >= 5}`` and ``{x <= -5}`` in R^n, one inequality per coordinate."""
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise ProblemError("boxes problem needs n >= 1")
    n = int(n)
    cons = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        cons.append(ProductConstraint(Halfspace(-e, -5.0), Halfspace(e, -5.0)))
    return ProblemInstance(n, tuple(cons), Pair(np.full(n, 5.0), np.full(n, -5.0)), name="boxes")


def pair_constraints(problem: ProblemInstance, pairs: Sequence[tuple[int, int]]) -> ProblemInstance:
    """Merge constraints ``i`` and ``j`` into one paired constraint for each ``(i, j)``.

    Both sides of the merged constraints must be halfspaces.  Indices are
    0-based; each index may appear in at most one pair.  Unpaired
    constraints keep their original order after the paired ones.
    """
    used: set[int] = set()
    m = problem.m
    for i, j in pairs:
        for k in (i, j):
            if not 0 <= k < m:
                raise ProblemError(f"pair index {k} out of range for m={m}")
            if k in used:
                raise ProblemError(f"constraint {k} appears in more than one pair")
            used.add(k)
        if i == j:
            raise ProblemError("a constraint cannot be paired with itself")
    merged = []
    for i, j in pairs:
        ci, cj = problem.constraints[i], problem.constraints[j]
        sides = []
        for si, sj in ((ci.a_side, cj.a_side), (ci.b_side, cj.b_side)):
            if not (isinstance(si, Halfspace) and isinstance(sj, Halfspace)):
                raise ProblemError(f"pairing {i}:{j} needs halfspaces on both sides")
            sides.append(PairedHalfspaces(si, sj))
        merged.append(ProductConstraint(*sides))
    rest = [c for k, c in enumerate(problem.constraints) if k not in used]
    return ProblemInstance(
        problem.dimension, tuple(merged + rest), problem.known_solution, name=problem.name
    )
