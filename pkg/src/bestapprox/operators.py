r"""
Closed-form projections, proximal maps and subgradient selections.

Pair-valued operators act on ``Pair`` objects; the solvers use the
``*_arr`` variants, which take and return ``(2, n)`` arrays (row 0 is
``x``, row 1 is ``y``) and skip validation.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .problem import (
    Ball,
    Box,
    ConvexSet,
    Halfspace,
    Pair,
    PairedHalfspaces,
    ProblemError,
    ProductConstraint,
)

__all__ = [
    "MEMBERSHIP_TOL",
    "project",
    "project_product",
    "distance",
    "contains",
    "unit_cost",
    "sign_vec",
    "prox_norm_diff",
    "prox_sqnorm_diff",
    "argmax_dual",
    "subgrad_norm_diff",
    "subgrad_distance",
    "SetStack",
]

MEMBERSHIP_TOL = 1e-12


def _check_dim(s: ConvexSet, w: np.ndarray) -> None:
    if w.ndim != 1 or w.size != s.dim:
        raise ProblemError(f"dimension mismatch: set has {s.dim}, point has shape {w.shape}")


def _halfspace_tol(h: Halfspace, w: np.ndarray) -> float:
    return MEMBERSHIP_TOL * math.sqrt(h.norm_sq) * max(1.0, float(np.linalg.norm(w)))


def _in_halfspace(h: Halfspace, w: np.ndarray) -> bool:
    return float(h.normal @ w) - h.offset <= _halfspace_tol(h, w)


def _project_halfspace(h: Halfspace, w: np.ndarray) -> np.ndarray:
    excess = float(h.normal @ w) - h.offset
    if excess <= 0.0:
        return w.copy()
    return w - (excess / h.norm_sq) * h.normal


def _project_box(b: Box, w: np.ndarray) -> np.ndarray:
    return np.clip(w, b.lower, b.upper)


def _project_ball(b: Ball, w: np.ndarray) -> np.ndarray:
    d = w - b.center
    r = float(np.linalg.norm(d))
    if r <= b.radius:
        return w.copy()
    return b.center + (b.radius / r) * d


def _project_paired(p: PairedHalfspaces, w: np.ndarray) -> np.ndarray:
    h1, h2 = p.first, p.second
    c = p.parallel
    if c is not None:
        # parallel normals: the projector onto the tighter side (nested)
        # or onto the slab (opposed) is one of the single projections
        if c > 0:
            tighter = h1 if h1.offset / math.sqrt(h1.norm_sq) <= h2.offset / math.sqrt(h2.norm_sq) else h2
            return _project_halfspace(tighter, w)
        if not _in_halfspace(h1, w):
            return _project_halfspace(h1, w)
        return _project_halfspace(h2, w)
    in1, in2 = _in_halfspace(h1, w), _in_halfspace(h2, w)
    if in1 and in2:
        return w.copy()
    p1 = _project_halfspace(h1, w)
    if _in_halfspace(h2, p1):
        return p1
    p2 = _project_halfspace(h2, w)
    if _in_halfspace(h1, p2):
        return p2
    # both constraints active: project onto the intersection of the boundaries
    a1, a2 = h1.normal, h2.normal
    g12 = float(a1 @ a2)
    gram = np.array([[h1.norm_sq, g12], [g12, h2.norm_sq]])
    resid = np.array([float(a1 @ w) - h1.offset, float(a2 @ w) - h2.offset])
    mu = np.linalg.solve(gram, resid)
    return w - mu[0] * a1 - mu[1] * a2


_PROJECTORS = {
    Halfspace: _project_halfspace,
    Box: _project_box,
    Ball: _project_ball,
    PairedHalfspaces: _project_paired,
}


def project(s: ConvexSet, w) -> np.ndarray:
    """Euclidean projection of ``w`` onto ``s``."""
    w = np.asarray(w, dtype=float)
    _check_dim(s, w)
    try:
        fn = _PROJECTORS[type(s)]
    except KeyError:
        raise TypeError(f"no projector for {type(s).__name__}") from None
    return fn(s, w)


def project_product(c: ProductConstraint, z: Pair) -> Pair:
    """Projection onto ``A_i x B_i``, i.e. ``(P_A x, P_B y)``."""
    return Pair(project(c.a_side, z.x), project(c.b_side, z.y))


def distance(s: ConvexSet, w) -> float:
    """Distance from ``w`` to ``s``, computed through the projector."""
    w = np.asarray(w, dtype=float)
    return float(np.linalg.norm(w - project(s, w)))


def contains(s: ConvexSet, w, tol: float = 1e-9) -> bool:
    return distance(s, w) <= tol


def unit_cost(s: ConvexSet) -> int:
    """Operation units charged for one projection onto ``s``.

    A paired-halfspace projection counts as two ordinary projections.
    """
    return 2 if isinstance(s, PairedHalfspaces) else 1


# ---------------------------------------------------------------------------
# prox / subgradient / argmax


def sign_vec(w) -> np.ndarray:
    """``w / ||w||``, with the zero vector mapped to zero."""
    w = np.asarray(w, dtype=float)
    r = float(np.linalg.norm(w))
    if r == 0.0:
        return np.zeros_like(w)
    return w / r


def prox_norm_diff_arr(alpha: float, z: np.ndarray) -> np.ndarray:
    d = z[0] - z[1]
    r = math.sqrt(float(d @ d))
    step = 1.0 / max(2.0, r / alpha)
    return np.stack([z[0] - step * d, z[1] + step * d])


def prox_norm_diff(alpha: float, z: Pair) -> Pair:
    r"""Prox of ``(x, y) -> alpha * ||x - y||``.

    .. math::

        (x, y) - \frac{1}{\max\{2, \|x-y\|/\alpha\}} (x - y, y - x)

    Below ``||x - y|| <= 2 alpha`` the result is the midpoint pair; above
    it both points move a distance ``alpha`` toward each other.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return Pair.from_stack(prox_norm_diff_arr(alpha, z.stack()))


def prox_sqnorm_diff_arr(alpha: float, z: np.ndarray) -> np.ndarray:
    x, y = z[0], z[1]
    scale = 1.0 / (2.0 * alpha + 1.0)
    return np.stack([scale * ((1.0 + alpha) * x + alpha * y), scale * (alpha * x + (1.0 + alpha) * y)])


def prox_sqnorm_diff(alpha: float, z: Pair) -> Pair:
    """Prox of ``(x, y) -> alpha/2 * ||x - y||^2`` (a linear map)."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return Pair.from_stack(prox_sqnorm_diff_arr(alpha, z.stack()))


def argmax_dual_arr(alpha: float, epsilon: float, s: np.ndarray) -> np.ndarray:
    u, v = s[0], s[1]
    scale = 1.0 / ((2.0 * alpha + epsilon) * epsilon)
    ae = alpha + epsilon
    return np.stack([scale * (ae * u + alpha * v), scale * (ae * v + alpha * u)])


def argmax_dual(alpha: float, epsilon: float, s: Pair) -> Pair:
    """Maximizer of ``<s, w> - f0(w)`` over pairs ``w``, where

    ``f0(x, y) = alpha/2 ||x - y||^2 + epsilon/2 (||x||^2 + ||y||^2)``.

    Requires ``epsilon > 0``; for ``epsilon = 0`` the maximizer is not unique.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive (maximizer is not unique for epsilon = 0)")
    return Pair.from_stack(argmax_dual_arr(alpha, epsilon, s.stack()))


def subgrad_norm_diff_arr(alpha: float, z: np.ndarray) -> np.ndarray:
    d = z[0] - z[1]
    r = math.sqrt(float(d @ d))
    if r == 0.0:
        return np.zeros_like(z)
    g = (alpha / r) * d
    return np.stack([g, -g])


def subgrad_norm_diff(alpha: float, z: Pair) -> Pair:
    """Subgradient selection ``alpha * (sign(x - y), -sign(x - y))`` of ``alpha ||x - y||``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return Pair.from_stack(subgrad_norm_diff_arr(alpha, z.stack()))


def subgrad_distance(L: float, c: ProductConstraint, z: Pair) -> Pair:
    """Subgradient of ``L * d_C`` at ``z``: ``L`` times the unit vector from ``P_C z`` to ``z``."""
    if not L > 0:
        raise ValueError("L must be positive")
    p = project_product(c, z)
    d = z.stack() - p.stack()
    r = math.sqrt(float(np.sum(d * d)))
    if r == 0.0:
        return Pair.zeros(z.dim)
    return Pair.from_stack((L / r) * d)


# ---------------------------------------------------------------------------
# batched projections


class SetStack:
    """Projections onto a fixed list of sets ``S_0, ..., S_{m-1}``.

    ``project_rows(W)`` projects row ``i`` of ``W`` onto ``S_i``.  Lists made
    only of halfspaces (the common case) are handled with array
    operations; anything else falls back to a per-set loop.
    """

    def __init__(self, sets: Sequence[ConvexSet]):
        self.sets = tuple(sets)
        if not self.sets:
            raise ValueError("empty set list")
        self.m = len(self.sets)
        self.dim = self.sets[0].dim
        self.costs = [unit_cost(s) for s in self.sets]
        self.total_cost = sum(self.costs)
        self.halfspaces = all(type(s) is Halfspace for s in self.sets)
        if self.halfspaces:
            self.normals = np.array([s.normal for s in self.sets])
            self.offsets = np.array([s.offset for s in self.sets])
            self.norm_sq = np.array([s.norm_sq for s in self.sets])
            # plain lists index faster than arrays inside python loops
            self._rows = [np.ascontiguousarray(r) for r in self.normals]
            self._off = self.offsets.tolist()
            self._nsq = self.norm_sq.tolist()
        self._fns = [_PROJECTORS[type(s)] for s in self.sets]

    def project_one(self, i: int, w: np.ndarray) -> np.ndarray:
        if self.halfspaces:
            a = self._rows[i]
            excess = float(a @ w) - self._off[i]
            if excess <= 0.0:
                return w
            return w - (excess / self._nsq[i]) * a
        return self._fns[i](self.sets[i], w)

    def project_rows(self, W: np.ndarray) -> np.ndarray:
        if self.halfspaces:
            excess = np.einsum("ij,ij->i", self.normals, W) - self.offsets
            np.maximum(excess, 0.0, out=excess)
            return W - (excess / self.norm_sq)[:, None] * self.normals
        return np.stack([fn(s, w) for fn, s, w in zip(self._fns, self.sets, W)])

    def project_point(self, w: np.ndarray) -> np.ndarray:
        """Project one point onto every set; returns an ``(m, n)`` array."""
        if self.halfspaces:
            excess = self.normals @ w - self.offsets
            np.maximum(excess, 0.0, out=excess)
            return w[None, :] - (excess / self.norm_sq)[:, None] * self.normals
        return np.stack([fn(s, w) for fn, s in zip(self._fns, self.sets)])

    def distances(self, w: np.ndarray) -> np.ndarray:
        """Distances from ``w`` to every set."""
        return np.linalg.norm(w[None, :] - self.project_point(w), axis=1)
