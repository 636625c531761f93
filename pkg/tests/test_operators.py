import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bestapprox import (
    Ball,
    Box,
    Halfspace,
    Pair,
    PairedHalfspaces,
    ProductConstraint,
    argmax_dual,
    builtin_toy,
    distance,
    project,
    project_product,
    prox_norm_diff,
    prox_sqnorm_diff,
    sign_vec,
    subgrad_distance,
    subgrad_norm_diff,
)
from bestapprox.operators import SetStack, contains, unit_cost
from bestapprox.problem import whole_space

from oracles import (
    ProjectionOracle,
    ProxNormOracle,
    argmax_gradient,
    dykstra_two_halfspaces,
    prox_sq_oracle,
)


def P(x, y):
    return Pair(np.asarray(x, float), np.asarray(y, float))


def close(p, q, tol=1e-12):
    return np.allclose(p.x, q.x, atol=tol, rtol=0) and np.allclose(p.y, q.y, atol=tol, rtol=0)


# ---------------------------------------------------------------------------
# worked examples


def test_halfspace_projection_example():
    h = Halfspace((1.0, 0.0), -4.0)
    assert np.array_equal(project(h, (8.0, -13.0)), [-4.0, -13.0])
    assert distance(h, (8.0, -13.0)) == 12.0
    # same answer from the conic oracle
    assert np.allclose(ProjectionOracle(2)(h, np.array([8.0, -13.0])), [-4.0, -13.0], atol=1e-7)


def test_paired_projection_example():
    ph = PairedHalfspaces(Halfspace((1.0, 0.0), 0.0), Halfspace((0.0, 1.0), 0.0))
    got = project(ph, (1.0, 1.0))
    assert np.allclose(got, [0.0, 0.0], atol=1e-15)
    assert np.allclose(dykstra_two_halfspaces(ph.first, ph.second, np.array([1.0, 1.0])), got, atol=1e-10)


def test_ball_distance_example():
    assert distance(Ball((0.0, 0.0, 0.0), 1.0), (0.0, 3.0, 0.0)) == pytest.approx(2.0)


def test_product_projection_examples():
    toy = builtin_toy()
    sol = toy.known_solution
    assert project_product(toy.constraints[0], sol) == sol
    n = 2
    whole = ProductConstraint(whole_space(n), whole_space(n))
    z = P((1e9, -3.0), (2.0, np.pi))
    assert project_product(whole, z) == z
    got = project_product(toy.constraints[1], P((8.0, -13.0), (8.0, -13.0)))
    assert np.array_equal(got.x, [-4.0, -13.0])
    # (8,-13) violates x1 - 2 x2 <= 0 by 34; ||(1,-2)||^2 = 5
    assert np.allclose(got.y, [8.0 - 34.0 / 5.0, -13.0 + 68.0 / 5.0], atol=1e-14)
    oracle = ProjectionOracle(2)(toy.b_sets[1], np.array([8.0, -13.0]))
    assert np.allclose(got.y, oracle, atol=1e-7)


def test_members_are_fixed():
    sets = [
        Halfspace((1.0, 2.0), 3.0),
        Box((-1.0, -np.inf), (1.0, 2.0)),
        Ball((0.0, 0.0), 2.0),
        PairedHalfspaces(Halfspace((1.0, 0.0), 1.0), Halfspace((0.0, 1.0), 1.0)),
    ]
    w = np.array([0.25, -0.5])
    for s in sets:
        assert np.array_equal(project(s, w), w)
        assert distance(s, w) == 0.0 and contains(s, w)


def test_prox_norm_diff_examples():
    x = P((1.0, 0.0), (0.0, 0.0))
    assert close(prox_norm_diff(5.0, x), P((0.5, 0.0), (0.5, 0.0)))
    assert close(prox_norm_diff(0.1, x), P((0.9, 0.0), (0.1, 0.0)))
    same = P((2.0, -1.0), (2.0, -1.0))
    assert prox_norm_diff(5.0, same) == same
    oracle = ProxNormOracle(2)
    for alpha, want in ((5.0, ((0.5, 0), (0.5, 0))), (0.1, ((0.9, 0), (0.1, 0)))):
        u, v = oracle(alpha, [1.0, 0.0], [0.0, 0.0])
        assert np.allclose(u, want[0], atol=1e-7) and np.allclose(v, want[1], atol=1e-7)


def test_prox_sqnorm_diff_examples():
    assert close(prox_sqnorm_diff(1.0, P((3.0, 0.0), (0.0, 0.0))), P((2.0, 0.0), (1.0, 0.0)), 1e-15)
    u, v = prox_sq_oracle(1.0, np.array([3.0, 0.0]), np.zeros(2))
    assert np.allclose(u, [2, 0]) and np.allclose(v, [1, 0])
    z = P((1.0, 2.0), (1.0, 2.0))
    assert close(prox_sqnorm_diff(2.5, z), z, 1e-15)
    z = P((4.0, -1.0), (0.5, 7.0))
    assert close(prox_sqnorm_diff(1e-9, z), z, 1e-8)


def test_argmax_dual_examples():
    u = np.array([1.0, -2.0, 0.5])
    for alpha, eps in ((1.0, 0.25), (5.0, 0.1)):
        got = argmax_dual(alpha, eps, Pair(u, u))
        assert close(got, Pair(u / eps, u / eps), 1e-12)
    got = argmax_dual(1.0, 1.0, Pair(u, -u))
    assert close(got, Pair(u / 3, -u / 3), 1e-15)
    assert np.allclose(argmax_gradient(1.0, 1.0, u, -u, got.x, got.y), 0.0, atol=1e-14)
    with pytest.raises(ValueError):
        argmax_dual(1.0, 0.0, Pair(u, u))


def test_sign_and_subgradient_examples():
    assert np.array_equal(sign_vec([0.0, 0.0]), [0.0, 0.0])
    assert np.allclose(sign_vec([3.0, 4.0]), [0.6, 0.8])
    z = P((1.0, 2.0), (1.0, 2.0))
    assert subgrad_norm_diff(3.0, z) == Pair.zeros(2)
    assert close(subgrad_norm_diff(1.0, P((1.0, 0.0), (0.0, 0.0))), P((1.0, 0.0), (-1.0, 0.0)))
    toy = builtin_toy()
    assert subgrad_distance(2.0, toy.constraints[0], toy.known_solution) == Pair.zeros(2)


def test_unit_costs():
    h = Halfspace((1.0,), 0.0)
    assert unit_cost(h) == 1
    assert unit_cost(Box((0.0,), (1.0,))) == 1
    assert unit_cost(PairedHalfspaces(h, Halfspace((2.0,), 1.0))) == 2


def test_parallel_paired_cases():
    # nested: x <= 1 and 2x <= 4 -> tighter one wins
    nested = PairedHalfspaces(Halfspace((1.0, 0.0), 1.0), Halfspace((2.0, 0.0), 4.0))
    assert np.allclose(project(nested, (5.0, 3.0)), [1.0, 3.0])
    # slab -1 <= x <= 1
    slab = PairedHalfspaces(Halfspace((1.0, 0.0), 1.0), Halfspace((-3.0, 0.0), 3.0))
    assert np.allclose(project(slab, (5.0, 3.0)), [1.0, 3.0])
    assert np.allclose(project(slab, (-5.0, 3.0)), [-1.0, 3.0])
    assert np.allclose(project(slab, (0.5, 3.0)), [0.5, 3.0])


def test_setstack_matches_single_projections(rng):
    sets = [Halfspace(rng.normal(size=4), rng.normal()) for _ in range(6)]
    st_h = SetStack(sets)
    W = rng.normal(size=(6, 4)) * 3
    rows = st_h.project_rows(W)
    for i, s in enumerate(sets):
        assert np.allclose(rows[i], project(s, W[i]), atol=1e-14)
        assert np.allclose(st_h.project_one(i, W[i]), project(s, W[i]), atol=1e-14)
    w = W[0]
    pts = st_h.project_point(w)
    assert np.allclose(st_h.distances(w), [distance(s, w) for s in sets])
    assert pts.shape == (6, 4)
    mixed = SetStack([sets[0], Ball(np.zeros(4), 1.0)])
    assert not mixed.halfspaces
    assert np.allclose(mixed.project_point(w)[1], project(Ball(np.zeros(4), 1.0), w))


# ---------------------------------------------------------------------------
# properties


coord = st.floats(-100, 100, allow_nan=False, allow_infinity=False)


def vectors(n):
    return st.lists(coord, min_size=n, max_size=n).map(np.array)


@st.composite
def set_and_points(draw):
    n = draw(st.sampled_from([1, 2, 3, 5]))
    kind = draw(st.sampled_from(["half", "box", "ball", "paired"]))
    if kind in ("half", "paired"):
        a = draw(vectors(n))
        if np.linalg.norm(a) < 1e-2:
            a[0] = 1.0
        s = Halfspace(a, draw(coord))
        if kind == "paired":
            b = draw(vectors(n))
            if np.linalg.norm(b) < 1e-2:
                b[-1] = 1.0
            # offsets chosen so the origin is feasible, keeping the pair nonempty
            s = PairedHalfspaces(Halfspace(a, abs(draw(coord))), Halfspace(b, abs(draw(coord))))
    elif kind == "box":
        lo = draw(vectors(n))
        s = Box(lo, lo + np.abs(draw(vectors(n))))
    else:
        s = Ball(draw(vectors(n)), draw(st.floats(0.01, 50)))
    return s, draw(vectors(n)), draw(vectors(n))


@settings(max_examples=300, deadline=None)
@given(set_and_points())
def test_projection_idempotent_and_firmly_nonexpansive(case):
    s, u, v = case
    pu, pv = project(s, u), project(s, v)
    scale = 1.0 + np.linalg.norm(u) + np.linalg.norm(v)
    assert np.allclose(project(s, pu), pu, atol=1e-10 * scale, rtol=0)
    # ||Pu - Pv||^2 <= <Pu - Pv, u - v>
    d = pu - pv
    assert d @ d <= d @ (u - v) + 1e-10 * scale**2
    assert distance(s, pu) <= 1e-9 * scale


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([1, 3]).flatmap(lambda n: st.tuples(vectors(n), vectors(n))),
       st.floats(1e-3, 50))
def test_prox_preserves_sum(xy, alpha):
    x, y = xy
    z = Pair(x, y)
    scale = 1.0 + np.abs(x).max() + np.abs(y).max()
    for out in (prox_norm_diff(alpha, z), prox_sqnorm_diff(alpha, z)):
        assert np.allclose(out.x + out.y, x + y, atol=1e-10 * scale, rtol=0)


@settings(max_examples=100, deadline=None)
@given(st.tuples(vectors(3), vectors(3), vectors(3), vectors(3)), st.floats(1e-2, 20))
def test_prox_maps_firmly_nonexpansive(vals, alpha):
    x1, y1, x2, y2 = vals
    z1, z2 = np.concatenate([x1, y1]), np.concatenate([x2, y2])
    scale = 1.0 + np.abs(z1).max() + np.abs(z2).max()
    for op in (prox_norm_diff, prox_sqnorm_diff):
        p1 = op(alpha, Pair(x1, y1)).stack().ravel()
        p2 = op(alpha, Pair(x2, y2)).stack().ravel()
        d = p1 - p2
        assert d @ d <= d @ (z1 - z2) + 1e-10 * scale**2


def test_subgradient_inequalities(rng):
    toy = builtin_toy()
    L, alpha = 3.0, 2.0
    for _ in range(1000):
        z = Pair(rng.normal(size=2) * 10, rng.normal(size=2) * 10)
        w = Pair(rng.normal(size=2) * 10, rng.normal(size=2) * 10)
        g = subgrad_norm_diff(alpha, z)
        f = lambda p: alpha * np.linalg.norm(p.x - p.y)
        assert f(w) >= f(z) + (g.stack() * (w - z).stack()).sum() - 1e-10
        c = toy.constraints[int(rng.integers(4))]
        h = lambda p: L * math.hypot(distance(c.a_side, p.x), distance(c.b_side, p.y))
        gd = subgrad_distance(L, c, z)
        assert h(w) >= h(z) + (gd.stack() * (w - z).stack()).sum() - 1e-9


def test_sqnorm_gradient_lipschitz(rng):
    # grad of alpha/2 ||x - y||^2 is alpha (x - y, y - x); its sharp constant is 2 alpha
    for alpha in (0.1, 1.0, 5.0):
        for _ in range(200):
            z1, z2 = rng.normal(size=(2, 2, 4))
            g1 = alpha * np.stack([z1[0] - z1[1], z1[1] - z1[0]])
            g2 = alpha * np.stack([z2[0] - z2[1], z2[1] - z2[0]])
            ratio = np.linalg.norm(g1 - g2) / np.linalg.norm(z1 - z2)
            assert ratio <= 2 * alpha * (1 + 1e-12) <= 1 + 2 * alpha
