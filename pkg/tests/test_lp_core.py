from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import lp_vertex_max
from persuasion_lab.lp_core import (
    LinearProgram,
    convex_hull_2d,
    in_hull,
    solve_lp,
    solve_transportation,
    to_fraction,
)


def test_to_fraction_accepts_exact_forms():
    assert to_fraction("1/3") == F(1, 3)
    assert to_fraction(2) == 2
    assert to_fraction(0.5) == F(1, 2)
    with pytest.raises(TypeError):
        to_fraction(True)


def test_single_box_constraint():
    sol = solve_lp(LinearProgram([1], A_ub=[[1]], b_ub=[1]))
    assert sol.optimal and sol.value == 1 and sol.point == (1,)


def test_objective_equal_to_constraint():
    sol = solve_lp(LinearProgram([1, 1], A_eq=[[1, 1]], b_eq=[1]))
    assert sol.value == 1


def test_two_constraint_polygon():
    # vertices (0,0),(4,0),(0,3),(2,2) give 0, 8, 9, 10
    sol = solve_lp(LinearProgram([2, 3], A_ub=[[1, 1], [1, 2]], b_ub=[4, 6]))
    assert sol.point == (2, 2)
    assert sol.value == 10 == lp_vertex_max([2, 3], [[1, 1], [1, 2]], [4, 6])


def test_infeasible_and_unbounded():
    assert solve_lp(LinearProgram([1], A_eq=[[1]], b_eq=[-1])).status == "infeasible"
    assert solve_lp(LinearProgram([1, 0], A_ub=[[-1, 1]], b_ub=[1])).status == "unbounded"


def test_redundant_equalities():
    lp = LinearProgram([1, 2], A_eq=[[1, 1], [2, 2]], b_eq=[1, 2])
    sol = solve_lp(lp)
    assert sol.value == 2 and lp.is_feasible(sol.point)


def test_transportation_examples():
    assert solve_transportation([[7]], [1], [1]).value == 7
    half = [F(1, 2), F(1, 2)]
    diag = solve_transportation([[1, 0], [0, 1]], half, half)
    # mass 1/2 on each diagonal cell
    assert diag.point == (F(1, 2), 0, 0, F(1, 2)) and diag.value == 1
    # sender LP: a1 after m1, a2 after m2, state-independent payoffs
    assert solve_transportation([[1, 2], [1, 2]], half, half).value == F(3, 2)


def test_transportation_rejects_bad_marginals():
    with pytest.raises(ValueError):
        solve_transportation([[1]], [1], [F(1, 2)])
    with pytest.raises(ValueError):
        solve_transportation([[1, 1]], [1], [2, -1])


def test_hull_examples():
    assert convex_hull_2d([(0, 0)]) == [(0, 0)]
    assert convex_hull_2d([(0, 0), (1, 0), (F(1, 2), 0)]) == [(0, 0), (1, 0)]
    tri = convex_hull_2d([(0, 0), (1, 0), (0, 1), (F(1, 4), F(1, 4))])
    assert set(tri) == {(0, 0), (1, 0), (0, 1)}


def test_in_hull_examples():
    assert in_hull((F(1, 2), F(1, 2)), [(0, 0), (1, 1)])
    assert not in_hull((2, 0), [(0, 0), (1, 0)])
    assert in_hull((F(1, 3), F(1, 3)), [(0, 0), (1, 0), (0, 1)])


small = st.fractions(min_value=-3, max_value=3, max_denominator=4)
nonneg = st.fractions(min_value=0, max_value=4, max_denominator=4)


@st.composite
def bounded_lps(draw):
    n = draw(st.integers(1, 3))
    m = draw(st.integers(1, 3))
    c = [draw(small) for _ in range(n)]
    A = [[draw(small) for _ in range(n)] for _ in range(m)]
    b = [draw(nonneg) for _ in range(m)]
    # a box keeps every instance bounded; b >= 0 keeps the origin feasible
    A += [[1 if j == i else 0 for j in range(n)] for i in range(n)]
    b += [F(5)] * n
    return c, A, b


@settings(max_examples=60, deadline=None)
@given(bounded_lps())
def test_matches_vertex_enumeration(inst):
    c, A, b = inst
    lp = LinearProgram(c, A_ub=A, b_ub=b)
    sol = solve_lp(lp)
    assert sol.optimal
    assert sol.value == lp_vertex_max(c, A, b)
    eq_res, slack = lp.residuals(sol.point)
    assert all(r == 0 for r in eq_res) and all(r >= 0 for r in slack)
    assert lp.is_feasible(sol.point)


@settings(max_examples=60, deadline=None)
@given(bounded_lps())
def test_strong_duality(inst):
    c, A, b = inst
    primal = solve_lp(LinearProgram(c, A_ub=A, b_ub=b))
    # min b.y s.t. A^T y >= c, y >= 0, written as a maximisation
    At = [[-A[i][j] for i in range(len(A))] for j in range(len(c))]
    dual = solve_lp(LinearProgram([-v for v in b], A_ub=At, b_ub=[-v for v in c]))
    assert dual.optimal
    assert primal.value == -dual.value


@settings(max_examples=40, deadline=None)
@given(st.lists(nonneg, min_size=2, max_size=3), st.lists(nonneg, min_size=2, max_size=3),
       st.data())
def test_transportation_marginals_exact(rows, cols, data):
    if sum(rows) == 0 or sum(cols) == 0:
        return
    cols = [v * sum(rows) / sum(cols) for v in cols]
    cost = [[data.draw(small) for _ in cols] for _ in rows]
    sol = solve_transportation(cost, rows, cols)
    w = sol.point
    nc = len(cols)
    assert [sum(w[i * nc:(i + 1) * nc]) for i in range(len(rows))] == rows
    assert [sum(w[i * nc + j] for i in range(len(rows))) for j in range(nc)] == cols


def _left_of_or_on(o, a, p):
    return (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0]) >= 0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(small, small), min_size=1, max_size=9))
def test_hull_idempotent_and_encloses(points):
    hull = convex_hull_2d(points)
    assert convex_hull_2d(hull) == hull
    assert set(hull) <= {(F(x), F(y)) for x, y in points}
    if len(hull) >= 3:
        for p in points:
            assert all(_left_of_or_on(hull[i], hull[(i + 1) % len(hull)], p)
                       for i in range(len(hull)))
    for p in points:
        assert in_hull(p, hull)
