"""Exact rational linear programming and small convex-geometry helpers.

Everything here works on :class:`fractions.Fraction` values. The simplex
method is a dense two-phase tableau implementation with Bland's rule, which
is plenty for the desk-scale programs built by the solvers in this package
(at most a few hundred variables).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

__all__ = [
    "LinearProgram",
    "LpSolution",
    "convex_hull_2d",
    "in_hull",
    "solve_lp",
    "solve_transportation",
    "to_fraction",
]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


def to_fraction(x) -> Fraction:
    """Exact conversion of ints, Fractions, floats and ``"p/q"`` strings."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(x, (int, float, str)):
        return Fraction(x)
    raise TypeError(f"cannot convert {x!r} to a rational")


def _vec(xs) -> tuple[Fraction, ...]:
    return tuple(to_fraction(x) for x in xs)


def _mat(rows) -> tuple[tuple[Fraction, ...], ...]:
    return tuple(_vec(r) for r in rows)


@dataclass(frozen=True)
class LinearProgram:
    """maximize ``c @ x`` s.t. ``A_eq x = b_eq``, ``A_ub x <= b_ub``, ``x >= 0``."""

    c: tuple[Fraction, ...]
    A_eq: tuple[tuple[Fraction, ...], ...] = ()
    b_eq: tuple[Fraction, ...] = ()
    A_ub: tuple[tuple[Fraction, ...], ...] = ()
    b_ub: tuple[Fraction, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "c", _vec(self.c))
        for name in ("A_eq", "A_ub"):
            object.__setattr__(self, name, _mat(getattr(self, name)))
        for name in ("b_eq", "b_ub"):
            object.__setattr__(self, name, _vec(getattr(self, name)))
        n = len(self.c)
        if len(self.A_eq) != len(self.b_eq) or len(self.A_ub) != len(self.b_ub):
            raise ValueError("constraint matrix and rhs lengths differ")
        for row in self.A_eq + self.A_ub:
            if len(row) != n:
                raise ValueError(f"constraint row has {len(row)} entries, expected {n}")

    @property
    def n_vars(self) -> int:
        return len(self.c)

    def residuals(self, x: Sequence[Fraction]):
        """Return ``(eq_residuals, ub_slacks)``; feasibility means all zero / all >= 0."""
        eq = [sum((a * v for a, v in zip(row, x)), Fraction(0)) - b
              for row, b in zip(self.A_eq, self.b_eq)]
        ub = [b - sum((a * v for a, v in zip(row, x)), Fraction(0))
              for row, b in zip(self.A_ub, self.b_ub)]
        return eq, ub

    def is_feasible(self, x: Sequence[Fraction]) -> bool:
        eq, ub = self.residuals(x)
        return (all(v >= 0 for v in x) and all(r == 0 for r in eq)
                and all(s >= 0 for s in ub))


@dataclass(frozen=True)
class LpSolution:
    status: str
    value: Fraction | None = None
    point: tuple[Fraction, ...] | None = None
    is_vertex: bool = False

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class _Tableau:
    # rows[i] = coefficients (ncols) followed by rhs
    rows: list[list[Fraction]]
    basis: list[int]
    ncols: int
    obj: list[Fraction] = field(default_factory=list)  # reduced costs + (-value)

    def pivot(self, r: int, col: int) -> None:
        prow = self.rows[r]
        piv = prow[col]
        if piv != 1:
            prow = [v / piv for v in prow]
            self.rows[r] = prow
        for i, row in enumerate(self.rows):
            if i != r and row[col] != 0:
                f = row[col]
                self.rows[i] = [a - f * b for a, b in zip(row, prow)]
        if self.obj[col] != 0:
            f = self.obj[col]
            self.obj = [a - f * b for a, b in zip(self.obj, prow)]
        self.basis[r] = col

    def set_objective(self, c: Sequence[Fraction]) -> None:
        # obj row holds c_j - z_j (we maximise); last entry is -(current value)
        obj = list(c) + [Fraction(0)]
        for r, j in enumerate(self.basis):
            if obj[j] != 0:
                f = obj[j]
                obj = [a - f * b for a, b in zip(obj, self.rows[r])]
        self.obj = obj

    def run(self, allowed: int) -> str:
        """Primal simplex with Bland's rule over columns ``< allowed``."""
        while True:
            col = next((j for j in range(allowed) if self.obj[j] > 0), None)
            if col is None:
                return OPTIMAL
            best = None
            for i, row in enumerate(self.rows):
                a = row[col]
                if a > 0:
                    ratio = row[-1] / a
                    key = (ratio, self.basis[i])
                    if best is None or key < best[0]:
                        best = (key, i)
            if best is None:
                return UNBOUNDED
            self.pivot(best[1], col)


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Solve ``lp`` exactly; the returned point is a basic feasible solution.

    Infeasibility and unboundedness are reported through ``status``.
    """
    n = lp.n_vars
    n_ub = len(lp.A_ub)
    rows: list[list[Fraction]] = []
    zero = Fraction(0)
    for k, (a, b) in enumerate(zip(lp.A_ub, lp.b_ub)):
        slack = [zero] * n_ub
        slack[k] = Fraction(1)
        rows.append(list(a) + slack + [b])
    for a, b in zip(lp.A_eq, lp.b_eq):
        rows.append(list(a) + [zero] * n_ub + [b])
    m = len(rows)
    ncols = n + n_ub
    for row in rows:
        if row[-1] < 0:
            row[:] = [-v for v in row]
    # artificial columns, one per row
    for i, row in enumerate(rows):
        art = [zero] * m
        art[i] = Fraction(1)
        row[ncols:ncols] = art
    total = ncols + m
    tab = _Tableau(rows=rows, basis=[ncols + i for i in range(m)], ncols=total)

    if m:
        tab.set_objective([zero] * ncols + [Fraction(-1)] * m)
        tab.run(total)
        if tab.obj[-1] != 0:
            return LpSolution(INFEASIBLE)
        # drive artificials out of the basis; drop redundant rows
        r = 0
        while r < len(tab.rows):
            if tab.basis[r] >= ncols:
                col = next((j for j in range(ncols) if tab.rows[r][j] != 0), None)
                if col is None:
                    del tab.rows[r]
                    del tab.basis[r]
                    continue
                tab.pivot(r, col)
            r += 1
    tab.rows = [row[:ncols] + [row[-1]] for row in tab.rows]
    tab.ncols = ncols
    tab.set_objective(list(lp.c) + [zero] * n_ub)
    status = tab.run(ncols)
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED)
    x = [zero] * ncols
    for r, j in enumerate(tab.basis):
        x[j] = tab.rows[r][-1]
    point = tuple(x[:n])
    value = sum((c * v for c, v in zip(lp.c, point)), zero)
    return LpSolution(OPTIMAL, value, point, True)


def solve_transportation(cost, row_sums, col_sums) -> LpSolution:
    """Maximise ``sum w[i][j] * cost[i][j]`` over couplings with the given marginals.

    The point is returned flattened row-major. Raises ``ValueError`` when the
    marginals are negative or have different totals.
    """
    cost = _mat(cost)
    rs, cs = _vec(row_sums), _vec(col_sums)
    if any(v < 0 for v in rs + cs):
        raise ValueError("marginals must be nonnegative")
    if sum(rs) != sum(cs):
        raise ValueError(f"marginal totals differ: {sum(rs)} != {sum(cs)}")
    nr, nc = len(rs), len(cs)
    if len(cost) != nr or any(len(row) != nc for row in cost):
        raise ValueError("cost matrix shape does not match marginals")
    c = [cost[i][j] for i in range(nr) for j in range(nc)]
    A_eq, b_eq = [], []
    for i in range(nr):
        A_eq.append([1 if k // nc == i else 0 for k in range(nr * nc)])
        b_eq.append(rs[i])
    for j in range(nc):
        A_eq.append([1 if k % nc == j else 0 for k in range(nr * nc)])
        b_eq.append(cs[j])
    return solve_lp(LinearProgram(c, A_eq, b_eq))


def _cross(o, a, b) -> Fraction:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull_2d(points) -> list[tuple[Fraction, Fraction]]:
    """Counter-clockwise hull vertices (monotone chain), collinear points dropped.

    The first vertex is the lexicographically smallest point.
    """
    pts = sorted({(to_fraction(x), to_fraction(y)) for x, y in points})
    if not pts:
        raise ValueError("convex_hull_2d needs at least one point")
    if len(pts) <= 2:
        return pts

    def half(seq):
        out: list = []
        for p in seq:
            while len(out) >= 2 and _cross(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(reversed(pts))
    hull = lower[:-1] + upper[:-1]
    return hull


def in_hull(point, points) -> bool:
    """Exact membership of ``point`` in the convex hull of ``points`` (any dimension)."""
    pts = [_vec(p) for p in points]
    if not pts:
        raise ValueError("in_hull needs a nonempty point set")
    target = _vec(point)
    dim = len(target)
    if any(len(p) != dim for p in pts):
        raise ValueError("dimension mismatch")
    A_eq = [[p[d] for p in pts] for d in range(dim)]
    A_eq.append([1] * len(pts))
    b_eq = list(target) + [1]
    return solve_lp(LinearProgram([0] * len(pts), A_eq, b_eq)).optimal
