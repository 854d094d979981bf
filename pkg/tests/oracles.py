"""Independent reference computations used to cross-check the library.

Nothing here imports persuasion_lab: each oracle recomputes its answer by
plain enumeration with Fractions.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

F = Fraction


def solve_linear(A, b):
    """Exact Gauss-Jordan; returns None for singular systems."""
    n = len(A)
    M = [list(map(F, row)) + [F(v)] for row, v in zip(A, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            return None
        M[col], M[piv] = M[piv], M[col]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col] / M[col][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return [M[i][n] / M[i][i] for i in range(n)]


def lp_vertex_max(c, A_ub, b_ub):
    """Max of ``c.x`` over ``A_ub x <= b_ub, x >= 0`` by enumerating vertices.

    Only valid for bounded, feasible problems; returns the best vertex value
    or None when no vertex is feasible.
    """
    n = len(c)
    rows = [(list(r), F(v)) for r, v in zip(A_ub, b_ub)]
    rows += [([-1 if j == i else 0 for j in range(n)], F(0)) for i in range(n)]
    best = None
    for combo in itertools.combinations(range(len(rows)), n):
        x = solve_linear([rows[i][0] for i in combo], [rows[i][1] for i in combo])
        if x is None:
            continue
        if all(sum(F(a) * xi for a, xi in zip(r, x)) <= v for r, v in rows):
            val = sum(F(ci) * xi for ci, xi in zip(c, x))
            best = val if best is None or val > best else best
    return best


# --------------------------------------------------------------------------
# binary-state, two-message persuasion with partial commitment


def _expect(u, p, a):
    """``p`` is the probability of the second state."""
    return (1 - p) * F(u[0][a]) + p * F(u[1][a])


def _is_best(uR, p, a):
    return all(_expect(uR, p, a) >= _expect(uR, p, b) for b in range(len(uR[0])))


def _families(lam1, pi, denom):
    """Bayes-plausible posterior pairs (p1, p2); p1 or p2 on the grid."""
    lam2 = 1 - lam1
    out = set()
    for j in range(denom + 1):
        g = F(j, denom)
        p2 = (pi - lam1 * g) / lam2
        if 0 <= p2 <= 1:
            out.add((g, p2))
        p1 = (pi - lam2 * g) / lam1
        if 0 <= p1 <= 1:
            out.add((p1, g))
    return sorted(out)


def grid_equilibria(uS, uR, lam1, pi=F(1, 2), denom=60):
    """All (kappa, sender value) pairs of grid equilibria.

    ``kappa`` is a pair of action indices for the two messages. Degenerate
    marginals reduce to a single message carrying the prior.
    """
    lam1 = F(lam1)
    nA = len(uS[0])
    if lam1 in (0, 1):
        vals = [(a, _expect(uS, pi, a)) for a in range(nA) if _is_best(uR, pi, a)]
        return [((a, None) if lam1 == 1 else (None, a), v) for a, v in vals]
    fams = _families(lam1, pi, denom)
    res = []
    for k in itertools.product(range(nA), repeat=2):
        value = lambda f: lam1 * _expect(uS, f[0], k[0]) + (1 - lam1) * _expect(uS, f[1], k[1])
        best_dev = max(value(f) for f in fams)
        eq_vals = [value(f) for f in fams
                   if _is_best(uR, f[0], k[0]) and _is_best(uR, f[1], k[1])]
        eq_vals = [v for v in eq_vals if v == best_dev]
        if eq_vals:
            res.append((k, max(eq_vals)))
    return res


def grid_sender_optimum(uS, uR, lam1, pi=F(1, 2), denom=60):
    return max(v for _, v in grid_equilibria(uS, uR, lam1, pi, denom))


def grid_deviation_value(uS, lam1, kappa, pi=F(1, 2), denom=60):
    """Best sender payoff over grid families for a fixed pure rule (no obedience)."""
    lam1 = F(lam1)
    fams = _families(lam1, pi, denom)
    return max(lam1 * _expect(uS, f[0], kappa[0]) + (1 - lam1) * _expect(uS, f[1], kappa[1])
               for f in fams)


# --------------------------------------------------------------------------
# canonical block strategy


def canonical_continuation(alpha, mu, lam, post, state, prev, msg):
    """Hand evaluation of the continuation rule for one cell."""
    q = alpha * post[prev][state] + (1 - alpha) * mu[state]
    return post[msg][state] / q * ((1 - alpha) * lam[msg] + (alpha if msg == prev else 0))


EXAMPLE1 = {
    "uS": [[1, 2, 0], [1, 2, 0]],
    "uR": [[4, 0, 3], [0, 4, 3]],
}
EXAMPLE2 = {
    "uS": [[1, -2, 3, -1], [-1, 3, -2, 1]],
    "uR": [[8, 7, 3, 0], [0, 3, 7, 8]],
}
