"""Concave and quasi-concave envelopes of the sender's indirect utility.

The concave envelope is the Bayesian-persuasion value; the quasi-concave
envelope is the best cheap-talk value when the sender's payoff does not
depend on the state.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .game_model import Scenario, as_belief, binary_belief, br_breakpoints, indirect_utility
from .lp_core import LinearProgram, in_hull, solve_lp

__all__ = ["EnvelopeValue", "PosteriorSplit", "cav_u", "quasicav_u", "simplex_grid"]

DEFAULT_GRID = 32


@dataclass(frozen=True)
class PosteriorSplit:
    posteriors: tuple[tuple[Fraction, ...], ...]
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        if any(w < 0 for w in self.weights) or sum(self.weights) != 1:
            raise ValueError("split weights must be a probability vector")

    def mean(self) -> tuple[Fraction, ...]:
        n = len(self.posteriors[0])
        return tuple(sum((w * p[i] for w, p in zip(self.weights, self.posteriors)),
                         Fraction(0)) for i in range(n))


@dataclass(frozen=True)
class EnvelopeValue:
    value: Fraction
    split: PosteriorSplit
    exact: bool = True


def simplex_grid(n: int, denom: int):
    """All beliefs over ``n`` states with entries in ``{0, 1/denom, ..., 1}``."""
    for cut in itertools.combinations(range(denom + n - 1), n - 1):
        parts, prev = [], -1
        for c in cut + (denom + n - 1,):
            parts.append(c - prev - 1)
            prev = c
        yield tuple(Fraction(k, denom) for k in parts)


def _concavify(s: Scenario, prior, candidates) -> EnvelopeValue | None:
    cand = list(dict.fromkeys(candidates))
    vals = [indirect_utility(s, p) for p in cand]
    n = s.n_states
    A_eq = [[p[i] for p in cand] for i in range(n)]
    b_eq = list(prior)
    sol = solve_lp(LinearProgram(vals, A_eq, b_eq))
    if not sol.optimal:
        return None
    used = [(p, w) for p, w in zip(cand, sol.point) if w != 0]
    split = PosteriorSplit(tuple(p for p, _ in used), tuple(w for _, w in used))
    return EnvelopeValue(sol.value, split)


def cav_u(s: Scenario, pi, grid: int = DEFAULT_GRID) -> EnvelopeValue:
    """Concave envelope of the indirect utility at ``pi`` with an achieving split.

    Two states: exact, using the best-response breakpoints, the prior and the
    two degenerate beliefs as candidate posteriors. More states: a lower
    bound over a barycentric grid of denominator ``grid`` (``exact=False``).
    """
    pi = as_belief(s, pi)
    if s.n_states == 2:
        pts = [Fraction(0), Fraction(1), pi[1], *br_breakpoints(s)]
        out = _concavify(s, pi, [binary_belief(p) for p in sorted(set(pts))])
        assert out is not None
        return out
    cands = [pi, *simplex_grid(s.n_states, grid)]
    out = _concavify(s, pi, cands)
    assert out is not None  # pi itself is a candidate
    return EnvelopeValue(out.value, out.split, exact=False)


def quasicav_u(s: Scenario, pi) -> Fraction:
    """Quasi-concave envelope of the indirect utility at ``pi`` (two states only).

    Largest level ``t`` such that ``pi`` lies in the hull of the beliefs at
    which the indirect utility is at least ``t``.
    """
    if s.n_states != 2:
        raise ValueError("quasicav_u is implemented for two states only")
    pi = as_belief(s, pi)
    pts = sorted({Fraction(0), Fraction(1), pi[1], *br_breakpoints(s)})
    vals = {p: indirect_utility(s, p) for p in pts}
    for t in sorted(set(vals.values()), reverse=True):
        level = [(p,) for p, v in vals.items() if v >= t]
        if in_hull((pi[1],), level):
            return t
    raise AssertionError("unreachable: the lowest level contains every candidate")
