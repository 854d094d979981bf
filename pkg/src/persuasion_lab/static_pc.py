"""Static persuasion with partial commitment.

The sender picks posteriors ``{p_m}`` averaging to the prior with message
weights ``lambda``; the receiver answers with a response rule ``kappa``; the
sender may only deviate to other posterior families with the same weights.

All programs are stated in the joint masses ``x[m][w] = lambda(m) p_m(w)``
for messages in the support of ``lambda``. In these variables the feasible
families form a transportation polytope and the receiver's obedience
constraints are homogeneous linear inequalities.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .game_model import (
    Scenario, as_belief, best_responses, expected_payoff, sender_preferred_action,
)
from .lp_core import LinearProgram, convex_hull_2d, solve_lp, solve_transportation, to_fraction

__all__ = [
    "EnumerationCapError",
    "EquilibriumRecord",
    "FamilyReport",
    "Outcome",
    "PosteriorFamily",
    "ResponseRule",
    "SweepPoint",
    "babbling_family",
    "enumerate_equilibria",
    "equilibrium_for_kappa",
    "lambda_envelope",
    "lambda_grid",
    "lambda_sweep",
    "payoff_hull",
    "sender_optimal",
    "sender_value_given_kappa",
    "verify_family",
]

DEFAULT_CAP = 10**6


class EnumerationCapError(RuntimeError):
    pass


def _lam(s: Scenario, lam) -> tuple[Fraction, ...]:
    if isinstance(lam, (int, float, str, Fraction)) and not isinstance(lam, bool):
        if s.n_messages != 2:
            raise ValueError("scalar lambda needs exactly two messages")
        p = to_fraction(lam)
        lam = (p, 1 - p)
    lam = tuple(to_fraction(v) for v in lam)
    if len(lam) != s.n_messages or any(v < 0 for v in lam) or sum(lam) != 1:
        raise ValueError(f"lambda {lam} is not a distribution over messages")
    return lam


@dataclass(frozen=True)
class ResponseRule:
    """Pure (``actions``) or mixed (``mixed``) map from messages to actions.

    ``actions[m]`` may be ``None`` for messages outside the support of the
    marginal. ``mixed[m]`` is a distribution over actions.
    """

    actions: tuple[int | None, ...] | None = None
    mixed: tuple[tuple[Fraction, ...], ...] | None = None

    def __post_init__(self):
        if (self.actions is None) == (self.mixed is None):
            raise ValueError("give exactly one of actions / mixed")
        if self.mixed is not None:
            rows = tuple(tuple(to_fraction(v) for v in r) for r in self.mixed)
            for r in rows:
                if any(v < 0 for v in r) or sum(r) != 1:
                    raise ValueError(f"mixed response row {r} is not a distribution")
            object.__setattr__(self, "mixed", rows)

    @classmethod
    def pure(cls, s: Scenario, labels: Sequence) -> "ResponseRule":
        return cls(actions=tuple(None if a is None else s.action_index(a) for a in labels))

    @property
    def is_pure(self) -> bool:
        return self.actions is not None

    def row(self, s: Scenario, m: int) -> tuple[Fraction, ...]:
        if self.mixed is not None:
            return self.mixed[m]
        a = self.actions[m]
        if a is None:
            raise ValueError(f"response rule undefined at message {m}")
        return tuple(Fraction(1 if b == a else 0) for b in range(s.n_actions))

    def labels(self, s: Scenario) -> tuple[str, ...]:
        if self.actions is None:
            return tuple("mixed" for _ in self.mixed)
        return tuple("-" if a is None else s.actions[a] for a in self.actions)


@dataclass(frozen=True)
class PosteriorFamily:
    """Message weights and one posterior per message in their support."""

    prior: tuple[Fraction, ...]
    lam: tuple[Fraction, ...]
    posteriors: tuple[tuple[Fraction, ...] | None, ...]

    def __post_init__(self):
        n = len(self.prior)
        if len(self.posteriors) != len(self.lam):
            raise ValueError("one posterior slot per message is required")
        mean = [Fraction(0)] * n
        for w, p in zip(self.lam, self.posteriors):
            if w == 0:
                continue
            if p is None or len(p) != n or any(v < 0 for v in p) or sum(p) != 1:
                raise ValueError(f"invalid posterior {p} for a message with weight {w}")
            for i in range(n):
                mean[i] += w * p[i]
        if tuple(mean) != tuple(self.prior):
            raise ValueError(f"family is not Bayes plausible: mean {tuple(mean)} != prior")

    @classmethod
    def build(cls, s: Scenario, prior, lam, posteriors) -> "PosteriorFamily":
        prior = as_belief(s, prior)
        lam = _lam(s, lam)
        posts = tuple(None if (p is None or w == 0) else as_belief(s, p)
                      for w, p in zip(lam, posteriors))
        return cls(prior, lam, posts)

    def joint(self) -> list[list[Fraction]]:
        """``[w][m] -> lambda(m) p_m(w)``."""
        n = len(self.prior)
        return [[w * p[i] if w else Fraction(0) for w, p in zip(self.lam, self.posteriors)]
                for i in range(n)]

    def payoff(self, s: Scenario, kappa: ResponseRule, u) -> Fraction:
        total = Fraction(0)
        for m, (w, p) in enumerate(zip(self.lam, self.posteriors)):
            if w == 0:
                continue
            row = kappa.row(s, m)
            total += w * sum((row[a] * expected_payoff(u, p, a) for a in range(s.n_actions)),
                             Fraction(0))
        return total


@dataclass(frozen=True)
class Outcome:
    """Joint distribution over (state, action)."""

    nu: tuple[tuple, ...]

    def state_marginal(self):
        return tuple(sum(row) for row in self.nu)

    def value(self, u) -> Fraction:
        return sum((self.nu[w][a] * u[w][a] for w in range(len(self.nu))
                    for a in range(len(self.nu[0]))), 0)

    @classmethod
    def from_family(cls, s: Scenario, family: PosteriorFamily, kappa: ResponseRule) -> "Outcome":
        nu = [[Fraction(0)] * s.n_actions for _ in range(s.n_states)]
        for m, (w, p) in enumerate(zip(family.lam, family.posteriors)):
            if w == 0:
                continue
            row = kappa.row(s, m)
            for i in range(s.n_states):
                for a in range(s.n_actions):
                    nu[i][a] += w * p[i] * row[a]
        return cls(tuple(tuple(r) for r in nu))


@dataclass(frozen=True)
class EquilibriumRecord:
    lam: tuple[Fraction, ...]
    kappa: ResponseRule
    sender_value: Fraction
    receiver_range: tuple[Fraction, Fraction]
    witness: PosteriorFamily

    @property
    def is_babbling(self) -> bool:
        return all(p is None or p == self.witness.prior for p in self.witness.posteriors)


# --------------------------------------------------------------------------
# linear programs in the joint masses


def _support(lam) -> list[int]:
    return [m for m, w in enumerate(lam) if w > 0]


def _cost(s: Scenario, kappa: ResponseRule, u, m: int) -> list[Fraction]:
    row = kappa.row(s, m)
    return [sum((row[a] * u[w][a] for a in range(s.n_actions)), Fraction(0))
            for w in range(s.n_states)]


def sender_value_given_kappa(s: Scenario, pi, lam, kappa: ResponseRule) -> Fraction:
    """Best sender payoff over all Bayes-plausible families with weights ``lam``."""
    return _deviation_lp(s, pi, lam, kappa).value


def _deviation_lp(s, pi, lam, kappa):
    pi = as_belief(s, pi)
    lam = _lam(s, lam)
    supp = _support(lam)
    cost = [[_cost(s, kappa, s.u_S, m)[w] for m in supp] for w in range(s.n_states)]
    sol = solve_transportation(cost, pi, [lam[m] for m in supp])
    assert sol.optimal
    return sol


def best_deviation_family(s: Scenario, pi, lam, kappa: ResponseRule) -> PosteriorFamily:
    """An argmax family of the deviation program (a vertex)."""
    pi = as_belief(s, pi)
    lam = _lam(s, lam)
    sol = _deviation_lp(s, pi, lam, kappa)
    supp = _support(lam)
    k = len(supp)
    posts: list = [None] * s.n_messages
    for j, m in enumerate(supp):
        posts[m] = tuple(sol.point[w * k + j] / lam[m] for w in range(s.n_states))
    return PosteriorFamily(pi, lam, tuple(posts))


def _equilibrium_program(s: Scenario, pi, lam, kappa: ResponseRule):
    """Variables ``x[(j, w)]`` at index ``j * n + w`` for the j-th supported message."""
    supp = _support(lam)
    n = s.n_states
    nv = len(supp) * n
    A_eq, b_eq = [], []
    for w in range(n):
        row = [0] * nv
        for j in range(len(supp)):
            row[j * n + w] = 1
        A_eq.append(row)
        b_eq.append(pi[w])
    for j, m in enumerate(supp):
        row = [0] * nv
        for w in range(n):
            row[j * n + w] = 1
        A_eq.append(row)
        b_eq.append(lam[m])
    A_ub, b_ub = [], []
    for j, m in enumerate(supp):
        a = kappa.actions[m]
        for b in range(s.n_actions):
            if b == a:
                continue
            row = [0] * nv
            for w in range(n):
                row[j * n + w] = s.u_R[w][b] - s.u_R[w][a]
            A_ub.append(row)
            b_ub.append(0)
    c_S = [0] * nv
    c_R = [0] * nv
    for j, m in enumerate(supp):
        a = kappa.actions[m]
        for w in range(n):
            c_S[j * n + w] = s.u_S[w][a]
            c_R[j * n + w] = s.u_R[w][a]
    return supp, A_eq, b_eq, A_ub, b_ub, c_S, c_R


def _family_from_point(s, pi, lam, supp, point) -> PosteriorFamily:
    n = s.n_states
    posts: list = [None] * s.n_messages
    for j, m in enumerate(supp):
        posts[m] = tuple(point[j * n + w] / lam[m] for w in range(n))
    return PosteriorFamily(pi, lam, tuple(posts))


def babbling_family(s: Scenario, pi, lam) -> PosteriorFamily:
    pi = as_belief(s, pi)
    lam = _lam(s, lam)
    return PosteriorFamily(pi, lam, tuple(pi if w else None for w in lam))


def equilibrium_for_kappa(s: Scenario, pi, lam, kappa: ResponseRule) -> EquilibriumRecord | None:
    """Equilibrium supported by the pure rule ``kappa``, or ``None`` if there is none.

    An equilibrium exists iff the sender optimum over obedient families
    equals the unconstrained deviation optimum. The witness is the
    receiver-best vertex of that optimal face.
    """
    if not kappa.is_pure:
        raise ValueError("equilibrium_for_kappa needs a pure response rule")
    pi = as_belief(s, pi)
    lam = _lam(s, lam)
    target = sender_value_given_kappa(s, pi, lam, kappa)
    supp, A_eq, b_eq, A_ub, b_ub, c_S, c_R = _equilibrium_program(s, pi, lam, kappa)
    con = solve_lp(LinearProgram(c_S, A_eq, b_eq, A_ub, b_ub))
    if not con.optimal or con.value != target:
        return None
    face_eq = A_eq + [c_S]
    face_b = b_eq + [target]
    hi = solve_lp(LinearProgram(c_R, face_eq, face_b, A_ub, b_ub))
    lo = solve_lp(LinearProgram([-v for v in c_R], face_eq, face_b, A_ub, b_ub))
    assert hi.optimal and lo.optimal
    witness = _family_from_point(s, pi, lam, supp, hi.point)
    return EquilibriumRecord(lam, kappa, target, (-lo.value, hi.value), witness)


def enumerate_equilibria(s: Scenario, pi, lam, cap: int = DEFAULT_CAP) -> list[EquilibriumRecord]:
    """All pure-rule equilibria for the marginal ``lam``, babbling included."""
    pi = as_belief(s, pi)
    lam = _lam(s, lam)
    supp = _support(lam)
    count = s.n_actions ** len(supp)
    if count > cap:
        raise EnumerationCapError(
            f"{count} pure response rules exceed the enumeration cap of {cap}")
    babble = sender_preferred_action(s, pi)
    out = []
    for combo in itertools.product(range(s.n_actions), repeat=len(supp)):
        acts: list = [None] * s.n_messages
        for m, a in zip(supp, combo):
            acts[m] = a
        kappa = ResponseRule(actions=tuple(acts))
        rec = equilibrium_for_kappa(s, pi, lam, kappa)
        if all(a == babble for a in combo):
            # the babbling family always supports the constant rule at the
            # sender-preferred best response to the prior
            assert rec is not None
            rec = EquilibriumRecord(lam, kappa, rec.sender_value, rec.receiver_range,
                                    babbling_family(s, pi, lam))
        if rec is not None:
            out.append(rec)
    return out


def sender_optimal(s: Scenario, pi, lam) -> Fraction:
    return max(r.sender_value for r in enumerate_equilibria(s, pi, lam))


@dataclass(frozen=True)
class SweepPoint:
    lam: tuple[Fraction, ...]
    sender_value: Fraction
    receiver_range: tuple[Fraction, Fraction]
    kappas: tuple[ResponseRule, ...]
    records: tuple[EquilibriumRecord, ...]


def lambda_grid(s: Scenario, denom: int) -> list[tuple[Fraction, ...]]:
    if s.n_messages != 2:
        raise ValueError("the lambda grid is defined for two messages; pass lambdas explicitly")
    return [(Fraction(k, denom), 1 - Fraction(k, denom)) for k in range(denom + 1)]


def lambda_sweep(s: Scenario, pi, denom: int | None = None, lambdas=None) -> list[SweepPoint]:
    """Sender-optimal equilibrium value for each marginal on a grid.

    With two messages the grid is ``lambda = (k/denom, 1 - k/denom)``;
    otherwise pass ``lambdas`` explicitly.
    """
    from .parallel import parallel_map

    lams = [_lam(s, l) for l in lambdas] if lambdas is not None else lambda_grid(s, denom)
    pi = as_belief(s, pi)
    recs_per = parallel_map(_enumerate_task, [(s, pi, lam) for lam in lams])
    out = []
    for lam, recs in zip(lams, recs_per):
        best = max(r.sender_value for r in recs)
        top = [r for r in recs if r.sender_value == best]
        rng = (min(r.receiver_range[0] for r in top), max(r.receiver_range[1] for r in top))
        out.append(SweepPoint(lam, best, rng, tuple(r.kappa for r in top), tuple(recs)))
    return out


def _enumerate_task(args):
    return enumerate_equilibria(*args)


def payoff_hull(s: Scenario, pi, denom: int | None = None, lambdas=None, sweep=None):
    """Convex hull of (sender, receiver) payoff pairs over the marginal grid.

    Both ends of every record's receiver range enter the hull.
    """
    if sweep is None:
        sweep = lambda_sweep(s, pi, denom, lambdas)
    pts = []
    for point in sweep:
        for r in point.records:
            pts.append((r.sender_value, r.receiver_range[0]))
            pts.append((r.sender_value, r.receiver_range[1]))
    return convex_hull_2d(pts)


def lambda_envelope(sweep: Sequence[SweepPoint]) -> list[tuple[Fraction, Fraction]]:
    """Upper concave hull of ``(lambda(m1), e*_S)`` over a binary-message sweep."""
    pts = sorted((p.lam[0], p.sender_value) for p in sweep)
    upper: list = []
    for p in pts:
        while len(upper) >= 2:
            o, a = upper[-2], upper[-1]
            if (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0]) >= 0:
                upper.pop()
            else:
                break
        upper.append(p)
    return upper


@dataclass(frozen=True)
class FamilyReport:
    eq_r_residuals: tuple[Fraction | None, ...]
    eq_s_residual: Fraction
    family_sender_value: Fraction
    deviation_value: Fraction
    outcome: Outcome

    @property
    def is_equilibrium(self) -> bool:
        return self.eq_s_residual == 0 and all(r in (None, 0) for r in self.eq_r_residuals)


def verify_family(s: Scenario, family: PosteriorFamily, kappa: ResponseRule) -> FamilyReport:
    """Residuals of both equilibrium conditions for a family and a (possibly mixed) rule.

    Receiver residual per message: value of ``kappa(m)`` minus the best
    response value at ``p_m`` (zero in equilibrium, negative otherwise).
    Sender residual: deviation optimum minus the family's payoff.
    """
    res = []
    for m, (w, p) in enumerate(zip(family.lam, family.posteriors)):
        if w == 0:
            res.append(None)
            continue
        _, best = best_responses(s, p)
        row = kappa.row(s, m)
        val = sum((row[a] * expected_payoff(s.u_R, p, a) for a in range(s.n_actions)),
                  Fraction(0))
        res.append(val - best)
    own = family.payoff(s, kappa, s.u_S)
    dev = sender_value_given_kappa(s, family.prior, family.lam, kappa)
    return FamilyReport(tuple(res), dev - own, own, dev, Outcome.from_family(s, family, kappa))
