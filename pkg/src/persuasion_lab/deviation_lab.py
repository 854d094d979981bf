"""Deviation tests: obedience, copula robustness and simulated epsilon-gains.

A copula is a joint law ``c[w][xi]`` over (true state, fictitious state)
with both marginals equal to the prior. A sender who reports as if the
state were ``xi`` turns an outcome ``nu`` into
``sum_{w, xi, a} c(w | xi) nu(xi, a) u_S(w, a)`` without changing anything
the receiver can observe.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dynamic_engine import (
    GreedySender,
    MyopicReceiver,
    Period,
    Profile,
    ReplicationStreams,
    _cumulative,
    _sample,
    scripted_sender,
    simulate,
)
from .game_model import ChainFacts, Scenario
from .lp_core import solve_transportation, to_fraction
from .static_pc import (
    Outcome,
    PosteriorFamily,
    ResponseRule,
    best_deviation_family,
    sender_value_given_kappa,
)

__all__ = [
    "Copula",
    "apply_copula",
    "copula_value",
    "CopulaDeviationSender",
    "DEVIATION_KINDS",
    "DeviationReport",
    "FictitiousStateProcess",
    "copula_deviation_strategy",
    "copula_robustness",
    "epsilon_gain",
    "fictitious_state_stream",
    "marginal_preserving_deviation",
    "obedience_residuals",
    "reports_csv",
]

DEVIATION_KINDS = ("copula", "greedy", "scripted", "myopic_receiver")


@dataclass(frozen=True)
class Copula:
    """Joint law over (true state, fictitious state) with equal marginals."""

    c: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(to_fraction(v) for v in row) for row in self.c)
        object.__setattr__(self, "c", rows)
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise ValueError("copula must be a square matrix")
        if any(v < 0 for r in rows for v in r):
            raise ValueError("copula entries must be nonnegative")
        if self.row_marginal() != self.col_marginal():
            raise ValueError("copula marginals differ")

    def row_marginal(self) -> tuple[Fraction, ...]:
        return tuple(sum(r) for r in self.c)

    def col_marginal(self) -> tuple[Fraction, ...]:
        n = len(self.c)
        return tuple(sum(self.c[i][j] for i in range(n)) for j in range(n))

    def has_marginal(self, pi) -> bool:
        pi = tuple(to_fraction(v) for v in pi)
        return self.row_marginal() == pi and self.col_marginal() == pi

    @classmethod
    def identity(cls, pi) -> "Copula":
        n = len(pi)
        return cls(tuple(tuple(to_fraction(pi[i]) if i == j else 0 for j in range(n))
                         for i in range(n)))

    @classmethod
    def independence(cls, pi) -> "Copula":
        pi = [to_fraction(v) for v in pi]
        return cls(tuple(tuple(a * b for b in pi) for a in pi))

    @classmethod
    def swap(cls, pi) -> "Copula":
        """Reverses the state order; needs a prior symmetric under that reversal."""
        pi = [to_fraction(v) for v in pi]
        n = len(pi)
        return cls(tuple(tuple(pi[i] if j == n - 1 - i else 0 for j in range(n))
                         for i in range(n)))


@dataclass(frozen=True)
class DeviationReport:
    deviation: str
    baseline: object
    best: object
    gain: object
    stderr: float | None = None
    witness: str = ""

    @property
    def exact(self) -> bool:
        return self.stderr is None

    def row(self) -> list[str]:
        fmt = (lambda v: str(v)) if self.exact else (lambda v: repr(float(v)))
        return [self.deviation, fmt(self.baseline), fmt(self.best), fmt(self.gain),
                "" if self.stderr is None else repr(self.stderr), self.witness]


def reports_csv(reports: Sequence[DeviationReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["deviation", "baseline", "best", "gain", "stderr", "witness"])
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue()


def _exact_nu(nu: Outcome):
    return [[to_fraction(v) for v in row] for row in nu.nu]


def obedience_residuals(s: Scenario, nu: Outcome):
    """Largest violation of the receiver's obedience constraints, plus the full table.

    ``table[(a, b)] = sum_w nu(w, a) (u_R(w, a) - u_R(w, b))``; a negative
    entry means switching recommended ``a`` to ``b`` pays.
    """
    q = _exact_nu(nu)
    table = {}
    worst = Fraction(0)
    for a in range(s.n_actions):
        for b in range(s.n_actions):
            if a == b:
                continue
            v = sum((q[w][a] * (s.u_R[w][a] - s.u_R[w][b]) for w in range(s.n_states)),
                    Fraction(0))
            table[(a, b)] = v
            worst = max(worst, -v)
    return worst, table


def apply_copula(nu: Outcome, c: Copula) -> Outcome:
    """Outcome after reporting ``xi`` when the state is ``w``: ``sum_xi c(w | xi) nu(xi, a)``."""
    q = _exact_nu(nu)
    marg = [sum(row) for row in q]
    if tuple(marg) != c.col_marginal():
        raise ValueError("copula marginal differs from the outcome's state marginal")
    n, k = len(q), len(q[0])
    out = [[sum((c.c[w][x] / marg[x] * q[x][a] for x in range(n) if marg[x] > 0), Fraction(0))
            for a in range(k)] for w in range(n)]
    return Outcome(tuple(tuple(r) for r in out))


def copula_value(s: Scenario, nu: Outcome, c: Copula) -> Fraction:
    return apply_copula(nu, c).value(s.u_S)


def copula_robustness(s: Scenario, nu: Outcome, pi=None) -> tuple[DeviationReport, Copula]:
    """Best copula deviation from ``nu``, solved exactly over the copula polytope.

    ``pi`` defaults to the state marginal of ``nu`` and must equal it when
    given. Fictitious states of prior mass zero are dropped.
    """
    q = _exact_nu(nu)
    marg = tuple(sum(row) for row in q)
    if pi is not None:
        pi = tuple(to_fraction(v) for v in pi)
        if pi != marg:
            raise ValueError(f"outcome state marginal {marg} differs from prior {pi}")
    pi = marg
    cols = [x for x in range(s.n_states) if pi[x] > 0]
    cost = [[sum((q[x][a] * s.u_S[w][a] for a in range(s.n_actions)), Fraction(0)) / pi[x]
             for x in cols] for w in range(s.n_states)]
    sol = solve_transportation(cost, pi, [pi[x] for x in cols])
    assert sol.optimal
    k = len(cols)
    full = [[Fraction(0)] * s.n_states for _ in range(s.n_states)]
    for w in range(s.n_states):
        for j, x in enumerate(cols):
            full[w][x] = sol.point[w * k + j]
    cop = Copula(tuple(tuple(r) for r in full))
    base = Outcome(tuple(tuple(r) for r in q)).value(s.u_S)
    rep = DeviationReport("copula", base, sol.value, sol.value - base,
                          witness=_copula_label(cop))
    return rep, cop


def _copula_label(c: Copula) -> str:
    return "[" + ";".join(" ".join(str(v) for v in row) for row in c.c) + "]"


def marginal_preserving_deviation(s: Scenario, pi, family: PosteriorFamily,
                                  kappa: ResponseRule) -> DeviationReport:
    """Best reallocation of posteriors with the same message frequencies, given ``kappa``."""
    base = family.payoff(s, kappa, s.u_S)
    best = sender_value_given_kappa(s, pi, family.lam, kappa)
    witness = best_deviation_family(s, pi, family.lam, kappa)
    label = "[" + ";".join("-" if p is None else " ".join(str(v) for v in p)
                           for p in witness.posteriors) + "]"
    return DeviationReport("marginal_preserving", base, best, best - base, witness=label)


# --------------------------------------------------------------------------
# fictitious states


class FictitiousStateProcess:
    """Online coupling of a fictitious chain to the true one through a copula.

    The pseudo-renewal chain redraws its state from ``mu`` with probability
    ``B`` each period. The process samples whether a renewal happened given
    the observed states (certain if the state changed, otherwise with
    posterior probability ``B mu(w) / (1 - B + B mu(w))``) and, at renewals,
    draws ``xi`` from ``c[w][.] / mu(w)``; otherwise ``xi`` is kept.
    """

    def __init__(self, cf: ChainFacts, c: Copula):
        cf.require_pseudo_renewal()
        if not c.has_marginal(cf.mu):
            raise ValueError("copula marginals must equal the invariant distribution")
        self.cf = cf
        B, mu = cf.B, cf.mu
        self.renew_if_same = np.asarray([float(B * m / (1 - B + B * m)) for m in mu])
        self._cond = _cumulative([[v / mu[w] for v in c.c[w]] for w in range(len(mu))])
        self.prev_state = None
        self.xi = None

    def begin(self, reps: int) -> None:
        self.prev_state = None
        self.xi = np.zeros(reps, dtype=np.int64)

    def step(self, states, u) -> np.ndarray:
        """Advance one period; ``u`` holds two uniforms per replication."""
        if self.prev_state is None:
            renew = np.ones(len(states), dtype=bool)
        else:
            renew = (states != self.prev_state) | (u[:, 0] < self.renew_if_same[states])
        if renew.any():
            self.xi[renew] = _sample(self._cond[states[renew]], u[renew, 1])
        self.prev_state = states.copy()
        return self.xi.copy()


def fictitious_state_stream(cf: ChainFacts, c: Copula, states, seed: int = 0) -> np.ndarray:
    """Fictitious states for one realised path of true states."""
    states = np.asarray(states, dtype=np.int64)
    proc = FictitiousStateProcess(cf, c)
    proc.begin(1)
    rng = np.random.default_rng(seed)
    u = rng.random((len(states), 2))
    out = np.empty(len(states), dtype=np.int64)
    for n, w in enumerate(states):
        out[n] = proc.step(states[n:n + 1], u[n:n + 1])[0]
    return out


class CopulaDeviationSender:
    """Plays ``base`` as if the fictitious state were the true one."""

    def __init__(self, base, cf: ChainFacts, c: Copula):
        self.base = base
        self.process = FictitiousStateProcess(cf, c)

    def begin(self, reps: int) -> None:
        self.base.begin(reps)
        self.process.begin(reps)

    def act(self, states, period: Period, streams: ReplicationStreams):
        xi = self.process.step(states, streams.draw("fictitious", 2))
        return self.base.act(xi, period, streams)

    def public_rule(self, period: Period, prev):
        return self.base.public_rule(period, prev)


def copula_deviation_strategy(base, cf: ChainFacts, c: Copula) -> CopulaDeviationSender:
    return CopulaDeviationSender(base, cf, c)


# --------------------------------------------------------------------------
# simulated gains


def epsilon_gain(s: Scenario, cf: ChainFacts, profile: Profile, deviation: str, *,
                 delta: float, horizon: int, reps: int, seed: int,
                 copula: Copula | None = None, script=None,
                 baseline=None) -> DeviationReport:
    """Estimated gain of one named deviation against ``profile``.

    Baseline and deviation share the root seed, so each replication sees
    the same chain path (common random numbers) and the gain's standard
    error comes from paired differences. Sender deviations report the
    sender's gain; ``myopic_receiver`` reports the receiver's. ``baseline``
    may pass an earlier run of ``profile`` with the same parameters.
    """
    player = "sender"
    if deviation == "copula":
        if copula is None:
            raise ValueError("copula deviation needs a copula")
        dev = profile.with_sender(copula_deviation_strategy(profile.sender, cf, copula))
        witness = _copula_label(copula)
    elif deviation == "greedy":
        if profile.config is None:
            raise ValueError("greedy deviation needs a block profile")
        dev = profile.with_sender(GreedySender(s, profile.config))
        witness = "greedy"
    elif deviation == "scripted" or deviation.startswith("scripted:"):
        script = script if script is not None else deviation.partition(":")[2]
        if not script:
            raise ValueError("scripted deviation needs a script")
        dev = profile.with_sender(scripted_sender(s, script))
        witness = script if isinstance(script, str) else script.get("name", "scripted")
    elif deviation == "myopic_receiver":
        dev = profile.with_receiver(MyopicReceiver(s, cf, profile.sender))
        player = "receiver"
        witness = "myopic"
    else:
        raise ValueError(f"unknown deviation {deviation!r}; expected one of {DEVIATION_KINDS}")
    base = baseline
    if base is None:
        base = simulate(s, cf, profile, delta, horizon, reps, seed)
    elif (base.reps, base.seed, base.delta, base.horizon) != (reps, seed, delta, horizon):
        raise ValueError("baseline run does not match the requested parameters")
    alt = simulate(s, cf, dev, delta, horizon, reps, seed)
    if player == "sender":
        b, d = base.sender_paths, alt.sender_paths
    else:
        b, d = base.receiver_paths, alt.receiver_paths
    diff = d - b
    se = float(diff.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return DeviationReport(deviation, float(b.mean()), float(d.mean()), float(diff.mean()),
                           stderr=se, witness=witness)
