"""Scenario definition, validation and Markov-chain primitives.

Beliefs are plain tuples of :class:`~fractions.Fraction`, one entry per state.
For two-state scenarios :func:`binary_belief` builds ``(1 - p, p)`` from the
probability ``p`` of the second state, which is how both worked examples
parametrise beliefs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .lp_core import to_fraction

__all__ = [
    "ChainFacts",
    "as_belief",
    "bundled_scenario",
    "default_prior",
    "Scenario",
    "ScenarioError",
    "best_responses",
    "binary_belief",
    "br_breakpoints",
    "expected_payoff",
    "indirect_utility",
    "load_scenario",
    "next_belief",
    "parse_scenario",
    "sender_preferred_action",
    "validate_scenario",
]

Belief = tuple[Fraction, ...]
Matrix = tuple[tuple[Fraction, ...], ...]


class ScenarioError(ValueError):
    """Invalid scenario. ``code`` names the failed check."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


@dataclass(frozen=True)
class Scenario:
    states: tuple[str, ...]
    messages: tuple[str, ...]
    actions: tuple[str, ...]
    u_S: Matrix
    u_R: Matrix
    Q: Matrix
    prior_override: Belief | None = None
    name: str = ""

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_messages(self) -> int:
        return len(self.messages)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def action_index(self, label) -> int:
        return label if isinstance(label, int) else self.actions.index(label)

    def message_index(self, label) -> int:
        return label if isinstance(label, int) else self.messages.index(label)

    def state_index(self, label) -> int:
        return label if isinstance(label, int) else self.states.index(label)


@dataclass(frozen=True)
class ChainFacts:
    Q: Matrix
    mu: Belief
    beta: tuple[Fraction, ...] | None
    B: Fraction | None
    alpha: Fraction | None
    is_pseudo_renewal: bool
    is_irreducible: bool
    is_aperiodic: bool

    def require_pseudo_renewal(self) -> None:
        if not self.is_pseudo_renewal:
            raise ScenarioError("not_pseudo_renewal",
                                "construction needs a pseudo-renewal chain")


def binary_belief(p) -> Belief:
    p = to_fraction(p)
    if not 0 <= p <= 1:
        raise ValueError(f"probability {p} outside [0, 1]")
    return (1 - p, p)


def _check_belief(p: Sequence, n: int) -> Belief:
    p = tuple(to_fraction(v) for v in p)
    if len(p) != n:
        raise ValueError(f"belief has {len(p)} entries, expected {n}")
    if any(v < 0 for v in p) or sum(p) != 1:
        raise ValueError(f"not a probability vector: {p}")
    return p


def as_belief(s: Scenario, p) -> Belief:
    """Accept a full probability vector or, for two states, ``P(second state)``."""
    if isinstance(p, (int, float, str, Fraction)) and not isinstance(p, bool):
        if s.n_states != 2:
            raise ValueError("scalar beliefs are only meaningful with two states")
        return binary_belief(p)
    return _check_belief(p, s.n_states)


# --------------------------------------------------------------------------
# chain analysis


def _solve_exact(A: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    """Gauss-Jordan on a square nonsingular system."""
    n = len(A)
    M = [row[:] + [rhs] for row, rhs in zip(A, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular system")
        M[col], M[piv] = M[piv], M[col]
        pv = M[col][col]
        M[col] = [v / pv for v in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


def _reachable(adj: list[list[int]], start: int) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def _period(adj: list[list[int]]) -> int:
    # BFS levels; period = gcd of level(u) + 1 - level(v) over all edges
    level = {0: 0}
    queue = [0]
    for u in queue:
        for v in adj[u]:
            if v not in level:
                level[v] = level[u] + 1
                queue.append(v)
    g = 0
    for u in range(len(adj)):
        for v in adj[u]:
            g = math.gcd(g, level[u] + 1 - level[v])
    return g


def validate_scenario(s: Scenario) -> ChainFacts:
    """Check the modelling assumptions and compute the chain summary.

    Raises :class:`ScenarioError` for too few messages, a non-stochastic
    ``Q``, a reducible chain or a periodic chain. A chain that is not
    pseudo-renewal is accepted here (static analysis does not need it) and
    flagged in the returned facts.
    """
    n = s.n_states
    if s.n_messages < min(n, s.n_actions):
        raise ScenarioError(
            "too_few_messages",
            f"|M| = {s.n_messages} < min(|states|, |actions|) = {min(n, s.n_actions)}")
    Q = s.Q
    for i, row in enumerate(Q):
        if any(v < 0 or v > 1 for v in row):
            raise ScenarioError("not_stochastic", f"Q row {i} has entries outside [0, 1]")
        if sum(row) != 1:
            raise ScenarioError("not_stochastic", f"Q row {i} sums to {sum(row)}")
    adj = [[j for j in range(n) if Q[i][j] > 0] for i in range(n)]
    if any(len(_reachable(adj, i)) != n for i in range(n)):
        raise ScenarioError("reducible", "transition graph is not strongly connected")
    per = _period(adj)
    if per != 1:
        raise ScenarioError("periodic", f"chain has period {per}")

    # mu (Q^T - I) = 0 with one equation replaced by normalisation
    A = [[Q[j][i] - (1 if i == j else 0) for j in range(n)] for i in range(n)]
    b = [Fraction(0)] * n
    A[-1] = [Fraction(1)] * n
    b[-1] = Fraction(1)
    mu = tuple(_solve_exact(A, b))

    beta = None
    pseudo = True
    for dest in range(n):
        off = {Q[src][dest] for src in range(n) if src != dest}
        if len(off) > 1:
            pseudo = False
            break
    if pseudo:
        if n == 1:
            beta = (Fraction(1),)
        else:
            beta = tuple(next(Q[src][dest] for src in range(n) if src != dest)
                         for dest in range(n))
        if sum(beta) > 1:
            pseudo = False
            beta = None
    B = alpha = None
    if pseudo:
        B = sum(beta)
        alpha = 1 - B
        assert all(bw == B * m for bw, m in zip(beta, mu))
    return ChainFacts(Q=Q, mu=mu, beta=beta, B=B, alpha=alpha,
                      is_pseudo_renewal=pseudo, is_irreducible=True, is_aperiodic=True)


def next_belief(cf: ChainFacts, p: Sequence[Fraction]) -> Belief:
    """One-step prediction ``p Q``."""
    n = len(cf.mu)
    q = tuple(sum((p[i] * cf.Q[i][j] for i in range(n)), Fraction(0)) for j in range(n))
    if cf.is_pseudo_renewal:
        a = cf.alpha
        assert q == tuple(a * pi + (1 - a) * m for pi, m in zip(p, cf.mu))
    return q


# --------------------------------------------------------------------------
# best responses


def expected_payoff(u: Matrix, p: Sequence[Fraction], a: int) -> Fraction:
    return sum((pw * u[w][a] for w, pw in enumerate(p)), Fraction(0))


def best_responses(s: Scenario, p) -> tuple[tuple[int, ...], Fraction]:
    """All receiver-optimal action indices at belief ``p`` and the optimal value."""
    p = as_belief(s, p)
    vals = [expected_payoff(s.u_R, p, a) for a in range(s.n_actions)]
    best = max(vals)
    return tuple(a for a, v in enumerate(vals) if v == best), best


def sender_preferred_action(s: Scenario, p) -> int:
    p = as_belief(s, p)
    acts, _ = best_responses(s, p)
    return max(acts, key=lambda a: (expected_payoff(s.u_S, p, a), -a))


def indirect_utility(s: Scenario, p) -> Fraction:
    """Sender's expected payoff when the receiver best responds to ``p``.

    Receiver ties are broken in the sender's favour.
    """
    p = as_belief(s, p)
    return expected_payoff(s.u_S, p, sender_preferred_action(s, p))


def br_breakpoints(s: Scenario) -> list[Fraction]:
    """Interior beliefs ``P(second state)`` at which the best-response set changes."""
    if s.n_states != 2:
        raise ValueError("br_breakpoints needs exactly two states")
    u = s.u_R
    found = set()
    for a in range(s.n_actions):
        for b in range(a + 1, s.n_actions):
            # (1-p) u0a + p u1a = (1-p) u0b + p u1b
            d0 = u[0][a] - u[0][b]
            d1 = u[1][a] - u[1][b]
            if d0 == d1:
                continue
            p = d0 / (d0 - d1)
            if 0 < p < 1:
                acts, _ = best_responses(s, p)
                if a in acts and b in acts:
                    found.add(p)
    return sorted(found)


# --------------------------------------------------------------------------
# JSON scenario files


def _labels(doc, key) -> tuple[str, ...]:
    vals = doc.get(key)
    if not isinstance(vals, list) or not all(isinstance(v, str) for v in vals) or not vals:
        raise ScenarioError("schema", f"${key}: expected a nonempty array of strings")
    if len(set(vals)) != len(vals):
        raise ScenarioError("duplicate_label", f"${key}: labels must be distinct")
    return tuple(vals)


def _rational(v, path: str) -> Fraction:
    if isinstance(v, bool) or isinstance(v, float):
        raise ScenarioError("not_rational", f"{path}: use an integer or a 'p/q' string")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        try:
            return Fraction(v)
        except (ValueError, ZeroDivisionError):
            pass
    raise ScenarioError("not_rational", f"{path}: {v!r} is not an exact rational")


def _matrix(doc, key, nrows, ncols) -> Matrix:
    m = doc.get(key)
    if not isinstance(m, list) or len(m) != nrows:
        raise ScenarioError("ragged", f"${key}: expected {nrows} rows")
    out = []
    for i, row in enumerate(m):
        if not isinstance(row, list) or len(row) != ncols:
            raise ScenarioError("ragged", f"${key}[{i}]: expected {ncols} entries")
        out.append(tuple(_rational(v, f"${key}[{i}][{j}]") for j, v in enumerate(row)))
    return tuple(out)


def parse_scenario(doc: dict, name: str = "") -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("schema", "$: expected a JSON object")
    states = _labels(doc, "states")
    messages = _labels(doc, "messages")
    actions = _labels(doc, "actions")
    u_S = _matrix(doc, "u_S", len(states), len(actions))
    u_R = _matrix(doc, "u_R", len(states), len(actions))
    Q = _matrix(doc, "Q", len(states), len(states))
    prior = None
    if doc.get("prior") is not None:
        raw = doc["prior"]
        if not isinstance(raw, list) or len(raw) != len(states):
            raise ScenarioError("ragged", f"$prior: expected {len(states)} entries")
        prior = tuple(_rational(v, f"$prior[{i}]") for i, v in enumerate(raw))
        if any(v < 0 for v in prior) or sum(prior) != 1:
            raise ScenarioError("bad_prior", "$prior: not a probability vector")
    return Scenario(states, messages, actions, u_S, u_R, Q, prior,
                    name=doc.get("name", name))


def load_scenario(path) -> Scenario:
    path = Path(path)
    with path.open() as fh:
        doc = json.load(fh)
    return parse_scenario(doc, name=path.stem)


def bundled_scenario(name: str) -> Scenario:
    """``example1``, ``example2`` or ``iid_single_action`` from the package data."""
    from importlib import resources

    text = resources.files("persuasion_lab.data").joinpath(f"{name}.json").read_text()
    return parse_scenario(json.loads(text), name=name)


def default_prior(s: Scenario, cf: ChainFacts) -> Belief:
    return s.prior_override if s.prior_override is not None else cf.mu
