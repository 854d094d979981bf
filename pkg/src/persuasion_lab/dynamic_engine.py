"""Monte Carlo engine for the dynamic sender-receiver game without feedback.

Replications run in lockstep as numpy arrays of shape ``(reps,)``. Every
replication owns its own random streams (one per role: chain, sender,
receiver, fictitious states), derived from a single root seed, so results
for replication ``r`` do not depend on how many replications run and
baseline/deviation pairs share chain randomness.

Strategy objects are stateful within one run; ``begin(reps)`` resets them.
Exact probability tables are built with Fractions (rows checked to sum to
one) and only converted to floats for sampling.
"""

from __future__ import annotations

import bisect
import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .game_model import ChainFacts, Scenario, ScenarioError, next_belief
from .lp_core import to_fraction
from .static_pc import EquilibriumRecord, Outcome, PosteriorFamily, ResponseRule

__all__ = [
    "BlockConfig",
    "Period",
    "Profile",
    "ReplicationStreams",
    "SimReport",
    "SubBlock",
    "build_canonical_profile",
    "build_canonical_sender",
    "build_quota_receiver",
    "build_scripted_profile",
    "example2_script",
    "make_block_config",
    "outcome_from_sim",
    "simulate",
]


# --------------------------------------------------------------------------
# randomness


class ReplicationStreams:
    """Per-replication uniform streams, buffered in chunks of periods."""

    ROLES = ("chain", "sender", "receiver", "fictitious")

    def __init__(self, seed: int, reps: int):
        self.reps = reps
        children = np.random.SeedSequence(seed).spawn(reps)
        self._gens = {role: [] for role in self.ROLES}
        for child in children:
            for role, ss in zip(self.ROLES, child.spawn(len(self.ROLES))):
                self._gens[role].append(np.random.Generator(np.random.PCG64(ss)))
        self._buf: dict[str, tuple[int, int, np.ndarray]] = {}
        self.period = 1

    def draw(self, role: str, k: int = 1) -> np.ndarray:
        """``(reps, k)`` uniforms for the current period; fixed ``k`` per role."""
        n = self.period
        entry = self._buf.get(role)
        if entry is None or not entry[0] <= n < entry[0] + entry[2].shape[1]:
            if entry is not None and entry[1] != k:
                raise ValueError(f"role {role!r} switched draws per period")
            chunk = max(16, (1 << 20) // max(1, self.reps * k))
            arr = np.stack([g.random((chunk, k)) for g in self._gens[role]])
            entry = (n, k, arr)
            self._buf[role] = entry
        start, kk, arr = entry
        if kk != k:
            raise ValueError(f"role {role!r} switched draws per period")
        return arr[:, n - start, :]


def _sample(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Categorical draws from rows of cumulative probabilities (last column 1)."""
    return (u[:, None] >= cum).sum(axis=1).clip(max=cum.shape[1] - 1)


def _cumulative(table) -> np.ndarray:
    arr = np.asarray([[float(v) for v in row] for row in table], dtype=float).cumsum(axis=1)
    arr[:, -1] = 1.0
    return arr


def _check_rows(rows, what: str) -> None:
    for row in rows:
        if any(v < 0 for v in row) or sum(row) != 1:
            raise ValueError(f"{what}: row {tuple(row)} is not a distribution")


# --------------------------------------------------------------------------
# block structure


@dataclass(frozen=True)
class SubBlock:
    eta: Fraction
    family: PosteriorFamily
    kappa: ResponseRule


@dataclass(frozen=True)
class BlockConfig:
    """Block length ``N`` and the sub-blocks played within every block."""

    N: int
    subblocks: tuple[SubBlock, ...]

    def __post_init__(self):
        if self.N < 1 or not self.subblocks:
            raise ValueError("need N >= 1 and at least one sub-block")
        if sum(sb.eta for sb in self.subblocks) != 1:
            raise ValueError("sub-block weights must sum to 1")
        for i, sb in enumerate(self.subblocks):
            if sb.eta < 0:
                raise ValueError("negative sub-block weight")
            for m, w in enumerate(sb.family.lam):
                q = self.N * sb.eta * w
                if q.denominator != 1:
                    raise ValueError(
                        f"N * eta_{i} * lambda_{i}({m}) = {q} is not an integer")
            for m, w in enumerate(sb.family.lam):
                if w > 0 and (sb.kappa.actions is None or sb.kappa.actions[m] is None):
                    raise ValueError("sub-block response rules must be pure on the support")

    @property
    def lengths(self) -> list[int]:
        return [int(self.N * sb.eta) for sb in self.subblocks]

    @property
    def starts(self) -> list[int]:
        """Zero-based offsets of sub-block starts within a block."""
        out, acc = [], 0
        for ln in self.lengths:
            out.append(acc)
            acc += ln
        return out

    def quotas(self, i: int) -> list[int]:
        sb = self.subblocks[i]
        return [int(self.N * sb.eta * w) for w in sb.family.lam]


def make_block_config(parts, floor: int = 1) -> BlockConfig:
    """Smallest admissible block length ``N >= floor`` for weighted equilibria.

    ``parts`` holds ``(eta, record)`` pairs with an :class:`EquilibriumRecord`
    or ``(eta, family, kappa)`` triples.
    """
    subs = []
    for part in parts:
        if len(part) == 2:
            eta, rec = part
            subs.append(SubBlock(to_fraction(eta), rec.witness, rec.kappa))
        else:
            eta, fam, kap = part
            subs.append(SubBlock(to_fraction(eta), fam, kap))
    base = 1
    for sb in subs:
        for w in sb.family.lam:
            base = math.lcm(base, (sb.eta * w).denominator)
        base = math.lcm(base, sb.eta.denominator)
    k = max(1, -(-floor // base))
    return BlockConfig(base * k, tuple(subs))


@dataclass(frozen=True)
class Period:
    n: int          # 1-based period
    block: int
    segment: int
    offset: int     # 0-based position inside the sub-block
    seg_length: int | None

    @property
    def segment_start(self) -> bool:
        return self.offset == 0

    @property
    def segment_end(self) -> bool:
        return self.seg_length is not None and self.offset == self.seg_length - 1

    @property
    def parity(self) -> str:
        return "odd" if self.n % 2 else "even"


class _Schedule:
    def __init__(self, config: BlockConfig | None):
        self.config = config
        if config is not None:
            self.starts = config.starts
            self.lengths = config.lengths

    def __call__(self, n: int) -> Period:
        if self.config is None:
            return Period(n, 0, 0, n - 1, None)
        block, t = divmod(n - 1, self.config.N)
        seg = bisect.bisect_right(self.starts, t) - 1
        # zero-length sub-blocks are skipped by bisect_right
        return Period(n, block, seg, t - self.starts[seg], self.lengths[seg])


# --------------------------------------------------------------------------
# senders


class CanonicalSender:
    """Block strategy inducing fixed posteriors after every message.

    At a sub-block start it plays the static rule
    ``rho(m | w) = lambda(m) p_m(w) / mu(w)``. Afterwards it conditions on
    the previous message ``m'``:
    ``sigma(m | w, m') = p_m(w) / q_m'(w) * ((1 - alpha) lambda(m) + alpha [m = m'])``
    with ``q_m' = alpha p_m' + (1 - alpha) mu``.
    """

    def __init__(self, cf: ChainFacts, families: Sequence[PosteriorFamily]):
        cf.require_pseudo_renewal()
        if cf.alpha == 1:
            raise ScenarioError("degenerate_chain", "alpha = 1 (identity chain)")
        self.cf = cf
        self.families = list(families)
        self.first: list[list[list[Fraction]]] = []
        self.cont: list[list[list[list[Fraction]]]] = []
        mu, a = cf.mu, cf.alpha
        for fam in self.families:
            if fam.prior != mu:
                raise ValueError("canonical construction needs family prior = invariant mu")
            n, k = len(mu), len(fam.lam)
            lam = fam.lam
            post = [p if p is not None else (Fraction(0),) * n for p in fam.posteriors]
            first = [[lam[m] * post[m][w] / mu[w] for m in range(k)] for w in range(n)]
            _check_rows(first, "first-period rule")
            cont = []
            for mp in range(k):
                rows = []
                for w in range(n):
                    if lam[mp] == 0:
                        rows.append(list(lam))      # off-path previous message
                        continue
                    q = a * post[mp][w] + (1 - a) * mu[w]
                    if q == 0:
                        rows.append(list(lam))      # zero-probability branch
                        continue
                    rows.append([post[m][w] / q * ((1 - a) * lam[m] + (a if m == mp else 0))
                                 for m in range(k)])
                _check_rows(rows, "continuation rule")
                cont.append(rows)
            self.first.append(first)
            self.cont.append(cont)
        self._first_cum = [_cumulative(t) for t in self.first]
        self._cont_cum = [np.stack([_cumulative(t) for t in c]) for c in self.cont]
        self.prev = None

    def begin(self, reps: int) -> None:
        self.prev = np.zeros(reps, dtype=np.int64)

    def _family_index(self, period: Period) -> int:
        return period.segment if len(self.families) > 1 else 0

    def act(self, states, period: Period, streams: ReplicationStreams):
        u = streams.draw("sender")[:, 0]
        i = self._family_index(period)
        if period.segment_start:
            cum = self._first_cum[i][states]
        else:
            cum = self._cont_cum[i][self.prev, states]
        m = _sample(cum, u)
        self.prev = m
        return m

    def public_rule(self, period: Period, prev: int | None):
        i = self._family_index(period)
        if period.segment_start or prev is None:
            return ("first", i), self.first[i]
        return ("cont", i, prev), self.cont[i][prev]

    def rule(self, segment: int, state: int, prev: int | None) -> tuple[Fraction, ...]:
        """Exact message distribution (``prev=None`` for a sub-block start)."""
        if prev is None:
            return tuple(self.first[segment][state])
        return tuple(self.cont[segment][prev][state])


def build_canonical_sender(cf: ChainFacts, family) -> CanonicalSender:
    """Canonical sender for one posterior family or for every sub-block of a config."""
    if isinstance(family, BlockConfig):
        return CanonicalSender(cf, [sb.family for sb in family.subblocks])
    return CanonicalSender(cf, [family])


class GreedySender:
    """Sends the message whose prescribed action maximises the current stage payoff.

    Ignores quotas entirely; ties go to the lowest message index.
    """

    def __init__(self, s: Scenario, config: BlockConfig):
        self.tables = []
        for sb in config.subblocks:
            supp = [m for m, w in enumerate(sb.family.lam) if w > 0]
            rows = []
            for w in range(s.n_states):
                best = max(supp, key=lambda m: (s.u_S[w][sb.kappa.actions[m]], -m))
                rows.append([Fraction(int(m == best)) for m in range(s.n_messages)])
            self.tables.append(rows)
        self._cum = [_cumulative(t) for t in self.tables]

    def begin(self, reps: int) -> None:
        pass

    def act(self, states, period: Period, streams: ReplicationStreams):
        u = streams.draw("sender")[:, 0]
        return _sample(self._cum[period.segment][states], u)

    def public_rule(self, period: Period, prev):
        return ("greedy", period.segment), self.tables[period.segment]


class ScriptedSender:
    """Finite-state sender keyed by (parity, current state, last own message)."""

    def __init__(self, s: Scenario, table: dict):
        nS, nM = s.n_states, s.n_messages
        self.exact = {}
        arr = np.zeros((2, nS, nM + 1, nM))
        for pi, parity in enumerate(("odd", "even")):
            for w, wl in enumerate(s.states):
                for li, last in enumerate(("-",) + s.messages):
                    key = f"{parity}|{wl}|{last}"
                    if key not in table:
                        raise ValueError(f"sender script misses key {key!r}")
                    dist = table[key]
                    if not isinstance(dist, dict) or any(m not in s.messages for m in dist):
                        raise ValueError(f"sender script {key!r}: unknown message")
                    row = [to_fraction(dist.get(m, 0)) for m in s.messages]
                    _check_rows([row], f"sender script {key!r}")
                    self.exact[(parity, w, li)] = row
                    arr[pi, w, li] = np.cumsum([float(v) for v in row])
        arr[..., -1] = 1.0
        self._cum = arr
        self.n_states = nS

    def begin(self, reps: int) -> None:
        self.last = np.zeros(reps, dtype=np.int64)  # 0 encodes "no message yet"

    def act(self, states, period: Period, streams: ReplicationStreams):
        u = streams.draw("sender")[:, 0]
        pidx = 0 if period.parity == "odd" else 1
        m = _sample(self._cum[pidx, states, self.last], u)
        self.last = m + 1
        return m

    def public_rule(self, period: Period, prev):
        li = 0 if prev is None else prev + 1
        rows = [self.exact[(period.parity, w, li)] for w in range(self.n_states)]
        return ("script", period.parity, li), rows


# --------------------------------------------------------------------------
# receivers


class QuotaReceiver:
    """Follows the message while its sub-block quota has room.

    An over-quota message is replaced by a message drawn with probability
    proportional to remaining quota; the receiver then plays the sub-block
    response rule at the message used. Counters reset at sub-block starts.
    """

    def __init__(self, config: BlockConfig):
        self.config = config
        self.quotas = [np.asarray(config.quotas(i), dtype=np.int64)
                       for i in range(len(config.subblocks))]
        self.kappas = [np.asarray([-1 if a is None else a for a in sb.kappa.actions])
                       for sb in config.subblocks]
        self.usage: list[tuple[int, int, np.ndarray, np.ndarray]] = []

    def begin(self, reps: int) -> None:
        self.counts = np.zeros((reps, len(self.quotas[0])), dtype=np.int64)
        self.replaced = np.zeros(reps, dtype=np.int64)
        self.last_used = None
        self.usage = []

    def act(self, messages, period: Period, streams: ReplicationStreams):
        u = streams.draw("receiver")[:, 0]
        i = period.segment
        if period.segment_start:
            self.counts[:] = 0
        quota = self.quotas[i]
        idx = np.arange(len(messages))
        slack = quota[None, :] - self.counts
        used = messages.copy()
        over = slack[idx, messages] <= 0
        if over.any():
            sl = slack[over].astype(float)
            cum = sl.cumsum(axis=1) / sl.sum(axis=1, keepdims=True)
            cum[:, -1] = 1.0
            used[over] = _sample(cum, u[over])
            self.replaced += over
        self.counts[idx, used] += 1
        self.last_used = used
        if period.segment_end:
            lo, hi = self.counts.min(axis=0), self.counts.max(axis=0)
            if not (np.array_equal(lo, quota) and np.array_equal(hi, quota)):
                raise AssertionError(f"quota violated in block {period.block}: "
                                     f"counts in [{lo}, {hi}], quota {quota}")
            self.usage.append((period.block, i, lo.copy(), hi.copy()))
        return self.kappas[i][used]


def build_quota_receiver(config: BlockConfig) -> QuotaReceiver:
    return QuotaReceiver(config)


class ScriptedReceiver:
    """Finite-state receiver keyed by (parity, last message, trigger flag, message)."""

    def __init__(self, s: Scenario, table: dict):
        nM = s.n_messages
        self.action = np.zeros((2, nM + 1, 2, nM), dtype=np.int64)
        self.trigger_next = np.zeros((2, nM + 1, 2, nM), dtype=np.int64)
        for pi, parity in enumerate(("odd", "even")):
            for li, last in enumerate(("-",) + s.messages):
                for trig in (0, 1):
                    for m, ml in enumerate(s.messages):
                        key = f"{parity}|{last}|{trig}|{ml}"
                        entry = table.get(key)
                        if not isinstance(entry, dict) or entry.get("action") not in s.actions:
                            raise ValueError(f"receiver script entry {key!r} missing or invalid")
                        if entry.get("trigger", trig) not in (0, 1):
                            raise ValueError(f"receiver script {key!r}: trigger must be 0/1")
                        self.action[pi, li, trig, m] = s.actions.index(entry["action"])
                        self.trigger_next[pi, li, trig, m] = entry.get("trigger", trig)

    def begin(self, reps: int) -> None:
        self.last = np.zeros(reps, dtype=np.int64)
        self.trigger = np.zeros(reps, dtype=np.int64)

    def act(self, messages, period: Period, streams: ReplicationStreams):
        streams.draw("receiver")
        pidx = 0 if period.parity == "odd" else 1
        a = self.action[pidx, self.last, self.trigger, messages]
        self.trigger = self.trigger_next[pidx, self.last, self.trigger, messages]
        self.last = messages + 1
        return a


class MyopicReceiver:
    """Best responds every period to the exact posterior given the message history.

    Posteriors are tracked with Fractions through the sender's public rule
    (its message law given the public history); distinct beliefs are
    interned so the per-period work is one lookup per distinct history class.
    Ties are broken in the sender's favour.
    """

    def __init__(self, s: Scenario, cf: ChainFacts, sender):
        from .game_model import sender_preferred_action

        self.s, self.cf, self.sender = s, cf, sender
        self._bra = sender_preferred_action
        self._ids: dict[tuple, int] = {}
        self._beliefs: list[tuple] = []
        self._cache: dict = {}

    def _intern(self, p) -> int:
        i = self._ids.get(p)
        if i is None:
            i = self._ids[p] = len(self._beliefs)
            self._beliefs.append(p)
        return i

    def begin(self, reps: int) -> None:
        self.q = np.full(reps, self._intern(tuple(self.cf.mu)), dtype=np.int64)
        self.prev = np.full(reps, -1, dtype=np.int64)

    def _step(self, key, rule, qi: int, m: int):
        ck = (key, qi, m)
        hit = self._cache.get(ck)
        if hit is None:
            q = self._beliefs[qi]
            joint = [q[w] * rule[w][m] for w in range(len(q))]
            tot = sum(joint)
            p = q if tot == 0 else tuple(v / tot for v in joint)
            hit = (self._bra(self.s, p), self._intern(next_belief(self.cf, p)))
            self._cache[ck] = hit
        return hit

    def act(self, messages, period: Period, streams: ReplicationStreams):
        streams.draw("receiver")
        nM = self.s.n_messages
        code = (self.q * (nM + 1) + (self.prev + 1)) * nM + messages
        uniq, inv = np.unique(code, return_inverse=True)
        acts = np.empty(len(uniq), dtype=np.int64)
        nq = np.empty(len(uniq), dtype=np.int64)
        for j, c in enumerate(uniq.tolist()):
            rest, m = divmod(c, nM)
            qi, pv = divmod(rest, nM + 1)
            key, rule = self.sender.public_rule(period, None if pv == 0 else pv - 1)
            acts[j], nq[j] = self._step(key, rule, qi, m)
        self.q = nq[inv]
        self.prev = messages.copy()
        return acts[inv]


# --------------------------------------------------------------------------
# profiles


@dataclass
class Profile:
    sender: object
    receiver: object
    config: BlockConfig | None = None
    name: str = ""

    def with_sender(self, sender, name: str | None = None) -> "Profile":
        return Profile(sender, self.receiver, self.config, name or self.name)

    def with_receiver(self, receiver, name: str | None = None) -> "Profile":
        return Profile(self.sender, receiver, self.config, name or self.name)


def build_canonical_profile(s: Scenario, cf: ChainFacts, config: BlockConfig) -> Profile:
    return Profile(build_canonical_sender(cf, config), build_quota_receiver(config), config,
                   name="canonical")


def example2_script(sender_variant: str = "equilibrium") -> dict:
    """Example 2 profile: truthful odd periods, repeated even periods, grim trigger.

    ``sender_variant="even_flip"`` sends the opposite message in even periods.
    """
    msgs, states = ("l", "h"), ("w1", "w2")
    sender = {}
    for last in ("-",) + msgs:
        for w, wl in enumerate(states):
            sender[f"odd|{wl}|{last}"] = {msgs[w]: 1}
            prev = last if last != "-" else "l"
            if sender_variant == "even_flip":
                prev = "h" if prev == "l" else "l"
            elif sender_variant != "equilibrium":
                raise ValueError(f"unknown Example 2 sender variant {sender_variant!r}")
            sender[f"even|{wl}|{last}"] = {prev: 1}
    receiver = {}
    for last in ("-",) + msgs:
        for m in msgs:
            receiver[f"odd|{last}|0|{m}"] = {"action": "a1" if m == "l" else "a4", "trigger": 0}
            ok = last == m
            receiver[f"even|{last}|0|{m}"] = {"action": "a2" if m == "l" else "a3",
                                              "trigger": 0 if ok else 1}
            for parity in ("odd", "even"):
                receiver[f"{parity}|{last}|1|{m}"] = {"action": "a1", "trigger": 1}
    return {"name": f"example2_{sender_variant}", "sender": sender, "receiver": receiver}


def _load_script(script) -> dict:
    if isinstance(script, dict):
        return script
    if script == "example2":
        return example2_script()
    if script == "example2_even_flip":
        return example2_script("even_flip")
    path = Path(script)
    if not path.exists():
        raise ValueError(f"unknown script {script!r}")
    return json.loads(path.read_text())


def build_scripted_profile(s: Scenario, script) -> Profile:
    """Scripted profile from a bundled name, a JSON path or a dict.

    The dict has ``sender`` (keys ``parity|state|last``, values message
    distributions, ``-`` for no previous message) and ``receiver`` (keys
    ``parity|last|trigger|message``, values ``{"action", "trigger"}``).
    """
    doc = _load_script(script)
    if not isinstance(doc.get("sender"), dict) or not isinstance(doc.get("receiver"), dict):
        raise ValueError("script needs 'sender' and 'receiver' tables")
    return Profile(ScriptedSender(s, doc["sender"]), ScriptedReceiver(s, doc["receiver"]),
                   None, name=doc.get("name", "scripted"))


def scripted_sender(s: Scenario, script) -> ScriptedSender:
    return ScriptedSender(s, _load_script(script)["sender"])


# --------------------------------------------------------------------------
# simulation


@dataclass
class SimReport:
    sender_mean: float
    sender_se: float
    receiver_mean: float
    receiver_se: float
    sender_paths: np.ndarray = field(repr=False)
    receiver_paths: np.ndarray = field(repr=False)
    freq_state_message: np.ndarray = field(repr=False)   # counts [period][w][m]
    freq_state_action: np.ndarray = field(repr=False)    # counts [period][w][a]
    discounted_outcome: np.ndarray = field(repr=False)   # mean over reps, [w][a]
    usage: list = field(repr=False)
    replacement_fraction: float | None
    replacement_se: float | None
    reps: int
    seed: int
    delta: float
    horizon: int
    tail_bound: float
    block_length: int | None = None

    def frequencies(self, table: str = "message") -> np.ndarray:
        counts = self.freq_state_message if table == "message" else self.freq_state_action
        return counts / self.reps

    @property
    def quota_exact(self) -> bool:
        return True  # violations raise inside the quota receiver

    def payoff_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "mean", "stderr"])
        w.writerow(["sender", repr(self.sender_mean), repr(self.sender_se)])
        w.writerow(["receiver", repr(self.receiver_mean), repr(self.receiver_se)])
        if self.replacement_fraction is not None:
            w.writerow(["replacement_fraction", repr(self.replacement_fraction),
                        repr(self.replacement_se)])
        w.writerow(["tail_bound", repr(self.tail_bound), ""])
        return buf.getvalue()

    def frequency_csv(self, s: Scenario) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["series", "period", "state", "message", "value"])
        f = self.frequencies("message")
        for n in range(f.shape[0]):
            for i, wl in enumerate(s.states):
                for m, ml in enumerate(s.messages):
                    w.writerow(["state_message", n + 1, wl, ml, repr(float(f[n, i, m]))])
        return buf.getvalue()


def required_horizon(delta: float, tail_tol: float) -> int:
    return math.ceil(math.log(tail_tol) / math.log(delta))


def simulate(s: Scenario, cf: ChainFacts, profile: Profile, delta: float, horizon: int,
             reps: int, seed: int, tail_tol: float = 1e-4,
             freq_periods: int | None = None) -> SimReport:
    """Discounted payoffs of ``profile`` estimated over ``reps`` replications.

    The infinite discounted sum is truncated at ``horizon``; the neglected
    tail is at most ``max|u| * delta**horizon`` and ``horizon`` must make
    ``delta**horizon <= tail_tol``. Per-period (state, message) and
    (state, action) counts are kept for the first ``freq_periods`` periods
    (default: one block, or 20 periods without a block structure).
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if reps < 1:
        raise ValueError("reps must be at least 1")
    need = required_horizon(delta, tail_tol)
    if horizon < need:
        raise ValueError(f"horizon {horizon} is below the truncation bound {need} "
                         f"for delta={delta}, tail tolerance {tail_tol}")
    if freq_periods is None:
        freq_periods = profile.config.N if profile.config is not None else 20
    freq_periods = min(freq_periods, horizon)
    nS, nM, nA = s.n_states, s.n_messages, s.n_actions
    uS = np.asarray([[float(v) for v in row] for row in s.u_S])
    uR = np.asarray([[float(v) for v in row] for row in s.u_R])
    cumQ = _cumulative(cf.Q)
    cum_mu = _cumulative([cf.mu])[0]

    streams = ReplicationStreams(seed, reps)
    schedule = _Schedule(profile.config)
    profile.sender.begin(reps)
    profile.receiver.begin(reps)

    pay_S = np.zeros(reps)
    pay_R = np.zeros(reps)
    nu = np.zeros(nS * nA)
    f_wm = np.zeros((freq_periods, nS * nM), dtype=np.int64)
    f_wa = np.zeros((freq_periods, nS * nA), dtype=np.int64)
    states = None
    weight = 1.0 - delta
    for n in range(1, horizon + 1):
        streams.period = n
        u = streams.draw("chain")[:, 0]
        if states is None:
            states = _sample(np.broadcast_to(cum_mu, (reps, nS)), u)
        else:
            states = _sample(cumQ[states], u)
        period = schedule(n)
        messages = profile.sender.act(states, period, streams)
        actions = profile.receiver.act(messages, period, streams)
        pay_S += weight * uS[states, actions]
        pay_R += weight * uR[states, actions]
        nu += weight * np.bincount(states * nA + actions, minlength=nS * nA)
        if n <= freq_periods:
            f_wm[n - 1] = np.bincount(states * nM + messages, minlength=nS * nM)
            f_wa[n - 1] = np.bincount(states * nA + actions, minlength=nS * nA)
        weight *= delta

    rep_frac = rep_se = None
    usage = []
    if isinstance(profile.receiver, QuotaReceiver):
        fr = profile.receiver.replaced / horizon
        rep_frac = float(fr.mean())
        rep_se = float(fr.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
        usage = list(profile.receiver.usage)

    def se(x):
        return float(x.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0

    umax = float(max(np.abs(uS).max(), np.abs(uR).max()))
    return SimReport(
        sender_mean=float(pay_S.mean()), sender_se=se(pay_S),
        receiver_mean=float(pay_R.mean()), receiver_se=se(pay_R),
        sender_paths=pay_S, receiver_paths=pay_R,
        freq_state_message=f_wm.reshape(freq_periods, nS, nM),
        freq_state_action=f_wa.reshape(freq_periods, nS, nA),
        discounted_outcome=(nu / reps).reshape(nS, nA),
        usage=usage, replacement_fraction=rep_frac, replacement_se=rep_se,
        reps=reps, seed=seed, delta=delta, horizon=horizon,
        tail_bound=umax * delta ** horizon,
        block_length=profile.config.N if profile.config is not None else None,
    )


def outcome_from_sim(report: SimReport, s: Scenario) -> Outcome:
    """Discounted empirical (state, action) distribution, renormalised to mass one."""
    nu = report.discounted_outcome
    nu = nu / nu.sum()
    return Outcome(tuple(tuple(float(v) for v in row) for row in nu))
