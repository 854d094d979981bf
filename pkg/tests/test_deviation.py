import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import pseudo_renewal_Q, scenario
from persuasion_lab.deviation_lab import (
    Copula,
    DeviationReport,
    apply_copula,
    copula_robustness,
    copula_value,
    epsilon_gain,
    fictitious_state_stream,
    marginal_preserving_deviation,
    obedience_residuals,
    reports_csv,
)
from persuasion_lab.dynamic_engine import (
    build_canonical_profile,
    build_scripted_profile,
    make_block_config,
    simulate,
)
from persuasion_lab.game_model import bundled_scenario, validate_scenario
from persuasion_lab.static_pc import (
    Outcome,
    PosteriorFamily,
    ResponseRule,
    enumerate_equilibria,
    payoff_hull,
)

EX1 = bundled_scenario("example1")
EX2 = bundled_scenario("example2")
CF1 = validate_scenario(EX1)
CF2 = validate_scenario(EX2)
HALF = (F(1, 2), F(1, 2))
EX2_LIMIT = Outcome(((F(1, 4), F(1, 6), F(1, 12), F(0)), (F(0), F(1, 12), F(1, 6), F(1, 4))))


def bad_family():
    return PosteriorFamily.build(EX2, HALF, (F(1, 4), F(3, 4)), [F(0), F(2, 3)])


def bad_outcome():
    return Outcome.from_family(EX2, bad_family(), ResponseRule.pure(EX2, ["a1", "a3"]))


# --------------------------------------------------------------------------
# obedience


def test_obedience_single_cell():
    nu = Outcome(((0, 0, 0, 1), (0, 0, 0, 0)))
    worst, table = obedience_residuals(EX2, nu)
    assert worst == 8 and table[(3, 0)] == -8


def test_obedience_of_equilibrium_outcomes():
    for rec in enumerate_equilibria(EX1, HALF, (F(1, 3), F(2, 3))):
        assert obedience_residuals(EX1, Outcome.from_family(EX1, rec.witness, rec.kappa))[0] == 0
    assert obedience_residuals(EX2, EX2_LIMIT)[0] == 0


# --------------------------------------------------------------------------
# copulas


def test_copula_validation():
    with pytest.raises(ValueError):
        Copula(((F(1, 2), 0), (F(1, 4), F(1, 4))))
    with pytest.raises(ValueError):
        Copula(((1, -1), (-1, 1)))
    with pytest.raises(ValueError):
        Copula(((1, 0),))
    assert Copula.independence(HALF).c == ((F(1, 4), F(1, 4)), (F(1, 4), F(1, 4)))


def test_babbling_is_copula_proof():
    nu = Outcome(((0, 0, F(1, 2)), (0, 0, F(1, 2))))
    rep, _ = copula_robustness(EX1, nu, HALF)
    assert rep.gain == 0 and rep.exact


def test_bad_static_outcome_gains_three_quarters():
    nu = bad_outcome()
    assert nu.value(EX2.u_S) == 0
    rep, cop = copula_robustness(EX2, nu, HALF)
    assert rep.best == F(3, 4) and rep.gain == F(3, 4)
    assert cop == Copula.swap(HALF)
    assert copula_value(EX2, nu, Copula.swap(HALF)) == F(3, 4)


def test_example2_limit_outcome_is_copula_proof():
    rep, cop = copula_robustness(EX2, EX2_LIMIT, HALF)
    assert rep.baseline == F(1, 3) and rep.gain == 0 and cop == Copula.identity(HALF)
    assert copula_value(EX2, EX2_LIMIT, Copula.swap(HALF)) == F(1, 6)


def test_marginal_mismatch_rejected():
    nu = Outcome(((0, 0, F(1, 4)), (0, 0, F(3, 4))))
    with pytest.raises(ValueError):
        copula_robustness(EX1, nu, HALF)
    with pytest.raises(ValueError):
        apply_copula(nu, Copula.identity(HALF))


def test_zero_mass_states_dropped():
    nu = Outcome(((0, 0, 0), (F(1, 2), F(1, 2), 0)))
    rep, cop = copula_robustness(EX1, nu)
    assert rep.gain == 0 and cop.c == ((0, 0), (0, 1))


outcome_cells = st.lists(st.fractions(0, 1, max_denominator=6), min_size=8, max_size=8)


@settings(max_examples=50, deadline=None)
@given(outcome_cells)
def test_copula_optimum_is_a_vertex_and_dominates(cells):
    a, b = cells[:4], cells[4:]
    if sum(a) == 0 or sum(b) == 0:
        return
    a = [v / (2 * sum(a)) for v in a]
    b = [v / (2 * sum(b)) for v in b]
    nu = Outcome((tuple(a), tuple(b)))
    rep, cop = copula_robustness(EX2, nu, HALF)
    ident = copula_value(EX2, nu, Copula.identity(HALF))
    swap = copula_value(EX2, nu, Copula.swap(HALF))
    # with two equally likely states the copula polytope is a segment
    assert rep.best == max(ident, swap)
    assert rep.baseline == ident and rep.gain >= 0
    assert apply_copula(nu, Copula.identity(HALF)) == nu
    moved = apply_copula(nu, cop)
    assert [sum(r) for r in moved.nu] == [F(1, 2), F(1, 2)]
    assert [sum(c) for c in zip(*moved.nu)] == [sum(c) for c in zip(*nu.nu)]


# --------------------------------------------------------------------------
# fictitious states


def _path(cf, n, seed):
    rng = np.random.default_rng(seed)
    mu = np.asarray([float(v) for v in cf.mu])
    B = float(cf.B)
    w = np.empty(n, dtype=np.int64)
    w[0] = rng.choice(len(mu), p=mu)
    for i in range(1, n):
        w[i] = rng.choice(len(mu), p=mu) if rng.random() < B else w[i - 1]
    return w


def test_identity_and_swap_streams():
    states = _path(CF2, 500, 1)
    assert np.array_equal(fictitious_state_stream(CF2, Copula.identity(HALF), states), states)
    assert np.array_equal(fictitious_state_stream(CF2, Copula.swap(HALF), states), 1 - states)


def test_independent_stream_is_a_fresh_copy():
    n = 40_000
    states = _path(CF2, n, 2)
    xi = fictitious_state_stream(CF2, Copula.independence(HALF), states, seed=3)
    joint = np.array([[np.mean((states == w) & (xi == x)) for x in range(2)] for w in range(2)])
    B = float(CF2.B)
    se = math.sqrt(0.25 * 0.75 / n * (2 - B) / B) * 2
    assert np.all(np.abs(joint - 0.25) < 4 * se)
    # xi follows the same chain: it changes only when w renews
    flips = np.mean(xi[1:] != xi[:-1])
    assert abs(flips - B / 2) < 0.02


def test_stream_requirements():
    s = scenario([[1, 0], [0, 1]], [[1, 0], [0, 1]], Q=[["1/10", "9/10"], ["9/10", "1/10"]])
    cf = validate_scenario(s)
    with pytest.raises(ValueError):
        fictitious_state_stream(cf, Copula.identity(cf.mu), [0, 1])
    third = (F(1, 3), F(2, 3))
    s2 = scenario([[1, 0], [0, 1]], [[1, 0], [0, 1]], Q=pseudo_renewal_Q(F(1, 2), third))
    with pytest.raises(ValueError):
        fictitious_state_stream(validate_scenario(s2), Copula.identity(HALF), [0, 1])


# --------------------------------------------------------------------------
# marginal-preserving deviations


def test_marginal_preserving_examples():
    rec = max(enumerate_equilibria(EX1, HALF, (F(1, 3), F(2, 3))), key=lambda r: r.sender_value)
    assert marginal_preserving_deviation(EX1, HALF, rec.witness, rec.kappa).gain == 0
    rep = marginal_preserving_deviation(EX2, HALF, bad_family(), ResponseRule.pure(EX2, ["a1", "a3"]))
    assert rep.baseline == 0 and rep.best == F(3, 4)
    # all of the high state goes to the message whose action it hurts least
    assert rep.witness == "[0 1;2/3 1/3]"
    babble = PosteriorFamily.build(EX1, HALF, HALF, [F(1, 2), F(1, 2)])
    assert marginal_preserving_deviation(EX1, HALF, babble, ResponseRule.pure(EX1, ["a0", "a0"])).gain == 0


# --------------------------------------------------------------------------
# simulated gains


def _ex1_profile(N=60):
    rec = max(enumerate_equilibria(EX1, HALF, (F(1, 3), F(2, 3))), key=lambda r: r.sender_value)
    return build_canonical_profile(EX1, CF1, make_block_config([(1, rec)], N))


def test_identity_copula_deviation_is_on_path():
    prof = _ex1_profile()
    rep = epsilon_gain(EX1, CF1, prof, "copula", copula=Copula.identity(HALF),
                       delta=0.9, horizon=100, reps=200, seed=4)
    assert rep.gain == 0 and rep.stderr == 0


def test_independent_copula_keeps_example1_payoff():
    prof = _ex1_profile()
    rep = epsilon_gain(EX1, CF1, prof, "copula", copula=Copula.independence(HALF),
                       delta=0.99, horizon=917, reps=200, seed=4)
    assert abs(rep.best - 5 / 3) < 0.02 and abs(rep.gain) < 4 * rep.stderr + 0.01


def test_even_flip_loses():
    prof = build_scripted_profile(EX2, "example2")
    rep = epsilon_gain(EX2, CF2, prof, "scripted:example2_even_flip",
                       delta=0.9, horizon=88, reps=2000, seed=1)
    assert rep.gain + 3 * rep.stderr < 0


def test_baseline_reuse_checked():
    prof = _ex1_profile()
    base = simulate(EX1, CF1, prof, 0.9, 100, 30, seed=2)
    a = epsilon_gain(EX1, CF1, prof, "greedy", delta=0.9, horizon=100, reps=30, seed=2,
                     baseline=base)
    b = epsilon_gain(EX1, CF1, prof, "greedy", delta=0.9, horizon=100, reps=30, seed=2)
    assert a == b
    with pytest.raises(ValueError):
        epsilon_gain(EX1, CF1, prof, "greedy", delta=0.9, horizon=100, reps=31, seed=2,
                     baseline=base)


def test_unknown_deviation_rejected():
    with pytest.raises(ValueError, match="unknown deviation"):
        epsilon_gain(EX1, CF1, _ex1_profile(), "teleport", delta=0.9, horizon=100,
                     reps=2, seed=0)
    with pytest.raises(ValueError):
        epsilon_gain(EX1, CF1, _ex1_profile(), "copula", delta=0.9, horizon=100,
                     reps=2, seed=0)


def test_reports_csv_format():
    exact = DeviationReport("copula", F(0), F(3, 4), F(3, 4), witness="[0 1/2;1/2 0]")
    est = DeviationReport("greedy", 1.5, 1.6, 0.1, stderr=0.01, witness="greedy")
    lines = reports_csv([exact, est]).splitlines()
    assert lines[0] == "deviation,baseline,best,gain,stderr,witness"
    assert lines[1] == "copula,0,3/4,3/4,,[0 1/2;1/2 0]"
    assert lines[2] == "greedy,1.5,1.6,0.1,0.01,greedy"


def _dist_to_polygon(p, poly):
    if len(poly) == 1:
        return math.dist(p, poly[0])
    edges = list(zip(poly, poly[1:] + poly[:1]))
    if len(poly) >= 3 and all((float(b[0]) - float(a[0])) * (p[1] - float(a[1]))
                              - (float(b[1]) - float(a[1])) * (p[0] - float(a[0])) >= 0
                              for a, b in edges):
        return 0.0
    best = math.inf
    for a, b in edges:
        ax, ay, bx, by = map(float, (*a, *b))
        dx, dy = bx - ax, by - ay
        t = 0.0 if dx == dy == 0 else max(0.0, min(1.0, ((p[0] - ax) * dx + (p[1] - ay) * dy)
                                                    / (dx * dx + dy * dy)))
        best = min(best, math.dist(p, (ax + t * dx, ay + t * dy)))
    return best


HULL1 = payoff_hull(EX1, HALF, denom=6)


@pytest.mark.parametrize("lam, labels", [
    ((F(1, 3), F(2, 3)), ("a1", "a2")),
    ((F(1, 2), F(1, 2)), ("a1", "a2")),
    ((F(1, 2), F(1, 2)), ("a0", "a0")),
    ((F(1, 3), F(2, 3)), ("a2", "a1")),
])
def test_simulated_payoffs_near_static_hull(lam, labels):
    rec = next(r for r in enumerate_equilibria(EX1, HALF, lam)
               if r.kappa.labels(EX1) == labels)
    prof = build_canonical_profile(EX1, CF1, make_block_config([(1, rec)], 600))
    rep = simulate(EX1, CF1, prof, 0.999, 10_000, 200, seed=7)
    assert _dist_to_polygon((rep.sender_mean, rep.receiver_mean), HULL1) <= 0.03
