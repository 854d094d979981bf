from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import scenario
from persuasion_lab.envelopes import cav_u, quasicav_u, simplex_grid
from persuasion_lab.game_model import as_belief, bundled_scenario, indirect_utility

EX1 = bundled_scenario("example1")
EX2 = bundled_scenario("example2")


def split_dict(env):
    return {p[1]: w for p, w in zip(env.split.posteriors, env.split.weights)}


def test_example1_cav():
    env = cav_u(EX1, F(1, 2))
    assert env.value == F(5, 3) and env.exact
    assert split_dict(env) == {F(0): F(1, 3), F(3, 4): F(2, 3)}


def test_degenerate_prior():
    assert cav_u(EX1, 0).value == indirect_utility(EX1, 0) == 1


def test_example2_cav():
    env = cav_u(EX2, F(1, 2))
    assert env.value == 1
    assert split_dict(env) == {F(0): F(1, 2), F(1): F(1, 2)}


def test_quasicav_examples():
    assert quasicav_u(EX1, F(1, 2)) == 1
    assert quasicav_u(EX1, F(4, 5)) == 2
    flat = scenario([[3, 3], [3, 3]], [[1, 0], [0, 1]])
    for p in (0, F(1, 3), 1):
        assert quasicav_u(flat, p) == 3 == cav_u(flat, p).value


def test_quasicav_needs_two_states():
    s = scenario([[0], [0], [0]], [[0], [0], [0]], messages=("m",))
    with pytest.raises(ValueError):
        quasicav_u(s, (F(1, 3),) * 3)


payoff = st.integers(-4, 4)
probs = st.fractions(min_value=0, max_value=1, max_denominator=16)


@st.composite
def binary_games(draw):
    k = draw(st.integers(1, 4))
    uS = [[draw(payoff) for _ in range(k)] for _ in range(2)]
    uR = [[draw(payoff) for _ in range(k)] for _ in range(2)]
    return scenario(uS, uR, messages=tuple(f"m{i}" for i in range(max(2, k))))


@settings(max_examples=60, deadline=None)
@given(binary_games(), probs)
def test_sandwich_and_split(s, pi):
    env = cav_u(s, pi)
    assert indirect_utility(s, pi) <= env.value
    if all(s.u_S[0][a] == s.u_S[1][a] for a in range(s.n_actions)):
        qc = quasicav_u(s, pi)
        assert indirect_utility(s, pi) <= qc <= env.value
    assert env.split.mean() == as_belief(s, pi)
    mix = sum(w * indirect_utility(s, p) for p, w in zip(env.split.posteriors, env.split.weights))
    assert mix == env.value


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([EX1, EX2]) | binary_games(), probs, probs,
       st.sampled_from([F(1, 4), F(1, 2), F(3, 4)]))
def test_cav_is_concave(s, p1, p2, theta):
    mid = cav_u(s, theta * p1 + (1 - theta) * p2).value
    assert mid >= theta * cav_u(s, p1).value + (1 - theta) * cav_u(s, p2).value


def test_quasicav_between_for_state_independent_example():
    for k in range(0, 21):
        pi = F(k, 20)
        assert indirect_utility(EX1, pi) <= quasicav_u(EX1, pi) <= cav_u(EX1, pi).value


def test_simplex_grid_counts():
    pts = list(simplex_grid(3, 4))
    assert len(pts) == 15 and all(sum(p) == 1 for p in pts)


def test_grid_refinement_never_decreases():
    uS = [[2, 0, 1], [0, 2, 1], [1, 1, 0]]
    uR = [[3, 0, 1], [0, 3, 1], [1, 1, 2]]
    s = scenario(uS, uR, messages=("m1", "m2", "m3"))
    pi = (F(1, 3), F(1, 3), F(1, 3))
    vals = [cav_u(s, pi, grid=g) for g in (2, 4, 8)]
    assert all(not v.exact for v in vals)
    assert vals[0].value <= vals[1].value <= vals[2].value
    assert all(v.split.mean() == pi for v in vals)
