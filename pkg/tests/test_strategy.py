import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numba import njit
from scipy import stats

from conftest import kuhn_equilibrium, random_strategy
from primesafe import engine
from primesafe.strategy import (
    EMPTY, BehavioralStrategy, expected_utility, format_strategy, from_realization_plan,
    mix_strategies, parent_sequence, parse_strategy, read_strategy, sample_hand,
    sample_hand_from_uniforms, to_realization_plan, uniform_strategy, write_strategy,
)


@njit
def _sample_many(L, b1, b2, draws):
    out = np.empty(draws.shape[0], dtype=np.int64)
    for i in range(draws.shape[0]):
        out[i] = engine.sample_terminal(L, b1, b2, draws[i])
    return out


def test_uniform_strategy_examples(kuhn, fourbet):
    u = uniform_strategy(kuhn, 1)
    for key in ("1|Q|", "1|K|", "1|A|"):
        assert list(u[key]) == [0.5, 0.5]
    u4 = uniform_strategy(fourbet, 1)
    assert list(u4["1|A|"]) == [0.2] * 5
    assert u4.actions("1|A|") == ("k", "b1", "b2", "b3", "b4")


def test_strategy_rejects_bad_vectors(kuhn):
    good = {k: [0.5, 0.5] for k in kuhn.infosets[1]}
    with pytest.raises(ValueError, match="cover exactly"):
        BehavioralStrategy(kuhn, 1, {k: v for k, v in good.items() if k != "1|A|"})
    with pytest.raises(ValueError, match="nonnegative"):
        BehavioralStrategy(kuhn, 1, {**good, "1|A|": [1.5, -0.5]})
    with pytest.raises(ValueError, match="sum"):
        BehavioralStrategy(kuhn, 1, {**good, "1|A|": [0.5, 0.5 + 1e-8]})
    with pytest.raises(ValueError):
        BehavioralStrategy(kuhn, 1, {**good, "1|A|": [1.0]})
    with pytest.raises(ValueError):
        BehavioralStrategy(kuhn, 3, good)


def test_near_normalized_vectors_are_renormalized(kuhn):
    probs = {k: [0.5, 0.5] for k in kuhn.infosets[1]}
    probs["1|A|"] = [0.3, 0.7 + 5e-10]
    s = BehavioralStrategy(kuhn, 1, probs)
    assert abs(s["1|A|"].sum() - 1.0) <= 1e-15
    exact = [0.1, 0.9]
    probs["1|A|"] = exact
    assert list(BehavioralStrategy(kuhn, 1, probs)["1|A|"]) == exact


def test_strategy_is_immutable(kuhn):
    u = uniform_strategy(kuhn, 1)
    with pytest.raises(ValueError):
        u["1|A|"][0] = 1.0


def test_minimax_pair_value(kuhn):
    for alpha in (0.0, 0.2, 1 / 3):
        s1, s2 = kuhn_equilibrium(kuhn, alpha)
        assert expected_utility(kuhn, s1, s2) == pytest.approx(-1 / 18, abs=1e-12)


def test_zero_sum_negation(kuhn):
    rng = np.random.default_rng(3)
    for _ in range(5):
        s1, s2 = random_strategy(kuhn, 1, rng), random_strategy(kuhn, 2, rng)
        assert expected_utility(kuhn, s1, s2, 2) == -expected_utility(kuhn, s1, s2, 1)


def test_expected_utility_rejects_wrong_owner(kuhn):
    u1 = uniform_strategy(kuhn, 1)
    with pytest.raises(ValueError):
        expected_utility(kuhn, u1, u1)


def test_bilinear_in_realization_plans(six):
    rng = np.random.default_rng(11)
    a, b = random_strategy(six, 1, rng), random_strategy(six, 1, rng)
    s2 = random_strategy(six, 2, rng)
    pa, pb = to_realization_plan(six, a), to_realization_plan(six, b)
    ua, ub = expected_utility(six, a, s2), expected_utility(six, b, s2)
    for lam in (0.0, 0.5, 1.0):
        mixed = from_realization_plan(six, {q: lam * pa[q] + (1 - lam) * pb[q] for q in pa}, 1)
        assert expected_utility(six, mixed, s2) == pytest.approx(lam * ua + (1 - lam) * ub, abs=1e-12)


def test_sample_hand_determinism_and_theta(kuhn):
    s1, s2 = uniform_strategy(kuhn, 1), uniform_strategy(kuhn, 2)
    a = [sample_hand(kuhn, s1, s2, np.random.default_rng(5)) for _ in range(3)]
    assert a[0] == a[1] == a[2]
    rng = np.random.default_rng(0)
    folds = [h for h in (sample_hand(kuhn, s1, s2, rng) for _ in range(500)) if h.actions[-1] == "f"]
    assert folds
    for h in folds:
        assert h.theta == h.deal[1]
        assert kuhn.walk(h.deal, h.actions).utility == h.utility


def test_compiled_sampler_matches_object_sampler(six):
    rng = np.random.default_rng(2)
    s1, s2 = random_strategy(six, 1, rng, 0.5), random_strategy(six, 2, rng, 0.5)
    cg = engine.compile_game(six)
    b1, b2 = cg.behavior_vector(s1), cg.behavior_vector(s2)
    draws = rng.random((2000, six.max_depth))
    for d in draws:
        hand = sample_hand_from_uniforms(six, s1, s2, d)
        assert cg.term_nodes[engine.sample_terminal(cg.layout, b1, b2, d)] == hand.terminal


def test_deal_frequencies_chi_square(kuhn):
    # the compiled sampler draws exactly like sample_hand (checked above)
    cg = engine.compile_game(kuhn)
    u1 = cg.behavior_vector(uniform_strategy(kuhn, 1))
    u2 = cg.behavior_vector(uniform_strategy(kuhn, 2))
    draws = np.random.default_rng(7).random((1_000_000, kuhn.max_depth))
    terms = _sample_many(cg.layout, u1, u2, draws)
    deal_of = np.array([3 * kuhn.node(int(n)).deal[0] + kuhn.node(int(n)).deal[1] for n in cg.term_nodes])
    _, counts = np.unique(deal_of[terms], return_counts=True)
    assert len(counts) == 6 and counts.sum() == 1_000_000
    assert stats.chisquare(counts).pvalue > 0.01


def test_sampling_consistency(six):
    rng = np.random.default_rng(4)
    s1, s2 = random_strategy(six, 1, rng), random_strategy(six, 2, rng)
    exact = expected_utility(six, s1, s2)
    cg = engine.compile_game(six)
    b1, b2 = cg.behavior_vector(s1), cg.behavior_vector(s2)
    draws = np.random.default_rng(9).random((1_000_000, six.max_depth))
    u = cg.layout.term_u[_sample_many(cg.layout, b1, b2, draws)]
    se = u.std(ddof=1) / np.sqrt(len(u))
    assert abs(u.mean() - exact) <= 3 * se


def test_realization_plan_examples(kuhn):
    plan = to_realization_plan(kuhn, uniform_strategy(kuhn, 1))
    assert plan[EMPTY] == 1.0
    for card in "QKA":
        assert plan[(f"1|{card}|", "b1")] == 0.5
        assert plan[(f"1|{card}|k,b1", "c")] == 0.25
    assert parent_sequence(kuhn, "1|K|k,b1") == ("1|K|", "k")
    assert parent_sequence(kuhn, "2|K|b1") == EMPTY


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["kuhn", "fourbet"]), st.sampled_from([1, 2]))
def test_plan_flow_and_round_trip(request_trees, seed, name, player):
    tree = request_trees[name]
    s = random_strategy(tree, player, np.random.default_rng(seed))
    plan = to_realization_plan(tree, s)
    assert plan[EMPTY] == 1.0
    for key, info in tree.infosets[player].items():
        parent = plan[parent_sequence(tree, key)]
        assert sum(plan[(key, a)] for a in info.actions) == pytest.approx(parent, abs=1e-12)
        assert all(plan[(key, a)] >= 0 for a in info.actions)
    back = to_realization_plan(tree, from_realization_plan(tree, plan, player))
    for q, w in plan.items():
        assert back[q] == pytest.approx(w, abs=1e-12)


@pytest.fixture(scope="module")
def request_trees(kuhn, fourbet):
    return {"kuhn": kuhn, "fourbet": fourbet}


def test_unreached_infosets_become_uniform(kuhn):
    probs = {k: [0.5, 0.5] for k in kuhn.infosets[1]}
    probs["1|A|"] = [0.0, 1.0]
    s = from_realization_plan(kuhn, to_realization_plan(kuhn, BehavioralStrategy(kuhn, 1, probs)), 1)
    assert list(s["1|A|k,b1"]) == [0.5, 0.5]


def test_mix_strategies(kuhn):
    a, b = kuhn_equilibrium(kuhn)[1], uniform_strategy(kuhn, 2)
    m = mix_strategies(kuhn, a, b, 0.2)
    assert m["2|A|b1"] == pytest.approx([0.9, 0.1], abs=1e-15)


def test_text_format(kuhn, tmp_path):
    rng = np.random.default_rng(1)
    s1, s2 = random_strategy(kuhn, 1, rng), random_strategy(kuhn, 2, rng)
    text = format_strategy([s2, s1])
    lines = text.splitlines()
    assert lines == sorted(lines) and len(lines) == 12
    key, cell, _ = lines[0].split(" ")
    assert key == "1|A|"
    action, prob = cell.split(":")
    assert action == "k" and prob == f"{s1['1|A|'][0]:.12g}"
    write_strategy(tmp_path / "s.txt", s1, s2)
    loaded = read_strategy(kuhn, tmp_path / "s.txt")
    for orig in (s1, s2):
        for k in orig:
            assert np.allclose(loaded[orig.player][k], orig[k], atol=1e-11, rtol=0)
    buf = io.StringIO()
    write_strategy(buf, s1)
    assert set(parse_strategy(kuhn, buf.getvalue())) == {1}


def test_text_format_rejects_malformed(kuhn):
    text = format_strategy([uniform_strategy(kuhn, 1)])
    with pytest.raises(ValueError, match="unknown infoset"):
        parse_strategy(kuhn, text + "1|Z| k:1 b1:0\n")
    with pytest.raises(ValueError, match="actions"):
        parse_strategy(kuhn, text.replace("b1:0.5", "b2:0.5", 1))
    with pytest.raises(ValueError, match="sum"):
        parse_strategy(kuhn, text.replace("k:0.5", "k:0.6", 1))
