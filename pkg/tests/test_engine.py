import numpy as np
import pytest

from conftest import random_strategy
from primesafe import engine, oracle
from primesafe.strategy import expected_utility, to_realization_plan


def _buffers(cg):
    n = int(cg.layout.n_seq.max())
    return np.empty(n), np.empty(n), np.empty(n), np.full(int(cg.layout.n_inf.max()), -1, dtype=np.int64)


def test_layout_shapes(any_tree):
    cg = engine.compile_game(any_tree)
    L = cg.layout
    assert L.term_u.shape[0] == sum(1 for _ in any_tree.terminals())
    for p in (1, 2):
        assert L.n_inf[p - 1] == len(any_tree.infosets[p])
        assert L.n_seq[p - 1] == 1 + sum(len(i.actions) for i in any_tree.infosets[p].values())
    assert L.term_w.sum() == pytest.approx(sum(n.utility for n in any_tree.terminals()) / any_tree.num_deals)
    assert engine.compile_game(any_tree) is cg


def test_plan_matches_realization_plan(any_tree):
    cg = engine.compile_game(any_tree)
    rng = np.random.default_rng(0)
    for p in (1, 2):
        s = random_strategy(any_tree, p, rng)
        plan = cg.plan(s)
        ref = to_realization_plan(any_tree, s)
        for q, w in ref.items():
            assert plan[cg.seq_of[p][q]] == pytest.approx(w, abs=1e-15)
        beh = np.empty_like(plan)
        engine.behavior_from_plan(cg.layout, p - 1, plan, beh)
        assert np.allclose(beh, cg.behavior_vector(s), atol=1e-12)
        assert cg.strategy(p, cg.behavior_vector(s)) == s


def test_expected_value_matches_tree_walk(any_tree):
    cg = engine.compile_game(any_tree)
    rng = np.random.default_rng(1)
    for _ in range(5):
        s1, s2 = random_strategy(any_tree, 1, rng), random_strategy(any_tree, 2, rng)
        assert engine.expected_value(cg.layout, cg.plan(s1), cg.plan(s2)) == pytest.approx(
            expected_utility(any_tree, s1, s2), abs=1e-12)


@pytest.mark.parametrize("responder", [1, 2])
def test_best_response_matches_tree_walk(any_tree, responder):
    cg = engine.compile_game(any_tree)
    rng = np.random.default_rng(2 + responder)
    sw, sc, beh, forced = _buffers(cg)
    for _ in range(10):
        other = random_strategy(any_tree, 3 - responder, rng, alpha=0.7)
        v = engine.best_response(cg.layout, responder - 1, cg.plan(other), beh, sw, sc, forced)
        ref, ref_v = oracle.best_response(any_tree, responder, other)
        assert v == pytest.approx(ref_v, abs=1e-12)
        assert cg.strategy(responder, beh[: cg.n_seq(responder)]) == ref


def test_forced_best_response_matches_tree_walk(six):
    cg = engine.compile_game(six)
    L = cg.layout
    rng = np.random.default_rng(5)
    sw, sc, beh, forced = _buffers(cg)
    s1 = random_strategy(six, 1, rng)
    seq = cg.seq_of[2][("2|K|k", "b1")]
    engine.mark_forced_path(L, 1, seq, forced)
    v = engine.best_response(L, 1, cg.plan(s1), beh, sw, sc, forced)
    _, ref_v = oracle.best_response(six, 2, s1, forced={"2|K|k": "b1"})
    assert v == pytest.approx(ref_v, abs=1e-12)
    assert beh[seq] == 1.0
    engine.clear_forced(forced)
    assert (forced == -1).all()


def test_worst_case_matches_oracle(any_tree):
    cg = engine.compile_game(any_tree)
    sw, sc, beh, forced = _buffers(cg)
    rng = np.random.default_rng(6)
    s = random_strategy(any_tree, 1, rng)
    wc = engine.worst_case(cg.layout, 0, cg.plan(s), sw, sc, beh, forced)
    assert wc == pytest.approx(oracle.worst_case_value(any_tree, 1, s), abs=1e-12)


def test_ties_go_to_lowest_index(kuhn):
    cg = engine.compile_game(kuhn)
    L = cg.layout
    w = np.zeros(cg.n_seq(1))
    beh = np.empty_like(w)
    forced = np.full(int(L.n_inf.max()), -1, dtype=np.int64)
    engine.best_response_values(L, 0, w, forced, beh, np.empty_like(w))
    for j in range(L.n_inf[0]):
        assert beh[L.inf_start[0, j]] == 1.0


def test_regret_matching_into():
    out = np.zeros(4)
    engine.regret_matching_into(np.array([3.0, 1.0, -2.0]), 0, 3, out, 1)
    assert list(out) == [0.0, 0.75, 0.25, 0.0]
    engine.regret_matching_into(np.array([-1.0, -2.0]), 0, 2, out, 0)
    assert list(out[:2]) == [0.5, 0.5]
