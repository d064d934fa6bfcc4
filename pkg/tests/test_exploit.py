import csv

import numpy as np
import pytest

from conftest import kuhn_equilibrium, random_strategy
from primesafe import engine, kernels, oracle
from primesafe.abstraction import Abstraction, lift_strategy
from primesafe.exploit import (
    TRACE_COLUMNS, DecisionTrace, init_policy, select_strategy, settle_hand,
)
from primesafe.game import SIX_CARD, HandRecord, build_game
from primesafe.model import init_model, posterior_strategy
from primesafe.opponents import nemesis_response
from primesafe.strategy import sample_hand, uniform_strategy


@pytest.fixture(scope="module")
def lifted3(six):
    rung = Abstraction("cards", 3)
    abstract = build_game(rung.abstract_spec(SIX_CARD))
    bmap = rung.bucket_map(SIX_CARD)
    return tuple(lift_strategy(abstract, six, bmap, oracle.optimal_strategy_lp(abstract, p)) for p in (1, 2))


def _hand(tree, deal, actions):
    node = tree.walk(deal, actions)
    players = tuple(1 if i % 2 == 0 else 2 for i in range(len(actions)))
    return HandRecord(deal, tuple(actions), players, node.utility, node.id)


def test_init_policy(kuhn, six, lifted3):
    s1, _ = kuhn_equilibrium(kuhn)
    pol = init_policy("EEFEWP", s1, kuhn, 1000)
    assert pol.v_prime == pytest.approx(-1 / 18, abs=1e-12)
    assert pol.k == 0.0 and pol.ledger.t == 1
    pol6 = init_policy("PRWYWE", lifted3[0], six, 1000)
    assert pol6.v_prime == pytest.approx(oracle.worst_case_value(six, 1, lifted3[0]), abs=1e-12)


def test_init_policy_rejects(kuhn):
    s1, s2 = kuhn_equilibrium(kuhn)
    for kwargs in (dict(kind="Greedy", static_strategy=s1, T=10), dict(kind="EEFEWP", static_strategy=s2, T=10),
                   dict(kind="EEFEWP", static_strategy=s1, T=0)):
        with pytest.raises(ValueError):
            init_policy(kwargs["kind"], kwargs["static_strategy"], kuhn, kwargs["T"])
    with pytest.raises(ValueError):
        init_policy("EEFFE", s1, kuhn, 10, gate="loose")


def test_eefewp_plays_static_without_gifts(six, lifted3):
    model = init_model(six, uniform_strategy(six, 2))
    pol = init_policy("EEFEWP", lifted3[0], six, 100, model=model)
    s = select_strategy(pol)
    assert s == lifted3[0]
    mode, eps = pol._pending[2:]
    assert mode == kernels.MODE_STATIC and eps > 0


def test_eefewp_exploits_with_enough_gifts(six, lifted3):
    model = init_model(six, uniform_strategy(six, 2))
    pol = init_policy("EEFEWP", lifted3[0], six, 100, model=model)
    br, _ = oracle.best_response(six, 1, posterior_strategy(model))
    eps = pol.v_prime - oracle.worst_case_value(six, 1, br)
    pol.ledger.k = eps
    assert select_strategy(pol) == br
    pol.ledger.k = eps - 1e-6
    assert select_strategy(pol) == lifted3[0]


def test_eeffe_gates(six, lifted3):
    model = init_model(six, uniform_strategy(six, 2))
    br, _ = oracle.best_response(six, 1, posterior_strategy(model))
    pol = init_policy("EEFFE", lifted3[0], six, 10, model=model)
    eps = pol.v_prime - oracle.worst_case_value(six, 1, br)
    pol.ledger.k = 10 * eps + 1e-9
    assert select_strategy(pol) == br
    pol.ledger.k = 9 * eps
    assert select_strategy(pol) == lifted3[0]
    printed = init_policy("EEFFE", lifted3[0], six, 10, model=model, gate="printed")
    # v' - eps' is the candidate's (negative) worst case, so the printed gate opens at k = 0
    assert select_strategy(printed) == br


def test_prwywe_respects_floor(six, lifted3):
    rng = np.random.default_rng(0)
    model = init_model(six, random_strategy(six, 2, rng))
    pol = init_policy("PRWYWE", lifted3[0], six, 100, model=model)
    for k in (0.0, 0.01, 0.05, 0.3):
        pol.ledger.k = k
        s = select_strategy(pol)
        assert oracle.worst_case_value(six, 1, s) >= pol.v_prime - k - 1e-6
        ref = oracle.safe_best_response(six, posterior_strategy(model), k, pol.v_prime)
        assert oracle.model_value(six, s, posterior_strategy(model)) == pytest.approx(
            oracle.model_value(six, ref, posterior_strategy(model)), abs=1e-7)


def test_static_policy(kuhn):
    s1, _ = kuhn_equilibrium(kuhn)
    pol = init_policy("Static", s1, kuhn, 5)
    assert select_strategy(pol) == s1
    assert np.isnan(pol._pending[3])


def test_select_strategy_preconditions(kuhn):
    s1, s2 = kuhn_equilibrium(kuhn)
    pol = init_policy("EEFEWP", s1, kuhn, 1)
    with pytest.raises(ValueError, match="model"):
        select_strategy(pol)
    pol = init_policy("EEFEWP", s1, kuhn, 1, model=init_model(kuhn, s2))
    with pytest.raises(ValueError):
        select_strategy(pol, t=2)
    s = select_strategy(pol)
    settle_hand(pol, s, _hand(kuhn, (0, 1), ("k", "k")))
    with pytest.raises(ValueError, match="horizon"):
        select_strategy(pol)


def test_nemesis_actions_give_no_gift(six, lifted3):
    s1 = lifted3[0]
    pol = init_policy("Static", s1, six, 50)
    nem = nemesis_response(six, s1)
    rng = np.random.default_rng(1)
    for _ in range(50):
        played = select_strategy(pol)
        _, row = settle_hand(pol, played, sample_hand(six, played, nem, rng))
        assert row[4] == pytest.approx(0.0, abs=1e-12)
    assert abs(pol.k) <= 1e-10


def test_folding_the_best_card_is_a_gift(kuhn):
    s1, s2 = kuhn_equilibrium(kuhn, 0.2)
    pol = init_policy("EEFEWP", s1, kuhn, 10, model=init_model(kuhn, s2))
    played = select_strategy(pol)
    ledger, row = settle_hand(pol, played, _hand(kuhn, (0, 2), ("b1", "f")))
    assert row[4] > 0 and ledger.k == row[4] and ledger.t == 2
    assert pol.model.count("2|A|b1", "f") == 1.0  # the prior never folds A


@pytest.mark.parametrize("kind", ["Static", "EEFEWP", "EEFFE", "PRWYWE"])
def test_match_invariants(six, lifted3, kind):
    s1, s2 = lifted3
    rng = np.random.default_rng(2)
    opp = random_strategy(six, 2, rng, alpha=0.5)
    pol = init_policy(kind, s1, six, 400, model=init_model(six, s2))
    for _ in range(400):
        k_before = pol.k
        played = select_strategy(pol)
        if played != s1:
            assert oracle.worst_case_value(six, 1, played) >= pol.v_prime - k_before - 1e-6
        hand = sample_hand(six, played, opp, rng)
        _, row = settle_hand(pol, played, hand)
        gift = oracle.constrained_gift_value(six, played, hand).value - pol.v_prime
        assert row[4] == pytest.approx(gift, abs=1e-12)
        assert row[5] == row[3] + row[4]
        assert pol.k >= -1e-9
    tr = pol.trace
    assert len(tr) == 400
    assert tr.k_before[1:] == tr.k_after[:-1]
    if kind == "Static":
        assert set(tr.mode) == {kernels.MODE_STATIC}
    else:
        assert set(tr.mode) != {kernels.MODE_STATIC}


def test_eefewp_static_against_nemesis(six, lifted3):
    s1, s2 = lifted3
    pol = init_policy("EEFEWP", s1, six, 200, model=init_model(six, s2))
    rng = np.random.default_rng(3)
    for _ in range(200):
        played = select_strategy(pol)
        settle_hand(pol, played, sample_hand(six, played, nemesis_response(six, played), rng))
    tr = pol.trace
    for mode, eps, kb in zip(tr.mode, tr.epsilon_prime, tr.k_before):
        assert (mode == kernels.MODE_STATIC) == (max(eps, 0.0) > kb)
    if all(e > 0 for e in tr.epsilon_prime) and max(tr.k_after) <= 1e-12:
        assert set(tr.mode) == {kernels.MODE_STATIC}


def test_trace_csv(tmp_path):
    tr = DecisionTrace()
    tr.append(kernels.MODE_STATIC, float("nan"), 0.0, 0.25, 0.25)
    tr.append(kernels.MODE_CONSTRAINED, 0.1, 0.25, -0.05, 0.2)
    tr.write_csv(tmp_path / "t.csv")
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert tuple(rows[0]) == TRACE_COLUMNS == ("t", "mode", "epsilon_prime", "k_before", "gift", "k_after")
    assert rows[1][:2] == ["1", "static"] and rows[2][:2] == ["2", "constrained-exploit"]
    assert float(rows[2][5]) == 0.2
