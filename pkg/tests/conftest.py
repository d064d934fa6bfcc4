import itertools

import numpy as np
import pytest

from primesafe.game import FOUR_BET, KUHN, SIX_CARD, build_game
from primesafe.strategy import BehavioralStrategy, expected_utility


@pytest.fixture(scope="session")
def kuhn():
    return build_game(KUHN)


@pytest.fixture(scope="session")
def six():
    return build_game(SIX_CARD)


@pytest.fixture(scope="session")
def fourbet():
    return build_game(FOUR_BET)


@pytest.fixture(scope="session", params=["kuhn", "six", "fourbet"])
def any_tree(request):
    return request.getfixturevalue(request.param)


def random_strategy(tree, player, rng, alpha=1.0):
    """Dirichlet-random behavioral strategy; small alpha gives near-pure vectors."""
    return BehavioralStrategy(
        tree, player,
        {k: rng.dirichlet(np.full(len(i.actions), alpha)) for k, i in tree.infosets[player].items()},
    )


def pure_strategies(tree, player):
    keys = sorted(tree.infosets[player])
    sizes = [len(tree.infosets[player][k].actions) for k in keys]
    for choice in itertools.product(*(range(n) for n in sizes)):
        yield BehavioralStrategy(tree, player, {k: np.eye(n)[c] for k, n, c in zip(keys, sizes, choice)})


def brute_force_response(tree, player, other):
    """Best pure-strategy value for ``player`` by enumeration."""
    vals = []
    for s in pure_strategies(tree, player):
        u = expected_utility(tree, other, s, 2) if player == 2 else expected_utility(tree, s, other, 1)
        vals.append(u)
    return max(vals)


# acceptance summary ------------------------------------------------------------

ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


def record_acceptance(name: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[name] = (passed, detail)
    print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS, key=lambda s: int(s.split()[0][2:])):
        passed, detail = ACCEPTANCE_RESULTS[name]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")


def kuhn_equilibrium(tree, alpha=0.0):
    """The classic one-parameter equilibrium family of 3-card Kuhn poker, alpha in [0, 1/3].

    Card names Q < K < A stand for the textbook J < Q < K.
    """
    s1 = {
        "1|Q|": [1 - alpha, alpha], "1|Q|k,b1": [0.0, 1.0],
        "1|K|": [1.0, 0.0], "1|K|k,b1": [alpha + 1 / 3, 2 / 3 - alpha],
        "1|A|": [1 - 3 * alpha, 3 * alpha], "1|A|k,b1": [1.0, 0.0],
    }
    s2 = {
        "2|Q|b1": [0.0, 1.0], "2|Q|k": [2 / 3, 1 / 3],
        "2|K|b1": [1 / 3, 2 / 3], "2|K|k": [1.0, 0.0],
        "2|A|b1": [1.0, 0.0], "2|A|k": [0.0, 1.0],
    }
    return BehavioralStrategy(tree, 1, s1), BehavioralStrategy(tree, 2, s2)
