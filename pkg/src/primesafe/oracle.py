"""Exact values: best responses, worst-case value, game value, exploitability, gifts.

Best responses here walk the explicit tree. The compiled kernels in
``engine`` compute the same quantities in sequence form and are checked
against these functions in the test-suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine, lp
from .game import GameTree, HandRecord, make_key
from .strategy import BehavioralStrategy, expected_utility

CLAMP_TOL = 1e-9
SAFETY_TOL = 1e-6


@dataclass(frozen=True)
class ValueReport:
    player: int
    game_value: float
    worst_case: float
    exploitability: float
    best_response: BehavioralStrategy


@dataclass(frozen=True)
class ConstrainedResponse:
    tau: BehavioralStrategy
    value: float  # to the agent


def _opponent(player: int) -> int:
    return 3 - player


def _reach(tree: GameTree, responder: int, other: BehavioralStrategy) -> np.ndarray:
    """Chance-times-opponent reach probability of every node."""
    reach = np.zeros(len(tree.nodes))
    reach[tree.root] = 1.0
    for node in tree.nodes:  # parents precede children in node order
        if node.kind == "terminal":
            continue
        if node.kind == "chance":
            probs = node.probs
        elif node.player == responder:
            probs = (1.0,) * len(node.children)
        else:
            probs = other[node.infoset]
        for p, c in zip(probs, node.children):
            reach[c] = reach[node.id] * p
    return reach


def best_response(
    tree: GameTree,
    player: int,
    opponent_strategy: BehavioralStrategy,
    forced: dict[str, str] | None = None,
) -> tuple[BehavioralStrategy, float]:
    """Pure best response of ``player`` and its expected value to ``player``.

    Infosets are decided deepest first by their counterfactual action
    values; ties go to the lowest action index. ``forced`` pins an action at
    selected infosets of the responder.
    """
    if opponent_strategy.player != _opponent(player):
        raise ValueError(f"P{player} must respond to a P{_opponent(player)} strategy")
    forced = forced or {}
    reach = _reach(tree, player, opponent_strategy)
    sign = 1.0 if player == 1 else -1.0
    infos = tree.infosets[player]
    choice: dict[str, int] = {}
    nodes = tree.nodes

    def value(node_id: int) -> float:
        node = nodes[node_id]
        if node.kind == "terminal":
            return sign * node.utility
        if node.kind == "chance":
            return sum(p * value(c) for p, c in zip(node.probs, node.children))
        if node.player == player:
            return value(node.children[choice[node.infoset]])
        probs = opponent_strategy[node.infoset]
        return sum(p * value(c) for p, c in zip(probs, node.children) if p > 0)

    for key in sorted(infos, key=lambda k: (-len(infos[k].history), k)):
        info = infos[key]
        if key in forced:
            choice[key] = info.actions.index(forced[key])
            continue
        cf = [0.0] * len(info.actions)
        for nid in info.nodes:
            r = reach[nid]
            if r == 0.0:
                continue
            for a, child in enumerate(nodes[nid].children):
                cf[a] += r * value(child)
        best = 0
        for a in range(1, len(cf)):
            if cf[a] > cf[best]:
                best = a
        choice[key] = best
    pure = {}
    for key, info in infos.items():
        vec = np.zeros(len(info.actions))
        vec[choice[key]] = 1.0
        pure[key] = vec
    return BehavioralStrategy(tree, player, pure), value(tree.root)


def worst_case_value(tree: GameTree, player: int, s: BehavioralStrategy) -> float:
    """``min`` over opponent strategies of ``player``'s expected utility under ``s``."""
    if s.player != player:
        raise ValueError(f"expected a P{player} strategy")
    _, v = best_response(tree, _opponent(player), s)
    return -v


def game_value_lp(tree: GameTree, player: int = 1) -> float:
    """Value of the game to ``player`` from the sequence-form linear program."""
    cg = engine.compile_game(tree)
    prog = lp.program_for(cg, player, safety=False)
    c = prog.objective(value=True)[: prog.A.shape[1]]
    res = lp.solve_lp(prog.A, prog.b, prog.sense, c)
    if res.status != lp.OPTIMAL:
        raise lp.LPError(f"sequence-form program not solved (status {res.status}); malformed tree?")
    return res.objective - prog.shift


def optimal_strategy_lp(tree: GameTree, player: int = 1) -> BehavioralStrategy:
    """A minimax strategy for ``player`` read off the same program."""
    cg = engine.compile_game(tree)
    prog = lp.program_for(cg, player, safety=False)
    c = prog.objective(value=True)[: prog.A.shape[1]]
    res = lp.solve_lp(prog.A, prog.b, prog.sense, c)
    if res.status != lp.OPTIMAL:
        raise lp.LPError(f"sequence-form program not solved (status {res.status})")
    return _strategy_from_x(cg, player, res.x[: prog.n_x])


def _strategy_from_x(cg: engine.CompiledGame, player: int, x: np.ndarray) -> BehavioralStrategy:
    plan = np.concatenate(([1.0], np.maximum(x, 0.0)))
    beh = np.empty_like(plan)
    engine.behavior_from_plan(cg.layout, player - 1, plan, beh)
    return cg.strategy(player, beh)


def exploitability(tree: GameTree, player: int, s: BehavioralStrategy) -> float:
    gap = game_value_lp(tree, player) - worst_case_value(tree, player, s)
    if -CLAMP_TOL < gap < 0.0:
        return 0.0
    return float(gap)


def value_report(tree: GameTree, player: int, s: BehavioralStrategy) -> ValueReport:
    br, v = best_response(tree, _opponent(player), s)
    vi = game_value_lp(tree, player)
    gap = vi - (-v)
    if -CLAMP_TOL < gap < 0.0:
        gap = 0.0
    return ValueReport(player, float(vi), float(-v), float(gap), br)


def observed_constraints(tree: GameTree, hand: HandRecord, opponent: int) -> dict[str, str]:
    """Opponent infosets on the hand's path, keyed by the revealed card, with the action taken."""
    node = tree.walk(hand.deal, hand.actions)
    if not node.is_terminal:
        raise ValueError(f"hand {hand.actions} does not reach a terminal node")
    if abs(node.utility - hand.utility) > 1e-12:
        raise ValueError("hand utility disagrees with the tree")
    card = tree.spec.card_name(hand.card(opponent))
    return {make_key(opponent, card, prefix): action for prefix, action in hand.decisions(opponent)}


def constrained_gift_value(tree: GameTree, s_i: BehavioralStrategy, observed: HandRecord) -> ConstrainedResponse:
    """Best response to ``s_i`` that must repeat the opponent's observed actions.

    The value is the agent's expectation over every deal, not just the
    observed one.
    """
    agent = s_i.player
    opp = _opponent(agent)
    forced = observed_constraints(tree, observed, opp)
    tau, v = best_response(tree, opp, s_i, forced=forced)
    return ConstrainedResponse(tau, -v)


def safe_best_response(
    tree: GameTree, model_strategy: BehavioralStrategy, k: float, v_prime: float
) -> BehavioralStrategy:
    """Best reply to the model among strategies whose worst case is at least ``v_prime - k``."""
    if k < 0:
        raise ValueError(f"gift balance must be nonnegative, got {k}")
    agent = _opponent(model_strategy.player)
    cg = engine.compile_game(tree)
    L = cg.layout
    p = agent - 1
    y = cg.plan(model_strategy)
    n = cg.n_seq(agent)
    m_other = cg.n_seq(model_strategy.player)
    forced = np.full(int(L.n_inf.max()), -1, dtype=np.int64)
    c_x = np.empty(n)
    beh = np.empty(n)
    scratch = np.empty(max(n, m_other))
    engine.sequence_values(L, p, y, c_x)
    engine.best_response_values(L, p, c_x, forced, beh, scratch)
    plan = np.empty(n)
    engine.plan_from_behavior(L, p, beh, plan)
    floor = v_prime - k
    if _worst_case_plan(cg, agent, plan) >= floor:
        return cg.strategy(agent, beh)

    prog = lp.program_for(cg, agent, safety=True)
    b = prog.b.copy()
    b[prog.safety_row] = floor + prog.shift
    res = lp.solve_lp(prog.A, b, prog.sense, prog.objective(c_x)[: prog.A.shape[1]])
    if res.status != lp.OPTIMAL:
        raise lp.LPError(f"safety-constrained program infeasible (status {res.status}); floor {floor} above game value?")
    strat = _strategy_from_x(cg, agent, res.x[: prog.n_x])
    if _worst_case_plan(cg, agent, cg.plan(strat)) < floor - SAFETY_TOL:
        raise lp.LPError("safety-constrained solution violates its floor")
    return strat


def _worst_case_plan(cg: engine.CompiledGame, agent: int, plan: np.ndarray) -> float:
    L = cg.layout
    n = int(L.n_seq.max())
    forced = np.full(int(L.n_inf.max()), -1, dtype=np.int64)
    return engine.worst_case(L, agent - 1, plan, np.empty(n), np.empty(n), np.empty(n), forced)


def model_value(tree: GameTree, s: BehavioralStrategy, model: BehavioralStrategy) -> float:
    """Expected utility of ``s`` against ``model`` from ``s``'s owner's seat."""
    if s.player == 1:
        return expected_utility(tree, s, model, 1)
    return expected_utility(tree, model, s, 2)
