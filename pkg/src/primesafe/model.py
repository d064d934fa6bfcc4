"""Dirichlet-style opponent model: prior pseudo-counts plus observed action counts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine, kernels
from .game import GameTree, HandRecord, make_key
from .strategy import BehavioralStrategy

PRIOR_HANDS = 5.0


@dataclass
class OpponentModel:
    """Pseudo-counts indexed by the modelled player's sequences (entry 0 unused).

    Counts start at ``w * prior`` and only ever grow.
    """

    tree: GameTree
    player: int
    w: float
    counts: np.ndarray
    hands_seen: int = 0

    def count(self, key: str, action: str) -> float:
        cg = engine.compile_game(self.tree)
        return float(self.counts[cg.seq_of[self.player][(key, action)]])

    def copy(self) -> "OpponentModel":
        return OpponentModel(self.tree, self.player, self.w, self.counts.copy(), self.hands_seen)


def init_model(tree: GameTree, prior: BehavioralStrategy, w: float = PRIOR_HANDS) -> OpponentModel:
    if w <= 0:
        raise ValueError(f"prior weight must be positive, got {w}")
    cg = engine.compile_game(tree)
    counts = w * cg.behavior_vector(prior)
    counts[0] = 0.0
    return OpponentModel(tree, prior.player, float(w), counts)


def observe_hand(model: OpponentModel, hand: HandRecord) -> OpponentModel:
    """Add one count to each action the modelled player took in ``hand``, at the infoset fixed by its card."""
    node = model.tree.walk(hand.deal, hand.actions)
    if not node.is_terminal:
        raise ValueError(f"hand {hand.actions} is not complete")
    cg = engine.compile_game(model.tree)
    card = model.tree.spec.card_name(hand.card(model.player))
    seqs = cg.seq_of[model.player]
    for prefix, action in hand.decisions(model.player):
        model.counts[seqs[(make_key(model.player, card, prefix), action)]] += 1.0
    model.hands_seen += 1
    return model


def posterior_behavior(model: OpponentModel) -> np.ndarray:
    cg = engine.compile_game(model.tree)
    out = np.empty(cg.n_seq(model.player))
    kernels.posterior_behavior(cg.layout, model.player - 1, model.counts, out)
    return out


def posterior_strategy(model: OpponentModel) -> BehavioralStrategy:
    """Posterior-mean strategy: counts normalised within each infoset."""
    cg = engine.compile_game(model.tree)
    return cg.strategy(model.player, posterior_behavior(model))
