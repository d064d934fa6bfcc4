"""Opponent archetypes for the P2 seat."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import engine, kernels
from .game import GameTree
from .oracle import best_response
from .solver import MCCFRResult, mccfr_solve
from .strategy import BehavioralStrategy, mix_strategies, uniform_strategy

log = logging.getLogger(__name__)

KINDS = ("random", "dynamic", "equilibrium", "sophisticated", "nemesis")
LABELS = {
    "random": "Random", "dynamic": "Dynamic", "equilibrium": "Equilibrium",
    "sophisticated": "Sophisticated", "nemesis": "Nemesis",
}


@dataclass(frozen=True)
class OpponentSpec:
    """Opponent class and its knobs.

    ``nemesis`` best-responds to whatever the agent plays each hand; it is a
    stress test for the safety guarantee rather than a realistic player.
    """

    kind: str = "random"
    switch_hand: int = 100
    mix_p: float = 0.2
    iterations: int = 10_000_000
    target: float = 1e-3

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown opponent kind {self.kind!r}; choose from {KINDS}")
        if not 0.0 <= self.mix_p <= 1.0:
            raise ValueError(f"mix_p must lie in [0, 1], got {self.mix_p}")
        if self.switch_hand < 0:
            raise ValueError(f"switch_hand must be >= 0, got {self.switch_hand}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")

    @property
    def label(self) -> str:
        return LABELS[self.kind]

    @property
    def needs_equilibrium(self) -> bool:
        return self.kind in ("equilibrium", "sophisticated")

    def to_json(self) -> dict:
        return {"kind": self.kind, "switch_hand": self.switch_hand, "mix_p": self.mix_p,
                "iterations": self.iterations, "target": self.target}

    @classmethod
    def from_json(cls, obj) -> "OpponentSpec":
        if isinstance(obj, str):
            return cls(obj.lower())
        return cls(**{**obj, "kind": obj.get("kind", "random").lower()})


@dataclass(frozen=True)
class Opponent:
    spec: OpponentSpec
    tree: GameTree
    first: BehavioralStrategy
    second: BehavioralStrategy | None = None
    training: MCCFRResult | None = None

    @property
    def kernel_kind(self) -> int:
        if self.spec.kind == "nemesis":
            return kernels.OPP_NEMESIS
        if self.spec.kind == "dynamic":
            return kernels.OPP_SWITCH
        return kernels.OPP_STATIONARY


def train_equilibrium(tree: GameTree, spec: OpponentSpec, seed) -> MCCFRResult:
    """MCCFR run for the P2 seat, stopping once P2's exploitability meets the target."""
    result = mccfr_solve(tree, spec.iterations, seed=seed, target=spec.target, seat=2)
    if not result.converged:
        log.warning("equilibrium opponent on %s not within %g after %d iterations",
                    tree.spec.label, spec.target, result.iterations)
    return result


def make_opponent(tree: GameTree, spec: OpponentSpec, agent_static: BehavioralStrategy, seed=0,
                  equilibrium: MCCFRResult | None = None) -> Opponent:
    """Build an opponent; ``equilibrium`` may supply an already trained profile to share."""
    if spec.kind == "random":
        return Opponent(spec, tree, uniform_strategy(tree, 2))
    if spec.kind == "dynamic":
        br, _ = best_response(tree, 2, agent_static)
        return Opponent(spec, tree, uniform_strategy(tree, 2), br)
    if spec.kind == "nemesis":
        return Opponent(spec, tree, uniform_strategy(tree, 2))
    if equilibrium is None:
        equilibrium = train_equilibrium(tree, spec, seed)
    eq = equilibrium.profile[1]
    if spec.kind == "equilibrium":
        return Opponent(spec, tree, eq, training=equilibrium)
    return Opponent(spec, tree, mix_strategies(tree, eq, uniform_strategy(tree, 2), spec.mix_p), training=equilibrium)


def opponent_strategy_for_hand(opp: Opponent, t: int, agent_strategy: BehavioralStrategy | None = None) -> BehavioralStrategy:
    """P2's strategy for hand ``t``; the nemesis needs the agent's strategy for that hand."""
    if t < 1:
        raise ValueError(f"hands are numbered from 1, got {t}")
    if opp.spec.kind == "nemesis":
        if agent_strategy is None:
            raise ValueError("the nemesis responds to the agent's current strategy")
        return nemesis_response(opp.tree, agent_strategy)
    if opp.spec.kind == "dynamic" and t > opp.spec.switch_hand:
        return opp.second
    return opp.first


def nemesis_response(tree: GameTree, agent_strategy: BehavioralStrategy) -> BehavioralStrategy:
    """Compiled best response of P2, identical to the one used inside whole-match runs."""
    cg = engine.compile_game(tree)
    L = cg.layout
    n = int(L.n_seq.max())
    out = np.empty(n)
    forced = np.full(int(L.n_inf.max()), -1, dtype=np.int64)
    engine.best_response(L, 1, cg.plan(agent_strategy), out, np.empty(n), np.empty(n), forced)
    return cg.strategy(2, out[: cg.n_seq(2)])

