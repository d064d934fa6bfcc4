"""Prime-safe exploitation policies: per-hand strategy choice and gift settlement.

A policy keeps a gift balance ``k``. Each hand it may deviate from its
static strategy only by as much worst-case loss as ``k`` can absorb; after
the hand, ``k`` grows by how much better the opponent's revealed play was
for the agent than the static worst case. The heavy lifting happens in
``kernels`` so that single-hand calls here and whole-match runs agree.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import engine, kernels
from .game import GameTree, HandRecord
from .model import OpponentModel, observe_hand
from .strategy import BehavioralStrategy

KINDS = ("Static", "EEFEWP", "EEFFE", "PRWYWE")
GATES = {"exploitability": kernels.GATE_EXPLOITABILITY, "printed": kernels.GATE_PRINTED}
TRACE_COLUMNS = ("t", "mode", "epsilon_prime", "k_before", "gift", "k_after")


@dataclass
class SafetyLedger:
    v_prime: float
    T: int
    k: float = 0.0
    t: int = 1

    @property
    def finished(self) -> bool:
        return self.t > self.T


@dataclass
class DecisionTrace:
    """Per-hand decisions in columns; ``mode`` holds indices into ``kernels.MODE_NAMES``."""

    mode: list[int] = field(default_factory=list)
    epsilon_prime: list[float] = field(default_factory=list)
    k_before: list[float] = field(default_factory=list)
    gift: list[float] = field(default_factory=list)
    k_after: list[float] = field(default_factory=list)

    def append(self, mode: int, eps: float, k_before: float, gift: float, k_after: float) -> None:
        self.mode.append(int(mode))
        self.epsilon_prime.append(float(eps))
        self.k_before.append(float(k_before))
        self.gift.append(float(gift))
        self.k_after.append(float(k_after))

    @classmethod
    def from_arrays(cls, modes, eps, k_before, gifts, k_after) -> "DecisionTrace":
        return cls(
            [int(m) for m in modes], [float(x) for x in eps], [float(x) for x in k_before],
            [float(x) for x in gifts], [float(x) for x in k_after],
        )

    def __len__(self) -> int:
        return len(self.mode)

    def rows(self):
        for i in range(len(self)):
            yield (
                i + 1, kernels.MODE_NAMES[self.mode[i]], self.epsilon_prime[i],
                self.k_before[i], self.gift[i], self.k_after[i],
            )

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for row in self.rows():
                writer.writerow([row[0], row[1], *(repr(x) for x in row[2:])])


class Policy:
    """State of one exploitation meta-strategy over one match."""

    def __init__(self, kind: str, static: BehavioralStrategy, tree: GameTree, T: int,
                 model: OpponentModel | None = None, gate: str = "exploitability"):
        if kind not in KINDS:
            raise ValueError(f"unknown policy kind {kind!r}; choose from {KINDS}")
        if static.player != 1:
            raise ValueError("the agent plays seat P1; static strategy must belong to P1")
        if T < 1:
            raise ValueError(f"horizon must be >= 1, got {T}")
        if gate not in GATES:
            raise ValueError(f"unknown gate {gate!r}")
        self.kind = kind
        self.tree = tree
        self.static = static
        self.model = model
        self.gate = gate
        self.cg = engine.compile_game(tree)
        self.scratch = kernels.make_scratch(self.cg)
        self.lp_work = kernels.make_lp_work(self.cg)
        self.sigma0_beh = self.cg.behavior_vector(static)
        self.sigma0_plan = self.cg.plan(static)
        v_prime = kernels.plan_worst_case(self.cg.layout, self.scratch, self.sigma0_plan)
        self.ledger = SafetyLedger(float(v_prime), int(T))
        self.trace = DecisionTrace()
        self._pending = None

    @property
    def v_prime(self) -> float:
        return self.ledger.v_prime

    @property
    def k(self) -> float:
        return self.ledger.k


def init_policy(kind: str, static_strategy: BehavioralStrategy, tree: GameTree, T: int, **kwargs) -> Policy:
    return Policy(kind, static_strategy, tree, T, **kwargs)


def select_strategy(policy: Policy, model: OpponentModel | None = None, t: int | None = None) -> BehavioralStrategy:
    """The agent's strategy for the ledger's current hand."""
    model = model if model is not None else policy.model
    ledger = policy.ledger
    t = ledger.t if t is None else t
    if t != ledger.t:
        raise ValueError(f"ledger is at hand {ledger.t}, not {t}")
    if ledger.finished:
        raise ValueError("match horizon already reached")
    if model is None and policy.kind != "Static":
        raise ValueError(f"{policy.kind} needs an opponent model")
    cg = policy.cg
    counts = model.counts if model is not None else np.zeros(cg.n_seq(2))
    beh = np.empty(int(cg.layout.n_seq.max()))
    plan = np.empty_like(beh)
    mode, eps = kernels.select_step(
        cg.layout, policy.lp_work, policy.scratch, kernels.ALGORITHMS[policy.kind], GATES[policy.gate],
        t, ledger.T, ledger.k, ledger.v_prime, policy.sigma0_beh, policy.sigma0_plan, counts, beh, plan,
    )
    n = cg.n_seq(1)
    chosen = cg.strategy(1, beh[:n].copy())
    policy._pending = (chosen, plan[:n].copy(), int(mode), float(eps))
    return chosen


def settle_hand(policy: Policy, played: BehavioralStrategy, hand: HandRecord,
                model: OpponentModel | None = None) -> tuple[SafetyLedger, tuple]:
    """Bank the hand's gift into ``k``, advance ``t`` and forward the hand to the model.

    Returns the ledger and this hand's trace row ``(t, mode, eps', k_before, gift, k_after)``.
    """
    cg = policy.cg
    node = policy.tree.walk(hand.deal, hand.actions)
    if not node.is_terminal:
        raise ValueError(f"hand {hand.actions} is not complete")
    if policy._pending is not None and policy._pending[0] is played:
        _, plan, mode, eps = policy._pending
    else:
        plan = cg.plan(played)
        mode, eps = kernels.MODE_STATIC if played == policy.static else kernels.MODE_FULL, float("nan")
    policy._pending = None
    ledger = policy.ledger
    value = kernels.gift_value(cg.layout, policy.scratch, plan, cg.term_index[node.id])
    gift = value - ledger.v_prime
    k_before = ledger.k
    ledger.k = k_before + gift
    policy.trace.append(mode, eps, k_before, gift, ledger.k)
    ledger.t += 1
    model = model if model is not None else policy.model
    if model is not None:
        observe_hand(model, hand)
    return ledger, (ledger.t - 1, kernels.MODE_NAMES[mode], eps, k_before, gift, ledger.k)
