"""Behavioral strategies, realization plans, exact evaluation and sampling."""

from __future__ import annotations

import io
from collections.abc import Mapping
from pathlib import Path
from typing import Iterable, Iterator, TextIO

import numpy as np

from .game import GameTree, HandRecord, make_key

NORM_TOL = 1e-12
LOAD_TOL = 1e-9


class BehavioralStrategy(Mapping):
    """Immutable map from infoset key to a probability vector over that infoset's actions.

    Vectors within ``NORM_TOL`` of summing to one are kept bit-for-bit; those
    within ``LOAD_TOL`` are renormalised; anything further off, negative, or
    covering the wrong set of infosets is rejected.
    """

    __slots__ = ("player", "_probs", "_actions")

    def __init__(self, tree: GameTree, player: int, probs: Mapping[str, Iterable[float]]):
        if player not in (1, 2):
            raise ValueError(f"player must be 1 or 2, got {player}")
        infosets = tree.infosets[player]
        missing = set(infosets) - set(probs)
        extra = set(probs) - set(infosets)
        if missing or extra:
            raise ValueError(
                f"strategy for P{player} must cover exactly its infosets "
                f"(missing {sorted(missing)[:3]}, unexpected {sorted(extra)[:3]})"
            )
        table = {}
        for key, info in infosets.items():
            vec = np.array(probs[key], dtype=np.float64)
            if vec.shape != (len(info.actions),):
                raise ValueError(f"{key}: expected {len(info.actions)} probabilities, got {vec.shape}")
            if np.any(vec < 0) or not np.all(np.isfinite(vec)):
                raise ValueError(f"{key}: probabilities must be finite and nonnegative: {vec}")
            total = vec.sum()
            if abs(total - 1.0) > LOAD_TOL:
                raise ValueError(f"{key}: probabilities sum to {total!r}")
            if abs(total - 1.0) > NORM_TOL:
                vec = vec / total
            vec.setflags(write=False)
            table[key] = vec
        self.player = player
        self._probs = table
        self._actions = {key: info.actions for key, info in infosets.items()}

    def __getitem__(self, key: str) -> np.ndarray:
        return self._probs[key]

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._probs))

    def __len__(self) -> int:
        return len(self._probs)

    def actions(self, key: str) -> tuple[str, ...]:
        return self._actions[key]

    def prob(self, key: str, action: str) -> float:
        return float(self._probs[key][self._actions[key].index(action)])

    def is_pure(self) -> bool:
        return all(np.count_nonzero(v) == 1 and v.max() == 1.0 for v in self._probs.values())

    def __repr__(self) -> str:
        return f"BehavioralStrategy(P{self.player}, {len(self)} infosets)"

    def __eq__(self, other) -> bool:
        if not isinstance(other, BehavioralStrategy):
            return NotImplemented
        return (
            self.player == other.player
            and self._probs.keys() == other._probs.keys()
            and all(np.array_equal(v, other._probs[k]) for k, v in self._probs.items())
        )

    __hash__ = None  # type: ignore[assignment]


def uniform_strategy(tree: GameTree, player: int) -> BehavioralStrategy:
    return BehavioralStrategy(
        tree,
        player,
        {key: np.full(len(info.actions), 1.0 / len(info.actions)) for key, info in tree.infosets[player].items()},
    )


def mix_strategies(tree: GameTree, a: BehavioralStrategy, b: BehavioralStrategy, weight_b: float) -> BehavioralStrategy:
    """Per-infoset mixture ``(1 - w) * a + w * b`` of two behavioral strategies."""
    if a.player != b.player:
        raise ValueError("cannot mix strategies of different players")
    return BehavioralStrategy(tree, a.player, {k: (1.0 - weight_b) * a[k] + weight_b * b[k] for k in a})


def _check_owner(s: BehavioralStrategy, player: int) -> None:
    if s.player != player:
        raise ValueError(f"expected a P{player} strategy, got P{s.player}")


def expected_utility(tree: GameTree, s1: BehavioralStrategy, s2: BehavioralStrategy, player: int = 1) -> float:
    """Exact expected payoff by full traversal of the tree."""
    _check_owner(s1, 1)
    _check_owner(s2, 2)
    strategies = {1: s1, 2: s2}
    nodes = tree.nodes

    def value(node_id: int) -> float:
        node = nodes[node_id]
        if node.kind == "terminal":
            return node.utility
        if node.kind == "chance":
            return sum(p * value(c) for p, c in zip(node.probs, node.children))
        try:
            probs = strategies[node.player][node.infoset]
        except KeyError:
            raise ValueError(f"strategy for P{node.player} lacks infoset {node.infoset!r}") from None
        return sum(p * value(c) for p, c in zip(probs, node.children) if p > 0)

    u1 = value(tree.root)
    return u1 if player == 1 else -u1


def _choose(probs, u: float) -> int:
    cumulative = 0.0
    last = 0
    for i, p in enumerate(probs):
        if p <= 0:
            continue
        cumulative += p
        last = i
        if u < cumulative:
            return i
    return last


def sample_hand(tree: GameTree, s1: BehavioralStrategy, s2: BehavioralStrategy, rng: np.random.Generator) -> HandRecord:
    """Play one hand of ``s1`` against ``s2``.

    Exactly ``tree.max_depth`` uniforms are drawn per hand, one per move
    slot, so the random stream stays aligned however the hand ends.
    """
    draws = rng.random(tree.max_depth)
    return sample_hand_from_uniforms(tree, s1, s2, draws)


def sample_hand_from_uniforms(tree: GameTree, s1, s2, draws) -> HandRecord:
    strategies = {1: s1, 2: s2}
    node = tree.nodes[tree.root]
    actions: list[str] = []
    players: list[int] = []
    step = 0
    while node.kind != "terminal":
        if node.kind == "chance":
            i = _choose(node.probs, draws[step])
        else:
            i = _choose(strategies[node.player][node.infoset], draws[step])
            actions.append(node.actions[i])
            players.append(node.player)
        node = tree.nodes[node.children[i]]
        step += 1
    return HandRecord(node.deal, tuple(actions), tuple(players), node.utility, node.id)


# Sequence form -------------------------------------------------------------

EMPTY = ()


class RealizationPlan(Mapping):
    """Realization weights keyed by sequence ``(infoset key, action)``; the empty sequence is ``()``."""

    __slots__ = ("player", "_weights")

    def __init__(self, player: int, weights: Mapping):
        self.player = player
        self._weights = dict(weights)

    def __getitem__(self, seq):
        return self._weights[seq]

    def __iter__(self):
        return iter(self._weights)

    def __len__(self) -> int:
        return len(self._weights)

    def __repr__(self) -> str:
        return f"RealizationPlan(P{self.player}, {len(self)} sequences)"


def parent_sequence(tree: GameTree, key: str):
    """The owning player's last (infoset, action) before reaching ``key``."""
    info = tree.infoset(key)
    player = info.player
    last_index = max((i for i in range(len(info.history)) if i % 2 == player - 1), default=None)
    if last_index is None:
        return EMPTY
    prefix = info.history[:last_index]
    return (make_key(player, tree.spec.card_name(info.card), prefix), info.history[last_index])


def _topological_keys(tree: GameTree, player: int) -> list[str]:
    return sorted(tree.infosets[player], key=lambda k: (len(tree.infosets[player][k].history), k))


def to_realization_plan(tree: GameTree, s: BehavioralStrategy) -> RealizationPlan:
    weights = {EMPTY: 1.0}
    for key in _topological_keys(tree, s.player):
        parent = weights[parent_sequence(tree, key)]
        for action, p in zip(s.actions(key), s[key]):
            weights[(key, action)] = parent * float(p)
    return RealizationPlan(s.player, weights)


def from_realization_plan(tree: GameTree, plan: Mapping, player: int) -> BehavioralStrategy:
    """Behavioral strategy inducing ``plan``; infosets the plan never reaches become uniform."""
    probs = {}
    for key, info in tree.infosets[player].items():
        parent = plan[parent_sequence(tree, key)]
        weights = np.array([max(plan[(key, a)], 0.0) for a in info.actions])
        total = weights.sum()
        if parent <= 0 or total <= 0:
            probs[key] = np.full(len(info.actions), 1.0 / len(info.actions))
        else:
            probs[key] = weights / total
    return BehavioralStrategy(tree, player, probs)


# Text format ----------------------------------------------------------------


def format_strategy(strategies: Iterable[BehavioralStrategy]) -> str:
    lines = []
    for s in strategies:
        for key in s:
            cells = " ".join(f"{a}:{p:.12g}" for a, p in zip(s.actions(key), s[key]))
            lines.append(f"{key} {cells}")
    lines.sort()
    return "".join(line + "\n" for line in lines)


def write_strategy(path: str | Path | TextIO, *strategies: BehavioralStrategy) -> None:
    text = format_strategy(strategies)
    if isinstance(path, (str, Path)):
        Path(path).write_text(text, encoding="utf-8")
    else:
        path.write(text)


def parse_strategy(tree: GameTree, text: str) -> dict[int, BehavioralStrategy]:
    """Parse strategy lines; returns one strategy per player present in the text."""
    tables: dict[int, dict[str, list[float]]] = {}
    for lineno, raw in enumerate(io.StringIO(text), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, *cells = line.split()
        try:
            info = tree.infoset(key)
        except (KeyError, ValueError):
            raise ValueError(f"line {lineno}: unknown infoset {key!r}") from None
        pairs = dict(cell.rsplit(":", 1) for cell in cells)
        if set(pairs) != set(info.actions):
            raise ValueError(f"line {lineno}: actions {sorted(pairs)} != {list(info.actions)}")
        tables.setdefault(info.player, {})[key] = [float(pairs[a]) for a in info.actions]
    return {p: BehavioralStrategy(tree, p, t) for p, t in tables.items()}


def read_strategy(tree: GameTree, path: str | Path) -> dict[int, BehavioralStrategy]:
    return parse_strategy(tree, Path(path).read_text(encoding="utf-8"))
