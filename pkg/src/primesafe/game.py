"""Generalised Kuhn poker as an explicit extensive-form tree.

Both players ante, chance deals one card to each from a deck of distinct
ranks, P1 checks or bets one of the allowed sizes, and a bet is answered by
call or fold. After a check P2 may check behind or bet, and P1 then calls or
folds. There are no raises.

Public action encoding (used in infoset keys and strategy files):

    k       check
    b<n>    bet n money units
    c       call
    f       fold

Cards are integer ranks ``0 .. card_count - 1`` where a higher rank wins the
showdown. Display names are taken from the top of ``AKQJT98765432`` so a
six-card deck reads A, K, Q, J, T, 9.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterator, Mapping

CARD_NAMES = "AKQJT98765432"

CHANCE = 0
CHECK = "k"
CALL = "c"
FOLD = "f"


def bet_action(size: int) -> str:
    return f"b{size}"


def bet_size(action: str) -> int | None:
    """Size of a bet action, or None for check/call/fold."""
    if action.startswith("b"):
        return int(action[1:])
    return None


@dataclass(frozen=True)
class GameSpec:
    card_count: int = 3
    bet_sizes: tuple[int, ...] = (1,)
    ante: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "bet_sizes", tuple(int(b) for b in self.bet_sizes))
        if self.card_count < 2:
            raise ValueError(f"card_count must be >= 2, got {self.card_count}")
        if not self.bet_sizes:
            raise ValueError("bet_sizes must be nonempty")
        if any(b <= 0 for b in self.bet_sizes):
            raise ValueError(f"bet sizes must be positive: {self.bet_sizes}")
        if any(a >= b for a, b in zip(self.bet_sizes, self.bet_sizes[1:])):
            raise ValueError(f"bet sizes must be strictly ascending: {self.bet_sizes}")
        if self.ante != 1:
            raise ValueError("ante is fixed at 1")

    def card_name(self, rank: int) -> str:
        if not 0 <= rank < self.card_count:
            raise ValueError(f"rank {rank} outside deck of {self.card_count}")
        if self.card_count <= len(CARD_NAMES):
            return CARD_NAMES[self.card_count - 1 - rank]
        return str(rank)

    def card_rank(self, name: str) -> int:
        for rank in range(self.card_count):
            if self.card_name(rank) == name:
                return rank
        raise ValueError(f"unknown card {name!r} for a {self.card_count}-card deck")

    @property
    def label(self) -> str:
        bets = ",".join(str(b) for b in self.bet_sizes)
        return f"cards={self.card_count};bets={bets}"

    @classmethod
    def parse(cls, text: str) -> "GameSpec":
        """Parse a preset name or ``cards=<n>;bets=<b1,b2,...>``."""
        text = text.strip()
        if text in PRESETS:
            return PRESETS[text]
        fields: dict[str, str] = {}
        for part in re.split(r"[;\s]+", text):
            if not part:
                continue
            name, sep, value = part.partition("=")
            if not sep:
                raise ValueError(f"cannot parse game spec {text!r}")
            fields[name.strip()] = value.strip()
        unknown = set(fields) - {"cards", "bets"}
        if unknown:
            raise ValueError(f"unknown game spec fields {sorted(unknown)}")
        cards = int(fields.get("cards", 3))
        bets = tuple(int(b) for b in fields.get("bets", "1").split(",") if b)
        return cls(card_count=cards, bet_sizes=bets)

    @classmethod
    def from_json(cls, obj) -> "GameSpec":
        if isinstance(obj, str):
            return cls.parse(obj)
        return cls(
            card_count=int(obj.get("card_count", 3)),
            bet_sizes=tuple(obj.get("bet_sizes", (1,))),
            ante=int(obj.get("ante", 1)),
        )

    def to_json(self) -> dict:
        return {"card_count": self.card_count, "bet_sizes": list(self.bet_sizes), "ante": self.ante}


KUHN = GameSpec(3, (1,))
SIX_CARD = GameSpec(6, (1,))
FOUR_BET = GameSpec(3, (1, 2, 3, 4))

PRESETS: Mapping[str, GameSpec] = MappingProxyType(
    {"kuhn": KUHN, "kuhn6": SIX_CARD, "six-card": SIX_CARD, "kuhn4bet": FOUR_BET, "four-bet": FOUR_BET}
)


@dataclass(frozen=True)
class Node:
    id: int
    kind: str  # "chance", "decision" or "terminal"
    depth: int
    deal: tuple[int, int] | None
    history: tuple[str, ...]
    player: int = CHANCE
    infoset: str | None = None
    actions: tuple[str, ...] = ()
    children: tuple[int, ...] = ()
    probs: tuple[float, ...] = ()
    utility: float = 0.0

    @property
    def is_terminal(self) -> bool:
        return self.kind == "terminal"


@dataclass(frozen=True)
class Infoset:
    key: str
    player: int
    card: int
    history: tuple[str, ...]
    actions: tuple[str, ...]
    nodes: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class GameTree:
    spec: GameSpec
    nodes: tuple[Node, ...]
    infosets: Mapping[int, Mapping[str, Infoset]]
    root: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def node(self, node_id: int) -> Node:
        return self.nodes[node_id]

    def infoset(self, key: str) -> Infoset:
        player = int(key.split("|", 1)[0])
        try:
            return self.infosets[player][key]
        except KeyError:
            raise KeyError(f"no infoset {key!r} in game {self.spec.label}") from None

    def infoset_keys(self, player: int) -> list[str]:
        return sorted(self.infosets[player])

    def terminals(self) -> Iterator[Node]:
        return (n for n in self.nodes if n.is_terminal)

    @property
    def max_depth(self) -> int:
        return max(n.depth for n in self.nodes)

    @property
    def num_deals(self) -> int:
        n = self.spec.card_count
        return n * (n - 1)

    def walk(self, deal: tuple[int, int], actions) -> Node:
        """Follow a deal and a public action path from the root; reject illegal paths."""
        root = self.nodes[self.root]
        try:
            node = self.nodes[root.children[root.actions.index(_deal_label(deal))]]
        except ValueError:
            raise ValueError(f"deal {deal} impossible in {self.spec.label}") from None
        for action in actions:
            if node.kind != "decision" or action not in node.actions:
                raise ValueError(f"action {action!r} illegal after {node.history} in {self.spec.label}")
            node = self.nodes[node.children[node.actions.index(action)]]
        return node


def _deal_label(deal: tuple[int, int]) -> str:
    return f"{deal[0]}-{deal[1]}"


def _showdown(deal: tuple[int, int], stake: int) -> float:
    return float(stake if deal[0] > deal[1] else -stake)


def payoff(spec: GameSpec, deal: tuple[int, int], history: tuple[str, ...]) -> float | None:
    """P1 utility of a finished public history, or None if play continues."""
    ante = spec.ante
    h = history
    if len(h) < 2:
        return None
    if h == (CHECK, CHECK):
        return _showdown(deal, ante)
    if h[0] != CHECK:  # P1 bet
        size = bet_size(h[0])
        return float(ante) if h[1] == FOLD else _showdown(deal, ante + size)
    if len(h) < 3:
        return None
    size = bet_size(h[1])
    return float(-ante) if h[2] == FOLD else _showdown(deal, ante + size)


def legal_actions(spec: GameSpec, history: tuple[str, ...]) -> tuple[str, ...]:
    bets = tuple(bet_action(b) for b in spec.bet_sizes)
    if not history or history == (CHECK,):
        return (CHECK,) + bets
    return (CALL, FOLD)


def make_key(player: int, card_name: str, history: tuple[str, ...]) -> str:
    return f"{player}|{card_name}|{','.join(history)}"


def build_game(spec: GameSpec) -> GameTree:
    nodes: list[Node | None] = []
    infosets: dict[int, dict[str, list]] = {1: {}, 2: {}}

    def add(depth: int, deal: tuple[int, int], history: tuple[str, ...]) -> int:
        node_id = len(nodes)
        nodes.append(None)
        utility = payoff(spec, deal, history)
        if utility is not None:
            nodes[node_id] = Node(node_id, "terminal", depth, deal, history, utility=utility)
            return node_id
        player = 1 if len(history) % 2 == 0 else 2
        card = deal[player - 1]
        key = make_key(player, spec.card_name(card), history)
        actions = legal_actions(spec, history)
        children = tuple(add(depth + 1, deal, history + (a,)) for a in actions)
        nodes[node_id] = Node(node_id, "decision", depth, deal, history, player, key, actions, children)
        entry = infosets[player].setdefault(key, [card, history, actions, []])
        entry[3].append(node_id)
        return node_id

    n = spec.card_count
    deals = [(c1, c2) for c1 in range(n) for c2 in range(n) if c1 != c2]
    nodes.append(None)
    children = tuple(add(1, d, ()) for d in deals)
    prob = 1.0 / len(deals)
    nodes[0] = Node(
        0, "chance", 0, None, (),
        actions=tuple(_deal_label(d) for d in deals),
        children=children,
        probs=(prob,) * len(deals),
    )
    frozen = {
        p: MappingProxyType({
            key: Infoset(key, p, card, history, actions, tuple(ids))
            for key, (card, history, actions, ids) in sorted(table.items())
        })
        for p, table in infosets.items()
    }
    return GameTree(spec, tuple(nodes), MappingProxyType(frozen))


def terminal_utility(tree: GameTree, node: Node | int, player: int = 1) -> float:
    if isinstance(node, int):
        node = tree.node(node)
    if not node.is_terminal:
        raise ValueError(f"node {node.id} is not terminal")
    return node.utility if player == 1 else -node.utility


def infoset_key(tree: GameTree, node: Node | int, player: int) -> str:
    """Canonical key ``<player>|<card>|<public actions>`` of a decision node."""
    if isinstance(node, int):
        node = tree.node(node)
    if node.kind != "decision" or node.player != player:
        raise ValueError(f"player {player} does not act at node {node.id}")
    return make_key(player, tree.spec.card_name(node.deal[player - 1]), node.history)


@dataclass(frozen=True)
class HandRecord:
    """One played hand. The full deal is kept, so the opponent's card is always known."""

    deal: tuple[int, int]
    actions: tuple[str, ...]
    players: tuple[int, ...]
    utility: float
    terminal: int

    @property
    def theta(self) -> int:
        """Private card of P2, the opponent of the P1 agent."""
        return self.deal[1]

    def card(self, player: int) -> int:
        return self.deal[player - 1]

    def decisions(self, player: int) -> list[tuple[tuple[str, ...], str]]:
        """(public prefix, action) pairs for every decision ``player`` made."""
        return [
            (self.actions[:i], a)
            for i, (p, a) in enumerate(zip(self.players, self.actions))
            if p == player
        ]
