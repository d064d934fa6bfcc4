"""Uniform card and bet-size abstractions, and lifting abstract strategies to the full game.

Buckets are numbered from 1. Card bucket 1 holds the strongest cards; bet
bucket 1 holds the smallest bets. Bucket sizes differ by at most one. For
cards the larger buckets go to the interior of the rank order, filled from
the weak side, so the strongest and weakest cards stay alone whenever the
counts allow: those two are the only cards whose showdown outcome is
certain, and merging them into a neighbour blurs the value-bet and bluff
roles that the abstract game's strategy relies on. For bets the larger
buckets go to the small end. The abstract game keeps the first
``m`` bet sizes of the full game, so abstract bet ``b<j>`` stands for bet
bucket ``j`` (for the usual ladder ``1..4`` these coincide with the size).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import GameSpec, GameTree, bet_action, bet_size, make_key
from .strategy import BehavioralStrategy


def _partition(n: int, m: int) -> list[int]:
    """Sizes of ``m`` contiguous groups over ``n`` items, larger groups first."""
    q, r = divmod(n, m)
    return [q + 1] * r + [q] * (m - r)


def _card_partition(n: int, m: int) -> list[int]:
    """Group sizes from the strongest card down; remainder in the interior, weak side first."""
    q, r = divmod(n, m)
    sizes = [q] * m
    order = list(range(m - 2, 0, -1)) + [0, m - 1]
    for i in order[:r]:
        sizes[i] += 1
    return sizes


@dataclass(frozen=True)
class BucketMap:
    """Full-to-abstract maps for cards (by rank) and bet sizes, plus their inverse images."""

    card_map: dict[int, int]
    bet_map: dict[int, int]
    card_buckets: dict[int, tuple[int, ...]]
    bet_buckets: dict[int, tuple[int, ...]]

    @property
    def n_card_buckets(self) -> int:
        return len(self.card_buckets)

    @property
    def n_bet_buckets(self) -> int:
        return len(self.bet_buckets)

    def combine(self, other: "BucketMap") -> "BucketMap":
        """Card part of ``self`` with the bet part of ``other``."""
        return BucketMap(self.card_map, other.bet_map, self.card_buckets, other.bet_buckets)


def _inverse(forward: dict[int, int]) -> dict[int, tuple[int, ...]]:
    inv: dict[int, list[int]] = {}
    for full, bucket in forward.items():
        inv.setdefault(bucket, []).append(full)
    return {b: tuple(sorted(v)) for b, v in sorted(inv.items())}


def build_card_buckets(full_count: int, abstract_count: int) -> BucketMap:
    """Contiguous rank buckets; bucket 1 is the strongest, remainder placed as described above.

    The bet part is empty; combine with :func:`build_bet_buckets` when needed.
    """
    if not 2 <= abstract_count <= full_count:
        raise ValueError(f"need 2 <= abstract_count <= full_count, got {abstract_count} and {full_count}")
    card_map = {}
    rank = full_count - 1
    for bucket, size in enumerate(_card_partition(full_count, abstract_count), 1):
        for _ in range(size):
            card_map[rank] = bucket
            rank -= 1
    return BucketMap(card_map, {}, _inverse(card_map), {})


def build_bet_buckets(full_bets, abstract_count: int) -> BucketMap:
    """Contiguous buckets over the ascending bet list; the remainder goes to the small end."""
    bets = sorted(full_bets)
    if len(set(bets)) != len(bets) or not bets:
        raise ValueError(f"bet sizes must be distinct and nonempty: {full_bets}")
    if not 1 <= abstract_count <= len(bets):
        raise ValueError(f"need 1 <= abstract_count <= {len(bets)}, got {abstract_count}")
    bet_map = {}
    i = 0
    for bucket, size in enumerate(_partition(len(bets), abstract_count), 1):
        for _ in range(size):
            bet_map[bets[i]] = bucket
            i += 1
    return BucketMap({}, bet_map, {}, _inverse(bet_map))


@dataclass(frozen=True)
class Abstraction:
    """One rung of an abstraction ladder: ``none``, ``cards=<n>`` or ``bets=<n>``."""

    kind: str = "none"
    count: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("none", "cards", "bets"):
            raise ValueError(f"unknown abstraction kind {self.kind!r}")
        if self.kind != "none" and self.count < 1:
            raise ValueError("abstraction count must be positive")

    @classmethod
    def parse(cls, text: str) -> "Abstraction":
        text = text.strip().lower()
        if text in ("", "none"):
            return cls()
        kind, sep, count = text.partition("=")
        if not sep or not count.isdigit():
            raise ValueError(f"abstraction must look like cards=<n> or bets=<n>, got {text!r}")
        return cls(kind, int(count))

    @property
    def key(self) -> str:
        return "none" if self.kind == "none" else f"{self.kind}={self.count}"

    @property
    def label(self) -> str:
        if self.kind == "none":
            return "None"
        if self.kind == "cards":
            return f"{self.count} cards"
        return f"{self.count} bet size" + ("" if self.count == 1 else "s")

    def bucket_map(self, full: GameSpec) -> BucketMap:
        cards = build_card_buckets(full.card_count, self.count if self.kind == "cards" else full.card_count)
        bets = build_bet_buckets(full.bet_sizes, self.count if self.kind == "bets" else len(full.bet_sizes))
        return cards.combine(bets)

    def abstract_spec(self, full: GameSpec) -> GameSpec:
        return abstract_spec(full, self.bucket_map(full))


def ladder(full: GameSpec) -> list[Abstraction]:
    """The rung list for a full game: none, then coarser card or bet abstractions."""
    if len(full.bet_sizes) > 1:
        n = len(full.bet_sizes)
        return [Abstraction()] + [Abstraction("bets", m) for m in range(n - 1, 0, -1)]
    n = full.card_count
    return [Abstraction()] + [Abstraction("cards", m) for m in range(n - 1, max(n - 4, 1), -1)]


def abstract_spec(full: GameSpec, bmap: BucketMap) -> GameSpec:
    return GameSpec(bmap.n_card_buckets, tuple(full.bet_sizes[: bmap.n_bet_buckets]), full.ante)


def _abstract_history(history, bmap: BucketMap, abs_bets) -> tuple[str, ...]:
    out = []
    for a in history:
        size = bet_size(a)
        out.append(a if size is None else bet_action(abs_bets[bmap.bet_map[size] - 1]))
    return tuple(out)


def abstract_infoset_key(full_tree: GameTree, abstract_tree: GameTree, bmap: BucketMap, key: str) -> str:
    info = full_tree.infoset(key)
    abs_spec = abstract_tree.spec
    bucket = bmap.card_map[info.card]
    abs_card = abs_spec.card_name(abs_spec.card_count - bucket)
    return make_key(info.player, abs_card, _abstract_history(info.history, bmap, abs_spec.bet_sizes))


def lift_strategy(abstract_tree: GameTree, full_tree: GameTree, bmap: BucketMap, s_abs: BehavioralStrategy) -> BehavioralStrategy:
    """Full-game strategy copying each infoset's abstract counterpart.

    An abstract bet's probability is split evenly over the full sizes in its bucket.
    """
    if abstract_spec(full_tree.spec, bmap) != abstract_tree.spec:
        raise ValueError("abstract tree does not match the bucket map")
    abs_bets = abstract_tree.spec.bet_sizes
    player = s_abs.player
    probs = {}
    for key, info in full_tree.infosets[player].items():
        akey = abstract_infoset_key(full_tree, abstract_tree, bmap, key)
        if akey not in abstract_tree.infosets[player]:
            raise ValueError(f"full infoset {key!r} maps to unknown abstract infoset {akey!r}")
        vec = np.empty(len(info.actions))
        for i, a in enumerate(info.actions):
            size = bet_size(a)
            if size is None:
                vec[i] = s_abs.prob(akey, a)
            else:
                bucket = bmap.bet_map[size]
                vec[i] = s_abs.prob(akey, bet_action(abs_bets[bucket - 1])) / len(bmap.bet_buckets[bucket])
        probs[key] = vec
    return BehavioralStrategy(full_tree, player, probs)
