"""Array layout of a game tree and compiled sequence-form kernels.

Every strategy is a flat float64 vector indexed by the owning player's
sequences: index 0 is the empty sequence and infoset ``j`` owns the block
``inf_start[p, j] : inf_start[p, j] + inf_nact[p, j]``. Used as a behavior
vector the entries are conditional action probabilities (entry 0 unused,
kept at 1); used as a realization plan they are products along the path.

Players are indexed 0 (P1) and 1 (P2) inside kernels. Infosets are stored
in topological order, so forward passes build plans and reverse passes
compute best responses.
"""

from __future__ import annotations

from collections import namedtuple

import numpy as np
from numba import njit

from .game import GameTree
from .strategy import BehavioralStrategy, parent_sequence

Layout = namedtuple(
    "Layout",
    [
        "n_inf",        # (2,) infosets per player
        "n_seq",        # (2,) sequences per player, empty sequence included
        "inf_start",    # (2, max_inf) first sequence of each infoset
        "inf_nact",     # (2, max_inf)
        "inf_parent",   # (2, max_inf) parent sequence
        "seq_inf",      # (2, max_seq) owning infoset, -1 for the empty sequence
        "term_seq",     # (2, n_term) each player's last sequence before the terminal
        "term_w",       # (n_term,) chance probability times P1 utility
        "term_u",       # (n_term,) P1 utility
        "node_kind",    # 0 chance, 1 decision, 2 terminal
        "node_player",  # acting player index, -1 otherwise
        "node_inf",
        "node_first",   # offset into child_ids / child_probs
        "node_nchild",
        "node_term",    # terminal index or -1
        "child_ids",
        "child_probs",
        "max_depth",
        "max_nact",
    ],
)


class CompiledGame:
    """A GameTree flattened into a :class:`Layout` plus key/index bookkeeping."""

    def __init__(self, tree: GameTree):
        self.tree = tree
        keys = {}
        for p in (1, 2):
            infos = tree.infosets[p]
            keys[p] = sorted(infos, key=lambda k, infos=infos: (len(infos[k].history), k))
        self.keys = keys
        self.index = {p: {k: j for j, k in enumerate(keys[p])} for p in (1, 2)}

        n_inf = np.array([len(keys[1]), len(keys[2])], dtype=np.int64)
        max_inf = int(n_inf.max())
        inf_start = np.zeros((2, max_inf), dtype=np.int64)
        inf_nact = np.zeros((2, max_inf), dtype=np.int64)
        inf_parent = np.zeros((2, max_inf), dtype=np.int64)
        seq_of: dict[int, dict] = {1: {(): 0}, 2: {(): 0}}
        n_seq = np.ones(2, dtype=np.int64)
        for p in (1, 2):
            for j, key in enumerate(keys[p]):
                actions = tree.infosets[p][key].actions
                inf_start[p - 1, j] = n_seq[p - 1]
                inf_nact[p - 1, j] = len(actions)
                inf_parent[p - 1, j] = seq_of[p][parent_sequence(tree, key)]
                for a in actions:
                    seq_of[p][(key, a)] = int(n_seq[p - 1])
                    n_seq[p - 1] += 1
        self.seq_of = seq_of
        max_seq = int(n_seq.max())
        seq_inf = np.full((2, max_seq), -1, dtype=np.int64)
        for p in (1, 2):
            for j in range(n_inf[p - 1]):
                seq_inf[p - 1, inf_start[p - 1, j] : inf_start[p - 1, j] + inf_nact[p - 1, j]] = j

        nodes = tree.nodes
        n_nodes = len(nodes)
        node_kind = np.zeros(n_nodes, dtype=np.int64)
        node_player = np.full(n_nodes, -1, dtype=np.int64)
        node_inf = np.full(n_nodes, -1, dtype=np.int64)
        node_first = np.zeros(n_nodes, dtype=np.int64)
        node_nchild = np.zeros(n_nodes, dtype=np.int64)
        node_term = np.full(n_nodes, -1, dtype=np.int64)
        child_ids: list[int] = []
        child_probs: list[float] = []
        term_nodes = [n.id for n in nodes if n.is_terminal]
        term_index = {nid: z for z, nid in enumerate(term_nodes)}
        for n in nodes:
            node_first[n.id] = len(child_ids)
            node_nchild[n.id] = len(n.children)
            child_ids.extend(n.children)
            if n.kind == "chance":
                child_probs.extend(n.probs)
            else:
                child_probs.extend([0.0] * len(n.children))
            if n.kind == "decision":
                node_kind[n.id] = 1
                node_player[n.id] = n.player - 1
                node_inf[n.id] = self.index[n.player][n.infoset]
            elif n.kind == "terminal":
                node_kind[n.id] = 2
                node_term[n.id] = term_index[n.id]

        term_seq = np.zeros((2, len(term_nodes)), dtype=np.int64)
        term_w = np.zeros(len(term_nodes))
        term_u = np.zeros(len(term_nodes))

        def descend(node_id: int, prob: float, last: list[int]) -> None:
            n = nodes[node_id]
            if n.kind == "terminal":
                z = term_index[node_id]
                term_seq[0, z], term_seq[1, z] = last
                term_w[z] = prob * n.utility
                term_u[z] = n.utility
            elif n.kind == "chance":
                for p_c, c in zip(n.probs, n.children):
                    descend(c, prob * p_c, last)
            else:
                for a, c in zip(n.actions, n.children):
                    nxt = list(last)
                    nxt[n.player - 1] = seq_of[n.player][(n.infoset, a)]
                    descend(c, prob, nxt)

        descend(tree.root, 1.0, [0, 0])
        self.term_nodes = np.array(term_nodes, dtype=np.int64)
        self.term_index = term_index
        self.layout = Layout(
            n_inf, n_seq, inf_start, inf_nact, inf_parent, seq_inf, term_seq, term_w, term_u,
            node_kind, node_player, node_inf, node_first, node_nchild, node_term,
            np.array(child_ids, dtype=np.int64), np.array(child_probs, dtype=np.float64),
            int(tree.max_depth), int(inf_nact.max()),
        )
        self.max_abs_utility = float(np.abs(term_u).max())

    # conversions -----------------------------------------------------------

    def n_seq(self, player: int) -> int:
        return int(self.layout.n_seq[player - 1])

    def behavior_vector(self, s: BehavioralStrategy) -> np.ndarray:
        p = s.player
        out = np.ones(self.n_seq(p))
        L = self.layout
        for j, key in enumerate(self.keys[p]):
            st = L.inf_start[p - 1, j]
            out[st : st + L.inf_nact[p - 1, j]] = s[key]
        return out

    def strategy(self, player: int, beh: np.ndarray) -> BehavioralStrategy:
        L = self.layout
        probs = {}
        for j, key in enumerate(self.keys[player]):
            st = L.inf_start[player - 1, j]
            probs[key] = beh[st : st + L.inf_nact[player - 1, j]]
        return BehavioralStrategy(self.tree, player, probs)

    def plan(self, s: BehavioralStrategy) -> np.ndarray:
        out = np.empty(self.n_seq(s.player))
        plan_from_behavior(self.layout, s.player - 1, self.behavior_vector(s), out)
        return out

    def sequence_label(self, player: int, seq: int):
        if seq == 0:
            return ()
        L = self.layout
        j = L.seq_inf[player - 1, seq]
        key = self.keys[player][j]
        return (key, self.tree.infosets[player][key].actions[seq - L.inf_start[player - 1, j]])


def compile_game(tree: GameTree) -> CompiledGame:
    """Cached :class:`CompiledGame` for ``tree``."""
    cg = tree._cache.get("compiled")
    if cg is None:
        cg = CompiledGame(tree)
        tree._cache["compiled"] = cg
    return cg


# kernels ------------------------------------------------------------------


@njit(cache=True)
def plan_from_behavior(L, p, beh, out):
    out[0] = 1.0
    for j in range(L.n_inf[p]):
        st = L.inf_start[p, j]
        par = out[L.inf_parent[p, j]]
        for a in range(L.inf_nact[p, j]):
            out[st + a] = par * beh[st + a]


@njit(cache=True)
def behavior_from_plan(L, p, plan, out):
    """Conditional probabilities of a plan; unreached infosets become uniform."""
    out[0] = 1.0
    for j in range(L.n_inf[p]):
        st = L.inf_start[p, j]
        n = L.inf_nact[p, j]
        total = 0.0
        for a in range(n):
            v = plan[st + a]
            if v > 0.0:
                total += v
        if plan[L.inf_parent[p, j]] <= 0.0 or total <= 0.0:
            for a in range(n):
                out[st + a] = 1.0 / n
        else:
            for a in range(n):
                v = plan[st + a]
                out[st + a] = v / total if v > 0.0 else 0.0


@njit(cache=True)
def expected_value(L, x, y):
    """P1 expected utility of plans x (P1) and y (P2)."""
    total = 0.0
    for z in range(L.term_w.shape[0]):
        total += L.term_w[z] * x[L.term_seq[0, z]] * y[L.term_seq[1, z]]
    return total


@njit(cache=True)
def sequence_values(L, p, other_plan, out):
    """Counterfactual value to player ``p`` of each of its sequences' own terminals."""
    q = 1 - p
    sign = 1.0 if p == 0 else -1.0
    for s in range(L.n_seq[p]):
        out[s] = 0.0
    for z in range(L.term_w.shape[0]):
        out[L.term_seq[p, z]] += sign * L.term_w[z] * other_plan[L.term_seq[q, z]]


@njit(cache=True)
def best_response_values(L, p, w, forced, out_beh, scratch):
    """Pure best response of player ``p`` given sequence values ``w``.

    ``forced[j] >= 0`` pins infoset ``j`` to that action. Ties go to the
    lowest action index. Returns the responder's expected value.
    """
    for s in range(L.n_seq[p]):
        scratch[s] = w[s]
    out_beh[0] = 1.0
    for j in range(L.n_inf[p] - 1, -1, -1):
        st = L.inf_start[p, j]
        n = L.inf_nact[p, j]
        best = forced[j]
        if best < 0:
            best = 0
            for a in range(1, n):
                if scratch[st + a] > scratch[st + best]:
                    best = a
        for a in range(n):
            out_beh[st + a] = 0.0
        out_beh[st + best] = 1.0
        scratch[L.inf_parent[p, j]] += scratch[st + best]
    return scratch[0]


@njit(cache=True)
def best_response(L, p, other_plan, out_beh, scratch_w, scratch, forced):
    sequence_values(L, p, other_plan, scratch_w)
    return best_response_values(L, p, scratch_w, forced, out_beh, scratch)


@njit(cache=True)
def worst_case(L, p, plan, scratch_w, scratch, scratch_beh, forced):
    """Player ``p``'s value when the opponent best-responds to ``plan``."""
    return -best_response(L, 1 - p, plan, scratch_beh, scratch_w, scratch, forced)


@njit(cache=True)
def mark_forced_path(L, p, seq, forced):
    """Pin every infoset on player ``p``'s sequence chain ending at ``seq`` to its action."""
    for j in range(L.n_inf[p]):
        forced[j] = -1
    while seq > 0:
        j = L.seq_inf[p, seq]
        forced[j] = seq - L.inf_start[p, j]
        seq = L.inf_parent[p, j]


@njit(cache=True)
def clear_forced(forced):
    for j in range(forced.shape[0]):
        forced[j] = -1


@njit(cache=True)
def choose(probs, start, n, u):
    """Inverse-CDF draw skipping zero-probability entries; mirrors strategy._choose."""
    cumulative = 0.0
    last = 0
    for i in range(n):
        pr = probs[start + i]
        if pr <= 0.0:
            continue
        cumulative += pr
        last = i
        if u < cumulative:
            return i
    return last


@njit(cache=True)
def sample_terminal(L, beh1, beh2, draws):
    """Walk the tree from the root using one uniform per move; returns the terminal index."""
    node = 0
    step = 0
    while L.node_kind[node] != 2:
        first = L.node_first[node]
        n = L.node_nchild[node]
        if L.node_kind[node] == 0:
            i = choose(L.child_probs, first, n, draws[step])
        else:
            p = L.node_player[node]
            st = L.inf_start[p, L.node_inf[node]]
            if p == 0:
                i = choose(beh1, st, n, draws[step])
            else:
                i = choose(beh2, st, n, draws[step])
        node = L.child_ids[first + i]
        step += 1
    return L.node_term[node]


@njit(cache=True)
def regret_matching_into(regrets, start, n, out, out_start):
    total = 0.0
    for a in range(n):
        r = regrets[start + a]
        if r > 0.0:
            total += r
    if total > 0.0:
        for a in range(n):
            r = regrets[start + a]
            out[out_start + a] = r / total if r > 0.0 else 0.0
    else:
        for a in range(n):
            out[out_start + a] = 1.0 / n
