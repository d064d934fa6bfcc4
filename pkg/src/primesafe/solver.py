"""Equilibrium computation by external-sampling Monte Carlo CFR.

One iteration is one traversal for one player; the traverser alternates
between P1 and P2. The traverser enumerates its own actions while chance
and the other player are sampled. The sampled player's current strategy is
added to its strategy sum with weight one, which is the simple averaging
scheme of external sampling. Randomness comes from a numpy ``Generator``
in fixed-size blocks, so a seed and an iteration count determine the
result exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import engine
from .game import GameTree
from .strategy import BehavioralStrategy

log = logging.getLogger(__name__)

BLOCK = 1 << 18


def regret_matching(regrets) -> np.ndarray:
    """Probabilities proportional to positive regret; uniform if none is positive."""
    r = np.asarray(regrets, dtype=np.float64)
    if r.size == 0:
        raise ValueError("regret vector must be nonempty")
    out = np.empty(r.size)
    engine.regret_matching_into(r, 0, r.size, out, 0)
    return out


@dataclass
class RegretTable:
    """Cumulative regrets and strategy sums, one row per player, indexed by sequence."""

    regrets: np.ndarray
    strategy_sum: np.ndarray
    iterations: int = 0

    @classmethod
    def empty(cls, cg: engine.CompiledGame) -> "RegretTable":
        n = int(cg.layout.n_seq.max())
        return cls(np.zeros((2, n)), np.zeros((2, n)))


@njit(cache=True)
def _traverse(L, trav, regrets, ssum, draws, pos, order, stack, sel, sig, val):
    """One external-sampling traversal for traverser ``trav``.

    A depth-first pass (explicit stack, children in action order) samples
    chance and opponent moves and records the visited nodes; a reverse pass
    then backs values up and updates the traverser's regrets.
    """
    n_order = 0
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        order[n_order] = node
        n_order += 1
        kind = L.node_kind[node]
        if kind == 2:
            continue
        first = L.node_first[node]
        n = L.node_nchild[node]
        if kind == 0:
            i = engine.choose(L.child_probs, first, n, draws[pos])
            pos += 1
            sel[node] = i
            stack[top] = L.child_ids[first + i]
            top += 1
            continue
        p = L.node_player[node]
        st = L.inf_start[p, L.node_inf[node]]
        engine.regret_matching_into(regrets[p], st, n, sig, first)
        if p == trav:
            for a in range(n - 1, -1, -1):
                stack[top] = L.child_ids[first + a]
                top += 1
        else:
            for a in range(n):
                ssum[p, st + a] += sig[first + a]
            i = engine.choose(sig, first, n, draws[pos])
            pos += 1
            sel[node] = i
            stack[top] = L.child_ids[first + i]
            top += 1
    for r in range(n_order - 1, -1, -1):
        node = order[r]
        kind = L.node_kind[node]
        if kind == 2:
            u = L.term_u[L.node_term[node]]
            val[node] = u if trav == 0 else -u
            continue
        first = L.node_first[node]
        if kind == 0 or L.node_player[node] != trav:
            val[node] = val[L.child_ids[first + sel[node]]]
            continue
        n = L.node_nchild[node]
        st = L.inf_start[trav, L.node_inf[node]]
        v = 0.0
        for a in range(n):
            v += sig[first + a] * val[L.child_ids[first + a]]
        for a in range(n):
            regrets[trav, st + a] += val[L.child_ids[first + a]] - v
        val[node] = v
    return pos


@njit(cache=True)
def _run_iterations(L, regrets, ssum, start_iter, n_iter, draws, max_per_iter):
    """Run up to ``n_iter`` iterations; stops early when the draw block runs low."""
    n_nodes = L.node_kind.shape[0]
    order = np.empty(n_nodes, dtype=np.int64)
    stack = np.empty(n_nodes, dtype=np.int64)
    sel = np.zeros(n_nodes, dtype=np.int64)
    sig = np.empty(L.child_ids.shape[0])
    val = np.empty(n_nodes)
    pos = 0
    done = 0
    limit = draws.shape[0] - max_per_iter
    while done < n_iter and pos <= limit:
        trav = (start_iter + done) % 2
        pos = _traverse(L, trav, regrets, ssum, draws, pos, order, stack, sel, sig, val)
        done += 1
    return done


@njit(cache=True)
def average_behavior(L, p, ssum, out):
    out[0] = 1.0
    for j in range(L.n_inf[p]):
        st = L.inf_start[p, j]
        n = L.inf_nact[p, j]
        total = 0.0
        for a in range(n):
            total += ssum[st + a]
        for a in range(n):
            out[st + a] = ssum[st + a] / total if total > 0.0 else 1.0 / n


def average_profile(cg: engine.CompiledGame, table: RegretTable) -> tuple[BehavioralStrategy, BehavioralStrategy]:
    out = []
    for p in (1, 2):
        beh = np.empty(cg.n_seq(p))
        average_behavior(cg.layout, p - 1, table.strategy_sum[p - 1], beh)
        out.append(cg.strategy(p, beh))
    return out[0], out[1]


@dataclass
class MCCFRResult:
    profile: tuple[BehavioralStrategy, BehavioralStrategy]
    iterations: int
    exploitability: tuple[float, float]
    converged: bool
    checkpoints: list[tuple[int, float, float]] = field(default_factory=list)


class ExternalSamplingMCCFR:
    """Stateful trainer; ``run`` may be called repeatedly to extend training."""

    def __init__(self, tree: GameTree, seed: int | np.random.SeedSequence = 0):
        self.tree = tree
        self.cg = engine.compile_game(tree)
        self.table = RegretTable.empty(self.cg)
        self.rng = np.random.default_rng(seed)
        self._max_per_iter = len(tree.nodes)

    def run(self, iterations: int) -> None:
        L = self.cg.layout
        remaining = int(iterations)
        while remaining > 0:
            draws = self.rng.random(BLOCK)
            done = _run_iterations(
                L, self.table.regrets, self.table.strategy_sum, self.table.iterations,
                remaining, draws, self._max_per_iter,
            )
            self.table.iterations += int(done)
            remaining -= int(done)

    def profile(self) -> tuple[BehavioralStrategy, BehavioralStrategy]:
        return average_profile(self.cg, self.table)

    def exploitability(self) -> tuple[float, float]:
        return profile_exploitability(self.tree, self.profile())


def profile_exploitability(tree: GameTree, profile) -> tuple[float, float]:
    """Per-seat exploitability, each clamped at zero from below."""
    from .oracle import game_value_lp

    cg = engine.compile_game(tree)
    L = cg.layout
    n = int(L.n_seq.max())
    forced = np.full(int(L.n_inf.max()), -1, dtype=np.int64)
    v1 = game_value_lp(tree, 1)
    out = []
    for p, s in zip((1, 2), profile):
        wc = engine.worst_case(L, p - 1, cg.plan(s), np.empty(n), np.empty(n), np.empty(n), forced)
        vp = v1 if p == 1 else -v1
        out.append(max(vp - wc, 0.0))
    return out[0], out[1]


def mccfr_train(tree: GameTree, iterations: int, seed: int = 0) -> tuple[BehavioralStrategy, BehavioralStrategy]:
    """Average strategy profile after ``iterations`` external-sampling iterations."""
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    trainer = ExternalSamplingMCCFR(tree, seed)
    trainer.run(iterations)
    return trainer.profile()


def checkpoint_schedule(iterations: int, first: int = 10_000, factor: float = 2.0) -> list[int]:
    points = []
    it = min(first, iterations)
    while it < iterations:
        points.append(int(it))
        it = int(it * factor)
    points.append(int(iterations))
    return points


def mccfr_solve(
    tree: GameTree,
    iterations: int,
    seed: int | np.random.SeedSequence = 0,
    target: float | None = None,
    seat: int | None = None,
    first_checkpoint: int = 10_000,
) -> MCCFRResult:
    """Train up to ``iterations``, stopping at the first log-spaced checkpoint meeting ``target``.

    ``target`` applies to ``seat``'s exploitability, or to the larger of the
    two seats when ``seat`` is None.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    trainer = ExternalSamplingMCCFR(tree, seed)
    checkpoints = []
    expl = (float("inf"), float("inf"))
    converged = False
    for point in checkpoint_schedule(iterations, first_checkpoint):
        trainer.run(point - trainer.table.iterations)
        expl = trainer.exploitability()
        checkpoints.append((point, *expl))
        gap = max(expl) if seat is None else expl[seat - 1]
        log.debug("mccfr %s it=%d expl=%s", tree.spec.label, point, expl)
        if target is not None and gap <= target:
            converged = True
            break
    if target is None:
        converged = True
    elif not converged:
        log.warning(
            "MCCFR on %s stopped at %d iterations with exploitability %s above target %g",
            tree.spec.label, trainer.table.iterations, expl, target,
        )
    return MCCFRResult(trainer.profile(), trainer.table.iterations, expl, converged, checkpoints)


def vanilla_cfr(tree: GameTree, iterations: int) -> tuple[BehavioralStrategy, BehavioralStrategy]:
    """Full-traversal CFR with reach-weighted averaging. Slow; for debugging small games."""
    regrets = {p: {k: np.zeros(len(i.actions)) for k, i in tree.infosets[p].items()} for p in (1, 2)}
    sums = {p: {k: np.zeros(len(i.actions)) for k, i in tree.infosets[p].items()} for p in (1, 2)}
    nodes = tree.nodes

    def cfr(node_id: int, reach1: float, reach2: float) -> float:
        node = nodes[node_id]
        if node.kind == "terminal":
            return node.utility
        if node.kind == "chance":
            return sum(p * cfr(c, reach1, reach2 * p) for p, c in zip(node.probs, node.children))
        p = node.player
        sigma = regret_matching(regrets[p][node.infoset])
        vals = np.empty(len(node.children))
        for a, c in enumerate(node.children):
            if p == 1:
                vals[a] = cfr(c, reach1 * sigma[a], reach2)
            else:
                vals[a] = cfr(c, reach1, reach2 * sigma[a])
        v = float(sigma @ vals)
        if p == 1:
            regrets[1][node.infoset] += reach2 * (vals - v)
            sums[1][node.infoset] += reach1 * sigma
        else:
            regrets[2][node.infoset] += reach1 * (v - vals)
            sums[2][node.infoset] += reach2 * sigma
        return v

    for _ in range(iterations):
        cfr(tree.root, 1.0, 1.0)

    def average(p):
        probs = {}
        for k, s in sums[p].items():
            total = s.sum()
            probs[k] = s / total if total > 0 else np.full(s.size, 1.0 / s.size)
        return BehavioralStrategy(tree, p, probs)

    return average(1), average(2)
