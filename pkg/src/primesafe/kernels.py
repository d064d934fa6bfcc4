"""Compiled per-hand steps of the exploitation policies and a whole-match loop.

The object-level API in ``exploit`` and ``harness.run_match`` calls the same
step functions one hand at a time, so both paths produce identical numbers.
The agent always sits in seat P1 (kernel index 0); the opponent model lives
over P2's sequences.
"""

from __future__ import annotations

from collections import namedtuple

import numpy as np
from numba import njit

from . import engine, lp

STATIC = 0
EEFEWP = 1
EEFFE = 2
PRWYWE = 3
ALGORITHMS = {"Static": STATIC, "EEFEWP": EEFEWP, "EEFFE": EEFFE, "PRWYWE": PRWYWE}

MODE_STATIC = 0
MODE_FULL = 1
MODE_CONSTRAINED = 2
MODE_NAMES = ("static", "full-exploit", "constrained-exploit")

GATE_EXPLOITABILITY = 0  # k >= (T - t + 1) * max(eps', 0)
GATE_PRINTED = 1         # k >= (T - t + 1) * (v' - eps')

OPP_STATIONARY = 0
OPP_SWITCH = 1
OPP_NEMESIS = 2

# Safety rows are solved this far inside the floor so that rounding in the
# plan -> behavior -> plan round trip cannot push the played strategy below it.
LP_MARGIN = 1e-9
REFRESH_PIVOTS = 4000

Scratch = namedtuple(
    "Scratch",
    ["w", "acc", "beh_o", "model_beh", "model_plan", "c_x", "c_full", "free", "forced", "x", "plan_x", "opp_beh", "opp_plan"],
)

LPWork = namedtuple(
    "LPWork",
    ["A", "b", "sense", "T", "basis", "state", "n_x", "shift", "safety_row", "safety_slack", "lower"],
)


def make_scratch(cg: engine.CompiledGame) -> Scratch:
    L = cg.layout
    n = int(L.n_seq.max())
    n_inf = int(L.n_inf.max())
    prog = lp.program_for(cg, 1, safety=True)
    return Scratch(
        np.empty(n), np.empty(n), np.empty(n), np.empty(n), np.empty(n), np.empty(n),
        np.zeros(prog.n_real), np.full(n_inf, -1, dtype=np.int64), np.full(n_inf, -1, dtype=np.int64),
        np.empty(prog.A.shape[1]), np.empty(n), np.empty(n), np.empty(n),
    )


def make_lp_work(cg: engine.CompiledGame) -> LPWork:
    """Fresh warm-start workspace for the agent's safety-constrained program."""
    prog = lp.program_for(cg, 1, safety=True)
    m = prog.A.shape[0]
    return LPWork(
        prog.A, prog.b.copy(), prog.sense, np.zeros((m + 1, prog.n_real + 1)), np.zeros(m, dtype=np.int64),
        np.zeros(3), prog.n_x, prog.shift, prog.safety_row, prog.safety_slack, -cg.max_abs_utility,
    )


@njit(cache=True)
def posterior_behavior(L, p, counts, out):
    """Per-infoset normalisation of pseudo-counts over player ``p``'s sequences."""
    out[0] = 1.0
    for j in range(L.n_inf[p]):
        st = L.inf_start[p, j]
        n = L.inf_nact[p, j]
        total = 0.0
        for a in range(n):
            total += counts[st + a]
        for a in range(n):
            out[st + a] = counts[st + a] / total


@njit(cache=True)
def observe_terminal(L, p, counts, z):
    """Add one observation along player ``p``'s sequence chain to terminal ``z``."""
    seq = L.term_seq[p, z]
    while seq > 0:
        counts[seq] += 1.0
        seq = L.inf_parent[p, L.seq_inf[p, seq]]


@njit(cache=True)
def plan_worst_case(L, S, plan):
    return engine.worst_case(L, 0, plan, S.w, S.acc, S.beh_o, S.free)


@njit(cache=True)
def greedy_response(L, S, model_plan, out_beh, out_plan):
    """Agent's best response to the model; returns its worst-case value."""
    engine.sequence_values(L, 0, model_plan, S.c_x)
    engine.best_response_values(L, 0, S.c_x, S.free, out_beh, S.acc)
    engine.plan_from_behavior(L, 0, out_beh, out_plan)
    return plan_worst_case(L, S, out_plan)


@njit(cache=True)
def _lp_attempt(L, W, S, floor, cold, out_beh, out_plan):
    rhs_new = max(floor, W.lower) + LP_MARGIN + W.shift
    for j in range(S.c_full.shape[0]):
        S.c_full[j] = 0.0
    for j in range(W.n_x):
        S.c_full[j] = S.c_x[j + 1]
    if cold:
        W.b[W.safety_row] = rhs_new
        status, piv = lp.cold_solve(W.A, W.b, W.sense, S.c_full, W.T, W.basis)
        W.state[2] = piv
    else:
        status, piv = lp.warm_solve(W.T, W.basis, S.c_full, W.safety_slack, -1.0, rhs_new - W.state[1])
        W.state[2] += piv
    W.state[1] = rhs_new
    if status != lp.OPTIMAL:
        W.state[0] = 0.0
        return False
    W.state[0] = 1.0
    lp.extract(W.T, W.basis, W.n_x, S.x)
    S.plan_x[0] = 1.0
    for j in range(W.n_x):
        S.plan_x[j + 1] = max(S.x[j], 0.0)
    engine.behavior_from_plan(L, 0, S.plan_x, out_beh)
    engine.plan_from_behavior(L, 0, out_beh, out_plan)
    return plan_worst_case(L, S, out_plan) >= floor


@njit(cache=True)
def safe_response(L, W, S, floor, out_beh, out_plan):
    """Best reply to the model (values in ``S.c_x``) with worst case at least ``floor``.

    Warm-starts from the previous hand's tableau when one is available and
    falls back to a cold solve if the warm result fails verification.
    """
    cold = W.state[0] == 0.0 or W.state[2] > REFRESH_PIVOTS
    if _lp_attempt(L, W, S, floor, cold, out_beh, out_plan):
        return True
    if not cold:
        return _lp_attempt(L, W, S, floor, True, out_beh, out_plan)
    return False


@njit(cache=True)
def select_step(L, W, S, alg, gate, t, horizon, k, v_prime, sigma0_beh, sigma0_plan, counts, out_beh, out_plan):
    """Choose the agent's strategy for hand ``t``; returns (mode, raw eps')."""
    if alg == STATIC:
        for s in range(sigma0_beh.shape[0]):
            out_beh[s] = sigma0_beh[s]
            out_plan[s] = sigma0_plan[s]
        return MODE_STATIC, np.nan
    posterior_behavior(L, 1, counts, S.model_beh)
    engine.plan_from_behavior(L, 1, S.model_beh, S.model_plan)
    wc = greedy_response(L, S, S.model_plan, out_beh, out_plan)
    eps = v_prime - wc
    eps_pos = max(eps, 0.0)
    if alg == EEFEWP:
        use = eps_pos <= k
    elif alg == EEFFE:
        remaining = horizon - t + 1
        if gate == GATE_PRINTED:
            use = k >= remaining * (v_prime - eps)
        else:
            use = k >= remaining * eps_pos
    else:
        floor = v_prime - max(k, 0.0)
        if wc >= floor:
            return MODE_FULL, eps
        if safe_response(L, W, S, floor, out_beh, out_plan):
            return MODE_CONSTRAINED, eps
        use = False
    if use:
        return MODE_FULL, eps
    for s in range(sigma0_beh.shape[0]):
        out_beh[s] = sigma0_beh[s]
        out_plan[s] = sigma0_plan[s]
    return MODE_STATIC, eps


@njit(cache=True)
def gift_value(L, S, plan, z):
    """Agent's value against the best response forced through terminal ``z``'s P2 actions."""
    engine.mark_forced_path(L, 1, L.term_seq[1, z], S.forced)
    v = engine.worst_case(L, 0, plan, S.w, S.acc, S.beh_o, S.forced)
    engine.clear_forced(S.forced)
    return v


@njit(cache=True)
def opponent_behavior(L, S, kind, t, switch_hand, opp_a, opp_b, agent_plan):
    if kind == OPP_NEMESIS:
        engine.best_response(L, 1, agent_plan, S.opp_beh, S.w, S.acc, S.free)
        return S.opp_beh
    if kind == OPP_SWITCH and t > switch_hand:
        return opp_b
    return opp_a


@njit(cache=True)
def play_match(
    L, W, S, alg, gate, horizon, v_prime, sigma0_beh, sigma0_plan, counts,
    opp_kind, switch_hand, opp_a, opp_b, draws, beh, plan,
    payoffs, modes, eps_trace, k_before, gifts, k_after,
):
    """Play ``horizon`` hands; ``counts`` must hold the fresh model. Returns the final k."""
    k = 0.0
    for h in range(horizon):
        t = h + 1
        mode, eps = select_step(L, W, S, alg, gate, t, horizon, k, v_prime, sigma0_beh, sigma0_plan, counts, beh, plan)
        opp = opponent_behavior(L, S, opp_kind, t, switch_hand, opp_a, opp_b, plan)
        z = engine.sample_terminal(L, beh, opp, draws[h])
        payoffs[h] = L.term_u[z]
        gift = gift_value(L, S, plan, z) - v_prime
        observe_terminal(L, 1, counts, z)
        modes[h] = mode
        eps_trace[h] = eps
        k_before[h] = k
        gifts[h] = gift
        k = k + gift
        k_after[h] = k
    return k
