"""Dense tableau simplex and the sequence-form programs built on it.

The solver handles ``max c.z  s.t.  A z (<=, =, >=) b,  z >= 0`` with a
two-phase method. Entering columns use Dantzig's rule and switch to Bland's
rule after a run of degenerate pivots. The final tableau can be kept and
re-optimised after the objective or one right-hand side changes. In that
case a dual simplex pass restores feasibility and a primal pass restores
optimality.

Sequence-form program for agent ``p`` against opponent ``o``::

    x   agent realization plan (empty sequence fixed to 1, not a variable)
    q'  shifted dual values of the opponent's best response, q' = q + shift

    E x = e                                  agent flow constraints
    F^T q' - A^T x <= shift * F^T 1          opponent sequences
    q'_root >= floor + shift                 safety row (optional)

``q'_root - shift`` is the agent's worst-case value of ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .engine import CompiledGame

OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
ITER_LIMIT = 3

LE = 1
EQ = 0
GE = -1

TOL = 1e-10
RATIO_TOL = 1e-12
BLAND_AFTER = 25
MAX_ITER = 5000


class LPError(RuntimeError):
    pass


@njit(cache=True)
def _pivot(T, basis, r, c):
    rows, cols = T.shape
    inv = 1.0 / T[r, c]
    nz = np.empty(cols, dtype=np.int64)
    k = 0
    for j in range(cols):
        if T[r, j] != 0.0:
            T[r, j] *= inv
            nz[k] = j
            k += 1
    T[r, c] = 1.0
    for i in range(rows):
        if i == r:
            continue
        f = T[i, c]
        if f != 0.0:
            for t in range(k):
                j = nz[t]
                T[i, j] -= f * T[r, j]
            T[i, c] = 0.0
    basis[r] = c


@njit(cache=True)
def primal_simplex(T, basis, ncols, max_iter):
    """Iterate to optimality from a primal-feasible basis. Returns (status, pivots)."""
    m = T.shape[0] - 1
    rhs = T.shape[1] - 1
    degenerate = 0
    for it in range(max_iter):
        bland = degenerate >= BLAND_AFTER
        c = -1
        best = -TOL
        for j in range(ncols):
            d = T[m, j]
            if d < -TOL:
                if bland:
                    c = j
                    break
                if d < best:
                    best = d
                    c = j
        if c < 0:
            return OPTIMAL, it
        r = -1
        best_ratio = np.inf
        for i in range(m):
            a = T[i, c]
            if a > TOL and basis[i] >= 0:
                ratio = max(T[i, rhs], 0.0) / a
                if r < 0 or ratio < best_ratio - RATIO_TOL:
                    r = i
                    best_ratio = ratio
                elif ratio <= best_ratio + RATIO_TOL and basis[i] < basis[r]:
                    r = i
                    best_ratio = min(best_ratio, ratio)
        if r < 0:
            return UNBOUNDED, it
        if T[r, rhs] <= TOL:
            degenerate += 1
        else:
            degenerate = 0
        _pivot(T, basis, r, c)
    return ITER_LIMIT, max_iter


@njit(cache=True)
def dual_simplex(T, basis, ncols, max_iter):
    """Restore primal feasibility from a dual-feasible basis. Returns (status, pivots)."""
    m = T.shape[0] - 1
    rhs = T.shape[1] - 1
    for it in range(max_iter):
        r = -1
        most = -TOL
        for i in range(m):
            if basis[i] >= 0 and T[i, rhs] < most:
                most = T[i, rhs]
                r = i
        if r < 0:
            return OPTIMAL, it
        c = -1
        best = np.inf
        for j in range(ncols):
            a = T[r, j]
            if a < -TOL:
                ratio = max(T[m, j], 0.0) / -a
                if ratio < best - RATIO_TOL:
                    best = ratio
                    c = j
        if c < 0:
            return INFEASIBLE, it
        _pivot(T, basis, r, c)
    return ITER_LIMIT, max_iter


@njit(cache=True)
def set_objective(T, basis, c):
    """Rewrite the reduced-cost row of ``T`` for objective ``c`` (maximisation)."""
    m = T.shape[0] - 1
    cols = T.shape[1]
    for j in range(cols):
        T[m, j] = 0.0
    for i in range(m):
        b = basis[i]
        if b < 0:
            continue
        cb = c[b]
        if cb != 0.0:
            for j in range(cols):
                T[m, j] += cb * T[i, j]
    for j in range(cols - 1):
        T[m, j] -= c[j]


@njit(cache=True)
def n_columns(sense):
    n_slack = 0
    for i in range(sense.shape[0]):
        if sense[i] != EQ:
            n_slack += 1
    return n_slack


@njit(cache=True)
def cold_solve(A, b, sense, c, T, basis):
    """Two-phase simplex from scratch.

    ``T`` has shape ``(m + 1, n + n_slack + 1)`` and receives the final
    tableau, whose last row holds reduced costs and last column the basic
    values. ``c`` covers structural and slack columns. Rows found redundant
    in phase one are zeroed and get basis entry -1.
    """
    m, n = A.shape
    n_slack = n_columns(sense)
    n_real = n + n_slack
    n_art = 0
    flip = np.ones(m)
    slack_col = np.full(m, -1, dtype=np.int64)
    k = 0
    for i in range(m):
        if b[i] < 0.0:
            flip[i] = -1.0
        if sense[i] != EQ:
            slack_col[i] = n + k
            k += 1
    needs_art = np.zeros(m, dtype=np.bool_)
    for i in range(m):
        slack_sign = float(sense[i]) * flip[i]
        if sense[i] == EQ or slack_sign < 0.0:
            needs_art[i] = True
            n_art += 1
    W = np.zeros((m + 1, n_real + n_art + 1))
    rhs_w = n_real + n_art
    a = 0
    for i in range(m):
        for j in range(n):
            W[i, j] = flip[i] * A[i, j]
        if slack_col[i] >= 0:
            W[i, slack_col[i]] = flip[i] * float(sense[i])
        W[i, rhs_w] = flip[i] * b[i]
        if needs_art[i]:
            W[i, n_real + a] = 1.0
            basis[i] = n_real + a
            a += 1
        else:
            basis[i] = slack_col[i]
    # phase one: maximise -sum(artificials)
    for i in range(m):
        if needs_art[i]:
            for j in range(n_real):
                W[m, j] -= W[i, j]
            W[m, rhs_w] -= W[i, rhs_w]
    status, piv1 = primal_simplex(W, basis, n_real, MAX_ITER)
    if status != OPTIMAL or W[m, rhs_w] < -1e-8:
        return INFEASIBLE, piv1
    for i in range(m):
        if basis[i] >= n_real:
            col = -1
            big = 1e-9
            for j in range(n_real):
                if abs(W[i, j]) > big:
                    big = abs(W[i, j])
                    col = j
            if col >= 0:
                _pivot(W, basis, i, col)
                piv1 += 1
            else:
                for j in range(n_real + n_art + 1):
                    W[i, j] = 0.0
                basis[i] = -1
    for i in range(m + 1):
        for j in range(n_real):
            T[i, j] = W[i, j]
        T[i, n_real] = W[i, rhs_w]
    set_objective(T, basis, c)
    status, piv2 = primal_simplex(T, basis, n_real, MAX_ITER)
    return status, piv1 + piv2


@njit(cache=True)
def extract(T, basis, n, out):
    rhs = T.shape[1] - 1
    for j in range(n):
        out[j] = 0.0
    for i in range(T.shape[0] - 1):
        b = basis[i]
        if 0 <= b < n:
            out[b] = T[i, rhs]


@njit(cache=True)
def warm_solve(T, basis, c, slack_col, slack_sign, delta_rhs):
    """Re-optimise a final tableau after new objective ``c`` and a shift of one row's rhs."""
    m = T.shape[0] - 1
    ncols = T.shape[1] - 1
    rhs = ncols
    if delta_rhs != 0.0:
        f = slack_sign * delta_rhs
        for i in range(m):
            T[i, rhs] += f * T[i, slack_col]
    status, p1 = dual_simplex(T, basis, ncols, MAX_ITER)
    if status != OPTIMAL:
        return status, p1
    set_objective(T, basis, c)
    status, p2 = primal_simplex(T, basis, ncols, MAX_ITER)
    return status, p1 + p2


@dataclass
class LPResult:
    status: int
    x: np.ndarray
    objective: float
    pivots: int


def solve_lp(A, b, sense, c) -> LPResult:
    """Solve ``max c.z`` subject to mixed-sense rows and ``z >= 0``."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    sense = np.ascontiguousarray(sense, dtype=np.int64)
    m, n = A.shape
    n_real = n + int(n_columns(sense))
    c_full = np.zeros(n_real)
    c_full[:n] = c
    T = np.zeros((m + 1, n_real + 1))
    basis = np.zeros(m, dtype=np.int64)
    status, pivots = cold_solve(A, b, sense, c_full, T, basis)
    x = np.zeros(n)
    if status == OPTIMAL:
        extract(T, basis, n, x)
    return LPResult(int(status), x, float(c @ x), int(pivots))


# sequence-form programs ----------------------------------------------------


@dataclass
class SequenceFormProgram:
    """Constraint data of the agent's best-guarantee program.

    The safety row, when present, is the last row; its rhs is set per solve.
    """

    A: np.ndarray
    b: np.ndarray
    sense: np.ndarray
    agent: int
    n_x: int
    shift: float
    q_root: int
    safety_row: int  # -1 without a safety row
    safety_slack: int

    @property
    def n_real(self) -> int:
        return self.A.shape[1] + int(n_columns(self.sense))

    def objective(self, c_x: np.ndarray | None = None, value: bool = False) -> np.ndarray:
        c = np.zeros(self.n_real)
        if c_x is not None:
            c[: self.n_x] = c_x[1:]
        if value:
            c[self.q_root] = 1.0
        return c


def sequence_form_program(cg: CompiledGame, agent: int, safety: bool) -> SequenceFormProgram:
    L = cg.layout
    p = agent - 1
    o = 1 - p
    sign = 1.0 if p == 0 else -1.0
    n_x = int(L.n_seq[p]) - 1
    n_q = int(L.n_inf[o]) + 1
    shift = cg.max_abs_utility + 1.0
    rows: list[np.ndarray] = []
    rhs: list[float] = []
    senses: list[int] = []
    nv = n_x + n_q

    for j in range(L.n_inf[p]):
        row = np.zeros(nv)
        st, na, par = L.inf_start[p, j], L.inf_nact[p, j], L.inf_parent[p, j]
        row[st - 1 : st - 1 + na] = 1.0
        bj = 0.0
        if par == 0:
            bj = 1.0
        else:
            row[par - 1] -= 1.0
        rows.append(row)
        rhs.append(bj)
        senses.append(EQ)

    children: dict[int, list[int]] = {}
    for j in range(L.n_inf[o]):
        children.setdefault(int(L.inf_parent[o, j]), []).append(j)
    for s in range(L.n_seq[o]):
        row = np.zeros(nv)
        if s == 0:
            row[n_x] = 1.0
        else:
            row[n_x + 1 + L.seq_inf[o, s]] = 1.0
        for j in children.get(s, []):
            row[n_x + 1 + j] -= 1.0
        bs = shift * row[n_x:].sum()
        for z in range(L.term_w.shape[0]):
            if L.term_seq[o, z] != s:
                continue
            coef = sign * L.term_w[z]
            sp = L.term_seq[p, z]
            if sp == 0:
                bs += coef
            else:
                row[sp - 1] -= coef
        rows.append(row)
        rhs.append(bs)
        senses.append(LE)

    safety_row = -1
    if safety:
        row = np.zeros(nv)
        row[n_x] = 1.0
        rows.append(row)
        rhs.append(shift)
        senses.append(GE)
        safety_row = len(rows) - 1
    sense = np.array(senses, dtype=np.int64)
    n_slack_before = int(np.count_nonzero(sense[: max(safety_row, 0)] != EQ))
    safety_slack = nv + n_slack_before if safety else -1
    return SequenceFormProgram(
        np.array(rows), np.array(rhs), sense, agent, n_x, shift, n_x, safety_row, safety_slack
    )


def program_for(cg: CompiledGame, agent: int, safety: bool) -> SequenceFormProgram:
    key = ("program", agent, safety)
    prog = cg.tree._cache.get(key)
    if prog is None:
        prog = sequence_form_program(cg, agent, safety)
        cg.tree._cache[key] = prog
    return prog

