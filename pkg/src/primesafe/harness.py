"""Repeated-match experiments: configuration, simulation, statistics and reports.

Every repetition r of every cell draws its hands from the same seed,
derived from the master seed and r alone, so cells are compared on common
random numbers and results do not depend on how repetitions are spread over
worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import engine, kernels
from .abstraction import Abstraction, ladder, lift_strategy
from .exploit import KINDS, DecisionTrace, Policy, select_strategy, settle_hand
from .game import GameSpec, GameTree, build_game
from .model import PRIOR_HANDS, init_model
from .opponents import Opponent, OpponentSpec, make_opponent, opponent_strategy_for_hand, train_equilibrium
from .solver import MCCFRResult, mccfr_solve
from .strategy import BehavioralStrategy, sample_hand

log = logging.getLogger(__name__)

CSV_COLUMNS = ("algorithm", "abstraction", "v_prime", "opponent", "mean", "ci95", "hands", "reps", "seed")
DEFAULT_REPS = 2000
PAPER_REPS = 40_000
Z95 = 1.96


# configuration ---------------------------------------------------------------


@dataclass
class ExperimentConfig:
    game: GameSpec = field(default_factory=lambda: GameSpec(6, (1,)))
    abstractions: list[Abstraction] | None = None  # None: the game's full ladder
    algorithms: list[str] = field(default_factory=lambda: list(KINDS))
    opponents: list[OpponentSpec] = field(
        default_factory=lambda: [OpponentSpec(k) for k in ("random", "sophisticated", "dynamic", "equilibrium")]
    )
    hands: int = 1000
    repetitions: int = DEFAULT_REPS
    seed: int = 0
    solver_iterations: int = 10_000_000
    solver_target: float = 1e-3
    prior_hands: float = PRIOR_HANDS
    eeffe_gate: str = "exploitability"
    workers: int = 1
    output: str | None = None
    format: str = "csv"

    def __post_init__(self) -> None:
        if self.hands < 1:
            raise ValueError(f"hands must be >= 1, got {self.hands}")
        if self.repetitions < 1:
            raise ValueError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        for a in self.algorithms:
            if a not in KINDS:
                raise ValueError(f"unknown algorithm {a!r}; choose from {KINDS}")
        if self.format not in ("csv", "markdown", "both"):
            raise ValueError(f"unknown output format {self.format!r}")
        if self.eeffe_gate not in ("exploitability", "printed"):
            raise ValueError(f"unknown EEFFE gate {self.eeffe_gate!r}")
        if self.abstractions is None:
            self.abstractions = ladder(self.game)

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        obj = dict(obj)
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        if "game" in obj:
            obj["game"] = GameSpec.from_json(obj["game"])
        if obj.get("abstractions") is not None:
            obj["abstractions"] = [Abstraction.parse(a) for a in obj["abstractions"]]
        if "opponents" in obj:
            obj["opponents"] = [OpponentSpec.from_json(o) for o in obj["opponents"]]
        return cls(**obj)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_json(self) -> dict:
        return {
            "game": self.game.to_json(),
            "abstractions": [a.key for a in self.abstractions],
            "algorithms": list(self.algorithms),
            "opponents": [o.to_json() for o in self.opponents],
            "hands": self.hands, "repetitions": self.repetitions, "seed": self.seed,
            "solver_iterations": self.solver_iterations, "solver_target": self.solver_target,
            "prior_hands": self.prior_hands, "eeffe_gate": self.eeffe_gate, "workers": self.workers,
            "output": self.output, "format": self.format,
        }


def _stable_id(text: str) -> int:
    return zlib.crc32(text.encode("utf-8"))


def repetition_seed(master: int, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master, spawn_key=(0, rep))


def static_seed(master: int, game: GameSpec, rung: Abstraction) -> np.random.SeedSequence:
    return np.random.SeedSequence(master, spawn_key=(1, _stable_id(f"{game.label}/{rung.key}")))


def opponent_seed(master: int, game: GameSpec) -> np.random.SeedSequence:
    return np.random.SeedSequence(master, spawn_key=(2, _stable_id(game.label)))


# results ----------------------------------------------------------------------


@dataclass
class MatchResult:
    payoffs: np.ndarray
    k_min: float
    k_final: float
    trace: DecisionTrace | None = None
    mode_counts: np.ndarray | None = None  # hands played in each mode

    @property
    def total(self) -> float:
        return float(self.payoffs.sum())

    @property
    def mean(self) -> float:
        return self.total / len(self.payoffs)


@dataclass(frozen=True)
class ExperimentRow:
    algorithm: str
    abstraction: str
    v_prime: float
    opponent: str
    mean: float
    ci95: float
    hands: int
    reps: int
    seed: int


@dataclass
class CellDetail:
    """Per-cell data kept in memory for analysis; not part of the emitted table."""

    rep_means: np.ndarray
    k_min: float
    modes: np.ndarray  # hands played in each mode, summed over repetitions

    @property
    def standard_error(self) -> float:
        n = len(self.rep_means)
        return float(np.std(self.rep_means, ddof=1) / math.sqrt(n)) if n > 1 else float("nan")


@dataclass
class ExperimentTable:
    rows: list[ExperimentRow] = field(default_factory=list)
    game: str = ""
    details: dict = field(default_factory=dict)  # (algorithm, abstraction, opponent) -> CellDetail
    notes: list[str] = field(default_factory=list)

    def row(self, algorithm: str, abstraction: str, opponent: str) -> ExperimentRow:
        for r in self.rows:
            if (r.algorithm, r.abstraction, r.opponent) == (algorithm, abstraction, opponent):
                return r
        raise KeyError((algorithm, abstraction, opponent))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExperimentTable):
            return NotImplemented
        return _rows_equal(self.rows, other.rows)


def _rows_equal(a, b) -> bool:
    if len(a) != len(b):
        return False
    for x, y in zip(a, b):
        for fx, fy in zip(vars(x).values(), vars(y).values()):
            if isinstance(fx, float) and math.isnan(fx) and isinstance(fy, float) and math.isnan(fy):
                continue
            if fx != fy:
                return False
    return True


def summarize_ci(per_rep_means) -> tuple[float, float]:
    """Mean and normal-approximation 95% half-width (sample SD with n - 1)."""
    x = np.asarray(per_rep_means, dtype=np.float64)
    if x.size == 0:
        raise ValueError("need at least one repetition")
    mean = float(x.mean())
    if x.size == 1:
        warnings.warn("one repetition: confidence interval undefined", RuntimeWarning, stacklevel=2)
        return mean, float("nan")
    return mean, float(Z95 * x.std(ddof=1) / math.sqrt(x.size))


# matches -------------------------------------------------------------------------


def run_match(tree: GameTree, policy: Policy, opponent: Opponent, T: int, seed) -> MatchResult:
    """Play ``T`` hands one at a time through the object-level API."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if policy.ledger.t != 1 or policy.ledger.T != T:
        raise ValueError("run_match needs a fresh policy built for this horizon")
    if policy.model is not None and policy.model.hands_seen:
        raise ValueError("run_match needs a fresh opponent model")
    rng = np.random.default_rng(seed)
    payoffs = np.empty(T)
    for t in range(1, T + 1):
        s1 = select_strategy(policy)
        s2 = opponent_strategy_for_hand(opponent, t, s1)
        hand = sample_hand(tree, s1, s2, rng)
        settle_hand(policy, s1, hand)
        payoffs[t - 1] = hand.utility
    k_after = np.array(policy.trace.k_after)
    modes = np.bincount(np.array(policy.trace.mode, dtype=np.int64), minlength=3)
    return MatchResult(payoffs, float(min(k_after.min(), 0.0)), float(policy.ledger.k), policy.trace, modes)


@dataclass
class Cell:
    """Everything a worker needs to play compiled matches for one table cell."""

    layout: tuple
    lp_template: kernels.LPWork
    scratch: kernels.Scratch
    algorithm: int
    gate: int
    horizon: int
    v_prime: float
    sigma0_beh: np.ndarray
    sigma0_plan: np.ndarray
    prior_counts: np.ndarray
    opp_kind: int
    switch_hand: int
    opp_a: np.ndarray
    opp_b: np.ndarray
    max_seq: int

    @classmethod
    def build(cls, tree: GameTree, algorithm: str, static: BehavioralStrategy, prior: BehavioralStrategy,
              opponent: Opponent, horizon: int, prior_hands: float = PRIOR_HANDS, gate: str = "exploitability") -> "Cell":
        cg = engine.compile_game(tree)
        scratch = kernels.make_scratch(cg)
        plan0 = cg.plan(static)
        counts = prior_hands * cg.behavior_vector(prior)
        counts[0] = 0.0
        opp_a = cg.behavior_vector(opponent.first)
        opp_b = cg.behavior_vector(opponent.second) if opponent.second is not None else opp_a
        return cls(
            cg.layout, kernels.make_lp_work(cg), scratch, kernels.ALGORITHMS[algorithm],
            kernels.GATE_PRINTED if gate == "printed" else kernels.GATE_EXPLOITABILITY, int(horizon),
            float(kernels.plan_worst_case(cg.layout, scratch, plan0)), cg.behavior_vector(static), plan0, counts,
            opponent.kernel_kind, int(opponent.spec.switch_hand), opp_a, opp_b, int(cg.layout.n_seq.max()),
        )

    def fresh_lp(self) -> kernels.LPWork:
        w = self.lp_template
        return w._replace(b=w.b.copy(), T=np.zeros_like(w.T), basis=np.zeros_like(w.basis), state=np.zeros(3))

    def play(self, seed, trace: bool = False) -> MatchResult:
        T = self.horizon
        L = self.layout
        draws = np.random.default_rng(seed).random((T, L.max_depth))
        payoffs = np.empty(T)
        modes = np.empty(T, dtype=np.int64)
        eps, k_before, gifts, k_after = (np.empty(T) for _ in range(4))
        k = kernels.play_match(
            L, self.fresh_lp(), self.scratch, self.algorithm, self.gate, T, self.v_prime,
            self.sigma0_beh, self.sigma0_plan, self.prior_counts.copy(), self.opp_kind, self.switch_hand,
            self.opp_a, self.opp_b, draws, np.empty(self.max_seq), np.empty(self.max_seq),
            payoffs, modes, eps, k_before, gifts, k_after,
        )
        tr = DecisionTrace.from_arrays(modes, eps, k_before, gifts, k_after) if trace else None
        return MatchResult(payoffs, float(min(k_after.min(), 0.0)), float(k), tr, np.bincount(modes, minlength=3))


def _play_block(cell: Cell, master: int, reps: range):
    means = np.empty(len(reps))
    k_min = 0.0
    modes = np.zeros(3, dtype=np.int64)
    for i, r in enumerate(reps):
        res = cell.play(repetition_seed(master, r))
        means[i] = res.mean
        k_min = min(k_min, res.k_min)
        modes += res.mode_counts
    return means, k_min, modes


def play_repetitions(cell: Cell, master: int, repetitions: int, workers: int = 1):
    """Per-repetition means, min k and mode counts; identical for any worker count."""
    if workers <= 1 or repetitions < 2:
        return _play_block(cell, master, range(repetitions))
    blocks = np.array_split(np.arange(repetitions), workers)
    ranges = [range(int(b[0]), int(b[-1]) + 1) for b in blocks if len(b)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_play_block, [cell] * len(ranges), [master] * len(ranges), ranges))
    return (
        np.concatenate([p[0] for p in parts]),
        min(p[1] for p in parts),
        sum((p[2] for p in parts), np.zeros(3, dtype=np.int64)),
    )


# experiments --------------------------------------------------------------------


@dataclass
class StaticProfile:
    """Lifted full-game profile trained in one abstraction rung."""

    rung: Abstraction
    p1: BehavioralStrategy
    p2: BehavioralStrategy
    training: MCCFRResult


def train_static(full: GameTree, rung: Abstraction, iterations: int, target: float, seed) -> StaticProfile:
    bmap = rung.bucket_map(full.spec)
    abstract = build_game(rung.abstract_spec(full.spec)) if rung.kind != "none" else full
    result = mccfr_solve(abstract, iterations, seed=seed, target=target)
    s1, s2 = result.profile
    if rung.kind != "none":
        s1 = lift_strategy(abstract, full, bmap, s1)
        s2 = lift_strategy(abstract, full, bmap, s2)
    return StaticProfile(rung, s1, s2, result)


def run_experiment(config: ExperimentConfig, trace_dir: str | Path | None = None) -> ExperimentTable:
    """Fill one table row per (algorithm, abstraction, opponent)."""
    full = build_game(config.game)
    table = ExperimentTable(game=config.game.label)
    statics = {}
    for rung in config.abstractions:
        prof = train_static(full, rung, config.solver_iterations, config.solver_target,
                            static_seed(config.seed, config.game, rung))
        if not prof.training.converged:
            note = (f"static strategy for {rung.label} stopped at {prof.training.iterations} iterations "
                    f"with exploitability {max(prof.training.exploitability):.3g}")
            table.notes.append(note)
            log.warning(note)
        statics[rung.key] = prof
    equilibrium = None
    eq_spec = next((o for o in config.opponents if o.needs_equilibrium), None)
    if eq_spec is not None:
        equilibrium = train_equilibrium(full, eq_spec, opponent_seed(config.seed, config.game))
        if not equilibrium.converged:
            table.notes.append(f"equilibrium opponent stopped at {equilibrium.iterations} iterations")

    if trace_dir is not None:
        Path(trace_dir).mkdir(parents=True, exist_ok=True)
    for algorithm in config.algorithms:
        for rung in config.abstractions:
            prof = statics[rung.key]
            for ospec in config.opponents:
                opp = make_opponent(full, ospec, prof.p1, equilibrium=equilibrium if ospec.needs_equilibrium else None)
                cell = Cell.build(full, algorithm, prof.p1, prof.p2, opp, config.hands,
                                  config.prior_hands, config.eeffe_gate)
                means, k_min, modes = play_repetitions(cell, config.seed, config.repetitions, config.workers)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore" if config.repetitions > 1 else "default")
                    mean, ci = summarize_ci(means)
                table.rows.append(ExperimentRow(
                    algorithm, rung.label, cell.v_prime, ospec.label, mean, ci,
                    config.hands, config.repetitions, config.seed,
                ))
                table.details[(algorithm, rung.label, ospec.label)] = CellDetail(means, k_min, modes)
                log.info("%s %s %s vs %s: %.4f ± %.4f", config.game.label, algorithm, rung.label, ospec.label, mean, ci)
                if trace_dir is not None:
                    res = cell.play(repetition_seed(config.seed, 0), trace=True)
                    name = f"{algorithm}_{rung.key.replace('=', '')}_{ospec.kind}_rep0.csv"
                    res.trace.write_csv(Path(trace_dir) / name)
    return table


# reports ----------------------------------------------------------------------------


def format_csv(table: ExperimentTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in table.rows:
        writer.writerow([r.algorithm, r.abstraction, repr(r.v_prime), r.opponent, repr(r.mean),
                         repr(r.ci95), r.hands, r.reps, r.seed])
    return buf.getvalue()


def parse_csv(text: str) -> ExperimentTable:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"expected columns {CSV_COLUMNS}, got {reader.fieldnames}")
    rows = [
        ExperimentRow(d["algorithm"], d["abstraction"], float(d["v_prime"]), d["opponent"], float(d["mean"]),
                      float(d["ci95"]), int(d["hands"]), int(d["reps"]), int(d["seed"]))
        for d in reader
    ]
    return ExperimentTable(rows)


def read_csv(path: str | Path) -> ExperimentTable:
    return parse_csv(Path(path).read_text(encoding="utf-8"))


def format_markdown(table: ExperimentTable) -> str:
    """Algorithms as row groups, abstraction rungs within each group, opponents as columns."""
    opponents = list(dict.fromkeys(r.opponent for r in table.rows))
    lines = []
    if table.game:
        lines += [f"**{table.game}**", ""]
    lines.append("| Algorithm | Abstraction | v1' | " + " | ".join(opponents) + " |")
    lines.append("|---|---|---|" + "---|" * len(opponents))
    groups: dict[tuple[str, str], dict[str, ExperimentRow]] = {}
    for r in table.rows:
        groups.setdefault((r.algorithm, r.abstraction), {})[r.opponent] = r
    last_alg = None
    for (alg, abstraction), cells in groups.items():
        first = next(iter(cells.values()))
        shown = alg if alg != last_alg else ""
        last_alg = alg
        vals = [f"{cells[o].mean:.4f} ± {cells[o].ci95:.4f}" if o in cells else "" for o in opponents]
        lines.append(f"| {shown} | {abstraction} | {first.v_prime:.4f} | " + " | ".join(vals) + " |")
    return "\n".join(lines) + "\n"


def emit_report(table: ExperimentTable, fmt: str, path: str | Path | None = None) -> str:
    """Render ``table`` as ``csv`` or ``markdown``; writes it to ``path`` when given."""
    if not table.rows:
        raise ValueError("cannot report an empty table")
    if fmt == "csv":
        text = format_csv(table)
    elif fmt == "markdown":
        text = format_markdown(table)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def paper_scale(config: ExperimentConfig) -> ExperimentConfig:
    return replace(config, repetitions=PAPER_REPS)
