"""Command line: ``solve``, ``eval`` and ``run``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import harness, oracle
from .abstraction import Abstraction
from .game import GameSpec, build_game
from .lp import LPError
from .opponents import KINDS as OPPONENT_KINDS, OpponentSpec
from .solver import vanilla_cfr
from .strategy import read_strategy, write_strategy

log = logging.getLogger("primesafe")


def _game(text: str) -> GameSpec:
    try:
        return GameSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _abstraction(text: str) -> Abstraction:
    try:
        return Abstraction.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="primesafe", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="train a static strategy (abstract game, lifted to the full game)")
    p.add_argument("--game", type=_game, default=GameSpec(), help="kuhn, kuhn6, kuhn4bet or cards=N;bets=a,b,...")
    p.add_argument("--abstraction", type=_abstraction, default=Abstraction(), help="none, cards=<n> or bets=<n>")
    p.add_argument("--iters", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target", type=float, default=None, help="stop early once exploitability is below this")
    p.add_argument("--vanilla", action="store_true", help="full-traversal CFR instead of external sampling")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("eval", help="print game value, worst-case value and exploitability of a strategy")
    p.add_argument("--game", type=_game, default=GameSpec())
    p.add_argument("--strategy", type=Path, required=True)
    p.add_argument("--player", type=int, choices=(1, 2), default=1)
    p.add_argument("--header", action="store_true", help="print a header line first")

    p = sub.add_parser("run", help="run an experiment grid from a JSON config")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--paper-scale", action="store_true", help=f"use {harness.PAPER_REPS} repetitions")
    p.add_argument("--trace", type=Path, default=None, metavar="DIR", help="write per-hand decision traces here")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", type=Path, default=None, help="overrides the config's output path")
    p.add_argument("--format", choices=("csv", "markdown", "both"), default=None)
    p.add_argument("--opponent", action="append", choices=OPPONENT_KINDS, default=None,
                   help="replace the config's opponent list (repeatable)")
    p.add_argument("--switch-hand", type=int, default=None)
    p.add_argument("--mix-p", type=float, default=None)
    return parser


def cmd_solve(args) -> int:
    full = build_game(args.game)
    rung = args.abstraction
    if args.iters < 1:
        raise ValueError("--iters must be >= 1")
    if args.vanilla:
        from .abstraction import lift_strategy

        abstract = build_game(rung.abstract_spec(args.game)) if rung.kind != "none" else full
        s1, s2 = vanilla_cfr(abstract, args.iters)
        if rung.kind != "none":
            bmap = rung.bucket_map(args.game)
            s1, s2 = lift_strategy(abstract, full, bmap, s1), lift_strategy(abstract, full, bmap, s2)
    else:
        prof = harness.train_static(full, rung, args.iters, args.target, args.seed)
        s1, s2 = prof.p1, prof.p2
    write_strategy(args.out, s1, s2)
    for p, s in ((1, s1), (2, s2)):
        log.info("P%d exploitability in %s: %.6g", p, args.game.label, oracle.exploitability(full, p, s))
    return 0


def cmd_eval(args) -> int:
    tree = build_game(args.game)
    strategies = read_strategy(tree, args.strategy)
    if args.player not in strategies:
        raise ValueError(f"{args.strategy} holds no strategy for P{args.player}")
    rep = oracle.value_report(tree, args.player, strategies[args.player])
    if args.header:
        print("v,v_prime,expl")
    print(f"{rep.game_value!r},{rep.worst_case!r},{rep.exploitability!r}")
    return 0


def cmd_run(args) -> int:
    config = harness.ExperimentConfig.load(args.config)
    if args.paper_scale:
        config = harness.paper_scale(config)
    changes = {}
    if args.workers is not None:
        changes["workers"] = args.workers
    if args.out is not None:
        changes["output"] = str(args.out)
    if args.format is not None:
        changes["format"] = args.format
    opponents = [OpponentSpec(k) for k in args.opponent] if args.opponent else config.opponents
    if args.switch_hand is not None or args.mix_p is not None:
        opponents = [
            replace(o, **{k: v for k, v in (("switch_hand", args.switch_hand), ("mix_p", args.mix_p)) if v is not None})
            for o in opponents
        ]
    changes["opponents"] = opponents
    config = replace(config, **changes)
    table = harness.run_experiment(config, trace_dir=args.trace)
    for note in table.notes:
        print(f"note: {note}", file=sys.stderr)
    formats = ("csv", "markdown") if config.format == "both" else (config.format,)
    for fmt in formats:
        path = None
        if config.output:
            path = Path(config.output)
            if config.format == "both":
                path = path.with_suffix(".md" if fmt == "markdown" else ".csv")
        text = harness.emit_report(table, fmt, path)
        if path is None:
            sys.stdout.write(text)
    return 0


COMMANDS = {"solve": cmd_solve, "eval": cmd_eval, "run": cmd_run}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, KeyError, LPError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
