"""Command-line entry point: ``forkjoin {verify,petrify,simulate,difftest}``."""

from __future__ import annotations

import argparse
import sys

from . import difftest as dt
from .driver import ALGORITHMS, DEFAULT_BETA_MAX, Limits, report
from .interp import explore, steps_along
from .lang import format_statement
from .parse import ParseError, parse_file
from .petri import to_dot, validate
from .petrify import ProgramLoc, petrify, specifications
from .reach import DEFAULT_MAX_STATES

EXIT_OK, EXIT_INCORRECT, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 3

_VERDICT_EXIT = {
    "correct": EXIT_OK,
    "incorrect": EXIT_INCORRECT,
    "beta-limit-exceeded": EXIT_INCONCLUSIVE,
    "resource-limit": EXIT_INCONCLUSIVE,
}


def positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="forkjoin", description="Verify fork/join programs via Petri programs.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("verify", help="verify safety under an inferred thread limit")
    v.add_argument("file")
    v.add_argument("--algorithm", type=int, choices=sorted(ALGORITHMS), default=1)
    v.add_argument("--beta-init", type=positive, default=1)
    v.add_argument("--beta-max", type=positive, default=DEFAULT_BETA_MAX)
    v.add_argument("--max-states", type=positive, default=DEFAULT_MAX_STATES)
    v.add_argument("--max-depth", type=positive, default=None)
    v.add_argument("--format", choices=["text", "json"], default="text")

    p = sub.add_parser("petrify", help="build the Petri program for a fixed thread limit")
    p.add_argument("file")
    p.add_argument("--beta", type=positive, required=True)
    p.add_argument("--dot", metavar="PATH", help="write Graphviz DOT to PATH ('-' for stdout)")
    p.add_argument("--stats", action="store_true", help="print place and transition counts")

    s = sub.add_parser("simulate", help="explore the program with the reference interpreter")
    s.add_argument("file")
    s.add_argument("--max-configs", type=positive, default=10**6)

    d = sub.add_parser("difftest", help="differential test on random programs")
    d.add_argument("--seed", type=int, default=42)
    d.add_argument("--count", type=positive, default=100)
    d.add_argument("--max-templates", type=positive, default=dt.Bounds.max_templates)
    d.add_argument("--max-forks", type=positive, default=dt.Bounds.max_fork_sites)
    d.add_argument("--max-loop", type=positive, default=dt.Bounds.max_loop_bound)
    return ap


def _verify(args) -> int:
    program = parse_file(args.file)
    if args.beta_init > args.beta_max:
        print("forkjoin: error: --beta-init exceeds --beta-max", file=sys.stderr)
        return EXIT_USAGE
    limits = Limits(args.max_states, args.max_depth)
    outcome = ALGORITHMS[args.algorithm](program, args.beta_init, args.beta_max, limits)
    sys.stdout.write(report(outcome, args.format))
    if args.format == "json":
        sys.stdout.write("\n")
    return _VERDICT_EXIT[outcome.verdict]


def _petrify(args) -> int:
    program = parse_file(args.file)
    net = petrify(program, args.beta)
    validate(net)
    if args.dot:
        text = to_dot(net)
        if args.dot == "-":
            sys.stdout.write(text)
        else:
            with open(args.dot, "w", encoding="utf-8") as f:
                f.write(text)
    if args.stats or not args.dot:
        safety, bound = specifications(net)
        program_places = sum(isinstance(q, ProgramLoc) for q in net.places)
        kinds = {}
        for t in net.transitions:
            kinds[t.kind] = kinds.get(t.kind, 0) + 1
        print(f"beta: {args.beta}")
        print(f"places: {len(net.places)} ({program_places} program, {len(net.places) - program_places} bookkeeping)")
        print(f"transitions: {len(net.transitions)} " + "(" + ", ".join(f"{n} {k}" for k, n in sorted(kinds.items())) + ")")
        print(f"variables: {len(net.var_types)}")
        print(f"error places: {len(safety.bad)}")
        print(f"insufficiency places: {len(bound.bad)}")
    return EXIT_OK


def _simulate(args) -> int:
    program = parse_file(args.file)
    res = explore(program, max_configs=args.max_configs)
    print(f"erroneous: {str(res.erroneous).lower()}")
    print(f"max_width: {res.max_width}")
    print(f"exhausted: {str(res.exhausted).lower()}")
    print(f"configurations: {len(res.reachable)}")
    if res.erroneous:
        bad = next(c for c in res.parents if c.is_erroneous())  # BFS order: shortest
        print("error trace:")
        for i, (step, thread) in enumerate(steps_along(program, res.trace_to(bad)), 1):
            who = f"{thread.template}[{'main' if thread.tid is None else thread.tid}]"
            print(f"  {i:>3}. {who:<10} {format_statement(step.statement)}")
        return EXIT_INCORRECT
    return EXIT_OK if res.exhausted else EXIT_INCONCLUSIVE


def _difftest(args) -> int:
    bounds = dt.Bounds(args.max_templates, args.max_forks, args.max_loop)
    rep = dt.run(args.seed, args.count, bounds)
    sys.stdout.write(rep.render())
    return EXIT_OK if not rep.failed else EXIT_INCORRECT


_COMMANDS = {"verify": _verify, "petrify": _petrify, "simulate": _simulate, "difftest": _difftest}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except ParseError as exc:
        for d in exc.diagnostics:
            print(d, file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"forkjoin: error: {exc.strerror or exc}: {exc.filename}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
