"""Reference interpreter for the small-step fork/join semantics.

Global configurations are canonical: the thread multiset is a sorted tuple,
so configurations reached by symmetric interleavings compare equal and can
be deduplicated in a plain ``set``.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

from .lang import (
    FAIL,
    OMEGA,
    Assert,
    Assign,
    Assume,
    Command,
    Fork,
    If,
    Join,
    Program,
    Remainder,
    Value,
    While,
    eval_expr,
    format_command,
    negate,
    seq,
    split,
)


class LocalConfig(NamedTuple):
    remainder: Remainder
    template: str
    tid: int | None  # None is the start thread's ⊥
    locals: tuple[tuple[str, Value], ...]


class GlobalConfig(NamedTuple):
    threads: tuple[LocalConfig, ...]
    globals: tuple[tuple[str, Value], ...]

    def width(self) -> int:
        return max(Counter(t.template for t in self.threads).values(), default=0)

    def is_erroneous(self) -> bool:
        return any(t.remainder is FAIL for t in self.threads)


@dataclass(frozen=True)
class Step:
    statement: Command  # the simple statement labelling the step
    actor: int
    partner: int | None = None  # index of the joined thread


@lru_cache(maxsize=None)
def _remainder_key(r: Remainder) -> str:
    return format_command(r)


def _local_key(lc: LocalConfig):
    tid = (0, 0) if lc.tid is None else (1, lc.tid)
    return (lc.template, tid, _remainder_key(lc.remainder), lc.locals)


def make_config(threads, globals_) -> GlobalConfig:
    return GlobalConfig(
        tuple(sorted(threads, key=_local_key)),
        tuple(sorted(globals_.items() if isinstance(globals_, dict) else globals_)),
    )


def initial_config(p: Program) -> GlobalConfig:
    start = LocalConfig(p.body(p.main), p.main, None, tuple(sorted(p.zero_locals(p.main).items())))
    return make_config([start], p.zero_globals())


def successors(p: Program, cfg: GlobalConfig) -> list[tuple[Step, GlobalConfig]]:
    """All one-step successors, ordered by acting thread then rule."""
    out = []
    globals_ = dict(cfg.globals)
    threads = cfg.threads
    for idx, lc in enumerate(threads):
        if idx > 0 and lc == threads[idx - 1]:
            continue  # an identical thread yields identical successors
        if lc.remainder is OMEGA or lc.remainder is FAIL:
            continue
        first, rest = split(lc.remainder)
        local = dict(lc.locals)
        state = {**local, **globals_}
        others = threads[:idx] + threads[idx + 1 :]

        def moved(remainder, new_local=lc.locals, new_globals=globals_, extra=(), drop=None):
            rest_threads = list(others) if drop is None else [t for j, t in enumerate(others) if j != drop]
            return make_config([lc._replace(remainder=remainder, locals=new_local), *rest_threads, *extra], new_globals)

        match first:
            case Assume(cond=e):
                if eval_expr(e, state):
                    out.append((Step(first, idx), moved(rest)))
            case Assign(target=x, expr=e):
                v = eval_expr(e, state)
                if x in p.globals:
                    out.append((Step(first, idx), moved(rest, new_globals={**globals_, x: v})))
                else:
                    local[x] = v
                    out.append((Step(first, idx), moved(rest, new_local=tuple(sorted(local.items())))))
            case Assert(cond=e):
                if eval_expr(e, state):
                    out.append((Step(Assume(e, first.span), idx), moved(rest)))
                else:
                    out.append((Step(Assume(negate(e), first.span), idx), moved(FAIL)))
            case If(cond=e, then=c1, orelse=c2):
                if eval_expr(e, state):
                    out.append((Step(Assume(e, first.span), idx), moved(seq(c1, rest))))
                else:
                    out.append((Step(Assume(negate(e), first.span), idx), moved(seq(c2, rest))))
            case While(cond=e, body=c):
                if eval_expr(e, state):
                    out.append((Step(Assume(e, first.span), idx), moved(seq(c, lc.remainder))))
                else:
                    out.append((Step(Assume(negate(e), first.span), idx), moved(rest)))
            case Fork(tid=e, template=t):
                child = LocalConfig(p.body(t), t, eval_expr(e, state), tuple(sorted(p.zero_locals(t).items())))
                out.append((Step(first, idx), moved(rest, extra=(child,))))
            case Join(tid=e):
                want = eval_expr(e, state)
                for j, other in enumerate(others):
                    if other.remainder is OMEGA and other.tid == want and (j == 0 or other != others[j - 1]):
                        partner = j if j < idx else j + 1
                        out.append((Step(first, idx, partner), moved(rest, drop=j)))
            case _:
                raise TypeError(f"unexpected statement {first!r}")
    return out


@dataclass
class ExploreResult:
    reachable: set
    erroneous: bool
    max_width: int
    exhausted: bool
    depth: int = 0
    parents: dict | None = None

    def trace_to(self, cfg: GlobalConfig) -> list[GlobalConfig]:
        """Configurations along the BFS path from the initial one to ``cfg``."""
        path = [cfg]
        while self.parents[path[-1]] is not None:
            path.append(self.parents[path[-1]])
        return path[::-1]


def explore(p: Program, max_configs: int = 10**6, max_depth: int | None = None) -> ExploreResult:
    """Breadth-first closure of :func:`successors` from the initial configuration."""
    init = initial_config(p)
    parents: dict = {init: None}
    frontier = deque([(init, 0)])
    max_width = init.width()
    erroneous = init.is_erroneous()
    exhausted = True
    depth = 0
    while frontier:
        cfg, d = frontier.popleft()
        depth = max(depth, d)
        succ = successors(p, cfg)
        if max_depth is not None and d >= max_depth:
            if succ:
                exhausted = False
            continue
        for _, nxt in succ:
            if nxt in parents:
                continue
            if len(parents) >= max_configs:
                exhausted = False
                break
            parents[nxt] = cfg
            max_width = max(max_width, nxt.width())
            erroneous = erroneous or nxt.is_erroneous()
            frontier.append((nxt, d + 1))
        if not exhausted and len(parents) >= max_configs:
            break
    return ExploreResult(set(parents), erroneous, max_width, exhausted, depth, parents)


def width_of_execution(trace) -> int:
    return max((cfg.width() for cfg in trace), default=0)


def steps_along(p: Program, path: list[GlobalConfig]) -> list[tuple[Step, LocalConfig]]:
    """The step (and its acting thread) between each consecutive pair of ``path``."""
    out = []
    for prev, nxt in zip(path, path[1:]):
        step = next(s for s, c in successors(p, prev) if c == nxt)
        out.append((step, prev.threads[step.actor]))
    return out
