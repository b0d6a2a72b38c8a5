"""Explicit-state reachability for Petri programs.

The search runs breadth-first over pairs (marking, data state).  Data states
are tuples indexed by the net's variable order; transition labels are
compiled once into small Python functions over those tuples.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from .lang import (
    ArrayValue,
    Assign,
    Assume,
    Binary,
    BoolLit,
    Expr,
    IntLit,
    Select,
    Store,
    Unary,
    Value,
    Var,
    format_statement,
    format_value,
    zero,
)
from .petri import PetriProgram, Transition, enabled, fire
from .petrify import PetrifiedProgram, ProgramLoc, Specification, deinstantiate

DEFAULT_MAX_STATES = 10**6


@dataclass
class Counterexample:
    transitions: list[Transition]
    states: list[dict]  # one more than transitions
    markings: list[frozenset]
    violated: frozenset


@dataclass
class Satisfied:
    states: int

    result = "satisfied"


@dataclass
class Violated:
    counterexample: Counterexample
    states: int

    result = "violated"


@dataclass
class Unknown:
    limit: str  # "states" or "depth"
    states: int

    result = "unknown"


Verdict = Satisfied | Violated | Unknown


# -- label compilation -------------------------------------------------------

_PY_OPS = {"&&": "and", "||": "or", "==": "==", "!=": "!=", "<": "<", "<=": "<=", ">": ">", ">=": ">=", "+": "+", "-": "-", "*": "*"}


def _py(e: Expr, index: dict) -> str:
    match e:
        case IntLit(value=v):
            return repr(v)
        case BoolLit(value=v):
            return repr(v)
        case Var(name=n):
            return f"s[{index[n]}]"
        case Unary(op="!", arg=a):
            return f"(not {_py(a, index)})"
        case Unary(op="-", arg=a):
            return f"(-{_py(a, index)})"
        case Binary(op=op, left=l, right=r):
            return f"({_py(l, index)} {_PY_OPS[op]} {_py(r, index)})"
        case Select(array=a, index=i):
            return f"{_py(a, index)}.get({_py(i, index)})"
        case Store(array=a, index=i, value=v):
            return f"{_py(a, index)}.set({_py(i, index)}, {_py(v, index)})"
    raise TypeError(f"cannot compile {e!r}")


def compile_label(label, index: dict) -> Callable[[tuple], tuple | None]:
    """Return ``step(s)`` giving the successor data tuple, or None if blocked."""
    if isinstance(label, Assume):
        src = f"lambda s: s if {_py(label.cond, index)} else None"
    elif isinstance(label, Assign):
        i = index[label.target]
        src = f"lambda s: s[:{i}] + ({_py(label.expr, index)},) + s[{i + 1}:]"
    else:
        raise TypeError(f"not an atomic statement: {label!r}")
    return eval(src, {"ArrayValue": ArrayValue})  # noqa: S307 - generated from our own AST


class _Compiled:
    def __init__(self, n: PetriProgram):
        self.vars = list(n.var_types)
        self.index = {v: i for i, v in enumerate(self.vars)}
        self.zero = tuple(zero(n.var_types[v]) for v in self.vars)
        self.steps = {t: compile_label(t.label, self.index) for t in n.transitions}

    def as_dict(self, data: tuple) -> dict:
        return dict(zip(self.vars, data))


_CACHE: dict[int, tuple[PetriProgram, _Compiled]] = {}


def _compiled(n: PetriProgram) -> _Compiled:
    hit = _CACHE.get(id(n))
    if hit is None or hit[0] is not n:
        if len(_CACHE) > 64:
            _CACHE.clear()
        hit = (n, _Compiled(n))
        _CACHE[id(n)] = hit
    return hit[1]


def initial_state(n: PetriProgram) -> dict:
    return {v: zero(ty) for v, ty in n.var_types.items()}


# -- search ----------------------------------------------------------------


def check(
    n: PetriProgram,
    spec: Specification,
    max_states: int = DEFAULT_MAX_STATES,
    max_depth: int | None = None,
    visit: Callable[[frozenset, dict], None] | None = None,
) -> Verdict:
    """Search for a data-feasible firing sequence that marks a place of ``spec``.

    ``visit(marking, state)`` is called once for every distinct product state
    reached (including the initial one), before any violation is reported.
    """
    cc = _compiled(n)
    bad = spec.bad
    start = (n.initial, cc.zero)
    parents: dict = {start: None}
    if visit:
        visit(n.initial, cc.as_dict(cc.zero))
    if n.initial & bad:
        return Violated(_counterexample(cc, parents, start, bad), 1)
    queue = deque([(start, 0)])
    depth_cut = False
    while queue:
        state, depth = queue.popleft()
        marking, data = state
        if max_depth is not None and depth >= max_depth:
            if any(cc.steps[t](data) is not None for t in enabled(n, marking)):
                depth_cut = True
            continue
        for t in enabled(n, marking):
            new_data = cc.steps[t](data)
            if new_data is None:
                continue
            nxt = (fire(n, marking, t), new_data)
            if nxt in parents:
                continue
            if len(parents) >= max_states:
                return Unknown("states", len(parents))
            parents[nxt] = (state, t)
            if visit:
                visit(nxt[0], cc.as_dict(new_data))
            if nxt[0] & bad:
                return Violated(_counterexample(cc, parents, nxt, bad), len(parents))
            queue.append((nxt, depth + 1))
    if depth_cut:
        return Unknown("depth", len(parents))
    return Satisfied(len(parents))


def _counterexample(cc: _Compiled, parents: dict, end, bad) -> Counterexample:
    states, transitions = [end], []
    while parents[states[-1]] is not None:
        prev, t = parents[states[-1]]
        transitions.append(t)
        states.append(prev)
    states.reverse()
    transitions.reverse()
    return Counterexample(
        transitions,
        [cc.as_dict(d) for _, d in states],
        [m for m, _ in states],
        frozenset(end[0] & bad),
    )


# -- rendering -------------------------------------------------------------


@dataclass
class TraceStep:
    template: str
    instance: int | None
    statement: str
    line: int | None
    globals: dict[str, Value] = field(default_factory=dict)
    kind: str = "local"

    def to_json(self) -> dict:
        from .lang import value_to_json

        return {
            "template": self.template,
            "instance": "main" if self.instance is None else self.instance,
            "statement": self.statement,
            "line": self.line,
            "globals": {k: value_to_json(v) for k, v in self.globals.items()},
        }

    def __str__(self) -> str:
        inst = "⊥" if self.instance is None else self.instance
        where = f"line {self.line}" if self.line else "?"
        vals = ", ".join(f"{k}={format_value(v)}" for k, v in self.globals.items())
        note = "   [thread limit exceeded]" if self.kind == "insufficient" else ""
        return f"{self.template}.{inst:<3} {where:<8} {self.statement:<30} {vals}{note}"


def render_counterexample(n: PetrifiedProgram, c: Counterexample) -> list[TraceStep]:
    globals_ = sorted(n.program.globals)
    out = []
    for t, after in zip(c.transitions, c.states[1:]):
        if t.kind == "insufficient":
            statement = format_statement(t.origin)
        else:
            statement = format_statement(deinstantiate(t))
        span = getattr(t.origin, "span", None) or getattr(t.label, "span", None)
        template, instance = t.actor
        out.append(TraceStep(template, instance, statement, span.line if span else None, {g: after[g] for g in globals_}, t.kind))
    return out


def violated_kinds(c: Counterexample) -> set[str]:
    kinds = set()
    for q in c.violated:
        kinds.add("safety" if isinstance(q, ProgramLoc) else "bound")
    return kinds
