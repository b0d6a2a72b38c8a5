"""1-safe Petri programs: places, labelled transitions, firing, DOT export.

Markings of 1-safe nets are plain ``frozenset`` objects of places.  Places
and transitions are compared structurally, so building the same net twice
gives equal objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable

from .lang import Assign, Assume, Command, Diagnostic, command_exprs, expr_vars, format_statement

Marking = frozenset


class FiringError(Exception):
    """Firing a transition that is not enabled."""


class SafetyViolation(Exception):
    """A firing would put a second token on a place."""


@dataclass(frozen=True)
class Transition:
    pre: frozenset
    label: Command  # an Assign or Assume over instantiated variables
    post: frozenset
    # bookkeeping, ignored by equality
    kind: str = field(default="local", compare=False)  # local | fork | insufficient | join
    actor: tuple | None = field(default=None, compare=False)  # (template, instance) of the acting thread
    origin: Command | None = field(default=None, compare=False)  # source statement that produced it

    def __str__(self) -> str:
        return format_statement(self.label)


@dataclass(frozen=True)
class PetriProgram:
    places: frozenset
    transitions: tuple[Transition, ...]  # canonical order
    initial: frozenset
    var_types: dict = field(default_factory=dict, compare=False, hash=False)
    bad_hint: frozenset = field(default=frozenset(), compare=False)  # places drawn double-circled

    def __post_init__(self):
        index: dict[Hashable, list[int]] = {}
        for i, t in enumerate(self.transitions):
            # every transition is indexed under one anchor place from its pre-set
            index.setdefault(_anchor(t), []).append(i)
        object.__setattr__(self, "_by_anchor", index)

    def transition_index(self, t: Transition) -> int:
        return self.transitions.index(t)


def _anchor(t: Transition):
    # any pre-place works: an enabled transition has all of them marked
    return min(t.pre, key=_place_sort_key) if t.pre else None


def enabled(n: PetriProgram, m: frozenset) -> list[Transition]:
    """Transitions whose whole pre-set is marked, in canonical order."""
    idx = list(n._by_anchor.get(None, ()))  # empty pre-set (only in hand-built nets)
    for p in m:
        for i in n._by_anchor.get(p, ()):
            if n.transitions[i].pre <= m:
                idx.append(i)
    return [n.transitions[i] for i in sorted(idx)]


def enabled_naive(n: PetriProgram, m: frozenset) -> list[Transition]:
    return [t for t in n.transitions if t.pre <= m]


def fire(n: PetriProgram, m: frozenset, t: Transition) -> frozenset:
    if not t.pre <= m:
        raise FiringError(f"transition {t} is not enabled")
    rest = m - t.pre
    if rest & t.post:
        raise SafetyViolation(f"firing {t} puts a second token on {sorted(map(str, rest & t.post))}")
    return rest | t.post


def validate(n: PetriProgram, allowed_vars: Iterable | None = None) -> list[Diagnostic]:
    diags = []
    for p in n.initial - n.places:
        diags.append(Diagnostic("dangling-place", f"initial marking references unknown place {p}"))
    allowed = None if allowed_vars is None else set(allowed_vars)
    for t in n.transitions:
        if not t.pre:
            diags.append(Diagnostic("empty-preset", f"transition {t} has no input places"))
        if not t.post:
            diags.append(Diagnostic("empty-postset", f"transition {t} has no output places"))
        for p in (t.pre | t.post) - n.places:
            diags.append(Diagnostic("dangling-place", f"transition {t} references unknown place {p}"))
        if not isinstance(t.label, (Assign, Assume)):
            diags.append(Diagnostic("bad-label", f"transition label {t} is not an assignment or assume"))
        elif allowed is not None:
            used = set().union(*(expr_vars(e) for e in command_exprs(t.label)))
            if isinstance(t.label, Assign):
                used.add(t.label.target)
            for v in used - allowed:
                diags.append(Diagnostic("bad-variable", f"transition {t} mentions unknown variable {v}"))
    return diags


# -- DOT -------------------------------------------------------------------


def _dot_str(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def to_dot(n: PetriProgram, name: str = "petri") -> str:
    places = sorted(n.places, key=_place_sort_key)
    ids = {p: f"p{i}" for i, p in enumerate(places)}
    lines = [f"digraph {_dot_str(name)} {{", "  rankdir=LR;"]
    for p in places:
        attrs = ["shape=doublecircle" if p in n.bad_hint else "shape=circle", f"label={_dot_str(str(p))}"]
        if p in n.initial:
            attrs += ["style=filled", "fillcolor=gray80"]
        lines.append(f"  {ids[p]} [{', '.join(attrs)}];")
    for i, t in enumerate(n.transitions):
        lines.append(f"  t{i} [shape=box, style=filled, fillcolor=black, fontcolor=white, height=0.2, label={_dot_str(str(t))}];")
    for i, t in enumerate(n.transitions):
        for p in sorted(t.pre, key=_place_sort_key):
            lines.append(f"  {ids[p]} -> t{i};")
        for p in sorted(t.post, key=_place_sort_key):
            lines.append(f"  t{i} -> {ids[p]};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _place_sort_key(p) -> tuple:
    key = getattr(p, "sort_key", None)
    return key() if key else (9, str(p))
