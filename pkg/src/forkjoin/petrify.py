"""Petrification: fork/join program x thread limit -> 1-safe Petri program.

Each thread template gets instance slots ``1..beta`` (plus the start slot
``None``, written ⊥, for the main thread).  Local variables are renamed per
slot, and thread ids are kept in per-slot id-variables.  The bookkeeping
places ``InUse``/``NotInUse`` track which slots are occupied, and
``Insufficient(t)`` is reached when a fork finds every slot of ``t`` busy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from .interp import GlobalConfig, LocalConfig, make_config
from .lang import (
    FAIL,
    INT,
    OMEGA,
    TRUE,
    Assert,
    Assign,
    Assume,
    Binary,
    Command,
    Expr,
    Fork,
    If,
    Join,
    Program,
    Remainder,
    Var,
    While,
    format_command,
    format_statement,
    negate,
    rename_expr,
    seq,
    split,
)
from .petri import PetriProgram, Transition


def _inst(k) -> str:
    return "⊥" if k is None else str(k)


# -- control locations -----------------------------------------------------


@dataclass(frozen=True)
class ProgramLoc:
    remainder: Remainder
    template: str
    instance: int | None

    is_program = True

    @cached_property
    def _hash(self):
        return hash((self.remainder, self.template, self.instance))

    def __hash__(self):
        return self._hash

    def sort_key(self):
        return (0, self.template, -1 if self.instance is None else self.instance, format_command(self.remainder))

    def __str__(self):
        return f"⟨{format_statement(self.remainder)} | {self.template},{_inst(self.instance)}⟩"


@dataclass(frozen=True)
class InUse:
    template: str
    instance: int
    is_program = False

    def sort_key(self):
        return (1, self.template, self.instance, "")

    def __str__(self):
        return f"inUse({self.template},{self.instance})"


@dataclass(frozen=True)
class NotInUse:
    template: str
    instance: int
    is_program = False

    def sort_key(self):
        return (2, self.template, self.instance, "")

    def __str__(self):
        return f"notInUse({self.template},{self.instance})"


@dataclass(frozen=True)
class Insufficient:
    template: str
    is_program = False

    def sort_key(self):
        return (3, self.template, 0, "")

    def __str__(self):
        return f"insufficient({self.template})"


# -- instantiated variables ------------------------------------------------


@dataclass(frozen=True, order=True)
class LocalVar:
    name: str
    template: str
    instance: int | None

    def __str__(self):
        return f"{self.name}@{self.template}.{_inst(self.instance)}"


@dataclass(frozen=True, order=True)
class IdVar:
    template: str
    instance: int

    def __str__(self):
        return f"id@{self.template}.{self.instance}"


def var_sort_key(v) -> tuple:
    if isinstance(v, str):
        return (0, v, "", -2)
    if isinstance(v, LocalVar):
        return (1, v.name, v.template, -1 if v.instance is None else v.instance)
    return (2, "", v.template, v.instance)


def instantiate_expr(e: Expr, template: str, instance, globals_) -> Expr:
    """Rename every local variable of ``e`` to its copy for ``(template, instance)``."""
    return rename_expr(e, lambda x: x if x in globals_ else LocalVar(x, template, instance))


def deinstantiate_expr(e: Expr) -> Expr:
    return rename_expr(e, lambda x: x.name if isinstance(x, LocalVar) else x)


def deinstantiate(t: Transition) -> Command:
    """The source-level simple statement that a transition label instantiates."""
    label = t.label
    if t.kind == "fork":
        return Fork(deinstantiate_expr(label.expr), label.target.template)
    if t.kind == "join":
        return Join(deinstantiate_expr(label.cond.right))
    if isinstance(label, Assign):
        return Assign(label.target.name if isinstance(label.target, LocalVar) else label.target, deinstantiate_expr(label.expr))
    return Assume(deinstantiate_expr(label.cond))


# -- specifications --------------------------------------------------------


@dataclass(frozen=True)
class Specification:
    bad: frozenset
    kind: str  # safety | bound | union | custom

    def __or__(self, other: "Specification") -> "Specification":
        return Specification(self.bad | other.bad, "union")

    @staticmethod
    def empty() -> "Specification":
        return Specification(frozenset(), "custom")


def specifications(n: PetriProgram) -> tuple[Specification, Specification]:
    safety = frozenset(p for p in n.places if isinstance(p, ProgramLoc) and p.remainder is FAIL)
    bound = frozenset(p for p in n.places if isinstance(p, Insufficient))
    return Specification(safety, "safety"), Specification(bound, "bound")


# -- the transformation ----------------------------------------------------


@dataclass(frozen=True)
class PetrifiedProgram(PetriProgram):
    program: Program | None = field(default=None, compare=False, hash=False)
    beta: int = field(default=0, compare=False)


def _local_transitions(p: Program, loc: ProgramLoc) -> list[Transition]:
    """Sequential control flow of one thread, one transition per applicable rule."""
    rem, t, k = loc.remainder, loc.template, loc.instance
    first, rest = split(rem)
    inst = lambda e: instantiate_expr(e, t, k, p.globals)  # noqa: E731
    out = []

    def local(label, succ):
        out.append(Transition(frozenset([loc]), label, frozenset([ProgramLoc(succ, t, k)]), "local", (t, k), first))

    match first:
        case Assume(cond=e):
            local(Assume(inst(e), first.span), rest)
        case Assign(target=x, expr=e):
            target = x if x in p.globals else LocalVar(x, t, k)
            local(Assign(target, inst(e), first.span), rest)
        case Assert(cond=e):
            local(Assume(inst(e), first.span), rest)
            local(Assume(negate(inst(e)), first.span), FAIL)
        case If(cond=e, then=c1, orelse=c2):
            local(Assume(inst(e), first.span), seq(c1, rest))
            local(Assume(negate(inst(e)), first.span), seq(c2, rest))
        case While(cond=e, body=c):
            local(Assume(inst(e), first.span), seq(c, rem))
            local(Assume(negate(inst(e)), first.span), rest)
    return out


def _fork_transitions(p: Program, loc: ProgramLoc, beta: int) -> list[Transition]:
    first, rest = split(loc.remainder)
    t, k = loc.template, loc.instance
    child = first.template
    tid = instantiate_expr(first.tid, t, k, p.globals)
    cont = ProgramLoc(rest, t, k)
    out = []
    for slot in range(1, beta + 1):
        busy = [InUse(child, j) for j in range(1, slot)]
        out.append(
            Transition(
                frozenset([loc, *busy, NotInUse(child, slot)]),
                Assign(IdVar(child, slot), tid, first.span),
                frozenset([cont, ProgramLoc(p.body(child), child, slot), *busy, InUse(child, slot)]),
                "fork",
                (t, k),
                first,
            )
        )
    out.append(
        Transition(
            frozenset([loc, *(InUse(child, j) for j in range(1, beta + 1))]),
            Assume(TRUE, first.span),
            frozenset([Insufficient(child)]),
            "insufficient",
            (t, k),
            first,
        )
    )
    return out


def _join_transition(p: Program, loc: ProgramLoc, done: ProgramLoc) -> Transition:
    first, rest = split(loc.remainder)
    t, k = loc.template, loc.instance
    t2, k2 = done.template, done.instance
    guard = Binary("==", Var(IdVar(t2, k2)), instantiate_expr(first.tid, t, k, p.globals))
    return Transition(
        frozenset([loc, done, InUse(t2, k2)]),
        Assume(guard, first.span),
        frozenset([ProgramLoc(rest, t, k), NotInUse(t2, k2)]),
        "join",
        (t, k),
        first,
    )


def control_successors(p: Program, locs, beta: int) -> list[Transition]:
    """Every transition anchored at a program location in ``locs``.

    Join transitions are paired with the terminated locations ``⟨Ω, t', k'⟩``
    (k' >= 1) that are themselves members of ``locs``.
    """
    out = []
    done = [l for l in locs if isinstance(l, ProgramLoc) and l.remainder is OMEGA and l.instance is not None]
    for loc in locs:
        if not isinstance(loc, ProgramLoc) or loc.remainder is OMEGA or loc.remainder is FAIL:
            continue
        first, _ = split(loc.remainder)
        if isinstance(first, Fork):
            out += _fork_transitions(p, loc, beta)
        elif isinstance(first, Join):
            for d in done:
                if (d.template, d.instance) != (loc.template, loc.instance):
                    out.append(_join_transition(p, loc, d))
        else:
            out += _local_transitions(p, loc)
    return out


def _transition_key(t: Transition):
    return (
        tuple(sorted(q.sort_key() for q in t.pre)),
        format_statement(t.label),
        tuple(sorted(q.sort_key() for q in t.post)),
    )


def petrify(p: Program, beta: int) -> PetrifiedProgram:
    """Build the control-reachable fragment of the petrified program for limit ``beta``."""
    if beta < 1:
        raise ValueError("thread limit must be at least 1")
    start = ProgramLoc(p.body(p.main), p.main, None)
    initial = frozenset([start, *(NotInUse(t, k) for t in p.templates for k in range(1, beta + 1))])

    locs: set = {start}
    transitions: set = set()
    while True:
        new = set(control_successors(p, locs, beta)) - transitions
        if not new:
            break
        transitions |= new
        for t in new:
            locs |= {q for q in t.post if isinstance(q, ProgramLoc)}

    ordered = tuple(sorted(transitions, key=_transition_key))
    places = set(initial)
    for t in ordered:
        places |= t.pre | t.post

    var_types = {g: p.type_of(g) for g in p.globals}
    for q in places:
        if isinstance(q, ProgramLoc):
            for x in p.locals_of(q.template):
                var_types[LocalVar(x, q.template, q.instance)] = p.type_of(x)
    for t in ordered:
        if t.kind == "fork":
            var_types[t.label.target] = INT
    var_types = dict(sorted(var_types.items(), key=lambda kv: var_sort_key(kv[0])))

    net = PetrifiedProgram(frozenset(places), ordered, initial, var_types, program=p, beta=beta)
    safety, bound = specifications(net)
    object.__setattr__(net, "bad_hint", safety.bad | bound.bad)
    return net


# -- de-instantiation ------------------------------------------------------


class IncoherentMarking(Exception):
    pass


def conf(p: Program, m, sigma) -> GlobalConfig:
    """Map a marking and an instantiated state back to a global configuration."""
    threads = []
    seen = set()
    for q in m:
        if not isinstance(q, ProgramLoc):
            continue
        slot = (q.template, q.instance)
        if slot in seen:
            raise IncoherentMarking(f"two locations for instance {slot}")
        seen.add(slot)
        tid = None if q.instance is None else sigma[IdVar(q.template, q.instance)]
        local = tuple((x, sigma[LocalVar(x, q.template, q.instance)]) for x in p.locals_of(q.template))
        threads.append(LocalConfig(q.remainder, q.template, tid, local))
    return make_config(threads, {g: sigma[g] for g in p.globals})


def is_coherent(n: PetrifiedProgram, m) -> bool:
    """The three coherence conditions on slot bookkeeping."""
    p = n.program
    slots = {}
    for q in m:
        if isinstance(q, ProgramLoc):
            key = (q.template, q.instance)
            if key in slots:
                return False
            slots[key] = q
    # the insufficiency transition drains inUse(t', .) and consumes the forking
    # location, so the slot/location link only holds while no such place is marked
    exhausted = any(isinstance(q, Insufficient) for q in m)
    for t in p.templates:
        insufficient = Insufficient(t) in m
        for k in range(1, n.beta + 1):
            in_use, free = InUse(t, k) in m, NotInUse(t, k) in m
            if in_use + free + insufficient != 1:
                return False
            if not exhausted and in_use != ((t, k) in slots):
                return False
    return True
