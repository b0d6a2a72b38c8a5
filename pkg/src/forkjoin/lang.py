"""Abstract syntax, values and expression evaluation for the fork/join language.

Commands are immutable trees.  Sequential composition is kept right-nested
(``Seq(first, rest)`` where ``first`` is never a ``Seq``) so that every suffix
of a thread body is itself a command; those suffixes are the program's
control locations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Mapping, Union

INT = "int"
BOOL = "bool"
ARRAY = "array"


@dataclass(frozen=True)
class Span:
    file: str
    line: int
    col: int
    end_line: int
    end_col: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.col}"


def _nospan():
    return field(default=None, compare=False, repr=False)


# -- values -----------------------------------------------------------------


@dataclass(frozen=True, order=True)
class ArrayValue:
    """Total map int -> int; ``entries`` holds the non-default pairs, sorted."""

    default: int = 0
    entries: tuple[tuple[int, int], ...] = ()

    def get(self, index: int) -> int:
        for k, v in self.entries:
            if k == index:
                return v
        return self.default

    def set(self, index: int, value: int) -> "ArrayValue":
        items = dict(self.entries)
        if value == self.default:
            items.pop(index, None)
        else:
            items[index] = value
        return ArrayValue(self.default, tuple(sorted(items.items())))

    def __str__(self) -> str:
        body = ", ".join(f"{k}: {v}" for k, v in self.entries)
        return f"[{body}{', ' if body else ''}_: {self.default}]"


Value = Union[int, bool, ArrayValue]


def zero(ty: str) -> Value:
    if ty == BOOL:
        return False
    if ty == ARRAY:
        return ArrayValue()
    return 0


def format_value(v: Value) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def value_to_json(v: Value):
    if isinstance(v, ArrayValue):
        return {"default": v.default, "entries": [[k, x] for k, x in v.entries]}
    return v


# -- expressions ------------------------------------------------------------


class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class IntLit(Expr):
    value: int
    span: Span | None = _nospan()


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool
    span: Span | None = _nospan()


@dataclass(frozen=True)
class Var(Expr):
    # str for source variables; petrification substitutes instantiated names
    name: Hashable
    span: Span | None = _nospan()


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # "-" or "!"
    arg: Expr
    span: Span | None = _nospan()


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr
    span: Span | None = _nospan()


@dataclass(frozen=True)
class Select(Expr):
    array: Expr
    index: Expr
    span: Span | None = _nospan()


@dataclass(frozen=True)
class Store(Expr):
    array: Expr
    index: Expr
    value: Expr
    span: Span | None = _nospan()


ARITH_OPS = {"+", "-", "*"}
COMPARE_OPS = {"<", "<=", ">", ">=", "==", "!="}
LOGIC_OPS = {"&&", "||"}


class EvalError(Exception):
    pass


def eval_expr(e: Expr, state: Mapping[Hashable, Value]) -> Value:
    """Evaluate ``e`` under ``state`` (a total map from variable names to values)."""
    match e:
        case IntLit(value=v) | BoolLit(value=v):
            return v
        case Var(name=n):
            try:
                return state[n]
            except KeyError:
                raise EvalError(f"unbound variable {n!r}") from None
        case Unary(op="-", arg=a):
            return -_int(eval_expr(a, state))
        case Unary(op="!", arg=a):
            return not _bool(eval_expr(a, state))
        case Binary(op=op, left=l, right=r):
            if op == "&&":
                return _bool(eval_expr(l, state)) and _bool(eval_expr(r, state))
            if op == "||":
                return _bool(eval_expr(l, state)) or _bool(eval_expr(r, state))
            lv, rv = eval_expr(l, state), eval_expr(r, state)
            if op in ("==", "!="):
                if type(lv) is not type(rv):
                    raise EvalError(f"cannot compare {lv!r} and {rv!r}")
                return (lv == rv) == (op == "==")
            lv, rv = _int(lv), _int(rv)
            return _BINOPS[op](lv, rv)
        case Select(array=a, index=i):
            return _array(eval_expr(a, state)).get(_int(eval_expr(i, state)))
        case Store(array=a, index=i, value=v):
            arr = _array(eval_expr(a, state))
            return arr.set(_int(eval_expr(i, state)), _int(eval_expr(v, state)))
    raise EvalError(f"cannot evaluate {e!r}")


_BINOPS = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def _int(v: Value) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise EvalError(f"expected int, got {v!r}")
    return v


def _bool(v: Value) -> bool:
    if not isinstance(v, bool):
        raise EvalError(f"expected bool, got {v!r}")
    return v


def _array(v: Value) -> ArrayValue:
    if not isinstance(v, ArrayValue):
        raise EvalError(f"expected array, got {v!r}")
    return v


def expr_vars(e: Expr) -> set:
    match e:
        case Var(name=n):
            return {n}
        case Unary(arg=a):
            return expr_vars(a)
        case Binary(left=l, right=r) | Select(array=l, index=r):
            return expr_vars(l) | expr_vars(r)
        case Store(array=a, index=i, value=v):
            return expr_vars(a) | expr_vars(i) | expr_vars(v)
    return set()


def rename_expr(e: Expr, rename) -> Expr:
    """Apply ``rename`` (name -> name) to every variable of ``e``."""
    match e:
        case Var(name=n, span=s):
            return Var(rename(n), s)
        case Unary(op=op, arg=a, span=s):
            return Unary(op, rename_expr(a, rename), s)
        case Binary(op=op, left=l, right=r, span=s):
            return Binary(op, rename_expr(l, rename), rename_expr(r, rename), s)
        case Select(array=a, index=i, span=s):
            return Select(rename_expr(a, rename), rename_expr(i, rename), s)
        case Store(array=a, index=i, value=v, span=s):
            return Store(rename_expr(a, rename), rename_expr(i, rename), rename_expr(v, rename), s)
    return e


def negate(e: Expr) -> Expr:
    return Unary("!", e, getattr(e, "span", None))


# -- commands ---------------------------------------------------------------


class Command:
    __slots__ = ()


@dataclass(frozen=True)
class Assign(Command):
    target: Hashable
    expr: Expr
    span: Span | None = _nospan()


@dataclass(frozen=True)
class Assume(Command):
    cond: Expr
    span: Span | None = _nospan()


@dataclass(frozen=True)
class Assert(Command):
    cond: Expr
    span: Span | None = _nospan()


@dataclass(frozen=True)
class If(Command):
    cond: Expr
    then: Command
    orelse: Command
    span: Span | None = _nospan()


@dataclass(frozen=True)
class While(Command):
    cond: Expr
    body: Command
    span: Span | None = _nospan()


@dataclass(frozen=True)
class Fork(Command):
    tid: Expr
    template: str
    span: Span | None = _nospan()


@dataclass(frozen=True)
class Join(Command):
    tid: Expr
    span: Span | None = _nospan()


@dataclass(frozen=True)
class Seq(Command):
    first: Command
    rest: Command


class _Marker:
    __slots__ = ("_name",)

    def __init__(self, name: str):
        self._name = name

    def __repr__(self) -> str:
        return self._name

    def __reduce__(self):
        return self._name


OMEGA = _Marker("OMEGA")  # successful termination
FAIL = _Marker("FAIL")  # failed assertion

Remainder = Union[Command, _Marker]

TRUE = BoolLit(True)


def skip(span: Span | None = None) -> Command:
    return Assume(TRUE, span)


def seq(c: Remainder, x: Remainder) -> Remainder:
    """Right-nested sequential composition with ``OMEGA`` as identity."""
    if c is FAIL:
        raise ValueError("cannot sequence after a failed remainder")
    if c is OMEGA:
        return x
    if x is OMEGA:
        return c
    if isinstance(c, Seq):
        return Seq(c.first, seq(c.rest, x))
    return Seq(c, x)


def seq_all(cmds) -> Remainder:
    out: Remainder = OMEGA
    for c in reversed(list(cmds)):
        out = seq(c, out)
    return out


def split(r: Remainder) -> tuple[Command, Remainder]:
    """Split a command into its first non-sequence statement and the rest."""
    if isinstance(r, Seq):
        return r.first, r.rest
    return r, OMEGA


def is_normalized(r: Remainder) -> bool:
    if isinstance(r, Seq):
        return not isinstance(r.first, Seq) and is_normalized(r.first) and is_normalized(r.rest)
    match r:
        case If(then=t, orelse=o):
            return is_normalized(t) and is_normalized(o)
        case While(body=b):
            return is_normalized(b)
    return True


def commands(r: Remainder):
    """Yield every command node in ``r`` (pre-order)."""
    if not isinstance(r, Command):
        return
    yield r
    match r:
        case Seq(first=a, rest=b) | If(then=a, orelse=b):
            yield from commands(a)
            yield from commands(b)
        case While(body=b):
            yield from commands(b)


def command_exprs(c: Command):
    match c:
        case Assign(expr=e) | Assume(cond=e) | Assert(cond=e) | If(cond=e) | While(cond=e):
            yield e
        case Fork(tid=e) | Join(tid=e):
            yield e


def command_vars(r: Remainder) -> set:
    out: set = set()
    for c in commands(r):
        if isinstance(c, Assign):
            out.add(c.target)
        for e in command_exprs(c):
            out |= expr_vars(e)
    return out


# -- programs ---------------------------------------------------------------


@dataclass
class Program:
    templates: dict[str, Command]
    main: str = "main"
    globals: frozenset[str] = frozenset()
    types: dict[str, str] = field(default_factory=dict)  # filled by typecheck

    def body(self, template: str) -> Command:
        return self.templates[template]

    def locals_of(self, template: str) -> tuple[str, ...]:
        return tuple(sorted(v for v in command_vars(self.templates[template]) if v not in self.globals))

    def type_of(self, var: str) -> str:
        return self.types.get(var, INT)

    def zero_locals(self, template: str) -> dict[str, Value]:
        return {x: zero(self.type_of(x)) for x in self.locals_of(template)}

    def zero_globals(self) -> dict[str, Value]:
        return {g: zero(self.type_of(g)) for g in sorted(self.globals)}


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    message: str
    span: Span | None = None

    def __str__(self) -> str:
        where = f"{self.span}: " if self.span else ""
        return f"{where}{self.kind}: {self.message}"


def typecheck(p: Program) -> list[Diagnostic]:
    """Check program well-formedness and infer variable types into ``p.types``.

    Variables are typed by use.  Types flow from literals, operators and
    assignments until a fixpoint; a variable never constrained defaults to int.
    """
    diags: list[Diagnostic] = []
    if p.main not in p.templates:
        diags.append(Diagnostic("missing-main", f"no template named {p.main!r}"))
    for name, body in p.templates.items():
        for c in commands(body):
            if isinstance(c, Fork) and c.template not in p.templates:
                diags.append(Diagnostic("unknown-template", f"fork of undeclared template {c.template!r}", c.span))

    checker = _TypeChecker()
    for _ in range(64):
        checker.changed = False
        checker.diags = []
        for body in p.templates.values():
            for c in commands(body):
                checker.command(c)
        if not checker.changed:
            break
    diags.extend(checker.diags)
    p.types = {v: checker.types.get(v, INT) for v in _all_vars(p)}
    return diags


def _all_vars(p: Program) -> set:
    out = set(p.globals)
    for body in p.templates.values():
        out |= command_vars(body)
    return out


class _TypeChecker:
    def __init__(self):
        self.types: dict[str, str] = {}
        self.changed = False
        self.diags: list[Diagnostic] = []

    def _error(self, kind, msg, span):
        self.diags.append(Diagnostic(kind, msg, span))

    def bind(self, name, ty, span):
        if ty is None:
            return
        old = self.types.get(name)
        if old is None:
            self.types[name] = ty
            self.changed = True
        elif old != ty:
            self._error("type-conflict", f"variable {name!r} used as {old} and {ty}", span)

    def expect(self, e: Expr, ty: str, what: str):
        if isinstance(e, Var) and e.name not in self.types:
            self.bind(e.name, ty, e.span)
            return
        got = self.expr(e)
        if got is not None and got != ty:
            self._error("type-error", f"{what} must be {ty}, found {got}", e.span)

    def expr(self, e: Expr) -> str | None:
        match e:
            case IntLit():
                return INT
            case BoolLit():
                return BOOL
            case Var(name=n):
                return self.types.get(n)
            case Unary(op="-", arg=a):
                self.expect(a, INT, "operand of '-'")
                return INT
            case Unary(op="!", arg=a):
                self.expect(a, BOOL, "operand of '!'")
                return BOOL
            case Binary(op=op, left=l, right=r) if op in ARITH_OPS:
                self.expect(l, INT, f"operand of '{op}'")
                self.expect(r, INT, f"operand of '{op}'")
                return INT
            case Binary(op=op, left=l, right=r) if op in ("==", "!="):
                lt, rt = self.expr(l), self.expr(r)
                if lt is None and isinstance(l, Var):
                    self.bind(l.name, rt, l.span)
                if rt is None and isinstance(r, Var):
                    self.bind(r.name, lt, r.span)
                if lt is not None and rt is not None and lt != rt:
                    self._error("type-error", f"'{op}' compares {lt} with {rt}", e.span)
                return BOOL
            case Binary(op=op, left=l, right=r) if op in COMPARE_OPS:
                self.expect(l, INT, f"operand of '{op}'")
                self.expect(r, INT, f"operand of '{op}'")
                return BOOL
            case Binary(op=op, left=l, right=r):
                self.expect(l, BOOL, f"operand of '{op}'")
                self.expect(r, BOOL, f"operand of '{op}'")
                return BOOL
            case Select(array=a, index=i):
                self.expect(a, ARRAY, "indexed value")
                self.expect(i, INT, "array index")
                return INT
            case Store(array=a, index=i, value=v):
                self.expect(a, ARRAY, "stored-to value")
                self.expect(i, INT, "array index")
                self.expect(v, INT, "stored value")
                return ARRAY
        return None

    def command(self, c: Command):
        match c:
            case Assign(target=x, expr=e, span=s):
                ty = self.expr(e)
                if ty is None and x in self.types:
                    self.expect(e, self.types[x], "assigned value")
                else:
                    self.bind(x, ty, s)
            case Assume(cond=e) | Assert(cond=e) | If(cond=e) | While(cond=e):
                self.expect(e, BOOL, "condition")
            case Fork(tid=e) | Join(tid=e):
                self.expect(e, INT, "thread id")


# -- printing ---------------------------------------------------------------

_PREC = {"||": 1, "&&": 2, "<": 3, "<=": 3, ">": 3, ">=": 3, "==": 3, "!=": 3, "+": 4, "-": 4, "*": 5}


def format_expr(e: Expr, prec: int = 0) -> str:
    match e:
        case IntLit(value=v):
            return str(v)
        case BoolLit(value=v):
            return "true" if v else "false"
        case Var(name=n):
            return str(n)
        case Unary(op=op, arg=a):
            return f"{op}{format_expr(a, 6)}"
        case Binary(op=op, left=l, right=r):
            p = _PREC[op]
            # comparisons do not chain; left-assoc elsewhere
            lp = p + 1 if p == 3 else p
            s = f"{format_expr(l, lp)} {op} {format_expr(r, p + 1)}"
            return f"({s})" if p < prec else s
        case Select(array=a, index=i):
            return f"{format_expr(a, 7)}[{format_expr(i)}]"
        case Store(array=a, index=i, value=v):
            return f"store({format_expr(a)}, {format_expr(i)}, {format_expr(v)})"
    raise TypeError(f"not an expression: {e!r}")


def format_statement(c: Remainder) -> str:
    """One-line rendering of the first statement of ``c`` (no trailing body)."""
    match c:
        case Assign(target=x, expr=e):
            return f"{x} := {format_expr(e)}"
        case Assume(cond=e):
            return f"assume {format_expr(e)}"
        case Assert(cond=e):
            return f"assert {format_expr(e)}"
        case If(cond=e):
            return f"if ({format_expr(e)})"
        case While(cond=e):
            return f"while ({format_expr(e)})"
        case Fork(tid=e, template=t):
            return f"fork {format_expr(e)} {t}()"
        case Join(tid=e):
            return f"join {format_expr(e)}"
        case Seq(first=f):
            return format_statement(f)
    if c is OMEGA:
        return "Ω"
    if c is FAIL:
        return "⚡"
    raise TypeError(f"not a command: {c!r}")


def format_command(c: Remainder, indent: int = 0) -> str:
    pad = "  " * indent
    if c is OMEGA or c is FAIL:
        return pad + format_statement(c)
    lines = []
    while True:
        first, rest = split(c)
        match first:
            case If(cond=e, then=t, orelse=o):
                lines.append(f"{pad}if ({format_expr(e)}) {{")
                lines.append(format_command(t, indent + 1))
                lines.append(f"{pad}}} else {{")
                lines.append(format_command(o, indent + 1))
                lines.append(f"{pad}}}")
            case While(cond=e, body=b):
                lines.append(f"{pad}while ({format_expr(e)}) {{")
                lines.append(format_command(b, indent + 1))
                lines.append(f"{pad}}}")
            case _:
                lines.append(f"{pad}{format_statement(first)};")
        if rest is OMEGA:
            break
        c = rest
    return "\n".join(lines)


def format_program(p: Program) -> str:
    out = []
    if p.globals:
        out.append(f"globals {', '.join(sorted(p.globals))};")
    for name, body in p.templates.items():
        head = "main" if name == p.main else f"thread {name}"
        out.append(f"{head} {{\n{format_command(body, 1)}\n}}")
    return "\n".join(out) + "\n"
