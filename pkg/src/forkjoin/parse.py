"""Concrete syntax (``.fkj`` files) for the fork/join language.

Grammar::

    program := decl*
    decl    := "globals" ident ("," ident)* ";" | "main" block | "thread" ident block
    block   := "{" cmd* "}"
    cmd     := ident ":=" expr ";" | ident "[" expr "]" ":=" expr ";"
             | "assume" expr ";" | "assert" expr ";"
             | "if" "(" expr ")" block ("else" block)?
             | "while" "(" expr ")" block
             | "fork" expr ident "(" ")" ";" | "join" expr ";"

Expressions use C-like precedence (``||`` < ``&&`` < comparisons < ``+ -`` <
``*`` < unary ``- !`` < indexing).  ``store(a, i, v)`` builds an updated array.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .lang import (
    Assert,
    Assign,
    Assume,
    Binary,
    BoolLit,
    Command,
    Diagnostic,
    Expr,
    Fork,
    If,
    IntLit,
    Join,
    Program,
    Select,
    Span,
    Store,
    Unary,
    Var,
    While,
    seq_all,
    skip,
    typecheck,
)

KEYWORDS = {"globals", "main", "thread", "assume", "assert", "if", "else", "while", "fork", "join", "true", "false", "store"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<int>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|<=|>=|==|!=|&&|\|\||[;,{}()\[\]+\-*<>!])
    """,
    re.VERBOSE,
)


class ParseError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))


@dataclass(frozen=True)
class Token:
    kind: str  # "int", "ident", "kw", "op", "eof"
    text: str
    line: int
    col: int
    end_line: int
    end_col: int


def tokenize(text: str, filename: str = "<input>") -> list[Token]:
    tokens = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            span = Span(filename, line, col, line, col + 1)
            raise ParseError([Diagnostic("lexical-error", f"unexpected character {text[pos]!r}", span)])
        kind, chunk = m.lastgroup, m.group()
        end_line, end_col = line, col
        for ch in chunk:
            if ch == "\n":
                end_line, end_col = end_line + 1, 1
            else:
                end_col += 1
        if kind not in ("ws", "comment"):
            if kind == "ident" and chunk in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, chunk, line, col, end_line, end_col))
        pos, line, col = m.end(), end_line, end_col
    tokens.append(Token("eof", "", line, col, line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token], filename: str):
        self.toks = tokens
        self.i = 0
        self.file = filename

    # -- token helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def span(self, start: Token, end: Token | None = None) -> Span:
        end = end or self.toks[max(self.i - 1, 0)]
        return Span(self.file, start.line, start.col, end.end_line, end.end_col)

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ParseError([Diagnostic("syntax-error", f"{msg}, found {found}", self.span(tok, tok))])

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("kw", "op")

    def accept(self, text: str) -> Token | None:
        if self.at(text):
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, text: str) -> Token:
        t = self.accept(text)
        if t is None:
            self.error(f"expected {text!r}")
        return t

    def ident(self) -> Token:
        t = self.tok
        if t.kind != "ident":
            self.error("expected identifier")
        self.i += 1
        return t

    # -- declarations

    def program(self):
        templates: dict[str, Command] = {}
        globals_: set[str] = set()
        diags = []
        while self.tok.kind != "eof":
            start = self.tok
            if self.accept("globals"):
                globals_.add(self.ident().text)
                while self.accept(","):
                    globals_.add(self.ident().text)
                self.expect(";")
                continue
            if self.accept("main"):
                name = "main"
            elif self.accept("thread"):
                name = self.ident().text
            else:
                self.error("expected 'globals', 'main' or 'thread'")
            body = self.block()
            if name in templates:
                diags.append(Diagnostic("duplicate-template", f"template {name!r} defined twice", self.span(start)))
            templates[name] = body
        return templates, frozenset(globals_), diags

    def block(self) -> Command:
        brace = self.expect("{")
        cmds = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.error("expected '}'")
            cmds.append(self.command())
        self.expect("}")
        return seq_all(cmds) if cmds else skip(self.span(brace))

    def command(self) -> Command:
        start = self.tok
        if self.accept("assume"):
            e = self.expr()
            self.expect(";")
            return Assume(e, self.span(start))
        if self.accept("assert"):
            e = self.expr()
            self.expect(";")
            return Assert(e, self.span(start))
        if self.accept("if"):
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            head = self.span(start)
            then = self.block()
            orelse = self.block() if self.accept("else") else skip(head)
            return If(cond, then, orelse, head)
        if self.accept("while"):
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            head = self.span(start)
            return While(cond, self.block(), head)
        if self.accept("fork"):
            tid = self.expr()
            name = self.ident().text
            self.expect("(")
            self.expect(")")
            self.expect(";")
            return Fork(tid, name, self.span(start))
        if self.accept("join"):
            tid = self.expr()
            self.expect(";")
            return Join(tid, self.span(start))
        if self.tok.kind == "ident":
            target = self.ident()
            if self.accept("["):
                index = self.expr()
                self.expect("]")
                self.expect(":=")
                value = self.expr()
                self.expect(";")
                sp = self.span(start)
                arr = Var(target.text, self.span(target, target))
                return Assign(target.text, Store(arr, index, value, sp), sp)
            self.expect(":=")
            e = self.expr()
            self.expect(";")
            return Assign(target.text, e, self.span(start))
        self.error("expected a statement")

    # -- expressions (precedence climbing)

    _LEVELS = [("||",), ("&&",), ("<", "<=", ">", ">=", "==", "!="), ("+", "-"), ("*",)]

    def expr(self, level: int = 0) -> Expr:
        if level == len(self._LEVELS):
            return self.unary()
        start = self.tok
        left = self.expr(level + 1)
        ops = self._LEVELS[level]
        while self.tok.kind == "op" and self.tok.text in ops:
            op = self.tok.text
            self.i += 1
            right = self.expr(level + 1)
            left = Binary(op, left, right, self.span(start))
            if level == 2:
                break  # comparisons do not chain
        return left

    def unary(self) -> Expr:
        start = self.tok
        if self.accept("-") or self.accept("!"):
            arg = self.unary()
            return Unary(start.text, arg, self.span(start))
        return self.postfix()

    def postfix(self) -> Expr:
        start = self.tok
        e = self.atom()
        while self.accept("["):
            index = self.expr()
            self.expect("]")
            e = Select(e, index, self.span(start))
        return e

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return IntLit(int(t.text), self.span(t, t))
        if self.accept("true"):
            return BoolLit(True, self.span(t, t))
        if self.accept("false"):
            return BoolLit(False, self.span(t, t))
        if t.kind == "ident":
            self.i += 1
            return Var(t.text, self.span(t, t))
        if self.accept("store"):
            self.expect("(")
            a = self.expr()
            self.expect(",")
            i = self.expr()
            self.expect(",")
            v = self.expr()
            self.expect(")")
            return Store(a, i, v, self.span(t))
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        self.error("expected an expression")


def parse_program(text: str | bytes, filename: str = "<input>") -> Program:
    """Parse and typecheck a program; raise :class:`ParseError` with diagnostics on failure."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            span = Span(filename, 1, 1, 1, 1)
            raise ParseError([Diagnostic("lexical-error", f"input is not UTF-8: {exc.reason}", span)]) from None
    try:
        parser = _Parser(tokenize(text, filename), filename)
        templates, globals_, diags = parser.program()
    except RecursionError:
        raise ParseError([Diagnostic("syntax-error", "input nested too deeply", Span(filename, 1, 1, 1, 1))]) from None
    program = Program(templates, "main", globals_)
    diags += typecheck(program)
    if diags:
        raise ParseError(diags)
    return program


def parse_file(path) -> Program:
    with open(path, encoding="utf-8") as f:
        return parse_program(f.read(), str(path))


def parse_expr(text: str) -> Expr:
    parser = _Parser(tokenize(text), "<expr>")
    e = parser.expr()
    if parser.tok.kind != "eof":
        parser.error("unexpected trailing input")
    return e
