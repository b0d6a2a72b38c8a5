import random

import pytest
from hypothesis import given, settings, strategies as st

from forkjoin import difftest
from forkjoin.lang import Assign, Assume, BoolLit, If, Join, Store, format_program, split
from forkjoin.parse import ParseError, parse_program

from conftest import CORPUS, prog

FIG1 = (CORPUS / "fig1_bounded.fkj").read_text()


class TestParse:
    def test_fig1(self):
        p = parse_program(FIG1)
        assert set(p.templates) == {"main", "w"}
        assert p.globals == {"c", "i"}
        assert p.main == "main"

    def test_empty_input(self):
        with pytest.raises(ParseError) as exc:
            parse_program("")
        assert [d.kind for d in exc.value.diagnostics] == ["missing-main"]

    def test_dangling_join(self):
        p = prog("main { join 0; }")
        assert p.body("main") == Join(p.body("main").tid)

    def test_empty_block_is_skip(self):
        assert prog("main { }").body("main") == Assume(BoolLit(True))

    def test_else_defaults_to_skip(self):
        c = prog("main { if (true) { x := 1; } }").body("main")
        assert isinstance(c, If) and c.orelse == Assume(BoolLit(True))

    def test_array_sugar(self):
        c = prog("main { a[1] := 2; }").body("main")
        assert isinstance(c, Assign) and isinstance(c.expr, Store)

    def test_spans(self):
        p = prog("main {\n  x := 1;\n  assert x == 1;\n}")
        _, rest = split(p.body("main"))
        assert rest.span.line == 3

    def test_comments(self):
        assert prog("// hi\nmain { x := 1; // there\n }").body("main") == Assign("x", prog("main{x:=1;}").body("main").expr)

    @pytest.mark.parametrize(
        "text,kind",
        [
            ("main { x := ; }", "syntax-error"),
            ("main { x := 1 }", "syntax-error"),
            ("main { x := 1; ", "syntax-error"),
            ("main { x := $; }", "lexical-error"),
            ("main { a < b < c; }", "syntax-error"),
            ("main { } main { }", "duplicate-template"),
            ("main { fork 0 nope(); }", "unknown-template"),
            ("main { assume 1; }", "type-error"),
        ],
    )
    def test_errors(self, text, kind):
        with pytest.raises(ParseError) as exc:
            parse_program(text)
        assert kind in [d.kind for d in exc.value.diagnostics]
        assert all(d.span is not None for d in exc.value.diagnostics if d.kind.endswith("-error"))

    def test_not_utf8(self):
        with pytest.raises(ParseError):
            parse_program(b"main { \xff }")

    def test_deep_nesting(self):
        with pytest.raises(ParseError):
            parse_program("main { x := " + "(" * 5000 + "1" + ")" * 5000 + "; }")

    def test_no_chained_comparison_but_parenthesized_ok(self):
        prog("main { assume (1 < 2) == true; }")


class TestRoundTrip:
    @pytest.mark.parametrize("path", sorted(CORPUS.glob("*.fkj")), ids=lambda p: p.stem)
    def test_corpus(self, path):
        once = format_program(parse_program(path.read_text()))
        p2 = parse_program(once)
        assert format_program(p2) == once
        assert p2.templates == parse_program(path.read_text()).templates

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32))
    def test_generated(self, seed):
        p = difftest.generate(random.Random(seed))
        text = format_program(p)
        q = parse_program(text)
        assert q.templates == p.templates
        assert format_program(q) == text


class TestFuzz:
    @settings(max_examples=300, deadline=None)
    @given(st.binary(max_size=200))
    def test_bytes(self, data):
        try:
            parse_program(data)
        except ParseError:
            pass

    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.sampled_from(["main", "thread", "w", "{", "}", "(", ")", ";", ":=", "x", "1", "fork", "join",
                                     "if", "else", "while", "assert", "assume", "[", "]", "+", "<", "true", "globals", ","]),
                    max_size=40))
    def test_token_soup(self, toks):
        try:
            p = parse_program(" ".join(toks))
        except ParseError:
            return
        assert p.main in p.templates
