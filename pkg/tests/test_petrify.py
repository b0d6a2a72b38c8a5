import random

import pytest
from hypothesis import given, settings, strategies as st

from forkjoin import difftest
from forkjoin.interp import LocalConfig, initial_config, make_config
from forkjoin.lang import FAIL, OMEGA, Assign, Assume, Binary, BoolLit, IntLit, Var, command_exprs, expr_vars, split
from forkjoin.parse import parse_expr
from forkjoin.petri import enabled, fire, validate
from forkjoin.petrify import (
    IdVar,
    IncoherentMarking,
    InUse,
    Insufficient,
    LocalVar,
    NotInUse,
    ProgramLoc,
    conf,
    control_successors,
    deinstantiate,
    instantiate_expr,
    is_coherent,
    petrify,
    specifications,
)
from forkjoin.reach import initial_state

from conftest import prog


class TestInstantiate:
    def test_globals_untouched(self):
        e = parse_expr("c + i")
        assert instantiate_expr(e, "w", 1, {"c", "i"}) == e

    def test_local_renamed(self):
        e = instantiate_expr(parse_expr("x + c"), "w", 2, {"c"})
        assert e == Binary("+", Var(LocalVar("x", "w", 2)), Var("c"))

    def test_literal(self):
        assert instantiate_expr(IntLit(5), "w", 1, set()) == IntLit(5)


def loc_with(net, kind):
    return next(q for t in net.transitions if t.kind == kind for q in t.pre if isinstance(q, ProgramLoc))


class TestControlSuccessors:
    def test_fork_fanout(self, fig1):
        p = fig1
        fork = ProgramLoc(split(split(split(p.body("main"))[1])[1])[0].body, "main", None)
        out = control_successors(p, {fork}, 2)
        assert [t.kind for t in out] == ["fork", "fork", "insufficient"]

    def test_join_pairs(self):
        p = prog("main { fork 1 a(); fork 2 b(); join 1; } thread a { } thread b { }")
        net = petrify(p, 2)
        joins = [t for t in net.transitions if t.kind == "join"]
        assert len(joins) == 4
        assert {(q.template, q.instance) for t in joins for q in t.pre if isinstance(q, ProgramLoc) and q.remainder is OMEGA} == {
            ("a", 1), ("a", 2), ("b", 1), ("b", 2)}
        assert all(isinstance(t.label, Assume) and t.label.cond.op == "==" for t in joins)

    def test_assume_false_kept(self):
        p = prog("main { assume false; }")
        (t,) = control_successors(p, {ProgramLoc(p.body("main"), "main", None)}, 1)
        assert t.label == Assume(BoolLit(False))

    def test_assert_branches(self):
        p = prog("main { assert x == 1; }")
        out = control_successors(p, {ProgramLoc(p.body("main"), "main", None)}, 1)
        assert {next(iter(t.post)).remainder for t in out} == {OMEGA, FAIL}


@pytest.fixture(scope="module")
def net(fig1):
    return petrify(fig1, 2)


class TestFig1Net:
    """The worker-loop example at beta = 2: two worker chains, slot bookkeeping, fork and join arcs."""

    def test_counts(self, net):
        assert (len(net.places), len(net.transitions)) == (26, 21)

    def test_bookkeeping(self, net):
        book = {q for q in net.places if not isinstance(q, ProgramLoc)}
        assert book == {InUse("w", 1), InUse("w", 2), NotInUse("w", 1), NotInUse("w", 2), Insufficient("w"),
                        NotInUse("main", 1), NotInUse("main", 2)}

    def test_worker_chains(self, net, fig1):
        for k in (1, 2):
            chain = {q for q in net.places if isinstance(q, ProgramLoc) and q.instance == k}
            assert len(chain) == 5  # l0..l3 plus the error place
            assert ProgramLoc(FAIL, "w", k) in chain
            assert sum(1 for t in net.transitions if t.actor == ("w", k)) == 4

    def test_fork_arcs(self, net, fig1):
        fork = loc_with(net, "fork")
        f1, f2, fe = sorted((t for t in net.transitions if fork in t.pre), key=lambda t: (t.kind == "insufficient", len(t.pre)))
        body = lambda k: ProgramLoc(fig1.body("w"), "w", k)  # noqa: E731
        assert f1.pre == {fork, NotInUse("w", 1)} and {body(1), InUse("w", 1)} < f1.post
        assert f2.pre == {fork, InUse("w", 1), NotInUse("w", 2)} and {body(2), InUse("w", 1), InUse("w", 2)} < f2.post
        assert fe.pre == {fork, InUse("w", 1), InUse("w", 2)} and fe.post == {Insufficient("w")}
        assert (f1.label, f2.label) == (Assign(IdVar("w", 1), Var("i")), Assign(IdVar("w", 2), Var("i")))

    def test_join_arcs(self, net):
        for k in (1, 2):
            (j,) = [t for t in net.transitions if t.kind == "join" and InUse("w", k) in t.pre]
            assert ProgramLoc(OMEGA, "w", k) in j.pre and NotInUse("w", k) in j.post
            assert j.label.cond == Binary("==", Var(IdVar("w", k)), parse_expr("i - 1"))

    def test_initial(self, net, fig1):
        assert ProgramLoc(fig1.body("main"), "main", None) in net.initial
        assert all(isinstance(q, NotInUse) for q in net.initial - {ProgramLoc(fig1.body("main"), "main", None)})

    def test_specifications(self, net):
        safety, bound = specifications(net)
        assert safety.bad == {ProgramLoc(FAIL, "w", 1), ProgramLoc(FAIL, "w", 2)}
        assert bound.bad == {Insufficient("w")}

    def test_valid(self, net):
        assert validate(net, net.var_types) == []


class TestPetrify:
    def test_beta1(self, fig1):
        n = petrify(fig1, 1)
        assert {q.instance for q in n.places if isinstance(q, ProgramLoc) and q.template == "w"} == {1}
        fork = loc_with(n, "fork")
        assert sorted(t.kind for t in n.transitions if fork in t.pre) == ["fork", "insufficient"]

    def test_beta3_safety(self, fig1):
        assert len(specifications(petrify(fig1, 3))[0].bad) == 3

    def test_fork_free(self):
        p = prog("main { x := 1; if (x > 0) { x := 2; } }")
        n = petrify(p, 2)
        assert all(t.kind == "local" for t in n.transitions)
        assert n.initial - {ProgramLoc(p.body("main"), "main", None)} == {NotInUse("main", 1), NotInUse("main", 2)}
        assert specifications(n)[0].bad == specifications(n)[1].bad == frozenset()

    def test_beta_zero(self, fig1):
        with pytest.raises(ValueError):
            petrify(fig1, 0)

    def test_deterministic(self, fig1):
        a, b = petrify(fig1, 3), petrify(fig1, 3)
        assert a == b and a.transitions == b.transitions

    def test_no_self_join(self):
        p = prog("main { fork 0 w(); } thread w { join 0; }")
        n = petrify(p, 2)
        for t in n.transitions:
            if t.kind == "join":
                done = next(q for q in t.pre if isinstance(q, ProgramLoc) and q.remainder is OMEGA)
                assert (done.template, done.instance) != t.actor

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32), st.integers(1, 3))
    def test_label_discipline(self, seed, beta):
        p = difftest.generate(random.Random(seed))
        n = petrify(p, beta)
        for t in n.transitions:
            template, k = t.actor
            label = t.label
            used = set()
            for e in command_exprs(label):
                used |= expr_vars(e)
            if isinstance(label, Assign):
                used.add(label.target)
            ids = {v for v in used if isinstance(v, IdVar)}
            assert len(ids) <= (1 if t.kind in ("fork", "join") else 0)
            for v in used:
                assert v in p.globals or isinstance(v, IdVar) or v == LocalVar(v.name, template, k)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32), st.integers(1, 3))
    def test_fork_degree(self, seed, beta):
        assert difftest.fork_degree_ok(petrify(difftest.generate(random.Random(seed)), beta))

    def test_deinstantiate(self, fig1):
        n = petrify(fig1, 2)
        for t in n.transitions:
            if t.kind in ("fork", "join"):
                assert deinstantiate(t) == t.origin
            elif t.kind == "local" and isinstance(t.origin, Assign):
                assert deinstantiate(t) == t.origin


class TestConf:
    def test_initial(self, fig1):
        n = petrify(fig1, 2)
        assert conf(fig1, n.initial, initial_state(n)) == initial_config(fig1)

    def test_terminated_worker(self, fig1):
        n = petrify(fig1, 2)
        sigma = {**initial_state(n), IdVar("w", 1): 0}
        m = frozenset([ProgramLoc(OMEGA, "w", 1), InUse("w", 1), NotInUse("w", 2)])
        assert conf(fig1, m, sigma) == make_config([LocalConfig(OMEGA, "w", 0, ())], {"c": 0, "i": 0})

    def test_two_locations_same_slot(self, fig1):
        n = petrify(fig1, 2)
        m = frozenset([ProgramLoc(OMEGA, "w", 1), ProgramLoc(FAIL, "w", 1)])
        with pytest.raises(IncoherentMarking):
            conf(fig1, m, initial_state(n))


class TestCoherence:
    def test_initial(self, fig1):
        n = petrify(fig1, 2)
        assert is_coherent(n, n.initial)

    def test_violations(self, fig1):
        n = petrify(fig1, 2)
        assert not is_coherent(n, n.initial | {InUse("w", 1)})  # both inUse and notInUse
        assert not is_coherent(n, (n.initial - {NotInUse("w", 1)}) | {InUse("w", 1)})  # inUse without a location
        assert not is_coherent(n, n.initial - {NotInUse("w", 2)})  # neither
        assert not is_coherent(n, n.initial | {ProgramLoc(OMEGA, "main", None)})  # two locations for main

    def test_after_insufficiency(self, fig1):
        n = petrify(fig1, 1)
        fork = loc_with(n, "fork")
        m = frozenset([fork, ProgramLoc(fig1.body("w"), "w", 1), InUse("w", 1), NotInUse("main", 1)])
        assert is_coherent(n, m)
        (t,) = [t for t in enabled(n, m) if t.kind == "insufficient"]
        after = fire(n, m, t)
        assert after == {ProgramLoc(fig1.body("w"), "w", 1), Insufficient("w"), NotInUse("main", 1)}
        assert is_coherent(n, after)
