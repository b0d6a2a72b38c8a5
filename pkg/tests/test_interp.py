import random
from collections import Counter

from hypothesis import given, settings, strategies as st

from forkjoin import difftest
from forkjoin.interp import (
    LocalConfig,
    explore,
    initial_config,
    make_config,
    successors,
    width_of_execution,
)
from forkjoin.lang import FAIL, OMEGA, Assume, BoolLit, Fork, Join, split

from conftest import prog


def only_step(p, cfg):
    out = successors(p, cfg)
    assert len(out) == 1
    return out[0]


class TestInitial:
    def test_fig1(self, fig1):
        cfg = initial_config(fig1)
        assert cfg.threads == (LocalConfig(fig1.body("main"), "main", None, ()),)

    def test_empty_main(self):
        cfg = initial_config(prog("main { }"))
        assert cfg.threads[0].remainder == Assume(BoolLit(True))

    def test_zero_globals(self, fig1):
        assert initial_config(fig1).globals == (("c", 0), ("i", 0))


class TestSuccessors:
    def test_assume_false_blocks(self):
        p = prog("main { assume false; x := 1; }")
        assert successors(p, initial_config(p)) == []

    def test_fig1_fork(self, fig1):
        cfg = initial_config(fig1)
        while not isinstance(split(cfg.threads[0].remainder)[0], Fork):
            cfg = only_step(fig1, cfg)[1]
        step, nxt = only_step(fig1, cfg)
        assert isinstance(step.statement, Fork)
        assert LocalConfig(fig1.body("w"), "w", 0, ()) in nxt.threads
        assert len(nxt.threads) == 2

    def test_join_two_candidates(self):
        p = prog("main { join 5; } thread w { }")
        done = LocalConfig(OMEGA, "w", 5, ())
        cfg = make_config([LocalConfig(p.body("main"), "main", None, ()), done, done], {})
        # two identical candidates collapse in a multiset: one successor config
        assert {c for _, c in successors(p, cfg)} == {make_config([LocalConfig(OMEGA, "main", None, ()), done], {})}

    def test_join_two_templates_same_id(self):
        p = prog("main { join 5; } thread w { } thread v { }")
        main = LocalConfig(p.body("main"), "main", None, ())
        cfg = make_config([main, LocalConfig(OMEGA, "w", 5, ()), LocalConfig(OMEGA, "v", 5, ())], {})
        out = successors(p, cfg)
        assert len(out) == 2
        assert sorted(len(c.threads) for _, c in out) == [2, 2]
        assert {next(t.template for t in c.threads if t.tid == 5) for _, c in out} == {"v", "w"}

    def test_join_distinct_candidates(self):
        p = prog("main { join 5; } thread w { x := 1; }")
        d1, d2 = LocalConfig(OMEGA, "w", 5, (("x", 0),)), LocalConfig(OMEGA, "w", 5, (("x", 1),))
        main = LocalConfig(p.body("main"), "main", None, ())
        out = successors(p, make_config([main, d1, d2], {}))
        assert len(out) == 2
        assert {c.threads for _, c in out} == {make_config([main._replace(remainder=OMEGA), d], {}).threads for d in (d1, d2)}

    def test_join_wrong_id_blocks(self):
        p = prog("main { join 4; } thread w { }")
        cfg = make_config([LocalConfig(p.body("main"), "main", None, ()), LocalConfig(OMEGA, "w", 5, ())], {})
        assert successors(p, cfg) == []

    def test_join_needs_terminated(self):
        p = prog("main { join 5; } thread w { x := 1; }")
        cfg = make_config([LocalConfig(p.body("main"), "main", None, ()), LocalConfig(p.body("w"), "w", 5, (("x", 0),))], {})
        assert [type(s.statement) for s, _ in successors(p, cfg)] == [type(p.body("w"))]

    def test_assert_exactly_one(self):
        for cond, expect in (("true", OMEGA), ("false", FAIL)):
            p = prog(f"main {{ assert {cond}; }}")
            _, nxt = only_step(p, initial_config(p))
            assert nxt.threads[0].remainder is expect

    def test_locals_are_per_thread(self):
        p = prog("main { fork 1 w(); fork 2 w(); } thread w { x := x + 1; }")
        res = explore(p)
        finals = [c for c in res.reachable if all(t.remainder is OMEGA for t in c.threads)]
        assert finals and all(dict(t.locals).get("x", 1) == 1 for c in finals for t in c.threads)


def _check_step_invariants(p, cfg):
    for step, nxt in successors(p, cfg):
        delta = len(nxt.threads) - len(cfg.threads)
        assert delta == {Fork: 1, Join: -1}.get(type(step.statement), 0)
        bottoms = [t for t in nxt.threads if t.tid is None]
        assert len(bottoms) <= 1 and all(t.template == p.main for t in bottoms)


class TestProperties:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32))
    def test_step_invariants(self, seed):
        p = difftest.generate(random.Random(seed))
        res = explore(p, max_configs=500)
        for cfg in list(res.reachable)[:200]:
            _check_step_invariants(p, cfg)
            assert set(successors(p, cfg)) == set(successors(p, cfg))

    def test_canonical_configs(self):
        a = LocalConfig(OMEGA, "w", 1, ())
        b = LocalConfig(OMEGA, "w", 2, ())
        assert make_config([a, b], {"x": 1}) == make_config([b, a], {"x": 1})


class TestExplore:
    def test_fig1(self, fig1):
        res = explore(fig1)
        assert (res.erroneous, res.max_width, res.exhausted) == (False, 2, True)

    def test_fig1_buggy(self, fig1_buggy):
        res = explore(fig1_buggy)
        assert res.erroneous and res.max_width == 2

    def test_assert_false(self):
        res = explore(prog("main { assert false; }"))
        assert (res.erroneous, res.max_width) == (True, 1)

    def test_infinite_width(self):
        p = prog("main { while (true) { fork 0 w(); } } thread w { }")
        small, big = explore(p, max_configs=100), explore(p, max_configs=1000)
        assert not small.exhausted and not big.exhausted
        assert big.max_width > small.max_width > 1

    def test_depth_limit(self, fig1):
        res = explore(fig1, max_depth=3)
        assert not res.exhausted and res.depth == 3

    def test_deterministic(self, fig1):
        a, b = explore(fig1), explore(fig1)
        assert list(a.parents) == list(b.parents)

    def test_width_counts_per_template(self):
        p = prog("main { fork 0 a(); fork 0 b(); } thread a { } thread b { }")
        assert explore(p).max_width == 1


class TestWidthOfExecution:
    def test_initial(self, fig1):
        assert width_of_execution([initial_config(fig1)]) == 1

    def test_fig1_two_forks_before_join(self, fig1):
        res = explore(fig1)
        two = next(c for c in res.parents if Counter(t.template for t in c.threads)["w"] == 2)
        assert width_of_execution(res.trace_to(two)) == 2

    def test_fork_free(self):
        p = prog("main { x := 1; while (x < 3) { x := x + 1; } }")
        res = explore(p)
        for cfg in res.reachable:
            assert width_of_execution(res.trace_to(cfg)) == 1
