"""Differential testing of the Petri-program route against the interpreter.

For each program the interpreter explores the full configuration space and
measures the thread width ``w``.  The petrified programs for limits around
``w`` are then checked, and the verdicts and reachable configurations are
compared with what the interpreter saw.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .interp import ExploreResult, GlobalConfig, explore, make_config
from .lang import (
    FAIL,
    OMEGA,
    Assert,
    Assign,
    Assume,
    Binary,
    Command,
    Fork,
    If,
    IntLit,
    Join,
    Program,
    Var,
    commands,
    While,
    eval_expr,
    format_program,
    seq,
    seq_all,
    skip,
    split,
    typecheck,
)
from .petri import enabled, fire
from .petrify import (
    Insufficient,
    NotInUse,
    PetrifiedProgram,
    ProgramLoc,
    Specification,
    conf,
    is_coherent,
    petrify,
    specifications,
)
from .reach import Satisfied, Violated, check

DEFAULT_MAX_CONFIGS = 200_000
DEFAULT_MAX_STATES = 500_000


# -- program generator -----------------------------------------------------


@dataclass
class Bounds:
    max_templates: int = 2  # besides main
    max_fork_sites: int = 4
    max_loop_bound: int = 2
    max_block: int = 3
    max_width: int = 4
    max_configs: int = 5000  # interpreter budget; larger programs are redrawn


class _Gen:
    def __init__(self, rng: random.Random, bounds: Bounds):
        self.rng = rng
        self.b = bounds
        self.forks_left = bounds.max_fork_sites

    def program(self) -> Program:
        r = self.rng
        globals_ = ["g"] + (["h"] if r.random() < 0.5 else [])
        self.globals = globals_
        self.use_local = len(globals_) == 1
        workers = [f"t{i}" for i in range(1, r.randint(1, self.b.max_templates) + 1)]
        self.workers = workers
        templates = {"main": self.main_body(workers)}
        for i, w in enumerate(workers):
            templates[w] = self.worker_body(workers[i + 1 :])
        return Program(templates, "main", frozenset(globals_))

    # expressions

    def int_expr(self, local_ok: bool):
        r = self.rng
        atoms = [Var(g) for g in self.globals] + ([Var("x")] if local_ok else [])
        choice = r.random()
        if choice < 0.3:
            return IntLit(r.randint(0, 2))
        if choice < 0.7:
            return r.choice(atoms)
        return Binary("+", r.choice(atoms), IntLit(1))

    def cond(self, local_ok: bool):
        r = self.rng
        op = r.choice(["==", "!=", "<", "<=", ">"])
        return Binary(op, r.choice([Var(g) for g in self.globals] + ([Var("x")] if local_ok else [])), IntLit(r.randint(0, 2)))

    # statements

    def simple(self, local_ok: bool, forkable: list[str], ids: list[int]) -> Command:
        r = self.rng
        kinds = ["assign", "assign", "assert", "if"]
        if forkable and self.forks_left > 0:
            kinds += ["fork"] * 4
        if ids:
            kinds.append("join")
        if local_ok:
            kinds.append("local")
        kinds.append("assume")
        kind = r.choice(kinds)
        if kind == "assign":
            return Assign(r.choice(self.globals), self.int_expr(local_ok))
        if kind == "local":
            return Assign("x", self.int_expr(True))
        if kind == "assert":
            return Assert(self.cond(local_ok))
        if kind == "assume":
            return Assume(Binary("<=", r.choice([Var(g) for g in self.globals]), IntLit(r.randint(2, 4))))
        if kind == "fork":
            return self.fork(forkable, ids)
        if kind == "join":
            return Join(IntLit(r.choice(ids)))
        then = seq_all(self.simple(local_ok, [], ids) for _ in range(r.randint(1, 2)))
        orelse = seq_all(self.simple(local_ok, [], ids) for _ in range(r.randint(0, 1))) if r.random() < 0.6 else skip()
        return If(self.cond(local_ok), then, orelse if orelse is not OMEGA else skip())

    def fork(self, forkable, ids) -> Command:
        r = self.rng
        self.forks_left -= 1
        tid = r.randint(0, 2)
        ids.append(tid)
        return Fork(IntLit(tid) if r.random() < 0.8 else Var(self.globals[0]), r.choice(forkable))

    def block(self, local_ok, forkable, ids, n=None) -> list[Command]:
        n = self.rng.randint(1, self.b.max_block) if n is None else n
        return [self.simple(local_ok, forkable, ids) for _ in range(n)]

    def main_body(self, workers) -> Command:
        r = self.rng
        ids: list[int] = []
        parts = self.block(False, workers, ids)
        if r.random() < 0.6:
            bound = r.randint(1, self.b.max_loop_bound)
            body = self.block(False, workers, ids, r.randint(1, 2))
            if self.forks_left and r.random() < 0.5:
                body.insert(0, self.fork(workers, ids))
            body += [Assign("n", Binary("+", Var("n"), IntLit(1)))]
            parts += [Assign("n", IntLit(0)), While(Binary("<", Var("n"), IntLit(bound)), seq_all(body))]
        parts += self.block(False, workers, ids, r.randint(0, 2))
        return seq_all(parts)

    def worker_body(self, forkable) -> Command:
        ids: list[int] = []
        parts = []
        if self.use_local:
            parts.append(Assign("x", self.int_expr(False)))  # written before any read
        parts += self.block(self.use_local, forkable[:1], ids)
        return seq_all(parts)


def generate(rng: random.Random, bounds: Bounds | None = None) -> Program:
    """A random small, finite-state, write-before-read program."""
    p = _Gen(rng, bounds or Bounds()).program()
    diags = typecheck(p)
    assert not diags, diags
    return p


def generate_checked(rng: random.Random, bounds: Bounds | None = None) -> tuple[Program, ExploreResult]:
    """Draw programs until one fits the width and state budget; return it with its exploration."""
    bounds = bounds or Bounds()
    while True:
        p = generate(rng, bounds)
        res = explore(p, max_configs=bounds.max_configs)
        if res.exhausted and res.max_width <= bounds.max_width:
            return p, res


# -- local-variable projection ---------------------------------------------


def _thread_edges(rem, p: Program):
    """(assigned local or None, next remainder) for each intra-thread step."""
    first, rest = split(rem)
    match first:
        case Assign(target=x):
            return [(x if x not in p.globals else None, rest)]
        case Assume() | Fork() | Join():
            return [(None, rest)]
        case Assert():
            return [(None, rest), (None, FAIL)]
        case If(then=c1, orelse=c2):
            return [(None, seq(c1, rest)), (None, seq(c2, rest))]
        case While(body=c):
            return [(None, seq(c, rem)), (None, rest)]
    return []


def definitely_assigned(p: Program) -> dict:
    """Locals written on every path from the template entry, per (template, remainder)."""
    out = {}
    for name, body in p.templates.items():
        facts = {body: frozenset()}
        work = [body]
        while work:
            rem = work.pop()
            if rem is OMEGA or rem is FAIL:
                continue
            for x, nxt in _thread_edges(rem, p):
                fact = facts[rem] | ({x} if x else set())
                old = facts.get(nxt)
                new = fact if old is None else old & fact
                if new != old:
                    facts[nxt] = frozenset(new)
                    work.append(nxt)
        for rem, fact in facts.items():
            out[(name, rem)] = fact
    return out


def project(cfg: GlobalConfig, assigned: dict) -> GlobalConfig:
    """Blank out locals not yet written; their values are unobservable."""
    threads = []
    for lc in cfg.threads:
        keep = assigned.get((lc.template, lc.remainder), frozenset())
        threads.append(lc._replace(locals=tuple((x, v if x in keep else None) for x, v in lc.locals)))
    return make_config(threads, cfg.globals)


# -- invariant monitor ------------------------------------------------------


@dataclass
class Invariants:
    markings: int = 0
    incoherent: int = 0
    min_id_violations: int = 0
    examples: list = field(default_factory=list)

    def visitor(self, net: PetrifiedProgram):
        seen = set()

        def visit(m, _sigma):
            if m in seen:
                return
            seen.add(m)
            self.markings += 1
            if not is_coherent(net, m):
                self.incoherent += 1
                self.examples.append(("incoherent", sorted(map(str, m))))
            for t in enabled(net, m):
                if t.kind == "fork":
                    child, slot = t.label.target.template, t.label.target.instance
                    if any(NotInUse(child, j) in m for j in range(1, slot)):
                        self.min_id_violations += 1

        return visit

    @property
    def ok(self) -> bool:
        return self.incoherent == 0 and self.min_id_violations == 0


def fork_degree_ok(net: PetrifiedProgram) -> bool:
    """Every fork location has exactly beta + 1 outgoing transitions."""
    out = {}
    for t in net.transitions:
        if t.kind in ("fork", "insufficient"):
            loc = next(q for q in t.pre if isinstance(q, ProgramLoc))
            out[loc] = out.get(loc, 0) + 1
    return all(v == net.beta + 1 for v in out.values())


# -- independent counterexample replay --------------------------------------


def replay(net: PetrifiedProgram, cex) -> str | None:
    """Re-execute a counterexample with ``fire`` and ``eval_expr``; None if it agrees."""
    m, sigma = net.initial, dict(cex.states[0])
    if any(v != 0 and v is not False and not hasattr(v, "entries") for v in sigma.values()):
        return "initial state is not all-zero"
    if m != cex.markings[0]:
        return "first marking is not initial"
    for i, t in enumerate(cex.transitions, 1):
        m = fire(net, m, t)
        label = t.label
        if isinstance(label, Assume):
            if eval_expr(label.cond, sigma) is not True:
                return f"step {i}: guard {t} is false"
        else:
            sigma = {**sigma, label.target: eval_expr(label.expr, sigma)}
        if m != cex.markings[i]:
            return f"step {i}: marking differs"
        if sigma != cex.states[i]:
            return f"step {i}: data state differs"
    if not (m & cex.violated) or not cex.violated:
        return "final marking hits no bad place"
    return None


# -- per-program comparison --------------------------------------------------


@dataclass
class CaseResult:
    name: str
    width: int | None
    erroneous: bool | None
    exhausted: bool
    checks: int = 0
    replays: int = 0
    failures: list[str] = field(default_factory=list)
    betas: list[int] = field(default_factory=list)


def compare(
    p: Program,
    name: str = "program",
    inv: Invariants | None = None,
    max_configs: int = DEFAULT_MAX_CONFIGS,
    max_states: int = DEFAULT_MAX_STATES,
    configs: bool = True,
    oracle: ExploreResult | None = None,
) -> CaseResult:
    """Check width detection, safety agreement, invariants, replay and configuration sets."""
    inv = inv if inv is not None else Invariants()
    res = oracle or explore(p, max_configs=max_configs)
    case = CaseResult(name, res.max_width, res.erroneous, res.exhausted)
    w = res.max_width
    if res.exhausted:
        betas = [b for b in (w - 1, w, w + 1) if b >= 1]
    else:
        # width is at least w; only bound violations below w are conclusive
        betas = list(range(1, min(w, 5)))
    case.betas = betas
    bad_before = (inv.incoherent, inv.min_id_violations)
    assigned = definitely_assigned(p) if configs else None
    oracle_set = {project(c, assigned) for c in res.reachable} if configs and res.exhausted else None

    for beta in betas:
        net = petrify(p, beta)
        if not fork_degree_ok(net):
            case.failures.append(f"beta={beta}: a fork location lacks beta+1 transitions")
        safety, bound = specifications(net)

        vb = check(net, bound, max_states, visit=inv.visitor(net))
        case.checks += 1
        if isinstance(vb, Violated):
            _replay(net, vb, case, beta, "bound")
        if vb.result == "unknown":
            case.failures.append(f"beta={beta}: bound check hit the state limit")
        elif res.exhausted or w > beta:
            expected = w <= beta
            if isinstance(vb, Satisfied) != expected:
                case.failures.append(f"beta={beta}: bound verdict {vb.result}, oracle width {w}")

        if not res.exhausted or beta < w:
            continue
        vs = check(net, safety, max_states, visit=inv.visitor(net))
        case.checks += 1
        if isinstance(vs, Violated):
            _replay(net, vs, case, beta, "safety")
        if vs.result == "unknown":
            case.failures.append(f"beta={beta}: safety check hit the state limit")
        elif isinstance(vs, Violated) != res.erroneous:
            case.failures.append(f"beta={beta}: safety verdict {vs.result}, oracle erroneous={res.erroneous}")

        if configs:
            petri_set: set = set()

            def collect(m, sigma):
                if not any(isinstance(q, Insufficient) for q in m):
                    petri_set.add(project(conf(p, m, sigma), assigned))

            full = check(net, Specification.empty(), max_states, visit=collect)
            if not isinstance(full, Satisfied):
                case.failures.append(f"beta={beta}: full exploration hit the state limit")
            elif petri_set != oracle_set:
                extra, missing = len(petri_set - oracle_set), len(oracle_set - petri_set)
                case.failures.append(f"beta={beta}: configuration sets differ ({extra} extra, {missing} missing)")
    if (inv.incoherent, inv.min_id_violations) != bad_before:
        case.failures.append("incoherent marking or non-minimal fork slot reached")
    return case


def _replay(net, verdict, case, beta, spec):
    case.replays += 1
    problem = replay(net, verdict.counterexample)
    if problem:
        case.failures.append(f"beta={beta}: {spec} counterexample does not replay: {problem}")


# -- shrinking ---------------------------------------------------------------


def _or_skip(r) -> Command:
    return skip() if r is OMEGA else r


def _deletions(c: Command):
    """Every remainder obtained by deleting or simplifying one statement of ``c``."""
    first, rest = split(c)
    yield rest  # drop the first statement
    for r2 in _deletions(rest) if rest is not OMEGA else ():
        yield seq(first, r2)
    match first:
        case If(cond=e, then=t, orelse=o):
            yield seq(t, rest)
            yield seq(o, rest)
            for t2 in _deletions(t):
                yield seq(If(e, _or_skip(t2), o), rest)
            for o2 in _deletions(o):
                yield seq(If(e, t, _or_skip(o2)), rest)
        case While(cond=e, body=b):
            for b2 in _deletions(b):
                yield seq(While(e, _or_skip(b2)), rest)


def _candidates(p: Program):
    forked = {c.template for b in p.templates.values() for c in commands(b) if isinstance(c, Fork)}
    for name in p.templates:
        if name != p.main and name not in forked:
            yield Program({k: v for k, v in p.templates.items() if k != name}, p.main, p.globals)
    for name, body in p.templates.items():
        for smaller in _deletions(body):
            if smaller is OMEGA and body == skip():
                continue
            yield Program({**p.templates, name: _or_skip(smaller)}, p.main, p.globals)


def shrink(p: Program, still_fails) -> Program:
    """Greedy one-step reduction (drop a template or a statement) while ``still_fails`` holds."""
    current = p
    progress = True
    while progress:
        progress = False
        for cand in _candidates(current):
            if typecheck(cand):
                continue
            try:
                failing = still_fails(cand)
            except Exception:
                failing = False
            if failing:
                current, progress = cand, True
                break
    return current


# -- driver ------------------------------------------------------------------


@dataclass
class Report:
    seed: int
    count: int
    cases: list[CaseResult]
    invariants: Invariants
    shrunk: dict[int, str] = field(default_factory=dict)

    @property
    def passed(self) -> int:
        return sum(1 for c in self.cases if not c.failures)

    @property
    def failed(self) -> list[CaseResult]:
        return [c for c in self.cases if c.failures]

    def render(self) -> str:
        lines = [f"difftest seed={self.seed} count={self.count}"]
        for c in self.cases:
            status = "ok  " if not c.failures else "FAIL"
            lines.append(
                f"{status} {c.name:<10} width={c.width} erroneous={str(c.erroneous).lower():<5} betas={c.betas} checks={c.checks}"
            )
            for f in c.failures:
                lines.append(f"     - {f}")
        lines.append(
            f"invariants: {self.invariants.markings} markings, {self.invariants.incoherent} incoherent, "
            f"{self.invariants.min_id_violations} minimal-id violations"
        )
        for i, text in sorted(self.shrunk.items()):
            lines.append(f"shrunk failing program #{i}:")
            lines.extend("    " + ln for ln in text.splitlines())
        lines.append(f"passed {self.passed}/{len(self.cases)}")
        return "\n".join(lines) + "\n"


def run(seed: int = 42, count: int = 100, bounds: Bounds | None = None, max_configs: int = DEFAULT_MAX_CONFIGS) -> Report:
    rng = random.Random(seed)
    inv = Invariants()
    cases, programs = [], []
    for i in range(count):
        p, res = generate_checked(rng, bounds)
        programs.append(p)
        cases.append(compare(p, f"case{i:03d}", inv, max_configs=max_configs, oracle=res))
    report = Report(seed, count, cases, inv)
    for i, case in enumerate(cases):
        if case.failures:
            small = shrink(programs[i], lambda q: bool(compare(q, max_configs=max_configs).failures))
            report.shrunk[i] = format_program(small)
    return report
