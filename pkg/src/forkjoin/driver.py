"""Verification by repeated petrification with a growing thread limit."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

from .lang import Program
from .petrify import PetrifiedProgram, Specification, petrify, specifications
from .reach import DEFAULT_MAX_STATES, TraceStep, Unknown, Verdict, Violated, check, render_counterexample, violated_kinds

DEFAULT_BETA_MAX = 8


@dataclass
class Limits:
    max_states: int = DEFAULT_MAX_STATES
    max_depth: int | None = None


@dataclass
class Iteration:
    beta: int
    spec: str  # safety | bound | union
    result: str  # satisfied | violated | unknown
    states: int
    millis: int
    verdict: Verdict | None = field(default=None, repr=False)


@dataclass
class Outcome:
    verdict: str  # correct | incorrect | beta-limit-exceeded | resource-limit
    beta: int
    algorithm: int
    iterations: list[Iteration]
    counterexample: list[TraceStep] | None = None
    details: str = ""
    program: Program | None = field(default=None, repr=False, compare=False)

    def checks(self, spec: str | None = None) -> list[Iteration]:
        return [it for it in self.iterations if spec is None or it.spec == spec]


class _Run:
    """Petrifies lazily per beta and records every check it performs."""

    def __init__(self, program: Program, algorithm: int, limits: Limits):
        self.program = program
        self.algorithm = algorithm
        self.limits = limits
        self.nets: dict[int, PetrifiedProgram] = {}
        self.log: list[Iteration] = []

    def net(self, beta: int) -> PetrifiedProgram:
        if beta not in self.nets:
            self.nets[beta] = petrify(self.program, beta)
        return self.nets[beta]

    def check(self, beta: int, which: str) -> Verdict:
        net = self.net(beta)
        safety, bound = specifications(net)
        spec: Specification = {"safety": safety, "bound": bound, "union": safety | bound}[which]
        t0 = time.perf_counter()
        verdict = check(net, spec, self.limits.max_states, self.limits.max_depth)
        millis = int((time.perf_counter() - t0) * 1000)
        self.log.append(Iteration(beta, which, verdict.result, verdict.states, millis, verdict))
        return verdict

    def outcome(self, verdict: str, beta: int, details: str = "", cex: Violated | None = None) -> Outcome:
        trace = render_counterexample(self.net(beta), cex.counterexample) if cex else None
        return Outcome(verdict, beta, self.algorithm, self.log, trace, details, self.program)

    def resource_limit(self, beta: int, v: Unknown) -> Outcome:
        return self.outcome("resource-limit", beta, f"{v.limit} limit hit after {v.states} states")


def _validate(beta_init: int, beta_max: int):
    if not 1 <= beta_init <= beta_max:
        raise ValueError(f"need 1 <= beta_init <= beta_max, got {beta_init}, {beta_max}")


def algorithm1(p: Program, beta_init: int = 1, beta_max: int = DEFAULT_BETA_MAX, limits: Limits | None = None) -> Outcome:
    """Check safety first; check the bound only for safe limits."""
    _validate(beta_init, beta_max)
    run = _Run(p, 1, limits or Limits())
    for beta in range(beta_init, beta_max + 1):
        v = run.check(beta, "safety")
        if isinstance(v, Unknown):
            return run.resource_limit(beta, v)
        if isinstance(v, Violated):
            return run.outcome("incorrect", beta, cex=v)
        v = run.check(beta, "bound")
        if isinstance(v, Unknown):
            return run.resource_limit(beta, v)
        if not isinstance(v, Violated):
            return run.outcome("correct", beta)
    return run.outcome("beta-limit-exceeded", beta_max)


def algorithm2(p: Program, beta_init: int = 1, beta_max: int = DEFAULT_BETA_MAX, limits: Limits | None = None) -> Outcome:
    """Establish the thread width first, then check safety once."""
    _validate(beta_init, beta_max)
    run = _Run(p, 2, limits or Limits())
    for beta in range(beta_init, beta_max + 1):
        v = run.check(beta, "bound")
        if isinstance(v, Unknown):
            return run.resource_limit(beta, v)
        if isinstance(v, Violated):
            continue
        v = run.check(beta, "safety")
        if isinstance(v, Unknown):
            return run.resource_limit(beta, v)
        if isinstance(v, Violated):
            return run.outcome("incorrect", beta, cex=v)
        return run.outcome("correct", beta)
    return run.outcome("beta-limit-exceeded", beta_max)


def algorithm3(p: Program, beta_init: int = 1, beta_max: int = DEFAULT_BETA_MAX, limits: Limits | None = None) -> Outcome:
    """Check the union of both specifications; the counterexample decides what failed."""
    _validate(beta_init, beta_max)
    run = _Run(p, 3, limits or Limits())
    for beta in range(beta_init, beta_max + 1):
        v = run.check(beta, "union")
        if isinstance(v, Unknown):
            return run.resource_limit(beta, v)
        if not isinstance(v, Violated):
            return run.outcome("correct", beta)
        if "safety" in violated_kinds(v.counterexample):
            return run.outcome("incorrect", beta, cex=v)
    return run.outcome("beta-limit-exceeded", beta_max)


ALGORITHMS = {1: algorithm1, 2: algorithm2, 3: algorithm3}


def verify(p: Program, algorithm: int = 1, **kwargs) -> Outcome:
    return ALGORITHMS[algorithm](p, **kwargs)


# -- reporting -------------------------------------------------------------


def outcome_to_json(o: Outcome) -> dict:
    out = {
        "verdict": o.verdict,
        "beta": o.beta,
        "algorithm": o.algorithm,
        "iterations": [
            {"beta": it.beta, "spec": it.spec, "result": it.result, "states": it.states, "millis": it.millis}
            for it in o.iterations
        ],
    }
    if o.counterexample is not None:
        out["counterexample"] = [step.to_json() for step in o.counterexample]
    return out


def report(o: Outcome, fmt: str = "text") -> str:
    if fmt == "json":
        return json.dumps(outcome_to_json(o), indent=2)
    lines = [f"algorithm {o.algorithm}: {o.verdict.upper()} (beta = {o.beta})"]
    if o.details:
        lines.append(f"  {o.details}")
    lines.append("")
    lines.append(f"  {'beta':>4}  {'spec':<7} {'result':<10} {'states':>8} {'ms':>6}")
    for it in o.iterations:
        lines.append(f"  {it.beta:>4}  {it.spec:<7} {it.result:<10} {it.states:>8} {it.millis:>6}")
    if o.counterexample:
        lines.append("")
        lines.append("counterexample:")
        for i, step in enumerate(o.counterexample, 1):
            lines.append(f"  {i:>3}. {step}")
    return "\n".join(lines) + "\n"
