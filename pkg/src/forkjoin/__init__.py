"""Verification of fork/join programs via Petri programs with a thread limit.

Modules, bottom-up:

* ``lang``     - syntax, values, typechecking and printing
* ``parse``    - the ``.fkj`` concrete syntax
* ``interp``   - reference small-step interpreter
* ``petri``    - 1-safe Petri programs with data
* ``petrify``  - the program-to-net transformation and its specifications
* ``reach``    - explicit-state reachability with counterexamples
* ``driver``   - the three beta-search algorithms
* ``difftest`` - random differential testing of ``interp`` against ``reach``
"""

from .driver import Outcome, algorithm1, algorithm2, algorithm3, verify
from .interp import explore
from .lang import Program
from .parse import ParseError, parse_file, parse_program
from .petrify import petrify, specifications
from .reach import check

__version__ = "0.1.0"

__all__ = [
    "Outcome",
    "ParseError",
    "Program",
    "algorithm1",
    "algorithm2",
    "algorithm3",
    "check",
    "explore",
    "parse_file",
    "parse_program",
    "petrify",
    "specifications",
    "verify",
]
