from pathlib import Path

import pytest

from forkjoin.parse import parse_file, parse_program

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def load(name: str):
    return parse_file(CORPUS / f"{name}.fkj")


def prog(text: str):
    return parse_program(text)


@pytest.fixture(scope="session")
def fig1():
    return load("fig1_bounded")


@pytest.fixture(scope="session")
def fig1_buggy():
    return load("fig1_buggy")


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.LINES:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.LINES:
            terminalreporter.write_line(line)
