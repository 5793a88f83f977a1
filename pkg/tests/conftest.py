from __future__ import annotations

import pytest

from weblin.expr import Expr, parse
from weblin.linsys.jets import VARS
from weblin.linsys.qsystem import QSystem
from weblin.webgeom import WebFunction

EXAMPLE = "(x1+x2)*exp(-x1)"
SOL1_Z = "(1-x1-a)/((x1+x2-1)*(x2-a))"
SOL2_W = "((x1+x2)*exp(-x1)+a*x2+b)"
SOL2_T = f"(x1+x2-1)*exp(-x1)/{SOL2_W}"
SOL2_Z = f"(exp(-x1)+a-a*x1+b)/({SOL2_W}*(x1+x2-1))"


def solution1(a) -> tuple[Expr, Expr, Expr]:
    z = parse(SOL1_Z, ("a",)).substitute({"a": a})
    return Expr.const(-1), Expr.const(0), z


def solution2(a, b) -> tuple[Expr, Expr, Expr]:
    ab = ("a", "b")
    bind = {"a": a, "b": b}
    t = parse(SOL2_T, ab).substitute(bind)
    z = parse(SOL2_Z, ab).substitute(bind)
    return Expr.const(-1), t, z


def jet_values(s: Expr) -> dict[str, Expr]:
    """All jets of a field s, keyed by jet-variable name."""
    out = {}
    for v in VARS:
        if v.base != "s":
            continue
        e = s
        for _ in range(v.n1):
            e = e.partial(1)
        for _ in range(v.n2):
            e = e.partial(2)
        out[str(v)] = e
    return out


@pytest.fixture(scope="session")
def example() -> WebFunction:
    return WebFunction(EXAMPLE)


@pytest.fixture(scope="session")
def example_samples(example):
    return example.samples(10, seed=0)


@pytest.fixture(scope="session")
def example_samples20(example):
    return example.samples(20, seed=1)


@pytest.fixture(scope="session")
def example_q(example) -> QSystem:
    return QSystem(example)


@pytest.fixture(scope="session")
def example_cascade(example_q):
    return example_q.cascade


@pytest.fixture(scope="session")
def example_pqs(example_q, example_samples):
    return [example_q.at(p) for p in example_samples]


# -- acceptance reporting ------------------------------------------------------------------

_CRITERIA: dict[int, tuple[bool, str]] = {}


class Checks:
    """Sub-checks of one acceptance criterion, collected without raising."""

    def __init__(self, number: int, title: str):
        self.number, self.title = number, title
        self.items: list[tuple[str, bool, str]] = []

    def check(self, name: str, fn):
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing sub-check counts as a failure
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        self.items.append((name, bool(ok), detail))
        return ok

    @property
    def ok(self) -> bool:
        return bool(self.items) and all(ok for _, ok, _ in self.items)

    def finish(self) -> None:
        failed = [f"{n} ({d})" for n, ok, d in self.items if not ok]
        detail = "; ".join(failed) if failed else f"{len(self.items)} checks"
        status = "PASS" if self.ok else "FAIL"
        _CRITERIA[self.number] = (self.ok, f"criterion {self.number} [{status}] {self.title}: {detail}")
        print(_CRITERIA[self.number][1])
        assert self.ok, _CRITERIA[self.number][1]


@pytest.fixture
def criterion():
    return Checks


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[n][1])
