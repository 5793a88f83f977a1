from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weblin.expr import parse
from weblin.webgeom import (DegenerateWeb, NoRegularSamples, Point, WebFunction, chern, curvature,
                            curvature_from_f, is_parallelizable, parse_box, slope)


def _fd_points(w, n=10, seed=3):
    rng = random.Random(seed)
    return [w.point(rng.uniform(2, 3), rng.uniform(2, 3)) for _ in range(n)]


def test_slope_examples(example):
    assert slope(example) == parse("1-x1-x2")
    assert slope(WebFunction("x1+x2")) == parse("1")
    w = WebFunction("x1*x2")
    assert slope(w) == parse("x2/x1")


def test_slope_finite_differences():
    w = WebFunction("x1*x2")
    f = w.f
    h = 1e-6
    for p in _fd_points(w):
        m = p.mapping()
        f1 = (f.evaluate(dict(m, x1=m["x1"] + h)) - f.evaluate(dict(m, x1=m["x1"] - h))) / (2 * h)
        f2 = (f.evaluate(dict(m, x2=m["x2"] + h)) - f.evaluate(dict(m, x2=m["x2"] - h))) / (2 * h)
        assert math.isclose(slope(w).evaluate(m), f1 / f2, rel_tol=1e-7)


def test_chern_example(example):
    ch = chern(example)
    assert ch.G1 == parse("1/(x1+x2-1)")
    assert ch.G2 == parse("1/(1-x1-x2)")
    assert curvature(example) == parse("1/(x1+x2-1)^2")


def test_chern_parallel():
    ch = chern(WebFunction("x1+x2"))
    assert ch.G1.is_zero() and ch.G2.is_zero() and ch.r.is_zero()


@settings(max_examples=25, deadline=None)
@given(coeffs=st.lists(st.integers(-3, 3), min_size=6, max_size=6))
def test_chern_definition_residual(coeffs):
    a, b, c, d, e, g = coeffs
    text = f"x1 + 2*x2 + {a}*x1^2 + {b}*x1*x2 + {c}*x2^2 + {d}*x1^3 + {e}*x1^2*x2 + {g}*x2^3"
    w = WebFunction(text)
    ch = w.chern
    resid = ch.G1 * ch.c - ch.c.partial(1)
    try:
        pts = w.samples(20, seed=0)
    except NoRegularSamples:
        return
    for p in pts:
        assert abs(resid.evaluate(p.mapping())) < 1e-9


@pytest.mark.parametrize("text", ["x1*x2", "x1*x2 - x2^2", "x1^2*x2 + x2^3 + x1", "(x1+x2)*exp(-x1)"])
def test_dual_curvature_formulas(text):
    w = WebFunction(text)
    rc, rf = curvature(w), curvature_from_f(w)
    assert rc == rf
    for p in w.samples(20, seed=2):
        assert math.isclose(rc.evaluate(p.mapping()), rf.evaluate(p.mapping()), rel_tol=1e-9, abs_tol=1e-12)


def test_parallelizable_examples(example):
    v = is_parallelizable(WebFunction("x1+x2"), [Point(2, 2)])
    assert v and v.criterion == "symbolic-zero"
    w = WebFunction("x1*x2")
    assert w.chern.r.is_zero()
    assert is_parallelizable(w, w.samples(20))
    assert not is_parallelizable(example, example.samples(20))


def test_degenerate_inputs():
    with pytest.raises(DegenerateWeb):
        WebFunction("x1")
    with pytest.raises(DegenerateWeb):
        WebFunction("x2^2")
    with pytest.raises(ValueError):
        WebFunction("a*x1+x2", params=("a",))
    w = WebFunction("a*x1+x2", bindings={"a": 2})
    assert w.f == parse("2*x1+x2")


def test_box_and_samples(example):
    assert parse_box("2,3,2,3") == (2.0, 3.0, 2.0, 3.0)
    for bad in ("2,3,2", "3,2,2,3", "a,b,c,d", "2,3,2,nan"):
        with pytest.raises(ValueError):
            parse_box(bad)
    pts = example.samples(20, seed=5)
    assert len(pts) == 20 and pts == example.samples(20, seed=5)
    assert all(2 <= p.x1 <= 3 and 2 <= p.x2 <= 3 for p in pts)
    # the pole line x1 + x2 = 1 crosses this box; samples avoid it
    w = WebFunction("(x1+x2)*exp(-x1)", box=(0, 1, 0, 1))
    for p in w.samples(20):
        assert abs(p.x1 + p.x2 - 1) > 1e-6
    assert not example.is_regular(Point(0.5, 0.5))
