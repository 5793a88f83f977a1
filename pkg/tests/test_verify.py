from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SOL2_W, solution1, solution2
from weblin.candidates import solve_frobenius
from weblin.expr import Expr, parse
from weblin.verify import (Connection, ExprField, build_L, check_flat, check_geodesic_foliations,
                           check_pde_system, check_torsion, chern_connection, deformed_connection,
                           full_verdict, grid_deformation, transversal_derivative)
from weblin.webgeom import Point, WebFunction

AB = ("a", "b")
SOL1_FACTOR = "(2*x1^2+x2^2+3*x1*x2+(a-4)*(x1+x2)+2)/((-1+x1+x2)*(a-x2))"
SOL2_FACTOR = f"((x1+x2)^2*exp(-x1)+(4*a+b)*(x1+x2)-a*(2*x1^2+x2^2+3*x2*x1+2))/((x1+x2-1)*{SOL2_W})"


def _sym(text, **bind):
    e = parse(text, AB)
    return e.substitute(bind) if bind else e


def test_build_L_solution1(example):
    a = Expr.symbol("a")
    L = build_L(example, -1, 0, parse("(1-x1-a)/((x1+x2-1)*(x2-a))", AB))
    assert L.L111.expr == Expr.const(-1)
    assert L.L222.expr == _sym("-(x2-2+2*x1+a)/((x1+x2-1)*(x2-a))")
    assert L.L212.expr.is_zero()


def test_build_L_solution2(example):
    L = build_L(example, *solution2(0, 0))
    assert L.L111.expr == parse("(x1+x2-2)/(x1+x2)")
    L = build_L(example, *(parse(x, AB) for x in ("-1", "(x1+x2-1)*exp(-x1)/" + SOL2_W,
                                                   f"(exp(-x1)+a-a*x1+b)/({SOL2_W}*(x1+x2-1))")))
    assert L.L111.expr == _sym(f"((x1+x2-2)*exp(-x1)-a*x2-b)/{SOL2_W}")


def test_build_L_zero(example):
    L = build_L(example, 0, 0, 0)
    assert all(f.expr.is_zero() for f in L.components())
    conn = deformed_connection(example, L)
    ch = chern_connection(example)
    for key in [(1, 1, 1), (2, 2, 2), (1, 1, 2), (2, 1, 2)]:
        assert (conn.expr(*key) - ch.expr(*key)).is_zero()


def test_deformed_connection_components(example):
    conn = deformed_connection(example, build_L(example, *solution1(0)))
    assert conn.expr(1, 1, 1) == parse("(x1+x2-2)/(1-x1-x2)")
    c1a = deformed_connection(example, build_L(example, -1, 0, parse("(1-x1-a)/((x1+x2-1)*(x2-a))", AB)))
    assert c1a.expr(2, 2, 2) == _sym("2/(a-x2)")
    c2 = deformed_connection(example, build_L(example, *(parse(x, AB) for x in (
        "-1", "(x1+x2-1)*exp(-x1)/" + SOL2_W, f"(exp(-x1)+a-a*x1+b)/({SOL2_W}*(x1+x2-1))"))))
    assert c2.expr(2, 2, 2) == _sym(f"-2*(exp(-x1)+a)/{SOL2_W}")


texts = st.sampled_from(["0", "1", "-1", "x1", "x2^2-1", "1/(x1+3)", "exp(-x2)", "x1*x2/(1+x1^2)"])


@settings(max_examples=40, deadline=None)
@given(s=texts, t=texts, z=texts)
def test_build_L_round_trip(example, s, t, z):
    s, t, z = parse(s), parse(t), parse(z)
    L = build_L(example, s, t, z)
    back = L.read_back(example)
    assert back[0] == s and back[1] == t and back[2] == z
    c = example.chern.c
    # the trace condition tying L^2_12 to the other components
    assert 2 * L.L212.expr == L.L111.expr + c * L.L222.expr - 2 * c * L.L112.expr


# -- residual checks -----------------------------------------------------------------------------


@pytest.mark.parametrize("cand", ["sol1", "sol2"])
def test_pde_verified(example, example_samples20, cand):
    L = build_L(example, *(solution1(0) if cand == "sol1" else solution2(0, 0)))
    t = check_pde_system(example, L, example_samples20)
    assert t.verified and t.max < 1e-7 and all(t.symbolic_zero.values())


def test_pde_zero_tensor(example, example_samples20):
    t = check_pde_system(example, build_L(example, 0, 0, 0), [Point(2, 2)] + example_samples20)
    assert not t.verified
    assert t.values[0][0] == pytest.approx(1 / 9, rel=1e-8)
    assert t.values[0][3] == pytest.approx(1 / 9, rel=1e-8)
    r = example.chern.r
    for p, row in zip(t.points, t.values):
        rv = r.evaluate({"x1": p[0], "x2": p[1]})
        assert row[0] == pytest.approx(rv, rel=1e-8) and row[1] == 0 and row[2] == 0


def test_torsion(example):
    assert check_torsion(deformed_connection(example, build_L(example, *solution2(0, 0))))
    bad = Connection.from_components({(1, 1, 2): parse("x1"), (1, 2, 1): parse("x2")})
    assert not check_torsion(bad)
    assert not check_torsion(bad, [Point(2, 3)])
    good = Connection.from_components({(1, 1, 2): parse("x1"), (1, 2, 1): parse("x1")})
    assert check_torsion(good)


def test_flatness(example, example_samples20):
    for L in (build_L(example, *solution1(0)), build_L(example, *solution2(1, 1))):
        t = check_flat(example, deformed_connection(example, L), example_samples20)
        assert t.verified and t.max < 1e-7
    zero = check_flat(example, deformed_connection(example, build_L(example, 0, 0, 0)), example_samples20)
    ch = check_flat(example, chern_connection(example), [Point(2, 2)] + example_samples20)
    assert zero.values == ch.values[1:]
    assert not ch.verified
    assert ch.values[0][0] == pytest.approx(1 / 9, rel=1e-8)
    r = example.chern.r
    for p, row in zip(ch.points, ch.values):
        assert row[0] == pytest.approx(r.evaluate({"x1": p[0], "x2": p[1]}), rel=1e-9)


def test_transversal_factors(example, example_samples20):
    for a in (0, 1, -1):
        conn = deformed_connection(example, build_L(example, *solution1(a)))
        factor = transversal_derivative(example, conn)[0]
        assert factor == _sym(SOL1_FACTOR, a=a)
    conn = deformed_connection(example, build_L(example, *solution2(1, 1)))
    factor = transversal_derivative(example, conn)[0]
    assert factor == _sym(SOL2_FACTOR, a=1, b=1)
    geo = check_geodesic_foliations(example, conn, example_samples20)
    assert geo.verified and geo.symbolic_zero["det"]
    expected = _sym(SOL2_FACTOR, a=1, b=1)
    for p, f in zip(example_samples20, geo.extra["factor"]):
        assert math.isclose(f, expected.evaluate(p.mapping()), rel_tol=1e-8)


def test_chern_preserves_web(example, example_samples):
    geo = check_geodesic_foliations(example, chern_connection(example), example_samples)
    assert geo.verified
    assert geo.column_max()["G2_11"] == 0 and geo.column_max()["G1_22"] == 0


def test_full_verdicts(example, example_samples20):
    assert full_verdict(example, dict(zip("stz", solution1(0))), example_samples20).linearization
    v = full_verdict(example, dict(zip("stz", solution2(0, 0))), example_samples20)
    assert v.linearization and v.failed_at is None
    bad = full_verdict(example, {"s": -1, "t": 1, "z": 0}, example_samples20)
    assert not bad.linearization and bad.failed_at == "pde_system"


def test_grid_verdict(example, example_samples20):
    sol = solve_frobenius(example, -1)
    v = full_verdict(example, grid_deformation(example, -1, sol), example_samples20)
    assert v.linearization and v.pde.tol == 1e-3
    assert v.flat.max < 1e-6 and v.pde.max < 1e-6
    # an off base is caught by the compatibility of the integrated system; the
    # grid residuals alone are only accurate to the finite-difference tolerance
    off = solve_frobenius(example, -1.2)
    assert not off.compatible and off.path_difference > 1e-6


def test_expr_field_numeric(example):
    f = ExprField(parse("x1^2*x2"))
    p = Point(2.0, 3.0)
    assert f.value(p) == 12 and f.d(p, 1) == 12 and f.d(p, 2) == 4
