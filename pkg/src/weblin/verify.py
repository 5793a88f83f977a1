"""Deformation tensors, deformed connections and the linearization checks.

A linearization is a tensor L with L^2_11 = L^1_22 = 0 such that the
connection nabla + L is torsion-free, flat and keeps all three foliations
geodesic.  Components are *fields*: either closed-form expressions with
exact derivatives, or callables differentiated by central differences.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .expr import EvaluationError, Expr, as_expr
from .linsys.cascade import pde_system
from .residuals import ResidualTable
from .webgeom import Point, WebFunction

FD_STEP = 1e-4
TOL_CLOSED = 1e-7
TOL_GRID = 1e-3
TOL_TORSION = 1e-10


class Field:
    """A scalar function on the plane with first derivatives."""

    exact = True
    expr: Expr | None = None

    def value(self, p: Point) -> float:
        raise NotImplementedError

    def d(self, p: Point, i: int) -> float:
        raise NotImplementedError


class ExprField(Field):
    def __init__(self, e):
        self.expr = as_expr(e)

    def value(self, p: Point) -> float:
        return float(self.expr.evaluate(p.mapping(), exact=False))

    def d(self, p: Point, i: int) -> float:
        return float(self.expr.partial(i).evaluate(p.mapping(), exact=False))

    def __add__(self, o: "Field") -> Field:
        if isinstance(o, ExprField):
            return ExprField(self.expr + o.expr)
        return SumField(self, o)


class FunctionField(Field):
    """Values from a callable; derivatives by central differences."""

    exact = False

    def __init__(self, fn: Callable[[float, float], float], h: float = FD_STEP):
        self.fn = fn
        self.h = h

    def value(self, p: Point) -> float:
        return float(self.fn(float(p.x1), float(p.x2)))

    def d(self, p: Point, i: int) -> float:
        h = self.h
        x1, x2 = float(p.x1), float(p.x2)
        if i == 1:
            return (self.fn(x1 + h, x2) - self.fn(x1 - h, x2)) / (2 * h)
        return (self.fn(x1, x2 + h) - self.fn(x1, x2 - h)) / (2 * h)


class SumField(Field):
    def __init__(self, a: Field, b: Field):
        self.a, self.b = a, b
        self.exact = a.exact and b.exact

    def value(self, p):
        return self.a.value(p) + self.b.value(p)

    def d(self, p, i):
        return self.a.d(p, i) + self.b.d(p, i)


ZERO = ExprField(0)


def _field(x) -> Field:
    return x if isinstance(x, Field) else ExprField(x)


@dataclass
class DeformationTensor:
    L111: Field
    L112: Field
    L212: Field
    L222: Field
    provenance: dict = field(default_factory=dict)

    @property
    def exact(self) -> bool:
        return all(f.exact for f in self.components())

    def components(self) -> tuple[Field, Field, Field, Field]:
        return (self.L111, self.L112, self.L212, self.L222)

    def read_back(self, w: WebFunction):
        """(s, t, z) recovered from the components (closed form only)."""
        c = w.chern.c
        L = [f.expr for f in self.components()]
        return 2 * c * L[1] - c * L[3], L[2], L[1]


def build_L(w: WebFunction, s, t, z) -> DeformationTensor:
    """Invert s = 2c L^1_12 - c L^2_22, t = L^2_12, z = L^1_12 together
    with L^2_12 = (L^1_11 + c L^2_22 - 2c L^1_12) / 2."""
    c = w.chern.c
    if all(not isinstance(v, Field) for v in (s, t, z)):
        s, t, z = (as_expr(v) for v in (s, t, z))
        return DeformationTensor(ExprField(2 * t + s), ExprField(z), ExprField(t),
                                 ExprField(2 * z - s / c), {"s": s, "t": t, "z": z})
    sf, tf, zf = (_field(v) for v in (s, t, z))
    cf = c.compile()

    def comp(fn):
        return FunctionField(fn)

    L111 = comp(lambda a, b: 2 * tf.value(Point(a, b)) + sf.value(Point(a, b)))
    L112 = comp(lambda a, b: zf.value(Point(a, b)))
    L212 = comp(lambda a, b: tf.value(Point(a, b)))
    L222 = comp(lambda a, b: 2 * zf.value(Point(a, b)) - sf.value(Point(a, b)) / float(cf(a, b)))
    return DeformationTensor(L111, L112, L212, L222, {"s": s, "t": t, "z": z})


def grid_deformation(w: WebFunction, s, solution) -> DeformationTensor:
    """Deformation tensor backed by a numerically integrated Frobenius solution."""
    cache: dict = {}

    def tz(a, b):
        key = (a, b)
        if key not in cache:
            cache[key] = solution.evaluate(a, b)
            if len(cache) > 4096:
                cache.pop(next(iter(cache)))
        return cache[key]

    s = as_expr(s)
    sfn = s.compile()
    t = FunctionField(lambda a, b: tz(a, b)[0])
    z = FunctionField(lambda a, b: tz(a, b)[1])
    sf = FunctionField(lambda a, b: float(sfn(a, b)))
    L = build_L(w, sf, t, z)
    L.provenance = {"s": s, "t": "grid", "z": "grid"}
    return L


@dataclass
class Connection:
    """Christoffel symbols G[(i, j, k)] = G^i_{jk} in coordinates."""

    G: dict
    symmetric: bool = False

    def __getitem__(self, key) -> Field:
        return self.G.get(key, ZERO)

    @property
    def exact(self) -> bool:
        return all(f.exact for f in self.G.values())

    def expr(self, i, j, k) -> Expr | None:
        return self[(i, j, k)].expr

    @staticmethod
    def from_components(comp: Mapping[tuple, object], symmetric: bool = False) -> "Connection":
        return Connection({k: _field(v) for k, v in comp.items()}, symmetric)


def chern_connection(w: WebFunction) -> Connection:
    ch = w.chern
    return Connection.from_components({(1, 1, 1): ch.G1, (2, 2, 2): ch.G2}, symmetric=True)


def deformed_connection(w: WebFunction, L: DeformationTensor) -> Connection:
    ch = w.chern
    g111 = _add(ExprField(ch.G1), L.L111)
    g222 = _add(ExprField(ch.G2), L.L222)
    G = {
        (1, 1, 1): g111,
        (1, 1, 2): L.L112,
        (1, 2, 1): L.L112,
        (2, 1, 2): L.L212,
        (2, 2, 1): L.L212,
        (2, 2, 2): g222,
    }
    return Connection(G, symmetric=True)


def _add(a: Field, b: Field) -> Field:
    if isinstance(a, ExprField) and isinstance(b, ExprField):
        return ExprField(a.expr + b.expr)
    return SumField(a, b)


# -- checks ---------------------------------------------------------------------


def _tol(exact: bool) -> float:
    return TOL_CLOSED if exact else TOL_GRID


def check_pde_system(w: WebFunction, L: DeformationTensor, samples: Sequence[Point],
                     tol: float | None = None) -> ResidualTable:
    ch = w.chern
    tol = tol if tol is not None else _tol(L.exact)
    table = ResidualTable("pde", [f"eq{k}" for k in range(1, 5)], tol)
    comps = L.components()
    if L.exact:
        Ls = [f.expr for f in comps]
        dL = {(k, i): Ls[k].partial(i) for k in range(4) for i in (1, 2)}
        res = pde_system(ch.r, ch.G1, ch.G2, Ls, dL)
        table.symbolic_zero = {f"eq{k + 1}": e.is_zero() for k, e in enumerate(res)}
    for p in samples:
        mp = p.mapping()
        try:
            vals = [f.value(p) for f in comps]
            dL = {(k, i): comps[k].d(p, i) for k in range(4) for i in (1, 2)}
            r = float(ch.r.evaluate(mp, exact=False))
            g1 = float(ch.G1.evaluate(mp, exact=False))
            g2 = float(ch.G2.evaluate(mp, exact=False))
        except (EvaluationError, ZeroDivisionError) as exc:
            table.warnings.append(f"sample {p} skipped: {exc}")
            continue
        row = pde_system(r, g1, g2, vals, dL)
        if not all(math.isfinite(v) for v in row):
            table.warnings.append(f"sample {p} skipped: non-finite residual")
            continue
        table.add(p, [abs(v) for v in row])
    return table


def check_torsion(conn: Connection, samples: Sequence[Point] = ()) -> bool:
    """G^i_12 = G^i_21; structural for connections built here."""
    if conn.symmetric:
        return True
    for i in (1, 2):
        a, b = conn[(i, 1, 2)], conn[(i, 2, 1)]
        if a.expr is not None and b.expr is not None:
            if not (a.expr - b.expr).is_zero():
                if not samples:
                    return False
        for p in samples:
            try:
                if abs(a.value(p) - b.value(p)) >= TOL_TORSION:
                    return False
            except EvaluationError:
                continue
        if not samples and (a.expr is None or b.expr is None):
            raise ValueError("samples are needed to check a numeric connection")
    return True


def curvature_components(conn: Connection, p: Point) -> dict[str, float]:
    """R^i_{j12} = d1 G^i_{2j} - d2 G^i_{1j} + sum_m (G^i_{1m} G^m_{2j} - G^i_{2m} G^m_{1j})."""
    val = {k: f.value(p) for k, f in conn.G.items()}
    g = lambda i, j, k: val.get((i, j, k), 0.0)
    out = {}
    for i in (1, 2):
        for j in (1, 2):
            v = conn[(i, 2, j)].d(p, 1) - conn[(i, 1, j)].d(p, 2)
            for m in (1, 2):
                v += g(i, 1, m) * g(m, 2, j) - g(i, 2, m) * g(m, 1, j)
            out[f"R{i}_{j}12"] = v
    return out


def check_flat(w: WebFunction, conn: Connection, samples: Sequence[Point],
               tol: float | None = None) -> ResidualTable:
    tol = tol if tol is not None else _tol(conn.exact)
    cols = ["R1_112", "R1_212", "R2_112", "R2_212"]
    table = ResidualTable("flat", cols, tol)
    for p in samples:
        try:
            R = curvature_components(conn, p)
        except (EvaluationError, ZeroDivisionError) as exc:
            table.warnings.append(f"sample {p} skipped: {exc}")
            continue
        if not all(math.isfinite(v) for v in R.values()):
            table.warnings.append(f"sample {p} skipped: non-finite curvature")
            continue
        table.add(p, [abs(R[c]) for c in cols])
    return table


def transversal_derivative(w: WebFunction, conn: Connection) -> tuple[Expr, Expr] | None:
    """Closed form of nabla_X X for X = d1 - c d2 (None for numeric connections)."""
    c = w.chern.c
    if not conn.exact:
        return None
    G = lambda i, j, k: conn[(i, j, k)].expr
    v = []
    for k in (1, 2):
        e = G(k, 1, 1) - c * G(k, 2, 1) - c * G(k, 1, 2) + c * c * G(k, 2, 2)
        if k == 2:
            e = e - c.partial(1) + c * c.partial(2)
        v.append(e)
    return v[0], v[1]


def check_geodesic_foliations(w: WebFunction, conn: Connection, samples: Sequence[Point],
                              tol: float = TOL_CLOSED) -> ResidualTable:
    """(i) G^2_11 = 0, (ii) G^1_22 = 0, (iii) det(nabla_X X, X) = 0 for X = d1 - c d2.

    The table's ``extra["factor"]`` lists the proportionality factor
    nabla_X X = factor * X at each sample.
    """
    c = w.chern.c
    table = ResidualTable("geodesic", ["G2_11", "G1_22", "det"], tol)
    factors = []
    closed = transversal_derivative(w, conn)
    if closed is not None:
        table.extra["factor_expr"] = closed[0]
        table.symbolic_zero["det"] = (-c * closed[0] - closed[1]).is_zero()
    for p in samples:
        mp = p.mapping()
        try:
            cv = float(c.evaluate(mp, exact=False))
            c1 = float(c.partial(1).evaluate(mp, exact=False))
            c2 = float(c.partial(2).evaluate(mp, exact=False))
            g = lambda i, j, k: conn[(i, j, k)].value(p)
            v1 = g(1, 1, 1) - cv * g(1, 2, 1) - cv * g(1, 1, 2) + cv * cv * g(1, 2, 2)
            v2 = g(2, 1, 1) - cv * g(2, 2, 1) - cv * g(2, 1, 2) + cv * cv * g(2, 2, 2) - c1 + cv * c2
            det = v1 * (-cv) - v2 * 1.0
            row = [abs(g(2, 1, 1)), abs(g(1, 2, 2)), abs(det)]
        except (EvaluationError, ZeroDivisionError) as exc:
            table.warnings.append(f"sample {p} skipped: {exc}")
            continue
        table.add(p, row)
        factors.append(v1)
    table.extra["factor"] = factors
    return table


@dataclass
class Verdict:
    linearization: bool
    pde: ResidualTable
    torsion_free: bool
    flat: ResidualTable
    geodesic: ResidualTable
    connection: Connection
    L: DeformationTensor
    failed_at: str | None = None

    def summary(self) -> dict:
        return {
            "linearization": self.linearization,
            "failed_at": self.failed_at,
            "pde": self.pde.summary(),
            "torsion_free": self.torsion_free,
            "flat": self.flat.summary(),
            "geodesic": self.geodesic.summary(),
        }


def full_verdict(w: WebFunction, candidate, samples: Sequence[Point]) -> Verdict:
    """Run every check on a candidate with attributes/keys s, t, z (or a tensor)."""
    if isinstance(candidate, DeformationTensor):
        L = candidate
    elif isinstance(candidate, Mapping):
        L = build_L(w, candidate["s"], candidate["t"], candidate["z"])
    else:
        L = build_L(w, candidate.s, candidate.t, candidate.z)
    conn = deformed_connection(w, L)
    pde = check_pde_system(w, L, samples)
    torsion = check_torsion(conn, samples)
    flat = check_flat(w, conn, samples)
    geo = check_geodesic_foliations(w, conn, samples)
    failed = None
    for name, ok in (("pde_system", pde.verified), ("torsion", torsion), ("flat", flat.verified),
                     ("geodesic_foliations", geo.verified)):
        if not ok:
            failed = name
            break
    return Verdict(failed is None, pde, torsion, flat, geo, conn, L, failed)


__all__ = [
    "Connection", "DeformationTensor", "ExprField", "Field", "FunctionField", "Verdict",
    "build_L", "check_flat", "check_geodesic_foliations", "check_pde_system", "check_torsion",
    "chern_connection", "curvature_components", "deformed_connection", "full_verdict",
    "grid_deformation", "transversal_derivative",
]
