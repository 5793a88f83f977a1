"""The prolongation and elimination cascade.

Starting from the first-order system for the deformation tensor, every
stage is obtained by formal total differentiation followed by
substitution of already-known derivatives:

    (t1, t2, z1, z2)  ->  I, II  ->  III  ->  E1, E2  ->  rows  ->  A, B, C, D

All stages are written against an abstract coefficient ring, so the same
code runs on exact symbolic coefficients and on Taylor jets at a point.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from ..expr import Expr, Taylor, eval_taylor
from ..webgeom import WebFunction
from .jets import JetPoly, coeff_is_zero, jet, solve_linear
from .spoly import SPoly, det3

FIRST = ("s1", "s2")
SECOND = ("s11", "s12", "s22")
THIRD = ("s111", "s112", "s122", "s222")


class CascadeError(RuntimeError):
    """Internal inconsistency: a stage did not have the expected shape."""


class EliminationError(CascadeError):
    pass


class ParallelizableBranch(ValueError):
    """Raised when a stage that needs r != 0 is reached with r = 0."""


class BudgetExceeded(RuntimeError):
    def __init__(self, stage: str, size: int, budget: int):
        self.stage, self.size, self.budget = stage, size, budget
        super().__init__(f"{stage}: expression size {size} exceeds node budget {budget}")


@dataclass
class Coefficients:
    """Web data in some coefficient ring."""

    c: object
    G1: object
    G2: object
    r: object
    kind: str = "symbolic"

    @staticmethod
    def symbolic(w: WebFunction) -> "Coefficients":
        ch = w.chern
        return Coefficients(ch.c, ch.G1, ch.G2, ch.r, "symbolic")

    @staticmethod
    def taylor(w: WebFunction, point, order: int = 9, exact: bool = True) -> "Coefficients":
        m = point.mapping(exact=exact) if hasattr(point, "mapping") else dict(point)
        c = eval_taylor(w.chern.c, m, order + 2)
        c1, c2 = c.partial(1), c.partial(2)
        r = (c1 * c2 - c1.partial(2) * c) / (c * c)
        return Coefficients(c, c1 / c, -c2 / c, r, "taylor")

    def r_is_zero(self) -> bool:
        return coeff_is_zero(self.r)


# -- Eq. (3): the first-order system for L -------------------------------------


def pde_system(r, G1, G2, L: Sequence, dL: dict) -> list:
    """Residuals of the four first-order equations for ``L``.

    ``L = (L111, L112, L212, L222)`` and ``dL[(k, i)]`` is the x_i
    derivative of ``L[k]``.  Values may be numbers, expressions or jet
    polynomials.
    """
    L111, L112, L212, L222 = L
    return [
        r + dL[(1, 1)] - dL[(0, 2)] + L212 * L112,
        dL[(2, 1)] - G1 * L212 + L212 * L212 - L111 * L212,
        -dL[(1, 2)] + G2 * L112 + L222 * L112 - L112 * L112,
        r + dL[(3, 1)] - dL[(2, 2)] - L112 * L212,
    ]


def deformation_jets(C: Coefficients) -> list[JetPoly]:
    """(L111, L112, L212, L222) in terms of the jets s, t, z."""
    s, t, z = jet("s"), jet("t"), jet("z")
    inv_c = 1 / C.c
    return [2 * t + s, z, t, 2 * z - s * inv_c]


def frobenius_rhs(C: Coefficients) -> dict[str, JetPoly]:
    """Solve the first-order system for t1, t2, z1, z2.

    The equations are affine in the four unknown derivatives with constant
    coefficients; the matrix is recovered by probing each unknown.
    """
    L = deformation_jets(C)
    zero_rules = {"t": (JetPoly(), JetPoly()), "z": (JetPoly(), JetPoly())}
    base = {(k, i): L[k].total_derivative(i, zero_rules) for k in range(4) for i in (1, 2)}
    unknowns = [("t", 1), ("t", 2), ("z", 1), ("z", 2)]
    slope = {"t": [L[k].coefficient_of("t").terms.get(_zero_key(), 0) for k in range(4)],
             "z": [L[k].coefficient_of("z").terms.get(_zero_key(), 0) for k in range(4)]}

    def residuals(probe):
        dL = {}
        for (k, i), v in base.items():
            extra = 0
            for u, (name, j) in enumerate(unknowns):
                if j == i and probe[u]:
                    extra += slope[name][k] * probe[u]
            dL[(k, i)] = v + extra
        return pde_system(C.r, C.G1, C.G2, L, dL)

    rest = residuals([0, 0, 0, 0])
    M = [[None] * 4 for _ in range(4)]
    for u in range(4):
        probe = [0] * 4
        probe[u] = 1
        col = residuals(probe)
        for k in range(4):
            diff = col[k] - rest[k]
            if any(any(m) for m in diff.terms):
                raise CascadeError("first-order system is not affine with constant coefficients")
            M[k][u] = diff.terms.get(_zero_key(), 0)
    sol = solve_linear(M, [-e for e in rest])
    return dict(zip(["t1", "t2", "z1", "z2"], sol))


def _zero_key():
    from .jets import NV

    return (0,) * NV


# -- second-order equations I and II ----------------------------------------


def _leading(p: JetPoly, name: str):
    """Coefficient of the bare monomial ``name``; it must be jet-free."""
    part = p.coefficient_of(name)
    if set(part.terms) - {_zero_key()}:
        raise CascadeError(f"{name} enters nonlinearly or with jet-dependent coefficient")
    return part.terms.get(_zero_key(), 0)


def integrability_equations(C: Coefficients, frob: dict | None = None) -> dict[str, JetPoly]:
    frob = frob or frobenius_rhs(C)
    rules = {"t": (frob["t1"], frob["t2"]), "z": (frob["z1"], frob["z2"])}
    ct = frob["t1"].total_derivative(2, rules) - frob["t2"].total_derivative(1, rules)
    cz = frob["z1"].total_derivative(2, rules) - frob["z2"].total_derivative(1, rules)
    for name, cond in (("t", ct), ("z", cz)):
        left = {str(v) for v in cond.variables()} & {"t", "z"}
        if left:
            raise EliminationError(
                f"elimination did not close: {', '.join(sorted(left))} survive in the {name}-condition"
            )
    lead_t = _leading(ct, "s11")
    lead_z = _leading(cz, "s22")
    if coeff_is_zero(lead_t) or coeff_is_zero(lead_z):
        raise EliminationError("integrability conditions lost their second-order leading term")
    return {"I": ct / lead_t, "II": cz / lead_z}


# -- third-order reduction and equation III -----------------------------------


def third_order_rules(I: JetPoly, II: JetPoly) -> dict[str, JetPoly]:
    """s111, s112, s122, s222 solved from the prolongations of I and II."""
    eqs = [I.total_derivative(1), I.total_derivative(2), II.total_derivative(1), II.total_derivative(2)]
    M = [[_leading(e, v) for v in THIRD] for e in eqs]
    rest = []
    for e in eqs:
        r = e
        for v in THIRD:
            r = r - jet(v) * _leading(e, v)
        if any(str(v) in THIRD for v in r.variables()):
            raise CascadeError("third-order jets enter nonlinearly")
        rest.append(-r)
    sol = solve_linear(M, rest)
    return dict(zip(THIRD, sol))


def equation_III(C: Coefficients, I: JetPoly, II: JetPoly, thirds: dict | None = None) -> JetPoly:
    c = C.c
    D = lambda p, i: p.total_derivative(i)
    comb = (D(D(II, 1), 1) - D(D(I, 2), 2)) * c + (D(D(I, 1), 2) - D(D(II, 1), 2) * (c * c)) * 2
    if comb.jet_order() > 3:
        raise CascadeError("fourth-order jets survive in the combination for III")
    thirds = thirds or third_order_rules(I, II)
    e = comb.substitute(thirds)
    e = e.substitute({"s11": jet("s11") - I, "s22": jet("s22") - II})
    bad = {str(v) for v in e.variables()} & (set(THIRD) | {"s11", "s22"})
    if bad:
        raise CascadeError(f"III still contains {sorted(bad)}")
    return e


def second_order_rules(I: JetPoly, II: JetPoly, III: JetPoly) -> dict[str, JetPoly]:
    """s11, s12, s22 expressed through s, s1, s2."""
    lead = _leading(III, "s12")
    if coeff_is_zero(lead):
        raise ParallelizableBranch("III has no s12 term (curvature vanishes)")
    s12 = jet("s12") - III / lead
    if s12.jet_order() > 1:
        raise CascadeError("III is not linear in s12 modulo first-order terms")
    rules = {"s12": s12}
    rules["s11"] = (jet("s11") - I).substitute(rules)
    rules["s22"] = (jet("s22") - II).substitute(rules)
    for k, v in rules.items():
        if v.jet_order() > 1:
            raise CascadeError(f"reduced {k} still has second-order jets")
    return rules


def quadratic_equations(C: Coefficients, I: JetPoly, II: JetPoly, III: JetPoly,
                        thirds: dict | None = None, seconds: dict | None = None) -> dict[str, JetPoly]:
    if C.r_is_zero():
        raise ParallelizableBranch("quadratic equations need nonzero curvature")
    c, r = C.c, C.r
    k = c * r * 24
    D = lambda p, i: p.total_derivative(i)
    c1 = D(I, 2) * k - D(III, 1) + D(III, 2) * (c * 2)
    c2 = D(II, 1) * k - D(III, 2) + D(III, 1) * (2 / c)
    thirds = thirds or third_order_rules(I, II)
    seconds = seconds or second_order_rules(I, II, III)
    out = {}
    for name, comb in (("E1", c1), ("E2", c2)):
        e = comb.substitute(thirds).substitute(seconds)
        if e.jet_order() > 1:
            raise CascadeError(f"{name} still has jets of order {e.jet_order()}")
        out[name] = e
    return out


# -- the linear system -----------------------------------------------------------


@dataclass
class Row:
    a: SPoly
    b: SPoly
    c: SPoly
    d: SPoly

    def entries(self) -> tuple[SPoly, SPoly, SPoly, SPoly]:
        return (self.a, self.b, self.c, self.d)

    def map_coeffs(self, fn) -> "Row":
        return Row(*(p.map_coeffs(fn) for p in self.entries()))

    def scaled(self, lam) -> "Row":
        return Row(*(p * lam for p in self.entries()))


def _bideg_split(p: JetPoly) -> dict[tuple, SPoly]:
    parts = p.split(FIRST)
    out = {}
    for key, q in parts.items():
        out[key] = SPoly.from_jetpoly(q)
    return out


def _jet_free(p: SPoly, what: str):
    if p.degree > 0:
        raise CascadeError(f"{what} depends on s")
    return p[0]


def reduce_modulo_quadratics(p: JetPoly, E1: JetPoly, E2: JetPoly) -> dict[tuple, SPoly]:
    """Normal form of a cubic in (s1, s2) on the basis 1, s1, s2, s1*s2.

    The cubic part is cancelled by s1*E1, s2*E1, s1*E2, s2*E2, then
    (s1)^2 and (s2)^2 by E1 and E2 themselves.
    """
    s1, s2 = jet("s1"), jet("s2")
    e1, e2 = _bideg_split(E1), _bideg_split(E2)
    lead1 = _jet_free(e1.get((2, 0), SPoly()), "(s1)^2 coefficient of E1")
    lead2 = _jet_free(e2.get((0, 2), SPoly()), "(s2)^2 coefficient of E2")
    if coeff_is_zero(lead1) or coeff_is_zero(lead2):
        raise CascadeError("quadratic equations lost their leading squares")
    mults = [s1 * E1, s2 * E1, s1 * E2, s2 * E2]
    cubic = [(3, 0), (2, 1), (1, 2), (0, 3)]
    msplit = [_bideg_split(m) for m in mults]
    M = [[_jet_free(ms.get(k, SPoly()), "cubic part of a multiple") for ms in msplit] for k in cubic]
    parts = _bideg_split(p)
    if any(sum(k) > 3 for k in parts):
        raise CascadeError("row equation has degree above 3 in (s1, s2)")
    lam = solve_linear(M, [parts.get(k, SPoly()) for k in cubic])
    q = p
    for l, m in zip(lam, mults):
        q = q - m * l.to_jetpoly()
    qs = _bideg_split(q)
    mu1 = qs.get((2, 0), SPoly()) * (1 / lead1)
    mu2 = qs.get((0, 2), SPoly()) * (1 / lead2)
    q = q - E1 * mu1.to_jetpoly() - E2 * mu2.to_jetpoly()
    qs = _bideg_split(q)
    left = set(k for k, v in qs.items() if not v.is_zero()) - {(0, 0), (1, 0), (0, 1), (1, 1)}
    if left:
        raise CascadeError(f"reduction left monomials {sorted(left)}")
    return qs


def linear_system(C: Coefficients, E1: JetPoly, E2: JetPoly, seconds: dict) -> list[Row]:
    rows = []
    for E in (E1, E2):
        for i in (1, 2):
            raw = E.total_derivative(i).substitute(seconds)
            if raw.jet_order() > 1:
                raise CascadeError("row equation keeps second-order jets")
            qs = reduce_modulo_quadratics(raw, E1, E2)
            rows.append(Row(qs.get((1, 0), SPoly()), qs.get((0, 1), SPoly()),
                            qs.get((1, 1), SPoly()), -qs.get((0, 0), SPoly())))
    return rows


@dataclass
class Minors:
    A: SPoly
    B: SPoly
    C: SPoly
    D: SPoly


def cramer_polynomials(rows: Sequence[Row]) -> Minors:
    a = [r.a for r in rows[:3]]
    b = [r.b for r in rows[:3]]
    c = [r.c for r in rows[:3]]
    d = [r.d for r in rows[:3]]
    D = det3([[a[i], b[i], c[i]] for i in range(3)])
    A = det3([[d[i], b[i], c[i]] for i in range(3)])
    B = det3([[a[i], d[i], c[i]] for i in range(3)])
    Cm = det3([[a[i], b[i], d[i]] for i in range(3)])
    return Minors(A, B, Cm, D)


def coefficient_minors(rows: Sequence[Row]) -> list[SPoly]:
    """All four third-order minors of the 4x3 matrix [a b c]."""
    out = []
    for skip in range(3, -1, -1):
        rs = [r for k, r in enumerate(rows) if k != skip]
        out.append(det3([[r.a, r.b, r.c] for r in rs]))
    return out


# -- the full cascade -------------------------------------------------------------


@dataclass
class Cascade:
    coefficients: Coefficients
    frob: dict
    I: JetPoly
    II: JetPoly
    III: JetPoly
    E1: JetPoly | None = None
    E2: JetPoly | None = None
    thirds: dict = field(default_factory=dict)
    seconds: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    sizes: dict = field(default_factory=dict)
    _minors: Minors | None = None

    @property
    def parallelizable(self) -> bool:
        return self.E1 is None

    @property
    def minors(self) -> Minors:
        if self._minors is None:
            if self.parallelizable:
                raise ParallelizableBranch("no linear system for a parallelizable web")
            self._minors = cramer_polynomials(self.rows)
        return self._minors

    def equations(self) -> dict[str, JetPoly]:
        out = {"I": self.I, "II": self.II, "III": self.III}
        if self.E1 is not None:
            out.update(E1=self.E1, E2=self.E2)
        return out


def run_cascade(C: Coefficients, budget: int | None = None) -> Cascade:
    """Run all stages; ``budget`` caps the coefficient size of any stage."""
    sizes: dict[str, int] = {}

    def check(stage, *polys):
        n = sum(p.size() for p in polys)
        sizes[stage] = n
        if budget is not None and n > budget:
            raise BudgetExceeded(stage, n, budget)

    frob = frobenius_rhs(C)
    check("frobenius", *frob.values())
    eq = integrability_equations(C, frob)
    I, II = eq["I"], eq["II"]
    check("I/II", I, II)
    thirds = third_order_rules(I, II)
    III = equation_III(C, I, II, thirds)
    check("III", III)
    cas = Cascade(C, frob, I, II, III, thirds=thirds, sizes=sizes)
    if C.r_is_zero() or III.is_zero():
        return cas
    seconds = second_order_rules(I, II, III)
    quad = quadratic_equations(C, I, II, III, thirds, seconds)
    check("E1/E2", quad["E1"], quad["E2"])
    cas.E1, cas.E2, cas.seconds = quad["E1"], quad["E2"], seconds
    cas.rows = linear_system(C, cas.E1, cas.E2, seconds)
    check("rows", *[p.to_jetpoly() for r in cas.rows for p in r.entries()])
    return cas
