"""Obstruction polynomials Q1..Q7 in the base s.

Symbolic coefficients are carried through the linear system; from the
rows on, the polynomials are formed pointwise from exact second-order
Taylor jets of the row entries.  When a symbolic stage exceeds the node
budget the whole cascade is rerun in Taylor arithmetic at each point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from ..expr import Taylor, eval_taylor
from ..expr.taylor import to_fraction
from ..webgeom import Point, WebFunction
from .cascade import (
    BudgetExceeded,
    Cascade,
    Coefficients,
    Minors,
    ParallelizableBranch,
    cramer_polynomials,
    run_cascade,
)
from .jets import VARS, JetPoly, coeff_is_zero, var_index
from .spoly import SPoly

WEIGHTS = {"s1": 1, "s2": 1, "s11": 3, "s12": 3, "s22": 3}
SOURCES = ("I", "II", "III", "E1", "E2")
DEFAULT_BUDGET = 200_000


class DegenerateMinor(RuntimeError):
    """D vanishes identically at every tested point."""


def _total(X: SPoly, j: int, A: SPoly, B: SPoly, D: SPoly) -> SPoly:
    """Numerator over D^3 of D_j(X/D) with s1 = A/D, s2 = B/D."""
    Y = A if j == 1 else B
    return (X.partial(j) * D + X.ds() * Y) * D - X * (D.partial(j) * D + D.ds() * Y)


def plug_jets(eq: JetPoly, values: dict[str, SPoly], D: SPoly) -> SPoly:
    """Insert s-jet numerators into ``eq`` and clear the powers of D."""
    ks = var_index("s")
    groups: dict[tuple, dict[int, object]] = {}
    for m, c in eq.terms.items():
        key = tuple((str(VARS[k]), e) for k, e in enumerate(m) if e and k != ks)
        for name, _ in key:
            if name not in values:
                raise ValueError(f"cannot insert jet {name}")
        groups.setdefault(key, {})[m[ks]] = c
    weighted = []
    for key, scoeffs in groups.items():
        n = max(scoeffs)
        part = SPoly([scoeffs.get(k, 0) for k in range(n + 1)])
        w = 0
        for name, e in key:
            w += WEIGHTS[name] * e
            part = part * values[name] ** e
        weighted.append((w, part))
    if not weighted:
        return SPoly()
    W = max(w for w, _ in weighted)
    total = SPoly()
    for w, part in weighted:
        total = total + part * D ** (W - w)
    return total


def q_from_minors(minors: Minors, equations: dict[str, JetPoly]) -> list[SPoly]:
    """Q1..Q7 from the Cramer minors and the source equations I..E2.

    Coefficients of the minors must admit two x-derivatives.
    """
    A, B, Cm, D = minors.A, minors.B, minors.C, minors.D
    S11 = _total(A, 1, A, B, D)
    S12 = _total(A, 2, A, B, D)
    S21 = _total(B, 1, A, B, D)
    S22 = _total(B, 2, A, B, D)
    vals = {"s1": A, "s2": B, "s11": S11, "s12": S12, "s22": S22}
    qs = [A * B - Cm * D, S21 - S12]
    qs += [plug_jets(equations[name], vals, D) for name in SOURCES]
    return qs


def _value(c):
    if isinstance(c, Taylor):
        c = c.value
    return to_fraction(c)


def remove_content(coeffs: Sequence) -> list:
    """Scale to a primitive integer vector (exact) or unit max-norm (float)."""
    cs = list(coeffs)
    while cs and cs[-1] == 0:
        cs.pop()
    if not cs:
        return []
    if all(isinstance(c, (int, Fraction)) for c in cs):
        fr = [Fraction(c) for c in cs]
        g = 0
        l = 1
        for c in fr:
            g = math.gcd(g, c.numerator)
            l = l * c.denominator // math.gcd(l, c.denominator)
        scale = Fraction(l, g)
        if fr[-1] < 0:
            scale = -scale
        return [c * scale for c in fr]
    fl = [float(c) for c in cs]
    m = max(abs(c) for c in fl)
    sign = -1.0 if fl[-1] < 0 else 1.0
    return [sign * c / m for c in fl]


@dataclass
class PointQ:
    point: Point
    q: list[list]  # seven coefficient lists, constant term first, content removed
    D: list
    mode: str
    degenerate: bool = False

    def degrees(self) -> list[int]:
        return [len(c) - 1 for c in self.q]

    def normalized(self, i: int) -> list[float]:
        """Coefficients of Q_{i+1} scaled to unit max-norm, as floats."""
        cs = self.q[i]
        if not cs:
            return []
        m = max(abs(c) for c in cs)
        return [float(c / m) for c in cs]

    def value(self, i: int, s) -> float:
        """Q_{i+1}(s) divided by its largest coefficient magnitude."""
        cs = self.q[i]
        if not cs:
            return 0.0
        if isinstance(s, (int, Fraction)) and all(isinstance(c, (int, Fraction)) for c in cs):
            acc = Fraction(0)
            for c in reversed(cs):
                acc = acc * s + c
            return float(acc / max(abs(c) for c in cs))
        acc = 0.0
        for c in reversed(self.normalized(i)):
            acc = acc * float(s) + c
        return acc


class QSystem:
    """Pointwise access to Q1..Q7 of a web."""

    def __init__(self, w: WebFunction, mode: str = "auto", node_budget: int = DEFAULT_BUDGET,
                 numeric_order: int = 9):
        if mode not in ("auto", "symbolic", "numeric"):
            raise ValueError(f"unknown mode {mode!r}")
        self.w = w
        self.requested = mode
        self.node_budget = node_budget
        self.numeric_order = numeric_order
        self._cascade: Cascade | None = None
        self.mode = mode if mode != "auto" else None
        self.fallback_reason: str | None = None
        self._cache: dict = {}

    @property
    def cascade(self) -> Cascade:
        """The symbolic cascade (raises BudgetExceeded in symbolic mode)."""
        if self._cascade is None:
            budget = self.node_budget if self.requested != "numeric" else None
            self._cascade = run_cascade(Coefficients.symbolic(self.w), budget)
        return self._cascade

    def _resolve_mode(self) -> str:
        if self.mode is None:
            try:
                cas = self.cascade
                if cas.parallelizable:
                    raise ParallelizableBranch("curvature vanishes: no Q-system")
                self.mode = "symbolic"
            except BudgetExceeded as exc:
                self.fallback_reason = str(exc)
                self.mode = "numeric"
        return self.mode

    def at(self, p: Point) -> PointQ:
        key = (p.x1, p.x2)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        mode = self._resolve_mode()
        res = self._at_symbolic(p) if mode == "symbolic" else self._at_numeric(p)
        self._cache[key] = res
        return res

    def _at_symbolic(self, p: Point) -> PointQ:
        cas = self.cascade
        if cas.parallelizable:
            raise ParallelizableBranch("curvature vanishes: no Q-system")
        m = p.mapping(exact=True)
        conv2 = lambda c: eval_taylor(c, m, 2)
        conv0 = lambda c: eval_taylor(c, m, 0)
        rows = [r.map_coeffs(conv2) for r in cas.rows]
        eqs = {k: v.map_coeffs(conv0) for k, v in cas.equations().items()}
        return self._finish(p, rows, eqs, "symbolic")

    def _at_numeric(self, p: Point) -> PointQ:
        exact = self.w.chern.c.is_rational()
        C = Coefficients.taylor(self.w, p, self.numeric_order, exact=exact)
        cas = run_cascade(C)
        if cas.parallelizable:
            raise ParallelizableBranch("curvature vanishes at this point")
        return self._finish(p, cas.rows, cas.equations(), "numeric")

    def _finish(self, p, rows, eqs, mode) -> PointQ:
        minors = cramer_polynomials(rows)
        qs = q_from_minors(minors, eqs)
        cl = [remove_content([_value(c) for c in q.coeffs]) for q in qs]
        dl = [_value(c) for c in minors.D.coeffs]
        degenerate = all(c == 0 for c in dl)
        return PointQ(p, cl, dl, mode, degenerate)


def q_polynomials(w: WebFunction, points: Sequence[Point], mode: str = "auto",
                  node_budget: int = DEFAULT_BUDGET) -> list[PointQ]:
    qs = QSystem(w, mode, node_budget)
    out = [qs.at(p) for p in points]
    if out and all(x.degenerate for x in out):
        raise DegenerateMinor("D vanishes at every sample point")
    return out


def exact_degree(p: SPoly) -> int:
    """Degree of a symbolic SPoly (coefficients are normal forms)."""
    return p.degree


def q1_degree(minors: Minors) -> int:
    """Degree of A*B - C*D from its top coefficients, without forming it."""
    A, B, C, D = minors.A, minors.B, minors.C, minors.D
    top = max(A.degree + B.degree, C.degree + D.degree)
    for k in range(top, -1, -1):
        acc = 0
        for i in range(k + 1):
            a, b = A[i], B[k - i]
            if not (coeff_is_zero(a) if not isinstance(a, int) else a == 0) and not (
                    coeff_is_zero(b) if not isinstance(b, int) else b == 0):
                acc = acc + a * b
            c, d = C[i], D[k - i]
            if not (coeff_is_zero(c) if not isinstance(c, int) else c == 0) and not (
                    coeff_is_zero(d) if not isinstance(d, int) else d == 0):
                acc = acc - c * d
        if not coeff_is_zero(acc):
            return k
    return -1
