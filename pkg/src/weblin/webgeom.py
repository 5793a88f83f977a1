"""Web data: slope, Chern connection, curvature and the parallelizability test.

The web is the triple of foliations ``x1 = const``, ``x2 = const`` and
``f = const``.  Everything here is computed exactly in the canonical
:class:`~weblin.expr.Expr` normal form; numeric sampling only backs checks
that the normal form cannot decide.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from .expr import EvaluationError, Expr, SingularEvaluation, as_expr, parse

DEFAULT_BOX = (2.0, 3.0, 2.0, 3.0)


class DegenerateWeb(ValueError):
    """The input does not define a web in general position."""


class NoRegularSamples(RuntimeError):
    """Every candidate sample point was singular."""


@dataclass(frozen=True)
class Point:
    x1: float
    x2: float
    params: tuple[tuple[str, object], ...] = ()

    def __post_init__(self):
        for v in (self.x1, self.x2):
            if not math.isfinite(float(v)):
                raise ValueError("point coordinates must be finite")

    def mapping(self, exact: bool = False) -> dict[str, object]:
        conv = Fraction if exact else float
        out = {"x1": conv(self.x1), "x2": conv(self.x2)}
        for k, v in self.params:
            out[k] = conv(v)
        return out

    def shifted(self, d1: float = 0.0, d2: float = 0.0) -> "Point":
        return Point(self.x1 + d1, self.x2 + d2, self.params)

    def __str__(self) -> str:
        return f"({self.x1:.6g}, {self.x2:.6g})"


def parse_box(text: str) -> tuple[float, float, float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise ValueError("box must be x1min,x1max,x2min,x2max")
    vals = tuple(float(p) for p in parts)
    if not all(math.isfinite(v) for v in vals):
        raise ValueError("box bounds must be finite")
    if not (vals[0] < vals[1] and vals[2] < vals[3]):
        raise ValueError("box must be nondegenerate (min < max on each axis)")
    return vals  # type: ignore[return-value]


@dataclass(frozen=True)
class ChernData:
    c: Expr
    G1: Expr
    G2: Expr
    r: Expr


class WebFunction:
    """A web function f with its parameter bindings and domain box."""

    def __init__(
        self,
        f: Expr | str,
        params: Iterable[str] = (),
        box: Sequence[float] = DEFAULT_BOX,
        eps_reg: float = 1e-6,
        bindings: Mapping[str, object] | None = None,
    ):
        self.params = tuple(params)
        bindings = dict(bindings or {})
        self.params = tuple(dict.fromkeys(self.params + tuple(bindings)))
        raw = parse(f, self.params) if isinstance(f, str) else as_expr(f)
        self.raw = raw
        self.bindings = {k: _exact(v) for k, v in bindings.items()}
        self.f = raw.substitute(self.bindings) if self.bindings else raw
        self.box = tuple(float(b) for b in box)
        if not (self.box[0] < self.box[1] and self.box[2] < self.box[3]):
            raise ValueError("box must be nondegenerate")
        if eps_reg <= 0:
            raise ValueError("eps_reg must be positive")
        self.eps_reg = float(eps_reg)
        unbound = self.f.free_symbols - {"x1", "x2"}
        if unbound:
            raise ValueError(f"unbound parameters: {', '.join(sorted(unbound))}")
        if not self.f.depends_on("x1") or self.f1.is_zero():
            raise DegenerateWeb("f does not depend on x1")
        if not self.f.depends_on("x2") or self.f2.is_zero():
            raise DegenerateWeb("f does not depend on x2 (f2 vanishes identically)")

    # derivatives of f -------------------------------------------------------

    def fd(self, *idx: int) -> Expr:
        """Partial derivative of f, e.g. ``fd(1, 1, 2)`` is f_112."""
        e = self.f
        for i in sorted(idx):
            e = e.partial(i)
        return e

    @property
    def f1(self) -> Expr:
        return self.f.partial(1)

    @property
    def f2(self) -> Expr:
        return self.f.partial(2)

    @cached_property
    def chern(self) -> ChernData:
        c = self.f1 / self.f2
        c1, c2 = c.partial(1), c.partial(2)
        r = (c1 * c2 - c1.partial(2) * c) / (c * c)
        return ChernData(c=c, G1=c1 / c, G2=-c2 / c, r=r)

    # sampling ---------------------------------------------------------------

    def point(self, x1, x2) -> Point:
        return Point(x1, x2, tuple(sorted(self.bindings.items())))

    def is_regular(self, p: Point, extra: Iterable[Expr] = ()) -> bool:
        """True when all web denominators stay away from zero at ``p``."""
        ch = self.chern
        m = p.mapping()
        try:
            if abs(self.f2.evaluate(m)) <= self.eps_reg:
                return False
            if abs(ch.c.evaluate(m)) <= self.eps_reg:
                return False
            for e in (ch.c, ch.G1, ch.G2, ch.r, *extra):
                if abs(e.denominator().evaluate(m, exact=False)) <= self.eps_reg:
                    return False
                if not math.isfinite(e.evaluate(m, exact=False)):
                    return False
        except EvaluationError:
            return False
        return True

    def samples(self, n: int = 20, seed: int = 0, extra: Iterable[Expr] = ()) -> list[Point]:
        return regular_samples(self, n, seed, extra)

    def __repr__(self) -> str:
        return f"WebFunction({str(self.f)!r}, box={self.box})"


def _exact(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, float):
        return Fraction(repr(v))
    if isinstance(v, str):
        return Fraction(v.strip())
    return Fraction(v)


def regular_samples(
    w: WebFunction, n: int = 20, seed: int = 0, extra: Iterable[Expr] = ()
) -> list[Point]:
    """Deterministic scrambled-Halton points in the box that pass ``is_regular``."""
    from scipy.stats import qmc

    extra = tuple(extra)
    eng = qmc.Halton(d=2, scramble=True, seed=seed)
    x0, x1, y0, y1 = w.box
    out: list[Point] = []
    drawn = 0
    limit = max(64, 50 * n)
    while len(out) < n and drawn < limit:
        batch = eng.random(max(n, 16))
        for u, v in batch:
            drawn += 1
            p = w.point(x0 + (x1 - x0) * float(u), y0 + (y1 - y0) * float(v))
            if w.is_regular(p, extra):
                out.append(p)
                if len(out) == n:
                    break
    if not out:
        raise NoRegularSamples(f"no regular sample points found in box {w.box}")
    return out


def slope(w: WebFunction) -> Expr:
    return w.chern.c


def chern(w: WebFunction) -> ChernData:
    return w.chern


def curvature(w: WebFunction) -> Expr:
    return w.chern.r


def curvature_from_f(w: WebFunction) -> Expr:
    """The curvature written directly in partials of f."""
    f1, f2 = w.fd(1), w.fd(2)
    f11, f12, f22 = w.fd(1, 1), w.fd(1, 2), w.fd(2, 2)
    f112, f122 = w.fd(1, 1, 2), w.fd(1, 2, 2)
    num = f11 * f2**2 * f12 - f1**2 * f12 * f22 - f1 * f112 * f2**2 + f1**2 * f122 * f2
    return num / (f2**2 * f1**2)


@dataclass
class ParallelVerdict:
    parallelizable: bool
    criterion: str  # "symbolic-zero" or "numeric-sampling"
    max_abs_r: float
    samples: int

    def __bool__(self) -> bool:
        return self.parallelizable


def is_parallelizable(w: WebFunction, samples: Sequence[Point], tol: float = 1e-10) -> ParallelVerdict:
    r = w.chern.r
    values = []
    for p in samples:
        try:
            values.append(abs(float(r.evaluate(p.mapping(), exact=False))))
        except EvaluationError:
            continue
    if r.is_zero():
        return ParallelVerdict(True, "symbolic-zero", max(values, default=0.0), len(values))
    if not values:
        raise NoRegularSamples("all samples singular for the curvature")
    m = max(values)
    return ParallelVerdict(m <= tol, "numeric-sampling", m, len(values))


def product_structure(w: WebFunction):
    """Matrix of the product structure j in the coordinate frame.

    ``j(d1) = c d2`` and ``j(d2) = d1 / c``; columns are images of d1, d2.
    """
    c = w.chern.c
    zero = Expr.const(0)
    return ((zero, 1 / c), (c, zero))


__all__ = [
    "ChernData", "DEFAULT_BOX", "DegenerateWeb", "NoRegularSamples", "ParallelVerdict",
    "Point", "WebFunction", "chern", "curvature", "curvature_from_f", "is_parallelizable",
    "parse_box", "product_structure", "regular_samples", "slope",
]
