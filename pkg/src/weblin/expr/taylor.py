"""Truncated bivariate Taylor series at a point.

A :class:`Taylor` holds the normalised coefficients ``c[i, j]`` of
``(x1 - p1)^i (x2 - p2)^j`` for ``i + j <= order``.  Coefficients are
exact rationals (gmpy2 ``mpq`` through sympy when available, which is far
faster than ``Fraction``) while the data are rational, and silently become
floats once a transcendental value enters.  Differentiation lowers the
order by one, so a jet records exactly how many derivatives it can still
supply.
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Mapping

from sympy import QQ

from .core import Expr, SingularEvaluation, _REG

Index = tuple[int, int]
EXACT = QQ.dtype
SCALARS = tuple(dict.fromkeys((int, float, Fraction, EXACT)))
_SCALARS = SCALARS


def _indices(order: int) -> list[Index]:
    return [(i, d - i) for d in range(order + 1) for i in range(d, -1, -1)]


class InsufficientOrder(ArithmeticError):
    """A derivative was requested beyond the stored truncation order."""


class Taylor:
    __slots__ = ("c", "order")

    def __init__(self, coeffs: Mapping[Index, object], order: int):
        if order < 0:
            raise InsufficientOrder("Taylor jet truncated below order 0")
        self.order = order
        self.c = {k: v for k, v in coeffs.items() if v != 0 and k[0] + k[1] <= order}

    # construction -----------------------------------------------------------

    @staticmethod
    def constant(v, order: int) -> "Taylor":
        return Taylor({(0, 0): v}, order)

    @staticmethod
    def variable(axis: int, at, order: int) -> "Taylor":
        """The coordinate ``x_axis`` (1 or 2) expanded at ``at``."""
        k = (1, 0) if axis == 1 else (0, 1)
        return Taylor({(0, 0): at, k: 1}, order)

    # access -----------------------------------------------------------------

    @property
    def value(self):
        return self.c.get((0, 0), 0)

    def coeff(self, i: int, j: int):
        return self.c.get((i, j), 0)

    def derivative_value(self, i: int, j: int):
        """``d^{i+j} / dx1^i dx2^j`` at the expansion point."""
        return self.coeff(i, j) * math.factorial(i) * math.factorial(j)

    def is_zero(self) -> bool:
        return not self.c

    def truncate(self, order: int) -> "Taylor":
        return Taylor(self.c, min(order, self.order))

    # arithmetic -------------------------------------------------------------

    def _lift(self, o) -> "Taylor":
        if isinstance(o, Taylor):
            return o
        if isinstance(o, _SCALARS):
            return Taylor({(0, 0): o}, 10**9)
        raise TypeError(f"cannot combine a Taylor jet with {type(o).__name__}")

    def __add__(self, o):
        if not isinstance(o, (Taylor,) + _SCALARS):
            return NotImplemented
        o = self._lift(o)
        out = dict(self.c)
        for k, v in o.c.items():
            out[k] = out.get(k, 0) + v
        return Taylor(out, min(self.order, o.order))

    __radd__ = __add__

    def __neg__(self):
        return Taylor({k: -v for k, v in self.c.items()}, self.order)

    def __sub__(self, o):
        if not isinstance(o, (Taylor,) + _SCALARS):
            return NotImplemented
        return self + (-self._lift(o))

    def __rsub__(self, o):
        if not isinstance(o, _SCALARS):
            return NotImplemented
        return self._lift(o) + (-self)

    def __mul__(self, o):
        if not isinstance(o, Taylor):
            if not isinstance(o, _SCALARS):
                return NotImplemented
            if o == 0:
                return Taylor({}, self.order)
            return Taylor({k: v * o for k, v in self.c.items()}, self.order)
        n = min(self.order, o.order)
        out: dict = {}
        oc = list(o.c.items())
        for (i1, j1), a in self.c.items():
            d1 = i1 + j1
            if d1 > n:
                continue
            for (i2, j2), b in oc:
                if d1 + i2 + j2 <= n:
                    k = (i1 + i2, j1 + j2)
                    out[k] = out.get(k, 0) + a * b
        return Taylor(out, n)

    __rmul__ = __mul__

    def reciprocal(self) -> "Taylor":
        b0 = self.value
        if b0 == 0:
            raise ZeroDivisionError("Taylor jet with vanishing constant term")
        n = self.order
        q: dict = {}
        items = [(k, v) for k, v in self.c.items() if k != (0, 0)]
        inv0 = 1 / b0 if isinstance(b0, float) else _exact(1) / _exact(b0)
        for k in _indices(n):
            acc = 1 if k == (0, 0) else 0
            for (i, j), v in items:
                r = (k[0] - i, k[1] - j)
                if r[0] >= 0 and r[1] >= 0:
                    qv = q.get(r)
                    if qv:
                        acc -= v * qv
            if acc != 0:
                q[k] = acc * inv0
        return Taylor(q, n)

    def __truediv__(self, o):
        if not isinstance(o, Taylor):
            if not isinstance(o, _SCALARS):
                return NotImplemented
            if o == 0:
                raise ZeroDivisionError("division by zero")
            inv = 1 / o if isinstance(o, float) else _exact(1) / _exact(o)
            return self * inv
        return self * o.reciprocal()

    def __rtruediv__(self, o):
        if not isinstance(o, _SCALARS):
            return NotImplemented
        return self._lift(o) * self.reciprocal()

    def __pow__(self, k: int):
        if not isinstance(k, int):
            raise ValueError("Taylor jets support integer powers only")
        if k < 0:
            return self.reciprocal() ** (-k)
        result = Taylor({(0, 0): 1}, self.order)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def partial(self, axis: int) -> "Taylor":
        if self.order == 0:
            raise InsufficientOrder("cannot differentiate an order-0 jet")
        out = {}
        for (i, j), v in self.c.items():
            if axis == 1 and i:
                out[(i - 1, j)] = v * i
            elif axis == 2 and j:
                out[(i, j - 1)] = v * j
        return Taylor(out, self.order - 1)

    def __eq__(self, o) -> bool:
        if not isinstance(o, (Taylor,) + _SCALARS):
            return NotImplemented
        o = self._lift(o)
        n = min(self.order, o.order)
        keys = set(self.c) | set(o.c)
        return all(self.c.get(k, 0) == o.c.get(k, 0) for k in keys if k[0] + k[1] <= n)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"Taylor(order={self.order}, value={self.value!r})"

    # elementary functions ------------------------------------------------------

    def as_float(self) -> "Taylor":
        return Taylor({k: float(v) for k, v in self.c.items()}, self.order)

    def _split(self):
        return self.value, Taylor({k: v for k, v in self.c.items() if k != (0, 0)}, self.order)

    def _series(self, coeffs) -> "Taylor":
        """sum_k coeffs[k] * h^k for the non-constant part h."""
        _, h = self._split()
        if isinstance(coeffs[0], float):
            h = h.as_float()
        total = Taylor({(0, 0): coeffs[0]}, self.order)
        p = Taylor({(0, 0): 1}, self.order)
        for k in range(1, self.order + 1):
            p = p * h
            if not p.c:
                break
            total = total + p * coeffs[k]
        return total

    def exp(self) -> "Taylor":
        v = float(self.value)
        try:
            e = math.exp(v)
        except OverflowError:
            raise SingularEvaluation("exp", "overflow in exp") from None
        return self._series([e / math.factorial(k) for k in range(self.order + 1)])

    def log(self) -> "Taylor":
        v = float(self.value)
        if v <= 0:
            raise SingularEvaluation("log", "log of non-positive value")
        co = [math.log(v)] + [(-1) ** (k + 1) / (k * v**k) for k in range(1, self.order + 1)]
        return self._series(co)

    def sin(self) -> "Taylor":
        v = float(self.value)
        s, c = math.sin(v), math.cos(v)
        cyc = [s, c, -s, -c]
        return self._series([cyc[k % 4] / math.factorial(k) for k in range(self.order + 1)])

    def cos(self) -> "Taylor":
        v = float(self.value)
        s, c = math.sin(v), math.cos(v)
        cyc = [c, -s, -c, s]
        return self._series([cyc[k % 4] / math.factorial(k) for k in range(self.order + 1)])


def _exact(v):
    if isinstance(v, EXACT):
        return v
    f = Fraction(v)
    return EXACT(f.numerator, f.denominator)


def to_fraction(v):
    """Exact rationals back to ``Fraction``; other values unchanged."""
    if isinstance(v, EXACT) and not isinstance(v, Fraction):
        return Fraction(int(v.numerator), int(v.denominator))
    return v


_exactify = _exact


def eval_taylor(e: Expr, point: Mapping[str, object], order: int) -> Taylor:
    """Taylor expansion of ``e`` at ``point`` up to total degree ``order``.

    ``point`` maps ``x1`` and ``x2`` (and any parameters) to numbers.  Floats
    are converted exactly, so rational expressions give exact jets.
    """
    cache: dict[int, Taylor] = {}
    return _eval_taylor(e, point, order, cache)


def _eval_taylor(e: Expr, point, order, cache) -> Taylor:
    gens = e.generators()
    vals: dict[int, Taylor] = {}
    for g in gens:
        if g.index in cache:
            vals[g.index] = cache[g.index]
            continue
        if g.kind == "sym":
            if g.name not in point:
                raise KeyError(f"no value bound for symbol {g.name!r}")
            v = _exactify(point[g.name])
            if g.name == "x1":
                t = Taylor.variable(1, v, order)
            elif g.name == "x2":
                t = Taylor.variable(2, v, order)
            else:
                t = Taylor.constant(v, order)
        else:
            a = _eval_taylor(g.arg, point, order, cache)
            t = getattr(a, g.kind)()
        cache[g.index] = t
        vals[g.index] = t
    num_t, den_t = e._term_table()
    num = _taylor_poly(num_t, vals, order)
    den = _taylor_poly(den_t, vals, order)
    if den.value == 0:
        raise SingularEvaluation(str(e.denominator()))
    return num / den


def _taylor_poly(terms, vals, order) -> Taylor:
    powers: dict = {}

    def power(i, k):
        key = (i, k)
        if key not in powers:
            if k == 1:
                powers[key] = vals[i]
            else:
                half = power(i, k // 2)
                p = half * half
                if k % 2:
                    p = p * vals[i]
                powers[key] = p
        return powers[key]

    acc: dict = {}
    for c, mon in terms:
        if not mon:
            acc[(0, 0)] = acc.get((0, 0), 0) + c
            continue
        t = power(*mon[0])
        for i, k in mon[1:]:
            t = t * power(i, k)
        for key, v in t.c.items():
            acc[key] = acc.get(key, 0) + c * v
    return Taylor(acc, order)


def taylor_of(x, order: int) -> Taylor:
    """Coerce a number to a constant jet."""
    if isinstance(x, Taylor):
        return x
    return Taylor.constant(x, order)


del _REG
