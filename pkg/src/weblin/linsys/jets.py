"""Polynomials in the jet variables of s together with t and z.

Coefficients live in any ring that supports ``+ - * /``, ``partial(i)``
and ``is_zero()``: symbolic :class:`~weblin.expr.Expr` for the exact
pipeline, :class:`~weblin.expr.Taylor` jets for the pointwise one.  Plain
numbers are accepted everywhere and treated as constants.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping

from ..expr.taylor import SCALARS

MAX_ORDER = 5


@dataclass(frozen=True, order=True)
class JetVar:
    """``s`` with a sorted derivative multi-index, or one of ``t``, ``z``."""

    base: str
    n1: int = 0
    n2: int = 0

    @property
    def order(self) -> int:
        return self.n1 + self.n2

    def shifted(self, i: int) -> "JetVar":
        if self.base != "s":
            raise ValueError(f"{self.base} has no formal prolongation")
        return JetVar("s", self.n1 + (i == 1), self.n2 + (i == 2))

    def __str__(self) -> str:
        if self.base != "s" or not self.order:
            return self.base
        return "s" + "1" * self.n1 + "2" * self.n2

    @staticmethod
    def parse(name: str) -> "JetVar":
        if name in ("t", "z", "s"):
            return JetVar(name)
        if name.startswith("s") and set(name[1:]) <= {"1", "2"}:
            idx = name[1:]
            return JetVar("s", idx.count("1"), idx.count("2"))
        raise ValueError(f"not a jet variable: {name!r}")


VARS: list[JetVar] = [JetVar("s", a, n - a) for n in range(MAX_ORDER + 1) for a in range(n, -1, -1)]
VARS += [JetVar("t"), JetVar("z")]
INDEX = {v: k for k, v in enumerate(VARS)}
NV = len(VARS)
_ZERO_MONO = (0,) * NV


def var_index(v: JetVar | str) -> int:
    if isinstance(v, str):
        v = JetVar.parse(v)
    try:
        return INDEX[v]
    except KeyError:
        raise ValueError(f"jet variable {v} exceeds the supported order {MAX_ORDER}") from None


def coeff_is_zero(c) -> bool:
    if isinstance(c, SCALARS):
        return c == 0
    return c.is_zero()


def coeff_partial(c, i: int):
    if isinstance(c, SCALARS):
        return 0
    return c.partial(i)


def _mono_str(m: tuple) -> str:
    parts = []
    for k, e in enumerate(m):
        if e:
            parts.append(str(VARS[k]) if e == 1 else f"{VARS[k]}^{e}")
    return "*".join(parts) if parts else "1"


def _mono_sort_key(m: tuple) -> tuple:
    return (-sum(e * (VARS[k].order + 1) for k, e in enumerate(m)), tuple(-e for e in m))


class JetPoly:
    """Sparse polynomial in :data:`VARS` with ring-valued coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[tuple, object] | None = None):
        self.terms: dict[tuple, object] = {}
        if terms:
            for m, c in terms.items():
                if not coeff_is_zero(c):
                    self.terms[m] = c

    # constructors -------------------------------------------------------------

    @staticmethod
    def var(v: JetVar | str, power: int = 1) -> "JetPoly":
        m = [0] * NV
        m[var_index(v)] = power
        return JetPoly({tuple(m): 1})

    @staticmethod
    def const(c) -> "JetPoly":
        return JetPoly({_ZERO_MONO: c})

    @staticmethod
    def monomial(powers: Mapping[str, int], coeff=1) -> "JetPoly":
        m = [0] * NV
        for name, e in powers.items():
            m[var_index(name)] += e
        return JetPoly({tuple(m): coeff})

    # arithmetic -----------------------------------------------------------------

    def copy(self) -> "JetPoly":
        p = JetPoly()
        p.terms = dict(self.terms)
        return p

    def __add__(self, o) -> "JetPoly":
        if not isinstance(o, JetPoly):
            o = JetPoly.const(o)
        out = dict(self.terms)
        for m, c in o.terms.items():
            if m in out:
                v = out[m] + c
                if coeff_is_zero(v):
                    del out[m]
                else:
                    out[m] = v
            else:
                out[m] = c
        p = JetPoly()
        p.terms = out
        return p

    __radd__ = __add__

    def __neg__(self) -> "JetPoly":
        p = JetPoly()
        p.terms = {m: -c for m, c in self.terms.items()}
        return p

    def __sub__(self, o) -> "JetPoly":
        if not isinstance(o, JetPoly):
            o = JetPoly.const(o)
        return self + (-o)

    def __rsub__(self, o) -> "JetPoly":
        return (-self) + o

    def scale(self, k) -> "JetPoly":
        return JetPoly({m: c * k for m, c in self.terms.items()})

    def __mul__(self, o) -> "JetPoly":
        if not isinstance(o, JetPoly):
            return self.scale(o)
        out: dict[tuple, object] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in o.terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                v = c1 * c2
                if m in out:
                    out[m] = out[m] + v
                else:
                    out[m] = v
        return JetPoly(out)

    def __rmul__(self, o) -> "JetPoly":
        return self.scale(o)

    def __truediv__(self, k) -> "JetPoly":
        if isinstance(k, JetPoly):
            raise TypeError("division by a jet polynomial")
        return JetPoly({m: c / k for m, c in self.terms.items()})

    def __pow__(self, k: int) -> "JetPoly":
        out = JetPoly.const(1)
        for _ in range(k):
            out = out * self
        return out

    # structure --------------------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, o) -> bool:
        if not isinstance(o, JetPoly):
            if isinstance(o, SCALARS) or hasattr(o, "free_symbols"):
                o = JetPoly.const(o)
            else:
                return NotImplemented
        return (self - o).is_zero()

    __hash__ = None  # type: ignore[assignment]

    def variables(self) -> set[JetVar]:
        out = set()
        for m in self.terms:
            out.update(VARS[k] for k, e in enumerate(m) if e)
        return out

    def jet_order(self) -> int:
        """Highest derivative order of s present (-1 when s is absent)."""
        return max((v.order for v in self.variables() if v.base == "s"), default=-1)

    def degree(self, v: JetVar | str | None = None) -> int:
        if not self.terms:
            return -1
        if v is None:
            return max(sum(m) for m in self.terms)
        k = var_index(v)
        return max(m[k] for m in self.terms)

    def coeff(self, powers: Mapping[str, int] | str = {}):
        """Coefficient of an exact monomial, e.g. ``coeff({"s1": 1, "s2": 1})``."""
        if isinstance(powers, str):
            powers = {} if powers == "1" else {p: 1 for p in powers.split("*")}
        m = [0] * NV
        for name, e in powers.items():
            m[var_index(name)] += e
        return self.terms.get(tuple(m), 0)

    def coefficient_of(self, v: JetVar | str, power: int = 1) -> "JetPoly":
        """The polynomial multiplying ``v^power`` (other variables kept)."""
        k = var_index(v)
        out = {}
        for m, c in self.terms.items():
            if m[k] == power:
                mm = list(m)
                mm[k] = 0
                out[tuple(mm)] = c
        return JetPoly(out)

    def split(self, vs: Iterable[JetVar | str]) -> dict[tuple, "JetPoly"]:
        """Group terms by the exponents of ``vs``."""
        ks = [var_index(v) for v in vs]
        out: dict[tuple, dict] = {}
        for m, c in self.terms.items():
            key = tuple(m[k] for k in ks)
            mm = list(m)
            for k in ks:
                mm[k] = 0
            out.setdefault(key, {})[tuple(mm)] = c
        return {k: JetPoly(v) for k, v in out.items()}

    def map_coeffs(self, fn: Callable) -> "JetPoly":
        return JetPoly({m: fn(c) for m, c in self.terms.items()})

    def size(self) -> int:
        n = 0
        for c in self.terms.values():
            n += c.size() if hasattr(c, "size") else 1
        return n

    # calculus --------------------------------------------------------------------

    def total_derivative(self, i: int, rules: Mapping[str, tuple] | None = None) -> "JetPoly":
        """Formal total derivative ``D_i``.

        ``rules`` supplies the derivatives of ``t`` and ``z`` as pairs of
        jet polynomials, e.g. ``{"t": (t1, t2), "z": (z1, z2)}``.
        """
        out = JetPoly()
        acc: dict[tuple, object] = {}

        def add(m, c):
            if m in acc:
                acc[m] = acc[m] + c
            else:
                acc[m] = c

        extra: list[JetPoly] = []
        for m, c in self.terms.items():
            d = coeff_partial(c, i)
            if not coeff_is_zero(d):
                add(m, d)
            for k, e in enumerate(m):
                if not e:
                    continue
                v = VARS[k]
                mm = list(m)
                mm[k] -= 1
                if v.base == "s":
                    nk = INDEX.get(v.shifted(i))
                    if nk is None:
                        raise ValueError("prolongation exceeds the supported jet order")
                    mm[nk] += 1
                    add(tuple(mm), c * e)
                else:
                    if not rules or v.base not in rules:
                        raise ValueError(f"no derivative rule for {v.base}")
                    rest = JetPoly({tuple(mm): c * e})
                    extra.append(rest * rules[v.base][i - 1])
        out = JetPoly(acc)
        for p in extra:
            out = out + p
        return out

    D = total_derivative

    def substitute(self, rules: Mapping[JetVar | str, object]) -> "JetPoly":
        """Simultaneously replace jet variables by jet polynomials or constants."""
        rk: dict[int, JetPoly] = {}
        for v, val in rules.items():
            rk[var_index(v)] = val if isinstance(val, JetPoly) else JetPoly.const(val)
        if not rk:
            return self.copy()
        powers: dict[tuple[int, int], JetPoly] = {}

        def power(k, e):
            key = (k, e)
            if key not in powers:
                powers[key] = rk[k] if e == 1 else power(k, e - 1) * rk[k]
            return powers[key]

        keep: dict[tuple, object] = {}
        result = JetPoly()
        groups: dict[tuple, dict] = {}
        for m, c in self.terms.items():
            sub = tuple((k, e) for k, e in enumerate(m) if e and k in rk)
            if not sub:
                keep[m] = c
                continue
            mm = list(m)
            for k, _ in sub:
                mm[k] = 0
            groups.setdefault(sub, {})[tuple(mm)] = c
        result = JetPoly(keep)
        for sub, rest in groups.items():
            factor = power(*sub[0])
            for k, e in sub[1:]:
                factor = factor * power(k, e)
            result = result + JetPoly(rest) * factor
        return result

    def evaluate_jets(self, values: Mapping[str, object]):
        """Sum of coefficients times numeric jet values (missing jets are 0)."""
        vals = [0] * NV
        for name, v in values.items():
            vals[var_index(name)] = v
        total = 0
        for m, c in self.terms.items():
            t = c
            for k, e in enumerate(m):
                if e:
                    t = t * vals[k] ** e
                    if coeff_is_zero(t):
                        break
            total = total + t
        return total

    # printing ----------------------------------------------------------------------

    def sorted_terms(self) -> list[tuple[tuple, object]]:
        return sorted(self.terms.items(), key=lambda mc: _mono_sort_key(mc[0]))

    def to_json(self) -> dict[str, str]:
        return {_mono_str(m): str(c) for m, c in self.sorted_terms()}

    def __repr__(self) -> str:
        return f"JetPoly({len(self.terms)} terms, order {self.jet_order()})"

    def __str__(self) -> str:
        return " + ".join(f"({c})*{_mono_str(m)}" for m, c in self.sorted_terms()) or "0"


def jet(name: str) -> JetPoly:
    return JetPoly.var(name)


def solve_linear(matrix: list[list], rhs: list):
    """Gaussian elimination with ring-valued pivots.

    ``matrix`` entries are coefficients (jet-free); ``rhs`` entries may be
    anything supporting ``+``, ``-`` and multiplication by a coefficient.
    """
    n = len(matrix)
    A = [list(row) for row in matrix]
    b = list(rhs)
    for col in range(n):
        piv = next((i for i in range(col, n) if not coeff_is_zero(A[i][col])), None)
        if piv is None:
            raise ZeroDivisionError("singular linear system in elimination")
        A[col], A[piv] = A[piv], A[col]
        b[col], b[piv] = b[piv], b[col]
        inv = 1 / A[col][col] if not isinstance(A[col][col], int) else Fraction(1, A[col][col])
        A[col] = [x * inv for x in A[col]]
        b[col] = b[col] * inv
        for i in range(n):
            if i != col and not coeff_is_zero(A[i][col]):
                f = A[i][col]
                A[i] = [x - f * y for x, y in zip(A[i], A[col])]
                b[i] = b[i] - b[col] * f
    return b
