"""Canonical rational expressions over x1, x2, parameters and a few
transcendental functions.

An :class:`Expr` is stored as a reduced fraction of two sparse polynomials
whose indeterminates are *generators*: the coordinates, free parameters,
and opaque function applications such as ``exp(-x1)``.  A function
application is keyed on the normal form of its argument, so two spellings
of the same argument share one generator.  Polynomial arithmetic and gcd
cancellation are delegated to sympy's sparse ``FracField`` over QQ.

The normal form is canonical for rational functions in the generators.
Identities *between* generators (``exp(a)*exp(b) = exp(a+b)``,
``sin^2 + cos^2 = 1``) are not applied.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Callable, Iterable, Mapping

from sympy import QQ, Symbol
from sympy.polys.fields import FracField

COORDINATES = ("x1", "x2")
FUNCTIONS = ("exp", "log", "sin", "cos")


class EvaluationError(ArithmeticError):
    """Raised when an expression cannot be evaluated at a point."""


class SingularEvaluation(EvaluationError):
    """Evaluation hit a pole or a point outside a function's domain.

    ``subterm`` is the printed form of the offending factor.
    """

    def __init__(self, subterm: str, message: str | None = None):
        self.subterm = subterm
        super().__init__(message or f"singular evaluation: {subterm} vanishes")


# ---------------------------------------------------------------------------
# generator registry


@dataclass(eq=False)
class Generator:
    kind: str  # "sym" or one of FUNCTIONS
    name: str  # symbol name, or printed argument for functions
    arg: "Expr | None" = None
    index: int = -1
    depends: frozenset = field(default_factory=frozenset)
    _derivs: dict = field(default_factory=dict)

    @property
    def sort_key(self) -> tuple:
        if self.kind == "sym":
            if self.name in COORDINATES:
                return (0, COORDINATES.index(self.name), "")
            return (1, 0, self.name)
        return (2, FUNCTIONS.index(self.kind), self.name)

    def __str__(self) -> str:
        if self.kind == "sym":
            return self.name
        return f"{self.kind}({self.name})"


class _Registry:
    """Growing list of generators and the sympy fields over them."""

    def __init__(self) -> None:
        self.gens: list[Generator] = []
        self.keys: dict[tuple, int] = {}
        self.fields: dict[int, FracField] = {}
        self._rank: list[int] | None = None

    def field(self, n: int | None = None) -> FracField:
        if n is None:
            n = len(self.gens)
        F = self.fields.get(n)
        if F is None:
            syms = [Symbol(f"g{i}") for i in range(max(n, 1))]
            F = FracField(syms, QQ)
            self.fields[n] = F
        return F

    def add(self, key: tuple, gen: Generator) -> int:
        idx = self.keys.get(key)
        if idx is not None:
            return idx
        gen.index = len(self.gens)
        self.gens.append(gen)
        self.keys[key] = gen.index
        self._rank = None
        return gen.index

    def ranked(self) -> list[int]:
        """Generator indices sorted by their canonical sort key."""
        if self._rank is None or len(self._rank) != len(self.gens):
            self._rank = sorted(range(len(self.gens)), key=lambda i: self.gens[i].sort_key)
        return self._rank


_REG = _Registry()


def _sym_index(name: str) -> int:
    return _REG.add(("sym", name), Generator("sym", name, depends=frozenset([name])))


for _c in COORDINATES:
    _sym_index(_c)


def _nvars(q) -> int:
    return q.field.ngens


def _lift(q, n: int):
    """Embed a field element into the field with ``n`` generators."""
    m = _nvars(q)
    if m == n:
        return q
    F = _REG.field(n)
    R = F.ring
    pad = (0,) * (n - m)
    num = R.from_dict({mon + pad: c for mon, c in q.numer.items()})
    den = R.from_dict({mon + pad: c for mon, c in q.denom.items()})
    return F.raw_new(num, den)


def _coerce_pair(a, b):
    na, nb = _nvars(a), _nvars(b)
    if na == nb:
        return a, b
    n = max(na, nb)
    return _lift(a, n), _lift(b, n)


def _to_qq(x) -> object:
    if isinstance(x, bool):
        x = int(x)
    if isinstance(x, int):
        return QQ(x)
    if isinstance(x, Fraction):
        return QQ(x.numerator, x.denominator)
    if isinstance(x, Rational):
        return QQ(int(x.numerator), int(x.denominator))
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite constant {x!r}")
        fr = Fraction(repr(x))
        return QQ(fr.numerator, fr.denominator)
    raise TypeError(f"cannot convert {type(x).__name__} to a rational constant")


def _frac(c) -> Fraction:
    return Fraction(int(c.numerator), int(c.denominator))


# ---------------------------------------------------------------------------
# tree nodes used for printing and inspection


@dataclass(frozen=True)
class Node:
    op: str  # num, sym, add, mul, neg, pow, exp, log, sin, cos
    args: tuple = ()
    value: object = None

    def __str__(self) -> str:
        return _render(self)


def _render(n: Node, parent: int = 0) -> str:
    # precedence: add 1, mul 2, neg 2, pow 3, atom 4
    if n.op == "num":
        s = str(n.value)
        return s
    if n.op == "sym":
        return n.value
    if n.op in FUNCTIONS:
        return f"{n.op}({_render(n.args[0])})"
    if n.op == "add":
        parts: list[str] = []
        for i, t in enumerate(n.args):
            if t.op == "neg":
                body = _render(t.args[0], 1)
                parts.append(f"-{body}" if i == 0 else f" - {body}")
            else:
                body = _render(t, 1)
                parts.append(body if i == 0 else f" + {body}")
        s = "".join(parts)
        return f"({s})" if parent >= 1 else s
    if n.op == "neg":
        s = "-" + _render(n.args[0], 1)
        return f"({s})" if parent >= 2 else s
    if n.op == "pow":
        base, e = n.args[0], n.value
        if e == -1:
            s = "1/" + _render(base, 3)
            return f"({s})" if parent >= 2 else s
        return f"{_render(base, 3)}^{e}"
    if n.op == "mul":
        num = [a for a in n.args if not (a.op == "pow" and a.value == -1)]
        den = [a.args[0] for a in n.args if a.op == "pow" and a.value == -1]
        s = "*".join(_render(a, 2) for a in num) if num else "1"
        if den:
            if len(den) == 1:
                ds = _render(den[0], 3)
            else:
                ds = "(" + "*".join(_render(a, 2) for a in den) + ")"
            s = f"{s}/{ds}"
        return f"({s})" if parent >= 2 else s
    raise ValueError(n.op)


# ---------------------------------------------------------------------------
# the expression type


class Expr:
    """Immutable rational expression in canonical form."""

    __slots__ = ("_q", "_canon", "_dcache", "_terms", "__weakref__")

    def __init__(self, q):
        self._q = q
        self._canon = None
        self._dcache: dict | None = None
        self._terms = None

    # construction -----------------------------------------------------------

    @staticmethod
    def const(value) -> "Expr":
        F = _REG.field(2)
        return Expr(F(_to_qq(value)))

    @staticmethod
    def symbol(name: str) -> "Expr":
        if not name.isidentifier() or name in FUNCTIONS:
            raise ValueError(f"invalid symbol name {name!r}")
        i = _sym_index(name)
        return Expr(_REG.field(i + 1).gens[i])

    @staticmethod
    def coerce(x) -> "Expr":
        if isinstance(x, Expr):
            return x
        return Expr.const(x)

    # arithmetic -------------------------------------------------------------

    def _bin(self, other, op):
        if not isinstance(other, Expr):
            try:
                other = Expr.const(other)
            except TypeError:
                return NotImplemented
        a, b = _coerce_pair(self._q, other._q)
        return Expr(op(a, b))

    def __add__(self, o):
        return self._bin(o, lambda a, b: a + b)

    def __radd__(self, o):
        return self._bin(o, lambda a, b: b + a)

    def __sub__(self, o):
        return self._bin(o, lambda a, b: a - b)

    def __rsub__(self, o):
        return self._bin(o, lambda a, b: b - a)

    def __mul__(self, o):
        return self._bin(o, lambda a, b: a * b)

    def __rmul__(self, o):
        return self._bin(o, lambda a, b: b * a)

    def __truediv__(self, o):
        if isinstance(o, Expr) and o.is_zero():
            raise ZeroDivisionError("division by the zero expression")
        if not isinstance(o, Expr) and o == 0:
            raise ZeroDivisionError("division by zero")
        return self._bin(o, lambda a, b: a / b)

    def __rtruediv__(self, o):
        if self.is_zero():
            raise ZeroDivisionError("division by the zero expression")
        return self._bin(o, lambda a, b: b / a)

    def __neg__(self):
        return Expr(-self._q)

    def __pos__(self):
        return self

    def __pow__(self, k):
        if isinstance(k, Expr):
            if not k.is_constant():
                raise ValueError("exponent must be an integer constant")
            k = k.as_fraction()
        if isinstance(k, Fraction):
            if k.denominator != 1:
                raise ValueError(f"non-integer exponent {k}")
            k = k.numerator
        if not isinstance(k, int):
            raise ValueError(f"non-integer exponent {k!r}")
        if k < 0 and self.is_zero():
            raise ZeroDivisionError("zero to a negative power")
        return Expr(self._q ** k)

    # predicates and access ---------------------------------------------------

    def is_zero(self) -> bool:
        return not self._q.numer

    def is_constant(self) -> bool:
        return self._q.numer.is_ground and self._q.denom.is_ground

    def as_fraction(self) -> Fraction:
        if not self.is_constant():
            raise ValueError(f"{self} is not constant")
        return _frac(self._q.numer.LC if self._q.numer else QQ(0)) / _frac(self._q.denom.LC)

    def generators(self) -> list[Generator]:
        idx = set()
        for poly in (self._q.numer, self._q.denom):
            for mon in poly.itermonoms():
                idx.update(i for i, e in enumerate(mon) if e)
        return [_REG.gens[i] for i in sorted(idx)]

    @property
    def free_symbols(self) -> frozenset:
        out = set()
        for g in self.generators():
            out |= g.depends
        return frozenset(out)

    def depends_on(self, name: str) -> bool:
        return name in self.free_symbols

    def is_rational(self) -> bool:
        """True when no transcendental generator occurs."""
        return all(g.kind == "sym" for g in self.generators())

    def numerator(self) -> "Expr":
        return Expr(self._q.field.raw_new(self._q.numer, self._q.field.ring.one))

    def denominator(self) -> "Expr":
        return Expr(self._q.field.raw_new(self._q.denom, self._q.field.ring.one))

    def size(self) -> int:
        """Node count of the expanded representation (used for budgets)."""
        n = 0
        for poly in (self._q.numer, self._q.denom):
            for mon in poly.itermonoms():
                n += 1 + sum(1 for e in mon if e)
        return n

    # canonical form -----------------------------------------------------------

    def _canonical(self):
        """(numerator terms, denominator terms) in canonical scaling.

        The denominator is a primitive integer polynomial with positive
        leading coefficient under the deglex order of generator sort keys.
        Terms are lists of (exponent dict, Fraction) in that order.
        """
        if self._canon is not None:
            return self._canon
        rank = _REG.ranked()
        pos = {g: k for k, g in enumerate(rank)}

        def terms(poly):
            out = []
            for mon, c in poly.items():
                ex = {i: e for i, e in enumerate(mon) if e}
                out.append((ex, _frac(c)))
            out.sort(key=lambda t: _mono_key(t[0], pos))
            return out

        num, den = terms(self._q.numer), terms(self._q.denom)
        if not num:
            self._canon = ([], [({}, Fraction(1))])
            return self._canon
        lcm = 1
        for _, c in den:
            lcm = lcm * c.denominator // math.gcd(lcm, c.denominator)
        ints = [int(c * lcm) for _, c in den]
        g = 0
        for v in ints:
            g = math.gcd(g, v)
        scale = Fraction(lcm, g)
        if den[0][1] < 0:
            scale = -scale
        num = [(ex, c * scale) for ex, c in num]
        den = [(ex, c * scale) for ex, c in den]
        self._canon = (num, den)
        return self._canon

    def _key(self) -> tuple:
        num, den = self._canonical()
        f = lambda ts: tuple((tuple(sorted(ex.items())), c) for ex, c in ts)
        return (f(num), f(den))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Expr):
            try:
                other = Expr.const(other)
            except (TypeError, ValueError):
                return NotImplemented
        a, b = _coerce_pair(self._q, other._q)
        return not (a - b).numer

    def __ne__(self, other) -> bool:
        r = self.__eq__(other)
        return r if r is NotImplemented else not r

    def __hash__(self) -> int:
        return hash(self._key())

    def tree(self) -> Node:
        """Canonical expression tree."""
        num, den = self._canonical()
        if not num:
            return Node("num", value=0)
        # numeric and monomial content of the numerator
        cnum = _content(num)
        num = [(ex, c / cnum) for ex, c in num]
        mnum = _monomial_content(num)
        mden = _monomial_content(den)
        num = [(_divmono(ex, mnum), c) for ex, c in num]
        den = [(_divmono(ex, mden), c) for ex, c in den]
        rank = _REG.ranked()
        factors: list[Node] = []
        if abs(cnum.numerator) != 1:
            factors.append(Node("num", value=abs(cnum.numerator)))
        if len(num) > 1:
            factors.append(_sum_node(num))
        factors += _mono_nodes(mnum, rank)
        dfactors: list[Node] = []
        if cnum.denominator != 1:
            dfactors.append(Node("num", value=cnum.denominator))
        dfactors += _mono_nodes(mden, rank)
        if len(den) > 1:
            dfactors.append(_sum_node(den))
        if dfactors:
            dnode = dfactors[0] if len(dfactors) == 1 else Node("mul", tuple(dfactors))
            factors.append(Node("pow", (dnode,), -1))
        if not factors:
            body = Node("num", value=1)
        elif len(factors) == 1 and not (factors[0].op == "pow" and factors[0].value == -1):
            body = factors[0]
        else:
            body = Node("mul", tuple(factors))
        return Node("neg", (body,)) if cnum < 0 else body

    def __str__(self) -> str:
        return _render(self.tree())

    def __repr__(self) -> str:
        return f"Expr({str(self)!r})"

    # calculus -------------------------------------------------------------------

    def diff(self, name: str) -> "Expr":
        """Partial derivative with respect to the symbol ``name``."""
        if self._dcache is None:
            self._dcache = {}
        hit = self._dcache.get(name)
        if hit is not None:
            return hit
        res = self._diff(name)
        self._dcache[name] = res
        return res

    def _diff(self, name: str) -> "Expr":
        gens = [g for g in self.generators() if name in g.depends]
        if not gens:
            return Expr.const(0)
        q = self._q
        n = _nvars(q)
        F = _REG.field(n)
        total = None
        for g in gens:
            if g.index >= n:
                continue
            part = q.diff(F.gens[g.index])
            if g.kind == "sym":
                term = part
            else:
                dg = _gen_derivative(g, name)._q
                part, dg = _coerce_pair(part, dg)
                term = part * dg
            total = term if total is None else _sum_pair(total, term)
        return Expr(total) if total is not None else Expr.const(0)

    def partial(self, i: int) -> "Expr":
        """Derivative in x1 (``i=1``) or x2 (``i=2``)."""
        return self.diff(COORDINATES[i - 1])

    # evaluation ----------------------------------------------------------------

    def _term_table(self):
        if self._terms is None:
            def conv(poly):
                return [
                    (_frac(c), [(i, e) for i, e in enumerate(mon) if e])
                    for mon, c in poly.items()
                ]
            self._terms = (conv(self._q.numer), conv(self._q.denom))
        return self._terms

    def evaluate(self, point: Mapping[str, object], exact: bool | None = None):
        """Numeric value at ``point`` (a mapping from symbol names to numbers).

        With rational inputs and no transcendental generators the result is
        an exact :class:`Fraction`; otherwise a float.  ``exact=False``
        forces floats.
        """
        gens = self.generators()
        if exact is None:
            exact = all(g.kind == "sym" for g in gens) and all(
                isinstance(point.get(g.name), (int, Fraction)) for g in gens
            )
        vals: dict[int, object] = {}
        for g in gens:
            vals[g.index] = _gen_value(g, point, exact)
        num_t, den_t = self._term_table()
        num = _poly_value(num_t, vals, exact)
        den = _poly_value(den_t, vals, exact)
        if den == 0:
            raise SingularEvaluation(str(self.denominator()))
        if exact:
            return num / den
        v = num / den
        if not math.isfinite(v):
            raise SingularEvaluation(str(self.denominator()), "non-finite value")
        return v

    def compile(self, names: Iterable[str] = COORDINATES) -> Callable:
        """Return a numpy-vectorised function of the given symbols."""
        return _compile(self, tuple(names))

    # substitution --------------------------------------------------------------

    def substitute(self, bindings: Mapping[str, object]) -> "Expr":
        """Simultaneously replace symbols by expressions or numbers."""
        if not bindings:
            return self
        imgs = {k: Expr.coerce(v) for k, v in bindings.items()}
        gens = self.generators()
        if not any(g.depends & imgs.keys() for g in gens):
            return self
        gimg: dict[int, Expr] = {}
        for g in gens:
            if g.kind == "sym":
                gimg[g.index] = imgs.get(g.name, Expr(_REG.field(g.index + 1).gens[g.index]))
            else:
                gimg[g.index] = apply_function(g.kind, g.arg.substitute(imgs))
        n = max(_nvars(e._q) for e in list(gimg.values()) + [Expr.const(0)])
        n = max(n, _nvars(self._q))
        F = _REG.field(n)
        images = {i: _lift(e._q, n) for i, e in gimg.items()}
        polynomial = all(q.denom.is_ground for q in images.values())
        if polynomial:
            R = F.ring
            pim = {i: q.numer * (1 / q.denom.LC) for i, q in images.items()}
            num = _poly_compose(self._q.numer, pim, R)
            den = _poly_compose(self._q.denom, pim, R)
            if not den:
                raise SingularEvaluation(str(self.denominator()))
            return Expr(F.new(num, den))
        num = _frac_compose(self._q.numer, images, F)
        den = _frac_compose(self._q.denom, images, F)
        if not den.numer:
            raise SingularEvaluation(str(self.denominator()))
        return Expr(num / den)


def _sum_pair(a, b):
    a, b = _coerce_pair(a, b)
    return a + b


def _mono_key(ex: dict, pos: dict) -> tuple:
    deg = sum(ex.values())
    vec = [0] * len(pos)
    for i, e in ex.items():
        vec[pos[i]] = e
    return (-deg, tuple(-v for v in vec))


def _content(terms) -> Fraction:
    """Positive rational content, signed by the leading coefficient."""
    g = 0
    lcm = 1
    for _, c in terms:
        g = math.gcd(g, c.numerator)
        lcm = lcm * c.denominator // math.gcd(lcm, c.denominator)
    cont = Fraction(g, lcm)
    return -cont if terms[0][1] < 0 else cont


def _monomial_content(terms) -> dict:
    common: dict | None = None
    for ex, _ in terms:
        if common is None:
            common = dict(ex)
        else:
            common = {i: min(e, ex[i]) for i, e in common.items() if i in ex}
        if not common:
            return {}
    return common or {}


def _divmono(ex: dict, m: dict) -> dict:
    out = dict(ex)
    for i, e in m.items():
        out[i] -= e
        if not out[i]:
            del out[i]
    return out


def _gen_node(g: Generator) -> Node:
    if g.kind == "sym":
        return Node("sym", value=g.name)
    return Node(g.kind, (g.arg.tree(),))


def _mono_nodes(ex: dict, rank: list[int]) -> list[Node]:
    out = []
    for i in rank:
        e = ex.get(i)
        if e:
            base = _gen_node(_REG.gens[i])
            out.append(base if e == 1 else Node("pow", (base,), e))
    return out


def _sum_node(terms) -> Node:
    rank = _REG.ranked()
    kids = []
    for ex, c in terms:
        k = abs(c.numerator)
        mono = _mono_nodes(ex, rank)
        if not mono:
            body = Node("num", value=k)
        else:
            parts = ([Node("num", value=k)] if k != 1 else []) + mono
            body = parts[0] if len(parts) == 1 else Node("mul", tuple(parts))
        kids.append(Node("neg", (body,)) if c < 0 else body)
    return Node("add", tuple(kids))


# ---------------------------------------------------------------------------
# functions


def apply_function(tag: str, arg: "Expr") -> "Expr":
    """Build ``tag(arg)`` with the few evaluation rules that are always safe."""
    if tag not in FUNCTIONS:
        raise ValueError(f"unknown function {tag!r}")
    arg = Expr.coerce(arg)
    if arg.is_zero():
        if tag == "exp" or tag == "cos":
            return Expr.const(1)
        if tag == "sin":
            return Expr.const(0)
        raise SingularEvaluation("log(0)", "log of zero")
    if tag == "log" and arg == 1:
        return Expr.const(0)
    if tag == "log" and arg.is_constant() and arg.as_fraction() < 0:
        raise SingularEvaluation(f"log({arg})", "log of a negative constant")
    # exp(log(u)) = u and log(exp(u)) = u on the real branch
    gens = arg.generators()
    if len(gens) == 1 and arg == Expr(_REG.field(gens[0].index + 1).gens[gens[0].index]):
        g = gens[0]
        if tag == "exp" and g.kind == "log":
            return g.arg
        if tag == "log" and g.kind == "exp":
            return g.arg
    key = (tag, arg._key())
    idx = _REG.keys.get(key)
    if idx is None:
        gen = Generator(tag, str(arg), arg=arg, depends=arg.free_symbols)
        idx = _REG.add(key, gen)
    return Expr(_REG.field(idx + 1).gens[idx])


def exp(u) -> Expr:
    return apply_function("exp", u)


def log(u) -> Expr:
    return apply_function("log", u)


def sin(u) -> Expr:
    return apply_function("sin", u)


def cos(u) -> Expr:
    return apply_function("cos", u)


def symbols(names: str) -> tuple[Expr, ...]:
    return tuple(Expr.symbol(n) for n in names.replace(",", " ").split())


def _gen_derivative(g: Generator, name: str) -> Expr:
    hit = g._derivs.get(name)
    if hit is not None:
        return hit
    u = g.arg
    du = u.diff(name)
    me = Expr(_REG.field(g.index + 1).gens[g.index])
    if g.kind == "exp":
        res = me * du
    elif g.kind == "log":
        res = du / u
    elif g.kind == "sin":
        res = cos(u) * du
    else:
        res = -sin(u) * du
    g._derivs[name] = res
    return res


def _gen_value(g: Generator, point: Mapping[str, object], exact: bool):
    if g.kind == "sym":
        if g.name not in point:
            raise EvaluationError(f"no value bound for symbol {g.name!r}")
        v = point[g.name]
        if exact:
            return Fraction(v)
        v = float(v)
        if not math.isfinite(v):
            raise EvaluationError(f"non-finite value for {g.name!r}")
        return v
    a = g.arg.evaluate(point, exact=False)
    try:
        if g.kind == "exp":
            return math.exp(a)
        if g.kind == "log":
            if a <= 0:
                raise SingularEvaluation(str(g), f"log of non-positive value at {str(g)}")
            return math.log(a)
        if g.kind == "sin":
            return math.sin(a)
        return math.cos(a)
    except OverflowError:
        raise SingularEvaluation(str(g), f"overflow evaluating {g}") from None


def _poly_value(terms, vals, exact):
    total = Fraction(0) if exact else 0.0
    for c, mon in terms:
        v = c if exact else float(c)
        for i, e in mon:
            v = v * vals[i] ** e
        total += v
    return total


def _poly_compose(poly, images, R):
    """Evaluate a polynomial at polynomial images of its generators."""
    cache: dict = {}

    def power(i, e):
        key = (i, e)
        if key not in cache:
            cache[key] = images[i] ** e if i in images else R.gens[i] ** e
        return cache[key]

    total = R.zero
    n = R.ngens
    for mon, c in poly.items():
        t = R.ground_new(c)
        for i, e in enumerate(mon):
            if e:
                t = t * power(i, e)
        total += t
    del n
    return total


def _frac_compose(poly, images, F):
    total = F.zero
    for mon, c in poly.items():
        t = F(c)
        for i, e in enumerate(mon):
            if e:
                t = t * (images[i] ** e if i in images else F.gens[i] ** e)
        total = total + t
    return total


# ---------------------------------------------------------------------------
# compilation to numpy code


def _compile(e: Expr, names: tuple[str, ...]) -> Callable:
    import numpy as np

    lines: list[str] = []
    done: dict[int, str] = {}
    fn_map = {"exp": "np.exp", "log": "np.log", "sin": "np.sin", "cos": "np.cos"}

    def emit_expr(x: Expr) -> str:
        for g in x.generators():
            emit_gen(g)
        num_t, den_t = x._term_table()
        return f"(({_poly_code(num_t, done)}) / ({_poly_code(den_t, done)}))"

    def emit_gen(g: Generator) -> None:
        if g.index in done:
            return
        if g.kind == "sym":
            if g.name not in names:
                raise EvaluationError(f"symbol {g.name!r} is not an argument")
            done[g.index] = g.name
            return
        code = emit_expr(g.arg)
        v = f"_g{g.index}"
        lines.append(f"    {v} = {fn_map[g.kind]}({code})")
        done[g.index] = v

    body = emit_expr(e)
    src = f"def _f({', '.join(names)}):\n" + "\n".join(lines) + f"\n    return {body} + 0 * ({' + '.join(names) or '0'})\n"
    ns: dict = {"np": np, "Fraction": Fraction}
    exec(compile(src, "<expr>", "exec"), ns)
    return ns["_f"]


def _poly_code(terms, done) -> str:
    if not terms:
        return "0.0"
    parts = []
    for c, mon in terms:
        factors = [repr(float(c))]
        for i, e in mon:
            factors.append(done[i] if e == 1 else f"{done[i]}**{e}")
        parts.append("*".join(factors))
    return " + ".join(parts)


def as_expr(x) -> Expr:
    """Coerce numbers and strings to :class:`Expr`."""
    if isinstance(x, Expr):
        return x
    if isinstance(x, str):
        from .parser import parse

        return parse(x)
    return Expr.const(x)
