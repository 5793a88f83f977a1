"""Univariate polynomials in the base s with ring-valued coefficients."""
from __future__ import annotations

from fractions import Fraction
from typing import Callable, Iterable, Sequence

from ..expr.taylor import SCALARS

from .jets import NV, JetPoly, coeff_is_zero, coeff_partial, var_index


class SPoly:
    """``sum_k coeffs[k] * s^k`` with trailing zero coefficients stripped."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable = ()):
        cs = list(coeffs)
        while cs and coeff_is_zero(cs[-1]):
            cs.pop()
        self.coeffs = cs

    @staticmethod
    def from_jetpoly(p: JetPoly) -> "SPoly":
        ks = var_index("s")
        cs: dict[int, object] = {}
        for m, c in p.terms.items():
            if any(e for k, e in enumerate(m) if k != ks):
                raise ValueError("jet polynomial depends on jets other than s")
            cs[m[ks]] = c
        n = max(cs, default=-1)
        return SPoly([cs.get(k, 0) for k in range(n + 1)])

    def to_jetpoly(self) -> JetPoly:
        ks = var_index("s")
        out = {}
        for k, c in enumerate(self.coeffs):
            m = [0] * NV
            m[ks] = k
            out[tuple(m)] = c
        return JetPoly(out)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def __eq__(self, o) -> bool:
        if not isinstance(o, SPoly):
            return NotImplemented
        return (self - o).is_zero()

    __hash__ = None  # type: ignore[assignment]

    def __getitem__(self, k: int):
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else 0

    def __add__(self, o) -> "SPoly":
        if not isinstance(o, SPoly):
            o = SPoly([o])
        n = max(len(self.coeffs), len(o.coeffs))
        return SPoly([_add(self[k], o[k]) for k in range(n)])

    __radd__ = __add__

    def __neg__(self) -> "SPoly":
        return SPoly([-c for c in self.coeffs])

    def __sub__(self, o) -> "SPoly":
        if not isinstance(o, SPoly):
            o = SPoly([o])
        return self + (-o)

    def __rsub__(self, o) -> "SPoly":
        return (-self) + o

    def __mul__(self, o) -> "SPoly":
        if not isinstance(o, SPoly):
            return SPoly([c * o for c in self.coeffs])
        if not self.coeffs or not o.coeffs:
            return SPoly()
        out: list = [0] * (len(self.coeffs) + len(o.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if coeff_is_zero(a):
                continue
            for j, b in enumerate(o.coeffs):
                if coeff_is_zero(b):
                    continue
                out[i + j] = _add(out[i + j], a * b)
        return SPoly(out)

    def __rmul__(self, o) -> "SPoly":
        return SPoly([c * o for c in self.coeffs])

    def __pow__(self, k: int) -> "SPoly":
        out = SPoly([1])
        for _ in range(k):
            out = out * self
        return out

    def ds(self) -> "SPoly":
        """Derivative with respect to s."""
        return SPoly([c * k for k, c in enumerate(self.coeffs)][1:])

    def partial(self, i: int) -> "SPoly":
        """Coefficient-wise derivative in x_i (s held fixed)."""
        return SPoly([coeff_partial(c, i) for c in self.coeffs])

    def map_coeffs(self, fn: Callable) -> "SPoly":
        return SPoly([fn(c) for c in self.coeffs])

    def __call__(self, s):
        """Horner evaluation at a number or coefficient-ring element."""
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * s + c
        return acc

    def size(self) -> int:
        return sum(c.size() if hasattr(c, "size") else 1 for c in self.coeffs)

    def to_json(self) -> dict[str, str]:
        return {("1" if k == 0 else "s" if k == 1 else f"s^{k}"): str(c)
                for k, c in reversed(list(enumerate(self.coeffs))) if not coeff_is_zero(c)}

    def __repr__(self) -> str:
        return f"SPoly(degree={self.degree})"


def _add(a, b):
    if isinstance(a, int) and a == 0:
        return b
    if isinstance(b, int) and b == 0:
        return a
    return a + b


def det3(m: Sequence[Sequence[SPoly]]) -> SPoly:
    return (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )


def numeric_coefficients(p: SPoly, value: Callable = lambda c: c) -> list:
    """Coefficients (constant first) after mapping each through ``value``."""
    return [value(c) if not isinstance(c, SCALARS) else c for c in p.coeffs]
