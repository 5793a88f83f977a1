"""Constant linearization bases and solutions of the Frobenius system."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from .expr import EvaluationError, Expr, as_expr
from .linsys.cascade import Coefficients, ParallelizableBranch, frobenius_rhs
from .linsys.jets import NV, JetPoly, var_index
from .linsys.qsystem import DegenerateMinor, PointQ, QSystem
from .residuals import ResidualTable
from .webgeom import NoRegularSamples, Point, WebFunction

TOL_BASE = 1e-6
TOL_COMPAT = 1e-5
CLUSTER_RADIUS = 1e-6
ESCAPE = 1e12


# -- real roots ----------------------------------------------------------------


def _is_exact(cs) -> bool:
    return all(isinstance(c, (int, Fraction)) for c in cs)


def _square_free(cs: list) -> list:
    """Square-free part of an exact polynomial (constant term first)."""
    from sympy import Poly, QQ, Symbol

    s = Symbol("s")
    p = Poly([c for c in reversed(cs)], s, domain=QQ)
    q = p.sqf_part()
    out = [Fraction(int(c.numerator), int(c.denominator)) for c in reversed(q.all_coeffs())]
    return out


def real_roots(coeffs: Sequence, imag_tol: float = 1e-8) -> list[float]:
    """Real roots of ``sum coeffs[k] s^k`` (constant term first).

    Companion-matrix eigenvalues whose imaginary part is below
    ``imag_tol * (1 + |re|)`` count as real; they are then polished by
    Newton steps in extended precision.  Exact inputs are made square-free
    first so that multiple roots stay on the real axis.
    """
    cs = list(coeffs)
    while cs and cs[-1] == 0:
        cs.pop()
    if len(cs) <= 1:
        return []
    exact = _is_exact(cs)
    if exact:
        cs = _square_free(cs)
        if len(cs) <= 1:
            return []
        m = max(abs(c) for c in cs)
        fl = [float(c / m) for c in cs]
    else:
        m = max(abs(float(c)) for c in cs)
        fl = [float(c) / m for c in cs]
    # strip zero roots explicitly; numpy handles them but the polish is cleaner
    zeros = 0
    while zeros < len(fl) - 1 and fl[zeros] == 0.0:
        zeros += 1
    roots = np.roots(fl[::-1]) if len(fl) > 1 else np.array([])
    out = []
    for z in roots:
        if abs(z.imag) < imag_tol * (1 + abs(z.real)):
            out.append(_polish(cs, float(z.real), exact))
    out.sort()
    # merge duplicates produced by near-multiple roots
    merged: list[float] = []
    for x in out:
        if not merged or abs(x - merged[-1]) > 1e-12 * (1 + abs(x)):
            merged.append(x)
    return merged


def _polish(cs, x0: float, exact: bool, steps: int = 8) -> float:
    with mpmath.workdps(50):
        if exact:
            co = [mpmath.mpf(c.numerator) / c.denominator for c in cs]
        else:
            co = [mpmath.mpf(c) for c in cs]
        co = co[::-1]
        x = mpmath.mpf(x0)
        for _ in range(steps):
            p = mpmath.polyval(co, x)
            dp = mpmath.polyval(_deriv(co), x)
            if dp == 0:
                break
            dx = p / dp
            x -= dx
            if abs(dx) < mpmath.mpf(10) ** -40 * (1 + abs(x)):
                break
        if abs(x - x0) > 1e-6 * (1 + abs(x0)):
            return x0  # Newton wandered off; keep the eigenvalue
        return float(x)


def _deriv(co_high_first):
    n = len(co_high_first) - 1
    return [c * (n - k) for k, c in enumerate(co_high_first[:-1])]


def bisection_roots(coeffs: Sequence, lo: float = -50.0, hi: float = 50.0, grid: int = 20001) -> list[float]:
    """Independent oracle: sign changes on a fine grid refined by bisection."""
    cs = list(coeffs)
    exact = _is_exact(cs)
    if exact:
        cs = _square_free(cs)
    m = max(abs(float(c)) for c in cs) if cs else 1.0

    if exact:
        lcm = 1
        for c in cs:
            lcm = lcm * c.denominator // math.gcd(lcm, c.denominator)
        ints = [int(c * lcm) for c in cs]

    def f(x):
        if exact:
            # sign-exact: den^deg * p(num/den) evaluated in integers
            num, den = x.as_integer_ratio()
            acc, scale = 0, 1
            for c in reversed(ints):
                acc = acc * num + c * scale
                scale *= den
            return acc
        acc = 0.0
        for c in reversed(cs):
            acc = acc * x + float(c) / m
        return acc

    xs = np.linspace(lo, hi, grid)
    vals = [f(float(x)) for x in xs]
    out = []
    for k in range(grid - 1):
        a, b = float(xs[k]), float(xs[k + 1])
        fa, fb = vals[k], vals[k + 1]
        if fa == 0:
            out.append(a)
            continue
        if (fa < 0) != (fb < 0) and fb != 0:
            for _ in range(200):
                mid = 0.5 * (a + b)
                fm = f(mid)
                if fm == 0 or b - a < 1e-15 * (1 + abs(mid)):
                    break
                if (fm < 0) == (fa < 0):
                    a, fa = mid, fm
                else:
                    b = mid
            out.append(0.5 * (a + b))
    if vals[-1] == 0:
        out.append(float(xs[-1]))
    return sorted(out)


# -- constant bases ---------------------------------------------------------------


@dataclass
class BaseCandidate:
    value: float | None = None
    field: Expr | None = None
    exact: Fraction | None = None
    residuals: ResidualTable | None = None
    status: str = "unverified"

    @property
    def verified(self) -> bool:
        return self.status == "verified"

    def at(self, p: Point) -> float:
        if self.field is not None:
            return float(self.field.evaluate(p.mapping(), exact=False))
        return float(self.value)

    def expr(self) -> Expr:
        if self.field is not None:
            return self.field
        if self.exact is not None:
            return Expr.const(self.exact)
        return Expr.const(Fraction(repr(self.value)))

    def label(self) -> str:
        if self.field is not None:
            return str(self.field)
        if self.exact is not None:
            return str(self.exact)
        return f"{self.value:.12g}"


def common_roots(per_point: Sequence[Sequence[Sequence[float]]], radius: float = CLUSTER_RADIUS) -> list[float]:
    """Values that are within ``radius`` of a root of every polynomial.

    ``per_point[p][i]`` is the sorted real-root list of Q_i at sample p;
    ``None`` marks a polynomial that vanishes identically there.
    """
    lists = [roots for pt in per_point for roots in pt if roots is not None]
    if not lists:
        return []
    seeds = min(lists, key=lambda r: (len(r), r))
    found = []
    for x in seeds:
        matched = []
        ok = True
        for roots in lists:
            if not roots:
                ok = False
                break
            near = min(roots, key=lambda y: abs(y - x))
            if abs(near - x) > radius:
                ok = False
                break
            matched.append(near)
        if ok:
            centre = math.fsum(sorted(matched)) / len(matched)
            if not found or abs(centre - found[-1]) > radius:
                found.append(centre)
    return sorted(found)


def _rationalize(x: float, max_den: int = 1000) -> Fraction:
    return Fraction(x).limit_denominator(max_den)


def find_constant_bases(
    w: WebFunction,
    samples: Sequence[Point],
    qsystem: QSystem | None = None,
    radius: float = CLUSTER_RADIUS,
    tol_base: float = TOL_BASE,
    rejected: list | None = None,
) -> list[BaseCandidate]:
    """Constant values of s that are common real roots of all Q_i at all samples."""
    qsystem = qsystem or QSystem(w)
    if len(samples) == 0:
        raise NoRegularSamples("no samples supplied")
    pqs: list[PointQ] = []
    for p in samples:
        try:
            pq = qsystem.at(p)
        except (ZeroDivisionError, EvaluationError) as exc:
            warnings.warn(f"sample {p} skipped: {exc}")
            continue
        if pq.degenerate:
            continue
        pqs.append(pq)
    if not pqs:
        raise DegenerateMinor("D vanishes (or the cascade is singular) at every sample")
    per_point = [[real_roots(c) if c else None for c in pq.q] for pq in pqs]
    out = []
    for x in common_roots(per_point, radius):
        cand = BaseCandidate(value=x)
        fr = _rationalize(x)
        if abs(float(fr) - x) < radius and all(
            pq.value(i, fr) == 0 for pq in pqs for i in range(7)
        ):
            cand.exact = fr
            cand.value = float(fr)
        cand.residuals = base_residuals(pqs, cand.exact if cand.exact is not None else x, tol_base)
        cand.status = "verified" if cand.residuals.verified else "rejected"
        if cand.verified:
            out.append(cand)
        elif rejected is not None:
            rejected.append(cand)
    return out


def base_residuals(pqs: Sequence[PointQ], s, tol: float = TOL_BASE) -> ResidualTable:
    t = ResidualTable("base", [f"Q{i + 1}" for i in range(7)], tol)
    for pq in pqs:
        t.add(pq.point, [abs(pq.value(i, s)) for i in range(7)])
    return t


def projectively_equivalent(b1: BaseCandidate, b2: BaseCandidate, samples: Sequence[Point],
                            tol: float = 1e-9) -> bool:
    """Equal bases at every sample (the projective invariant of a linearization)."""
    for p in samples:
        if abs(b1.at(p) - b2.at(p)) >= tol:
            return False
    return True


# -- the Frobenius system ---------------------------------------------------------


def specialize_frobenius(w: WebFunction, s) -> dict[str, JetPoly]:
    """Frobenius right-hand sides with s (constant or Expr field) inserted."""
    frob = frobenius_rhs(Coefficients.symbolic(w))
    s = as_expr(s) if not isinstance(s, Expr) else s
    rules = {"s": JetPoly.const(s), "s1": JetPoly.const(s.partial(1)), "s2": JetPoly.const(s.partial(2))}
    return {k: v.substitute(rules) for k, v in frob.items()}


class _RHS:
    """Vectorised evaluation of the four right-hand sides in (x1, x2, t, z)."""

    def __init__(self, rules: dict[str, JetPoly]):
        kt, kz = var_index("t"), var_index("z")
        self.parts = {}
        self.dens = []
        for name, poly in rules.items():
            terms = []
            for m, c in poly.terms.items():
                if any(e for k, e in enumerate(m) if k not in (kt, kz)):
                    raise ValueError("base insertion left s-jets in the Frobenius system")
                c = as_expr(c)
                terms.append((m[kt], m[kz], c.compile()))
                if not c.is_constant():
                    self.dens.append(c.denominator().compile())
            self.parts[name] = terms

    def __call__(self, x1, x2, t, z):
        out = {}
        for name, terms in self.parts.items():
            acc = np.zeros_like(t, dtype=float)
            for a, b, f in terms:
                acc = acc + f(x1, x2) * t**a * z**b
            out[name] = acc
        return out

    def min_denominator(self, x1, x2):
        if not self.dens:
            return np.full(np.broadcast(x1, x2).shape, np.inf)
        return np.min([np.abs(d(x1, x2)) for d in self.dens], axis=0)


@dataclass
class FrobeniusSolution:
    x1: np.ndarray
    x2: np.ndarray
    t: np.ndarray  # shape (len(x1), len(x2)), x1-first paths
    z: np.ndarray
    status: np.ndarray  # 0 ok, 1 masked (singular), 2 escaped
    substeps: int
    h: float
    init: tuple
    base: object
    path_difference: float = math.nan
    compat_t: float = math.nan
    compat_z: float = math.nan
    t_alt: np.ndarray | None = None
    z_alt: np.ndarray | None = None
    closed_t: Expr | None = None
    closed_z: Expr | None = None
    tol_compat: float = TOL_COMPAT
    _rhs: _RHS | None = None
    eps_reg: float = 1e-6

    @property
    def compatible(self) -> bool:
        return (math.isfinite(self.compat_t) and self.compat_t < self.tol_compat
                and math.isfinite(self.compat_z) and self.compat_z < self.tol_compat)

    @property
    def valid_fraction(self) -> float:
        return float(np.mean(self.status == 0))

    def evaluate(self, x1: float, x2: float) -> tuple[float, float]:
        """(t, z) at an arbitrary point, integrated from the nearest node."""
        if self.closed_t is not None:
            m = {"x1": x1, "x2": x2}
            return float(self.closed_t.evaluate(m, exact=False)), float(self.closed_z.evaluate(m, exact=False))
        i = int(np.argmin(np.abs(self.x1 - x1)))
        j = int(np.argmin(np.abs(self.x2 - x2)))
        if self.status[i, j] != 0:
            return math.nan, math.nan
        state = (np.array([self.t[i, j]]), np.array([self.z[i, j]]))
        n = max(2, int(math.ceil(abs(x1 - self.x1[i]) / self.h)) * 2)
        state, _ = _sweep(self._rhs, 1, self.x1[i], x1, np.array([self.x2[j]]), state, n, self.eps_reg)
        n = max(2, int(math.ceil(abs(x2 - self.x2[j]) / self.h)) * 2)
        state, _ = _sweep(self._rhs, 2, self.x2[j], x2, np.array([x1]), state, n, self.eps_reg)
        return float(state[0][0]), float(state[1][0])


def _rk4_step(rhs, axis, a, other, t, z, h):
    def f(pos, t, z):
        x1, x2 = (pos, other) if axis == 1 else (other, pos)
        d = rhs(np.broadcast_to(x1, t.shape), np.broadcast_to(x2, t.shape), t, z)
        return (d["t1"], d["z1"]) if axis == 1 else (d["t2"], d["z2"])

    k1 = f(a, t, z)
    k2 = f(a + h / 2, t + h / 2 * k1[0], z + h / 2 * k1[1])
    k3 = f(a + h / 2, t + h / 2 * k2[0], z + h / 2 * k2[1])
    k4 = f(a + h, t + h * k3[0], z + h * k3[1])
    return (t + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            z + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]))


def _sweep(rhs, axis, a, b, other, state, n, eps, status=None):
    """Integrate lanes from coordinate a to b along ``axis`` in n RK4 steps."""
    t, z = state
    status = np.zeros(t.shape, dtype=int) if status is None else status.copy()
    if a == b:
        return (t, z), status
    h = (b - a) / n
    pos = a
    with np.errstate(all="ignore"):
        for _ in range(n):
            for q in (pos, pos + h / 2, pos + h):
                x1, x2 = (q, other) if axis == 1 else (other, q)
                near = rhs.min_denominator(np.broadcast_to(x1, t.shape), np.broadcast_to(x2, t.shape)) < eps
                status[(status == 0) & near] = 1
            t, z = _rk4_step(rhs, axis, pos, other, t, z, h)
            pos += h
            bad = ~(np.isfinite(t) & np.isfinite(z))
            status[(status == 0) & bad] = 1
            esc = (np.abs(t) > ESCAPE) | (np.abs(z) > ESCAPE)
            status[(status == 0) & esc] = 2
            t = np.where(status == 0, t, np.nan)
            z = np.where(status == 0, z, np.nan)
    return (t, z), status


def _integrate_axis_first(rhs, first, xs1, xs2, init, m, eps):
    """Grid values from x``first``-first axis-parallel paths."""
    p0, t0, z0 = init
    a1, a2 = float(p0.x1), float(p0.x2)
    n1, n2 = len(xs1), len(xs2)
    T = np.full((n1, n2), np.nan)
    Z = np.full((n1, n2), np.nan)
    S = np.ones((n1, n2), dtype=int)
    if first == 1:
        lead, trail, la, ta = xs1, xs2, a1, a2
    else:
        lead, trail, la, ta = xs2, xs1, a2, a1
    hnode = (lead[-1] - lead[0]) / max(len(lead) - 1, 1)

    # first leg: along the leading axis at the initial trailing coordinate
    lead_vals = {}
    for direction in (1, -1):
        idx = [k for k in range(len(lead)) if (lead[k] >= la if direction == 1 else lead[k] < la)]
        idx.sort(key=lambda k: abs(lead[k] - la))
        state = (np.array([float(t0)]), np.array([float(z0)]))
        st = np.zeros(1, dtype=int)
        pos = la
        for k in idx:
            n = max(1, int(round(abs(lead[k] - pos) / hnode * m))) if lead[k] != pos else 0
            if n:
                state, st = _sweep(rhs, first, pos, lead[k], np.array([ta]), state, n, eps, st)
            pos = lead[k]
            lead_vals[k] = (state[0][0], state[1][0], st[0])
    # second leg: all lanes together along the trailing axis
    other = np.array(lead, dtype=float)
    base_t = np.array([lead_vals[k][0] for k in range(len(lead))])
    base_z = np.array([lead_vals[k][1] for k in range(len(lead))])
    base_s = np.array([lead_vals[k][2] for k in range(len(lead))])
    htrail = (trail[-1] - trail[0]) / max(len(trail) - 1, 1)
    other_axis = 2 if first == 1 else 1
    for direction in (1, -1):
        idx = [k for k in range(len(trail)) if (trail[k] >= ta if direction == 1 else trail[k] < ta)]
        idx.sort(key=lambda k: abs(trail[k] - ta))
        state = (base_t.copy(), base_z.copy())
        st = base_s.copy()
        pos = ta
        for k in idx:
            n = max(1, int(round(abs(trail[k] - pos) / htrail * m))) if trail[k] != pos else 0
            if n:
                state, st = _sweep(rhs, other_axis, pos, trail[k], other, state, n, eps, st)
            pos = trail[k]
            if first == 1:
                T[:, k], Z[:, k], S[:, k] = state[0], state[1], st
            else:
                T[k, :], Z[k, :], S[k, :] = state[0], state[1], st
    return T, Z, S


def _fd4(F, h, axis):
    """Fourth-order central difference on interior nodes (NaN elsewhere)."""
    out = np.full(F.shape, np.nan)
    if axis == 0:
        out[2:-2, :] = (-F[4:, :] + 8 * F[3:-1, :] - 8 * F[1:-3, :] + F[:-4, :]) / (12 * h)
    else:
        out[:, 2:-2] = (-F[:, 4:] + 8 * F[:, 3:-1] - 8 * F[:, 1:-3] + F[:, :-4]) / (12 * h)
    return out


def solve_frobenius(
    w: WebFunction,
    base: BaseCandidate | float | Expr,
    init: tuple[Point, float, float] | None = None,
    nodes: int = 21,
    tol_step: float = 1e-8,
    tol_compat: float = TOL_COMPAT,
    max_substeps: int = 256,
) -> FrobeniusSolution:
    """Integrate dt = t1 dx1 + t2 dx2, dz = z1 dx1 + z2 dx2 over the box grid."""
    if isinstance(base, BaseCandidate):
        s = base.expr()
    else:
        s = as_expr(base) if not isinstance(base, Expr) else base
    if init is None:
        init = (w.point(w.box[0], w.box[2]), 0.0, 0.0)
    p0 = init[0]
    if not w.is_regular(p0):
        raise ValueError(f"initial point {p0} is not regular")
    rhs = _RHS(specialize_frobenius(w, s))
    xs1 = np.linspace(w.box[0], w.box[1], nodes)
    xs2 = np.linspace(w.box[2], w.box[3], nodes)
    eps = w.eps_reg
    m = 2
    prev = _integrate_axis_first(rhs, 1, xs1, xs2, init, m, eps)
    while True:
        m2 = m * 2
        cur = _integrate_axis_first(rhs, 1, xs1, xs2, init, m2, eps)
        ok = (prev[2] == 0) & (cur[2] == 0)
        diff = 0.0
        if ok.any():
            diff = float(max(np.max(np.abs(prev[0][ok] - cur[0][ok])), np.max(np.abs(prev[1][ok] - cur[1][ok]))))
        m = m2
        prev = cur
        if diff < tol_step or m >= max_substeps:
            break
    T, Z, S = prev
    hnode = float(xs1[1] - xs1[0])
    sol = FrobeniusSolution(xs1, xs2, T, Z, S, m, hnode / m, (float(p0.x1), float(p0.x2), init[1], init[2]),
                            s, tol_compat=tol_compat, _rhs=rhs, eps_reg=eps)
    if diff >= tol_step:
        warnings.warn(f"step refinement stopped at {m} substeps with change {diff:.3g}")
    # path independence
    Ta, Za, Sa = _integrate_axis_first(rhs, 2, xs1, xs2, init, m, eps)
    ok = (S == 0) & (Sa == 0)
    sol.t_alt, sol.z_alt = Ta, Za
    if ok.any():
        sol.path_difference = float(max(np.max(np.abs(T[ok] - Ta[ok])), np.max(np.abs(Z[ok] - Za[ok]))))
    # compatibility: D2(t1) - D1(t2) and D2(z1) - D1(z2) from grid values
    X1, X2 = np.meshgrid(xs1, xs2, indexing="ij")
    with np.errstate(all="ignore"):
        d = rhs(X1, X2, T, Z)
    h1, h2 = float(xs1[1] - xs1[0]), float(xs2[1] - xs2[0])
    ct = np.abs(_fd4(d["t1"], h2, 1) - _fd4(d["t2"], h1, 0))
    cz = np.abs(_fd4(d["z1"], h2, 1) - _fd4(d["z2"], h1, 0))
    valid = np.isfinite(ct) & np.isfinite(cz)
    sol.compat_t = float(np.max(ct[valid])) if valid.any() else math.nan
    sol.compat_z = float(np.max(cz[valid])) if valid.any() else math.nan
    return sol


def check_closed_form(
    w: WebFunction,
    s,
    t,
    z,
    samples: Sequence[Point],
    tol: float = 1e-8,
) -> ResidualTable:
    """Residuals of the four Frobenius equations for closed-form s, t, z."""
    s, t, z = (as_expr(v) for v in (s, t, z))
    rules = specialize_frobenius(w, s)
    vals = {"t": JetPoly.const(t), "z": JetPoly.const(z)}
    lhs = {"t1": t.partial(1), "t2": t.partial(2), "z1": z.partial(1), "z2": z.partial(2)}
    rhs = {}
    for k, poly in rules.items():
        e = poly.substitute(vals)
        if set(e.terms) - {(0,) * NV}:
            raise ValueError("jets survive after inserting the closed form")
        rhs[k] = as_expr(e.terms.get((0,) * NV, 0))
    table = ResidualTable("frobenius", list(lhs), tol)
    for k in lhs:
        table.symbolic_zero[k] = (lhs[k] - rhs[k]).is_zero()
    for p in samples:
        mp = p.mapping()
        try:
            row = []
            for k in lhs:
                a = float(lhs[k].evaluate(mp, exact=False))
                b = float(rhs[k].evaluate(mp, exact=False))
                row.append(abs(a - b) / max(1.0, abs(a), abs(b)))
        except EvaluationError as exc:
            table.warnings.append(f"sample {p} skipped: {exc}")
            continue
        table.add(p, row)
    if not table.values:
        raise NoRegularSamples("closed-form candidate is singular at every sample")
    return table


__all__ = [
    "BaseCandidate", "CLUSTER_RADIUS", "FrobeniusSolution", "TOL_BASE", "TOL_COMPAT",
    "bisection_roots", "base_residuals", "check_closed_form", "common_roots",
    "find_constant_bases", "projectively_equivalent", "real_roots", "solve_frobenius",
    "specialize_frobenius",
]
