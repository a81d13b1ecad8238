"""Quadratic differentials, the Schwarzian derivative and pole bookkeeping on P^1.

A meromorphic projective structure on P^1 is written ``P = P0 + phi`` with
``phi = (q/2) dx^2`` in the standard affine chart.  The factor 1/2 is the
convention used throughout the package: the developing map of ``P`` is the
ratio of two solutions of ``y'' + (q/2) y = 0`` and ``q = S(chart)``.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from .algebra import (
    INF,
    RationalFunction,
    X,
    _cofactors,
    _trim,
    as_point,
    cx_to_json,
    is_inf,
    point_from_json,
    point_to_json,
    rf_compose,
    rf_derivative,
    rf_expand,
    COEFF_TOL,
)
from .errors import ConstantInput, NotAPole, ZeroDifferential


# ------------------------------------------------------------------ types ----

@dataclass(frozen=True)
class Divisor:
    """Finite formal sum of points of P^1 with nonzero integer multiplicities."""

    entries: tuple = ()

    def __post_init__(self):
        pts = [p for p, _ in self.entries]
        for i, p in enumerate(pts):
            for r in pts[i + 1 :]:
                if _same_point(p, r):
                    raise ValueError("divisor points must be distinct")
        if any(int(m) == 0 for _, m in self.entries):
            raise ValueError("divisor multiplicities must be nonzero")

    @property
    def degree(self) -> int:
        return sum(int(m) for _, m in self.entries)

    @property
    def points(self) -> list:
        return [p for p, _ in self.entries]

    @property
    def orders(self) -> list:
        return [int(m) for _, m in self.entries]

    def mult(self, p) -> int:
        for r, m in self.entries:
            if _same_point(p, r):
                return int(m)
        return 0

    def to_json(self) -> list:
        return [{"point": point_to_json(p), "mult": int(m)} for p, m in self.entries]

    @classmethod
    def from_json(cls, obj) -> "Divisor":
        return cls(tuple((point_from_json(e["point"]), int(e["mult"])) for e in obj))


def _same_point(p, r, tol: float = 1e-9) -> bool:
    if is_inf(p) or is_inf(r):
        return is_inf(p) and is_inf(r)
    return abs(complex(p) - complex(r)) <= tol * max(1.0, abs(complex(p)))


@dataclass(frozen=True)
class QuadraticDifferential:
    """``phi = (q/2) dx^2`` in the affine chart."""

    q: RationalFunction

    def to_json(self) -> dict:
        return {"q": self.q.to_json()}

    @classmethod
    def from_json(cls, obj) -> "QuadraticDifferential":
        return cls(RationalFunction.from_json(obj["q"]))


@dataclass(frozen=True)
class ProjectiveStructureP1(QuadraticDifferential):
    """The structure ``P0 + (q/2) dx^2`` on P^1."""


@dataclass(frozen=True)
class SingularityReport:
    point: object
    order: int
    res2: complex | None = None
    theta: tuple | None = None  # (theta, -theta), principal branch first

    def to_json(self) -> dict:
        out = {"point": point_to_json(self.point), "order": self.order}
        if self.res2 is not None:
            out["res2"] = cx_to_json(self.res2)
            out["theta"] = [cx_to_json(t) for t in self.theta]
        return out


# ------------------------------------------------------------- Schwarzian ----

def schwarzian(f: RationalFunction) -> RationalFunction:
    """Schwarzian derivative ``S(f) = (f''/f')' - (f''/f')^2 / 2``.

    Examples
    --------
    >>> x = RationalFunction.x()
    >>> schwarzian(x**2).allclose(RationalFunction([-1.5], [0, 0, 1]))
    True
    """
    f = RationalFunction.coerce(f)
    P, Q = f.num, f.den
    d = npoly.polyder
    dP, dQ = _der(P), _der(Q)
    W = _sub(np.convolve(dP, Q), np.convolve(P, dQ))
    W = _trim(W, _add_abs(np.convolve(np.abs(dP), np.abs(Q)), np.convolve(np.abs(P), np.abs(dQ))))
    if len(W) == 1 and W[0] == 0:
        raise ConstantInput("Schwarzian of a constant function")
    # S(P/Q) = [2 W W'' - 3 W'^2 + 4 W (P'' Q' - P' Q'')] / (2 W^2),  W = P'Q - PQ'
    dW, ddW = _der(W), _der(_der(W))
    ddP, ddQ = _der(dP), _der(dQ)
    inner = _sub(np.convolve(ddP, dQ), np.convolve(dP, ddQ))
    terms = [2 * np.convolve(W, ddW), -3 * np.convolve(dW, dW), 4 * np.convolve(W, inner)]
    scale = [2 * np.convolve(np.abs(W), np.abs(ddW)), 3 * np.convolve(np.abs(dW), np.abs(dW)),
             4 * np.convolve(np.abs(W), _add_abs(np.convolve(np.abs(ddP), np.abs(dQ)), np.convolve(np.abs(dP), np.abs(ddQ))))]
    num = _sum(terms)
    return RationalFunction(num, 2 * np.convolve(W, W), scale=_sum_abs(scale), den_scale=2 * np.convolve(np.abs(W), np.abs(W)))


def schwarzian_values(f: RationalFunction, z) -> np.ndarray:
    """``S(f)`` at the points ``z`` without forming the symbolic Schwarzian."""
    f = RationalFunction.coerce(f)
    z = np.asarray(z, dtype=complex)
    P, Q = f.num, f.den
    p = [npoly.polyval(z, npoly.polyder(P, k) if k else P) for k in range(4)]
    q = [npoly.polyval(z, npoly.polyder(Q, k) if k else Q) for k in range(4)]
    W = p[1] * q[0] - p[0] * q[1]
    dW = p[2] * q[0] - p[0] * q[2]
    ddW = p[3] * q[0] + p[2] * q[1] - p[1] * q[2] - p[0] * q[3]
    with np.errstate(divide="ignore", invalid="ignore"):
        return (2 * W * ddW - 3 * dW * dW + 4 * W * (p[2] * q[1] - p[1] * q[2])) / (2 * W * W)


def _der(p):
    return npoly.polyder(p) if len(p) > 1 else np.zeros(1, complex)


def _pad(p, n):
    return np.pad(np.asarray(p, complex), (0, n - len(p)))


def _sum(ps):
    n = max(len(p) for p in ps)
    return sum(_pad(p, n) for p in ps)


def _sub(a, b):
    return _sum([a, -np.asarray(b)])


def _add_abs(a, b):
    return np.abs(_sum([np.abs(a), np.abs(b)]))


def _sum_abs(ps):
    return np.abs(_sum(ps))


def is_moebius(f: RationalFunction) -> bool:
    """Degree one with nonvanishing determinant (after canonical reduction)."""
    f = RationalFunction.coerce(f)
    return f.degree == 1 and not rf_derivative(f).is_zero()


#: fixed probe grid shared by the identity checks
PROBES = 0.31 + 0.17j + 1.23 * np.exp(2j * np.pi * (np.arange(20) + 0.137) / 20) * (1 + 0.15 * (-1) ** np.arange(20))


def probe_residual(lhs: RationalFunction, rhs: RationalFunction, probes=PROBES) -> float:
    """Largest relative discrepancy ``|l - r| / (1 + |l| + |r|)`` over the probe grid."""
    a = np.asarray(lhs(probes))
    b = np.asarray(rhs(probes))
    ok = np.isfinite(a) & np.isfinite(b)
    return float(np.max(np.abs(a - b)[ok] / (1 + np.abs(a)[ok] + np.abs(b)[ok]))) if ok.any() else 0.0


def schwarzian_cocycle_check(f: RationalFunction, g: RationalFunction, probes=PROBES) -> float:
    """Residual of ``S(f o g) = (g')^2 S(f) o g + S(g)`` on the probe grid.

    The composite ``f o g`` is built symbolically; every Schwarzian is then
    evaluated pointwise by :func:`schwarzian_values`.  Expanding ``S(f o g)``
    into monomials (degree ~50 for degree-4 inputs) loses many digits near
    critical points, the pointwise Wronskian form does not.  Residual as in
    :func:`probe_residual`.
    """
    fg = rf_compose(f, g)
    if rf_derivative(fg).is_zero():
        raise ConstantInput("f o g is constant")
    z = np.asarray(probes, dtype=complex)
    lhs = schwarzian_values(fg, z)
    dg = np.asarray(rf_derivative(g)(z))
    rhs = dg * dg * schwarzian_values(f, np.asarray(g(z))) + schwarzian_values(g, z)
    ok = np.isfinite(lhs) & np.isfinite(rhs)
    if not ok.any():
        return 0.0
    return float(np.max(np.abs(lhs - rhs)[ok] / (1 + np.abs(lhs)[ok] + np.abs(rhs)[ok])))


def structure_difference(chart1: RationalFunction, chart2: RationalFunction) -> QuadraticDifferential:
    """The quadratic differential ``P2 - P1`` between two charts of the same coordinate.

    Both charts are functions of the affine coordinate ``x``.  By the cocycle
    rule ``S(chart2) - S(chart1)`` equals ``(chart1')^2 S(psi) o chart1`` with
    ``psi = chart2 o chart1^{-1}``, i.e. ``S_{x1}(psi) dx1^2`` written in ``x``.
    """
    s2 = schwarzian(chart2)
    s1 = schwarzian(chart1)
    return QuadraticDifferential(s2 - s1)


def pullback(q: RationalFunction, g: RationalFunction) -> RationalFunction:
    """Coefficient of ``g^*((q/2) dx^2)``, i.e. ``(g')^2 q o g``."""
    dg = rf_derivative(g)
    return dg * dg * rf_compose(q, g)


# ---------------------------------------------------------------- divisors ----

def q_at_infinity(q: RationalFunction) -> RationalFunction:
    """``q~(t) = q(1/t) / t^4``: the coefficient in the chart ``t = 1/x``."""
    t = X
    return rf_compose(q, 1 / t) / t**4


def finite_poles(f: RationalFunction) -> list:
    """Finite poles of ``f`` with their orders, via the squarefree part of the denominator."""
    den = np.asarray(f.den)
    if len(den) <= 1:
        return []
    dden = np.polynomial.polynomial.polyder(den)
    red = _cofactors(dden, den, COEFF_TOL)
    sqfree = _trim(red[1]) if red is not None else den
    roots = np.polynomial.polynomial.polyroots(sqfree) if len(sqfree) > 1 else []
    out = []
    for r in roots:
        r = complex(r)
        # polish on the squarefree part (simple roots)
        p, dp = np.polynomial.polynomial.polyval(r, sqfree), np.polynomial.polynomial.polyval(r, np.polynomial.polynomial.polyder(sqfree))
        if dp != 0:
            r = r - p / dp
        r = complex(r) + 0j  # plain complex, no negative zeros
        v = rf_expand(f, r, 0, strict=False).min_order
        if v < 0 and not any(_same_point(r, s) for s, _ in out):
            out.append((r, -v))
    out.sort(key=lambda e: (round(e[0].real, 9), round(e[0].imag, 9)))
    return out


def pole_order_at(q: RationalFunction, p) -> int:
    """Pole order of the quadratic differential ``(q/2) dx^2`` at ``p`` (0 if holomorphic)."""
    p = as_point(p)
    if q.is_zero():
        return 0
    if is_inf(p):
        # q~ has valuation deg(den) - deg(num) - 4
        return max(0, 4 + (len(q.num) - 1) - (len(q.den) - 1))
    v = rf_expand(q, p, 0, strict=False).min_order
    return max(0, -v)


def polar_divisor(phi) -> Divisor:
    """All poles of ``phi`` on P^1, including infinity.

    Examples
    --------
    >>> polar_divisor(QuadraticDifferential(RationalFunction([0, -2]))).to_json()
    [{'point': 'inf', 'mult': 5}]
    """
    q = phi.q if isinstance(phi, QuadraticDifferential) else RationalFunction.coerce(phi)
    if q.is_zero():
        raise ZeroDifferential("the zero differential has no polar divisor")
    entries = list(finite_poles(q))
    n_inf = pole_order_at(q, INF)
    if n_inf > 0:
        entries.append((INF, n_inf))
    return Divisor(tuple(entries))


def residue_and_index(P, p) -> SingularityReport:
    """Order-two residue ``res2 = lim x^2 q`` and index ``theta = +-sqrt(1 - 2 res2)``.

    At infinity the limit is taken in the chart ``t = 1/x`` with ``q~``.  Poles
    of order three or more only carry their order.
    """
    q = P.q if isinstance(P, QuadraticDifferential) else RationalFunction.coerce(P)
    p = as_point(p)
    qq = q_at_infinity(q) if is_inf(p) else q
    at = 0 if is_inf(p) else p
    s = rf_expand(qq, at, -1, strict=False)
    n = max(0, -s.min_order) if not s.is_zero() else 0
    if n == 0:
        raise NotAPole(f"{p!r} is not a pole of the structure")
    if n > 2:
        return SingularityReport(p, n)
    res2 = s.coeff(-2) if s.min_order <= -2 else 0j
    theta = cmath.sqrt(1 - 2 * res2)
    return SingularityReport(p, n, complex(res2), (theta, -theta))


# ------------------------------------------------------------- dimensions ----

def quadratic_space_dimension(g: int, orders) -> int:
    """Riemann-Roch count ``3g - 3 + sum(n_i)``."""
    return 3 * int(g) - 3 + sum(int(n) for n in orders)


def marked_points_count(n: int) -> int:
    """Number of asymptotic directions at a pole of order ``n``: 0 if ``n <= 2``."""
    n = int(n)
    if n < 1:
        raise ValueError("pole order must be positive")
    return 0 if n <= 2 else n - 2
