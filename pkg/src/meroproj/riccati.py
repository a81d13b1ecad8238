"""Singular Riccati equations ``dy + (alpha y^2 + beta y + gamma) dx = 0``.

The marked section is ``{y = inf}`` unless stated otherwise.  Gauge
transformations are Moebius substitutions ``y = (a Y + b) / (c Y + d)`` with
rational coefficients; elementary transformations are the special gauges
``y = y0 + (x - x0) Y`` (center off the section) and ``y = Y / (x - x0)``
(center on the section).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algebra import (
    INF,
    ONE,
    ZERO,
    RationalFunction,
    X,
    as_point,
    is_inf,
    point_to_json,
    rf_compose,
    rf_derivative,
    rf_expand,
)
from .errors import (
    AlreadyTransverse,
    DegenerateGauge,
    NotAPole,
    NotRegularSingular,
    SectionInvariant,
)
from .projective import (
    PROBES,
    QuadraticDifferential,
    pole_order_at,
    q_at_infinity,
    residue_and_index,
)

_RF = RationalFunction.coerce


# ------------------------------------------------------------------ types ----

@dataclass(frozen=True)
class RiccatiEq:
    """Coefficients of ``dy + (alpha y^2 + beta y + gamma) dx = 0``.

    ``chart`` is ``"finite"`` for the affine coordinate ``x`` and ``"inf"``
    when the coefficients are written in ``t = 1/x``.
    """

    alpha: RationalFunction
    beta: RationalFunction
    gamma: RationalFunction
    chart: str = "finite"

    def __post_init__(self):
        object.__setattr__(self, "alpha", _RF(self.alpha))
        object.__setattr__(self, "beta", _RF(self.beta))
        object.__setattr__(self, "gamma", _RF(self.gamma))
        if self.chart not in ("finite", "inf"):
            raise ValueError(f"chart must be 'finite' or 'inf', got {self.chart!r}")

    @classmethod
    def oper(cls, q, chart: str = "finite") -> "RiccatiEq":
        """The normal form ``dy + (y^2 + q/2) dx = 0``."""
        return cls(ONE, ZERO, _RF(q) * 0.5, chart)

    @property
    def coefficients(self):
        return (self.alpha, self.beta, self.gamma)

    def section_invariant(self) -> bool:
        """``{y = inf}`` is a leaf exactly when ``alpha`` vanishes identically."""
        return self.alpha.is_zero()

    def slope(self, x, y):
        """``dy/dx`` at the given points."""
        return -(self.alpha(x) * y * y + self.beta(x) * y + self.gamma(x))

    def allclose(self, other: "RiccatiEq", tol: float = 1e-9) -> bool:
        return self.chart == other.chart and all(a.allclose(b, tol) for a, b in zip(self.coefficients, other.coefficients))

    def probe_residual(self, other: "RiccatiEq", probes=PROBES) -> float:
        z = np.asarray(probes, dtype=complex)
        worst = 0.0
        for a, b in zip(self.coefficients, other.coefficients):
            va, vb = np.asarray(a(z)), np.asarray(b(z))
            ok = np.isfinite(va) & np.isfinite(vb)
            if ok.any():
                worst = max(worst, float(np.max(np.abs(va - vb)[ok] / (1 + np.abs(va)[ok] + np.abs(vb)[ok]))))
        return worst

    def to_infinity_chart(self) -> "RiccatiEq":
        """Rewrite in ``t = 1/x`` (``dx = -dt/t^2``); involutive on charts."""
        t = X
        inv = 1 / t
        w = -1 / (t * t)
        new = [rf_compose(c, inv) * w for c in self.coefficients]
        return RiccatiEq(*new, chart="inf" if self.chart == "finite" else "finite")

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha.to_json(),
            "beta": self.beta.to_json(),
            "gamma": self.gamma.to_json(),
            "chart": "inf" if self.chart == "inf" else "finite",
        }

    @classmethod
    def from_json(cls, obj) -> "RiccatiEq":
        return cls(
            RationalFunction.from_json(obj["alpha"]),
            RationalFunction.from_json(obj["beta"]),
            RationalFunction.from_json(obj["gamma"]),
            obj.get("chart", "finite"),
        )


@dataclass(frozen=True)
class MoebiusGauge:
    """The substitution ``y = (a Y + b) / (c Y + d)``."""

    a: RationalFunction
    b: RationalFunction
    c: RationalFunction
    d: RationalFunction

    def __post_init__(self):
        for name in "abcd":
            object.__setattr__(self, name, _RF(getattr(self, name)))

    @classmethod
    def identity(cls) -> "MoebiusGauge":
        return cls(ONE, ZERO, ZERO, ONE)

    @classmethod
    def scaling(cls, u) -> "MoebiusGauge":
        """``y = u Y``."""
        return cls(u, ZERO, ZERO, ONE)

    @classmethod
    def translation(cls, b) -> "MoebiusGauge":
        """``y = Y + b``."""
        return cls(ONE, b, ZERO, ONE)

    @classmethod
    def inversion(cls) -> "MoebiusGauge":
        """``y = 1/Y``."""
        return cls(ZERO, ONE, ONE, ZERO)

    @property
    def det(self) -> RationalFunction:
        return self.a * self.d - self.b * self.c

    def matrix(self):
        return [[self.a, self.b], [self.c, self.d]]

    def then(self, other: "MoebiusGauge") -> "MoebiusGauge":
        """Substitute ``y = self(Y)`` and then ``Y = other(Z)``: the product ``self * other``."""
        a, b, c, d = self.a, self.b, self.c, self.d
        A, B, C, D = other.a, other.b, other.c, other.d
        return MoebiusGauge(a * A + b * C, a * B + b * D, c * A + d * C, c * B + d * D)

    def inverse(self) -> "MoebiusGauge":
        det = self.det
        if det.is_zero():
            raise DegenerateGauge("gauge determinant vanishes identically")
        return MoebiusGauge(self.d / det, -self.b / det, -self.c / det, self.a / det)

    def image_of_infinity(self):
        """The section ``y = a/c`` that ``{Y = inf}`` is sent to (``INF`` if ``c = 0``)."""
        return INF if self.c.is_zero() else self.a / self.c

    def __call__(self, x, Y):
        return (self.a(x) * Y + self.b(x)) / (self.c(x) * Y + self.d(x))

    def to_json(self) -> dict:
        return {k: getattr(self, k).to_json() for k in "abcd"}

    @classmethod
    def from_json(cls, obj) -> "MoebiusGauge":
        return cls(*(RationalFunction.from_json(obj[k]) for k in "abcd"))


@dataclass(frozen=True)
class OperChartForm:
    """``dy + (y^2 + q/2) dx = 0`` with section ``{y = inf}``, plus the gauge used."""

    q: RationalFunction
    gauge: MoebiusGauge = field(default_factory=MoebiusGauge.identity)

    def riccati(self, chart: str = "finite") -> RiccatiEq:
        return RiccatiEq.oper(self.q, chart)

    def to_json(self) -> dict:
        return {"q": self.q.to_json(), "gauge": self.gauge.to_json()}


@dataclass(frozen=True)
class ElemTransform:
    """Result of one elementary transformation."""

    riccati: RiccatiEq
    center: tuple
    self_intersection_delta: int
    gauge: MoebiusGauge

    def log_entry(self) -> dict:
        return {"type": "elem", "center": [point_to_json(self.center[0]), point_to_json(self.center[1])]}


# ----------------------------------------------------------------- gauges ----

def gauge_apply(R: RiccatiEq, G: MoebiusGauge) -> RiccatiEq:
    """Pull ``R`` back by ``y = (a Y + b)/(c Y + d)``.

    Substituting and multiplying by ``(cY + d)^2 / (ad - bc)`` gives

    * ``Y^2``: ``a'c - ac' + alpha a^2 + beta ac + gamma c^2``
    * ``Y``:   ``a'd + b'c - ad' - bc' + 2 alpha ab + beta (ad + bc) + 2 gamma cd``
    * ``1``:   ``b'd - bd' + alpha b^2 + beta bd + gamma d^2``

    all divided by ``ad - bc``.

    Examples
    --------
    >>> R = RiccatiEq(2, 0, 1)
    >>> S = gauge_apply(R, MoebiusGauge.scaling(0.5))
    >>> [complex(c.constant_value()) for c in S.coefficients]
    [(1+0j), 0j, (2+0j)]
    """
    a, b, c, d = G.a, G.b, G.c, G.d
    det = G.det
    if det.is_zero():
        raise DegenerateGauge("gauge determinant vanishes identically")
    al, be, ga = R.alpha, R.beta, R.gamma
    da, db, dc, dd = (rf_derivative(f) for f in (a, b, c, d))
    A = da * c - a * dc + al * a * a + be * a * c + ga * c * c
    B = da * d + db * c - a * dd - b * dc + 2 * al * a * b + be * (a * d + b * c) + 2 * ga * c * d
    C = db * d - b * dd + al * b * b + be * b * d + ga * d * d
    return RiccatiEq(A / det, B / det, C / det, R.chart)


def oper_normal_form(R: RiccatiEq, section=None) -> OperChartForm:
    """The unique ``q`` with ``R`` gauge equivalent to ``dy + (y^2 + q/2)dx = 0``.

    ``section`` is ``None``/``INF`` for ``{y = inf}`` or a rational function
    ``phi`` for the graph ``{y = phi(x)}``.  The section is first moved to
    infinity, then the quadratic coefficient is scaled to 1 and the linear one
    is removed by a translation; with ``alpha = 1`` the result is
    ``q = 2 gamma - beta^2/2 - beta'``.
    """
    G = MoebiusGauge.identity()
    if section is not None and not (isinstance(section, str) and is_inf(section)):
        G = MoebiusGauge(_RF(section), ONE, ONE, ZERO)  # y = phi + 1/Y
        R = gauge_apply(R, G)
    if R.alpha.is_zero():
        raise SectionInvariant("the section is a leaf of the foliation")
    S = MoebiusGauge.scaling(1 / R.alpha)
    R1 = gauge_apply(R, S)
    T = MoebiusGauge.translation(-0.5 * R1.beta)
    q = 2 * R1.gamma - 0.5 * R1.beta * R1.beta - rf_derivative(R1.beta)
    return OperChartForm(q, G.then(S).then(T))


def elem_gauge(center) -> MoebiusGauge:
    """Gauge of the elementary transformation centered at ``(x0, y0)``.

    ``y0 = INF`` (on the section) gives ``y = Y/(x - x0)``; finite ``y0`` gives
    ``y = y0 + (x - x0) Y``, which keeps the section ``{y = inf}``.
    """
    x0, y0 = center
    if is_inf(as_point(x0)):
        raise ValueError("center must lie over a finite chart point")
    u = X - complex(x0)
    if is_inf(as_point(y0)):
        return MoebiusGauge(ONE, ZERO, ZERO, u)
    return MoebiusGauge(u, RationalFunction.const(complex(y0)), ZERO, ONE)


def elem_transform(R: RiccatiEq, center) -> ElemTransform:
    """One elementary transformation; reports the change of ``sigma . sigma``.

    The center on the section (``y0 = INF``) lowers the self-intersection by
    one, any other center raises it by one.
    """
    G = elem_gauge(center)
    on_section = is_inf(as_point(center[1]))
    return ElemTransform(gauge_apply(R, G), (as_point(center[0]), as_point(center[1])), -1 if on_section else 1, G)


# ------------------------------------------------------------ pole orders ----

def _order(f: RationalFunction, p) -> int:
    if f.is_zero():
        return 0
    return max(0, -rf_expand(f, p, 0, strict=False).min_order)


def _local(R: RiccatiEq, p):
    """Chart and local point for ``p`` (``INF`` goes to ``t = 0``)."""
    p = as_point(p)
    if is_inf(p):
        return (R.to_infinity_chart() if R.chart == "finite" else R), 0j
    return R, p


def riccati_pole_order(R: RiccatiEq, p) -> int:
    """Pole order at ``p`` of the 1-form part of ``R`` (``dy`` coefficient 1)."""
    R, p = _local(R, p)
    return max(_order(c, p) for c in R.coefficients)


def fiber_singular_points(R: RiccatiEq, p) -> list:
    """Singular points of the foliation on the fiber over a pole ``p``.

    They are the roots of ``a y^2 + b y + c`` where ``a, b, c`` are the
    coefficients of ``x^{-m}`` (``m`` the pole order); ``INF`` is included when
    the quadratic coefficient drops.
    """
    R, p = _local(R, p)
    m = riccati_pole_order(R, p)
    if m == 0:
        return []
    lead = [rf_expand(c, p, -m, strict=False).coeff(-m) if not c.is_zero() else 0j for c in R.coefficients]
    a, b, c = lead
    scale = max(abs(a), abs(b), abs(c))
    if abs(a) <= 1e-12 * scale:
        pts = [INF]
        if abs(b) > 1e-12 * scale:
            pts.append(-c / b)
        return pts
    return [complex(r) for r in np.roots([a, b, c])]


def minimize_pole_order(q, p, max_steps: int = 64):
    """Minimal Riccati pole order over a pole of order ``n`` of ``(q/2) dx^2``.

    Starting from the normal form, elementary transformations are applied at
    ``(p, inf)`` (the unique singular point of the invariant fiber) while they
    strictly decrease the pole order.  The pulled-back equation after ``k``
    steps is ``d y~ + (x^{-k} y~^2 - (k/x) y~ + x^k q/2) dx``, so the order is
    ``max(k, 1, n - k)`` and the minimum ``ceil(n/2)`` is reached.

    Returns ``(R, m, gauge_log)``; at ``p = INF`` the equation is written in
    ``t = 1/x`` and centers are at ``t = 0``.
    """
    q = _RF(q)
    p = as_point(p)
    n = pole_order_at(q, p)
    if n < 1:
        raise NotAPole(f"{p!r} is not a pole of the differential")
    if is_inf(p):
        R, x0 = RiccatiEq.oper(q_at_infinity(q), "inf"), 0j
    else:
        R, x0 = RiccatiEq.oper(q), p
    m = riccati_pole_order(R, x0)
    log = []
    for _ in range(max_steps):
        E = elem_transform(R, (x0, INF))
        m_new = riccati_pole_order(E.riccati, x0)
        if m_new >= m:
            break
        R, m = E.riccati, m_new
        log.append(E.log_entry())
    return R, m, log


def _transverse(R: RiccatiEq, p) -> bool:
    """Is ``{Y = 0}`` transverse to ``R`` over ``p``?

    After multiplying by the minimal power clearing all poles, the
    ``dx``-component at ``Y = 0`` is the leading term of ``gamma``; transverse
    exactly when ``gamma`` has the maximal pole order (nonvanishing if 0).
    """
    m = max(_order(c, p) for c in R.coefficients)
    g = R.gamma
    if g.is_zero():
        return False
    v = rf_expand(g, p, 0, strict=False)
    return (-v.min_order if not v.is_zero() else -(v.trunc_order + 1)) == m


def restore_transversality(R: RiccatiEq, p, max_steps: int = 64):
    """Make the section ``{y = inf}`` transverse to ``R`` over ``p``.

    Apply ``Y = 1/y`` so the section is ``{Y = 0}``, then elementary
    transformations ``Y = (x - p) Y~`` until the section is transverse.  For
    the normal form with a pole of order ``n`` this takes ``(n+1)/2`` steps
    for odd ``n`` and ``n/2`` for even ``n``.  Returns ``(R', l)`` with the
    section ``{Y~ = 0}`` of ``R'``.
    """
    R, x0 = _local(R, p)
    R = gauge_apply(R, MoebiusGauge.inversion())
    if _transverse(R, x0):
        raise AlreadyTransverse(f"the section is already transverse over {p!r}")
    G = MoebiusGauge.scaling(X - x0)
    for l in range(1, max_steps + 1):
        R = gauge_apply(R, G)
        if _transverse(R, x0):
            return R, l
    raise AlreadyTransverse(f"no transverse model within {max_steps} steps")  # pragma: no cover


# ------------------------------------------------------ self-intersection ----

def self_intersection(g: int, D_degree: int) -> int:
    """``sigma . sigma = 2 - 2g - deg(D)`` for a transverse section."""
    if g < 0 or D_degree < 0:
        raise ValueError("genus and divisor degree must be nonnegative")
    return 2 - 2 * int(g) - int(D_degree)


def self_intersection_nonnegative(g: int, D_degree: int) -> bool:
    """The four exceptional cases ``(0, 0..2)`` and ``(1, 0)``."""
    return self_intersection(g, D_degree) >= 0


def minimal_riccati_order(n: int) -> int:
    """``ceil(n/2)``."""
    return math.ceil(int(n) / 2)


# ---------------------------------------------------- apparent singularity ----

def is_apparent(P, p, tol: float = 1e-7, base=None) -> bool:
    """Is ``p`` a regular singularity with trivial projective local monodromy?

    The local monodromy of the companion system is computed numerically and
    normalized to determinant one; the singularity is apparent when it lies
    within ``tol`` of ``+I`` or ``-I``.
    """
    from .linsys import companion_system
    from .monodromy import local_monodromy

    q = P.q if isinstance(P, QuadraticDifferential) else _RF(P)
    p = as_point(p)
    n = pole_order_at(q, p) if not q.is_zero() else 0
    if n == 0 or n > 2:
        raise NotRegularSingular(f"{p!r} is not a regular singular point (order {n})")
    residue_and_index(q, p)  # validates the pole
    M = local_monodromy(companion_system(q), p, base=base)
    M = M / np.sqrt(np.linalg.det(M))
    I = np.eye(2)
    return min(np.abs(M - I).max(), np.abs(M + I).max()) < tol
