"""Rank-2 meromorphic systems ``dY + Omega Y dx = 0`` on P^1.

The bundle is modelled as ``O(a) + O(b)`` with the frame at infinity
``Y_fin = diag(x^a, x^b) Y_inf``, so ``deg E = a + b``.  The default is the
trivial bundle.  Only this integer pair is stored; no other global data.

Projectivization uses the affine fiber coordinate ``y = y2 / y1`` (the
logarithmic derivative of ``y1`` for a companion system).  With this choice
the section ``{y = inf}`` is the line subbundle spanned by ``(0, 1)``, the
companion system of ``q`` projectivizes exactly to the normal form
``dy + (y^2 + q/2) dx = 0``, and projectivization is covariant under gauge
transformations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import (
    INF,
    ONE,
    ZERO,
    RationalFunction,
    X,
    as_point,
    is_inf,
    rf_compose,
    rf_derivative,
    rf_det,
    rf_expand,
    rf_matderiv,
    rf_matinv,
    rf_matmul,
    rf_matrix,
    rf_matrix_from_json,
    rf_matrix_to_json,
    LaurentMatrix,
)
from .errors import DegenerateGauge, SingularLeadingTerm
from .projective import PROBES, finite_poles
from .riccati import MoebiusGauge, RiccatiEq

_RF = RationalFunction.coerce


@dataclass(frozen=True)
class LinearSystem:
    """``dY + omega Y dx = 0`` in the finite chart, bundle ``O(a) + O(b)``."""

    omega: tuple
    degrees: tuple = (0, 0)

    def __post_init__(self):
        M = rf_matrix(self.omega)
        object.__setattr__(self, "omega", tuple(tuple(r) for r in M))
        object.__setattr__(self, "degrees", (int(self.degrees[0]), int(self.degrees[1])))

    @property
    def degE(self) -> int:
        return self.degrees[0] + self.degrees[1]

    def entry(self, i: int, j: int) -> RationalFunction:
        return self.omega[i][j]

    def matrix(self) -> list:
        return [list(r) for r in self.omega]

    def trace(self) -> RationalFunction:
        return self.omega[0][0] + self.omega[1][1]

    def __call__(self, x) -> np.ndarray:
        """Numeric ``Omega(x)`` (shape ``(2, 2)`` or ``(..., 2, 2)``)."""
        x = np.asarray(x, dtype=complex)
        out = np.empty(x.shape + (2, 2), dtype=complex)
        for i in range(2):
            for j in range(2):
                out[..., i, j] = self.omega[i][j](x)
        return out

    def poles(self) -> list:
        """Finite poles of the entries (union, with the maximal order)."""
        found = []
        for i in range(2):
            for j in range(2):
                for p, n in finite_poles(self.omega[i][j]):
                    for k, (r, m) in enumerate(found):
                        if abs(r - p) < 1e-9 * (1 + abs(p)):
                            found[k] = (r, max(m, n))
                            break
                    else:
                        found.append((p, n))
        found.sort(key=lambda e: (round(e[0].real, 9), round(e[0].imag, 9)))
        return found

    def omega_at_infinity(self) -> list:
        """Connection matrix in ``t = 1/x`` and the frame at infinity.

        ``Omega_inf(t) = T^{-1} Omega(1/t) T (-1/t^2) + T^{-1} dT/dt`` with
        ``T = diag(t^{-a}, t^{-b})``.
        """
        t = X
        a, b = self.degrees
        w = -1 / (t * t)
        M = [[rf_compose(self.omega[i][j], 1 / t) * w for j in range(2)] for i in range(2)]
        # conjugation by T multiplies entry (i, j) by t^{d_i - d_j}
        d = (a, b)
        out = [[M[i][j] * t ** (d[i] - d[j]) if d[i] >= d[j] else M[i][j] / t ** (d[j] - d[i]) for j in range(2)] for i in range(2)]
        out[0][0] = out[0][0] - a / t
        out[1][1] = out[1][1] - b / t
        return out

    def local_matrix(self, p, N: int) -> LaurentMatrix:
        """Laurent expansion of the connection matrix at ``p`` (``t = 1/x`` at infinity)."""
        p = as_point(p)
        if is_inf(p):
            return LaurentMatrix.from_rf_matrix(self.omega_at_infinity(), 0j, N)
        return LaurentMatrix.from_rf_matrix(self.matrix(), p, N)

    def pole_order_at(self, p) -> int:
        p = as_point(p)
        M = self.omega_at_infinity() if is_inf(p) else self.matrix()
        at = 0j if is_inf(p) else p
        orders = [0]
        for i in range(2):
            for j in range(2):
                f = M[i][j]
                if not f.is_zero():
                    orders.append(-rf_expand(f, at, 0, strict=False).min_order)
        return max(0, max(orders))

    def to_json(self) -> dict:
        out = {"omega": rf_matrix_to_json(self.matrix())}
        if self.degrees != (0, 0):
            out["degrees"] = list(self.degrees)
        return out

    @classmethod
    def from_json(cls, obj) -> "LinearSystem":
        return cls(rf_matrix_from_json(obj["omega"]), tuple(obj.get("degrees", (0, 0))))


@dataclass(frozen=True)
class TraceData:
    delta: RationalFunction
    residues: tuple
    degE: int

    @property
    def residual(self) -> float:
        return abs(sum(r for _, r in self.residues) + self.degE)

    def to_json(self) -> dict:
        from .algebra import cx_to_json, point_to_json

        return {
            "delta": self.delta.to_json(),
            "residues": [{"point": point_to_json(p), "residue": cx_to_json(r)} for p, r in self.residues],
            "degE": self.degE,
        }


# --------------------------------------------------------------- builders ----

def companion_system(q) -> LinearSystem:
    """``Omega = [[0, -1], [q/2, 0]]`` for ``y'' + (q/2) y = 0``."""
    q = _RF(q)
    return LinearSystem(((ZERO, -ONE), (q * 0.5, ZERO)))


def gauge_apply_linear(S: LinearSystem, G, degrees=None) -> LinearSystem:
    """``Omega~ = G^{-1} Omega G + G^{-1} dG`` for ``Y = G Y~``."""
    G = rf_matrix(G)
    if rf_det(G).is_zero():
        raise DegenerateGauge("gauge matrix is singular")
    Gi = rf_matinv(G)
    A = rf_matmul(rf_matmul(Gi, S.matrix()), G)
    B = rf_matmul(Gi, rf_matderiv(G))
    return LinearSystem(tuple(tuple(A[i][j] + B[i][j] for j in range(2)) for i in range(2)), degrees or S.degrees)


def moebius_image(G) -> MoebiusGauge:
    """The fiber map induced by ``Y = G Y~`` on ``y = y2/y1``."""
    G = rf_matrix(G)
    return MoebiusGauge(G[1][1], G[1][0], G[0][1], G[0][0])


def lift_riccati(R: RiccatiEq, delta=ZERO, degrees=(0, 0)) -> LinearSystem:
    """Rank-2 lift with trace ``delta`` and projectivization ``R``.

    ``Omega = [[(delta - beta)/2, -alpha], [gamma, (delta + beta)/2]]``.
    """
    delta = _RF(delta)
    a, b, c = R.alpha, R.beta, R.gamma
    return LinearSystem((((delta - b) * 0.5, -a), (c, (delta + b) * 0.5)), degrees)


def projectivize(S: LinearSystem) -> RiccatiEq:
    """Riccati equation of ``y = y2/y1``: ``dy + (-w12 y^2 + (w22 - w11) y + w21) dx = 0``."""
    w = S.omega
    return RiccatiEq(-w[0][1], w[1][1] - w[0][0], w[1][0])


def twist(S: LinearSystem, omega) -> LinearSystem:
    """``Omega + omega I`` (tensor with the rank-one ``d + omega``)."""
    omega = _RF(omega)
    w = S.omega
    return LinearSystem(((w[0][0] + omega, w[0][1]), (w[1][0], w[1][1] + omega)), S.degrees)


# ------------------------------------------------------------------ Fuchs ----

def trace_data(S: LinearSystem) -> TraceData:
    """Residues of the trace 1-form at all its poles on P^1.

    Finite residues come from the finite chart; the residue at infinity is
    taken from the trace of :meth:`LinearSystem.omega_at_infinity`, which
    contains the transition term ``-(a + b)/t``.
    """
    delta = S.trace()
    res = []
    for p, _ in finite_poles(delta):
        res.append((p, rf_expand(delta, p, -1, strict=False).coeff(-1)))
    Mi = S.omega_at_infinity()
    d_inf = Mi[0][0] + Mi[1][1]
    if not d_inf.is_zero():
        s = rf_expand(d_inf, 0j, -1, strict=False)
        if s.min_order <= -1 and s.coeff(-1) != 0:
            res.append((INF, s.coeff(-1)))
    return TraceData(delta, tuple(res), S.degE)


def check_fuchs(S: LinearSystem, degE: int) -> float:
    """``|sum_p res_p tr(Omega) + degE|`` over all poles including infinity.

    On P^1 the residue theorem forces the sum to equal ``-(a + b)`` for the
    bundle model ``O(a) + O(b)``; the check therefore validates the asserted
    ``degE`` against the system's frame at infinity.
    """
    td = trace_data(S)
    return float(abs(sum(r for _, r in td.residues) + degE))


def lift_parity_check(D_degree: int, g: int = 0) -> dict:
    """Which trace connections can lift an oper with polar divisor of the given degree."""
    even = int(D_degree) % 2 == 0
    return {"trace_free_ok": even, "odd_trace_needed": not even}


def odd_trace(p) -> RationalFunction:
    """Trace ``-dx/(x - p)`` with one simple pole of residue -1 (to be used with ``degrees=(1, 0)``)."""
    p = as_point(p)
    if is_inf(p):
        raise ValueError("designate a finite pole; move it by a Moebius change of coordinate first")
    return -1 / (X - p)


def oper_lift(q, odd_pole=None) -> LinearSystem:
    """Lift of the normal form with minimal trace data.

    Without ``odd_pole`` the lift is the trace-free companion system.  With
    ``odd_pole = p`` the trace is ``-dx/(x - p)`` on ``O(1) + O(0)``, which
    satisfies the Fuchs relation with ``deg E = 1``.
    """
    R = RiccatiEq.oper(q)
    if odd_pole is None:
        return lift_riccati(R)
    return lift_riccati(R, odd_trace(odd_pole), degrees=(1, 0))


def probe_residual_systems(S1: LinearSystem, S2: LinearSystem, probes=PROBES) -> float:
    z = np.asarray(probes, dtype=complex)
    A, B = S1(z), S2(z)
    ok = np.all(np.isfinite(A), axis=(-1, -2)) & np.all(np.isfinite(B), axis=(-1, -2))
    d = np.abs(A - B)[ok].max(axis=(-1, -2))
    s = 1 + np.abs(A)[ok].max(axis=(-1, -2)) + np.abs(B)[ok].max(axis=(-1, -2))
    return float((d / s).max()) if d.size else 0.0
