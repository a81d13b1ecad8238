"""Adaptive Dormand-Prince 5(4) transport of ``dY/dt = -A(t) Y`` along paths.

Paths are chains of straight segments and circular arcs parametrized by
``s in [0, 1]``.  The solution matrix is renormalized by a QR factorization
every ``renorm_every`` accepted steps; the triangular factors are accumulated
and multiplied back at the end, which keeps the columns well separated near
irregular points.

``dtype`` may be ``np.complex128`` (default) or ``np.clongdouble`` for the
extended-precision runs; the path geometry, the Butcher tableau and the
coefficient evaluation follow the requested precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction as Fr

import numpy as np

from .errors import ToleranceNotMet

_C = [Fr(0), Fr(1, 5), Fr(3, 10), Fr(4, 5), Fr(8, 9), Fr(1), Fr(1)]
_A = [
    [],
    [Fr(1, 5)],
    [Fr(3, 40), Fr(9, 40)],
    [Fr(44, 45), Fr(-56, 15), Fr(32, 9)],
    [Fr(19372, 6561), Fr(-25360, 2187), Fr(64448, 6561), Fr(-212, 729)],
    [Fr(9017, 3168), Fr(-355, 33), Fr(46732, 5247), Fr(49, 176), Fr(-5103, 18656)],
    [Fr(35, 384), Fr(0), Fr(500, 1113), Fr(125, 192), Fr(-2187, 6784), Fr(11, 84)],
]
_B5 = [Fr(35, 384), Fr(0), Fr(500, 1113), Fr(125, 192), Fr(-2187, 6784), Fr(11, 84), Fr(0)]
_B4 = [Fr(5179, 57600), Fr(0), Fr(7571, 16695), Fr(393, 640), Fr(-92097, 339200), Fr(187, 2100), Fr(1, 40)]


def _real_type(dtype):
    return np.longdouble if np.dtype(dtype) == np.dtype(np.clongdouble) else np.float64


def _tableau(dtype):
    R = _real_type(dtype)
    cv = lambda f: R(f.numerator) / R(f.denominator)
    return ([cv(c) for c in _C], [[cv(a) for a in row] for row in _A],
            [cv(b) for b in _B5], [cv(b5) - cv(b4) for b5, b4 in zip(_B5, _B4)])


def two_pi(dtype=np.complex128):
    R = _real_type(dtype)
    return R(8) * np.arctan(R(1))


# ----------------------------------------------------------------- paths ----

@dataclass(frozen=True)
class Line:
    a: complex
    b: complex

    def point(self, s, dtype):
        a, b = np.asarray(self.a, dtype), np.asarray(self.b, dtype)
        return a + s * (b - a), (b - a)

    @property
    def start(self):
        return complex(self.a)

    @property
    def end(self):
        return complex(self.b)

    def reversed(self):
        return Line(self.b, self.a)

    def length(self):
        return abs(self.b - self.a)

    def sample(self, n):
        s = np.linspace(0, 1, n)
        return self.a + s * (self.b - self.a)

    def to_json(self):
        return {"line": [[self.a.real, self.a.imag], [self.b.real, self.b.imag]]}


@dataclass(frozen=True)
class Arc:
    """``c + r exp(i theta)`` for ``theta`` from ``t0`` to ``t1``; angles in turns
    are avoided so that full loops close to working precision: ``t0``, ``t1``
    are given as multiples of ``2 pi`` (``turn0``, ``turn1``)."""

    center: complex
    radius: float
    turn0: float
    turn1: float

    def point(self, s, dtype):
        R = _real_type(dtype)
        tp = two_pi(dtype)
        th = (R(self.turn0) + s * (R(self.turn1) - R(self.turn0))) * tp
        e = np.exp(np.asarray(1j, dtype) * th)
        c = np.asarray(self.center, dtype)
        r = R(self.radius)
        return c + r * e, np.asarray(1j, dtype) * r * e * (R(self.turn1) - R(self.turn0)) * tp

    @property
    def start(self):
        return complex(self.center + self.radius * np.exp(2j * np.pi * self.turn0))

    @property
    def end(self):
        return complex(self.center + self.radius * np.exp(2j * np.pi * self.turn1))

    def reversed(self):
        return Arc(self.center, self.radius, self.turn1, self.turn0)

    def length(self):
        return abs(self.turn1 - self.turn0) * 2 * np.pi * self.radius

    def sample(self, n):
        th = 2 * np.pi * np.linspace(self.turn0, self.turn1, n)
        return self.center + self.radius * np.exp(1j * th)

    def to_json(self):
        return {"arc": {"center": [self.center.real, self.center.imag], "radius": self.radius,
                        "turns": [self.turn0, self.turn1]}}


def reverse_segments(segs):
    return [s.reversed() for s in reversed(segs)]


# ------------------------------------------------------------ integration ----

@dataclass
class TransportStats:
    steps: int = 0
    rejected: int = 0
    err_estimate: float = 0.0


def transport(A, segments, Y0=None, *, rtol=1e-12, atol=1e-14, dtype=np.complex128,
              renorm_every=50, max_steps=200000, stats: TransportStats | None = None,
              checkpoints=None, on_checkpoint=None):
    """Transport ``Y`` along the segments for ``dY/dt = -A(t) Y``.

    ``A(t)`` must return an array of shape ``(2, 2)`` in the requested dtype.
    ``Y0`` defaults to the identity.  Returns the final matrix (shape
    ``(2, k)``).  ``checkpoints`` maps a segment index to an increasing list of
    parameters ``s`` at which ``on_checkpoint(segment, s, Y)`` is called; its
    return value (if not None) replaces ``Y``.  Checkpoints disable the QR
    renormalization on that segment.
    """
    dtype = np.dtype(dtype)
    R = _real_type(dtype)
    c, a, b5, e = _tableau(dtype)
    Y = np.eye(2, dtype=dtype) if Y0 is None else np.array(Y0, dtype=dtype)
    acc = None  # accumulated triangular factor (Y_true = Y @ acc)
    st = stats if stats is not None else TransportStats()
    count = 0
    for si, seg in enumerate(segments):
        stops = list(checkpoints.get(si, [])) if checkpoints else []
        h = R(0.01)
        s = R(0)
        targets = [R(x) for x in stops] + [R(1)]
        for tgt in targets:
            while s < tgt:
                if st.steps > max_steps:
                    raise ToleranceNotMet("step budget exhausted")
                hh = min(h, tgt - s)
                k = []
                for i in range(7):
                    Yi = Y
                    for j in range(i):
                        if a[i][j] != 0:
                            Yi = Yi + hh * a[i][j] * k[j]
                    t, dt = seg.point(s + c[i] * hh, dtype)
                    k.append(-(A(t) * dt) @ Yi)
                Yn = Y + hh * sum(b5[i] * k[i] for i in range(6))
                err = hh * sum(e[i] * k[i] for i in range(7))
                sc = atol + rtol * np.maximum(np.abs(Y), np.abs(Yn)).max()
                en = float(np.abs(err).max() / sc)
                if not np.isfinite(en):
                    raise ToleranceNotMet("non-finite values during transport")
                if en <= 1.0:
                    s = s + hh
                    Y = Yn
                    st.steps += 1
                    st.err_estimate += en * rtol
                    count += 1
                    if renorm_every and count % renorm_every == 0 and not stops and Y.shape[1] == 2:
                        Q, Rm = _qr(Y)
                        Y = Q
                        acc = Rm if acc is None else Rm @ acc
                    fac = 0.9 * en ** (-0.2) if en > 0 else 5.0
                    h = hh * R(min(5.0, max(0.2, fac)))
                else:
                    st.rejected += 1
                    h = hh * R(max(0.1, 0.9 * en ** (-0.25)))
                    if h < R(1e-300):
                        raise ToleranceNotMet("step size underflow")
            if tgt < R(1) and on_checkpoint is not None:
                if acc is not None:
                    Y = Y @ acc
                    acc = None
                out = on_checkpoint(si, tgt, Y)
                if out is not None:
                    Y = np.array(out, dtype=dtype)
    if acc is not None:
        Y = Y @ acc
    return Y


def _qr(Y):
    if Y.dtype == np.dtype(np.clongdouble):
        # Gram-Schmidt in extended precision (numpy's QR is double only)
        q1 = Y[:, 0]
        r11 = np.sqrt((q1.conj() * q1).sum().real)
        q1 = q1 / r11
        r12 = (q1.conj() * Y[:, 1]).sum()
        v = Y[:, 1] - r12 * q1
        r22 = np.sqrt((v.conj() * v).sum().real)
        Q = np.stack([q1, v / r22], axis=1)
        Rm = np.array([[r11, r12], [0, r22]], dtype=Y.dtype)
        return Q, Rm
    return np.linalg.qr(Y)
