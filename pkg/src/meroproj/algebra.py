"""Rational functions in one variable and truncated Laurent series.

Coefficients are double precision complex numbers stored in ascending order.
A :class:`RationalFunction` is always kept in canonical form: trailing
(negligible) coefficients trimmed, common factors of numerator and denominator
removed by an approximate gcd, and the denominator made monic.

Points of the Riemann sphere are complex numbers or the string ``"inf"``.
Expansions at infinity use the local variable ``t = 1/x``.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import (
    DegreeOverflow,
    DivisionByZeroFunction,
    SingularLeadingTerm,
    TruncationTooSmall,
)

INF = "inf"

#: relative tolerance used by canonicalisation (trimming and gcd detection)
COEFF_TOL = 1e-12
#: relative cutoff below which a Laurent coefficient counts as zero
VALUATION_TOL = 1e-10
#: hard limit on numerator/denominator degrees
DEGREE_CAP = 256


# ---------------------------------------------------------------- points ----

def is_inf(p) -> bool:
    return isinstance(p, str) and p == INF


def as_point(p):
    """Normalise a point of P^1 given as a number, ``[re, im]`` or ``"inf"``."""
    if is_inf(p):
        return INF
    if isinstance(p, (list, tuple)) and len(p) == 2:
        return complex(float(p[0]), float(p[1]))
    z = complex(p)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"non-finite point {p!r}")
    return z


def point_to_json(p):
    if is_inf(p):
        return INF
    return cx_to_json(p)


def cx_to_json(z) -> list:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def cx_from_json(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ValueError(f"complex number must be [re, im], got {v!r}")
        z = complex(float(v[0]), float(v[1]))
    else:
        z = complex(v)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError("non-finite complex number")
    return z


def point_from_json(v):
    if is_inf(v):
        return INF
    return cx_from_json(v)


# ----------------------------------------------------------- polynomials ----

def _arr(c) -> np.ndarray:
    a = np.atleast_1d(np.asarray(c, dtype=complex)).ravel()
    if a.size == 0:
        a = np.zeros(1, dtype=complex)
    return a


def _trim(p: np.ndarray, scale=None, tol: float = COEFF_TOL) -> np.ndarray:
    """Zero coefficients that are cancellation noise and drop trailing zeros.

    ``scale`` is an elementwise magnitude bound on the terms that were summed to
    form each coefficient (for a product ``a*b`` it is ``|a|*|b|``).  A
    coefficient is set to zero when it is below ``tol`` times its own scale.
    Without a scale only exact zeros are dropped: small coefficients of exact
    data are legitimate.
    """
    p = np.array(p, dtype=complex)
    if scale is not None:
        sc = np.zeros(len(p))
        s_arr = np.atleast_1d(np.asarray(scale, dtype=float))
        if s_arr.size == 1:
            sc[:] = s_arr[0]
        else:
            n = min(len(p), len(s_arr))
            sc[:n] = s_arr[:n]
        p[np.abs(p) <= tol * sc] = 0
    nz = np.flatnonzero(p)
    if nz.size == 0:
        return np.zeros(1, dtype=complex)
    return p[: nz[-1] + 1]


def _deg(p: np.ndarray) -> int:
    return len(p) - 1


def _is_zero_poly(p: np.ndarray) -> bool:
    return len(p) == 1 and p[0] == 0


def _conv_matrix(p: np.ndarray, ncols: int) -> np.ndarray:
    m = np.zeros((len(p) + ncols - 1, ncols), dtype=complex)
    for j in range(ncols):
        m[j : j + len(p), j] = p
    return m


def _cofactors(num: np.ndarray, den: np.ndarray, tol: float):
    """Cofactors ``(u, v)`` of an approximate gcd: ``num/den == u/v``.

    The gcd degree ``k`` is the largest one for which the Sylvester-type map
    ``(v, u) -> num*v - den*u`` with ``deg v = deg den - k``,
    ``deg u = deg num - k`` has a numerically nontrivial kernel.  The kernel
    dimension is monotone in ``k``, so a bisection suffices.  Returns ``None``
    when the fraction is already reduced.
    """
    a, b = _deg(num), _deg(den)
    if a < 1 or b < 1:
        return None
    sn, sd = np.linalg.norm(num), np.linalg.norm(den)
    nn, dd = num / sn, den / sd

    def kernel(k):
        m = np.hstack([_conv_matrix(nn, b - k + 1), -_conv_matrix(dd, a - k + 1)])
        _, s, vh = np.linalg.svd(m)
        if s[-1] <= tol * s[0]:
            return vh[-1].conj()
        return None

    best = kernel(1)
    if best is None:
        return None
    lo, hi = 1, min(a, b)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        vec = kernel(mid)
        if vec is None:
            hi = mid - 1
        else:
            lo, best = mid, vec
    v = best[: b - lo + 1]
    u = best[b - lo + 1 :]
    refined = _refine_cofactors(nn, dd, u, v)
    if refined is None:
        return None
    u, v = refined
    return u * (sn / sd), v


def _refine_cofactors(num, den, u, v, iters: int = 3, accept: float = 1e-10):
    """Alternating least squares for ``num = g u``, ``den = g v``.

    Rejects the factorisation (returns ``None``) when the backward error stays
    above ``accept``; this guards against near-common factors being cancelled.
    """
    k = len(num) - len(u)
    for _ in range(iters):
        m = np.vstack([_conv_matrix(u, k + 1), _conv_matrix(v, k + 1)])
        g = np.linalg.lstsq(m, np.concatenate([num, den]), rcond=None)[0]
        u = np.linalg.lstsq(_conv_matrix(g, len(u)), num, rcond=None)[0]
        v = np.linalg.lstsq(_conv_matrix(g, len(v)), den, rcond=None)[0]
    err = np.linalg.norm(np.convolve(g, u) - num) + np.linalg.norm(np.convolve(g, v) - den)
    if err > accept:
        return None
    return u, v


def _taylor_shift(c: np.ndarray, p: complex) -> np.ndarray:
    """Coefficients of ``c(p + t)`` in ``t`` (repeated synthetic division)."""
    out = [complex(x) for x in c]
    n = len(out)
    if p == 0:
        return np.array(out, dtype=complex)
    for i in range(n - 1):
        for j in range(n - 2, i - 1, -1):
            out[j] += p * out[j + 1]
    return np.array(out, dtype=complex)


def _valuation(p: np.ndarray, tol: float = VALUATION_TOL) -> int | None:
    """Index of the first coefficient above ``tol`` relative to the largest one."""
    mag = np.abs(p)
    top = mag.max() if mag.size else 0.0
    if top == 0:
        return None
    idx = np.flatnonzero(mag > tol * top)
    return int(idx[0])


def _series_div(a: np.ndarray, b: np.ndarray, length: int) -> np.ndarray:
    """First ``length`` coefficients of the power series ``a/b`` (``b[0] != 0``)."""
    a = np.concatenate([a, np.zeros(max(0, length - len(a)), dtype=complex)])[:length]
    b = np.concatenate([b, np.zeros(max(0, length - len(b)), dtype=complex)])[:length]
    c = np.zeros(length, dtype=complex)
    b0 = b[0]
    for k in range(length):
        acc = a[k]
        if k:
            acc -= np.dot(b[1 : k + 1], c[k - 1 :: -1])
        c[k] = acc / b0
    return c


# ------------------------------------------------------ rational functions ----

class RationalFunction:
    """Immutable quotient ``num/den`` of complex polynomials in canonical form.

    Parameters
    ----------
    num, den : sequence of complex
        Ascending coefficient lists.
    canonical : bool
        Skip canonicalisation; only for internal callers that already hold a
        reduced pair.
    """

    __slots__ = ("_num", "_den")

    def __init__(self, num: Iterable = (0,), den: Iterable = (1,), *, canonical: bool = False, scale=None, den_scale=None):
        num, den = _arr(num), _arr(den)
        if not canonical:
            num, den = _canonical(num, den, scale, den_scale)
        num.setflags(write=False)
        den.setflags(write=False)
        self._num = num
        self._den = den

    # construction helpers
    @classmethod
    def const(cls, c) -> "RationalFunction":
        return cls([c])

    @classmethod
    def x(cls) -> "RationalFunction":
        return cls([0, 1])

    @classmethod
    def poly(cls, coeffs) -> "RationalFunction":
        return cls(coeffs)

    @classmethod
    def from_roots(cls, zeros=(), poles=(), scale=1.0) -> "RationalFunction":
        """``scale * prod(x - z) / prod(x - p)``; repeated entries give multiplicities."""
        num = npoly.polyfromroots(list(zeros)) if len(zeros) else np.ones(1)
        den = npoly.polyfromroots(list(poles)) if len(poles) else np.ones(1)
        return cls(np.asarray(num, complex) * scale, den)

    @classmethod
    def coerce(cls, f) -> "RationalFunction":
        if isinstance(f, RationalFunction):
            return f
        return cls.const(complex(f))

    # data
    @property
    def num(self) -> np.ndarray:
        return self._num

    @property
    def den(self) -> np.ndarray:
        return self._den

    @property
    def degree(self) -> int:
        return max(_deg(self._num), _deg(self._den))

    def is_zero(self) -> bool:
        return _is_zero_poly(self._num)

    def is_constant(self) -> bool:
        return _deg(self._num) == 0 and _deg(self._den) == 0

    def is_polynomial(self) -> bool:
        return _deg(self._den) == 0

    def constant_value(self) -> complex:
        if not self.is_constant():
            raise ValueError("not a constant function")
        return complex(self._num[0] / self._den[0])

    # evaluation
    def __call__(self, x):
        x = np.asarray(x)
        return npoly.polyval(x, self._num) / npoly.polyval(x, self._den)

    def eval_scaled(self, x):
        """Values of numerator and denominator separately."""
        return npoly.polyval(x, self._num), npoly.polyval(x, self._den)

    # arithmetic
    def __add__(self, other):
        other = RationalFunction.coerce(other)
        return _add(self, other, 1)

    __radd__ = __add__

    def __sub__(self, other):
        other = RationalFunction.coerce(other)
        return _add(self, other, -1)

    def __rsub__(self, other):
        return RationalFunction.coerce(other) - self

    def __neg__(self):
        return RationalFunction(-self._num, self._den, canonical=True)

    def __mul__(self, other):
        if not isinstance(other, RationalFunction):
            c = complex(other)
            if c == 0:
                return ZERO
            return RationalFunction(self._num * c, self._den, canonical=True)
        return _product(self._num, self._den, other._num, other._den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = RationalFunction.coerce(other)
        if other.is_zero():
            raise DivisionByZeroFunction("division by the zero function")
        return _product(self._num, self._den, other._den, other._num)

    def __rtruediv__(self, other):
        return RationalFunction.coerce(other) / self

    def __pow__(self, k: int):
        k = int(k)
        if k < 0:
            return RationalFunction.const(1) / (self ** (-k))
        out = ONE
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def derivative(self) -> "RationalFunction":
        return rf_derivative(self)

    def compose(self, g: "RationalFunction") -> "RationalFunction":
        """``self(g(x))``."""
        return rf_compose(self, g)

    def expand(self, p, N: int, strict: bool = True) -> "LaurentSeries":
        return rf_expand(self, p, N, strict=strict)

    def allclose(self, other, tol: float = 1e-9) -> bool:
        """Equality up to a relative tolerance, via cross multiplication."""
        other = RationalFunction.coerce(other)
        lhs = np.convolve(self._num, other._den)
        rhs = np.convolve(other._num, self._den)
        n = max(len(lhs), len(rhs))
        lhs = np.pad(lhs, (0, n - len(lhs)))
        rhs = np.pad(rhs, (0, n - len(rhs)))
        scale = max(np.abs(lhs).max(), np.abs(rhs).max(), 1e-300)
        return bool(np.abs(lhs - rhs).max() <= tol * scale)

    def __eq__(self, other):
        if not isinstance(other, (RationalFunction, int, float, complex)):
            return NotImplemented
        return self.allclose(other, tol=1e-10)

    __hash__ = None

    def __repr__(self):
        return f"RationalFunction(num={_fmt(self._num)}, den={_fmt(self._den)})"

    # JSON
    def to_json(self) -> dict:
        return {"num": [cx_to_json(c) for c in self._num], "den": [cx_to_json(c) for c in self._den]}

    @classmethod
    def from_json(cls, obj) -> "RationalFunction":
        if isinstance(obj, (int, float)):
            return cls.const(obj)
        if isinstance(obj, list) and len(obj) == 2 and all(isinstance(v, (int, float)) for v in obj):
            return cls.const(cx_from_json(obj))
        if not isinstance(obj, dict) or "num" not in obj:
            raise ValueError("rational function must be {'num': [...], 'den': [...]}")
        num = [cx_from_json(c) for c in obj["num"]]
        den = [cx_from_json(c) for c in obj.get("den", [[1.0, 0.0]])]
        if not num:
            num = [0]
        if not den or all(d == 0 for d in den):
            raise DivisionByZeroFunction("denominator is identically zero")
        return cls(num, den)


def _absconv(a, b):
    return np.convolve(np.abs(a), np.abs(b))


def _fmt(a):
    return "[" + ", ".join(f"{c.real:.6g}{c.imag:+.6g}j" for c in a) + "]"


def _canonical(num: np.ndarray, den: np.ndarray, scale=None, den_scale=None):
    den = _trim(den, den_scale)
    if _is_zero_poly(den):
        raise DivisionByZeroFunction("denominator is identically zero")
    num = _trim(num, scale)
    if _is_zero_poly(num):
        return np.zeros(1, dtype=complex), np.ones(1, dtype=complex)
    # exact common powers of x first
    lead = min(np.flatnonzero(num)[0], np.flatnonzero(den)[0])
    if lead:
        num, den = num[lead:], den[lead:]
    red = _cofactors(num, den, COEFF_TOL)
    if red is not None:
        num, den = _trim(red[0]), _trim(red[1])
    if max(_deg(num), _deg(den)) > DEGREE_CAP:
        raise DegreeOverflow(f"degree {max(_deg(num), _deg(den))} exceeds cap {DEGREE_CAP}")
    lc = den[-1]
    return num / lc, den / lc


def _linear_root(p: np.ndarray):
    return -p[0] / p[1] if len(p) == 2 and p[1] != 0 else None


def _deflate(p: np.ndarray, r: complex, tol: float = COEFF_TOL):
    """Quotient of ``p`` by ``x - r`` when ``r`` is a root to working precision, else None."""
    if len(p) < 2:
        return None
    out = np.zeros(len(p) - 1, dtype=complex)
    acc = 0j
    for k in range(len(p) - 1, 0, -1):
        acc = p[k] + acc * r
        out[k - 1] = acc
    rem = p[0] + acc * r
    size = float(np.dot(np.abs(p), np.abs(r) ** np.arange(len(p))))
    return out if abs(rem) <= tol * size else None


def _product(n1, d1, n2, d2) -> RationalFunction:
    """``(n1/d1) (n2/d2)``; a linear factor cancels by synthetic division at its exact root.

    The generic approximate gcd recovers a factor of a multiple root only to
    about ``1e-10``; the known root of a linear factor does much better.
    """
    for a, b in ((n2, d1), (n1, d2)):
        r = _linear_root(a)
        if r is not None:
            q = _deflate(b, r)
            if q is not None:
                if b is d1:
                    n2, d1 = np.array([a[1]]), q
                else:
                    n1, d2 = np.array([a[1]]), q
    for a, b in ((d2, n1), (d1, n2)):
        r = _linear_root(a)
        if r is not None:
            q = _deflate(b, r)
            if q is not None:
                if b is n1:
                    d2, n1 = np.array([a[1]]), q
                else:
                    d1, n2 = np.array([a[1]]), q
    return RationalFunction(np.convolve(n1, n2), np.convolve(d1, d2), scale=_absconv(n1, n2),
                            den_scale=_absconv(d1, d2))


def _add(f: RationalFunction, g: RationalFunction, sign: int) -> RationalFunction:
    if len(f.den) == len(g.den) and np.array_equal(f.den, g.den):
        n = max(len(f.num), len(g.num))
        a = np.pad(f.num, (0, n - len(f.num)))
        b = np.pad(g.num, (0, n - len(g.num)))
        return RationalFunction(a + sign * b, f.den, scale=np.abs(a) + np.abs(b))
    a = np.convolve(f.num, g.den)
    b = np.convolve(g.num, f.den)
    sa = np.convolve(np.abs(f.num), np.abs(g.den))
    sb = np.convolve(np.abs(g.num), np.abs(f.den))
    n = max(len(a), len(b))
    pad = lambda v: np.pad(v, (0, n - len(v)))  # noqa: E731
    return RationalFunction(pad(a) + sign * pad(b), np.convolve(f.den, g.den), scale=pad(sa) + pad(sb), den_scale=_absconv(f.den, g.den))


ZERO = RationalFunction([0], [1], canonical=True)
ONE = RationalFunction([1], [1], canonical=True)
X = RationalFunction([0, 1], [1], canonical=True)


def rf_arith(a: RationalFunction, b: RationalFunction, op: str) -> RationalFunction:
    """Binary arithmetic ``op`` in {add, sub, mul, div} with a canonical result."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown op {op!r}")


def rf_derivative(f: RationalFunction) -> RationalFunction:
    """Quotient rule ``(n'd - nd')/d^2``."""
    n, d = f.num, f.den
    dn = npoly.polyder(n) if len(n) > 1 else np.zeros(1, complex)
    dd = npoly.polyder(d) if len(d) > 1 else np.zeros(1, complex)
    if _deg(d) == 0:
        return RationalFunction(dn / d[0])
    a = np.convolve(dn, d)
    b = np.convolve(n, dd)
    m = max(len(a), len(b))
    pad = lambda v: np.pad(v, (0, m - len(v)))  # noqa: E731
    scale = pad(np.convolve(np.abs(dn), np.abs(d))) + pad(np.convolve(np.abs(n), np.abs(dd)))
    return RationalFunction(pad(a) - pad(b), np.convolve(d, d), scale=scale, den_scale=_absconv(d, d))


def rf_compose(f: RationalFunction, g: RationalFunction) -> RationalFunction:
    """``f(g(x))`` by homogenising ``f`` in the numerator/denominator of ``g``."""
    d = f.degree
    a, b = g.num, g.den
    apow, bpow = [np.ones(1, complex)], [np.ones(1, complex)]
    amag, bmag = [np.ones(1)], [np.ones(1)]
    for _ in range(d):
        apow.append(np.convolve(apow[-1], a))
        bpow.append(np.convolve(bpow[-1], b))
        amag.append(np.convolve(amag[-1], np.abs(a)))
        bmag.append(np.convolve(bmag[-1], np.abs(b)))

    def hom(p):
        out = np.zeros(1, complex)
        mag = np.zeros(1)
        for i, c in enumerate(p):
            term = c * np.convolve(apow[i], bpow[d - i])
            tmag = abs(c) * np.convolve(amag[i], bmag[d - i])
            if len(term) > len(out):
                out = np.pad(out, (0, len(term) - len(out)))
                mag = np.pad(mag, (0, len(term) - len(mag)))
            out[: len(term)] += term
            mag[: len(term)] += tmag
        return out, mag

    num, nmag = hom(f.num)
    den, dmag = hom(f.den)
    return RationalFunction(num, den, scale=nmag, den_scale=dmag)


# --------------------------------------------------------- Laurent series ----

class LaurentSeries:
    """Truncated Laurent series ``sum_{k=v}^{N} c_k t^k`` at a point of P^1.

    ``t`` is ``x - p`` at a finite point and ``1/x`` at infinity.  Terms of
    order above ``N`` are unknown, not zero.
    """

    __slots__ = ("base", "min_order", "coeffs")

    def __init__(self, base, min_order: int, coeffs):
        c = _arr(coeffs).copy()
        v = int(min_order)
        nz = np.flatnonzero(c)
        trunc = v + len(c) - 1
        if nz.size == 0:
            # identically zero up to truncation: keep the truncation order
            c = np.zeros(0, dtype=complex)
            v = trunc + 1
        elif nz[0] > 0:
            v += int(nz[0])
            c = c[nz[0] :]
        c.setflags(write=False)
        self.base = base
        self.min_order = v
        self.coeffs = c

    @classmethod
    def zero(cls, base, N: int) -> "LaurentSeries":
        return cls(base, N + 1, [])

    @property
    def trunc_order(self) -> int:
        return self.min_order + len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return len(self.coeffs) == 0

    def coeff(self, k: int) -> complex:
        if k > self.trunc_order:
            raise TruncationTooSmall(f"order {k} beyond truncation {self.trunc_order}")
        if k < self.min_order:
            return 0j
        return complex(self.coeffs[k - self.min_order])

    def dense(self, lo: int, hi: int) -> np.ndarray:
        """Coefficients for orders ``lo..hi`` (zeros below the valuation)."""
        if hi > self.trunc_order:
            raise TruncationTooSmall(f"order {hi} beyond truncation {self.trunc_order}")
        out = np.zeros(hi - lo + 1, dtype=complex)
        for k in range(max(lo, self.min_order), hi + 1):
            out[k - lo] = self.coeffs[k - self.min_order]
        return out

    def valuation(self, tol: float = VALUATION_TOL):
        if self.is_zero():
            return None
        v = _valuation(np.asarray(self.coeffs), tol)
        return None if v is None else self.min_order + v

    def truncate(self, N: int) -> "LaurentSeries":
        N = min(N, self.trunc_order)
        return LaurentSeries(self.base, self.min_order, self.coeffs[: max(0, N - self.min_order + 1)]) if N >= self.min_order else LaurentSeries.zero(self.base, N)

    def __add__(self, other):
        return _series_add(self, other, 1)

    def __sub__(self, other):
        return _series_add(self, other, -1)

    def __neg__(self):
        return LaurentSeries(self.base, self.min_order, -np.asarray(self.coeffs)) if not self.is_zero() else self

    def __mul__(self, other):
        if not isinstance(other, LaurentSeries):
            c = complex(other)
            return LaurentSeries(self.base, self.min_order, np.asarray(self.coeffs) * c) if not self.is_zero() else self
        N = min(self.trunc_order + other._vlow(), other.trunc_order + self._vlow())
        if self.is_zero() or other.is_zero():
            return LaurentSeries.zero(self.base, N)
        v = self.min_order + other.min_order
        L = N - v + 1
        if L <= 0:
            return LaurentSeries.zero(self.base, N)
        c = np.convolve(self.coeffs, other.coeffs)[:L]
        return LaurentSeries(self.base, v, c)

    __rmul__ = __mul__

    def _vlow(self):
        return self.min_order

    def inverse(self) -> "LaurentSeries":
        v = self.valuation()
        if v is None:
            raise SingularLeadingTerm("inverse of a series that vanishes to truncation order")
        N = self.trunc_order
        c = self.dense(v, N)
        L = N - v + 1
        return LaurentSeries(self.base, -v, _series_div(np.array([1.0 + 0j]), c, L))

    def derivative(self) -> "LaurentSeries":
        if self.is_zero():
            return LaurentSeries.zero(self.base, self.trunc_order - 1)
        k = np.arange(self.min_order, self.trunc_order + 1)
        return LaurentSeries(self.base, self.min_order - 1, np.asarray(self.coeffs) * k)

    def principal_part(self) -> dict:
        return {k: self.coeff(k) for k in range(self.min_order, 0)}

    def __call__(self, t):
        """Evaluate the truncated series (no remainder estimate)."""
        t = np.asarray(t, dtype=complex)
        k = np.arange(self.min_order, self.trunc_order + 1)
        if self.is_zero():
            return np.zeros_like(t)
        return np.sum(np.asarray(self.coeffs)[:, None] * t.ravel()[None, :] ** k[:, None], axis=0).reshape(t.shape)

    def to_json(self) -> dict:
        return {
            "base": point_to_json(self.base),
            "min_order": self.min_order,
            "trunc_order": self.trunc_order,
            "coeffs": [cx_to_json(c) for c in self.coeffs],
        }

    def __repr__(self):
        return f"LaurentSeries(base={self.base!r}, v={self.min_order}, N={self.trunc_order}, c={_fmt(self.coeffs)})"


def _series_add(a: LaurentSeries, b, sign):
    if not isinstance(b, LaurentSeries):
        b = LaurentSeries(a.base, 0, [complex(b)] + [0] * max(0, a.trunc_order))
    N = min(a.trunc_order, b.trunc_order)
    lo = min(a.min_order, b.min_order)
    if lo > N:
        return LaurentSeries.zero(a.base, N)
    return LaurentSeries(a.base, lo, a.dense(lo, N) + sign * b.dense(lo, N))


def rf_expand(f: RationalFunction, p, N: int, strict: bool = True) -> LaurentSeries:
    """Laurent expansion of ``f`` at ``p`` through order ``N``.

    The valuation is the reported ``min_order``.  With ``strict`` a valuation
    above ``N`` raises :class:`TruncationTooSmall`; otherwise a zero series
    with truncation ``N`` is returned.
    """
    p = as_point(p)
    if f.is_zero():
        return LaurentSeries.zero(p, N)
    if is_inf(p):
        P, Q = f.num[::-1].copy(), f.den[::-1].copy()
        shift = _deg(f.den) - _deg(f.num)
    else:
        P, Q = _taylor_shift(f.num, p), _taylor_shift(f.den, p)
        shift = 0
    a, b = _valuation(P), _valuation(Q)
    v = a - b + shift
    if v > N:
        if strict:
            raise TruncationTooSmall(f"valuation {v} exceeds requested order {N}")
        return LaurentSeries.zero(p, N)
    L = N - v + 1
    return LaurentSeries(p, v, _series_div(P[a:], Q[b:], L))


# --------------------------------------------------------- Laurent matrices ----

class LaurentMatrix:
    """2x2 matrix of truncated Laurent series with a shared base and truncation.

    Stored as an array ``coeffs[k - min_order]`` of 2x2 complex blocks for
    ``k = min_order .. trunc_order``.
    """

    __slots__ = ("base", "min_order", "coeffs")

    def __init__(self, base, min_order: int, coeffs):
        c = np.array(coeffs, dtype=complex).reshape(-1, 2, 2)
        c.setflags(write=False)
        self.base = base
        self.min_order = int(min_order)
        self.coeffs = c

    @classmethod
    def from_entries(cls, entries) -> "LaurentMatrix":
        flat = [entries[0][0], entries[0][1], entries[1][0], entries[1][1]]
        base = flat[0].base
        N = min(s.trunc_order for s in flat)
        v = min(s.min_order for s in flat)
        v = min(v, N + 1)
        out = np.zeros((N - v + 1, 2, 2), dtype=complex)
        for idx, s in enumerate(flat):
            if N >= v:
                out[:, idx // 2, idx % 2] = s.dense(v, N)
        return cls(base, v, out)

    @classmethod
    def from_rf_matrix(cls, M, p, N: int) -> "LaurentMatrix":
        return cls.from_entries([[rf_expand(RationalFunction.coerce(M[i][j]), p, N, strict=False) for j in range(2)] for i in range(2)])

    @classmethod
    def identity(cls, base, N: int) -> "LaurentMatrix":
        c = np.zeros((N + 1, 2, 2), dtype=complex)
        c[0] = np.eye(2)
        return cls(base, 0, c)

    @classmethod
    def constant(cls, base, A, N: int) -> "LaurentMatrix":
        c = np.zeros((N + 1, 2, 2), dtype=complex)
        c[0] = np.asarray(A, dtype=complex)
        return cls(base, 0, c)

    @property
    def trunc_order(self) -> int:
        return self.min_order + len(self.coeffs) - 1

    @property
    def entries(self):
        return [[self.entry(i, j) for j in range(2)] for i in range(2)]

    def entry(self, i: int, j: int) -> LaurentSeries:
        return LaurentSeries(self.base, self.min_order, self.coeffs[:, i, j])

    def coefficient(self, k: int) -> np.ndarray:
        if k > self.trunc_order:
            raise TruncationTooSmall(f"order {k} beyond truncation {self.trunc_order}")
        if k < self.min_order:
            return np.zeros((2, 2), dtype=complex)
        return np.array(self.coeffs[k - self.min_order])

    def block(self, lo: int, hi: int) -> np.ndarray:
        out = np.zeros((hi - lo + 1, 2, 2), dtype=complex)
        for k in range(lo, hi + 1):
            out[k - lo] = self.coefficient(k)
        return out

    def pole_order(self, tol: float = VALUATION_TOL) -> int:
        """``-valuation`` with a relative cutoff (0 when holomorphic)."""
        v = self.valuation(tol)
        return 0 if v is None else max(0, -v)

    def valuation(self, tol: float = VALUATION_TOL):
        mags = np.abs(self.coeffs).reshape(len(self.coeffs), -1).max(axis=1) if len(self.coeffs) else np.zeros(0)
        top = mags.max() if mags.size else 0.0
        if top == 0:
            return None
        idx = np.flatnonzero(mags > tol * top)
        return self.min_order + int(idx[0])

    def truncate(self, N: int) -> "LaurentMatrix":
        N = min(N, self.trunc_order)
        return LaurentMatrix(self.base, self.min_order, self.coeffs[: N - self.min_order + 1])

    def with_min_order(self, v: int) -> "LaurentMatrix":
        """Re-anchor the storage at ``v`` (padding with zeros or dropping zeros)."""
        return LaurentMatrix(self.base, v, self.block(v, self.trunc_order))

    def __add__(self, other):
        return _mat_add(self, other, 1)

    def __sub__(self, other):
        return _mat_add(self, other, -1)

    def __neg__(self):
        return LaurentMatrix(self.base, self.min_order, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, LaurentMatrix):
            return laurent_matrix_ops(self, other, "mul")
        return LaurentMatrix(self.base, self.min_order, self.coeffs * complex(other))

    __rmul__ = __mul__

    def inv(self) -> "LaurentMatrix":
        return laurent_matrix_ops(self, None, "inv")

    def d(self) -> "LaurentMatrix":
        return laurent_matrix_ops(self, None, "d")

    def trace(self) -> LaurentSeries:
        return LaurentSeries(self.base, self.min_order, self.coeffs[:, 0, 0] + self.coeffs[:, 1, 1])

    def det(self) -> LaurentSeries:
        e = self.entries
        return e[0][0] * e[1][1] - e[0][1] * e[1][0]

    def scalar_mul(self, s: LaurentSeries) -> "LaurentMatrix":
        out = [[self.entry(i, j) * s for j in range(2)] for i in range(2)]
        return LaurentMatrix.from_entries(out)

    def shift(self, k: int) -> "LaurentMatrix":
        """Multiply by ``t**k``."""
        return LaurentMatrix(self.base, self.min_order + k, self.coeffs)

    def __call__(self, t):
        k = np.arange(self.min_order, self.trunc_order + 1)
        return np.einsum("kij,k->ij", self.coeffs, complex(t) ** k)

    def to_json(self) -> dict:
        return {
            "base": point_to_json(self.base),
            "min_order": self.min_order,
            "trunc_order": self.trunc_order,
            "coeffs": [[[cx_to_json(c) for c in row] for row in blk] for blk in self.coeffs],
        }

    def __repr__(self):
        return f"LaurentMatrix(base={self.base!r}, v={self.min_order}, N={self.trunc_order})"


def _mat_add(a: LaurentMatrix, b: LaurentMatrix, sign: int) -> LaurentMatrix:
    N = min(a.trunc_order, b.trunc_order)
    lo = min(a.min_order, b.min_order)
    if lo > N:
        return LaurentMatrix(a.base, N + 1, np.zeros((0, 2, 2)))
    return LaurentMatrix(a.base, lo, a.block(lo, N) + sign * b.block(lo, N))


def _mat_mul(A: LaurentMatrix, B: LaurentMatrix) -> LaurentMatrix:
    v = A.min_order + B.min_order
    N = min(A.trunc_order + B.min_order, B.trunc_order + A.min_order)
    L = N - v + 1
    if L <= 0:
        return LaurentMatrix(A.base, N + 1, np.zeros((0, 2, 2)))
    a = A.coeffs[:L]
    b = B.coeffs[:L]
    out = np.zeros((L, 2, 2), dtype=complex)
    for k in range(L):
        lo = max(0, k - len(b) + 1)
        hi = min(k, len(a) - 1)
        if lo <= hi:
            out[k] = np.einsum("tij,tjk->ik", a[lo : hi + 1], b[k - hi : k - lo + 1][::-1])
    return LaurentMatrix(A.base, v, out)


def laurent_matrix_ops(A: LaurentMatrix, B: LaurentMatrix | None, op: str) -> LaurentMatrix:
    """``mul``, ``inv`` or ``d`` (derivative in the local variable).

    The truncation order of the result is the largest one determined by the
    inputs: ``min(N_A + v_B, N_B + v_A)`` for products, ``N - 2v`` for the
    inverse of a matrix whose determinant has valuation ``v``, and ``N - 1``
    for derivatives.
    """
    if op == "mul":
        return _mat_mul(A, B)
    if op == "d":
        k = np.arange(A.min_order, A.trunc_order + 1)
        return LaurentMatrix(A.base, A.min_order - 1, A.coeffs * k[:, None, None])
    if op == "inv":
        e = A.entries
        det = e[0][0] * e[1][1] - e[0][1] * e[1][0]
        scale = _abs_series(e[0][0]) * _abs_series(e[1][1]) + _abs_series(e[0][1]) * _abs_series(e[1][0])
        v = _cancel_valuation(det, scale)
        if v is None:
            raise SingularLeadingTerm("determinant vanishes to truncation order")
        det = LaurentSeries(det.base, v, det.dense(v, det.trunc_order))
        inv_det = det.inverse()
        adj = [[e[1][1], -e[0][1]], [-e[1][0], e[0][0]]]
        return LaurentMatrix.from_entries([[adj[i][j] * inv_det for j in range(2)] for i in range(2)])
    raise ValueError(f"unknown op {op!r}")


def _abs_series(s: LaurentSeries) -> LaurentSeries:
    if s.is_zero():
        return s
    return LaurentSeries(s.base, s.min_order, np.abs(np.asarray(s.coeffs)))


def _cancel_valuation(s: LaurentSeries, scale: LaurentSeries, tol: float = VALUATION_TOL):
    """First order where ``s`` is not cancellation noise relative to ``scale``."""
    if s.is_zero():
        return None
    for k in range(s.min_order, s.trunc_order + 1):
        sk = abs(scale.coeff(k)) if scale.min_order <= k <= scale.trunc_order else 0.0
        if abs(s.coeff(k)) > tol * sk:
            return k
    return None


# --------------------------------------------------- matrices of functions ----

def rf_matrix(M) -> list:
    return [[RationalFunction.coerce(M[i][j]) for j in range(2)] for i in range(2)]


def rf_matmul(A, B) -> list:
    return [[A[i][0] * B[0][j] + A[i][1] * B[1][j] for j in range(2)] for i in range(2)]


def rf_det(A) -> RationalFunction:
    return A[0][0] * A[1][1] - A[0][1] * A[1][0]


def rf_matinv(A) -> list:
    det = rf_det(A)
    if det.is_zero():
        raise SingularLeadingTerm("matrix of functions is singular")
    return [[A[1][1] / det, -A[0][1] / det], [-A[1][0] / det, A[0][0] / det]]


def rf_matderiv(A) -> list:
    return [[rf_derivative(A[i][j]) for j in range(2)] for i in range(2)]


def rf_matrix_to_json(A) -> list:
    return [[A[i][j].to_json() for j in range(2)] for i in range(2)]


def rf_matrix_from_json(obj) -> list:
    if not (isinstance(obj, list) and len(obj) == 2 and all(isinstance(r, list) and len(r) == 2 for r in obj)):
        raise ValueError("matrix must be a 2x2 nested list")
    return [[RationalFunction.from_json(obj[i][j]) for j in range(2)] for i in range(2)]


def cx_matrix_to_json(M) -> list:
    M = np.asarray(M, dtype=complex)
    return [[cx_to_json(M[i, j]) for j in range(M.shape[1])] for i in range(M.shape[0])]


def cx_matrix_from_json(obj) -> np.ndarray:
    return np.array([[cx_from_json(v) for v in row] for row in obj], dtype=complex)


def poly_roots(p: Sequence[complex]) -> np.ndarray:
    p = _trim(_arr(p))
    if _deg(p) < 1:
        return np.zeros(0, dtype=complex)
    return np.asarray(npoly.polyroots(p), dtype=complex)
