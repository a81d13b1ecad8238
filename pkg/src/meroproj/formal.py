"""Formal normal forms of 2x2 systems at a pole.

A system ``dY + A(t) Y dt = 0`` is reduced by a formal gauge ``Y = G Y~`` to
``Lambda = G^{-1} A G + G^{-1} G'``:

* regular, non-resonant: ``diag(l+, l-)/t``;
* regular, resonant (``l+ - l- = k`` in N): ``[[r, 1], [0, r]]/t`` after the
  meromorphic post-reduction, or ``diag(l+, l-)/t`` when the obstruction
  vanishes;
* irregular unramified: ``diag(l+(t), l-(t))`` with ``l+-`` polynomials in
  ``1/t``;
* irregular ramified: the same in ``z`` with ``t = z^2``.

The formal fundamental solution is ``G t^{-L} e^{-Q}`` for this sign
convention (``Q`` the polar antiderivative of ``Lambda``).

The reduction splits off the scalar part ``tr(A)/2``, conjugates the leading
coefficient of the trace-free part into Jordan form and solves the
homological equations ``A G + G' = G Lambda`` order by order.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.linalg import expm

from .algebra import (
    LaurentMatrix,
    LaurentSeries,
    cx_to_json,
    cx_matrix_to_json,
    is_inf,
    as_point,
    point_to_json,
)
from .errors import (
    RamifiedConventionRequired,
    ResonanceOverflow,
    TruncationTooSmall,
    WrongClass,
    ZeroLeadingTerm,
)

KINDS = ("RegularDiagonal", "RegularResonant", "IrregularUnramified", "IrregularRamified")
RESONANCE_TOL = 1e-9
NILPOTENT_TOL = 1e-9
DEFAULT_EXTRA = 12  # default truncation N = m + 12
CONVENTIONS = ("ccw", "cw")


# ------------------------------------------------------------------ types ----

@dataclass(frozen=True)
class FormalClass:
    kind: str
    m: int
    k: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown class {self.kind!r}")

    @property
    def regular(self) -> bool:
        return self.kind.startswith("Regular")

    @property
    def ramified(self) -> bool:
        return self.kind == "IrregularRamified"


def _nu_from_class(c: FormalClass) -> Fraction:
    if c.regular:
        return Fraction(0)
    if c.ramified:
        return Fraction(2 * c.m - 3, 2)
    return Fraction(c.m - 1)


@dataclass(frozen=True)
class FormalData:
    """Basic formal data at a pole.

    ``lambda_plus``/``lambda_minus`` map orders ``<= -1`` to coefficients of
    the local variable (``t``, or ``z`` with ``t = z^2`` when ramified).
    ``log`` is 1 when the regular resonant normal form carries the Jordan
    block.  ``frame0`` is the constant term of the formal gauge after the
    ramification step; it fixes the ramified formal monodromy.
    """

    cls: FormalClass
    lambda_plus: dict
    lambda_minus: dict
    residue_plus: complex
    residue_minus: complex
    nu: Fraction
    log: int = 0
    normal_form: LaurentMatrix | None = field(default=None, compare=False, repr=False)
    frame0: np.ndarray | None = field(default=None, compare=False, repr=False)

    @property
    def variable(self) -> str:
        return "z" if self.cls.ramified else "x"

    def coeffs(self, which: str, lo: int) -> np.ndarray:
        d = self.lambda_plus if which == "plus" else self.lambda_minus
        return np.array([d.get(k, 0j) for k in range(lo, 0)], dtype=complex)

    def riccati_lambda(self) -> dict:
        """``lambda = lambda- - lambda+`` (defined up to sign)."""
        keys = sorted(set(self.lambda_plus) | set(self.lambda_minus))
        return {k: self.lambda_minus.get(k, 0j) - self.lambda_plus.get(k, 0j) for k in keys}

    def to_json(self) -> dict:
        enc = lambda d: [[k, cx_to_json(v)] for k, v in sorted(d.items())]
        out = {
            "class": self.cls.kind,
            "m": self.cls.m,
            "lambda_plus": enc(self.lambda_plus),
            "lambda_minus": enc(self.lambda_minus),
            "residue_plus": cx_to_json(self.residue_plus),
            "residue_minus": cx_to_json(self.residue_minus),
            "nu": f"{self.nu.numerator}/{self.nu.denominator}",
            "variable": self.variable,
        }
        if self.cls.k is not None:
            out["k"] = self.cls.k
            out["log"] = self.log
        return out


@dataclass(frozen=True)
class RiccatiFormalData:
    """``lambda = lambda- - lambda+`` and the residue of the trace-free lift.

    ``residue`` is the eigenvalue residue ``(l+_{-1} - l-_{-1})/2`` of the
    trace-free lift, so ``4 residue^2 + 2 res2 = 1`` at regular poles; it is
    half the ``1/t`` coefficient of ``lambda``.  Both are defined up to sign.
    """

    lam: dict
    residue: complex
    nu: Fraction
    kind: str
    point: object = None

    def to_json(self) -> dict:
        return {
            "point": point_to_json(self.point) if self.point is not None else None,
            "class": self.kind,
            "lambda": [[k, cx_to_json(v)] for k, v in sorted(self.lam.items())],
            "residue": cx_to_json(self.residue),
            "nu": f"{self.nu.numerator}/{self.nu.denominator}",
        }


# --------------------------------------------------------------- helpers ----

def irregularity_index(n: int) -> Fraction:
    """``nu = max(0, (n - 2)/2)`` for a projective-structure pole of order ``n``."""
    n = int(n)
    if n < 1:
        raise ValueError("pole order must be positive")
    return max(Fraction(0), Fraction(n - 2, 2))


def _split_trace(A: LaurentMatrix):
    tr = A.coeffs[:, 0, 0] + A.coeffs[:, 1, 1]
    A0 = A.coeffs.copy()
    A0[:, 0, 0] -= tr / 2
    A0[:, 1, 1] -= tr / 2
    return tr / 2, A0


def _leading(A0: np.ndarray, v0: int, tol: float = 1e-10):
    """Pole order and leading coefficient of the trace-free part."""
    mags = np.abs(A0).reshape(len(A0), -1).max(axis=1) if len(A0) else np.zeros(0)
    # noise is judged against the principal part and constant term only;
    # high-order coefficients of gauged series can grow geometrically
    top = mags[: max(1, -v0 + 1)].max() if mags.size else 0.0
    if top == 0:
        return 0, np.zeros((2, 2), complex)
    idx = int(np.flatnonzero(mags > tol * top)[0])
    order = v0 + idx
    if order >= 0:
        return 0, np.zeros((2, 2), complex)
    return -order, A0[idx]


def _eig_sorted(M: np.ndarray):
    """Eigen-decomposition with eigenvalues in decreasing (Re, Im) order."""
    w, V = np.linalg.eig(M)
    order = sorted(range(2), key=lambda i: (round(w[i].real, 12), round(w[i].imag, 12)), reverse=True)
    V = V[:, order].copy()
    # smooth, deterministic scaling: first component 1 unless it is tiny
    for j in range(2):
        v = V[:, j]
        k = 0 if abs(v[0]) >= 1e-3 * np.abs(v).max() else 1
        V[:, j] = v / v[k]
    return w[order], V


def _classify_arrays(A: LaurentMatrix, N: int | None = None):
    if A.valuation() is None:
        raise ZeroLeadingTerm("the system matrix vanishes to truncation order")
    half_tr, A0 = _split_trace(A)
    m, lead = _leading(A0, A.min_order)
    scale = max(np.abs(lead).max(), 1e-300)
    if m <= 1:
        if m == 0:
            return FormalClass("RegularDiagonal", 1), lead
        w, _ = _eig_sorted(lead)
        diff = w[0] - w[1]
        k = round(diff.real)
        # a rounded Jordan block splits its eigenvalues by O(sqrt(eps)):
        # the k = 0 test is therefore made on the squared difference
        disc = lead[0, 0] ** 2 + lead[0, 1] * lead[1, 0]
        if abs(4 * disc) <= RESONANCE_TOL * max(scale, 1.0) ** 2:
            k, diff = 0, 0j
        if abs(diff - k) < RESONANCE_TOL and k >= 0:
            if N is not None and k > N:
                raise ResonanceOverflow(f"resonance exponent {k} exceeds truncation {N}")
            if k == 0:
                # scalar leading term (diagonal) or a nilpotent Jordan part
                if np.abs(lead - np.diag(np.diag(lead))).max() <= NILPOTENT_TOL * max(scale, 1.0) and abs(lead[0, 0] - lead[1, 1]) <= NILPOTENT_TOL * max(scale, 1.0):
                    return FormalClass("RegularDiagonal", 1), lead
                return FormalClass("RegularResonant", 1, 0), lead
            return FormalClass("RegularResonant", 1, int(k)), lead
        return FormalClass("RegularDiagonal", 1), lead
    # irregular: semisimple iff the (trace-free) eigenvalues are nonzero
    disc = lead[0, 0] ** 2 + lead[0, 1] * lead[1, 0]  # -det for trace-free
    if abs(disc) <= NILPOTENT_TOL * scale**2:
        return FormalClass("IrregularRamified", m), lead
    return FormalClass("IrregularUnramified", m), lead


def classify_singularity(S: LaurentMatrix) -> FormalClass:
    """Case split of the formal classification (pole order of the trace-free part)."""
    return _classify_arrays(S)[0]


# ------------------------------------------------------------- recursions ----

def _conj(P: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    Pi = np.linalg.inv(P)
    return np.einsum("ij,kjl,lm->kim", Pi, coeffs, P)


def _solve_irregular(a: np.ndarray, m: int, J: int):
    """Diagonalize ``sum a[i] t^{i-m}`` with ``a[0] = diag(mu0, mu1)``, ``mu0 != mu1``.

    Returns ``(G, Lam)`` with ``G[j]`` the ``t^j`` coefficient (``G[0] = I``,
    zero diagonals for ``j >= 1``) and ``Lam[j]`` the ``t^{j-m}`` coefficient.
    """
    L = min(len(a), J + 1)
    G = np.zeros((L, 2, 2), complex)
    G[0] = np.eye(2)
    Lam = np.zeros((L, 2, 2), complex)
    Lam[0] = np.diag(np.diag(a[0]))
    mu0, mu1 = a[0, 0, 0], a[0, 1, 1]
    for j in range(1, L):
        rhs = a[j].copy()
        for i in range(1, j):
            rhs += a[i] @ G[j - i] - G[j - i] @ Lam[i]
        d = j - m + 1
        if d >= 1:
            rhs += d * G[d]
        Lam[j] = np.diag(np.diag(rhs))
        G[j, 0, 1] = -rhs[0, 1] / (mu0 - mu1)
        G[j, 1, 0] = -rhs[1, 0] / (mu1 - mu0)
    return G, Lam


def _solve_regular(a: np.ndarray, J: int, k: int | None):
    """Reduce ``sum a[i] t^{i-1}`` with ``a[0]`` in Jordan form.

    Resonance (``a[0] = diag(mu0, mu1)``, ``mu0 - mu1 = k >= 1``) leaves the
    ``t^{k-1}`` coefficient of entry (1, 0) in ``Lam``.
    """
    L = min(len(a), J + 1)
    G = np.zeros((L, 2, 2), complex)
    G[0] = np.eye(2)
    Lam = np.zeros((L, 2, 2), complex)
    Lam[0] = a[0]
    A1 = a[0]
    for j in range(1, L):
        rhs = a[j].copy()
        for i in range(1, j):
            rhs += a[i] @ G[j - i] - G[j - i] @ Lam[i]
        # operator X -> A1 X - X A1 + j X on the 4 entries (row-major vec)
        Op = np.kron(A1, np.eye(2)) - np.kron(np.eye(2), A1.T) + j * np.eye(4)
        if k is not None and k >= 1 and j == k:
            # entry (1, 0) is the resonant one: keep it in Lam
            Lam[j, 1, 0] = rhs[1, 0]
            rhs = rhs.copy()
            rhs[1, 0] = 0
            Op[2, :] = 0
            Op[2, 2] = 1
        G[j] = np.linalg.solve(Op, -rhs.reshape(4)).reshape(2, 2)
    return G, Lam


def _series_exp(s: np.ndarray, L: int) -> np.ndarray:
    """``exp(sum_{n>=1} s[n] t^n)`` through ``t^{L-1}``."""
    E = np.zeros(L, complex)
    E[0] = 1
    for n in range(1, L):
        acc = 0j
        for k in range(1, min(n, len(s) - 1) + 1):
            acc += k * s[k] * E[n - k]
        E[n] = acc / n
    return E


def _remove_holomorphic_diagonal(Lam_hol: np.ndarray, L: int) -> np.ndarray:
    """Diagonal gauge ``exp(-int Lam_hol)`` (coefficients ``t^0 .. t^{L-1}``)."""
    D = np.zeros((L, 2, 2), complex)
    for i in range(2):
        s = np.zeros(L + 1, complex)
        for n in range(len(Lam_hol)):
            if n + 1 <= L:
                s[n + 1] = -Lam_hol[n, i, i] / (n + 1)
        D[:, i, i] = _series_exp(s, L)
    return D


def _mat_series_mul(A: np.ndarray, B: np.ndarray, L: int) -> np.ndarray:
    out = np.zeros((L, 2, 2), complex)
    for k in range(L):
        for i in range(max(0, k - len(B) + 1), min(k, len(A) - 1) + 1):
            out[k] += A[i] @ B[k - i]
    return out


def _scalar_series_mul(G: np.ndarray, s: np.ndarray) -> np.ndarray:
    L = len(G)
    out = np.zeros_like(G)
    for k in range(L):
        out[k] = np.tensordot(s[: k + 1][::-1], G[: k + 1], axes=(0, 0))
    return out


def _scalar_hol_gauge(half_tr_hol: np.ndarray, L: int) -> np.ndarray:
    s = np.zeros(L + 1, complex)
    for n in range(len(half_tr_hol)):
        if n + 1 <= L:
            s[n + 1] = -half_tr_hol[n] / (n + 1)
    return _series_exp(s, L)


# ------------------------------------------------------------ main entry ----

def _reduce_unramified(A: LaurentMatrix, J: int, m: int, lead: np.ndarray):
    """Irregular unramified reduction of a full (not necessarily trace-free) matrix."""
    half_tr, A0 = _split_trace(A)
    v0 = A.min_order
    w, P = _eig_sorted(lead)
    a = _conj(P, A0)
    start = -m - v0
    if start < 0:
        a = np.concatenate([np.zeros((-start, 2, 2), complex), a])
        start = 0
    a = a[start:]
    a[0] = np.diag(np.diag(a[0]))  # exact diagonal leading term
    G, Lam = _solve_irregular(a, m, J)
    Lcount = len(G)
    hol = Lam[m:] if len(Lam) > m else np.zeros((0, 2, 2), complex)
    D = _remove_holomorphic_diagonal(hol, Lcount)
    G = _mat_series_mul(G, D, Lcount)
    # scalar part
    ht = _aligned(half_tr, v0, -m)  # ht[i]: t^{i-m} coefficient of tr/2
    scal = _scalar_hol_gauge(ht[m:], Lcount)
    G = _scalar_series_mul(G, scal)
    G = np.einsum("ij,kjl->kil", P, G)
    lam_p = {k - m: Lam[k, 0, 0] + ht[k] for k in range(min(m, len(Lam)))}
    lam_m = {k - m: Lam[k, 1, 1] + ht[k] for k in range(min(m, len(Lam)))}
    return lam_p, lam_m, G, P


def _aligned(series: np.ndarray, v0: int, lo: int) -> np.ndarray:
    """Coefficients of orders ``lo, lo+1, ...`` of a series starting at order ``v0``."""
    if v0 >= lo:
        return np.concatenate([np.zeros(v0 - lo, complex), series])
    return series[lo - v0 :]


def _lam_matrix(base, lam_p: dict, lam_m: dict, N: int, extra=None) -> LaurentMatrix:
    lo = min(min(lam_p, default=-1), min(lam_m, default=-1), -1)
    c = np.zeros((N - lo + 1, 2, 2), complex)
    for k, v in lam_p.items():
        c[k - lo, 0, 0] += v
    for k, v in lam_m.items():
        c[k - lo, 1, 1] += v
    if extra is not None:
        c[-1 - lo] += extra
    return LaurentMatrix(base, lo, c)


def _ramify(A0: np.ndarray, v0: int, m: int, lead: np.ndarray):
    """Pull the trace-free part back by ``t = z^2`` and gauge by ``diag(1, z)``.

    Returns ``(P, B)`` with ``P`` the constant frame putting the leading term
    into ``[[0, 1], [0, 0]]`` and ``B`` the z-coefficients (with their
    starting order).
    """
    # P = [N w, w] with N w != 0
    Nm = lead
    w = np.array([1, 0], complex) if np.abs(Nm[:, 0]).max() >= np.abs(Nm[:, 1]).max() else np.array([0, 1], complex)
    P = np.column_stack([Nm @ w, w])
    a = _conj(P, A0)
    # B(z) = 2 z A(z^2): A_k t^k -> 2 A_k z^{2k+1}; then entry (i, j) times z^{d_j - d_i}, d = (0, 1)
    K = len(a)
    zlo = 2 * v0 + 1 - 1
    zhi = 2 * (v0 + K - 1) + 1 + 1
    B = np.zeros((zhi - zlo + 1, 2, 2), complex)
    shift = np.array([[0, 1], [-1, 0]])
    for idx in range(K):
        k = v0 + idx
        for i in range(2):
            for j in range(2):
                o = 2 * k + 1 + shift[i, j]
                B[o - zlo, i, j] += 2 * a[idx, i, j]
    B[-1 - zlo, 1, 1] += 1.0  # D^{-1} dD = diag(0, 1/z)
    # the lower end (entry (1,0) shifted down) is only known through 2(v0+K-1)+1-1
    ztrunc = 2 * (v0 + K - 1) + 1 - 1
    B = B[: ztrunc - zlo + 1]
    return P, LaurentMatrix(0j, zlo, B)


def formal_normal_form(S: LaurentMatrix, N: int | None = None):
    """Formal normal form and the accumulated gauge.

    ``N`` is the order through which the gauge is computed (default ``m + 12``);
    the input must be known through ``t^{N - m}``.  Returns
    ``(FormalData, G)``; for ramified poles ``G`` is a series in ``z`` and
    includes the pull-back frame ``P diag(1, z)``.
    """
    half_tr, A0 = _split_trace(S)
    cls, lead = _classify_arrays(S)
    m = cls.m
    if N is None:
        N = m + DEFAULT_EXTRA
    if N < m + 4:
        raise TruncationTooSmall(f"truncation order {N} must be at least m + 4 = {m + 4}")
    if S.trunc_order < N - m:
        raise TruncationTooSmall(f"input known through order {S.trunc_order}, need {N - m}")
    cls, lead = _classify_arrays(S, N)
    v0 = S.min_order
    base = S.base
    nu = _nu_from_class(cls)

    if cls.kind == "IrregularUnramified":
        lam_p, lam_m, G, _ = _reduce_unramified(S, N, m, lead)
        Gm = LaurentMatrix(base, 0, G)
        F = FormalData(cls, lam_p, lam_m, lam_p.get(-1, 0j), lam_m.get(-1, 0j), nu,
                       normal_form=_lam_matrix(base, lam_p, lam_m, N))
        return F, Gm

    if cls.ramified:
        P, B = _ramify(A0, v0, m, lead)
        mz = 2 * m - 2
        Bh, B0 = _split_trace(B)
        mz_found, leadz = _leading(B0, B.min_order)
        if mz_found != mz or abs(leadz[0, 1] * leadz[1, 0]) <= NILPOTENT_TOL * max(np.abs(leadz).max(), 1e-300) ** 2:
            raise ZeroLeadingTerm("non-generic ramified data: the pole order is not minimal")
        Jz = 2 * N
        lam_p, lam_m, Gz, _ = _reduce_unramified(B, min(Jz, B.trunc_order + mz), mz, leadz)
        # add the original scalar part 2 z (tr/2)(z^2) (principal part only)
        for idx, c in enumerate(half_tr):
            k = v0 + idx
            o = 2 * k + 1
            if o <= -1 and c != 0:
                lam_p[o] = lam_p.get(o, 0j) + 2 * c
                lam_m[o] = lam_m.get(o, 0j) + 2 * c
        # scalar holomorphic part of the original trace
        hol = [(2 * k + 1, 2 * c) for idx, c in enumerate(half_tr) for k in [v0 + idx] if 2 * k + 1 >= 0]
        L = len(Gz)
        s = np.zeros(L + 1, complex)
        for o, c in hol:
            if o + 1 <= L:
                s[o + 1] -= c / (o + 1)
        Gz = _scalar_series_mul(Gz, _series_exp(s, L))
        frame0 = Gz[0].copy()
        # total gauge P diag(1, z) Gz
        Dz = np.zeros((2, 2, 2), complex)
        Dz[0] = np.diag([1, 0])
        Dz[1] = np.diag([0, 1])
        Gtot = np.einsum("ij,kjl->kil", P, _mat_series_mul(Dz, Gz, L + 1))
        F = FormalData(cls, lam_p, lam_m, lam_p.get(-1, 0j), lam_m.get(-1, 0j), nu,
                       normal_form=_lam_matrix(0j, lam_p, lam_m, Jz), frame0=frame0)
        return F, LaurentMatrix(0j, 0, Gtot)

    # regular
    if m == 0 or np.abs(lead).max() == 0:
        lead = np.zeros((2, 2), complex)
    k = cls.k
    if cls.kind == "RegularResonant" and k == 0:
        # Jordan basis: lead = r I + nilpotent
        r = (lead[0, 0] + lead[1, 1]) / 2
        Nm = lead - r * np.eye(2)
        w = np.array([1, 0], complex) if np.abs(Nm[:, 0]).max() >= np.abs(Nm[:, 1]).max() else np.array([0, 1], complex)
        P = np.column_stack([Nm @ w, w])
    elif np.abs(lead).max() == 0 or abs(lead[0, 0] - lead[1, 1]) + abs(lead[0, 1]) + abs(lead[1, 0]) == 0:
        P = np.eye(2)
    else:
        _, P = _eig_sorted(lead)
    a = _conj(P, A0)
    a = _aligned_mat(a, v0, -1)
    if cls.kind == "RegularResonant" and k == 0:
        r0 = (a[0, 0, 0] + a[0, 1, 1]) / 2
        a[0] = np.array([[r0, a[0, 0, 1]], [0, r0]])
    elif np.abs(a[0]).max() > 0:
        a[0] = np.diag(np.diag(a[0]))
    G, Lam = _solve_regular(a, N, k if cls.kind == "RegularResonant" else None)
    L = len(G)
    ht = _aligned(half_tr, v0, -1)
    scal = _scalar_hol_gauge(ht[1:], L)
    G = _scalar_series_mul(G, scal)
    G = np.einsum("ij,kjl->kil", P, G)
    mu0, mu1 = a[0, 0, 0], a[0, 1, 1]
    res_p, res_m = mu0 + ht[0], mu1 + ht[0]
    lam_p, lam_m = {-1: res_p}, {-1: res_m}
    log = 0
    Gm = LaurentMatrix(base, 0, G)
    nf = _lam_matrix(base, lam_p, lam_m, N)
    if cls.kind == "RegularResonant":
        if k == 0:
            c = a[0, 0, 1]
            log = 1
            # scale the nilpotent entry to 1
            Dg = np.diag([1, 1 / c]) if c != 0 else np.eye(2)
            Gm = Gm * LaurentMatrix.constant(base, Dg, N)
            nf = LaurentMatrix(base, -1, np.concatenate([[np.array([[res_p, 1], [0, res_m]])], np.zeros((N + 1, 2, 2))]))
        else:
            c = Lam[k, 1, 0] if k < len(Lam) else 0j
            scale = 1 + np.abs(a[: k + 1]).max()
            if abs(c) > 1e-9 * scale:
                log = 1
                # diag(t^{-k}/c, 1) then swap to [[r, 1], [0, r]]/t with r = l-
                D1 = np.zeros((k + 1, 2, 2), complex)
                D1[0, 1, 1] = 1
                Dmer = LaurentMatrix(base, -k, np.concatenate([[np.diag([1 / c, 0])], np.zeros((k, 2, 2))]))
                Dmer = Dmer + LaurentMatrix(base, 0, np.concatenate([[np.diag([0, 1])], np.zeros((N, 2, 2))]))
                Sw = LaurentMatrix.constant(base, np.array([[0, 1], [1, 0]]), N)
                Gm = Gm * Dmer * Sw
                nf = LaurentMatrix(base, -1, np.concatenate([[np.array([[res_m, 1], [0, res_m]])], np.zeros((N + 1, 2, 2))]))
    F = FormalData(cls, lam_p, lam_m, res_p, res_m, nu, log=log, normal_form=nf)
    return F, Gm


def _aligned_mat(a: np.ndarray, v0: int, lo: int) -> np.ndarray:
    if v0 >= lo:
        return np.concatenate([np.zeros((v0 - lo, 2, 2), complex), a])
    return a[lo - v0 :].copy()


# --------------------------------------------------------- derived data ----

def same_up_to_swap(F1: FormalData, F2: FormalData, tol: float = 1e-8) -> float:
    """Coefficient residual between two formal data, minimized over the swap."""
    keys = sorted(set(F1.lambda_plus) | set(F1.lambda_minus) | set(F2.lambda_plus) | set(F2.lambda_minus))

    def diff(a, b, c, d):
        return max([abs(a.get(k, 0j) - c.get(k, 0j)) for k in keys] + [abs(b.get(k, 0j) - d.get(k, 0j)) for k in keys] + [0.0])

    return min(diff(F1.lambda_plus, F1.lambda_minus, F2.lambda_plus, F2.lambda_minus),
               diff(F1.lambda_plus, F1.lambda_minus, F2.lambda_minus, F2.lambda_plus))


def riccati_formal_data(R, p, N: int | None = None) -> RiccatiFormalData:
    """Formal data of a Riccati equation through its trace-free lift at ``p``."""
    from .linsys import lift_riccati

    p = as_point(p)
    S = lift_riccati(R)
    if is_inf(p) and R.chart == "finite":
        A = S.local_matrix(p, (N or 24) + 8)
    elif is_inf(p):
        A = S.local_matrix(0j, (N or 24) + 8)
    else:
        A = S.local_matrix(p, (N or 24) + 8)
    F, _ = formal_normal_form(A, N)
    lam = F.riccati_lambda()
    res = (F.residue_plus - F.residue_minus) / 2
    return RiccatiFormalData(lam, res, F.nu, F.cls.kind, p)


def structure_formal_data(q, p, N: int | None = None) -> RiccatiFormalData:
    """Formal data of the projective structure ``(q/2) dx^2`` at a pole ``p``.

    The normal form is first brought to minimal pole order; at infinity the
    computation runs in ``t = 1/x``.
    """
    from .riccati import minimize_pole_order

    p = as_point(p)
    R, m, _ = minimize_pole_order(q, p)
    out = riccati_formal_data(R, 0j if is_inf(p) else p, N)
    return RiccatiFormalData(out.lam, out.residue, out.nu, out.kind, p)


def check_genericity(S: LaurentMatrix) -> bool:
    """Is ``b_{-m} c_{-m+1} != 0`` in the frame where the leading term is ``[[0, b], [0, 0]]``?"""
    cls, lead = _classify_arrays(S)
    if not cls.ramified:
        raise WrongClass(f"genericity applies to ramified poles, got {cls.kind}")
    half_tr, A0 = _split_trace(S)
    m = cls.m
    w = np.array([1, 0], complex) if np.abs(lead[:, 0]).max() >= np.abs(lead[:, 1]).max() else np.array([0, 1], complex)
    P = np.column_stack([lead @ w, w])
    a = _conj(P, A0)
    b = a[-m - S.min_order, 0, 1]
    idx = -m + 1 - S.min_order
    c = a[idx, 1, 0] if 0 <= idx < len(a) else 0j
    scale = max(np.abs(a[: idx + 1]).max(), 1e-300)
    return abs(b * c) > NILPOTENT_TOL * scale**2


def formal_monodromy(F: FormalData, convention: str | None = None) -> np.ndarray:
    """``exp(2 pi i L)`` for the residue matrix ``L`` of the normal form.

    ``L = diag(res+, res-)``, or ``[[r, 1], [0, r]]`` in the resonant log case.
    Solutions ``G t^{-L} e^{-Q}`` acquire the inverse of this matrix along a
    positive loop.  For ramified poles the x-plane loop is the half turn
    ``z -> -z`` whose orientation is the ``convention`` flag (``"ccw"`` or
    ``"cw"``); the result is again the inverse of the monodromy of the formal
    solutions, ``C exp(-+ i pi L)`` with ``C = G0^{-1} diag(1, -1) G0``.
    """
    if F.cls.ramified:
        if convention is None:
            raise RamifiedConventionRequired("ramified formal monodromy needs a convention flag ('ccw' or 'cw')")
        return np.linalg.inv(formal_monodromy_of_solutions(F, convention))
    if F.log:
        r = F.normal_form.coefficient(-1)[0, 0] if F.normal_form is not None else F.residue_minus
        L = np.array([[r, 1], [0, r]], complex)
    else:
        L = np.diag([F.residue_plus, F.residue_minus])
    return expm(2j * np.pi * L)


def formal_monodromy_of_solutions(F: FormalData, convention: str = "ccw") -> np.ndarray:
    """Monodromy of the formal fundamental solution along a positive loop."""
    if not F.cls.ramified:
        return np.linalg.inv(formal_monodromy(F))
    if convention not in CONVENTIONS:
        raise RamifiedConventionRequired(f"unknown convention {convention!r}")
    G0 = F.frame0
    C = np.linalg.inv(G0) @ np.diag([1, -1]) @ G0
    sgn = -1 if convention == "ccw" else 1
    L = np.diag([F.residue_plus, F.residue_minus])
    return C @ expm(sgn * 1j * np.pi * L)


def pullback_z(A: LaurentMatrix) -> LaurentMatrix:
    """``2 z A(z^2)``: the same system in the ramified variable ``t = z^2``."""
    K = len(A.coeffs)
    lo = 2 * A.min_order + 1
    c = np.zeros((2 * (K - 1) + 1, 2, 2), complex)
    c[::2] = 2 * A.coeffs
    return LaurentMatrix(0j, lo, c)


def normal_form_residual(A: LaurentMatrix, F: FormalData, G: LaurentMatrix, upto: int = 4) -> float:
    """Max coefficient of ``A G + G' - G Lambda`` through order ``upto`` (relative)."""
    B = pullback_z(A) if F.cls.ramified else A
    E = B * G + G.d() - G * F.normal_form
    hi = min(upto, E.trunc_order)
    blk = E.block(E.min_order, hi)
    scale = 1 + np.abs(B.block(B.min_order, min(hi, B.trunc_order))).max()
    return float(np.abs(blk).max() / scale) if blk.size else 0.0
