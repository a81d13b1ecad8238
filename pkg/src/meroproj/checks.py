"""Invariant suite shared by ``meroproj check`` and the acceptance tests.

Each check draws its random inputs from a seeded generator and returns a
:class:`CheckResult` holding the worst observed metric and the threshold it
is compared against.  ``scale`` shrinks the sample sizes for quick runs; the
thresholds never change.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .algebra import INF, LaurentMatrix, RationalFunction, X, is_inf
from .formal import formal_normal_form, same_up_to_swap
from .lab import (FamilyConfig, build_family, jacobian_rank, local_injectivity_probe, moduli_dimension,
                  monodromy_coordinates)
from .errors import HypothesisViolated
from .formal import irregularity_index
from .integrator import two_pi
from .linsys import check_fuchs, companion_system, lift_riccati, oper_lift
from .monodromy import (choose_base, eig2, global_monodromy, liouville_residual, local_monodromy, loop_around,
                        stokes_data, stokes_product_check, unipotency_defect)
from .projective import pole_order_at, residue_and_index, schwarzian, schwarzian_cocycle_check
from .riccati import RiccatiEq, minimize_pole_order, oper_normal_form


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    metric: float
    threshold: float
    seconds: float = 0.0
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.number}. {self.name}: worst {self.metric:.3g} "
                f"(limit {self.threshold:.3g}), {self.seconds:.1f} s")

    def to_json(self) -> dict:
        return {"number": self.number, "name": self.name, "pass": self.passed, "metric": self.metric,
                "threshold": self.threshold, "detail": self.detail}


def _rng(seed):
    return np.random.default_rng(seed)


def _cx(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def _n(count: int, scale: float) -> int:
    return max(1, int(round(count * scale)))


# ------------------------------------------------------------------ 1 ----

def check_schwarzian(seed: int = 0, scale: float = 1.0) -> CheckResult:
    """Moebius maps have vanishing Schwarzian; the cocycle identity holds."""
    t0 = time.perf_counter()
    rng = _rng(seed)
    nonzero = 0
    for _ in range(_n(200, scale)):
        a, b, c, d = _cx(rng, 4)
        if abs(a * d - b * c) < 1e-3:
            continue
        f = RationalFunction([b, a], [d, c])
        if not schwarzian(f).is_zero():
            nonzero += 1
    worst = 0.0
    for _ in range(_n(100, scale)):
        f = RationalFunction(_cx(rng, 1 + rng.integers(1, 4)), _cx(rng, 1 + rng.integers(0, 3)))
        g = RationalFunction(_cx(rng, 1 + rng.integers(1, 3)), _cx(rng, 1 + rng.integers(0, 3)))
        if f.is_constant() or g.is_constant():
            continue
        worst = max(worst, schwarzian_cocycle_check(f, g))
    ok = nonzero == 0 and worst < 1e-9
    return CheckResult(1, "Schwarzian kernel and cocycle", ok, worst, 1e-9, time.perf_counter() - t0,
                       {"moebius_nonzero": nonzero})


# ------------------------------------------------------------------ 2 ----

def check_pole_minimization(seed: int = 0, scale: float = 1.0) -> CheckResult:
    """Minimal Riccati order ``ceil(n/2)`` and round-trip pole order ``<= 2m``."""
    t0 = time.perf_counter()
    rng = _rng(seed)
    bad = []
    per = _n(4, scale)
    for n in range(1, 9):
        for trial in range(per):
            if trial % 2 == 0:
                p = complex(*rng.normal(size=2))
                num = _cx(rng, n + 1)
                den = np.poly(np.full(n, p))[::-1]
                q = RationalFunction(num, den)
                at = p
            else:
                # order n at infinity: deg num - deg den = n - 4
                p, at = INF, 0j
                q = RationalFunction(_cx(rng, n), np.poly(_cx(rng, 3))[::-1])
            if pole_order_at(q, p) != n:
                bad.append((n, "construction"))
                continue
            R, m, _ = minimize_pole_order(q, p)
            back = oper_normal_form(R).q
            k = pole_order_at(back, at)
            if m != math.ceil(n / 2) or k > 2 * m:
                bad.append((n, m, k))
    return CheckResult(2, "Pole-order minimization", not bad, float(len(bad)), 0.0, time.perf_counter() - t0,
                       {"failures": [str(b) for b in bad], "trials": 8 * per})


# ------------------------------------------------------------------ 3 ----

def _lm(coeffs, v0) -> LaurentMatrix:
    return LaurentMatrix(0j, v0, np.array(coeffs, complex))


def _random_gauge(rng, L: int) -> LaurentMatrix:
    G = 0.3 * _cx(rng, L, 2, 2)
    G[0] += np.eye(2)
    return _lm(G, 0)


def _normal_form_sample(kind: int, rng, L: int):
    """A system with known formal data: diagonal, resonant, irregular or nilpotent-leading."""
    c = np.zeros((L, 2, 2), complex)
    if kind == 0:  # regular, non-resonant
        l = _cx(rng, 1)[0] * 0.3
        c[0] = np.diag([l, -l + 0.1])
        return _lm(c, -1), 1
    if kind == 1:  # regular, resonant with log term
        r = _cx(rng, 1)[0] * 0.3
        c[0] = np.array([[r, 1.0], [0, r]])
        return _lm(c, -1), 1
    if kind == 2:  # unramified irregular: diagonal polar part of order 3
        c[:3] = _cx(rng, 3, 2, 2) * np.eye(2)
        return _lm(c, -3), 3
    # ramified: nilpotent leading term with a generic tail
    c[0] = [[0, 1], [0, 0]]
    c[1:] = 0.5 * _cx(rng, L - 1, 2, 2)
    return _lm(c, -3), 3


def check_formal_round_trip(seed: int = 0, scale: float = 1.0) -> CheckResult:
    """Gauge-transformed normal forms recover their formal data."""
    t0 = time.perf_counter()
    rng = _rng(seed)
    worst, worst_tr, L = 0.0, 0.0, 40
    kinds = {}
    for trial in range(_n(100, scale)):
        kind = trial % 4
        A, m = _normal_form_sample(kind, rng, L)
        G = _random_gauge(rng, L).truncate(L)
        A2 = G.inv() * A * G + G.inv() * G.d()
        F1, _ = formal_normal_form(A, 14)
        F2, _ = formal_normal_form(A2, 14)
        d = same_up_to_swap(F1, F2)
        worst = max(worst, d)
        kinds[F1.cls.kind] = max(kinds.get(F1.cls.kind, 0.0), d)
        for k in range(-m, 0):
            t1 = np.trace(A.coefficient(k))
            t2 = np.trace(A2.coefficient(k))
            worst_tr = max(worst_tr, abs(t1 - t2))
            if not F2.cls.ramified:  # ramified exponents live in the z = sqrt(t) variable
                lam = F2.lambda_plus.get(k, 0) + F2.lambda_minus.get(k, 0)
                worst_tr = max(worst_tr, abs(lam - t1))
    ok = worst < 1e-8 and worst_tr < 1e-10
    return CheckResult(3, "Formal round trip", ok, worst, 1e-8, time.perf_counter() - t0,
                       {"trace_residual": worst_tr, "by_class": kinds})


# ------------------------------------------------------------------ 4 ----

EULER_THETAS = (1 / 3, 1 / 2, 0, 1, 0.3 + 0.2j)


def euler_model(theta) -> RationalFunction:
    """``q = (1 - theta^2) / (2 x^2)``: a regular pole at 0 and at infinity."""
    return RationalFunction([(1 - theta**2) / 2], [0, 0, 1])


def check_euler_eigenvalues(seed: int = 0, scale: float = 1.0) -> CheckResult:
    """Local monodromy spectrum at 0 against ``exp(2 pi i (1 +- theta)/2)``."""
    t0 = time.perf_counter()
    worst, per = 0.0, {}
    dt = np.clongdouble
    tp = two_pi(dt)
    for th in EULER_THETAS:
        q = euler_model(th)
        # theta = 1 gives q = 0: the loop is still taken around the origin
        M = local_monodromy(companion_system(q), 0j, base=1.0, radius=1.0, dtype=dt)
        ev = eig2(M)
        t = np.clongdouble(complex(th))
        xi = np.exp(np.clongdouble(1j) * tp * (1 + np.array([t, -t])) / 2)
        d = max(max(min(abs(e - x) for x in xi) for e in ev), max(min(abs(e - x) for e in ev) for x in xi))
        per[str(th)] = float(d)
        worst = max(worst, float(d))
    return CheckResult(4, "Eigenvalue formula on Euler models", worst < 1e-8, worst, 1e-8,
                       time.perf_counter() - t0, {"per_theta": per})


# ------------------------------------------------------------------ 5 ----

def _random_q(rng, npoles: int = 3, irregular: bool = False):
    poles = list(1.2 * _cx(rng, npoles))
    q = RationalFunction([0])
    for i, p in enumerate(poles):
        k = 3 if (irregular and i == 0) else 2
        q = q + RationalFunction([complex(_cx(rng, 1)[0])], np.poly(np.full(k, p))[::-1])
    return q, poles


def check_fuchs_liouville(seed: int = 0, scale: float = 1.0) -> CheckResult:
    """Fuchs relation for the constructed lifts and ``det T = exp(-int tr)`` on loops."""
    t0 = time.perf_counter()
    rng = _rng(seed)
    worst_f = 0.0
    for trial in range(_n(20, scale)):
        q, poles = _random_q(rng, 3, irregular=trial % 2 == 1)
        lifts = [(oper_lift(q), 0), (oper_lift(q, odd_pole=poles[0]), 1)]
        R = RiccatiEq.oper(q)
        lifts.append((lift_riccati(R), 0))
        for S, deg in lifts:
            worst_f = max(worst_f, check_fuchs(S, deg))
    worst_l = 0.0
    for trial in range(_n(50, scale)):
        q, poles = _random_q(rng, 2)
        S = oper_lift(q, odd_pole=poles[0]) if trial % 2 else companion_system(q)
        S = S if trial % 4 < 2 else _twisted(S, rng)
        allp = [p for p, _ in S.poles()]
        b = choose_base(allp)
        path = loop_around(allp[int(rng.integers(0, len(allp)))], b, allp)
        worst_l = max(worst_l, liouville_residual(S, path))
    ok = worst_f < 1e-10 and worst_l < 1e-9
    return CheckResult(5, "Fuchs relation and Liouville identity", ok, max(worst_f, worst_l), 1e-9,
                       time.perf_counter() - t0, {"fuchs": worst_f, "liouville": worst_l})


def _twisted(S, rng):
    from .linsys import twist

    a = complex(*rng.normal(size=2)) * 0.3
    p = complex(*rng.normal(size=2))
    return twist(S, RationalFunction([a], [-p, 1]))


# ------------------------------------------------------------------ 6 ----

GENUS_ZERO_TOL = 1e-11


def check_genus_zero_relation(seed: int = 0, scale: float = 1.0) -> CheckResult:
    """Product of the generators around all poles is the identity."""
    t0 = time.perf_counter()
    rng = _rng(seed)
    worst = 0.0
    for trial in range(_n(20, scale)):
        n = 3 if trial % 2 == 0 else 4
        poles = list(1.5 * _cx(rng, n - 1))
        q = RationalFunction([0])
        for p in poles:
            q = q + RationalFunction([complex(0.5 * _cx(rng, 1)[0])], np.poly([p, p])[::-1])
            q = q + RationalFunction([complex(0.5 * _cx(rng, 1)[0])], [-p, 1])
        # the relation multiplies matrices with entries up to ~1e3: transport at 1e-11
        md = global_monodromy(companion_system(q), tol=GENUS_ZERO_TOL)
        worst = max(worst, md.product_residual)
    return CheckResult(6, "Genus-zero relation", worst < 1e-7, worst, 1e-7, time.perf_counter() - t0)


# ------------------------------------------------------------------ 7 ----

def airy_q() -> RationalFunction:
    """``y'' = x y``: a single pole of order 5 at infinity."""
    return RationalFunction([0, -2])


def check_stokes(seed: int = 0, scale: float = 1.0) -> CheckResult:
    """Airy: three unipotent Stokes matrices and the product relation; diagonal control."""
    t0 = time.perf_counter()
    sd = stokes_data(companion_system(airy_q()), INF)
    unip = max(unipotency_defect(s) for s in sd.matrices)
    prod = stokes_product_check(sd, "ccw")
    S = _diag_control()
    sc = stokes_data(S, 0j)
    ctrl = max(float(np.abs(s - np.eye(2)).max()) for s in sc.matrices)
    ok = len(sd.matrices) == 3 and unip < 1e-6 and prod < 1e-6 and ctrl < 1e-10
    return CheckResult(7, "Stokes internal consistency", ok, max(unip, prod), 1e-6, time.perf_counter() - t0,
                       {"count": len(sd.matrices), "unipotency": unip, "product": prod, "control": ctrl,
                        "stokes_offdiag": [str(np.round(s[0, 1] + s[1, 0], 10)) for s in sd.matrices]})


def _diag_control():
    from .linsys import LinearSystem

    x = X
    return LinearSystem(((1 / x**2, RationalFunction([0])), (RationalFunction([0]), -1 / x**2)))


# ------------------------------------------------------------------ 8 ----

def dimension_identities(max_order: int = 6, max_poles: int = 4) -> dict:
    """Integer identities between the two dimension counts over all order tuples."""
    checked, bad = 0, []
    for d in range(1, max_poles + 1):
        for orders in _tuples(max_order, d):
            try:
                fixed = moduli_dimension(0, orders, "residues_fixed")
                free = moduli_dimension(0, orders, "residues_free")
            except HypothesisViolated:
                continue
            integral = sum(1 for n in orders if irregularity_index(n).denominator == 1)
            checked += 1
            if fixed != free - integral or fixed < 0 or fixed % 2:
                bad.append(orders)
    return {"checked": checked, "failures": bad}


def _tuples(max_order, d):
    import itertools

    return itertools.combinations_with_replacement(range(1, max_order + 1), d)


HEJHAL_RESIDUES = (0.13 + 0.07j, 0.21 - 0.04j, 0.17 + 0.11j, 0.26 - 0.09j)


def heun_config(residues=HEJHAL_RESIDUES, t=2.5 + 1.5j) -> FamilyConfig:
    return FamilyConfig.create([2, 2, 2, 2], list(residues), [t])


def check_hejhal(seed: int = 0, scale: float = 1.0, points: int = 5, pairs: int = 100) -> CheckResult:
    """Dimension identities, Jacobian rank at interior points, injectivity probe."""
    t0 = time.perf_counter()
    rng = _rng(seed)
    ident = dimension_identities()
    cfg = heun_config()
    ranks, ratios, drift = [], [], []
    p0 = np.array(cfg.initial, complex)
    centres = []
    for _ in range(_n(points, scale)):
        params = p0 + 0.3 * _cx(rng, len(p0))
        centres.append(params)
        r1 = jacobian_rank(cfg, tuple(params), h=1e-6)
        r2 = jacobian_rank(cfg, tuple(params), h=2e-6)
        ranks.append(r1.rank)
        s1, s2 = np.array(r1.singular_values), np.array(r2.singular_values)
        ratios.append(float(s1[r1.rank - 1] / s1[0]) if r1.rank else 0.0)
        drift.append(float(np.max(np.abs(s1 - s2) / s1)))
    distinct, total, dmin = 0, _n(pairs, scale), math.inf
    c0 = monodromy_coordinates(build_family(cfg)(tuple(p0)), cfg, params=tuple(p0))
    for _ in range(total):
        p1 = p0 + 0.05 * _cx(rng, len(p0))
        v = local_injectivity_probe(cfg, tuple(p0), tuple(p1), 1e-8, base=c0.base, coords0=c0.values)
        distinct += v.verdict == "DISTINCT"
        dmin = min(dmin, v.distance)
    ok = (not ident["failures"] and all(r == 2 for r in ranks) and min(ratios) > 1e-4 and max(drift) < 0.05
          and distinct == total)
    return CheckResult(8, "Hejhal desk check", ok, max(drift), 0.05, time.perf_counter() - t0,
                       {"identities_checked": ident["checked"], "identity_failures": len(ident["failures"]),
                        "ranks": ranks, "smallest_relative_sv": min(ratios), "h_doubling_drift": max(drift),
                        "distinct": f"{distinct}/{total}", "min_coordinate_distance": dmin})


# ------------------------------------------------------------------ 9 ----

def check_residue_relation(seed: int = 0, scale: float = 1.0) -> CheckResult:
    """``4 lam^2 + 2 res2 = 1`` at regular poles of random structures."""
    from .formal import structure_formal_data

    t0 = time.perf_counter()
    rng = _rng(seed)
    worst = 0.0
    for _ in range(_n(50, scale)):
        q, poles = _random_q(rng, 3)
        p = poles[int(rng.integers(0, 3))]
        lam = structure_formal_data(q, p).residue
        res2 = residue_and_index(q, p).res2
        worst = max(worst, abs(4 * lam * lam + 2 * res2 - 1))
    return CheckResult(9, "Residue relation", worst < 1e-10, worst, 1e-10, time.perf_counter() - t0)


ALL_CHECKS = (check_schwarzian, check_pole_minimization, check_formal_round_trip, check_euler_eigenvalues,
              check_fuchs_liouville, check_genus_zero_relation, check_stokes, check_hejhal, check_residue_relation)


def run_all(seed: int = 0, scale: float = 1.0, only=None) -> list:
    out = []
    for fn in ALL_CHECKS:
        res = None
        num = ALL_CHECKS.index(fn) + 1
        if only and num not in only:
            continue
        res = fn(seed=seed, scale=scale)
        out.append(res)
    return out
