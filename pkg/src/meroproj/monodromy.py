"""Numerical monodromy and Stokes data of 2x2 systems on P^1.

Conventions
-----------
* Systems are ``dY + Omega Y dx = 0``.  A path ``gamma`` from the base point
  ``b`` transports the solution with ``Y(b) = I`` to ``T(gamma)``; the
  monodromy of a loop is ``M = T(gamma)``, so that ``Y^gamma = Y M`` and
  ``M_{gamma delta} = M_delta M_gamma`` (``gamma`` first).
* Loops are counterclockwise; the loop around infinity is counterclockwise
  in ``t = 1/x`` (clockwise in ``x``).  Generators are listed in the order a
  counterclockwise sweep from the free direction ``theta0`` meets the spokes,
  and ``M_inf M_d ... M_1 = I``.
* Stokes matrices compare consecutive sectorial solutions,
  ``S_j = C_j^{-1} C_{j+1}``, where ``C_j`` holds (in the base frame) the
  recessive solutions on the two Stokes rays bounding sector ``j``.  They
  satisfy ``(C_1^{-1} M_t C_1) S_1 ... S_K = M_f`` with ``M_t`` the
  counterclockwise local monodromy in the local chart and ``M_f`` the
  monodromy of the formal solutions.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre

from .algebra import INF, RationalFunction, as_point, cx_matrix_to_json, cx_to_json, is_inf, point_to_json
from .errors import MatchingFailed, NotIrregular, NotRegularSingular, PoleTooClose, ToleranceNotMet
from .formal import FormalData, formal_monodromy_of_solutions, formal_normal_form
from .integrator import Arc, Line, TransportStats, reverse_segments, transport, two_pi
from .projective import QuadraticDifferential, pole_order_at, residue_and_index

DEFAULT_TOL = 1e-9
DEFAULT_RTOL = 1e-12
CLEARANCE = 0.4


# ----------------------------------------------------------- evaluation ----

def matrix_evaluator(M, dtype=np.complex128):
    """Callable ``t -> M(t)`` for a 2x2 matrix of rational functions."""
    ents = [[(np.asarray(M[i][j].num[::-1], dtype=np.complex128), np.asarray(M[i][j].den[::-1], dtype=np.complex128))
             for j in range(2)] for i in range(2)]
    dt = np.dtype(dtype)
    ents = [[(n.astype(dt), d.astype(dt)) for n, d in row] for row in ents]

    def horner(c, t):
        acc = c[0] * np.ones_like(t)
        for a in c[1:]:
            acc = acc * t + a
        return acc

    if dt == np.dtype(np.complex128):
        # scalar fast path in plain Python complex arithmetic
        flat = [([complex(a) for a in n], [complex(a) for a in d]) for row in ents for n, d in row]

        def hs(c, t):
            acc = c[0]
            for a in c[1:]:
                acc = acc * t + a
            return acc

        def A(t):
            if np.ndim(t):
                return _array_eval(t)
            t = complex(t)
            v = [hs(n, t) / hs(d, t) for n, d in flat]
            return np.array([[v[0], v[1]], [v[2], v[3]]])
    else:
        def A(t):
            if np.ndim(t):
                return _array_eval(t)
            t = np.asarray(t, dtype=dt)
            out = np.empty((2, 2), dtype=dt)
            for i in range(2):
                for j in range(2):
                    n, d = ents[i][j]
                    out[i, j] = horner(n, t) / horner(d, t)
            return out

    def _array_eval(t):
        t = np.asarray(t, dtype=dt)
        out = np.empty(t.shape + (2, 2), dtype=dt)
        for i in range(2):
            for j in range(2):
                n, d = ents[i][j]
                out[..., i, j] = horner(n, t) / horner(d, t)
        return out

    return A


def local_evaluator(S, p, dtype=np.complex128):
    """``A(t)`` of the system in the local coordinate ``t = x - p`` (``1/x`` at infinity)."""
    p = as_point(p)
    if is_inf(p):
        return matrix_evaluator(S.omega_at_infinity(), dtype)
    from .algebra import X, rf_compose

    shifted = [[rf_compose(S.omega[i][j], X + p) for j in range(2)] for i in range(2)]
    return matrix_evaluator(shifted, dtype)


def eig2(M) -> np.ndarray:
    """Eigenvalues of a 2x2 matrix in its own precision."""
    M = np.asarray(M)
    tr = M[0, 0] + M[1, 1]
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    disc = np.sqrt(tr * tr / 4 - det)
    return np.array([tr / 2 + disc, tr / 2 - disc])


# ----------------------------------------------------------------- paths ----

@dataclass(frozen=True)
class PathSpec:
    """A path in the x-plane made of straight segments and circular arcs."""

    segments: tuple
    kind: str = "segment"  # "loop" or "segment"
    base: complex = 0j
    around: object = None

    @classmethod
    def polyline(cls, vertices, kind: str = "segment") -> "PathSpec":
        v = [complex(z) for z in vertices]
        segs = tuple(Line(a, b) for a, b in zip(v[:-1], v[1:]))
        if kind == "loop" and abs(v[0] - v[-1]) > 1e-12:
            raise ValueError("a loop must be closed")
        return cls(segs, kind, v[0])

    @property
    def vertices(self) -> list:
        pts = [self.segments[0].start] if self.segments else []
        for s in self.segments:
            if isinstance(s, Arc):
                pts.extend(list(s.sample(33))[1:])
            else:
                pts.append(s.end)
        return pts

    def reversed(self) -> "PathSpec":
        segs = tuple(reverse_segments(self.segments))
        return PathSpec(segs, self.kind, segs[0].start if segs else self.base, self.around)

    def then(self, other: "PathSpec") -> "PathSpec":
        return PathSpec(self.segments + other.segments, "loop" if self.kind == other.kind == "loop" else "segment",
                        self.base, None)

    def sample(self, n_per: int = 64) -> np.ndarray:
        return np.concatenate([s.sample(n_per) for s in self.segments]) if self.segments else np.zeros(0, complex)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "base": cx_to_json(self.base), "segments": [s.to_json() for s in self.segments]}
        if self.around is not None:
            out["around"] = point_to_json(self.around)
        return out


def _finite(points) -> list:
    return [complex(p) for p in points if not is_inf(p)]


def _gap(p: complex, poles: list) -> float:
    d = [abs(p - r) for r in poles if abs(p - r) > 1e-12]
    return min(d) if d else math.inf


def clearance_radius(poles: list, fraction: float = CLEARANCE) -> dict:
    """Loop radius ``fraction * nearest gap`` per finite pole (1.0 for an isolated pole)."""
    if not 0.1 < fraction < 0.5:
        raise ValueError("path clearance must lie in (0.1, 0.5)")
    out = {}
    for p in poles:
        g = _gap(p, poles)
        out[p] = fraction * g if math.isfinite(g) else 1.0
    return out


def _seg_dist(z, a, b) -> float:
    ab = b - a
    if abs(ab) == 0:
        return abs(z - a)
    s = max(0.0, min(1.0, ((z - a) * ab.conjugate()).real / abs(ab) ** 2))
    return abs(z - (a + s * ab))


def choose_base(poles: list) -> complex:
    """Deterministic base point whose spokes keep clear of the other poles."""
    if not poles:
        return 0j
    c = sum(poles) / len(poles)
    span = max([abs(p - c) for p in poles] + [1.0])
    rad = clearance_radius(poles)
    best, score = None, -math.inf
    for R in (0.35, 0.7, 1.1, 1.6):
        for k in range(48):
            b = c + R * span * cmath.exp(2j * math.pi * (k + 0.37) / 48)
            sc = min(abs(b - p) / (1.25 * rad[p]) for p in poles)
            for p in poles:
                for r in poles:
                    if r != p:
                        sc = min(sc, _seg_dist(r, b, p) / (1.25 * rad[r]))
            sc -= 1e-3 * R  # prefer nearby base points
            if sc > score + 1e-9:
                best, score = b, sc
    return best


def _angle_turns(z: complex) -> float:
    return (cmath.phase(z) / (2 * math.pi)) % 1.0


def loop_around(p, base: complex, poles: list, radius: float | None = None) -> PathSpec:
    """Spoke, counterclockwise circle, spoke back.

    For ``p = inf`` the circle is centred at the centroid of the finite poles
    with the smallest radius keeping clear of them, and run clockwise in
    ``x``.  Any tether from the base gives the same monodromy (tethers differ
    by powers of this very loop), so the spoke leaves the base along the
    widest angular gap when the base is inside the circle and heads straight
    for the circle otherwise.  Small circles matter near an irregular point
    at infinity, where solutions grow transiently along large arcs.
    """
    base = complex(base)
    if is_inf(p):
        if not poles:
            R, c = radius or 1.0, base
        else:
            c = sum(poles) / len(poles)
            rad = clearance_radius(poles)
            R = radius or max(abs(q - c) + rad[q] for q in poles)
        d = base - c
        if abs(d) >= R * (1 - 1e-12):
            th = _angle_turns(d) if abs(d) > 0 else 0.0
        else:
            th = _best_exit(base, c, R, poles)
        a = c + R * cmath.exp(2j * math.pi * th)
        arc = Arc(c, R, th, th - 1.0)
        if abs(a - base) <= 1e-12 * R:
            return PathSpec((arc,), "loop", base, INF)
        return PathSpec((Line(base, a), arc, Line(a, base)), "loop", base, INF)
    p = complex(p)
    r = radius or clearance_radius(poles or [p])[p]
    d = base - p
    if abs(d) <= r * (1 + 1e-12):
        # base on (or inside) the circle: use a circle through the base point
        r = abs(d)
        th = _angle_turns(d)
        return PathSpec((Arc(p, r, th, th + 1.0),), "loop", base, p)
    th = _angle_turns(d)
    a = p + r * cmath.exp(2j * math.pi * th)
    return PathSpec((Line(base, a), Arc(p, r, th, th + 1.0), Line(a, base)), "loop", base, p)


def _ray_exit(base: complex, c: complex, R: float, direction: float) -> float:
    """Angle (turns, about ``c``) where the ray from ``base`` inside the circle meets it."""
    u = cmath.exp(2j * math.pi * direction)
    d = base - c
    # |d + s u| = R with s > 0
    bq = (d * u.conjugate()).real
    s = -bq + math.sqrt(bq * bq - (abs(d) ** 2 - R * R))
    return _angle_turns(d + s * u)


def _best_exit(base: complex, c: complex, R: float, poles: list) -> float:
    """Exit angle of the spoke from an interior base that keeps clearest of the poles."""
    if not poles:
        return 0.0
    rad = clearance_radius(poles)
    best, score = 0.0, -math.inf
    for k in range(48):
        th = _ray_exit(base, c, R, (k + 0.5) / 48)
        a = c + R * cmath.exp(2j * math.pi * th)
        sc = min(_seg_dist(p, base, a) / rad[p] for p in poles)
        if sc > score + 1e-12:
            best, score = th, sc
    return best


def free_direction(base: complex, poles: list) -> float:
    """Middle (in turns) of the widest angular gap between spokes from ``base``."""
    if not poles:
        return 0.0
    angs = sorted(_angle_turns(p - base) for p in poles)
    gaps = [((angs[(i + 1) % len(angs)] - angs[i]) % 1.0 or 1.0, angs[i]) for i in range(len(angs))]
    g, a = max(gaps)
    return (a + g / 2) % 1.0


def check_clearance(path: PathSpec, poles: list, rho_min: dict | float | None = None):
    pts = path.sample(128)
    for p in poles:
        lim = rho_min if isinstance(rho_min, float) else (rho_min or {}).get(p)
        if lim is None:
            g = _gap(p, poles)
            lim = 0.1 * g if math.isfinite(g) else 0.05
        if pts.size and np.min(np.abs(pts - p)) < lim:
            raise PoleTooClose(f"path passes within {lim:.3g} of the pole {p}")


# ------------------------------------------------------------ transport ----

def continue_solution(S, path: PathSpec, tol: float = DEFAULT_TOL, *, dtype=np.complex128,
                      rtol: float | None = None, check: bool = True) -> np.ndarray:
    """Transport matrix ``T(path)`` with ``Y(start) = I``."""
    poles = [p for p, _ in S.poles()]
    if check:
        check_clearance(path, poles)
    A = matrix_evaluator(S.matrix(), dtype)
    st = TransportStats()
    rt = rtol if rtol is not None else min(DEFAULT_RTOL, tol * 1e-3)
    if np.dtype(dtype) == np.dtype(np.clongdouble):
        rt = rtol if rtol is not None else 1e-16
    M = transport(A, path.segments, rtol=rt, atol=rt * 1e-2, dtype=dtype, stats=st)
    if st.err_estimate > 10 * tol:
        raise ToleranceNotMet(f"estimated transport error {st.err_estimate:.2e} exceeds {tol:.1e}")
    return M


def local_monodromy(S, p, base=None, radius=None, tol: float = DEFAULT_TOL, dtype=np.complex128) -> np.ndarray:
    """Monodromy of a single counterclockwise loop around ``p``.

    Without a base point the loop is the circle of the clearance radius
    based on the circle itself.
    """
    p = as_point(p)
    poles = [q for q, _ in S.poles()]
    if is_inf(p):
        b = complex(base) if base is not None else (0j if not poles else choose_base(poles))
        path = loop_around(INF, b, poles, radius)
    else:
        r = radius or clearance_radius(poles or [complex(p)]).get(complex(p), 1.0)
        b = complex(base) if base is not None else complex(p) + r
        path = loop_around(p, b, poles, r)
    return continue_solution(S, path, tol, dtype=dtype)


@dataclass
class LocalData:
    pole: object
    matrix: np.ndarray
    eigenvalues: np.ndarray
    formal: FormalData | None = None
    formal_monodromy: np.ndarray | None = None
    stokes: list = field(default_factory=list)
    frame: np.ndarray | None = None
    local_chart_monodromy: np.ndarray | None = None
    matching_residual: float = 0.0

    def to_json(self) -> dict:
        out = {
            "pole": point_to_json(self.pole),
            "matrix": cx_matrix_to_json(self.matrix),
            "eigenvalues": [cx_to_json(complex(e)) for e in self.eigenvalues],
        }
        if self.formal is not None:
            out["formal"] = self.formal.to_json()
        if self.formal_monodromy is not None:
            out["formal_monodromy"] = cx_matrix_to_json(self.formal_monodromy)
        if self.stokes:
            out["stokes"] = [cx_matrix_to_json(s) for s in self.stokes]
        return out


@dataclass
class MonodromyData:
    base: complex
    generators: list  # [(pole, matrix)] in traversal order
    product_residual: float
    local: dict = field(default_factory=dict)
    paths: dict = field(default_factory=dict)

    def matrix(self, p) -> np.ndarray:
        for q, M in self.generators:
            if (is_inf(q) and is_inf(p)) or (not is_inf(q) and not is_inf(p) and abs(complex(q) - complex(p)) < 1e-9):
                return M
        raise KeyError(p)

    def to_json(self) -> dict:
        return {
            "base": cx_to_json(self.base),
            "generators": [{"pole": point_to_json(p), "matrix": cx_matrix_to_json(M)} for p, M in self.generators],
            "product_residual": self.product_residual,
            "local": [v.to_json() for v in self.local.values()],
        }


def _pole_list(S, poles):
    if poles is None:
        pts = [p for p, _ in S.poles()]
        if S.pole_order_at(INF) > 0:
            pts.append(INF)
        return pts
    if hasattr(poles, "points"):
        return list(poles.points)
    return [as_point(p) for p in poles]


def _as_double(M) -> np.ndarray:
    return np.asarray(M).astype(np.complex128)


def global_monodromy(S, poles=None, base=None, tol: float = DEFAULT_TOL, *, with_stokes: bool = False,
                     stokes_tol: float = 1e-6, clearance: float = CLEARANCE, dtype=np.complex128,
                     rtol: float | None = None) -> MonodromyData:
    """Generators of the monodromy representation based at ``base``.

    ``clearance`` is the loop radius as a fraction of the distance to the
    nearest other pole.  ``dtype=np.clongdouble`` integrates in extended
    precision; the generators are returned in double precision.
    """
    pts = _pole_list(S, poles)
    fin = _finite(pts)
    all_fin = [p for p, _ in S.poles()]
    for p in all_fin:
        if not any(abs(p - q) < 1e-9 for q in fin):
            fin.append(p)  # every finite pole must be encircled for the relation to hold
    b = complex(base) if base is not None else choose_base(fin)
    if any(abs(b - p) < 1e-12 for p in fin):
        raise PoleTooClose("base point is a pole")
    th0 = free_direction(b, fin)
    order = sorted(fin, key=lambda p: (_angle_turns(p - b) - th0) % 1.0)
    gens, paths = [], {}
    rad = clearance_radius(fin, clearance) if fin else {}
    for p in order:
        path = loop_around(p, b, fin, rad[p])
        gens.append((p, _as_double(continue_solution(S, path, tol, dtype=dtype, rtol=rtol))))
        paths[p] = path
    if any(is_inf(p) for p in pts) or S.pole_order_at(INF) > 0:
        path = loop_around(INF, b, fin)
        gens.append((INF, _as_double(continue_solution(S, path, tol, dtype=dtype, rtol=rtol))))
        paths[INF] = path
    prod = np.eye(2, dtype=complex)
    for _, M in gens:
        prod = M @ prod
    resid = float(np.abs(prod - np.eye(2)).max())
    local = {}
    for p, M in gens:
        key = "inf" if is_inf(p) else p
        ld = LocalData(p, M, eig2(M))
        if with_stokes:
            try:
                sd = stokes_data(S, p, tol=stokes_tol)
                ld.formal, ld.stokes, ld.frame = sd.formal, sd.matrices, sd.frame
                ld.local_chart_monodromy, ld.matching_residual = sd.local_chart_monodromy, sd.matching_residual
                ld.formal_monodromy = sd.formal_monodromy
            except NotIrregular:
                pass
        local[key] = ld
    return MonodromyData(b, gens, resid, local, paths)


# ---------------------------------------------------------- checks ----

def local_eigenvalue_check(P, p, M_local, tol: float = 1e-8) -> float:
    """Hausdorff distance between ``spec(M_local)`` and ``exp(2 pi i (1 +- theta)/2)``."""
    q = P.q if isinstance(P, QuadraticDifferential) else RationalFunction.coerce(P)
    p = as_point(p)
    rep = residue_and_index(q, p)
    if rep.order > 2:
        raise NotRegularSingular(f"pole of order {rep.order} is irregular")
    theta = rep.theta[0]
    M = np.asarray(M_local)
    ev = eig2(M)
    if M.dtype == np.dtype(np.clongdouble):
        tp = two_pi(M.dtype)
        th = np.clongdouble(theta)
        xi = np.exp(np.clongdouble(1j) * tp * (1 + np.array([th, -th])) / 2)
    else:
        xi = np.exp(2j * np.pi * (1 + np.array([theta, -theta])) / 2)
    d1 = max(min(abs(e - x) for x in xi) for e in ev)
    d2 = max(min(abs(e - x) for e in ev) for x in xi)
    return float(max(d1, d2))


def path_trace_integral(S, path: PathSpec, nodes: int = 24, pieces: int = 64) -> complex:
    """``int_path tr(Omega) dx`` by composite Gauss-Legendre quadrature."""
    tr = S.trace()
    xg, wg = legendre.leggauss(nodes)
    total = 0j
    for seg in path.segments:
        edges = np.linspace(0, 1, pieces + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            s = (a + b) / 2 + (b - a) / 2 * xg
            t, dt = seg.point(s, np.complex128)
            total += complex(np.sum(wg * tr(t) * dt) * (b - a) / 2)
    return total


def liouville_residual(S, path: PathSpec, M=None, tol: float = DEFAULT_TOL) -> float:
    """``|det T(path) - exp(-int tr Omega)|`` relative to the exponential."""
    if M is None:
        M = continue_solution(S, path, tol)
    e = np.exp(-path_trace_integral(S, path))
    return float(abs(np.linalg.det(M) - e) / max(abs(e), 1e-300))


def projective_distance(M1, M2) -> float:
    """Distance between the images in PGL(2): min over signs after det normalization."""
    A = np.asarray(M1, complex) / np.sqrt(np.linalg.det(M1))
    B = np.asarray(M2, complex) / np.sqrt(np.linalg.det(M2))
    return float(min(np.abs(A - B).max(), np.abs(A + B).max()))


# ------------------------------------------------------------------ Stokes ----

@dataclass
class StokesData:
    matrices: list
    frame: np.ndarray
    local_chart_monodromy: np.ndarray
    formal: FormalData
    formal_monodromy: np.ndarray  # monodromy of formal solutions (ccw convention)
    rays: list  # (angle in the local chart, recessive column)
    matching_residual: float
    matching_radius: float

    def to_json(self) -> dict:
        return {
            "stokes": [cx_matrix_to_json(s) for s in self.matrices],
            "rays": [{"angle": a, "recessive": int(k)} for a, k in self.rays],
            "matching_residual": self.matching_residual,
            "matching_radius": self.matching_radius,
            "formal": self.formal.to_json(),
        }


def _local_gap(S, p) -> float:
    """Distance from ``p`` to the nearest other singularity in the local chart."""
    fin = [q for q, _ in S.poles()]
    if is_inf(p):
        return 1.0 / max(abs(q) for q in fin) if fin else math.inf
    p = complex(p)
    d = [abs(q - p) for q in fin if abs(q - p) > 1e-12]
    return min(d) if d else math.inf


def _optimal_truncation(Gc: np.ndarray, rho: float, window: int = 6):
    """Truncation index minimizing the size of the first omitted terms.

    Term sizes are taken as a running maximum over ``window`` consecutive
    orders so that isolated vanishing coefficients do not stop the series.
    """
    mags = np.abs(Gc).reshape(len(Gc), -1).max(axis=1) * rho ** np.arange(len(Gc))
    n = len(mags) - window + 1
    if n < 2:
        return len(mags), float(mags[-1])
    run = np.array([mags[k : k + window].max() for k in range(1, n)])
    k = int(np.argmin(run)) + 1
    return k, float(run[k - 1])


def stokes_data(S, p, F: FormalData | None = None, tol: float = 1e-6, *, N: int = 60,
                n_match: int = 8, eps: float = 1e-13, base_radius: float | None = None) -> StokesData:
    """Stokes matrices at an irregular pole by matching recessive solutions.

    On each Stokes ray the solution recessive towards the pole is matched to
    the optimally truncated formal solution at ``n_match`` radii and carried
    outward (the direction in which it grows) to the base point on the circle
    of radius ``base_radius`` in the local chart.
    """
    p = as_point(p)
    A_lm = S.local_matrix(p, N + 8)
    Fn, G = formal_normal_form(A_lm, N)
    if Fn.cls.regular:
        raise NotIrregular(f"the pole {p!r} is regular singular")
    ram = Fn.cls.ramified
    w = 2 if ram else 1
    nf = Fn.normal_form
    mz = -nf.min_order
    r = mz - 1
    d = Fn.lambda_plus[-mz] - Fn.lambda_minus[-mz]
    Gc = G.coeffs
    lam_p = Fn.lambda_plus
    lam_m = Fn.lambda_minus
    L = np.array([Fn.residue_plus, Fn.residue_minus])
    if ram:
        Mf = formal_monodromy_of_solutions(Fn, "ccw")
    else:
        Mf = formal_monodromy_of_solutions(Fn)

    gap = _local_gap(S, p)
    rb = base_radius or min(1.0, 0.5 * gap)
    # matching radius in the formal variable
    rz_max = 0.7 * rb ** (1.0 / w)
    rho = rz_max
    for _ in range(200):
        _, err = _optimal_truncation(Gc, rho)
        if err <= eps * np.abs(Gc[0]).max():
            break
        rho *= 0.97
    radii = rho * (0.75 + 0.25 * np.arange(n_match) / max(1, n_match - 1))

    def Q(k_col, z):
        lam = lam_p if k_col == 0 else lam_m
        return sum(c * z ** (k + 1) / (k + 1) for k, c in lam.items() if k <= -2)

    def formal_col(k_col, rad, phi):
        z = rad * cmath.exp(1j * phi)
        kk, _ = _optimal_truncation(Gc, rad)
        g = sum(Gc[j][:, k_col] * z**j for j in range(kk))
        logz = math.log(rad) + 1j * phi
        return g * cmath.exp(-L[k_col] * logz - Q(k_col, z))

    # Stokes rays: column 0 is recessive where Re(-d z^{-r}) is maximal
    th_b = 0.0
    spacing = w * math.pi / r  # in the local chart
    K = int(round(2 * math.pi / spacing))
    cand = []
    for k in range(-4 * r, 8 * r):
        for col, ang in ((0, cmath.phase(-d)), (1, cmath.phase(d))):
            psi = w * (ang + 2 * math.pi * k) / r
            if th_b - 1e-12 <= psi:
                cand.append((psi, col))
    cand.sort()
    rays = cand[: K + 2]
    A_t = local_evaluator(S, p)

    vecs, spreads = [], []
    for psi, col in rays:
        phi = psi / w
        tpts = [rad**w * cmath.exp(1j * psi) for rad in radii]
        cols = [formal_col(col, rad, phi) for rad in radii]
        segs = [Line(tpts[0], tpts[-1]), Line(tpts[-1], rb * cmath.exp(1j * psi)),
                Arc(0j, rb, psi / (2 * math.pi), th_b / (2 * math.pi))]
        span = tpts[-1] - tpts[0]
        stops = [((tp - tpts[0]) / span).real for tp in tpts[1:-1]]

        def on_cp(si, s, Y, _cols=cols, _stops=stops):
            i = _stops.index(min(_stops, key=lambda u: abs(u - float(s)))) + 1
            return np.concatenate([Y, _cols[i][:, None]], axis=1)

        # the last matching column is appended at the start of the second segment
        Y = transport(A_t, segs[:1], np.array(cols[0])[:, None], rtol=1e-12, atol=1e-300,
                      checkpoints={0: stops}, on_checkpoint=on_cp, renorm_every=0)
        Y = np.concatenate([Y, cols[-1][:, None]], axis=1)
        Y = transport(A_t, segs[1:], Y, rtol=1e-12, atol=1e-300, renorm_every=0)
        c = Y.mean(axis=1)
        spreads.append(float(np.abs(Y - c[:, None]).max() / np.abs(c).max()))
        vecs.append((col, c))

    def C(j):
        M = np.zeros((2, 2), complex)
        (a1, v1), (a2, v2) = vecs[j], vecs[j + 1]
        M[:, a1] = v1
        M[:, a2] = v2
        return M

    Cs = [C(j) for j in range(K + 1)]
    stokes = [np.linalg.solve(Cs[j], Cs[j + 1]) for j in range(K)]
    Mt = transport(A_t, [Arc(0j, rb, th_b / (2 * math.pi), th_b / (2 * math.pi) + 1.0)], rtol=1e-12, atol=1e-16)
    spread = max(spreads)
    if spread > tol:
        raise MatchingFailed(f"asymptotic matching residual {spread:.2e} above {tol:.1e}")
    return StokesData(stokes, Cs[0], Mt, Fn, Mf, [(psi, col) for psi, col in rays[:K]], spread, float(rho))


def compute_stokes(S, p, F: FormalData | None = None, tol: float = 1e-6, **kw) -> list:
    """Stokes matrices (one per Stokes ray) at an irregular pole."""
    return stokes_data(S, p, F, tol, **kw).matrices


def stokes_product_check(local, convention: str = "ccw") -> float:
    """Residual of ``(C^{-1} M_t C) S_1 ... S_K = M_f``.

    ``local`` is a :class:`StokesData` or a :class:`LocalData` carrying Stokes
    data.  ``convention`` selects the half-turn orientation of the ramified
    formal monodromy.  For a regular pole (no Stokes data) the residual is the
    distance between the projective spectra of the local and formal
    monodromies.
    """
    F = local.formal
    if isinstance(local, LocalData) and not local.stokes:
        if F is None:
            return 0.0
        Mf = formal_monodromy_of_solutions(F, convention)
        return _spectral_distance(local.matrix, Mf)
    Mt = local.local_chart_monodromy
    Cf = local.frame
    if F.cls.ramified:
        Mf = formal_monodromy_of_solutions(F, convention)
    else:
        Mf = formal_monodromy_of_solutions(F)
    prod = np.linalg.solve(Cf, Mt @ Cf)
    for Sm in local.stokes if isinstance(local, LocalData) else local.matrices:
        prod = prod @ Sm
    return float(np.abs(prod - Mf).max() / max(1.0, np.abs(Mf).max()))


def _spectral_distance(M1, M2) -> float:
    """Distance between projective spectra (eigenvalue ratios up to inversion)."""
    e1, e2 = eig2(np.asarray(M1, complex)), eig2(np.asarray(M2, complex))
    r1, r2 = e1[0] / e1[1], e2[0] / e2[1]
    return float(min(abs(r1 - r2), abs(r1 - 1 / r2)))


def unipotency_defect(M) -> float:
    """Max distance of the eigenvalues of ``M`` from 1."""
    return float(np.abs(eig2(np.asarray(M, complex)) - 1).max())
