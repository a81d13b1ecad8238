"""Residue-fixed families of projective structures on P^1 and their monodromy.

A family is described by pole orders, one signed residue per pole and a
Moebius chart: with three or more poles the first three sit at 0, 1 and
infinity and any further pole position is a free parameter.  The
differential is written as

    q = P(x) / prod_finite (x - p_i)^{n_i},   deg P = sum_finite n_i + n_inf - 4,

so the pole orders are built in.  Residue constraints are linear in ``P`` at
regular poles (``res2 = (1 - 4 l^2)/2``) and are solved by Newton iteration
through the formal data at irregular unramified poles.  The remaining
coefficients of ``P`` that are not fixed by constraints are the accessory
parameters.

Monodromy coordinates are traces ``tr M_i``, ``tr M_i M_j`` (``i < j`` in
configuration order) of the companion system's generators, followed by the
off-diagonal entries of the Stokes matrices at irregular poles.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .algebra import INF, RationalFunction, as_point, cx_from_json, cx_to_json, is_inf, point_from_json, point_to_json
from .errors import HypothesisViolated, ResidueUnreachable
from .formal import irregularity_index, structure_formal_data
from .linsys import companion_system, lift_riccati
from .monodromy import choose_base, global_monodromy, stokes_data
from .projective import pole_order_at, residue_and_index
from .riccati import minimize_pole_order

FIXED = "residues_fixed"
FREE = "residues_free"
H_DEFAULT = 1e-6
RANK_TOL = 1e-4
NEWTON_TOL = 1e-12
RESIDUE_CHECK = 1e-9


# ------------------------------------------------------------- dimension ----

def _marked_count(orders) -> int:
    """Punctures count once; a pole of order ``n >= 3`` carries ``n - 2`` marked points."""
    return sum(max(1, n - 2) if n >= 3 else 1 for n in orders)


def moduli_dimension(g: int, orders, count_mode: str = FIXED) -> int:
    """Dimension of the space of marked structures with the given pole orders.

    ``residues_fixed``: ``6g - 6 + sum(2 nu_i + 3) - #{i : nu_i integer}``;
    ``residues_free``: ``6g - 6 + sum(k_i + 3)`` with ``k_i = 2 nu_i``.
    """
    g = int(g)
    orders = [int(n) for n in orders]
    if any(n < 1 for n in orders):
        raise HypothesisViolated("pole orders must be positive")
    M = _marked_count(orders)
    if g == 0 and M < 3:
        raise HypothesisViolated(f"genus 0 needs at least 3 marked points, got {M}")
    if g == 1 and M < 1:
        raise HypothesisViolated("genus 1 needs at least one marked point")
    nus = [irregularity_index(n) for n in orders]
    if count_mode == FIXED:
        tot = Fraction(6 * g - 6) + sum(2 * nu + 3 for nu in nus) - sum(1 for nu in nus if nu.denominator == 1)
    elif count_mode == FREE:
        tot = Fraction(6 * g - 6) + sum(2 * nu + 3 for nu in nus)
    else:
        raise ValueError(f"unknown count mode {count_mode!r}")
    assert tot.denominator == 1
    return int(tot)


# --------------------------------------------------------------- configs ----

@dataclass(frozen=True)
class FamilyConfig:
    """Pole orders, signed residues and the chart of a residue-fixed family.

    ``poles`` holds ``(position, order)``; a position of ``None`` marks a
    movable pole whose position is a parameter.  ``free_params`` lists
    descriptors ``("pole", i)`` and ``("coeff", k)`` (coefficient of ``x^k``
    in ``P``); ``initial`` is a default parameter vector.  ``pins`` fixes
    coefficients of ``P`` for configurations with fewer than three poles.
    """

    poles: tuple
    residues: tuple
    free_params: tuple = ()
    initial: tuple = ()
    pins: tuple = ()

    @property
    def orders(self) -> list:
        return [int(n) for _, n in self.poles]

    @property
    def dimension(self) -> int:
        return moduli_dimension(0, self.orders, FIXED)

    @classmethod
    def create(cls, orders, residues, movable=None, pins=None) -> "FamilyConfig":
        """Standard chart: poles at 0, 1, inf, then movable poles (initial positions ``movable``)."""
        orders = [int(n) for n in orders]
        d = len(orders)
        if any(n == 1 for n in orders):
            raise HypothesisViolated("simple poles are not supported by the family builder")
        if len(residues) != d:
            raise HypothesisViolated("one residue per pole is required")
        res = []
        for n, l in zip(orders, residues):
            if n % 2 == 1:
                if abs(complex(l)) > 1e-14:
                    raise HypothesisViolated("the residue at a ramified pole is 0")
                res.append(0j)
            else:
                res.append(complex(l))
        if d >= 3:
            fixed = [0j, 1 + 0j, INF]
            movable = list(movable or [])
            extra = d - 3
            if len(movable) < extra:
                defaults = [2.5 + 1.5j, -1.5 + 2.0j, 3.0 - 2.0j, -2.0 - 1.0j]
                movable = movable + defaults[len(movable):extra]
            poles = [(fixed[i], orders[i]) for i in range(3)] + [(None, orders[3 + i]) for i in range(extra)]
            init_pos = [complex(m) for m in movable[:extra]]
        elif d == 2:
            poles = [(0j, orders[0]), (INF, orders[1])]
            init_pos = []
            pins = pins if pins is not None else "leading"
        elif d == 1:
            poles = [(INF, orders[0])]
            init_pos = []
            pins = pins if pins is not None else "leading"
        else:
            raise HypothesisViolated("at least one pole is required")
        cfg = cls(tuple(poles), tuple(res), (), (), ())
        pin_rows = _default_pins(cfg) if pins == "leading" else tuple(pins or ())
        cfg = cls(tuple(poles), tuple(res), (), (), pin_rows)
        params = tuple(("pole", 3 + i) for i in range(len(init_pos)))
        coeffs = _choose_accessory(cfg, init_pos)
        free = params + tuple(("coeff", k) for k in coeffs)
        init = tuple(init_pos) + tuple(_default_coeff(k) for k in coeffs)
        cfg = cls(tuple(poles), tuple(res), free, init, pin_rows)
        if len(free) != cfg.dimension:
            raise HypothesisViolated(f"chart has {len(free)} parameters, dimension is {cfg.dimension}")
        return cfg

    def positions(self, params) -> list:
        pos = []
        for i, (p, _) in enumerate(self.poles):
            if p is None:
                k = self.free_params.index(("pole", i))
                pos.append(complex(params[k]))
            else:
                pos.append(p)
        return pos

    def to_json(self) -> dict:
        return {
            "poles": [{"point": None if p is None else point_to_json(p), "order": n} for p, n in self.poles],
            "residues": [cx_to_json(r) for r in self.residues],
            "free_params": [list(f) for f in self.free_params],
            "initial": [cx_to_json(v) for v in self.initial],
            "pins": [[k, cx_to_json(v)] for k, v in self.pins],
        }

    @classmethod
    def from_json(cls, obj) -> "FamilyConfig":
        if "free_params" not in obj or not obj["free_params"]:
            orders = [e["order"] for e in obj["poles"]]
            res = [cx_from_json(r) for r in obj["residues"]]
            mov = [cx_from_json(v) for v in obj.get("movable", [])]
            return cls.create(orders, res, mov)
        poles = tuple((None if e["point"] is None else point_from_json(e["point"]), int(e["order"])) for e in obj["poles"])
        return cls(
            poles,
            tuple(cx_from_json(r) for r in obj["residues"]),
            tuple((str(k), int(i)) for k, i in obj["free_params"]),
            tuple(cx_from_json(v) for v in obj.get("initial", [])),
            tuple((int(k), cx_from_json(v)) for k, v in obj.get("pins", [])),
        )


def _default_coeff(k: int) -> complex:
    return complex(0.3 - 0.2j) * (0.7 ** k)


def _degree_P(orders_fin, n_inf) -> int:
    return sum(orders_fin) + n_inf - 4


def _split(cfg: FamilyConfig, pos):
    fin = [(complex(p), n) for p, (_, n) in zip(pos, cfg.poles) if not is_inf(p)]
    n_inf = sum(n for p, (_, n) in zip(pos, cfg.poles) if is_inf(p))
    return fin, n_inf


def _default_pins(cfg: FamilyConfig) -> tuple:
    """Pins for one or two poles: fix the leading coefficient (and the next one for one pole)."""
    fin, n_inf = _split(cfg, [p for p, _ in cfg.poles])
    D = _degree_P([n for _, n in fin], n_inf)
    if len(cfg.poles) == 1:
        return ((D, -2 + 0j), (D - 1, 0j)) if D >= 1 else ((D, -2 + 0j),)
    return ((D, 1 + 0j),)


def _den_poly(fin) -> np.ndarray:
    den = np.ones(1, complex)
    for p, n in fin:
        for _ in range(n):
            den = np.convolve(den, [-p, 1])
    return den


def _linear_rows(cfg: FamilyConfig, pos):
    """Rows ``(row, rhs)`` of the regular-residue constraints and the pins."""
    fin, n_inf = _split(cfg, pos)
    D = _degree_P([n for _, n in fin], n_inf)
    rows = []
    for (p, n), lam in zip([(pp, nn) for pp, (_, nn) in zip(pos, cfg.poles)], cfg.residues):
        if n != 2:
            continue
        target = (1 - 4 * lam * lam) / 2
        if is_inf(p):
            row = np.zeros(D + 1, complex)
            row[D] = 1.0
            rows.append((row, target))
        else:
            p = complex(p)
            other = 1 + 0j
            for r, m in fin:
                if abs(r - p) > 0:
                    other *= (p - r) ** m
            row = np.array([p**k for k in range(D + 1)], complex) / other
            rows.append((row, target))
    for k, v in cfg.pins:
        row = np.zeros(D + 1, complex)
        row[k] = 1.0
        rows.append((row, complex(v)))
    return D, rows


def _irregular_poles(cfg: FamilyConfig, pos) -> list:
    return [(p, lam) for p, (_, n), lam in zip(pos, cfg.poles, cfg.residues) if n >= 4 and n % 2 == 0]


def _choose_accessory(cfg: FamilyConfig, init_pos) -> list:
    """Lowest coefficient indices completing the constraints to a nonsingular system."""
    it = iter(init_pos)
    pos = [next(it) if p is None else p for p, _ in cfg.poles]
    D, rows = _linear_rows(cfg, pos)
    irr = _irregular_poles(cfg, pos)
    n_free = D + 1 - len(rows) - len(irr)
    if n_free < 0:
        raise HypothesisViolated("more constraints than coefficients")
    base = [r for r, _ in rows]
    if irr:
        # linearize the irregular residues at a generic point satisfying the linear rows
        rng = np.random.default_rng(7)
        A = np.array(base).reshape(-1, D + 1)
        b = np.array([v for _, v in rows], complex)
        fill = rng.normal(size=(D + 1 - len(rows), D + 1)) + 1j * rng.normal(size=(D + 1 - len(rows), D + 1))
        c = np.linalg.solve(np.vstack([A, fill]), np.concatenate([b, np.ones(len(fill))]))
        base = base + list(_residue_jacobian(cfg, pos, c, irr))
    for combo in itertools.combinations(range(D + 1), n_free):
        M = np.array(base + [np.eye(D + 1)[k] for k in combo]).reshape(-1, D + 1)
        if np.linalg.matrix_rank(M, tol=1e-7 * np.abs(M).max()) == D + 1:
            return list(combo)
    raise HypothesisViolated("no nonsingular accessory chart found")


# ----------------------------------------------------------------- build ----

def _q_from(cfg: FamilyConfig, pos, coeffs) -> RationalFunction:
    fin, _ = _split(cfg, pos)
    return RationalFunction(np.asarray(coeffs, complex), _den_poly(fin))


def _irregular_residue(q, p) -> complex:
    return structure_formal_data(q, p).residue


def build_family(cfg: FamilyConfig):
    """Map ``params -> q`` realizing the configuration (see the module docstring)."""

    def build(params=None) -> RationalFunction:
        params = cfg.initial if params is None else tuple(params)
        if len(params) != len(cfg.free_params):
            raise HypothesisViolated(f"expected {len(cfg.free_params)} parameters")
        pos = cfg.positions(params)
        D, rows = _linear_rows(cfg, pos)
        for (kind, k), v in zip(cfg.free_params, params):
            if kind == "coeff":
                row = np.zeros(D + 1, complex)
                row[k] = 1.0
                rows.append((row, complex(v)))
        irr = _irregular_poles(cfg, pos)
        A = np.array([r for r, _ in rows]).reshape(-1, D + 1)
        b = np.array([v for _, v in rows], complex)
        if not irr:
            c = np.linalg.solve(A, b)
        else:
            rng = np.random.default_rng(11)
            extra = [rng.normal(size=D + 1) + 1j * rng.normal(size=D + 1) for _ in irr]
            c = np.linalg.solve(np.vstack([A] + extra), np.concatenate([b, np.ones(len(irr))]))
            c = _newton(cfg, pos, c, A, b, irr)
        q = _q_from(cfg, pos, c)
        _check_orders(cfg, pos, q)
        got = residues_of(q, cfg, params)
        # at double poles q fixes lambda^2 linearly; lambda itself is ill-conditioned near 0
        err = max([abs(g * g - l * l) if n == 2 else abs(g - l)
                   for g, l, (_, n) in zip(got, cfg.residues, cfg.poles)] + [0.0])
        if err > RESIDUE_CHECK:
            raise ResidueUnreachable(f"re-extracted residues deviate by {err:.2e}")
        return q

    return build


def _residues_at(cfg, pos, c, irr) -> np.ndarray:
    q = _q_from(cfg, pos, c)
    return np.array([_irregular_residue(q, p) for p, _ in irr])


def _residue_jacobian(cfg, pos, c, irr, h: float = 1e-6) -> np.ndarray:
    J = np.zeros((len(irr), len(c)), complex)
    for k in range(len(c)):
        e = np.zeros(len(c), complex)
        e[k] = h * max(1.0, abs(c[k]))
        J[:, k] = (_residues_at(cfg, pos, c + e, irr) - _residues_at(cfg, pos, c - e, irr)) / (2 * e[k])
    return J


def _newton(cfg, pos, c, A, b, irr, max_iter: int = 40):
    target = np.array([lam for _, lam in irr])

    def F(cc):
        # q only fixes the pair {lam, -lam}; the sign follows the branch of the leading term
        r = _residues_at(cfg, pos, cc, irr)
        return np.where(np.abs(r - target) <= np.abs(r + target), r - target, -r - target)

    scale = 1 + np.abs(c).max()
    for _ in range(max_iter):
        f = F(c)
        lin = A @ c - b
        if np.abs(f).max() < NEWTON_TOL * (1 + max(abs(l) for _, l in irr)) and np.abs(lin).max() < 1e-12 * scale:
            return c
        J = _residue_jacobian(cfg, pos, c, irr)
        flip = np.abs(_residues_at(cfg, pos, c, irr) + target) < np.abs(_residues_at(cfg, pos, c, irr) - target)
        J[flip] *= -1
        Jt = np.vstack([A, J])
        try:
            dc = np.linalg.solve(Jt, -np.concatenate([lin, f]))
        except np.linalg.LinAlgError as exc:
            raise ResidueUnreachable("singular Newton system for the residue constraints") from exc
        c = c + dc
    raise ResidueUnreachable("Newton iteration for the residue constraints did not converge")


def _check_orders(cfg, pos, q):
    for p, (_, n) in zip(pos, cfg.poles):
        got = pole_order_at(q, p)
        if got != n:
            raise ResidueUnreachable(f"degenerate parameters: pole at {p!r} has order {got}, expected {n}")


def residues_of(q, cfg: FamilyConfig, params) -> list:
    """Residues re-extracted from ``q``, signed to match the configuration.

    ``q`` determines each residue up to sign (``theta / 2`` at regular poles,
    the branch of the leading term at irregular ones).
    """
    out = []
    for p, (_, n), lam in zip(cfg.positions(params), cfg.poles, cfg.residues):
        r = residue_and_index(q, p).theta[0] / 2 if n == 2 else structure_formal_data(q, p).residue
        out.append(r if abs(r - lam) <= abs(r + lam) else -r)
    return out


# ----------------------------------------------------------- coordinates ----

@dataclass(frozen=True)
class MonodromyCoordinates:
    values: np.ndarray
    labels: tuple
    base: complex = 0j

    def to_json(self) -> dict:
        return {"labels": list(self.labels), "values": [cx_to_json(complex(v)) for v in self.values],
                "base": cx_to_json(self.base)}


def trace_coordinates(mats) -> tuple:
    """``tr M_i`` followed by ``tr M_i M_j`` for ``i < j``, with labels."""
    vals = [np.trace(M) for M in mats]
    labels = [f"tr M{i}" for i in range(len(mats))]
    for i, j in itertools.combinations(range(len(mats)), 2):
        vals.append(np.trace(mats[i] @ mats[j]))
        labels.append(f"tr M{i}M{j}")
    return vals, labels


def structure_stokes(q, p, tol: float = 1e-6):
    """Stokes data of the structure at an irregular pole, on a minimal lift."""
    R, m, _ = minimize_pole_order(q, p)
    S = lift_riccati(R)
    return stokes_data(S, 0j if is_inf(p) else p, tol=tol)


def monodromy_coordinates(P, cfg: FamilyConfig, tol: float = 1e-9, *, params=None, base=None,
                          with_stokes: bool = True) -> MonodromyCoordinates:
    """Trace coordinates of the companion monodromy plus Stokes off-diagonals.

    Single traces do not depend on ``base``.  The pairwise traces depend on the
    generating system, which changes by a braid move when the base crosses a
    spoke, so compare coordinates only at a common base.
    """
    q = P.q if hasattr(P, "q") else P
    params = cfg.initial if params is None else params
    pos = cfg.positions(params)
    S = companion_system(q)
    fin = [complex(p) for p in pos if not is_inf(p)]
    b = complex(base) if base is not None else choose_base(fin)
    md = global_monodromy(S, pos, b, tol)
    vals, labels = trace_coordinates([md.matrix(p) for p in pos])
    if with_stokes:
        for i, (p, (_, n)) in enumerate(zip(pos, cfg.poles)):
            if n >= 3:
                sd = structure_stokes(q, p)
                for k, Sm in enumerate(sd.matrices):
                    # triangular: exactly one off-diagonal slot is populated
                    vals.append(Sm[0, 1] + Sm[1, 0])
                    labels.append(f"stokes{i}.{k}")
    return MonodromyCoordinates(np.array(vals, complex), tuple(labels), b)


@dataclass(frozen=True)
class JacobianReport:
    rank: int
    singular_values: tuple
    expected: int
    h: float

    @property
    def ok(self) -> bool:
        return self.rank == self.expected

    def to_json(self) -> dict:
        return {"rank": self.rank, "singular_values": list(self.singular_values), "expected": self.expected,
                "h": self.h, "pass": self.ok}


def _coords_at(cfg, build, params, base, tol):
    q = build(params)
    return monodromy_coordinates(q, cfg, tol, params=params, base=base).values


def jacobian_rank(cfg: FamilyConfig, params0=None, h: float = H_DEFAULT, tol: float = RANK_TOL,
                  ode_tol: float = 1e-10, threads: int = 1) -> JacobianReport:
    """Rank of the central-difference Jacobian of the coordinates (complex parameters).

    The base point is chosen at ``params0`` and kept for the whole stencil.
    ``threads > 1`` evaluates the stencil points concurrently; the result does
    not depend on it.
    """
    params0 = tuple(cfg.initial if params0 is None else params0)
    expected = cfg.dimension
    if not params0:
        return JacobianReport(0, (), expected, h)
    build = build_family(cfg)
    pos = cfg.positions(params0)
    base = choose_base([complex(p) for p in pos if not is_inf(p)])
    steps, points = [], []
    for k in range(len(params0)):
        e = np.zeros(len(params0), complex)
        e[k] = h * max(1.0, abs(params0[k]))
        steps.append(e[k])
        points += [tuple(np.array(params0) + e), tuple(np.array(params0) - e)]
    run = lambda pt: _coords_at(cfg, build, pt, base, ode_tol)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            vals = list(ex.map(run, points))
    else:
        vals = [run(pt) for pt in points]
    cols = [(vals[2 * k] - vals[2 * k + 1]) / (2 * steps[k]) for k in range(len(params0))]
    J = np.array(cols).T
    sv = np.linalg.svd(J, compute_uv=False)
    rank = int(np.sum(sv > tol * sv[0])) if sv.size and sv[0] > 0 else 0
    return JacobianReport(rank, tuple(float(s) for s in sv), expected, h)


@dataclass(frozen=True)
class ProbeVerdict:
    verdict: str
    distance: float
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "distance": self.distance, **self.diagnostics}


def local_injectivity_probe(cfg: FamilyConfig, params0, params1, tol: float = 1e-8, *, base=None,
                            ode_tol: float = 1e-10, coords0=None) -> ProbeVerdict:
    """DISTINCT when the coordinate vectors differ by more than ``tol``, else SUSPECT."""
    build = build_family(cfg)
    pos = cfg.positions(params0)
    if base is None:
        base = choose_base([complex(p) for p in pos if not is_inf(p)])
    c0 = coords0 if coords0 is not None else _coords_at(cfg, build, tuple(params0), base, ode_tol)
    c1 = _coords_at(cfg, build, tuple(params1), base, ode_tol)
    dist = float(np.abs(c0 - c1).max())
    pd = float(np.abs(np.array(params0, complex) - np.array(params1, complex)).max())
    if dist > tol:
        return ProbeVerdict("DISTINCT", dist, {"param_distance": pd})
    return ProbeVerdict("SUSPECT", dist, {"param_distance": pd, "coords0": [cx_to_json(complex(v)) for v in c0],
                                          "coords1": [cx_to_json(complex(v)) for v in c1]})
