import math

import numpy as np
import pytest

from meroproj.algebra import INF, RationalFunction, X
from meroproj.errors import AlreadyTransverse, SectionInvariant
from meroproj.projective import pole_order_at, schwarzian
from meroproj.riccati import (MoebiusGauge, RiccatiEq, elem_transform, fiber_singular_points, gauge_apply,
                              is_apparent, minimal_riccati_order, minimize_pole_order, oper_normal_form,
                              restore_transversality, riccati_pole_order, self_intersection,
                              self_intersection_nonnegative)


def test_oper_round_trip():
    q = (X + 2) / (X**2 * (X - 1))
    assert oper_normal_form(RiccatiEq.oper(q)).q.allclose(q)


def test_normal_form_is_gauge_invariant():
    q = 1 / (X**3 - 1)
    R = RiccatiEq.oper(q)
    G = MoebiusGauge(X + 1, RationalFunction.const(2), RationalFunction.const(0), RationalFunction.const(1))
    assert oper_normal_form(gauge_apply(R, G)).q.allclose(q, tol=1e-8)


def test_normal_form_of_a_chart_is_its_schwarzian():
    # the Riccati equation solved by y = f'' / (2 f') - type data: a developing map f gives q = S(f)
    f = X**3 / (X - 2)
    q = schwarzian(f)
    # gauge equivalence of dy + (y^2 + q/2) dx with itself under a constant Moebius map
    G = MoebiusGauge.scaling(3.0)
    assert oper_normal_form(gauge_apply(RiccatiEq.oper(q), G)).q.allclose(q, tol=1e-8)


def test_section_invariant_rejected():
    with pytest.raises(SectionInvariant):
        oper_normal_form(RiccatiEq(0, X, 1))


@pytest.mark.parametrize("n", range(1, 9))
def test_minimal_order_finite(n, rng):
    q = RationalFunction(rng.normal(size=n + 1) + 0.3j, np.poly(np.full(n, 0.5))[::-1])
    assert pole_order_at(q, 0.5) == n
    R, m, log = minimize_pole_order(q, 0.5)
    assert m == math.ceil(n / 2) == minimal_riccati_order(n)
    assert riccati_pole_order(R, 0.5) == m
    assert len(log) == n - m if n > 1 else not log
    assert all(e["center"][1] == "inf" for e in log)
    back = oper_normal_form(R).q
    assert pole_order_at(back, 0.5) <= 2 * m


@pytest.mark.parametrize("n", [3, 4, 6])
def test_minimal_order_infinity(n, rng):
    q = RationalFunction(rng.normal(size=n) + 0.1j, np.poly([1, 2j, -1.5])[::-1])
    assert pole_order_at(q, INF) == n
    _, m, _ = minimize_pole_order(q, INF)
    assert m == math.ceil(n / 2)


def test_elementary_transform_self_intersection():
    R = RiccatiEq.oper(1 / X**4)
    assert elem_transform(R, (0, INF)).self_intersection_delta == -1
    assert elem_transform(R, (0, 1.0)).self_intersection_delta == 1


def test_fiber_singular_points_of_normal_form():
    # over a pole of q only y = inf is singular on the invariant fiber
    assert fiber_singular_points(RiccatiEq.oper(1 / X**3), 0) == [INF]


@pytest.mark.parametrize("n,steps", [(3, 2), (4, 2), (5, 3), (6, 3)])
def test_restore_transversality(n, steps):
    _, l = restore_transversality(RiccatiEq.oper(1 / X**n), 0)
    assert l == steps


def test_already_transverse():
    with pytest.raises(AlreadyTransverse):
        restore_transversality(RiccatiEq(1 / X, 0, 1), 0)


def test_self_intersection_exceptions():
    exceptional = [(g, d) for g in range(3) for d in range(6) if self_intersection_nonnegative(g, d)]
    assert exceptional == [(0, 0), (0, 1), (0, 2), (1, 0)]
    assert self_intersection(0, 4) == -2


def test_apparent_singularity():
    # theta = 2 without log term: q/2 = (1 - 4)/(4 x^2) has solutions x^{3/2}, x^{-1/2}
    assert is_apparent((1 - 4) / (2 * X**2), 0)
    assert not is_apparent((1 - 0.09) / (2 * X**2), 0)
