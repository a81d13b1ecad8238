import numpy as np
import pytest

from meroproj.algebra import INF, RationalFunction, X
from meroproj.linsys import (LinearSystem, check_fuchs, companion_system, gauge_apply_linear, lift_parity_check,
                             lift_riccati, moebius_image, oper_lift, probe_residual_systems, projectivize,
                             trace_data, twist)
from meroproj.riccati import RiccatiEq, gauge_apply, oper_normal_form

Q = (X + 0.5) / (X**2 * (X - 1) ** 2)


def test_lift_then_projectivize():
    R = RiccatiEq(X + 1, 1 / X, 1 / (X - 2))
    S = lift_riccati(R, delta=1 / (X - 3))
    assert projectivize(S).allclose(R)
    assert S.trace().allclose(1 / (X - 3))


def test_companion_projectivizes_to_oper():
    assert oper_normal_form(projectivize(companion_system(Q))).q.allclose(Q)


def test_twist_preserves_projectivization():
    S = companion_system(Q)
    assert projectivize(twist(S, 2 / X)).allclose(projectivize(S))


def test_gauge_commutes_with_projectivization():
    S = companion_system(Q)
    G = [[RationalFunction.const(1), X], [RationalFunction.const(0), RationalFunction.const(2)]]
    lhs = projectivize(gauge_apply_linear(S, G))
    rhs = gauge_apply(projectivize(S), moebius_image(G))
    assert lhs.probe_residual(rhs) < 1e-10


def test_trace_free_companion_fuchs():
    S = companion_system(Q)
    assert trace_data(S).residues == ()
    assert check_fuchs(S, 0) < 1e-12


def test_odd_degree_lift():
    # polar divisor of odd degree: 1/(x^2 (x-1)^3) has orders 2, 3 and a simple zero at infinity
    q = 1 / (X**2 * (X - 1) ** 3)
    assert lift_parity_check(5) == {"trace_free_ok": False, "odd_trace_needed": True}
    S = oper_lift(q, odd_pole=1)
    assert S.degE == 1
    assert check_fuchs(S, 1) < 1e-12
    assert oper_normal_form(projectivize(S)).q.allclose(q, tol=1e-9)


def test_fuchs_detects_wrong_degree():
    S = oper_lift(Q, odd_pole=0)
    assert check_fuchs(S, 0) > 0.5


def test_json_round_trip():
    S = oper_lift(Q, odd_pole=1)
    T = LinearSystem.from_json(S.to_json())
    assert probe_residual_systems(S, T) == 0
    assert T.degrees == S.degrees


def test_poles_and_local_matrix():
    S = companion_system(Q)
    pts = sorted(S.poles(), key=lambda pn: pn[0].real)
    assert np.allclose([p for p, _ in pts], [0, 1], atol=1e-12)
    assert [n for _, n in pts] == [2, 2]
    A = S.local_matrix(0j, 6)
    assert A.pole_order() == 2
    assert np.allclose(A.coefficient(-2), [[0, 0], [0.25, 0]])
