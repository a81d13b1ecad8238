import numpy as np
import pytest

from meroproj.algebra import INF, RationalFunction, X
from meroproj.errors import ConstantInput, NotAPole
from meroproj.projective import (is_moebius, marked_points_count, polar_divisor, pole_order_at,
                                 pullback, quadratic_space_dimension, residue_and_index, schwarzian,
                                 schwarzian_cocycle_check, schwarzian_values)


@pytest.mark.parametrize("a", [2, 3, -1, -2, 5])
def test_power_oracle(a):
    # S(x^a) = (1 - a^2) / (2 x^2)
    assert schwarzian(X**a).allclose((1 - a * a) / (2 * X**2))


def test_moebius_kernel():
    f = (2 * X + 1j) / (X - 3)
    assert schwarzian(f).is_zero()
    assert is_moebius(f)
    assert not is_moebius(X**2)


def test_values_match_symbolic():
    f = X**3 / (X - 1)
    z = np.array([0.4 + 0.3j, -2.0 + 1j])
    assert np.allclose(schwarzian_values(f, z), [schwarzian(f)(t) for t in z], rtol=1e-10)


def test_cocycle():
    f = X**2 + 1 / X
    g = (X**3 - 2) / (X + 1j)
    assert schwarzian_cocycle_check(f, g) < 1e-9


def test_constant_rejected():
    with pytest.raises(ConstantInput):
        schwarzian(RationalFunction.const(2))


def test_pole_orders_and_divisor():
    q = 1 / (X**2 * (X - 1) ** 3)
    assert pole_order_at(q, 0) == 2
    assert pole_order_at(q, 1) == 3
    # deg q = -5: at infinity q~ = t^-4 q(1/t) has order 4 - 5 = -1, a simple zero
    assert pole_order_at(q, INF) == 0
    D = polar_divisor(q)
    assert sorted(D.orders) == [2, 3]


def test_infinity_order_of_polynomial():
    # a degree-d polynomial has a pole of order d + 4 at infinity
    assert pole_order_at(X, INF) == 5
    assert pole_order_at(RationalFunction.const(1), INF) == 4


def test_residue_and_index_euler():
    theta = 0.3
    r = residue_and_index((1 - theta**2) / (2 * X**2), 0)
    assert abs(r.res2 - (1 - theta**2) / 2) < 1e-14
    assert abs(r.theta[0] - theta) < 1e-14


def test_residue_not_a_pole():
    with pytest.raises(NotAPole):
        residue_and_index(1 / X**2, 1)


def test_pullback_moebius_invariance():
    q = 1 / (X**2 * (X - 1) ** 2)
    g = 1 / X
    h = pullback(q, g)
    # pulling back by an involution twice returns q
    assert pullback(h, g).allclose(q, tol=1e-9)


def test_dimension_counts():
    assert quadratic_space_dimension(0, [2, 2, 2]) == 3
    assert quadratic_space_dimension(0, [4]) == 1
    assert marked_points_count(2) == 0
    assert marked_points_count(5) == 3
