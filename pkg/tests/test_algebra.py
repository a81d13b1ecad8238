import numpy as np
import pytest

from meroproj.algebra import (INF, LaurentMatrix, laurent_matrix_ops, LaurentSeries, RationalFunction, X, cx_from_json, poly_roots,
                              point_from_json, point_to_json, rf_expand)
from meroproj.errors import DivisionByZeroFunction

Z = np.array([0.3 + 0.7j, -1.2 + 0.1j, 2.0 - 0.5j])


def ev(f, z):
    return np.array([f(t) for t in z])


def test_arithmetic_matches_pointwise(rng):
    f = RationalFunction([1, 2, 3j], [1, -0.5])
    g = RationalFunction.from_roots(zeros=[0.2j], poles=[1.5, -2])
    for op, ref in [("+", np.add), ("-", np.subtract), ("*", np.multiply), ("/", np.divide)]:
        h = eval(f"f {op} g")
        assert np.allclose(ev(h, Z), ref(ev(f, Z), ev(g, Z)), rtol=1e-12)


def test_canonical_cancellation():
    f = (X - 1) * (X + 2) / ((X - 1) * (X - 3))
    assert f.degree == 1
    assert f.allclose((X + 2) / (X - 3))


def test_derivative_and_compose():
    f = 1 / (X**2 + 1)
    assert f.derivative().allclose(-2 * X / (X**2 + 1) ** 2)
    g = f.compose(X + 1)
    assert np.allclose(ev(g, Z), ev(f, Z + 1))


def test_divide_by_zero():
    with pytest.raises(DivisionByZeroFunction):
        X / RationalFunction.const(0)


def test_laurent_expansion_oracle():
    # 1/(x(1-x)) = sum_{k>=-1} x^k
    s = rf_expand(1 / (X * (1 - X)), 0, 8)
    assert s.valuation() == -1
    assert np.allclose([s.coeff(k) for k in range(-1, 9)], 1)
    # at infinity, in t = 1/x: x/(x-1) = 1/(1-t)
    s_inf = rf_expand(X / (X - 1), INF, 6)
    assert np.allclose([s_inf.coeff(k) for k in range(7)], 1)


def test_series_inverse_and_product():
    s = rf_expand(1 + X + X**2 / 3, 0, 12)
    one = s * s.inverse()
    assert abs(one.coeff(0) - 1) < 1e-14
    assert max(abs(one.coeff(k)) for k in range(1, 12)) < 1e-13


def test_series_exact_truncation():
    s = rf_expand(1 / X, 0, 5)
    assert s.trunc_order == 5
    t = s * s
    assert t.trunc_order == 4  # min(N_A + v_B, N_B + v_A)


def test_matrix_inverse_and_det():
    M = LaurentMatrix.from_rf_matrix([[X, 1], [0, 1 / X]], 0j, 10)
    assert abs(M.det().coeff(0) - 1) < 1e-14
    P = laurent_matrix_ops(M, M.inv(), "mul")
    assert np.allclose(P.coefficient(0), np.eye(2))
    assert np.allclose(P.coefficient(3), 0)


def test_json_round_trip():
    f = RationalFunction([1j, 2], [3, 0, 1])
    assert RationalFunction.from_json(f.to_json()).allclose(f)
    assert point_from_json(point_to_json(INF)) == INF
    assert cx_from_json([1.5, -2]) == 1.5 - 2j


def test_poly_roots():
    r = sorted(poly_roots(np.poly([1, 2j, -3])[::-1]), key=lambda z: z.real)
    assert np.allclose(r, sorted([1, 2j, -3], key=lambda z: z.real))
