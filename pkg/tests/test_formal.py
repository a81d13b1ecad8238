from fractions import Fraction

import numpy as np
import pytest

from meroproj.algebra import INF, LaurentMatrix, X
from meroproj.errors import RamifiedConventionRequired, TruncationTooSmall, WrongClass
from meroproj.formal import (check_genericity, classify_singularity, formal_monodromy,
                             formal_monodromy_of_solutions, formal_normal_form, irregularity_index,
                             normal_form_residual, same_up_to_swap, structure_formal_data)
from meroproj.linsys import companion_system


def lm(coeffs, v0):
    return LaurentMatrix(0j, v0, np.array(coeffs, complex))


def gauge(rng, L=30):
    G = 0.3 * (rng.normal(size=(L, 2, 2)) + 1j * rng.normal(size=(L, 2, 2)))
    G[0] += np.eye(2)
    return lm(G, 0)


def conj(A, G):
    return G.inv() * A * G + G.inv() * G.d()


def test_irregularity_index():
    assert [irregularity_index(n) for n in (1, 2, 3, 4, 7)] == [0, 0, Fraction(1, 2), 1, Fraction(5, 2)]


def test_euler_system_residues():
    # dY + diag(a, b)/t Y dt = 0 has Y = t^{-diag(a, b)}
    c = np.zeros((20, 2, 2), complex)
    c[0] = np.diag([0.3, -0.1j])
    F, _ = formal_normal_form(lm(c, -1))
    assert F.cls.kind == "RegularDiagonal"
    assert sorted([F.residue_plus, F.residue_minus], key=abs) == pytest.approx([-0.1j, 0.3])


def test_invariance_under_gauge(rng):
    c = np.zeros((30, 2, 2), complex)
    c[:3] = (rng.normal(size=(3, 2, 2)) + 1j * rng.normal(size=(3, 2, 2))) * np.eye(2)
    A = lm(c, -3)
    A2 = conj(A, gauge(rng))
    F1, _ = formal_normal_form(A, 14)
    F2, G = formal_normal_form(A2, 14)
    assert F1.cls.kind == "IrregularUnramified"
    assert same_up_to_swap(F1, F2) < 1e-9
    assert normal_form_residual(A2, F2, G) < 1e-9


def test_resonant_log_case(rng):
    c = np.zeros((30, 2, 2), complex)
    c[0] = [[0.2, 1.0], [0, 0.2]]
    F, G = formal_normal_form(conj(lm(c, -1), gauge(rng)), 14)
    assert F.cls.kind == "RegularResonant" and F.log == 1
    assert abs(F.residue_plus - 0.2) < 1e-9 and abs(F.residue_minus - 0.2) < 1e-9
    M = formal_monodromy(F)
    assert abs(M[0, 1]) > 1  # nontrivial Jordan block


def test_ramified(rng):
    c = np.zeros((30, 2, 2), complex)
    c[0] = [[0, 1], [0, 0]]
    c[1:] = 0.5 * (rng.normal(size=(29, 2, 2)) + 1j * rng.normal(size=(29, 2, 2)))
    A = lm(c, -3)
    assert classify_singularity(A).kind == "IrregularRamified"
    assert check_genericity(A)
    F, G = formal_normal_form(A, 14)
    assert F.nu == Fraction(3, 2)
    assert normal_form_residual(A, F, G) < 1e-9
    with pytest.raises(RamifiedConventionRequired):
        formal_monodromy(F)
    ccw, cw = formal_monodromy_of_solutions(F, "ccw"), formal_monodromy_of_solutions(F, "cw")
    assert np.allclose(formal_monodromy(F, "ccw") @ ccw, np.eye(2), atol=1e-12)
    # both half turns contain the same swap C (det -1); they differ by exp(+-i pi L)
    tr = F.residue_plus + F.residue_minus
    assert abs(np.linalg.det(ccw) / np.linalg.det(cw) - np.exp(-2j * np.pi * tr)) < 1e-9
    assert abs(np.linalg.det(ccw) + np.exp(-1j * np.pi * tr)) < 1e-9


def test_genericity_wrong_class():
    c = np.zeros((10, 2, 2), complex)
    c[0] = np.diag([1, 2])
    with pytest.raises(WrongClass):
        check_genericity(lm(c, -1))


def test_truncation_guard():
    c = np.zeros((10, 2, 2), complex)
    c[0] = np.diag([1, 2])
    with pytest.raises(TruncationTooSmall):
        formal_normal_form(lm(c, -1), 3)


def test_structure_regular_residue():
    # theta = 1/3 at 0: residues +-theta/2
    theta = 1 / 3
    q = (1 - theta**2) / (2 * X**2) + 1 / (X - 1)
    d = structure_formal_data(q, 0)
    assert d.kind.startswith("Regular")
    assert abs(abs(d.residue) - theta / 2) < 1e-12


def test_structure_airy_at_infinity():
    d = structure_formal_data(-2 * X, INF)
    assert d.kind == "IrregularRamified"
    assert d.nu == Fraction(3, 2)


def test_structure_even_order():
    d = structure_formal_data(1 / X**4 + 0.3 / X**3, 0)
    assert d.kind == "IrregularUnramified"
    assert d.nu == 1


def test_companion_minimal_lift_needed():
    # the companion matrix has a double pole at a regular point of the structure
    A = companion_system(0.2 / X**2).local_matrix(0j, 20)
    assert A.pole_order() == 2
