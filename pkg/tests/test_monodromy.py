import numpy as np
import pytest

from meroproj.algebra import INF, ZERO, RationalFunction, X
from meroproj.errors import NotIrregular, PoleTooClose
from meroproj.linsys import LinearSystem, companion_system, oper_lift, twist
from meroproj.monodromy import (PathSpec, check_clearance, choose_base, clearance_radius, continue_solution,
                                global_monodromy, liouville_residual, local_eigenvalue_check, local_monodromy,
                                loop_around, projective_distance, stokes_data, stokes_product_check,
                                unipotency_defect)
from meroproj.projective import residue_and_index


def three_point_q(r0, r1, rinf):
    """Double poles at 0, 1, inf with the given order-two residues."""
    return r0 / X**2 + r1 / (X - 1) ** 2 + (rinf - r0 - r1) / (X * (X - 1))


Q3 = three_point_q(0.3 + 0.1j, 0.2, 0.45 - 0.05j)


def test_three_point_q_residues():
    for p, r in [(0, 0.3 + 0.1j), (1, 0.2), (INF, 0.45 - 0.05j)]:
        assert abs(residue_and_index(Q3, p).res2 - r) < 1e-13


@pytest.mark.parametrize("theta", [0.3, 1 / 3, 0.2 + 0.4j])
def test_euler_local_eigenvalues(theta):
    q = (1 - theta**2) / (2 * X**2)
    M = local_monodromy(companion_system(q), 0, tol=1e-11)
    assert local_eigenvalue_check(q, 0, M) < 1e-8


def test_rigid_triangle_traces():
    md = global_monodromy(companion_system(Q3), tol=1e-11)
    assert md.product_residual < 1e-9
    M0, M1, Minf = md.matrix(0j), md.matrix(1 + 0j), md.matrix(INF)
    for M, p in [(M0, 0), (M1, 1), (Minf, INF)]:
        th = residue_and_index(Q3, p).theta[0]
        assert abs(np.linalg.det(M) - 1) < 1e-9
        assert abs(np.trace(M) + 2 * np.cos(np.pi * th)) < 1e-8
    # M_inf M_1 M_0 = I, so tr(M_1 M_0) = tr(M_inf^-1) = tr(M_inf)
    assert abs(np.trace(M1 @ M0) - np.trace(Minf)) < 1e-8


def test_base_point_changes_by_conjugation():
    S = companion_system(Q3)
    a = global_monodromy(S, base=0.5 + 0.8j, tol=1e-11)
    b = global_monodromy(S, base=-0.7 - 0.4j, tol=1e-11)
    for p in (0j, 1 + 0j):
        assert abs(np.trace(a.matrix(p)) - np.trace(b.matrix(p))) < 1e-8


def test_liouville_with_trace():
    S = twist(oper_lift(Q3, odd_pole=1), 0.5 / (X + 2))
    path = loop_around(0j, 0.5 + 0.5j, [0j, 1 + 0j, -2 + 0j], 0.3)
    assert liouville_residual(S, path) < 1e-9


def test_projective_distance_sign_invariant():
    M = np.array([[1, 2], [0.5, 3]], complex)
    assert projective_distance(M, -2 * M) < 1e-14


def test_clearance():
    poles = [0j, 1 + 0j]
    rad = clearance_radius(poles)
    assert rad[0j] == pytest.approx(0.4)
    with pytest.raises(ValueError):
        clearance_radius(poles, 0.6)
    b = choose_base(poles)
    assert min(abs(b - p) for p in poles) > 0.4
    with pytest.raises(PoleTooClose):
        check_clearance(PathSpec.polyline([0.5 + 1j, 1.01 + 0j]), poles)


def test_path_transport_composes():
    S = companion_system(Q3)
    p1 = PathSpec.polyline([0.5 + 1j, 2 + 1j])
    p2 = PathSpec.polyline([2 + 1j, 2 - 1j])
    T1, T2 = continue_solution(S, p1, 1e-11), continue_solution(S, p2, 1e-11)
    T12 = continue_solution(S, p1.then(p2), 1e-11)
    # Y(start) = I: continuing Y = T1 along p2 gives T2 T1
    assert np.abs(T12 - T2 @ T1).max() < 1e-9
    assert np.abs(continue_solution(S, p1.reversed(), 1e-11) @ T1 - np.eye(2)).max() < 1e-9


def test_airy_stokes():
    sd = stokes_data(companion_system(RationalFunction([0, -2])), INF)
    assert len(sd.matrices) == 3
    assert max(unipotency_defect(s) for s in sd.matrices) < 1e-6
    assert stokes_product_check(sd, "ccw") < 1e-6
    # each Stokes matrix is triangular with multiplier -i
    for s in sd.matrices:
        assert abs(s[0, 1] + s[1, 0] + 1j) < 1e-6


def test_stokes_rejects_regular():
    with pytest.raises(NotIrregular):
        stokes_data(LinearSystem(((0.3 / X, ZERO), (ZERO, -0.3 / X))), 0j)
