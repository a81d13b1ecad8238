import json
from importlib import resources

import numpy as np
import pytest

from meroproj.algebra import INF
from meroproj.errors import HypothesisViolated
from meroproj.lab import (FIXED, FREE, FamilyConfig, build_family, jacobian_rank, local_injectivity_probe,
                          moduli_dimension, monodromy_coordinates, residues_of)
from meroproj.formal import irregularity_index
from meroproj.projective import pole_order_at

HEUN_RES = (0.13 + 0.07j, 0.21 - 0.04j, 0.17 + 0.11j, 0.26 - 0.09j)


def fixture(name):
    return json.loads(resources.files("meroproj").joinpath(f"data/{name}.json").read_text())


@pytest.mark.parametrize("orders,dim", [((2, 2, 2), 0), ((2, 2, 2, 2), 2), ((5,), 0), ((4, 2, 2), 2),
                                        ((3, 2, 2), 2), ((6,), 0), ((4, 4), 2)])
def test_moduli_dimension(orders, dim):
    assert moduli_dimension(0, orders, FIXED) == dim


def test_free_count_adds_integer_residues():
    assert moduli_dimension(0, (2, 2, 2, 2), FREE) == 6
    assert moduli_dimension(0, (5,), FREE) == 0


def test_hypotheses():
    with pytest.raises(HypothesisViolated):
        moduli_dimension(0, (2, 2))
    with pytest.raises(HypothesisViolated):
        FamilyConfig.create((1, 2, 2, 2), (0, 0.1, 0.1, 0.1))


@pytest.mark.parametrize("orders,res", [((2, 2, 2, 2), HEUN_RES), ((4, 2, 2), (0.3 + 0.1j, 0.2, 0.15j)),
                                        ((2, 4, 2), (0.2, 0.3 - 0.1j, 0.1)), ((3, 2, 2), (0, 0.2, 0.1 + 0.1j)),
                                        ((6,), (0.25 + 0.1j,)), ((4, 4), (0.2, -0.1 + 0.3j))])
def test_family_reproduces_residues(orders, res):
    cfg = FamilyConfig.create(orders, res)
    assert len(cfg.free_params) == cfg.dimension
    q = build_family(cfg)(cfg.initial)
    for p, n in zip(cfg.positions(cfg.initial), orders):
        assert pole_order_at(q, p) == n
    got = residues_of(q, cfg, cfg.initial)
    assert np.abs(np.array(got) - np.array(cfg.residues)).max() < 1e-9


def test_parabolic_residue_reproduced():
    cfg = FamilyConfig.create((2, 2, 2, 2), (0, 0.21, 0.17, 0.26))
    q = build_family(cfg)(cfg.initial)
    got = residues_of(q, cfg, cfg.initial)
    assert abs(got[0]) < 1e-7  # sqrt of a roundoff-level quantity
    assert np.abs(np.array(got[1:]) - [0.21, 0.17, 0.26]).max() < 1e-12


def test_config_json_round_trip():
    cfg = FamilyConfig.create((2, 2, 2, 2), HEUN_RES)
    assert FamilyConfig.from_json(json.loads(json.dumps(cfg.to_json()))) == cfg


def test_hypergeometric_oracle():
    doc = fixture("hypergeometric")
    cfg = FamilyConfig.from_json(doc)
    q = build_family(cfg)(())
    c = monodromy_coordinates(q, cfg, 1e-11, params=())
    r = np.array(cfg.residues)
    # trace-free lift: tr M_p = -2 cos(pi theta_p) with theta_p = 2 * residue
    assert np.abs(c.values[:3] - (-2 * np.cos(2 * np.pi * r))).max() < 1e-8
    # M_inf M_1 M_0 = I gives tr(M_0 M_1) = tr(M_inf)
    assert abs(c.values[c.labels.index("tr M0M1")] - c.values[2]) < 1e-8


def test_coordinates_base_independent():
    # moving the base without crossing a spoke conjugates all generators at once
    cfg = FamilyConfig.create((2, 2, 2, 2), HEUN_RES)
    q = build_family(cfg)(cfg.initial)
    a = monodromy_coordinates(q, cfg, 1e-11)
    b = monodromy_coordinates(q, cfg, 1e-11, base=a.base + 0.05 - 0.03j)
    assert np.abs(a.values - b.values).max() < 1e-8 * np.abs(a.values).max()


def test_single_traces_independent_of_any_base():
    cfg = FamilyConfig.create((2, 2, 2, 2), HEUN_RES)
    q = build_family(cfg)(cfg.initial)
    a = monodromy_coordinates(q, cfg, 1e-11, base=0.6 + 1.1j)
    b = monodromy_coordinates(q, cfg, 1e-11, base=-1.0 - 0.8j)
    assert np.abs(a.values[:4] - b.values[:4]).max() < 1e-8


def test_heun_rank():
    cfg = FamilyConfig.create((2, 2, 2, 2), HEUN_RES)
    rep = jacobian_rank(cfg, threads=4)
    assert rep.ok and rep.rank == 2
    assert rep.singular_values[-1] / rep.singular_values[0] > 1e-3


def test_zero_dimensional_negative_control():
    cfg = FamilyConfig.create((2, 2, 2), (0.1, 0.2, 0.15))
    assert cfg.dimension == 0 and cfg.free_params == ()
    rep = jacobian_rank(cfg)
    assert rep.rank == 0 and rep.ok


def test_parabolic_pole_probe_distinct():
    # a residue of 0 (parabolic local monodromy) still leaves the family locally injective
    cfg = FamilyConfig.create((2, 2, 2, 2), (0, 0.21 - 0.04j, 0.17 + 0.11j, 0.26 - 0.09j))
    p0 = cfg.initial
    p1 = tuple(np.array(p0) + 0.05 * np.array([1, 1j]))
    v = local_injectivity_probe(cfg, p0, p1)
    assert v.verdict == "DISTINCT"
    same = local_injectivity_probe(cfg, p0, p0)
    assert same.verdict == "SUSPECT"


def test_irregular_coordinates_include_stokes():
    cfg = FamilyConfig.create((4, 2, 2), (0.3 + 0.1j, 0.2, 0.15j))
    q = build_family(cfg)(cfg.initial)
    c = monodromy_coordinates(q, cfg, 1e-10)
    assert sum(l.startswith("stokes0.") for l in c.labels) == 2


def test_dimension_consistency_and_parity():
    import itertools

    for d in range(1, 5):
        for orders in itertools.product(range(1, 9), repeat=d):
            try:
                fixed = moduli_dimension(0, orders, FIXED)
            except HypothesisViolated:
                continue
            free = moduli_dimension(0, orders, FREE)
            assert fixed == free - sum(1 for n in orders if irregularity_index(n).denominator == 1)
            assert fixed >= 0 and fixed % 2 == 0


def test_trace_block_conjugation_invariant(rng):
    from meroproj.lab import trace_coordinates

    mats = [rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(4)]
    G = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    Gi = np.linalg.inv(G)
    a, _ = trace_coordinates(mats)
    b, _ = trace_coordinates([Gi @ M @ G for M in mats])
    assert np.abs(np.array(a) - np.array(b)).max() < 1e-9


def test_small_q_gives_trivial_representation():
    cfg = FamilyConfig.create((2, 2, 2, 2), HEUN_RES)
    q = build_family(cfg)(cfg.initial) * 1e-9
    c = monodromy_coordinates(q, cfg, 1e-11)
    assert np.abs(c.values - 2).max() < 1e-6


def test_three_pole_family_is_hypergeometric():
    res = (1 / 6, 1 / 8, 0.15 + 0.05j)
    cfg = FamilyConfig.create((2, 2, 2), res)
    q = build_family(cfg)(())
    r2 = [(1 - 4 * l * l) / 2 for l in res]  # theta = 2 lambda, res2 = (1 - theta^2)/2
    from meroproj.algebra import X

    ref = r2[0] / X**2 + r2[1] / (X - 1) ** 2 + (r2[2] - r2[0] - r2[1]) / (X * (X - 1))
    assert q.allclose(ref, tol=1e-12)


def test_hypergeometric_base_points_agree():
    cfg = FamilyConfig.from_json(fixture("hypergeometric"))
    q = build_family(cfg)(())
    a = monodromy_coordinates(q, cfg, 1e-11, params=(), base=0.5 + 1.2j)
    b = monodromy_coordinates(q, cfg, 1e-11, params=(), base=-0.8 - 0.9j)
    assert abs(a.values[a.labels.index("tr M0M1")] - b.values[b.labels.index("tr M0M1")]) < 1e-8


def test_airy_config_zero_dimensional():
    cfg = FamilyConfig.create((5,), (0,))
    assert cfg.dimension == 0 and cfg.free_params == ()
    with pytest.raises(HypothesisViolated):
        FamilyConfig.create((5,), (0.1,))


def test_residue_change_moves_coordinates():
    base_res = (0.1, 0.2, 0.15)
    c0 = FamilyConfig.create((2, 2, 2), base_res)
    c1 = FamilyConfig.create((2, 2, 2), (0.1, 0.2, 0.16))
    v0 = monodromy_coordinates(build_family(c0)(()), c0, 1e-11, params=(), base=0.5 + 1j).values
    v1 = monodromy_coordinates(build_family(c1)(()), c1, 1e-11, params=(), base=0.5 + 1j).values
    assert np.abs(v0 - v1).max() > 1e-3
