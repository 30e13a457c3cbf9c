import numpy as np
import pytest

from symbif.bifurcation import Classification, classify, deformation_scan, index_profile
from symbif.family import HamiltonianFamily, linear_quadratic, polynomial_family, quartic, rotation_family
from symbif.symplectic import CoefficientPath, rotation


def test_linear_profile():
    reps = index_profile(linear_quadratic(np.eye(2)), [0.5, 1.0, 1.5])
    assert [(r.i, r.nu) for r in reps] == [(1, 0), (1, 2), (3, 0)]


def test_quartic_profile_equals_linear():
    reps = index_profile(quartic(), [0.5, 1.0, 1.5])
    assert [(r.i, r.nu) for r in reps] == [(1, 0), (1, 2), (3, 0)]


def test_two_block_profile():
    fam = rotation_family([1.0, 2.5])
    lams = [0.3, 0.5, 0.9, 1.1]
    reps = index_profile(fam, lams)
    for lam, r in zip(lams, reps):
        expected = 2 - 2 * (np.floor(1 - lam) + np.floor(1 - 2.5 * lam))
        assert r.i == expected


def test_quartic_rabinowitz():
    rep = classify(quartic(), np.linspace(0.5, 1.45, 6))
    assert len(rep.candidates) == 1
    c = rep.candidates[0]
    assert abs(c.mu - 1.0) < 1e-9
    assert c.classification is Classification.RABINOWITZ
    assert (c.evidence["i_minus"], c.evidence["i_plus"], c.evidence["nu_mu"]) == (1, 3, 2)


def test_necessity_filter_and_refinement_stability():
    fam = rotation_family([1.0, 2.5])
    coarse = classify(fam, np.linspace(0.3, 1.1, 5))
    fine = classify(fam, np.linspace(0.3, 1.1, 17))
    assert all(c.evidence["nu_mu"] > 0 for c in coarse.candidates)
    assert [round(c.mu, 8) for c in coarse.candidates] == [round(c.mu, 8) for c in fine.candidates]
    assert [round(c.mu, 8) for c in coarse.candidates] == [0.4, 0.8, 1.0]


def test_grid_endpoint_requests_refinement():
    rep = classify(linear_quadratic(np.eye(2)), [0.5, 0.75, 1.0])
    assert any("refine" in w for w in rep.warnings)


def test_monotone_family_pattern():
    fam = polynomial_family({(4, 0): 1.0, (0, 4): 1.0}, {(2, 0): 0.5, (0, 2): 0.5}, 1)
    fam.flags["monotone"] = 1
    rep = classify(fam, np.linspace(0.6, 1.4, 5))
    c = rep.candidates[0]
    assert c.classification is Classification.MONOTONE_FAMILY
    assert c.evidence["pattern_observed"]
    # i(lam2) >= i(lam1) + nu(lam1) for lam2 > lam1
    i, nu = rep.indices, rep.nullities
    for a in range(len(i)):
        for b in range(a + 1, len(i)):
            assert i[b] >= i[a] + nu[a]


def test_brake_candidates_at_even_multiples():
    fam = rotation_family([1.0, 2.5], lam_interval=(0.1, 2.1))
    rep = classify(fam, np.linspace(0.15, 1.35, 7), mode="brake")
    mus = [round(c.mu, 8) for c in rep.candidates]
    # lam rho tau in 2 pi Z
    assert mus == [0.4, 0.8, 1.0, 1.2]
    assert all(c.classification is Classification.BRAKE_RABINOWITZ for c in rep.candidates)
    assert all(c.evidence["even_kernel_gate"] for c in rep.candidates)


def test_equilibrium_orbit_gate():
    fam = rotation_family([1.0], M=rotation(np.pi / 2))
    rep = classify(fam, np.linspace(0.1, 0.4, 4), mode="equilibrium_orbit")
    c = rep.candidates[0]
    assert abs(c.mu - 0.25) < 1e-9
    assert c.classification is Classification.EQUILIBRIUM_ORBIT
    assert c.evidence["gate"]["gate_a"] and c.evidence["gate"]["order"] == 4


def circle_branch_family():
    base = quartic()

    def branch(lam, t):
        t = np.asarray(t, dtype=float)
        r = np.sqrt(1.0 - lam)
        return r * np.stack([np.cos(t), np.sin(t)], axis=-1)

    return HamiltonianFamily(1, 2 * np.pi, base.H, base.grad, base.hess, None, (0.2, 0.9), branch,
                             dict(base.flags), "circle")


def test_autonomous_baseline_nullity():
    fam = circle_branch_family()
    assert fam.branch_residual(0.5) < 1e-8
    rep = classify(fam, np.linspace(0.3, 0.8, 4), mode="autonomous_orbit")
    assert all(nu >= 1 for nu in rep.nullities)
    assert rep.candidates == []


def test_deformation_full_turn():
    rep = deformation_scan(CoefficientPath.constant(np.eye(2), 7.0))
    assert len(rep.crossings) == 1
    assert abs(rep.crossings[0][0] - 2 * np.pi) < 1e-9
    assert rep.crossings[0][1] == 2
    assert [s[2] for s in rep.staircase] == [1, 3]


def test_deformation_quarter_turn():
    rep = deformation_scan(CoefficientPath.constant(np.eye(2), 2 * np.pi), rotation(np.pi / 2))
    assert [round(t, 9) for t, _ in rep.crossings] == [round(np.pi / 2, 9)]


def test_deformation_without_crossing():
    rep = deformation_scan(CoefficientPath.constant(np.eye(2), 5.0))
    assert rep.crossings == []
    assert rep.end_index == 1   # equals i(xi) + dim Ker(I - M) = n for M = I


def test_deformation_rejects_indefinite():
    with pytest.raises(ValueError):
        deformation_scan(CoefficientPath.constant(np.diag([1.0, -1.0]), 3.0))
