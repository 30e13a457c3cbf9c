import math

import numpy as np
import pytest

from symbif.brake import (brake_indices, brake_maslov, brake_nullities, example_family_mu,
                          rotation_family_mu)
from symbif.dual_morse import brake_assemble_and_count
from symbif.index import exp_path
from symbif.symplectic import CoefficientPath, rotation
from instances import reversible_coefficient


@pytest.mark.parametrize("lam,expected", [(0.3, 0), (0.8, 0), (1.0, 0), (1.3, 1), (2.0, 1), (2.4, 2)])
def test_rotation_mu1(lam, expected):
    B = CoefficientPath.constant(lam * np.eye(2), 2 * np.pi, reversible=True)
    bi = brake_indices(B)
    assert bi.mu1 == expected == rotation_family_mu(lam, [1.0], 2 * np.pi)


def test_rotation_nullities():
    for lam, nu in [(0.5, 0), (1.0, 1), (1.5, 0), (2.0, 1)]:
        half = exp_path(lam * np.eye(2), np.pi).end
        assert brake_nullities(half) == (nu, nu)


def test_two_block_family():
    rho = [1.0, 2.5]
    for lam in [0.3, 0.8, 1.1, 1.7]:
        B = CoefficientPath.constant(lam * np.diag(rho + rho), 2 * np.pi, reversible=True)
        assert brake_indices(B).mu1 == rotation_family_mu(lam, rho, 2 * np.pi)


def test_tabulated_nullity_count():
    for lam in [0.4, 0.8, 1.0, 1.2, 2.0]:
        rho = [1.0, 2.5]
        B = CoefficientPath.constant(lam * np.diag(rho + rho), 2 * np.pi, reversible=True)
        assert brake_indices(B).nu1 == example_family_mu(lam, rho, 2 * np.pi)[1]


def test_clm_convention_offset():
    B = CoefficientPath.constant(1.3 * np.eye(4), 2 * np.pi, reversible=True)
    a = brake_indices(B)
    b = brake_indices(B, convention="clm")
    assert b.mu1 - a.mu1 == 2


def test_unknown_convention():
    with pytest.raises(ValueError):
        brake_maslov(exp_path(np.eye(2), 1.0), convention="other")


@pytest.mark.parametrize("seed", range(4))
def test_brake_galerkin_identity(seed):
    rng = np.random.default_rng(seed)
    n = 1 + seed % 2
    tau = 2 * np.pi * rng.uniform(0.5, 1.5)
    B = reversible_coefficient(rng, n, tau)
    lo = min(np.linalg.eigvalsh(B(t)).min() for t in np.linspace(0, tau, 200))
    K = math.floor(lo - 0.3) - 0.137
    bi = brake_indices(B)
    _, mc = brake_assemble_and_count(B, K, m=48)
    assert mc.m_minus == bi.mu1 - n * math.floor(K * tau / (2 * np.pi))
    assert mc.m_zero == bi.nu1


def test_brake_form_requires_reversible_tag_to_hold():
    B = CoefficientPath(2.0, lambda t: np.array([[2.0, np.cos(t)], [np.cos(t), 2.0]]), 1, reversible=True)
    with pytest.raises(ValueError):
        brake_assemble_and_count(B, -1.137)
