import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from symbif.index import (conley_zehnder, crossing_set, exp_path, interval_index, maslov_index,
                          nullity_rel, staircase_profile)
from symbif.symplectic import (CoefficientPath, fundamental_solution, rotation, std_j,
                               symplectic_inverse)
from conftest import random_symmetric, random_symplectic


def rotation_table(rho, tau):
    """Closed form for the constant diagonal rotation system, M = I."""
    x = np.asarray(rho) * tau / (2 * np.pi)
    i = len(rho) - 2 * int(sum(math.floor(1 - v + 1e-12) for v in x))
    nu = 2 * sum(1 for v in x if abs(v - round(v)) < 1e-12)
    return i, nu


@pytest.mark.parametrize("rho,tau", [((1.0,), 2 * np.pi), ((0.3,), 7.0), ((2.5,), np.pi),
                                     ((1.0, 2.5), 2 * np.pi), ((0.3, 1.0, 2.5), 7.0)])
def test_rotation_formula(rho, tau):
    A = np.diag(np.concatenate([rho, rho]))
    rep = maslov_index(exp_path(A, tau), None)
    assert (rep.i, rep.nu) == rotation_table(rho, tau)
    assert not rep.unresolved


@pytest.mark.parametrize("A,tau,M,expected", [
    (np.eye(2), 2 * np.pi, rotation(np.pi / 2), (1, 0)),
    (np.eye(2), 2 * np.pi, -np.eye(2), (2, 0)),
    (np.diag([1, 2.5, 1, 2.5]), np.pi, rotation(0.7, 2), (4, 0)),
    (-np.eye(2), 2 * np.pi, rotation(np.pi / 2), (-3, 0)),
])
def test_frozen_values_general_boundary(A, tau, M, expected):
    # differences of these values agree with the Galerkin dual Morse counts
    rep = maslov_index(exp_path(A, tau), M)
    assert (rep.i, rep.nu) == expected


def test_conley_zehnder_of_full_turn():
    gamma = exp_path(np.eye(2), 2 * np.pi)
    assert conley_zehnder(gamma) == 2.0


def test_nullity_counts_kernel():
    assert nullity_rel(np.eye(4)).dim == 4
    assert nullity_rel(rotation(0.3, 2)).dim == 0
    assert nullity_rel(rotation(0.3), rotation(0.3)).dim == 2


def test_path_must_start_at_identity():
    gamma = exp_path(np.eye(2), 1.0)
    shifted = gamma.right_multiply(rotation(0.4))
    with pytest.raises(ValueError):
        maslov_index(shifted)


def test_interval_index_additivity():
    full = exp_path(np.eye(2), 5.0, 2048)
    k = 1024
    first = full.restrict(0, k)
    second = full.restrict(k, 2048)
    base = exp_path(np.eye(2), float(full.times[k]), 1024)
    i_first = maslov_index(first).i
    # catenation: i over [0, 5] = i over [0, a] + (interval index over [a, 5]) up to the endpoint nullity
    assert i_first + interval_index(second, base) == maslov_index(full).i


@given(st.integers(0, 10_000))
def test_naturality_under_conjugation(seed):
    # P gamma P^{-1} solves Z' = J (P^{-T} B P^{-1}) Z
    rng = np.random.default_rng(seed)
    n = 1 + seed % 2
    B = random_symmetric(rng, 2 * n, 1.5)
    P = random_symplectic(rng, n, 0.4)
    Pinv = symplectic_inverse(P)
    tau = 2.0
    r1 = maslov_index(exp_path(B, tau, 1024))
    B2 = Pinv.T @ B @ Pinv
    r2 = maslov_index(exp_path(0.5 * (B2 + B2.T), tau, 1024))
    assert (r1.i, r1.nu) == (r2.i, r2.nu)


@given(st.integers(0, 10_000))
def test_homotopy_with_fixed_nullity(seed):
    rng = np.random.default_rng(seed)
    B0 = random_symmetric(rng, 2, 1.5)
    C = random_symmetric(rng, 2, 0.05)
    tau = 2.5
    J = std_j(1)
    from scipy.linalg import expm
    smin = min(np.linalg.svd(expm(tau * J @ (B0 + s * C)) - np.eye(2), compute_uv=False)[-1]
               for s in np.linspace(0, 1, 41))
    if smin < 1e-3:
        return
    a = maslov_index(exp_path(B0, tau, 1024))
    b = maslov_index(exp_path(B0 + C, tau, 1024))
    assert a.i == b.i and a.nu == b.nu == 0


def test_crossing_set_rotation():
    ts = crossing_set(np.eye(2), np.eye(2), 0.5, 13.0)
    assert np.allclose(ts, [2 * np.pi, 4 * np.pi], atol=1e-9)


@pytest.mark.parametrize("sign", [1, -1])
@pytest.mark.parametrize("M", [np.eye(2), rotation(np.pi / 2)])
def test_staircase_matches_probes(sign, M):
    A = sign * np.eye(2)
    prof = staircase_profile(A, M, (0.05, 2.2))
    for lam in np.linspace(0.07, 2.2, 9):
        rep = maslov_index(exp_path(lam * A, 1.0, 1024), M)
        assert prof.value(lam) == rep.i


def test_staircase_rejects_indefinite():
    with pytest.raises(ValueError):
        staircase_profile(np.diag([1.0, -1.0]), None, (0.1, 1.0))


def test_time_dependent_coefficient_index_is_integral():
    B = CoefficientPath(2 * np.pi, lambda t: np.diag([1 + 0.5 * np.cos(t), 1.2]), 1)
    rep = maslov_index(fundamental_solution(B, 2048, error_estimate=False))
    assert not rep.unresolved
    assert float(rep.raw).is_integer()
