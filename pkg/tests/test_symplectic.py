import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from symbif.symplectic import (CoefficientPath, connect_to, fundamental_solution, reversor, rotation,
                               rotation_blocks, std_j, symplectic_defect, symplectic_inverse)
from conftest import random_symmetric, random_symplectic


def test_standard_matrices():
    J = std_j(2)
    assert np.array_equal(J @ J, -np.eye(4))
    N = reversor(2)
    assert np.array_equal(N, np.diag([-1, -1, 1, 1]))
    assert np.allclose(N @ J @ N, -J)


@given(st.floats(-10, 10), st.integers(1, 3))
def test_rotation_is_symplectic_and_orthogonal(theta, n):
    R = rotation(theta, n)
    assert symplectic_defect(R) < 1e-12
    assert np.allclose(R.T @ R, np.eye(2 * n))


def test_rotation_blocks_matches_exponential():
    angles = [0.3, -1.2]
    R = rotation_blocks(angles)
    A = np.diag([0.3, -1.2, 0.3, -1.2])
    assert np.allclose(R, expm(std_j(2) @ A), atol=1e-14)


def test_symplectic_inverse(rng):
    S = random_symplectic(rng, 2)
    assert np.allclose(symplectic_inverse(S) @ S, np.eye(4), atol=1e-12)


def test_identity_monodromy():
    gamma = fundamental_solution(CoefficientPath.constant(np.eye(2), 2 * np.pi), 4096)
    assert np.abs(gamma.end - np.eye(2)).max() < 1e-10
    assert gamma.error < 1e-10


def test_constant_coefficient_matches_expm(rng):
    B = random_symmetric(rng, 4, 2.0)
    gamma = fundamental_solution(CoefficientPath.constant(B, 1.5), 2048)
    E = expm(1.5 * std_j(2) @ B)
    assert np.abs(gamma.end - E).max() < 1e-10 * np.abs(E).max()


@given(st.integers(0, 10_000))
def test_defect_small_for_bounded_coefficients(seed):
    rng = np.random.default_rng(seed)
    C0, C1, C2 = (random_symmetric(rng, 4) for _ in range(3))
    scale = 10.0 / max(np.abs(C0).max() + np.abs(C1).max() + np.abs(C2).max(), 1e-9)

    def B(t):
        return scale * (C0 + np.cos(t) * C1 + np.sin(3 * t) * C2)

    gamma = fundamental_solution(CoefficientPath(2 * np.pi, B, 2), 1024, error_estimate=False)
    assert gamma.defect <= 1e-9 * max(1.0, np.abs(gamma.matrices).max()) ** 2


def test_asymmetric_coefficient_rejected():
    bad = CoefficientPath(1.0, lambda t: np.array([[1.0, 2.0], [0.0, 1.0]]), 1)
    with pytest.raises(ValueError):
        bad(0.0)


def test_tag_check_detects_false_periodicity():
    B = CoefficientPath(1.0, lambda t: np.diag([1 + t, 1.0]), 1, periodic=True)
    with pytest.raises(ValueError):
        B.check_tags()


def test_batched_sample_agrees_with_pointwise():
    f = lambda t: np.diag([1 + np.cos(t), 2.0])
    g = lambda ts: np.stack([f(t) for t in ts])
    a = CoefficientPath(1.0, f, 1)
    b = CoefficientPath(1.0, f, 1, batch=g)
    ts = np.linspace(0, 1, 7)
    assert np.array_equal(a.sample(ts), b.sample(ts))


@given(st.integers(0, 10_000))
def test_connect_to_ends_at_target(seed):
    M = random_symplectic(np.random.default_rng(seed), 1, 0.8)
    xi = connect_to(M)
    assert np.allclose(xi.matrices[0], np.eye(2))
    assert np.abs(xi.end - M).max() < 1e-9
