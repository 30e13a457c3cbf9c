import numpy as np
import pytest
from hypothesis import given, strategies as st

from symbif.dual_morse import (DualOperatorSpec, assemble, assemble_and_count, choose_K, lambda_inverse,
                               lambda_inverse_matrix, morse_identity_rhs, relative_morse)
from symbif.symplectic import CoefficientPath, rotation, std_j
from instances import boundary, shift_for, trig_coefficient


def test_liu_spot_check():
    B = CoefficientPath.constant(7 * np.eye(2), 1.0)
    _, count = assemble_and_count(B, DualOperatorSpec(np.eye(2), 1.0, -3.0, 1))
    assert (count.m_minus, count.m_zero) == (4, 0)
    assert count.converged


def test_degenerate_shift_rejected():
    with pytest.raises(ValueError):
        DualOperatorSpec(np.eye(2), 2 * np.pi, 1.0, 1)


def test_lambda_inverse_solves_boundary_problem():
    spec = DualOperatorSpec(rotation(0.9), 2.0, -1.3, 1)
    m = 400
    u = np.column_stack([np.ones(m), np.linspace(0, 1, m)])
    t, w = lambda_inverse(u, spec)
    assert np.abs(w[-1] - spec.M @ w[0]).max() < 1e-12
    # J w' + K w = u on cell midpoints (centred differences)
    J = std_j(1)
    h = t[1] - t[0]
    mid = 0.5 * (w[1:] + w[:-1])
    lhs = (w[1:] - w[:-1]) / h @ J.T + spec.K * mid
    assert np.abs(lhs - u).max() < 1e-3


def test_galerkin_matrix_is_symmetric():
    spec = DualOperatorSpec(rotation(0.4), 1.5, -2.137, 1)
    A = lambda_inverse_matrix(spec, 32)
    assert np.abs(A - A.T).max() < 1e-12


@pytest.mark.parametrize("seed,mkind", [(1, "identity"), (2, "rotation"), (3, "diag")])
def test_morse_identity(seed, mkind):
    rng = np.random.default_rng(seed)
    n = 1 + seed % 2
    B = trig_coefficient(rng, n, 2.0)
    M = boundary(rng, n, mkind)
    spec = DualOperatorSpec(M, 2.0, shift_for(B, M), n)
    _, count = assemble_and_count(B, spec, 128)
    rhs = morse_identity_rhs(B, spec, 2048)
    assert count.m_minus == rhs["predicted_minus"]
    assert count.m_zero == rhs["predicted_zero"]


def test_nullity_detected_at_resonance():
    # B = I, tau = 2 pi: every constant vector solves the M = I problem
    B = CoefficientPath.constant(np.eye(2), 2 * np.pi)
    _, count = assemble_and_count(B, DualOperatorSpec(np.eye(2), 2 * np.pi, -1.137, 1))
    assert count.m_zero == 2


def test_choose_K_is_admissible():
    B = CoefficientPath.constant(np.diag([0.5, 2.0]), 3.0)
    K = choose_K(B, np.eye(2))
    assert 0.5 - K >= 0.2
    assert abs(np.linalg.det(rotation(K * 3.0) - np.eye(2))) > 1e-3


@given(st.integers(0, 10_000))
def test_monotonicity(seed):
    rng = np.random.default_rng(seed)
    tau = 1.5
    B1 = trig_coefficient(rng, 1, tau, harmonics=1)
    P = rng.normal(size=(2, 2))
    bump = P @ P.T + 0.3 * np.eye(2)
    B2 = CoefficientPath(tau, lambda t: B1(t) + bump, 1, batch=lambda ts: B1.batch(ts) + bump)
    K = shift_for(B1, np.eye(2))
    spec = DualOperatorSpec(np.eye(2), tau, K, 1)
    _, c1 = assemble_and_count(B1, spec, 64)
    _, c2 = assemble_and_count(B2, spec, 64)
    assert c2.m_minus >= c1.m_minus + c1.m_zero


def test_relative_morse_counts_crossings():
    B1 = CoefficientPath.constant(0.5 * np.eye(2), 2 * np.pi)
    B2 = CoefficientPath.constant(1.5 * np.eye(2), 2 * np.pi)
    out = relative_morse(B1, B2, np.eye(2))
    assert out["value"] == 2
    assert abs(out["crossings"][0][0] - 0.5) < 1e-6


def test_assembly_rejects_small_shift():
    B = CoefficientPath.constant(np.eye(2), 1.0)
    with pytest.raises(ValueError):
        assemble(B, DualOperatorSpec(np.eye(2), 1.0, 2.0, 1), 16)
