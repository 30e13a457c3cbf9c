import numpy as np
import pytest

from symbif.dual_action import (DualBasis, action, choose_shift, circle_dual_init, conjugate,
                                descend_and_recover, psi_eval_grad, second_form)
from symbif.family import linear_quadratic, quartic
from symbif.symplectic import rotation


@pytest.fixture(scope="module")
def setup():
    fam = quartic()
    shift = choose_shift(fam, (0.5, 1.0))
    basis = DualBasis(1, 2 * np.pi, shift.K, np.eye(2), modes=8)
    return fam, shift, basis


def test_shift_is_convexifying(setup):
    fam, shift, _ = setup
    assert shift.c1 > 0
    assert shift.nondegenerate()
    Z = np.random.default_rng(0).uniform(-2 * shift.R, 2 * shift.R, (500, 2))
    assert np.linalg.eigvalsh(shift.hess(0.75, 0.0, Z)).min() > 0


def test_cutoff_derivatives(setup):
    _, shift, _ = setup
    rng = np.random.default_rng(1)
    Z = rng.normal(size=(50, 2)) * 1.5 * shift.R
    eps = 1e-6
    for e in np.eye(2):
        fd = (shift.H(0.75, 0.0, Z + eps * e) - shift.H(0.75, 0.0, Z - eps * e)) / (2 * eps)
        assert np.allclose(fd, shift.grad(0.75, 0.0, Z) @ e, rtol=1e-6, atol=1e-6)
        fh = (shift.grad(0.75, 0.0, Z + eps * e) - shift.grad(0.75, 0.0, Z - eps * e)) / (2 * eps)
        assert np.allclose(fh, shift.hess(0.75, 0.0, Z) @ e, rtol=1e-5, atol=1e-5)


def test_fenchel_round_trip(setup):
    _, shift, _ = setup
    Z = np.random.default_rng(2).uniform(-1, 1, (100, 2))
    ce = conjugate(shift, 0.75, 0.0, shift.grad(0.75, 0.0, Z))
    assert np.abs(ce.z - Z).max() < 1e-10
    assert np.abs(ce.hessian @ shift.hess(0.75, 0.0, Z) - np.eye(2)).max() < 1e-8


def test_conjugate_value_is_legendre(setup):
    _, shift, _ = setup
    z = np.array([0.3, -0.2])
    xi = shift.grad(0.75, 0.0, z)
    ce = conjugate(shift, 0.75, 0.0, xi)
    assert abs(ce.value - (xi @ z - shift.H(0.75, 0.0, z))) < 1e-14


def test_basis_is_lambda_eigenbasis():
    basis = DualBasis(1, 2.0, -1.137, rotation(0.8), modes=4)
    G = np.einsum("tap,taq->pq", basis.Phi, basis.Phi) * basis.tau / basis.nodes
    assert np.abs(G - np.eye(basis.size)).max() < 1e-12
    c = np.random.default_rng(3).normal(size=basis.size)
    u0 = basis.values(c, [0.0])[0]
    uT = basis.values(c, [basis.tau])[0]
    assert np.abs(uT - rotation(0.8) @ u0).max() < 1e-12


def test_basis_needs_orthogonal_boundary():
    with pytest.raises(NotImplementedError):
        DualBasis(1, 1.0, -1.137, np.diag([2.0, 0.5]))


def test_gradient_matches_finite_differences(setup):
    _, shift, basis = setup
    rng = np.random.default_rng(4)
    w = rng.normal(size=basis.size) * 0.1
    _, g, ce = psi_eval_grad(shift, basis, 0.75, w)
    eps = 1e-5
    for _ in range(5):
        d = rng.normal(size=basis.size)
        fd = (psi_eval_grad(shift, basis, 0.75, w + eps * d)[0]
              - psi_eval_grad(shift, basis, 0.75, w - eps * d)[0]) / (2 * eps)
        assert abs(fd - g @ d) <= 1e-6 * max(abs(g @ d), 1.0)
        gd = (psi_eval_grad(shift, basis, 0.75, w + eps * d)[1]
              - psi_eval_grad(shift, basis, 0.75, w - eps * d)[1]) / (2 * eps)
        assert np.allclose(gd, second_form(basis, ce, d), atol=1e-5)


def test_circle_recovered(setup):
    fam, shift, basis = setup
    state = descend_and_recover(shift, basis, 0.75, circle_dual_init(shift, basis, 0.75, 0.52))
    assert state.converged
    assert abs(np.linalg.norm(state.u0) - 0.5) < 1e-6
    assert state.boundary_defect < 1e-10
    # psi_K(w) = -Phi(u) at critical points
    assert abs(state.value + action(fam, 0.75, basis, -basis.lambda_inverse(state.w))) < 1e-8


def test_linear_problem_has_only_trivial_critical_point():
    fam = linear_quadratic(np.eye(2))
    shift = choose_shift(fam, (0.5, 0.5))
    basis = DualBasis(1, 2 * np.pi, shift.K, np.eye(2), modes=6)
    w0 = np.random.default_rng(5).normal(size=basis.size) * 0.01
    state = descend_and_recover(shift, basis, 0.5, w0)
    assert state.converged and np.abs(state.u_nodes).max() < 1e-8
