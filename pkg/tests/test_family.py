import numpy as np
import pytest
from hypothesis import given, strategies as st

from symbif.family import HamiltonianFamily, Polynomial, linear_quadratic, polynomial_family, quartic
from symbif.symplectic import rotation

exponent = st.tuples(*[st.integers(0, 2)] * 4).filter(lambda e: sum(e) <= 6)
terms = st.dictionaries(exponent, st.floats(-2, 2), min_size=1, max_size=5)


@given(terms, st.integers(0, 1000))
def test_polynomial_derivatives(tm, seed):
    P = Polynomial(tm, 2)
    z = np.random.default_rng(seed).normal(size=4)
    eps = 1e-6
    fd = np.array([(P(z + eps * e) - P(z - eps * e)) / (2 * eps) for e in np.eye(4)])
    assert np.allclose(fd, P.grad(z), atol=1e-5 * max(1.0, np.abs(fd).max()))
    fh = np.array([(P.grad(z + eps * e) - P.grad(z - eps * e)) / (2 * eps) for e in np.eye(4)])
    assert np.allclose(fh, P.hess(z), atol=1e-4 * max(1.0, np.abs(fh).max()))


def test_polynomial_degree_limit():
    with pytest.raises(ValueError):
        Polynomial({(7, 0): 1.0}, 1)


def test_builtin_families_pass_checks():
    for fam in (quartic(), linear_quadratic(np.diag([1.0, 2.0])), quartic(2, M=rotation(0.5, 2))):
        out = fam.check()
        assert out["branch"] == 0.0


def test_quartic_hessian_at_origin():
    fam = quartic()
    assert np.allclose(fam.coefficient(0.7)(1.0), 0.7 * np.eye(2))


def test_polynomial_family_flags():
    fam = polynomial_family({(2, 0): 0.5, (0, 2): 0.5, (4, 0): 1.0}, {(0, 2): 1.0}, 1)
    assert fam.flags["even"] and fam.flags["reversible"] and fam.flags["M_periodic"]
    fam = polynomial_family({(2, 0): 0.5, (1, 2): 1.0}, {(0, 2): 1.0}, 1)
    assert not fam.flags["even"] and not fam.flags["reversible"]


def test_polynomial_family_needs_critical_origin():
    with pytest.raises(ValueError):
        polynomial_family({(1, 0): 1.0}, {}, 1)


def test_check_catches_wrong_gradient():
    fam = quartic()
    bad = HamiltonianFamily(1, 2 * np.pi, fam.H, lambda lam, t, Z: 2 * fam.grad(lam, t, Z), fam.hess)
    with pytest.raises(ValueError):
        bad.check()


def test_check_catches_false_flag():
    fam = linear_quadratic(np.diag([1.0, 2.0]), M=rotation(0.3))
    assert not fam.flags["M_periodic"]
    fam.flags["M_periodic"] = True
    with pytest.raises(ValueError):
        fam.check()
