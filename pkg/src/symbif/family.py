"""Parameter families of Hamiltonians with a known trivial branch.

All evaluators are batched: ``H(lam, t, Z)`` takes Z of shape (..., 2n) and t
broadcastable against Z[..., 0]; gradients return (..., 2n) and Hessians
(..., 2n, 2n).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .symplectic import CoefficientPath, reversor, std_j

Evaluator = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


def _zero_branch(n):
    def u(lam, t):
        t = np.asarray(t, dtype=float)
        return np.zeros(t.shape + (2 * n,))
    return u


@dataclass
class HamiltonianFamily:
    """H(lam, t, z) with gradient, Hessian and a trivial branch lam -> u_lam(t)."""

    n: int
    tau: float
    H: Evaluator
    grad: Evaluator
    hess: Evaluator
    M: np.ndarray = None
    lam_interval: tuple[float, float] = (0.0, 1.0)
    branch: Optional[Callable] = None
    flags: dict = field(default_factory=dict)
    name: str = "family"

    def __post_init__(self):
        d = 2 * self.n
        self.M = np.eye(d) if self.M is None else np.asarray(self.M, dtype=float)
        if self.branch is None:
            self.branch = _zero_branch(self.n)
        for key in ("M_periodic", "reversible", "autonomous", "even"):
            self.flags.setdefault(key, False)

    def u(self, lam: float, t) -> np.ndarray:
        return np.asarray(self.branch(lam, t), dtype=float)

    def coefficient(self, lam: float) -> CoefficientPath:
        """B_lam(t) = H''(lam, t, u_lam(t)) along the trivial branch."""
        n = self.n
        rev = bool(self.flags.get("reversible"))

        def B(t):
            return self.hess(lam, np.asarray(t, dtype=float), self.u(lam, t))

        return CoefficientPath(self.tau, B, n, periodic=bool(self.flags.get("M_periodic")),
                               reversible=rev, batch=B)

    def vector_field(self, lam: float, t, Z) -> np.ndarray:
        return self.grad(lam, t, Z) @ std_j(self.n).T

    def check(self, lams=None, samples: int = 16, seed: int = 0, radius: float = 0.5) -> dict:
        """Spot checks of gradient, Hessian symmetry, branch residual and flags.

        Returns a dict of the worst observed defects; raises ValueError when
        one exceeds its tolerance.
        """
        rng = np.random.default_rng(seed)
        lo, hi = self.lam_interval
        lams = np.linspace(lo, hi, 3) if lams is None else np.atleast_1d(lams)
        d = 2 * self.n
        out = {"grad": 0.0, "hess_sym": 0.0, "branch": 0.0, "flags": 0.0}
        ts = rng.uniform(0, self.tau, samples)
        for lam in lams:
            Z = self.u(lam, ts) + radius * rng.normal(size=(samples, d))
            g = self.grad(lam, ts, Z)
            eps = 1e-6
            for j in range(d):
                e = np.zeros(d)
                e[j] = eps
                fd = (self.H(lam, ts, Z + e) - self.H(lam, ts, Z - e)) / (2 * eps)
                scale = np.maximum(np.abs(g[:, j]), 1.0)
                out["grad"] = max(out["grad"], float((np.abs(fd - g[:, j]) / scale).max()))
            Hs = self.hess(lam, ts, Z)
            out["hess_sym"] = max(out["hess_sym"], float(np.abs(Hs - np.swapaxes(Hs, -1, -2)).max()))
            out["branch"] = max(out["branch"], self.branch_residual(lam))
            if self.flags["M_periodic"]:
                a = self.H(lam, ts + self.tau, Z @ self.M.T)
                out["flags"] = max(out["flags"], float(np.abs(a - self.H(lam, ts, Z)).max()))
            if self.flags["reversible"]:
                N = reversor(self.n)
                a = self.H(lam, -ts, Z @ N.T)
                out["flags"] = max(out["flags"], float(np.abs(a - self.H(lam, ts, Z)).max()))
            if self.flags["even"]:
                out["flags"] = max(out["flags"], float(np.abs(self.H(lam, ts, -Z) - self.H(lam, ts, Z)).max()))
        limits = {"grad": 1e-5, "hess_sym": 1e-10, "branch": 1e-8, "flags": 1e-10}
        bad = [k for k in limits if out[k] > limits[k]]
        if bad:
            raise ValueError(f"family check failed: {', '.join(f'{k}={out[k]:.2e}' for k in bad)}")
        return out

    def branch_residual(self, lam: float, samples: int = 64) -> float:
        ts = np.linspace(0.0, self.tau, samples + 1)
        h = 1e-5
        du = (self.u(lam, ts + h) - self.u(lam, ts - h)) / (2 * h)
        f = self.vector_field(lam, ts, self.u(lam, ts))
        return float(np.abs(du - f).max())


# ------------------------------------------------------------------ builders


def linear_quadratic(S: np.ndarray, tau: float = 2 * np.pi, M=None,
                     lam_interval=(0.0, 2.0), name: str = "linear") -> HamiltonianFamily:
    """H = lam z^T S z / 2 with constant symmetric S; branch u = 0."""
    S = np.asarray(S, dtype=float)
    n = S.shape[0] // 2

    def H(lam, t, Z):
        return 0.5 * lam * np.einsum("...i,ij,...j->...", Z, S, Z)

    def grad(lam, t, Z):
        return lam * Z @ S

    def hess(lam, t, Z):
        shape = np.shape(Z)[:-1]
        return np.broadcast_to(lam * S, shape + S.shape).copy()

    N = reversor(n)
    flags = {"M_periodic": M is None or np.allclose(np.asarray(M).T @ S @ np.asarray(M), S),
             "reversible": np.allclose(N @ S @ N, S), "autonomous": True, "even": True}
    return HamiltonianFamily(n, tau, H, grad, hess, M, lam_interval, None, flags, name)


def rotation_family(rho, tau: float = 2 * np.pi, M=None, lam_interval=(0.0, 2.0)) -> HamiltonianFamily:
    """H = lam sum rho_i (x_i^2 + y_i^2) / 2."""
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    S = np.diag(np.concatenate([rho, rho]))
    return linear_quadratic(S, tau, M, lam_interval, name="rotation")


def quartic(n: int = 1, tau: float = 2 * np.pi, M=None, lam_interval=(0.0, 2.0)) -> HamiltonianFamily:
    """H = lam |z|^2 / 2 + |z|^4 / 4; circles of radius sqrt(k - lam) have period 2 pi / k."""

    def H(lam, t, Z):
        r2 = np.einsum("...i,...i->...", Z, Z)
        return 0.5 * lam * r2 + 0.25 * r2 ** 2

    def grad(lam, t, Z):
        r2 = np.einsum("...i,...i->...", Z, Z)[..., None]
        return (lam + r2) * Z

    def hess(lam, t, Z):
        Z = np.asarray(Z, dtype=float)
        r2 = np.einsum("...i,...i->...", Z, Z)[..., None, None]
        I = np.eye(2 * n)
        return (lam + r2) * I + 2 * Z[..., :, None] * Z[..., None, :]

    flags = {"M_periodic": M is None or np.allclose(np.asarray(M).T @ np.asarray(M), np.eye(2 * n)),
             "reversible": True, "autonomous": True, "even": True}
    return HamiltonianFamily(n, tau, H, grad, hess, M, lam_interval, None, flags, "quartic")


class Polynomial:
    """Polynomial in z in R^{2n} given by {exponent tuple: coefficient}."""

    def __init__(self, terms: dict, n: int):
        self.n = n
        self.d = 2 * n
        self.terms = {}
        for e, c in terms.items():
            e = tuple(int(x) for x in e)
            if len(e) != self.d or min(e) < 0:
                raise ValueError(f"bad exponent {e}")
            if sum(e) > 6:
                raise ValueError("polynomial degree must be <= 6")
            self.terms[e] = self.terms.get(e, 0.0) + float(c)
        E = np.array(list(self.terms) or [(0,) * self.d], dtype=int)
        self.E = E
        self.c = np.array(list(self.terms.values()) or [0.0])

    @property
    def degree(self) -> int:
        return int(self.E.sum(axis=1).max())

    def _pow(self, Z, E):
        Z = np.asarray(Z, dtype=float)[..., None, :]
        return np.where(E > 0, Z ** E, 1.0)

    def __call__(self, Z):
        return (np.prod(self._pow(Z, self.E), axis=-1) * self.c).sum(-1)

    def grad(self, Z):
        out = []
        for j in range(self.d):
            E = self.E.copy()
            coef = self.c * E[:, j]
            E[:, j] = np.maximum(E[:, j] - 1, 0)
            out.append((np.prod(self._pow(Z, E), axis=-1) * coef).sum(-1))
        return np.stack(out, axis=-1)

    def hess(self, Z):
        d = self.d
        Z = np.asarray(Z, dtype=float)
        out = np.zeros(Z.shape[:-1] + (d, d))
        for i in range(d):
            for j in range(i, d):
                E = self.E.copy()
                coef = self.c * E[:, i]
                E[:, i] = np.maximum(E[:, i] - 1, 0)
                coef = coef * E[:, j]
                E[:, j] = np.maximum(E[:, j] - 1, 0)
                v = (np.prod(self._pow(Z, E), axis=-1) * coef).sum(-1)
                out[..., i, j] = v
                out[..., j, i] = v
        return out


def polynomial_family(h0: dict, h1: dict, n: int, tau: float = 2 * np.pi, M=None,
                      lam_interval=(0.0, 2.0)) -> HamiltonianFamily:
    """H = H0(z) + lam H1(z) with polynomial H0, H1 (degree <= 6).

    The branch is u = 0, so both polynomials must have vanishing gradient at 0.
    """
    P0, P1 = Polynomial(h0, n), Polynomial(h1, n)
    z0 = np.zeros(2 * n)
    if np.abs(P0.grad(z0)).max() > 0 or np.abs(P1.grad(z0)).max() > 0:
        raise ValueError("polynomial family needs grad H(0) = 0 for the zero branch")

    def H(lam, t, Z):
        return P0(Z) + lam * P1(Z)

    def grad(lam, t, Z):
        return P0.grad(Z) + lam * P1.grad(Z)

    def hess(lam, t, Z):
        return P0.hess(Z) + lam * P1.hess(Z)

    even = all(sum(e) % 2 == 0 for P in (P0, P1) for e in P.terms)
    # N flips x: reversible iff every monomial has even total x-degree
    rev = all(sum(e[:n]) % 2 == 0 for P in (P0, P1) for e in P.terms)
    fam = HamiltonianFamily(n, tau, H, grad, hess, M, lam_interval, None,
                            {"reversible": rev, "autonomous": True, "even": even}, "polynomial")
    rng = np.random.default_rng(0)
    Z = rng.normal(size=(8, 2 * n))
    fam.flags["M_periodic"] = bool(np.allclose(H(0.7, 0.0, Z @ fam.M.T), H(0.7, 0.0, Z), atol=1e-10))
    fam.P0, fam.P1 = P0, P1
    return fam
