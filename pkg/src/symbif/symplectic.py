"""Small-matrix symplectic linear algebra and integration of linear Hamiltonian systems.

Conventions: phase space is R^{2n} with coordinates (q, p), the standard
complex structure is J = [[0, -I], [I, 0]] and a matrix S is symplectic when
S^T J S = J.  Linear Hamiltonian systems are written  Z' = J B(t) Z  with B
symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

Sampler = Callable[[float, float, int, np.ndarray], np.ndarray]

# two-stage Gauss-Legendre collocation
_S3 = np.sqrt(3.0)
_GL_C = np.array([0.5 - _S3 / 6.0, 0.5 + _S3 / 6.0])
_GL_A = np.array([[0.25, 0.25 - _S3 / 6.0], [0.25 + _S3 / 6.0, 0.25]])


@dataclass(frozen=True)
class StdStructure:
    n: int
    J: np.ndarray


def standard_structure(n: int) -> StdStructure:
    """Return the standard complex structure on R^{2n}."""
    if int(n) != n or n < 1:
        raise ValueError(f"half-dimension must be a positive integer, got {n!r}")
    n = int(n)
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = -np.eye(n)
    J[n:, :n] = np.eye(n)
    return StdStructure(n=n, J=J)


def std_j(n: int) -> np.ndarray:
    return standard_structure(n).J


def reversor(n: int) -> np.ndarray:
    """N = diag(-I_n, I_n)."""
    return np.diag(np.concatenate([-np.ones(n), np.ones(n)]))


def _half_dim(S: np.ndarray) -> int:
    S = np.asarray(S)
    if S.ndim < 2 or S.shape[-1] != S.shape[-2]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    if S.shape[-1] % 2:
        raise ValueError(f"odd dimension {S.shape[-1]} cannot carry a symplectic form")
    return S.shape[-1] // 2


def symplectic_defect(S: np.ndarray) -> float:
    """Frobenius norm of S^T J S - J."""
    S = np.asarray(S, dtype=float)
    J = std_j(_half_dim(S))
    return float(np.linalg.norm(S.T @ J @ S - J))


def rotation(theta: float, n: int = 1) -> np.ndarray:
    """exp(theta J) = cos(theta) I + sin(theta) J."""
    return np.cos(theta) * np.eye(2 * n) + np.sin(theta) * std_j(n)


def rotation_blocks(angles) -> np.ndarray:
    """exp(J diag(a, a)) with one rotation angle per degree of freedom."""
    a = np.asarray(angles, dtype=float)
    n = a.size
    c, s = np.diag(np.cos(a)), np.diag(np.sin(a))
    return np.block([[c, -s], [s, c]])


def symplectic_inverse(S: np.ndarray) -> np.ndarray:
    """S^{-1} = -J S^T J for symplectic S."""
    J = std_j(_half_dim(S))
    return -J @ np.asarray(S).T @ J


def _spd_power(A: np.ndarray, p: float) -> np.ndarray:
    w, V = np.linalg.eigh(A)
    return (V * w[..., None, :] ** p) @ np.swapaxes(V, -1, -2)


def polar(S: np.ndarray, tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Polar decomposition S = P U of a symplectic matrix (or a stack of them).

    P = sqrt(S S^T) is symmetric positive definite and symplectic, U is
    orthogonal and symplectic.
    """
    S = np.asarray(S, dtype=float)
    _half_dim(S)
    if S.ndim == 2 and symplectic_defect(S) > tol * max(1.0, np.linalg.norm(S) ** 2):
        raise ValueError(f"matrix is not symplectic (defect {symplectic_defect(S):.3e})")
    SS = S @ np.swapaxes(S, -1, -2)
    w, V = np.linalg.eigh(SS)
    assert np.all(w > 0), "polar factor of a symplectic matrix must be positive definite"
    Vt = np.swapaxes(V, -1, -2)
    P = (V * np.sqrt(w)[..., None, :]) @ Vt
    Pinv = (V / np.sqrt(w)[..., None, :]) @ Vt
    return P, Pinv @ S


def unitary_part(S: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """The unitary n x n matrix u(S) = U_1 + i U_2 of the orthogonal factor of S.

    Works on stacks of shape (..., 2n, 2n).
    """
    n = _half_dim(S)
    _, U = polar(S, tol=tol)
    return U[..., :n, :n] + 1j * U[..., n:, :n]


def _real_form(u: np.ndarray) -> np.ndarray:
    a, b = u.real, u.imag
    return np.block([[a, -b], [b, a]])


@dataclass(frozen=True)
class CoefficientPath:
    """Symmetric coefficient t -> B(t) on [0, tau].

    ``func`` maps a float to a (2n, 2n) array.  ``periodic`` and ``reversible``
    are declared symmetry tags; ``check_tags`` verifies them on samples.
    """

    tau: float
    func: Callable[[float], np.ndarray]
    n: int
    periodic: bool = False
    reversible: bool = False
    sym_tol: float = 1e-12
    batch: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def __call__(self, t: float) -> np.ndarray:
        B = np.asarray(self.func(float(t)), dtype=float)
        if B.shape != (2 * self.n, 2 * self.n):
            raise ValueError(f"B({t}) has shape {B.shape}, expected {(2 * self.n, 2 * self.n)}")
        if np.abs(B - B.T).max() > self.sym_tol * max(1.0, np.abs(B).max()):
            raise ValueError(f"coefficient is not symmetric at t={t}")
        return B

    def sample(self, ts) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if self.batch is None:
            return np.stack([self(t) for t in ts])
        Bs = np.asarray(self.batch(ts), dtype=float)
        if Bs.shape != (len(ts), 2 * self.n, 2 * self.n):
            raise ValueError(f"batched coefficient has shape {Bs.shape}")
        if np.abs(Bs - np.swapaxes(Bs, -1, -2)).max() > self.sym_tol * max(1.0, np.abs(Bs).max()):
            raise ValueError("coefficient is not symmetric")
        return Bs

    @classmethod
    def constant(cls, B, tau: float, **tags) -> "CoefficientPath":
        B = np.array(B, dtype=float)
        n = _half_dim(B)
        B.setflags(write=False)
        return cls(tau=float(tau), func=lambda t: B, n=n,
                   batch=lambda ts: np.broadcast_to(B, (len(ts),) + B.shape), **tags)

    def shifted(self, K: float) -> "CoefficientPath":
        """t -> B(t) + K I."""
        I = np.eye(2 * self.n)
        batch = None if self.batch is None else (lambda ts: self.batch(ts) + K * I)
        return CoefficientPath(self.tau, lambda t: self.func(t) + K * I, self.n,
                               self.periodic, self.reversible, self.sym_tol, batch)

    def check_tags(self, samples: int = 17, tol: float = 1e-10) -> None:
        ts = np.linspace(0.0, self.tau, samples)
        if self.periodic:
            for t in ts:
                if np.abs(self(t + self.tau) - self(t)).max() > tol:
                    raise ValueError(f"coefficient tagged periodic fails at t={t}")
        if self.reversible:
            N = reversor(self.n)
            for t in ts:
                if np.abs(N @ self(-t) @ N - self(t)).max() > tol:
                    raise ValueError(f"coefficient tagged reversible fails at t={t}")


def _gauss_steps(coef: CoefficientPath, grid: np.ndarray) -> np.ndarray:
    """One-step propagators R_k with Z(grid[k+1]) = R_k Z(grid[k])."""
    d = 2 * coef.n
    J = std_j(coef.n)
    h = np.diff(grid)
    t1 = grid[:-1] + _GL_C[0] * h
    t2 = grid[:-1] + _GL_C[1] * h
    A1 = J @ coef.sample(t1)
    A2 = J @ coef.sample(t2)
    I = np.eye(d)
    hh = h[:, None, None]
    # stage values Y_i = Z + h sum_j a_ij A_j Y_j
    top = np.concatenate([I - hh * _GL_A[0, 0] * A1, -hh * _GL_A[0, 1] * A2], axis=2)
    bot = np.concatenate([-hh * _GL_A[1, 0] * A1, I - hh * _GL_A[1, 1] * A2], axis=2)
    lhs = np.concatenate([top, bot], axis=1)
    rhs = np.broadcast_to(np.concatenate([I, I], axis=0), (len(h), 2 * d, d))
    Y = np.linalg.solve(lhs, rhs)
    return I + 0.5 * hh * (A1 @ Y[:, :d] + A2 @ Y[:, d:])


def propagate(coef: CoefficientPath, grid: np.ndarray, Z0: np.ndarray) -> np.ndarray:
    """Integrate Z' = J B Z along ``grid`` (one Gauss step per interval)."""
    grid = np.asarray(grid, dtype=float)
    R = _gauss_steps(coef, grid)
    out = np.empty((len(grid),) + Z0.shape)
    out[0] = Z0
    for k in range(len(R)):
        out[k + 1] = R[k] @ out[k]
    return out


def _ode_sampler(coef: CoefficientPath, substeps: int = 8) -> Sampler:
    def sample(ta: float, tb: float, k: int, Za: np.ndarray) -> np.ndarray:
        fine = propagate(coef, np.linspace(ta, tb, k * substeps + 1), Za)
        return fine[::substeps]
    return sample


@dataclass(frozen=True)
class SymplecticPath:
    """Sampled path of symplectic matrices.

    ``sampler(ta, tb, k, Za)`` returns k+1 matrices on a uniform grid of
    [ta, tb] starting from the stored value ``Za`` at ``ta``; index routines
    use it to refine intervals by re-integration instead of interpolation.
    """

    times: np.ndarray
    matrices: np.ndarray
    coefficient: Optional[CoefficientPath] = None
    defect: float = 0.0
    error: float = 0.0
    sampler: Optional[Sampler] = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.matrices.shape[-1] // 2

    @property
    def end(self) -> np.ndarray:
        return self.matrices[-1]

    @property
    def span(self) -> tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])

    def right_multiply(self, R: np.ndarray) -> "SymplecticPath":
        """The path t -> gamma(t) R."""
        R = np.asarray(R, dtype=float)
        Rinv = np.linalg.inv(R)
        base = self.sampler
        sampler = None
        if base is not None:
            sampler = lambda ta, tb, k, Za: base(ta, tb, k, Za @ Rinv) @ R
        mats = self.matrices @ R
        return SymplecticPath(self.times, mats, self.coefficient,
                              _max_defect(mats), self.error * np.linalg.norm(R), sampler)

    def restrict(self, i0: int, i1: int) -> "SymplecticPath":
        return SymplecticPath(self.times[i0:i1 + 1], self.matrices[i0:i1 + 1], self.coefficient,
                              self.defect, self.error, self.sampler)


def _max_defect(mats: np.ndarray) -> float:
    J = std_j(mats.shape[-1] // 2)
    D = np.swapaxes(mats, -1, -2) @ J @ mats - J
    return float(np.sqrt((D ** 2).sum(axis=(-1, -2))).max())


def fundamental_solution(B: CoefficientPath, steps: int = 4096, *, t0: float = 0.0,
                         t1: Optional[float] = None, error_estimate: bool = True,
                         defect_bound: float = 1e-9) -> SymplecticPath:
    """Fundamental solution of Z' = J B(t) Z, Z(t0) = I on [t0, t1] (default [0, tau]).

    Fourth order Gauss-Legendre collocation, which is exactly symplectic for
    linear Hamiltonian systems and reduces to the (2,2) Pade approximant of
    exp(h J B) for constant B.  With ``error_estimate`` the path is computed on
    a twice finer grid and the reported error is the endpoint change between
    the two resolutions (a bound for the returned, finer endpoint).
    """
    if steps < 16:
        raise ValueError("steps must be at least 16")
    t1 = B.tau if t1 is None else float(t1)
    I = np.eye(2 * B.n)
    grid = np.linspace(t0, t1, steps + 1)
    if error_estimate:
        fine = propagate(B, np.linspace(t0, t1, 2 * steps + 1), I)
        coarse_end = propagate(B, grid, I)[-1]
        mats = fine[::2]
        err = float(np.linalg.norm(coarse_end - mats[-1])) + 1e-15 * steps
    else:
        mats = propagate(B, grid, I)
        err = float("nan")
    defect = _max_defect(mats)
    if defect > defect_bound * max(1.0, float(np.abs(mats).max()) ** 2):
        raise FloatingPointError(f"symplectic defect {defect:.3e} exceeds bound {defect_bound:.1e}")
    return SymplecticPath(grid, mats, B, defect, err, _ode_sampler(B))


def _schur_angles(u: np.ndarray):
    from scipy.linalg import schur
    T, Z = schur(u, output="complex")
    return Z, np.angle(np.diag(T))


def connect_to(M: np.ndarray, samples: int = 64, tol: float = 1e-8) -> SymplecticPath:
    """Path s -> exp(s log P) U(s), s in [0, 1], from I to M = P U.

    U(s) is the unitary geodesic through principal eigen-angles in (-pi, pi].
    """
    M = np.asarray(M, dtype=float)
    n = _half_dim(M)
    if symplectic_defect(M) > tol * max(1.0, np.linalg.norm(M) ** 2):
        raise ValueError("target is not symplectic")
    P, U = polar(M)
    w, V = np.linalg.eigh(P)
    assert np.all(w > 0)
    logw = np.log(w)
    Z, ang = _schur_angles(U[:n, :n] + 1j * U[n:, :n])
    Zh = Z.conj().T

    def at(s: float) -> np.ndarray:
        Ps = (V * np.exp(s * logw)) @ V.T
        return Ps @ _real_form((Z * np.exp(1j * s * ang)) @ Zh)

    def sampler(ta, tb, k, Za):
        return np.stack([at(s) for s in np.linspace(ta, tb, k + 1)])

    times = np.linspace(0.0, 1.0, samples + 1)
    mats = sampler(0.0, 1.0, samples, None)
    mats[0] = np.eye(2 * n)
    mats[-1] = M
    return SymplecticPath(times, mats, None, _max_defect(mats), 0.0, sampler)


def constant_path(n: int, tau: float = 1.0, samples: int = 16) -> SymplecticPath:
    """The constant path at I."""
    I = np.eye(2 * n)
    return SymplecticPath(np.linspace(0.0, tau, samples + 1), np.broadcast_to(I, (samples + 1, 2 * n, 2 * n)).copy(),
                          CoefficientPath.constant(np.zeros((2 * n, 2 * n)), tau), 0.0, 0.0,
                          lambda ta, tb, k, Za: np.broadcast_to(Za, (k + 1,) + Za.shape).copy())
