"""Brake-orbit indices of a symplectic path on [0, tau/2].

With gamma(tau/2) = [[A, B], [C, D]], the nullities are dim Ker B and dim Ker C
and the indices count intersections of U_k with gamma(t) U_k, where
U_1 = {0} x R^n and U_2 = R^n x {0}.

Normalisation.  ``convention="clm"`` returns the plain CLM count, in which
the starting intersection U_k = gamma(0) U_k contributes the positive
inertia of its crossing form.  The default ``"shifted"`` subtracts n from
that count; this is the normalisation under which the Morse index of the
brake dual form equals mu_1 - n [K tau / 2 pi] (checked against the
trigonometric Galerkin oracle in the tests).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .index import (
    CrossingRecord,
    Nullity,
    _crossing_count,
    _souriau,
    horizontal_frames,
    vertical_frames,
)
from .symplectic import CoefficientPath, SymplecticPath, fundamental_solution

CONVENTIONS = ("shifted", "clm")


@dataclass
class BrakeIndices:
    mu1: int
    mu2: int
    nu1: int
    nu2: int
    half_monodromy: np.ndarray
    crossings1: list
    crossings2: list
    convention: str = "shifted"

    def as_dict(self) -> dict:
        return {"mu1": self.mu1, "mu2": self.mu2, "nu1": self.nu1, "nu2": self.nu2,
                "convention": self.convention,
                "half_monodromy": self.half_monodromy.tolist()}


def _block_kernel(Blk: np.ndarray, tol: float) -> Nullity:
    Blk = np.asarray(Blk, dtype=float)
    n = Blk.shape[0]
    _, s, Vt = np.linalg.svd(Blk)
    scale = max(1.0, s.max() if s.size else 0.0)
    small = s / scale < tol
    margin = float((s / scale)[~small].min()) if (~small).any() else np.inf
    level = float((s / scale)[small].max()) if small.any() else 0.0
    return Nullity(int(small.sum()), Vt[small].T.copy(), margin, level)


def brake_nullities(gamma_half: np.ndarray, tol: float = 1e-8) -> tuple[int, int]:
    """(dim Ker B, dim Ker C) for the blocks of gamma(tau/2)."""
    G = np.asarray(gamma_half, dtype=float)
    n = G.shape[0] // 2
    return _block_kernel(G[:n, n:], tol).dim, _block_kernel(G[n:, :n], tol).dim


def brake_maslov(gamma: SymplecticPath, k: int = 1, *, convention: str = "shifted",
                 tol: float = 1e-8, locate: bool = True) -> tuple[int, list]:
    """mu_k of a path given on [0, tau/2] (returns the index and crossing records)."""
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    n = gamma.n
    if np.abs(gamma.matrices[0] - np.eye(2 * n)).max() > 1e-12:
        raise ValueError("path must start at the identity")
    frames = vertical_frames if k == 1 else horizontal_frames
    fixed = frames(np.eye(2 * n)[None])
    fixed_S = _souriau(*fixed)[0]

    def block(P):
        return P[:n, n:] if k == 1 else P[n:, :n]

    def kernel_of(P, loose=False):
        return _block_kernel(block(P), 1e-5 if loose else tol)

    def form_of(si, t, P, basis):
        coef = gamma.coefficient
        if coef is None or basis.size == 0:
            return None
        if k == 1:
            w = P[:, n:] @ basis
        else:
            w = P[:, :n] @ basis
        return w.T @ coef(t) @ w

    end_dim = kernel_of(gamma.end).dim
    rs, records = _crossing_count([gamma], frames, fixed_S, n, end_dim, kernel_of, form_of, locate)
    clm = rs + 0.5 * (n - end_dim)
    value = int(round(clm))
    if abs(clm - value) > 1e-6:
        raise ArithmeticError(f"non-integral brake count {clm:.9f}")
    if convention == "shifted":
        value -= n
    return value, records


def brake_indices(B: CoefficientPath, steps: int = 4096, *, convention: str = "shifted",
                  tol: float = 1e-8, locate: bool = True) -> BrakeIndices:
    """All four brake indices of gamma_B with period B.tau (integrated on [0, tau/2])."""
    half = fundamental_solution(B, steps, t1=0.5 * B.tau, error_estimate=False)
    mu1, c1 = brake_maslov(half, 1, convention=convention, tol=tol, locate=locate)
    mu2, c2 = brake_maslov(half, 2, convention=convention, tol=tol, locate=locate)
    nu1, nu2 = brake_nullities(half.end, tol)
    return BrakeIndices(mu1, mu2, nu1, nu2, half.end, c1, c2, convention)


def example_family_mu(lam: float, rho, tau: float, n: Optional[int] = None) -> tuple[int, int]:
    """Closed form for the diagonal constant family of rotation speeds lam * rho_i.

    Returns (n - k + sum [lam rho_i tau / pi], nu) with k = #{i : lam rho_i tau in pi Z}
    and nu = #{i : lam rho_i tau in 2 pi Z}.  The first entry is the tabulated
    value from the literature.  It changes at every lam rho_i tau in pi Z while
    the half-period path only meets U_1 when lam rho_i tau is in 2 pi Z, so it
    cannot equal ``brake_maslov`` under any fixed endpoint normalisation; see
    ``rotation_family_mu`` for the value this module computes.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    n = len(rho) if n is None else n
    x = lam * rho * tau / np.pi

    def near_int(v, period):
        return abs(np.remainder(v / period + 0.5, 1.0) - 0.5) * period < 1e-9

    k = sum(1 for v in x if near_int(v, 1.0))
    nu = sum(1 for v in x if near_int(v, 2.0))
    return n - k + int(sum(np.floor(v + 1e-9) for v in x)), nu


def rotation_family_mu(lam: float, rho, tau: float) -> int:
    """mu_1 (shifted normalisation) of exp(t lam J diag(rho, rho)) for lam rho_i > 0.

    Each block contributes ceil(x / 2) - 1 with x = lam rho_i tau / pi: the
    rotation meets U_1 at angles in pi Z and the crossing at the final time
    (the nullity) is not counted.
    """
    x = np.atleast_1d(np.asarray(rho, dtype=float)) * lam * tau / np.pi
    if (x <= 0).any():
        raise ValueError("closed form needs lam * rho_i > 0")
    return int(sum(np.ceil(v / 2 - 1e-9) - 1 for v in x))
