"""Random coefficient paths shared by the oracle tests."""

import math

import numpy as np

from symbif.symplectic import CoefficientPath, rotation


def sym(rng, d, scale=1.0):
    A = rng.normal(size=(d, d)) * scale
    return 0.5 * (A + A.T)


def trig_coefficient(rng, n, tau, harmonics=2, scale=0.6):
    """D + sum_k (C_k cos + S_k sin)(2 pi k t / tau) with symmetric parts."""
    d = 2 * n
    D = sym(rng, d, 1.5)
    parts = [(sym(rng, d, scale), sym(rng, d, scale)) for _ in range(harmonics)]
    w = 2 * math.pi / tau

    def B(t):
        out = D.copy()
        for k, (C, S) in enumerate(parts, start=1):
            out = out + C * math.cos(k * w * t) + S * math.sin(k * w * t)
        return out

    def batch(ts):
        ts = np.asarray(ts, dtype=float)
        out = np.broadcast_to(D, (len(ts), d, d)).copy()
        for k, (C, S) in enumerate(parts, start=1):
            out += np.cos(k * w * ts)[:, None, None] * C + np.sin(k * w * ts)[:, None, None] * S
        return out

    return CoefficientPath(tau, B, n, periodic=True, batch=batch)


def boundary(rng, n, kind):
    if kind == "identity":
        return np.eye(2 * n)
    if kind == "rotation":
        return rotation(rng.uniform(0.2, 2 * np.pi - 0.2), n)
    kappa = int(rng.integers(0, n + 1))
    half = np.concatenate([-np.ones(n - kappa), np.ones(kappa)])
    return np.diag(np.concatenate([half, half]))


def shift_for(B, M, eps=0.2, margin=1e-3):
    ts = np.linspace(0.0, B.tau, 129)
    lo = float(np.linalg.eigvalsh(B.sample(ts)).min())
    for j in range(400):
        K = math.floor(lo - eps) - 0.137 * j
        if abs(np.linalg.det(rotation(K * B.tau, B.n) - M)) > margin:
            return float(K)
    raise RuntimeError("no shift")


def reversible_coefficient(rng, n, tau, shift=None):
    """tau-periodic B with N B(-t) N = B(t): even diagonal blocks, odd off-diagonal block."""
    B11, B22 = sym(rng, n), sym(rng, n)
    C11, C22 = sym(rng, n, 0.3), sym(rng, n, 0.3)
    E = rng.normal(size=(n, n)) * 0.3
    shift = rng.uniform(-1, 4) if shift is None else shift
    w = 2 * np.pi / tau

    def f(t):
        c, s = np.cos(w * t), np.sin(w * t)
        return np.block([[B11 + c * C11, s * E], [s * E.T, B22 + c * C22]]) + shift * np.eye(2 * n)

    return CoefficientPath(tau, f, n, periodic=True, reversible=True)
