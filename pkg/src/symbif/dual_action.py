"""Clarke-Ekeland dual action for u' = J grad H(lam, t, u), u(tau) = M u(0).

With H_K(z) = H(z) - K |z|^2 / 2 strictly convex and Lambda = J d/dt + K
invertible on the M-boundary condition, critical points w of

    psi_K(w) = int_0^tau [ (Lambda^{-1} w, w) / 2 + H_K^*(t, w) ] dt

correspond to orbits through u = grad H_K^*(w) = -Lambda^{-1} w, and
psi_K(w) = -Phi(u) for the action Phi(u) = int (J u', u) / 2 + H(u).

Discretisation.  For orthogonal symplectic M = Q exp(J diag(theta)) Q^T
the functions Q exp(alpha t J) e (alpha = (theta_j + 2 pi k) / tau, e in
the j-th canonical pair) form an orthonormal eigenbasis of Lambda with
eigenvalue K - alpha, so Lambda^{-1} is diagonal and exact.  H_K^* enters
through the trapezoid rule on a uniform node grid; its integrand is tau
periodic whenever H is M-invariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize

from .family import HamiltonianFamily
from .symplectic import _real_form, _schur_angles, rotation

NEWTON_TOL = 1e-12


# ------------------------------------------------------------------ cutoff


def _smoothstep(x):
    """Quintic 0 -> 1 on [0, 1] with two vanishing derivatives at both ends."""
    s = np.clip(x, 0.0, 1.0)
    p = s ** 3 * (10 - 15 * s + 6 * s * s)
    dp = 30 * s * s * (1 - s) ** 2
    ddp = 60 * s * (1 - s) * (1 - 2 * s)
    return p, dp, ddp


@dataclass
class ConvexShift:
    """Convexified, cut off Hamiltonian H_K = chi H + (1 - chi) Q - K |z|^2 / 2.

    chi = 1 within distance R of the branch and 0 beyond 2R, where H is
    replaced by its quadratic model Q with curvature ``outer``.
    """

    family: HamiltonianFamily
    K: float
    c1: float
    c2: float
    c3: float
    R: float
    outer: float
    lam_box: tuple[float, float]
    margin: float
    center: Optional[Callable] = None

    def __post_init__(self):
        if self.center is None:
            self.center = self.family.u

    # the modified Hamiltonian and its derivatives -----------------------

    def _parts(self, lam, t, Z):
        fam = self.family
        Z = np.asarray(Z, dtype=float)
        t = np.broadcast_to(np.asarray(t, dtype=float), Z.shape[:-1])
        c = self.center(lam, t)
        D = Z - c
        r = np.sqrt(np.einsum("...i,...i->...", D, D))
        return fam, Z, t, c, D, r

    def H(self, lam, t, Z):
        fam, Z, t, c, D, r = self._parts(lam, t, Z)
        val = fam.H(lam, t, Z)
        if (r > self.R).any():
            chi = 1 - _smoothstep((r - self.R) / self.R)[0]
            Q = fam.H(lam, t, c) + np.einsum("...i,...i->...", fam.grad(lam, t, c), D) + 0.5 * self.outer * r * r
            val = chi * val + (1 - chi) * Q
        return val - 0.5 * self.K * np.einsum("...i,...i->...", Z, Z)

    def grad(self, lam, t, Z):
        fam, Z, t, c, D, r = self._parts(lam, t, Z)
        g = fam.grad(lam, t, Z)
        if (r > self.R).any():
            p, dp, _ = _smoothstep((r - self.R) / self.R)
            chi = (1 - p)[..., None]
            e = D / np.maximum(r, 1e-300)[..., None]
            g0 = fam.grad(lam, t, c)
            Q = fam.H(lam, t, c) + np.einsum("...i,...i->...", g0, D) + 0.5 * self.outer * r * r
            gQ = g0 + self.outer * D
            dchi = (-dp / self.R)[..., None] * e
            g = chi * g + (1 - chi) * gQ + (fam.H(lam, t, Z) - Q)[..., None] * dchi
        return g - self.K * Z

    def hess(self, lam, t, Z):
        fam, Z, t, c, D, r = self._parts(lam, t, Z)
        d = Z.shape[-1]
        I = np.eye(d)
        Hs = fam.hess(lam, t, Z)
        if (r > self.R).any():
            p, dp, ddp = _smoothstep((r - self.R) / self.R)
            chi = (1 - p)[..., None, None]
            rr = np.maximum(r, 1e-300)
            e = D / rr[..., None]
            g0 = fam.grad(lam, t, c)
            Q = fam.H(lam, t, c) + np.einsum("...i,...i->...", g0, D) + 0.5 * self.outer * r * r
            diff = fam.grad(lam, t, Z) - (g0 + self.outer * D)
            c1 = (-dp / self.R)
            c2 = (-ddp / self.R ** 2)
            ee = e[..., :, None] * e[..., None, :]
            dchi = c1[..., None] * e
            d2chi = c2[..., None, None] * ee + (c1 / rr)[..., None, None] * (I - ee)
            cross = dchi[..., :, None] * diff[..., None, :]
            Hs = (chi * Hs + (1 - chi) * self.outer * I + cross + np.swapaxes(cross, -1, -2)
                  + (fam.H(lam, t, Z) - Q)[..., None, None] * d2chi)
        return Hs - self.K * I

    def nondegenerate(self) -> bool:
        return self.margin > 1e-6


def _ball_samples(rng, d, R, count):
    v = rng.normal(size=(count, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    radii = np.concatenate([R * rng.uniform(0, 1, count // 2) ** (1 / d),
                            np.linspace(0.0, 2.2 * R, count - count // 2)])
    return v * radii[:, None]


def choose_shift(family: HamiltonianFamily, lam_box: tuple[float, float], R: Optional[float] = None,
                 *, eps: float = 0.1, min_margin: float = 1e-3, samples: int = 2000,
                 seed: int = 0, max_tries: int = 400) -> ConvexShift:
    """Pick K so that H_K is uniformly convex on sampled points and Lambda is invertible.

    K = 0 is accepted when H is already eps-convex and nondegenerate; otherwise
    K runs through min(-1, floor(lo - eps)) - 0.137 j.
    """
    rng = np.random.default_rng(seed)
    d = 2 * family.n
    tau = family.tau
    lams = np.linspace(lam_box[0], lam_box[1], 5)
    ts = np.array([0.0]) if family.flags.get("autonomous") else np.linspace(0.0, tau, 9)[:-1]
    if R is None:
        grid = np.linspace(0.0, tau, 33)
        R = 2 * max(float(np.abs(family.u(l, grid)).max()) for l in lams) + 1.0
    pts = _ball_samples(rng, d, R, samples)
    inner = np.linalg.norm(pts, axis=1) <= R
    probe = ConvexShift(family, 0.0, 0, 0, 0, R, 0.0, lam_box, 0.0)
    outer = -np.inf
    for lam in lams:
        for t in ts:
            Z = pts[inner] + family.u(lam, t)
            outer = max(outer, float(np.linalg.eigvalsh(family.hess(lam, t, Z)).max()))
    probe.outer = outer
    lo, hi, gmax = np.inf, -np.inf, 0.0
    for lam in lams:
        for t in ts:
            Z = pts + family.u(lam, t)
            ev = np.linalg.eigvalsh(probe.hess(lam, t, Z))
            lo, hi = min(lo, ev.min()), max(hi, ev.max())
            gmax = max(gmax, float(np.abs(family.grad(lam, t, family.u(lam, t))).max()))
    if not np.isfinite(lo):
        raise ValueError("Hessian samples are not finite")
    M = family.M
    candidates = [0.0] if lo >= eps else []
    base = min(-1.0, math.floor(lo - eps))
    candidates += [base - 0.137 * j for j in range(max_tries)]
    for K in candidates:
        margin = abs(float(np.linalg.det(rotation(K * tau, family.n) @ M - np.eye(d))))
        if margin > min_margin:
            return ConvexShift(family, float(K), lo - K, hi - K, gmax, R, outer,
                               tuple(lam_box), margin)
    raise ValueError("no admissible shift in the scanned range")


# ------------------------------------------------------------------ conjugate


@dataclass
class ConjugateEval:
    value: np.ndarray
    z: np.ndarray
    hessian: np.ndarray
    iterations: int = 0
    residual: float = 0.0


def conjugate(shift: ConvexShift, lam: float, t, xi, *, tol: float = NEWTON_TOL,
              max_iter: int = 60) -> ConjugateEval:
    """H_K^*(xi) = max_z <xi, z> - H_K(z) by damped Newton on grad H_K(z) = xi.

    Batched over leading axes of ``xi``; ``t`` broadcasts against them.
    """
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim == 1
    X = np.atleast_2d(xi)
    tt = np.broadcast_to(np.asarray(t, dtype=float), X.shape[:-1])
    z = X / shift.c1
    scale = np.maximum(1.0, np.linalg.norm(X, axis=-1))

    def f(zz):
        return shift.H(lam, tt, zz) - np.einsum("...i,...i->...", X, zz)

    it = 0
    for it in range(1, max_iter + 1):
        g = shift.grad(lam, tt, z) - X
        res = np.linalg.norm(g, axis=-1) / scale
        if res.max() <= tol:
            break
        step = np.linalg.solve(shift.hess(lam, tt, z), g[..., None])[..., 0]
        slope = np.einsum("...i,...i->...", g, step)
        f0 = f(z)
        s = np.ones(z.shape[:-1])
        for _ in range(40):
            ok = f(z - s[..., None] * step) <= f0 - 1e-4 * s * slope + 1e-15 * np.abs(f0)
            if ok.all():
                break
            s = np.where(ok, s, 0.5 * s)
        z = z - s[..., None] * step
    else:
        g = shift.grad(lam, tt, z) - X
        res = np.linalg.norm(g, axis=-1) / scale
        if res.max() > 1e3 * tol:
            raise RuntimeError(f"Newton stagnated (residual {res.max():.2e}): shift invariants violated")
    Hinv = np.linalg.inv(shift.hess(lam, tt, z))
    val = np.einsum("...i,...i->...", X, z) - shift.H(lam, tt, z)
    out = ConjugateEval(val, z, Hinv, it, float(res.max()))
    if single:
        out = ConjugateEval(val[0], z[0], Hinv[0], it, out.residual)
    return out


# ------------------------------------------------------------------ discretisation


@dataclass
class DualBasis:
    """Eigenbasis of Lambda = J d/dt + K for orthogonal symplectic M."""

    n: int
    tau: float
    K: float
    M: np.ndarray
    modes: int = 16
    nodes: Optional[int] = None
    Q: np.ndarray = field(init=False, repr=False)
    alpha: np.ndarray = field(init=False, repr=False)
    ts: np.ndarray = field(init=False, repr=False)
    Phi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n, d = self.n, 2 * self.n
        M = np.asarray(self.M, dtype=float)
        if np.abs(M.T @ M - np.eye(d)).max() > 1e-10:
            raise NotImplementedError("the dual action basis needs orthogonal symplectic M")
        Z, theta = _schur_angles(M[:n, :n] + 1j * M[n:, :n])
        self.Q = _real_form(Z)
        ks = np.arange(-self.modes, self.modes + 1)
        # coefficient layout: (k, j, s) with s = 0, 1 the two vectors of pair j
        self.alpha = np.repeat(((theta[None, :] + 2 * np.pi * ks[:, None]) / self.tau)[..., None], 2, axis=-1).ravel()
        gap = np.abs(self.K - self.alpha).min()
        if gap < 1e-9:
            raise ValueError("Lambda is not invertible for this K")
        N = self.nodes or 4 * (2 * self.modes + 1)
        self.nodes = N
        self.ts = np.arange(N) * self.tau / N
        self.Phi = self._phi_at(self.ts)

    @property
    def size(self) -> int:
        return len(self.alpha)

    @property
    def inv_eig(self) -> np.ndarray:
        return 1.0 / (self.K - self.alpha)

    def values(self, c: np.ndarray, ts=None) -> np.ndarray:
        if ts is None:
            return np.einsum("tap,p->ta", self.Phi, c)
        return np.einsum("tap,p->ta", self._phi_at(np.atleast_1d(ts)), c)

    def _phi_at(self, ts):
        ph = np.asarray(ts)[:, None] * self.alpha[None, :]
        n, d = self.n, 2 * self.n
        P = self.size
        V = np.zeros((len(ts), d, P))
        j = np.tile(np.repeat(np.arange(n), 2), P // (2 * n))
        kind = np.tile([0, 1], P // 2)
        cols = np.arange(P)
        a = kind == 0
        c, s = np.cos(ph), np.sin(ph)
        V[:, j[a], cols[a]] = c[:, a]
        V[:, n + j[a], cols[a]] = s[:, a]
        V[:, j[~a], cols[~a]] = -s[:, ~a]
        V[:, n + j[~a], cols[~a]] = c[:, ~a]
        return np.einsum("ab,tbp->tap", self.Q, V) / math.sqrt(self.tau)

    def project(self, fn: Callable) -> np.ndarray:
        """Coefficients of a function t -> R^{2n} (trapezoid rule)."""
        W = np.asarray(fn(self.ts), dtype=float)
        return np.einsum("tap,ta->p", self.Phi, W) * (self.tau / self.nodes)

    def lambda_inverse(self, c: np.ndarray) -> np.ndarray:
        return c * self.inv_eig


@dataclass
class DualState:
    lam: float
    w: np.ndarray                     # coefficients in DualBasis
    value: float = float("nan")
    grad_norm: float = float("nan")
    u_nodes: Optional[np.ndarray] = None
    u0: Optional[np.ndarray] = None
    flow_defect: float = float("nan")
    boundary_defect: float = float("nan")
    converged: bool = False
    iterations: int = 0
    note: str = ""

    @property
    def residual(self) -> float:
        return self.flow_defect + self.boundary_defect


def psi_eval_grad(shift: ConvexShift, basis: DualBasis, lam: float, w: np.ndarray):
    """(psi_K(w), coefficient gradient, conjugate evaluations at the nodes)."""
    if abs(basis.K - shift.K) > 0:
        raise ValueError("basis and shift use different K")
    W = basis.values(w)
    ce = conjugate(shift, lam, basis.ts, W)
    h = basis.tau / basis.nodes
    value = 0.5 * float(np.dot(w, basis.lambda_inverse(w))) + h * float(ce.value.sum())
    grad = basis.lambda_inverse(w) + h * np.einsum("tap,ta->p", basis.Phi, ce.z)
    return value, grad, ce


def second_form(basis: DualBasis, ce: ConjugateEval, v: np.ndarray) -> np.ndarray:
    """Gateaux second derivative of psi_K applied to a direction v."""
    h = basis.tau / basis.nodes
    V = basis.values(v)
    return basis.lambda_inverse(v) + h * np.einsum("tap,tab,tb->p", basis.Phi, ce.hessian, V)


def recover_orbit(basis: DualBasis, w: np.ndarray, ts=None) -> np.ndarray:
    """u = -Lambda^{-1} w evaluated at times ts (default: the nodes)."""
    return -basis.values(basis.lambda_inverse(w), ts)


def action(family: HamiltonianFamily, lam: float, basis: DualBasis, ucoef: np.ndarray) -> float:
    """Phi(u) = int (J u', u) / 2 + H(u) for u given by basis coefficients."""
    kinetic = -0.5 * float(np.dot(basis.alpha * ucoef, ucoef))
    U = basis.values(ucoef)
    return kinetic + basis.tau / basis.nodes * float(family.H(lam, basis.ts, U).sum())


def descend_and_recover(shift: ConvexShift, basis: DualBasis, lam: float, w_init: np.ndarray,
                        *, gtol: float = 1e-9, max_iter: int = 5000) -> DualState:
    """Drive grad psi_K to zero and recover the orbit.

    Critical points of psi_K are saddles of finite Morse index, so the descent
    runs on the merit 0.5 |grad psi_K|^2 (line-search quasi-Newton, gradient
    given by the second form applied to grad psi_K).
    """
    cache = {}

    def evaluate(c):
        key = c.tobytes()
        if key not in cache:
            cache.clear()
            cache[key] = psi_eval_grad(shift, basis, lam, c)
        return cache[key]

    def merit(c):
        _, g, ce = evaluate(c)
        return 0.5 * float(g @ g), second_form(basis, ce, g)

    c = np.asarray(w_init, dtype=float).copy()
    it_total = 0
    note = ""
    for _ in range(6):
        res = minimize(merit, c, jac=True, method="L-BFGS-B",
                       options={"maxiter": max_iter, "ftol": 0.0, "gtol": 0.0, "maxcor": 30})
        c = res.x
        it_total += res.nit
        if math.sqrt(2 * res.fun) <= gtol:
            break
        note = res.message if isinstance(res.message, str) else str(res.message)
    value, g, ce = psi_eval_grad(shift, basis, lam, c)
    gn = float(np.linalg.norm(g))
    U = recover_orbit(basis, c)
    u0 = recover_orbit(basis, c, [0.0])[0]
    uT = recover_orbit(basis, c, [basis.tau])[0]
    flow = float(np.abs(ce.z - U).max())
    bnd = float(np.abs(uT - basis.M @ u0).max())
    reach = float(np.linalg.norm(U - shift.center(lam, basis.ts), axis=-1).max())
    ok = gn <= gtol
    if reach > shift.R:
        ok = False
        note = f"orbit leaves the cutoff radius ({reach:.3g} > {shift.R:.3g}); rejected as a cutoff artifact"
    return DualState(lam, c, value, gn, U, u0, flow, bnd, ok, it_total, note)


def circle_dual_init(shift: ConvexShift, basis: DualBasis, lam: float, radius: float,
                     freq: float = 1.0, phase: float = 0.0) -> np.ndarray:
    """Dual coefficients of w = grad H_K(u) for the planar circle u = r exp(freq t J) e_1."""
    n = basis.n

    def u(ts):
        e = np.zeros(2 * n)
        e[0] = radius
        return np.stack([rotation(freq * t + phase, n) @ e for t in ts])

    return basis.project(lambda ts: shift.grad(lam, ts, u(ts)))
