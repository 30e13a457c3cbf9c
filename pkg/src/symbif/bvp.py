"""Shooting solver for u' = J grad H(lam, t, u) with u(tau) = M u(0) + r.

The flow and its linearisation come from classical RK4 on the state and the
variational equation Z' = J H''(u) Z.  Each flow is computed at N and 2N
steps; the endpoint is the Richardson combination and the error estimate
|fine - coarse| / 15.  N doubles until the estimate is below tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .family import HamiltonianFamily
from .symplectic import reversor, std_j, symplectic_defect

NORM_CAP = 1e8


class BlowUp(FloatingPointError):
    pass


@dataclass
class FlowResult:
    end: np.ndarray
    monodromy: np.ndarray
    error: float
    steps: int
    times: np.ndarray = field(repr=False, default=None)
    samples: np.ndarray = field(repr=False, default=None)

    @property
    def defect(self) -> float:
        return symplectic_defect(self.monodromy)


def _rk4(family: HamiltonianFamily, lam: float, z0: np.ndarray, t0: float, s: float, N: int,
         keep: bool = False):
    """Batched RK4 on (z, Z): z0 has shape (..., 2n)."""
    n = family.n
    d = 2 * n
    Jt = std_j(n).T
    J = std_j(n)
    h = s / N

    def rhs(t, z, Z):
        return family.grad(lam, t, z) @ Jt, J @ family.hess(lam, t, z) @ Z

    z = np.array(z0, dtype=float)
    Z = np.broadcast_to(np.eye(d), z.shape[:-1] + (d, d)).copy()
    traj = [z.copy()] if keep else None
    t = t0
    for _ in range(N):
        k1 = rhs(t, z, Z)
        k2 = rhs(t + h / 2, z + h / 2 * k1[0], Z + h / 2 * k1[1])
        k3 = rhs(t + h / 2, z + h / 2 * k2[0], Z + h / 2 * k2[1])
        k4 = rhs(t + h, z + h * k3[0], Z + h * k3[1])
        z = z + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        Z = Z + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        t += h
        if not np.isfinite(z).all() or np.abs(z).max() > NORM_CAP:
            raise BlowUp(f"trajectory exceeded norm cap near t = {t:.4g}")
        if keep:
            traj.append(z.copy())
    return z, Z, (np.array(traj) if keep else None)


def flow(family: HamiltonianFamily, lam: float, z0, s: Optional[float] = None, *, t0: float = 0.0,
         steps: int = 512, tol: float = 1e-9, max_steps: int = 1 << 15, keep: bool = False) -> FlowResult:
    """phi_s(z0) and D phi_s(z0) with step halving error control.

    ``z0`` may carry leading batch axes; the step count is shared and the
    error is the worst over the batch.  The error estimate bounds the plain
    fine solution; the returned extrapolated endpoint is more accurate.
    """
    s = family.tau if s is None else s
    z0 = np.asarray(z0, dtype=float)
    N = max(1, int(steps))
    while True:
        zc, Zc, _ = _rk4(family, lam, z0, t0, s, N)
        zf, Zf, tr = _rk4(family, lam, z0, t0, s, 2 * N, keep)
        err = max(np.abs(zf - zc).max(), np.abs(Zf - Zc).max() / max(1.0, np.abs(Zf).max())) / 15
        if err <= tol or 2 * N >= max_steps:
            end = zf + (zf - zc) / 15
            mono = Zf + (Zf - Zc) / 15
            times = np.linspace(t0, t0 + s, 2 * N + 1) if keep else None
            return FlowResult(end, mono, float(err), 2 * N, times, tr)
        N *= 2


# ------------------------------------------------------------------ BranchPoint


@dataclass
class BranchPoint:
    lam: float
    z0: np.ndarray
    times: np.ndarray = field(repr=False)
    samples: np.ndarray = field(repr=False)
    boundary_residual: float
    flow_residual: float
    distance: float
    phase_distance: float
    side: int = 0
    degenerate: bool = False
    converged: bool = True
    iterations: int = 0
    energy_drift: float = 0.0
    note: str = ""

    @property
    def amplitude(self) -> float:
        return float(np.linalg.norm(self.z0))

    def as_dict(self) -> dict:
        return {"lam": self.lam, "z0": self.z0.tolist(), "amplitude": self.amplitude,
                "boundary_residual": self.boundary_residual, "flow_residual": self.flow_residual,
                "distance": self.distance, "phase_distance": self.phase_distance, "side": self.side,
                "degenerate": self.degenerate, "converged": self.converged,
                "energy_drift": self.energy_drift, "note": self.note}


def _shift_periodic(samples: np.ndarray, theta_frac: float) -> np.ndarray:
    """Trigonometric interpolation of periodic samples shifted by theta_frac * period."""
    U = samples[:-1]
    m = len(U)
    F = np.fft.fft(U, axis=0)
    k = np.fft.fftfreq(m, d=1.0 / m)
    out = np.fft.ifft(F * np.exp(2j * np.pi * k * theta_frac)[:, None], axis=0).real
    return np.vstack([out, out[:1]])


def phase_distance(a: np.ndarray, b: np.ndarray, resolution: float = 1e-4) -> float:
    """min over shifts theta of |a(. + theta) - b|_C0 for periodic samples on a common grid."""
    m = len(a) - 1
    grid = np.arange(m) / m
    errs = [np.abs(_shift_periodic(a, th) - b).max() for th in grid] if m <= 512 else \
        [np.abs(np.roll(a[:-1], -i, axis=0) - b[:-1]).max() for i in range(m)]
    i = int(np.argmin(errs))
    lo, hi = grid[i] - 1.0 / m, grid[i] + 1.0 / m
    f = lambda th: np.abs(_shift_periodic(a, th) - b).max()
    g = (math.sqrt(5) - 1) / 2
    while hi - lo > resolution:
        x1, x2 = hi - g * (hi - lo), lo + g * (hi - lo)
        if f(x1) < f(x2):
            hi = x2
        else:
            lo = x1
    return float(min(f(0.5 * (lo + hi)), errs[i]))


def _finish(family, lam, z, M, r, iters, degenerate, converged, side, note, steps) -> BranchPoint:
    fr = flow(family, lam, z, steps=steps, keep=True)
    half = flow(family, lam, z, steps=2 * fr.steps, tol=np.inf)
    bres = float(np.abs(fr.end - M @ z - r).max())
    fres = float(np.abs(half.end - fr.end).max())
    u0 = family.u(lam, fr.times)
    dist = float(np.abs(fr.samples - u0).max())
    pdist = dist
    if family.flags.get("autonomous") and np.allclose(M, np.eye(len(z))) and len(fr.samples) > 2:
        pdist = phase_distance(fr.samples, u0)
    drift = 0.0
    if family.flags.get("autonomous"):
        E = family.H(lam, fr.times, fr.samples)
        drift = float(np.abs(E - E[0]).max())
    return BranchPoint(lam, np.asarray(z, dtype=float), fr.times, fr.samples, bres, fres, dist, pdist,
                       side, degenerate, converged, iters, drift, note)


def _newton_batch(family, lam, Z0, M, r, tol, max_iter, steps, sing_tol, leash=None):
    """Shared-step Newton iterations for a batch of initial guesses.

    With ``leash = (center, radius)`` iterates that move further than radius
    from center are abandoned.
    """
    z = np.array(Z0, dtype=float)
    B = len(z)
    done = np.zeros(B, bool)
    alive = np.ones(B, bool)
    degenerate = np.zeros(B, bool)
    iters = np.zeros(B, int)
    notes = [""] * B
    N = steps
    for _ in range(max_iter):
        act = alive & ~done
        if not act.any():
            break
        idx = np.flatnonzero(act)
        try:
            fr = flow(family, lam, z[idx], steps=N)
        except BlowUp:
            # isolate the offenders one at a time
            for i in idx:
                try:
                    flow(family, lam, z[i], steps=N, tol=np.inf)
                except BlowUp as exc:
                    alive[i] = False
                    notes[i] = str(exc)
            continue
        N = fr.steps // 2
        F = fr.end - z[idx] @ M.T - r
        A = fr.monodromy - M
        for j, i in enumerate(idx):
            iters[i] += 1
            sv = np.linalg.svd(A[j], compute_uv=False)
            degenerate[i] = sv[-1] < sing_tol * max(1.0, sv[0])
            if np.abs(F[j]).max() <= tol:
                done[i] = True
                continue
            if degenerate[i]:
                step = np.linalg.lstsq(A[j], F[j], rcond=sing_tol)[0]
            else:
                step = np.linalg.solve(A[j], F[j])
            z[i] = z[i] - step
            if not np.isfinite(z[i]).all() or np.abs(z[i]).max() > NORM_CAP:
                alive[i] = False
                notes[i] = "Newton diverged"
            elif leash is not None and np.linalg.norm(z[i] - leash[0]) > leash[1]:
                alive[i] = False
                notes[i] = "left the search region"
    for i in range(B):
        if alive[i] and not done[i]:
            notes[i] = "iteration cap reached"
        elif done[i] and degenerate[i]:
            notes[i] = "singular Jacobian at the solution (pseudo-inverse steps)"
    return z, done, degenerate, iters, notes, N


def _failed(lam, z, d, side, degenerate, it, note):
    return BranchPoint(lam, z, np.zeros(0), np.zeros((0, d)), np.inf, np.inf, np.inf, np.inf,
                       side, bool(degenerate), False, int(it), 0.0, note or "not converged")


def newton_bvp(family: HamiltonianFamily, lam: float, z_init, r=None, *, M=None, tol: float = 1e-10,
               max_iter: int = 40, steps: int = 512, side: int = 0, sing_tol: float = 1e-8) -> BranchPoint:
    """Newton on F(z) = phi_tau(z) - M z - r with Jacobian D phi_tau - M.

    Near singular Jacobians use the minimum norm (pseudo-inverse) step; the
    returned point is flagged degenerate when the Jacobian at the solution is
    singular.
    """
    M = family.M if M is None else np.asarray(M, dtype=float)
    d = 2 * family.n
    r = np.zeros(d) if r is None else np.asarray(r, dtype=float)
    z, done, deg, its, notes, N = _newton_batch(family, lam, np.atleast_2d(z_init), M, r, tol,
                                                max_iter, steps, sing_tol)
    if not done[0]:
        return _failed(lam, z[0], d, side, deg[0], its[0], notes[0])
    return _finish(family, lam, z[0], M, r, int(its[0]), bool(deg[0]), True, side, notes[0], N)


def branch_switch(family: HamiltonianFamily, mu: float, kernel: np.ndarray,
                  dlams: Sequence[float] = (1e-1, 1e-2, 1e-3), amplitudes: Optional[Sequence[float]] = None,
                  *, radius: float = 0.05, scale: Optional[float] = None, sides=(-1, 1), steps: int = 512,
                  residual_bound: float = 1e-9) -> list[BranchPoint]:
    """Nontrivial solutions near (mu, u_mu) from predictors u_mu(0) + a k.

    Solutions are kept when they lie within ``radius`` of the trivial branch
    and further than 10 * residual_bound from it; duplicates are removed by
    (phase aligned) C0 distance.  The default amplitude ladder
    {1e-3, ..., 1e-1} * scale uses scale = 10 * radius, so it ends on the
    search radius.
    """
    kernel = np.atleast_2d(np.asarray(kernel, dtype=float))
    if kernel.shape[0] != 2 * family.n:
        kernel = kernel.T
    if amplitudes is None:
        scale = 10 * radius if scale is None else scale
        amplitudes = list(np.geomspace(1e-3, 1e-1, 5) * scale)
    found: list[BranchPoint] = []
    M = family.M
    d = 2 * family.n
    for side in sides:
        for dl in dlams:
            lam = mu + side * dl
            base = family.u(lam, 0.0)
            preds = [base + sgn * a * kernel[:, j] / np.linalg.norm(kernel[:, j])
                     for j in range(kernel.shape[1]) for a in amplitudes for sgn in (1, -1)]
            z, done, deg, its, notes, N = _newton_batch(family, lam, np.array(preds), M, np.zeros(d),
                                                        1e-10, 40, steps, 1e-8, (base, 4 * radius))
            here: list[BranchPoint] = []
            seen: list[np.ndarray] = []
            for i in np.flatnonzero(done):
                if np.linalg.norm(z[i] - base) > radius + 1e-12:
                    continue
                if np.abs(z[i] - base).max() <= 10 * residual_bound:
                    continue
                # predictors often land on different points of one orbit
                if any(_near_polyline(z[i], q.samples) < 1e-5 for q in here):
                    continue
                if any(np.abs(z[i] - q).max() < 1e-7 for q in seen):
                    continue
                seen.append(z[i].copy())
                bp = _finish(family, lam, z[i], M, np.zeros(d), int(its[i]), bool(deg[i]), True, side,
                             notes[i], N)
                if bp.boundary_residual > residual_bound:
                    continue
                if bp.distance <= 10 * residual_bound or bp.distance > radius:
                    continue
                if any(_same(bp, q, residual_bound) for q in here):
                    continue
                here.append(bp)
            found.extend(here)
    return found


def _near_polyline(z: np.ndarray, samples: np.ndarray) -> float:
    """Distance from z to the piecewise linear curve through ``samples``."""
    if len(samples) < 2:
        return float(np.linalg.norm(samples - z, axis=-1).min()) if len(samples) else np.inf
    a, b = samples[:-1], samples[1:]
    ab = b - a
    den = np.maximum((ab * ab).sum(-1), 1e-300)
    s = np.clip(((z - a) * ab).sum(-1) / den, 0.0, 1.0)
    return float(np.linalg.norm(a + s[:, None] * ab - z, axis=-1).min())


def _same(a: BranchPoint, b: BranchPoint, bound: float) -> bool:
    thr = 10 * max(bound, a.boundary_residual, b.boundary_residual, 1e-7)
    if len(a.samples) != len(b.samples):
        return abs(a.amplitude - b.amplitude) < thr
    if a.phase_distance != a.distance:
        return phase_distance(a.samples, b.samples) < thr
    return float(np.abs(a.samples - b.samples).max()) < thr


def brake_shoot(family: HamiltonianFamily, lam: float, y_inits: Sequence, *, tol: float = 1e-10,
                max_iter: int = 40, steps: int = 512) -> list[BranchPoint]:
    """Brake orbits: u(0) = (0, y) and x(tau/2) = 0, extended by u(-t) = N u(t)."""
    if not family.flags.get("reversible"):
        raise ValueError("brake shooting needs a reversible family")
    n = family.n
    half = 0.5 * family.tau
    out = []
    for y0 in y_inits:
        y = np.array(y0, dtype=float).reshape(n)
        N = steps
        conv, degenerate, it, note = False, False, 0, ""
        for it in range(1, max_iter + 1):
            z = np.concatenate([np.zeros(n), y])
            fr = flow(family, lam, z, half, steps=N)
            N = fr.steps // 2
            F = fr.end[:n]
            A = fr.monodromy[:n, n:]
            sv = np.linalg.svd(A, compute_uv=False)
            degenerate = bool(sv[-1] < 1e-8 * max(1.0, sv[0]))
            if np.abs(F).max() <= tol:
                conv = True
                break
            step = np.linalg.lstsq(A, F, rcond=1e-8)[0] if degenerate else np.linalg.solve(A, F)
            y = y - step
        z = np.concatenate([np.zeros(n), y])
        if not conv:
            out.append(BranchPoint(lam, z, np.zeros(0), np.zeros((0, 2 * n)), np.inf, np.inf, np.inf,
                                   np.inf, 0, degenerate, False, it, 0.0, "not converged"))
            continue
        fr = flow(family, lam, z, half, steps=N, keep=True)
        Nr = reversor(n)
        back = fr.samples[:0:-1] @ Nr.T
        times = np.concatenate([-fr.times[:0:-1], fr.times])
        samples = np.vstack([back, fr.samples])
        full = flow(family, lam, z, family.tau, steps=2 * N)
        ext = float(np.abs(full.end - z).max())
        if degenerate:
            note = "degenerate: the half-period Jacobian is singular"
        if ext > 1e-8:
            note = (note + "; " if note else "") + f"extension residual {ext:.2e}"
        u0 = family.u(lam, times)
        bp = BranchPoint(lam, z, times, samples, ext, fr.error, float(np.abs(samples - u0).max()),
                         float(np.abs(samples - u0).max()), 0, degenerate, ext <= 1e-8, it, 0.0, note)
        out.append(bp)
    return out


def extend_to_line(times: np.ndarray, samples: np.ndarray, M: np.ndarray, copies: int = 1,
                   tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """u_M(t) = M^k u(t - k tau) on [-copies tau, copies tau] from samples on [0, tau]."""
    times = np.asarray(times, dtype=float)
    U = np.asarray(samples, dtype=float)
    M = np.asarray(M, dtype=float)
    tau = times[-1] - times[0]
    res = float(np.abs(U[-1] - M @ U[0]).max())
    if res > tol:
        raise ValueError(f"boundary residual {res:.2e} exceeds {tol:.1e}")
    ts, us = [], []
    for k in range(-copies, copies):
        Mk = np.linalg.matrix_power(M, k) if k >= 0 else np.linalg.matrix_power(np.linalg.inv(M), -k)
        sl = slice(0, None) if k == copies - 1 else slice(0, -1)
        ts.append(times[sl] + k * tau)
        us.append(U[sl] @ Mk.T)
    return np.concatenate(ts), np.vstack(us)
