"""Maslov-type indices of symplectic paths.

The integer counts come from the eigenphases of the unitary pair map of two
Lagrangian subspaces.  For Lagrangians L, Lam with unitary frames U_L, U_Lam
the Souriau matrix S = U U^T is symmetric unitary and dim(L & Lam) equals the
multiplicity of the eigenvalue 1 of  conj(S_L) S_Lam.  Following a continuous
path of such unitaries, every eigenvalue passing through 1 counterclockwise is
a positive crossing; half contributions at the end points give the
Robbin-Salamon count, which is then shifted to the Cappell-Lee-Miller
convention.  For the graph of a path gamma in (R^2n + R^2n, -w + w) the
relevant pair is (diagonal, Gr(gamma)) and the crossing form at a crossing is
<x, B(t) x> on Ker(gamma(t) - I).

Crossing records are located afterwards (bounded Brent search on the
smallest eigenphase) and serve as evidence; the index itself never depends
on where exactly a crossing sits inside a sampling interval.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .symplectic import (
    CoefficientPath,
    SymplecticPath,
    connect_to,
    fundamental_solution,
    reversor,
    std_j,
    symplectic_inverse,
    unitary_part,
)

log = logging.getLogger(__name__)

PHASE_TOL = 1e-7
MAX_REFINE_DEPTH = 14
# fixed once on exp(tJ), t in [0, 2pi] -> (i, nu) = (1, 2); see test_index.py
ORIENTATION = 1.0


class UnresolvedCrossing(RuntimeError):
    pass


# ---------------------------------------------------------------- nullity


@dataclass(frozen=True)
class Nullity:
    dim: int
    basis: np.ndarray
    margin: float
    kernel_level: float


def nullity_rel(gamma_end: np.ndarray, M: Optional[np.ndarray] = None, tol: float = 1e-8) -> Nullity:
    """dim Ker(gamma_end - M), counting singular values below tol * scale.

    The scale is max(|gamma_end|_2, |M|_2, 1) so that an exact match
    gamma_end = M is recognised as full kernel.  ``margin`` is the smallest
    retained singular value over the scale and ``kernel_level`` the largest
    discarded one; a clean answer has margin >> tol >> kernel_level.
    """
    G = np.asarray(gamma_end, dtype=float)
    M = np.eye(G.shape[0]) if M is None else np.asarray(M, dtype=float)
    if G.shape != M.shape:
        raise ValueError(f"shape mismatch {G.shape} vs {M.shape}")
    scale = max(np.linalg.norm(G, 2), np.linalg.norm(M, 2), 1.0)
    _, s, Vt = np.linalg.svd(G - M)
    rel = s / scale
    small = rel < tol
    dim = int(small.sum())
    margin = float(rel[~small].min()) if (~small).any() else math.inf
    level = float(rel[small].max()) if small.any() else 0.0
    return Nullity(dim, Vt[small].T.copy(), margin, level)


# ---------------------------------------------------------------- lagrangian frames


def _souriau(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """S = (X + iY)(X - iY)^{-1} for a stack of Lagrangian frames."""
    A = X + 1j * Y
    B = X - 1j * Y
    # S = A B^{-1}  <=>  B^T S^T = A^T, and S is symmetric
    return np.swapaxes(np.linalg.solve(np.swapaxes(B, -1, -2), np.swapaxes(A, -1, -2)), -1, -2)


def graph_frames(P: np.ndarray):
    """Frames of Gr(P) = {(x, Px)} mapped to standard R^{4n} by (x, y) -> (Nx, y)."""
    P = np.asarray(P)
    n = P.shape[-1] // 2
    N = reversor(n)
    Nq = np.broadcast_to(N[:n], P.shape[:-2] + (n, 2 * n))
    Np = np.broadcast_to(N[n:], P.shape[:-2] + (n, 2 * n))
    X = np.concatenate([Nq, P[..., :n, :]], axis=-2)
    Y = np.concatenate([Np, P[..., n:, :]], axis=-2)
    return X, Y


def vertical_frames(P: np.ndarray):
    """Frames of P U_1 with U_1 = {0} x R^n."""
    n = P.shape[-1] // 2
    return P[..., :n, n:], P[..., n:, n:]


def horizontal_frames(P: np.ndarray):
    """Frames of P U_2 with U_2 = R^n x {0}."""
    n = P.shape[-1] // 2
    return P[..., :n, :n], P[..., n:, :n]


def _pair_unitary(frames, fixed_S: np.ndarray, P: np.ndarray) -> np.ndarray:
    X, Y = frames(P)
    return fixed_S.conj() @ _souriau(X, Y)


def _g(phases: np.ndarray) -> np.ndarray:
    """phi/2pi - 1/2 with phi taken in (0, 2pi); zero for phases flagged as 0."""
    ph = np.mod(phases, 2 * np.pi)
    return ph / (2 * np.pi) - 0.5


def _G(phases: np.ndarray, zero_count: Optional[int] = None, tol: float = PHASE_TOL) -> float:
    ph = np.angle(phases) if np.iscomplexobj(phases) else phases
    order = np.argsort(np.abs(ph))
    zero = np.zeros(ph.shape, dtype=bool)
    if zero_count is None:
        zero = np.abs(ph) < tol
    else:
        zero[order[:zero_count]] = True
    return float(_g(ph[~zero]).sum())


# ---------------------------------------------------------------- crossing machinery


@dataclass(frozen=True)
class CrossingRecord:
    t: float
    kernel_dim: int
    signature: int
    margin: float
    contribution: float
    segment: int = 0
    form_signature: Optional[int] = None
    degenerate: bool = False


@dataclass
class _Trace:
    times: list
    mats: list
    W: list


def _refine_segment(path: SymplecticPath, frames, fixed_S, depth_limit: int = MAX_REFINE_DEPTH) -> _Trace:
    d = fixed_S.shape[0]
    step_bound = 1.0 / (2.0 * math.sqrt(d))
    times = list(path.times)
    mats = list(path.matrices)
    W = list(_pair_unitary(frames, fixed_S, path.matrices))
    out_t, out_m, out_w = [times[0]], [mats[0]], [W[0]]

    def fine(ta, Za, Wa, tb, Zb, Wb, depth):
        if np.linalg.norm(Wb - Wa) < step_bound:
            out_t.append(tb); out_m.append(Zb); out_w.append(Wb)
            return
        if path.sampler is None or depth >= depth_limit:
            raise UnresolvedCrossing(
                f"phase refinement budget exhausted on [{ta:.6g}, {tb:.6g}] "
                f"(step {np.linalg.norm(Wb - Wa):.3g})")
        sub = path.sampler(ta, tb, 4, Za)
        sub[-1] = Zb
        ts = np.linspace(ta, tb, 5)
        Ws = _pair_unitary(frames, fixed_S, sub)
        Ws[-1] = Wb
        for j in range(4):
            fine(ts[j], sub[j], Ws[j], ts[j + 1], sub[j + 1], Ws[j + 1], depth + 1)

    for k in range(len(times) - 1):
        fine(times[k], mats[k], W[k], times[k + 1], mats[k + 1], W[k + 1], 0)
    return _Trace(out_t, out_m, out_w)


def _crossing_count(segments: Sequence[SymplecticPath], frames, fixed_S: np.ndarray,
                    start_dim: int, end_dim: int, kernel_of, form_of=None,
                    locate: bool = True):
    """Robbin-Salamon count along a chain of path segments.

    ``kernel_of(P)`` returns a Nullity of the pair at matrix P; ``form_of``
    (segment, t, P, basis) -> symmetric matrix of the crossing form, or None.
    """
    traces = [_refine_segment(s, frames, fixed_S) for s in segments]
    total_dL = 0.0
    contribs = []
    for si, tr in enumerate(traces):
        W = np.array(tr.W)
        dets = np.linalg.det(W)
        dL = np.angle(dets[1:] / dets[:-1])
        eig = np.linalg.eigvals(W)
        ph = np.angle(eig)
        Gs = np.array([_G(p) for p in ph])
        c = ORIENTATION * (dL / (2 * np.pi) - np.diff(Gs))
        contribs.append((si, tr, c, ph))
        total_dL += dL.sum()
    first_ph = contribs[0][3][0]
    last_ph = contribs[-1][3][-1]
    rs = ORIENTATION * (total_dL / (2 * np.pi) - (_G(last_ph, end_dim) - _G(first_ph, start_dim)))
    records: list[CrossingRecord] = []
    if locate:
        records = _locate(segments, contribs, frames, fixed_S, start_dim, end_dim, kernel_of, form_of)
    return rs, records


def _min_phase(path, frames, fixed_S, ta, Za, t):
    if t <= ta:
        P = Za
    else:
        P = path.sampler(ta, t, 1, Za)[-1]
    W = _pair_unitary(frames, fixed_S, P[None])[0]
    return float(np.abs(np.angle(np.linalg.eigvals(W))).min()), P


def _form_signature(Q: Optional[np.ndarray]):
    if Q is None:
        return None, False
    w = np.linalg.eigvalsh(0.5 * (Q + Q.T))
    scale = max(np.abs(w).max(), 1e-300)
    degenerate = bool((np.abs(w) < 1e-8 * max(scale, 1.0)).any())
    return int((w > 0).sum() - (w < 0).sum()), degenerate


def _locate(segments, contribs, frames, fixed_S, start_dim, end_dim, kernel_of, form_of):
    records = []
    nseg = len(segments)
    for si, tr, c, ph in contribs:
        path = segments[si]
        near = (np.abs(ph) < 1e-4).any(axis=1)
        active = (np.abs(c) > 0.25)
        k = 0
        nint = len(c)
        while k < nint:
            if not (active[k] or (near[k + 1] and 0 < k + 1 < nint)):
                k += 1
                continue
            j = k
            while j + 1 < nint and (active[j + 1] or near[j + 1]):
                j += 1
            lo, hi = k, j + 1
            total = float(c[lo:hi].sum())
            is_start = si == 0 and lo == 0 and near[0]
            is_end = si == nseg - 1 and hi == nint and near[-1]
            if abs(total) > 0.25 or is_start or is_end:
                records.append(_record(path, tr, lo, hi, total, si, frames, fixed_S, kernel_of, form_of,
                                       pin=("start" if is_start else "end" if is_end else None)))
            k = j + 1
        # endpoint crossings that sit on an inactive first/last interval
    if start_dim and not (records and records[0].t == segments[0].times[0] and records[0].segment == 0):
        P = segments[0].matrices[0]
        nl = kernel_of(P)
        fs, dg = _form_signature(form_of(0, segments[0].times[0], P, nl.basis) if form_of else None)
        records.insert(0, CrossingRecord(float(segments[0].times[0]), nl.dim, fs if fs is not None else 0,
                                         nl.margin, 0.0, 0, fs, dg))
    if end_dim and not (records and records[-1].t == segments[-1].times[-1] and records[-1].segment == nseg - 1):
        P = segments[-1].matrices[-1]
        nl = kernel_of(P)
        fs, dg = _form_signature(form_of(nseg - 1, segments[-1].times[-1], P, nl.basis) if form_of else None)
        records.append(CrossingRecord(float(segments[-1].times[-1]), nl.dim, fs if fs is not None else 0,
                                      nl.margin, 0.0, nseg - 1, fs, dg))
    return records


def _record(path, tr, lo, hi, total, si, frames, fixed_S, kernel_of, form_of, pin=None):
    ts = tr.times
    if pin == "start":
        t_star, P = ts[0], tr.mats[0]
    elif pin == "end":
        t_star, P = ts[-1], tr.mats[-1]
    elif path.sampler is None:
        best = min(range(lo, hi + 1), key=lambda q: np.abs(np.angle(np.linalg.eigvals(tr.W[q]))).min())
        t_star, P = ts[best], tr.mats[best]
    else:
        ta, Za = ts[lo], tr.mats[lo]
        res = minimize_scalar(lambda t: _min_phase(path, frames, fixed_S, ta, Za, t)[0],
                              bounds=(ts[lo], ts[hi]), method="bounded",
                              options={"xatol": 1e-12 * max(1.0, abs(ts[hi]))})
        t_star = float(res.x)
        P = _min_phase(path, frames, fixed_S, ta, Za, t_star)[1]
    nl = kernel_of(P, loose=True)
    fs, dg = _form_signature(form_of(si, t_star, P, nl.basis) if (form_of and nl.dim) else None)
    net = int(round(total)) if abs(total - round(total)) < 1e-6 else None
    sig = fs if fs is not None else (net if net is not None else int(round(total)))
    return CrossingRecord(float(t_star), nl.dim, sig, nl.margin, total, si, fs, dg)


# ---------------------------------------------------------------- rotation lift


@dataclass(frozen=True)
class RotationLift:
    times: np.ndarray
    delta: np.ndarray
    total: float
    max_step: float


def _det_u(mats: np.ndarray) -> np.ndarray:
    return np.linalg.det(unitary_part(mats))


def rotation_lift(gamma: SymplecticPath, max_step: float = np.pi / 4,
                  depth_limit: int = MAX_REFINE_DEPTH) -> RotationLift:
    """Continuous argument of det u(gamma(t)) along the path."""
    ts = [float(gamma.times[0])]
    vals = [_det_u(gamma.matrices[:1])[0]]
    du = _det_u(gamma.matrices)

    def walk(ta, Za, da, tb, Zb, db, depth):
        step = abs(np.angle(db / da))
        if step < max_step:
            ts.append(tb); vals.append(db)
            return
        if gamma.sampler is None or depth >= depth_limit:
            raise UnresolvedCrossing(f"rotation lift refinement exhausted on [{ta:.6g}, {tb:.6g}], step {step:.3g}")
        sub = gamma.sampler(ta, tb, 4, Za)
        sub[-1] = Zb
        dd = _det_u(sub)
        dd[-1] = db
        sts = np.linspace(ta, tb, 5)
        for j in range(4):
            walk(sts[j], sub[j], dd[j], sts[j + 1], sub[j + 1], dd[j + 1], depth + 1)

    for k in range(len(gamma.times) - 1):
        walk(gamma.times[k], gamma.matrices[k], du[k], gamma.times[k + 1], gamma.matrices[k + 1], du[k + 1], 0)
    vals = np.array(vals)
    steps = np.angle(vals[1:] / vals[:-1])
    delta = np.concatenate([[np.angle(vals[0])], np.angle(vals[0]) + np.cumsum(steps)])
    return RotationLift(np.array(ts), delta, float(delta[-1] - delta[0]),
                        float(np.abs(steps).max()) if len(steps) else 0.0)


# ---------------------------------------------------------------- indices


@dataclass
class IndexReport:
    i: int
    nu: int
    crossings: list = field(default_factory=list)
    cz: Optional[float] = None
    rs: float = 0.0
    delta_xi: float = 0.0
    raw: float = 0.0
    margin: float = math.inf
    warnings: list = field(default_factory=list)
    unresolved: bool = False

    def as_dict(self) -> dict:
        return {
            "i": self.i, "nu": self.nu, "cz": self.cz, "rs": self.rs, "raw": self.raw,
            "delta_xi": self.delta_xi, "margin": self.margin, "unresolved": self.unresolved,
            "warnings": list(self.warnings),
            "crossings": [
                {"t": c.t, "kernel_dim": c.kernel_dim, "signature": c.signature, "margin": c.margin,
                 "contribution": c.contribution, "segment": c.segment} for c in self.crossings],
        }


def _graph_kernel(tol):
    def kernel_of(P, loose=False):
        return nullity_rel(P, None, 1e-5 if loose else tol)
    return kernel_of


def _graph_form(segments):
    def form_of(si, t, P, basis):
        coef = segments[si].coefficient
        if coef is None or basis.size == 0:
            return None
        x = P @ basis
        # crossing form of Gr(P) against the diagonal: <Px, B Px> on Ker(P - I)
        return x.T @ coef(t) @ x
    return form_of


def _snap(x: float, eps: float = 1e-6) -> tuple[float, float]:
    r = round(x)
    return (float(r), x - r) if abs(x - r) < eps else (x, x - r)


def _index_chain(segments, tol_kernel, locate=True):
    n = segments[0].n
    d = 2 * n
    Wx, Wy = graph_frames(np.eye(d)[None])
    fixed_S = _souriau(Wx, Wy)[0]
    start = nullity_rel(segments[0].matrices[0], None, tol_kernel).dim
    end = nullity_rel(segments[-1].matrices[-1], None, tol_kernel).dim
    rs, records = _crossing_count(segments, graph_frames, fixed_S, start, end,
                                  _graph_kernel(tol_kernel), _graph_form(segments), locate)
    clm = rs + 0.5 * (start - end)
    return clm, rs, end, records


def maslov_index(gamma: SymplecticPath, M: Optional[np.ndarray] = None, *, tol_kernel: float = 1e-8,
                 xi_samples: int = 64, locate: bool = True, xi: Optional[SymplecticPath] = None) -> IndexReport:
    """(i_{tau,M}(gamma), nu_{tau,M}(gamma)) for a path with gamma(0) = I.

    For M = I this is the CLM count of (diagonal, Gr(gamma)) minus n.  For
    general M the path xi from I to M^{-1} (default: polar geodesic) is
    followed by t -> gamma(t) M^{-1}; the index is the integer part of
    i_tau of that catenation minus Delta_xi / pi.
    """
    n = gamma.n
    d = 2 * n
    I = np.eye(d)
    if np.abs(gamma.matrices[0] - I).max() > 1e-12:
        raise ValueError("path must start at the identity")
    warnings = []
    identity_target = M is None or np.array_equal(np.asarray(M, dtype=float), I)
    if identity_target:
        clm, rs, nu, records = _index_chain([gamma], tol_kernel, locate)
        val, frac = _snap(clm - n)
        if abs(frac) > 1e-6:
            warnings.append(f"non-integral count {clm - n:.9f}")
        nl = nullity_rel(gamma.end, None, tol_kernel)
        i = int(round(val))
        return IndexReport(i, nl.dim, records, cz=i + nl.dim / 2, rs=rs, raw=clm - n,
                           margin=nl.margin, warnings=warnings, unresolved=bool(warnings))
    M = np.asarray(M, dtype=float)
    Minv = symplectic_inverse(M)
    xi = connect_to(Minv, xi_samples) if xi is None else xi
    if np.abs(xi.matrices[-1] - Minv).max() > 1e-9 * max(1.0, np.abs(Minv).max()):
        raise ValueError("xi must end at M^{-1}")
    tail = gamma.right_multiply(Minv)
    clm, rs, _, records = _index_chain([xi, tail], tol_kernel, locate)
    i_cat, frac = _snap(clm - n)
    if abs(frac) > 1e-6:
        warnings.append(f"non-integral catenation count {clm - n:.9f}")
    dxi = rotation_lift(xi).total
    raw = i_cat - dxi / np.pi
    snapped, f2 = _snap(raw, 1e-9)
    if snapped != raw:
        value = int(snapped)
    else:
        value = math.floor(raw)
        log.debug("bracket truncates %.9f -> %d", raw, value)
    nl = nullity_rel(gamma.end, M, tol_kernel)
    return IndexReport(value, nl.dim, records, rs=rs, delta_xi=dxi, raw=raw, margin=nl.margin,
                       warnings=warnings, unresolved=bool(warnings))


def conley_zehnder(gamma: SymplecticPath, **kw) -> float:
    """mu_CZ = i_tau + dim Ker(gamma(tau) - I) / 2."""
    rep = maslov_index(gamma, None, **kw)
    return rep.i + rep.nu / 2


def interval_index(gamma: SymplecticPath, basepath: SymplecticPath, *, tol_kernel: float = 1e-8) -> int:
    """i(gamma, [a, b]) = i(gamma * beta) - i(beta) for any beta from I to gamma(a)."""
    if np.abs(basepath.end - gamma.matrices[0]).max() > 1e-8 * max(1.0, np.abs(gamma.matrices[0]).max()):
        raise ValueError("basepath must end at gamma(a)")
    n = gamma.n
    cat, _, _, _ = _index_chain([basepath, gamma], tol_kernel, locate=False)
    base, _, _, _ = _index_chain([basepath], tol_kernel, locate=False)
    return int(round(cat - n)) - int(round(base - n))


def exp_path(A: np.ndarray, tau: float, steps: int = 4096, **kw) -> SymplecticPath:
    """Fundamental solution of the constant coefficient system Z' = J A Z."""
    return fundamental_solution(CoefficientPath.constant(A, tau), steps, **kw)


# ---------------------------------------------------------------- staircase


@dataclass
class StaircaseProfile:
    crossings: list            # (lambda_k, i(lambda_k), nu(lambda_k))
    pieces: list               # (lo, hi, value, lo_closed, hi_closed)
    sign: int

    def value(self, lam: float) -> int:
        for lo, hi, v, lc, hc in self.pieces:
            if (lo < lam or (lc and lam == lo)) and (lam < hi or (hc and lam == hi)):
                return v
        raise ValueError(f"lambda={lam} outside the profile")


def _gamma_end_fn(A, M):
    n = A.shape[0] // 2
    JA = std_j(n) @ A
    from scipy.linalg import expm

    def sv(t):
        return np.linalg.svd(expm(t * JA) - M, compute_uv=False)[-1]
    return sv


def crossing_set(A: np.ndarray, M: np.ndarray, lo: float, hi: float, scan: int = 4000,
                 tol: float = 1e-8) -> list[float]:
    """Times t in [lo, hi], t != 0, with dim Ker(exp(tJA) - M) > 0."""
    sv = _gamma_end_fn(A, M)
    ts = np.linspace(lo, hi, scan + 1)
    vals = np.array([sv(t) for t in ts])
    found = []
    for k in range(1, scan):
        if vals[k] <= vals[k - 1] and vals[k] <= vals[k + 1]:
            res = minimize_scalar(sv, bounds=(ts[k - 1], ts[k + 1]), method="bounded",
                                  options={"xatol": 1e-13 * max(1.0, abs(ts[k]))})
            if res.fun < 1e-6 and abs(res.x) > 1e-12:
                found.append(float(res.x))
    for edge in (0, scan):
        if vals[edge] < 1e-6 and abs(ts[edge]) > 1e-12:
            found.append(float(ts[edge]))
    found = sorted(found)
    out = []
    for t in found:
        if not out or abs(t - out[-1]) > 1e-6:
            out.append(t)
    return out


def _snap_time(A, M, t, tol):
    # polish a crossing so that the kernel is recognised at the index tolerance
    sv = _gamma_end_fn(A, M)
    res = minimize_scalar(sv, bounds=(t - 1e-6, t + 1e-6), method="bounded", options={"xatol": 1e-15})
    return float(res.x)


def staircase_profile(A: np.ndarray, M: Optional[np.ndarray], lam_range: tuple[float, float],
                      steps: int = 4096, tol_kernel: float = 1e-8) -> StaircaseProfile:
    """Piecewise constant lambda -> i_{1,M}(exp(lambda t J A)) on an interval not containing 0.

    The crossing set is located by scanning the smallest singular value of
    exp(t J A) - M; the index and nullity are evaluated at each crossing and
    the pieces in between follow the step rules for definite A.
    """
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    n = d // 2
    M = np.eye(d) if M is None else np.asarray(M, dtype=float)
    w = np.linalg.eigvalsh(A)
    if w.min() > 0:
        sign = 1
    elif w.max() < 0:
        sign = -1
    else:
        raise ValueError("A must be positive or negative definite")
    lo, hi = map(float, lam_range)
    if lo < 0 < hi:
        raise ValueError("range must not contain 0; split it")
    xs = [_snap_time(A, M, t, tol_kernel) for t in crossing_set(A, M, lo, hi)]

    def idx(lam):
        rep = maslov_index(exp_path(lam * A, 1.0, steps, error_estimate=False), M, tol_kernel=tol_kernel,
                           locate=False)
        return rep.i, rep.nu

    cr = [(t,) + idx(t) for t in xs]
    pieces = []
    direction = sign if lo >= 0 else -sign  # +1: index steps up after each crossing moving away from 0
    if lo >= 0:
        # crossings ordered away from 0: left-open, right-closed pieces
        if not cr:
            v = idx(0.5 * (lo + hi))[0]
            pieces.append((lo, hi, v, True, True))
        else:
            prev = lo
            for k, (t, i_k, nu_k) in enumerate(cr):
                pieces.append((prev, t, i_k, prev == lo, True))
                prev = t
                last = i_k + direction * nu_k
            pieces.append((prev, hi, last, False, True))
    else:
        if not cr:
            v = idx(0.5 * (lo + hi))[0]
            pieces.append((lo, hi, v, True, True))
        else:
            nxt = hi
            rev = []
            for t, i_k, nu_k in reversed(cr):
                rev.append((t, nxt, i_k, True, nxt == hi))
                nxt = t
                last = i_k + direction * nu_k
            rev.append((lo, nxt, last, True, False))
            pieces = list(reversed(rev))
    pieces = [p for p in pieces if p[1] > p[0] or (p[3] and p[4])]
    return StaircaseProfile(cr, pieces, sign)
