"""Index profiles along a trivial branch and classification of bifurcation candidates.

A candidate mu is a parameter where the relevant nullity exceeds its baseline
(0 for fixed-period and brake problems, 1 for autonomous orbits).  Between
grid points it is located by minimising the matching singular value of
gamma_lam(tau) - M (or of the upper right block of gamma_lam(tau/2) for brake
problems), and its flanks are probed at shrinking deleted neighbourhoods
until the index pattern stabilises or the resolution floor is reached.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .brake import BrakeIndices, brake_indices
from .family import HamiltonianFamily
from .index import IndexReport, maslov_index, nullity_rel
from .symplectic import CoefficientPath, fundamental_solution, propagate

log = logging.getLogger(__name__)

MODES = ("fixed_period", "autonomous_orbit", "equilibrium_orbit", "brake")
RESOLUTION_FLOOR = 1e-6


class Classification(str, Enum):
    NECESSARY_ONLY = "NECESSARY_ONLY"
    JUMP = "JUMP"
    RABINOWITZ = "RABINOWITZ"
    MONOTONE_FAMILY = "MONOTONE_FAMILY"
    ORBIT_JUMP = "ORBIT_JUMP"
    ORBIT_RABINOWITZ = "ORBIT_RABINOWITZ"
    EQUILIBRIUM_ORBIT = "EQUILIBRIUM_ORBIT"
    BRAKE_JUMP = "BRAKE_JUMP"
    BRAKE_RABINOWITZ = "BRAKE_RABINOWITZ"
    DEFORMATION_CROSSING = "DEFORMATION_CROSSING"
    NONE = "NONE"


@dataclass
class Candidate:
    mu: float
    classification: Classification
    evidence: dict = field(default_factory=dict)
    kernel: Optional[np.ndarray] = None

    def as_dict(self) -> dict:
        return {"mu": self.mu, "classification": self.classification.value,
                "evidence": _plain(self.evidence)}


@dataclass
class ScanReport:
    grid: np.ndarray
    reports: list
    mode: str = "fixed_period"
    candidates: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    @property
    def indices(self) -> list[int]:
        return [_pair(r)[0] for r in self.reports]

    @property
    def nullities(self) -> list[int]:
        return [_pair(r)[1] for r in self.reports]

    @property
    def unresolved(self) -> bool:
        return any(getattr(r, "unresolved", False) for r in self.reports)

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "grid": [float(x) for x in self.grid],
            "profile": [{"lam": float(lam), "i": _pair(r)[0], "nu": _pair(r)[1],
                         "unresolved": bool(getattr(r, "unresolved", False))}
                        for lam, r in zip(self.grid, self.reports)],
            "candidates": [c.as_dict() for c in self.candidates],
            "warnings": list(self.warnings),
            "settings": _plain(self.settings),
        }


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, Enum):
        return obj.value
    return obj


def _pair(rep) -> tuple[int, int]:
    if isinstance(rep, BrakeIndices):
        return rep.mu1, rep.nu1
    return rep.i, rep.nu


# ------------------------------------------------------------------ profiles


@dataclass
class _Evaluator:
    family: HamiltonianFamily
    mode: str
    steps: int
    tol_kernel: float

    @property
    def brake(self) -> bool:
        return self.mode == "brake"

    def report(self, lam: float):
        B = self.family.coefficient(lam)
        if self.brake:
            return brake_indices(B, self.steps, tol=self.tol_kernel)
        gamma = fundamental_solution(B, self.steps, error_estimate=False)
        return maslov_index(gamma, self.family.M, tol_kernel=self.tol_kernel)

    def end(self, lam: float, steps: Optional[int] = None) -> np.ndarray:
        B = self.family.coefficient(lam)
        t1 = 0.5 * B.tau if self.brake else B.tau
        grid = np.linspace(0.0, t1, (steps or self.steps) + 1)
        return propagate(B, grid, np.eye(2 * B.n))[-1]

    def singular(self, lam: float, k: int, steps: Optional[int] = None) -> float:
        E = self.end(lam, steps)
        n = self.family.n
        A = E[:n, n:] if self.brake else E - self.family.M
        s = np.linalg.svd(A, compute_uv=False)[::-1]
        return float(s[k] / max(1.0, s[-1]))


def index_profile(family: HamiltonianFamily, grid, *, mode: str = "fixed_period", steps: int = 4096,
                  tol_kernel: float = 1e-8) -> list:
    """Per-lambda (index, nullity) reports along the trivial branch.

    The coefficient is B_lam(t) = H''(lam, t, u_lam(t)), i.e. the Hessian of
    the recentred Hamiltonian at 0.  Brake mode returns BrakeIndices on
    [0, tau/2], every other mode returns IndexReport for (tau, M).
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    ev = _Evaluator(family, mode, steps, tol_kernel)
    out = []
    for lam in np.asarray(grid, dtype=float):
        rep = ev.report(float(lam))
        if getattr(rep, "unresolved", False):
            log.warning("unresolved index at lam=%.6g", lam)
        out.append(rep)
    return out


# ------------------------------------------------------------------ classify


def _baseline(mode: str) -> int:
    return 1 if mode == "autonomous_orbit" else 0


def _locate(ev: _Evaluator, lo: float, hi: float, k: int) -> tuple[float, float]:
    # the singular value has a V-shaped zero; its square is smooth for Brent
    coarse = max(256, ev.steps // 8)
    res = minimize_scalar(lambda x: ev.singular(x, k, coarse) ** 2, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12 * max(1.0, abs(lo), abs(hi))})
    x = float(res.x)
    if np.sqrt(res.fun) > 1e-6:
        return x, float(np.sqrt(res.fun))
    w = 1e-6 * max(1.0, abs(x))
    res = minimize_scalar(lambda y: ev.singular(y, k) ** 2, bounds=(max(lo, x - w), min(hi, x + w)),
                          method="bounded", options={"xatol": 1e-14 * max(1.0, abs(x)), "maxiter": 40})
    return float(res.x), float(np.sqrt(res.fun))


def _probe(ev: _Evaluator, cache: dict, lam: float):
    if lam not in cache:
        cache[lam] = ev.report(lam)
    return _pair(cache[lam])


def _flanks(ev, cache, mu, left, right, base):
    """Flank values at shrinking deleted neighbourhoods of mu.

    Starts from the nearest grid points, then shrinks the gap tenfold per level
    down to the floor; stops once two consecutive levels agree with baseline
    nullity on both sides.
    """
    levels = []
    dl, dr = mu - left, right - mu
    delta = min(dl, dr)
    probes = [(left, right)]
    while delta > RESOLUTION_FLOOR:
        delta = max(delta / 10.0, RESOLUTION_FLOOR)
        probes.append((mu - delta, mu + delta))
    prev = None
    for a, b in probes:
        pa, pb = _probe(ev, cache, a), _probe(ev, cache, b)
        levels.append({"lam_minus": a, "lam_plus": b, "minus": pa, "plus": pb})
        ok = pa[1] == base and pb[1] == base
        if ok and prev is not None and prev == (pa[0], pb[0]):
            return pa, pb, levels, True
        prev = (pa[0], pb[0]) if ok else None
    return levels[-1]["minus"], levels[-1]["plus"], levels, False


def _kernel_basis(ev: _Evaluator, mu: float):
    E = ev.end(mu)
    n = ev.family.n
    if ev.brake:
        _, s, Vt = np.linalg.svd(E[:n, n:])
    else:
        _, s, Vt = np.linalg.svd(E - ev.family.M)
    scale = max(1.0, s.max())
    return Vt[s / scale < max(ev.tol_kernel, 1e-6)].T.copy()


def _monotone_sign(family: HamiltonianFamily, mu: float, samples: int = 17, h: float = 1e-4) -> int:
    ts = np.linspace(0.0, family.tau, samples)
    d = (family.hess(mu + h, ts, family.u(mu + h, ts)) - family.hess(mu - h, ts, family.u(mu - h, ts))) / (2 * h)
    w = np.linalg.eigvalsh(0.5 * (d + np.swapaxes(d, -1, -2)))
    if w.min() > 1e-8:
        return 1
    if w.max() < -1e-8:
        return -1
    return 0


def _equilibrium_gate(family: HamiltonianFamily, mu: float, tol: float = 1e-8) -> dict:
    M = family.M
    d = 2 * family.n
    out = {"orthogonal": bool(np.abs(M.T @ M - np.eye(d)).max() < 1e-10)}
    P, l = np.eye(d), 0
    for l in range(1, 65):
        P = P @ M
        if np.abs(P - np.eye(d)).max() < 1e-10:
            break
    else:
        l = 0
    out["order"] = l
    ts = np.linspace(0.0, family.tau, 9)
    u = family.u(mu, ts)
    out["constant_branch"] = bool(np.abs(u - u[0]).max() < 1e-10)
    Hm = family.hess(mu, 0.0, u[0])
    s = np.linalg.svd(np.vstack([M - np.eye(d), Hm]), compute_uv=False)
    out["gate_a"] = bool(s.min() / max(1.0, s.max()) > tol)
    return out


def _even_kernel_gate(ev: _Evaluator, mu: float, Y: np.ndarray, samples: int = 64) -> bool:
    """True when no nonzero kernel solution of the brake problem is even.

    A kernel solution v(t) = gamma(t)(0, y) is even iff its x part vanishes
    on [0, tau/2] (evenness plus v(-t) = N v(t) forces v into {0} x R^n).
    """
    if Y.size == 0:
        return True
    n = ev.family.n
    B = ev.family.coefficient(mu)
    grid = np.linspace(0.0, 0.5 * B.tau, max(samples, 512) + 1)
    path = propagate(B, grid, np.eye(2 * n))[:: max(1, len(grid) // samples)]
    X = np.concatenate([P[:n, n:] @ Y for P in path], axis=0)
    s = np.linalg.svd(X, compute_uv=False)
    return bool(s.min() > 1e-6 * max(1.0, s.max()))


def _classify_one(ev, cache, mu, left, right, mode, family, evidence):
    base = _baseline(mode)
    i_mu, nu_mu = _probe(ev, cache, mu)
    evidence.update({"i_mu": i_mu, "nu_mu": nu_mu, "baseline_nullity": base,
                     "effective_nullity": nu_mu - base})
    if nu_mu <= base:
        return None
    minus, plus, levels, stable = _flanks(ev, cache, mu, left, right, base)
    evidence.update({"i_minus": minus[0], "i_plus": plus[0], "nu_minus": minus[1], "nu_plus": plus[1],
                     "flank_levels": levels, "flanks_stable": stable})
    flank_ok = stable and minus[1] == base and plus[1] == base
    jump = flank_ok and minus[0] != plus[0]
    eff = nu_mu - base
    rab = flank_ok and {minus[0], plus[0]} == {i_mu, i_mu + eff}
    C = Classification
    if mode == "brake":
        if rab:
            evidence["pattern"] = "flanks {mu1(mu), mu1(mu) + nu1(mu)}"
            return C.BRAKE_RABINOWITZ
        if jump:
            evidence["pattern"] = "mu1(lam-) != mu1(lam+) with nu1 = 0 on both flanks"
            return C.BRAKE_JUMP
        return C.NECESSARY_ONLY
    if mode == "autonomous_orbit":
        if rab:
            evidence["pattern"] = "flanks {i_mu, i_mu + nu_mu - 1} with dim Ker = 1 on both flanks"
            return C.ORBIT_RABINOWITZ
        if jump:
            evidence["pattern"] = "i(lam-) != i(lam+) with dim Ker = 1 on both flanks"
            return C.ORBIT_JUMP
        return C.NECESSARY_ONLY
    if mode == "equilibrium_orbit":
        gate = _equilibrium_gate(family, mu)
        evidence["gate"] = gate
        usable = gate["orthogonal"] and gate["order"] > 0 and gate["constant_branch"]
        if usable and gate["gate_a"] and rab:
            evidence["pattern"] = "Ker(M - I) meets Ker H''(v0) trivially; flanks {i_mu, i_mu + nu_mu}"
            return C.EQUILIBRIUM_ORBIT
    sign = family.flags.get("monotone", 0)
    if sign:
        observed = _monotone_sign(family, mu)
        evidence["monotone_sign"] = observed
        if observed != sign:
            raise ValueError(f"family declared monotone ({sign:+d}) but dH''/dlam has sign {observed} at {mu}")
        expect = (i_mu, i_mu + nu_mu) if sign > 0 else (i_mu + nu_mu, i_mu)
        evidence["expected_flanks"] = expect
        evidence["pattern"] = ("left i_mu, right i_mu + nu_mu" if sign > 0
                               else "left i_mu + nu_mu, right i_mu")
        evidence["pattern_observed"] = bool(flank_ok and (minus[0], plus[0]) == expect)
        return C.MONOTONE_FAMILY
    if rab:
        evidence["pattern"] = "flanks {i_mu, i_mu + nu_mu} with nu = 0 on both flanks"
        return C.RABINOWITZ
    if jump:
        evidence["pattern"] = "i(lam-) != i(lam+) with nu = 0 on both flanks"
        return C.JUMP
    return C.NECESSARY_ONLY


def classify(family: HamiltonianFamily, grid, reports: Optional[list] = None, *, mode: str = "fixed_period",
             steps: int = 4096, tol_kernel: float = 1e-8) -> ScanReport:
    """Profile (if not given) and classify every candidate in the grid range.

    Candidates come from grid points whose nullity exceeds the baseline and
    from grid intervals across which the index changes or the singular value
    has an interior near-zero minimum.  Grid endpoints with excess nullity
    are reported as warnings asking for a wider grid.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    grid = np.asarray(grid, dtype=float)
    if len(grid) < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing with at least two points")
    ev = _Evaluator(family, mode, steps, tol_kernel)
    reports = index_profile(family, grid, mode=mode, steps=steps, tol_kernel=tol_kernel) \
        if reports is None else list(reports)
    cache = {float(lam): r for lam, r in zip(grid, reports)}
    base = _baseline(mode)
    pairs = [_pair(r) for r in reports]
    warnings = []
    for end in (0, len(grid) - 1):
        if pairs[end][1] > base:
            warnings.append(f"refine: excess nullity at grid endpoint lam={grid[end]:.6g}")

    found: list[tuple[float, float, float]] = []
    for k in range(1, len(grid) - 1):
        if pairs[k][1] > base:
            found.append((grid[k], grid[k - 1], grid[k + 1]))
    for k in range(len(grid) - 1):
        a, b = grid[k], grid[k + 1]
        if pairs[k][1] > base or pairs[k + 1][1] > base:
            continue
        sv_mid = None
        if pairs[k][0] == pairs[k + 1][0]:
            sv_mid = ev.singular(0.5 * (a + b), base, max(256, steps // 8))
            if sv_mid > 1e-2:
                continue
        mu, val = _locate(ev, a, b, base)
        if val > 1e-6:
            if pairs[k][0] != pairs[k + 1][0]:
                warnings.append(f"index changes on [{a:.6g}, {b:.6g}] but no degenerate parameter was found")
            continue
        found.append((mu, a, b))

    candidates = []
    for mu, left, right in sorted(found):
        evidence = {"bracket": (left, right)}
        cls = _classify_one(ev, cache, float(mu), float(left), float(right), mode, family, evidence)
        if cls is None:
            if getattr(cache[float(mu)], "nu", 1) <= base:
                warnings.append(f"located near-degenerate lam={mu:.9g} but nullity is at baseline")
            continue
        kernel = _kernel_basis(ev, float(mu))
        if mode == "brake":
            gate = _even_kernel_gate(ev, float(mu), kernel)
            evidence["even_kernel_gate"] = gate
            evidence["pairs"] = bool(gate and family.flags.get("autonomous"))
        candidates.append(Candidate(float(mu), cls, evidence, kernel))

    settings = {"steps": steps, "tol_kernel": tol_kernel, "resolution_floor": RESOLUTION_FLOOR,
                "grid_spacing": float(np.diff(grid).max())}
    return ScanReport(grid, reports, mode, candidates, warnings, settings)


# ------------------------------------------------------------------ deformation


@dataclass
class DeformationReport:
    crossings: list            # (t_k, nullity at t_k)
    staircase: list            # (lo, hi, i_{s,M}) on each open interval between crossings
    sign: int
    end_index: int
    end_nullity: int
    settings: dict = field(default_factory=dict)

    def candidates(self) -> list[Candidate]:
        return [Candidate(t, Classification.DEFORMATION_CROSSING, {"nullity": nu, "sign": self.sign})
                for t, nu in self.crossings]

    def as_dict(self) -> dict:
        return _plain({"crossings": [{"t": t, "nu": nu} for t, nu in self.crossings],
                       "staircase": [{"lo": a, "hi": b, "i": v} for a, b, v in self.staircase],
                       "sign": self.sign, "end_index": self.end_index, "end_nullity": self.end_nullity,
                       "settings": self.settings})


def _definite_sign(B: CoefficientPath, samples: int = 65) -> int:
    mats = B.sample(np.linspace(0.0, B.tau, samples))
    w = np.linalg.eigvalsh(mats)
    if w.min() > 0:
        return 1
    if w.max() < 0:
        return -1
    return 0


def deformation_scan(B: CoefficientPath, M: Optional[np.ndarray] = None, *, steps: int = 4096,
                     tol_kernel: float = 1e-8, staircase: bool = True) -> DeformationReport:
    """Times s in (0, tau) with dim Ker(gamma_B(s) - M) > 0, for definite B.

    Crossings are found from the sampled path by local minima of the smallest
    singular value and polished by re-integrating from the nearest sample.
    The staircase lists i_{s,M}(gamma_B restricted to [0, s]) on the open
    intervals between consecutive crossings.
    """
    d = 2 * B.n
    M = np.eye(d) if M is None else np.asarray(M, dtype=float)
    sign = _definite_sign(B)
    if sign == 0:
        raise ValueError("Hessian along the branch is not definite; the deformation criterion does not apply")
    grid = np.linspace(0.0, B.tau, steps + 1)
    path = propagate(B, grid, np.eye(d))
    sv = np.linalg.svd(path - M, compute_uv=False)[:, -1]

    def smin2(s):
        k = min(max(int(np.floor(s / B.tau * steps)), 0), steps - 1)
        Z = propagate(B, np.linspace(grid[k], s, 9), path[k])[-1] if s > grid[k] else path[k]
        return float(np.linalg.svd(Z - M, compute_uv=False)[-1]) ** 2

    times = []
    for k in range(1, steps):
        if sv[k] <= sv[k - 1] and sv[k] <= sv[k + 1]:
            res = minimize_scalar(smin2, bounds=(grid[k - 1], grid[k + 1]), method="bounded",
                                  options={"xatol": 1e-14 * max(1.0, B.tau)})
            if res.fun < 1e-14 and 0 < res.x < B.tau:
                if not times or res.x - times[-1] > 1e-6:
                    times.append(float(res.x))
    crossings = []
    for t in times:
        k = min(int(np.floor(t / B.tau * steps)), steps - 1)
        Z = propagate(B, np.linspace(grid[k], t, 9), path[k])[-1]
        crossings.append((t, nullity_rel(Z, M, max(tol_kernel, 1e-7)).dim))

    full = maslov_index(fundamental_solution(B, steps, error_estimate=False), M, tol_kernel=tol_kernel)
    stairs = []
    if staircase:
        edges = [0.0] + times + [B.tau]
        for a, b in zip(edges[:-1], edges[1:]):
            s = 0.5 * (a + b)
            sub = CoefficientPath(s, B.func, B.n, batch=B.batch)
            rep = maslov_index(fundamental_solution(sub, max(256, int(steps * s / B.tau)), error_estimate=False),
                               M, tol_kernel=tol_kernel)
            stairs.append((a, b, rep.i))
    return DeformationReport(crossings, stairs, sign, full.i, full.nu,
                             {"steps": steps, "tol_kernel": tol_kernel})
