"""JSON configuration for families, boundary matrices and grids."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .family import HamiltonianFamily, linear_quadratic, polynomial_family, quartic, rotation_family
from .symplectic import rotation, symplectic_defect

KINDS = ("linear_quadratic", "quadratic_plus_quartic", "rotation_blocks", "polynomial")


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending field."""


def _finite(name: str, value) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected a number, got {value!r}") from None
    if not math.isfinite(x):
        raise ConfigError(f"{name}: must be finite")
    return x


def _matrix(name: str, value, dim: Optional[int] = None) -> np.ndarray:
    if isinstance(value, dict):
        if "dim" not in value or "data" not in value:
            raise ConfigError(f"{name}: explicit matrix needs 'dim' and row-major 'data'")
        d = int(value["dim"])
        data = [_finite(f"{name}.data[{k}]", x) for k, x in enumerate(value["data"])]
        if len(data) != d * d:
            raise ConfigError(f"{name}: 'data' has {len(data)} entries, expected {d * d}")
        A = np.array(data).reshape(d, d)
    else:
        try:
            A = np.array(value, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError(f"{name}: not a numeric matrix") from None
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ConfigError(f"{name}: expected a square matrix")
        if not np.isfinite(A).all():
            raise ConfigError(f"{name}: entries must be finite")
    if dim is not None and A.shape[0] != dim:
        raise ConfigError(f"{name}: dimension {A.shape[0]} does not match 2n = {dim}")
    return A


def parse_boundary(spec, n: int) -> np.ndarray:
    """M from 'identity', 'rotation:theta', 'diag_kappa:k' or an explicit matrix."""
    d = 2 * n
    if isinstance(spec, str):
        head, _, arg = spec.partition(":")
        if head == "identity" and not arg:
            M = np.eye(d)
        elif head == "rotation":
            M = rotation(_finite("M.rotation", arg), n)
        elif head == "diag_kappa":
            try:
                kappa = int(arg)
            except ValueError:
                raise ConfigError(f"M.diag_kappa: expected an integer, got {arg!r}") from None
            if not 0 <= kappa <= n:
                raise ConfigError(f"M.diag_kappa: kappa must lie in [0, {n}]")
            half = np.concatenate([-np.ones(n - kappa), np.ones(kappa)])
            M = np.diag(np.concatenate([half, half]))
        else:
            raise ConfigError(f"M: unknown spec {spec!r}")
    else:
        M = _matrix("M", spec, d)
    if symplectic_defect(M) > 1e-10:
        raise ConfigError(f"M: not symplectic (defect {symplectic_defect(M):.2e})")
    return M


def _terms(name: str, rows, n: int) -> dict:
    out = {}
    if not isinstance(rows, list):
        raise ConfigError(f"{name}: expected a list of [exponents..., coefficient] rows")
    for k, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != 2 * n + 1:
            raise ConfigError(f"{name}[{k}]: expected {2 * n} exponents and a coefficient")
        exps = tuple(int(e) for e in row[:-1])
        out[exps] = out.get(exps, 0.0) + _finite(f"{name}[{k}]", row[-1])
    if any(sum(e) > 6 for e in out):
        raise ConfigError(f"{name}: polynomial degree must be <= 6")
    return out


@dataclass
class FamilyConfig:
    kind: str
    n: int = 1
    tau: float = 2 * math.pi
    M: Any = "identity"
    coefficients: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    lam_interval: tuple = (0.0, 2.0)
    grid: list = field(default_factory=list)

    @classmethod
    def from_dict(cls, data: dict) -> "FamilyConfig":
        if not isinstance(data, dict):
            raise ConfigError("family: expected an object")
        kind = data.get("kind")
        if kind not in KINDS:
            raise ConfigError(f"family.kind: must be one of {KINDS}, got {kind!r}")
        n = data.get("n", 1)
        if not isinstance(n, int) or n < 1:
            raise ConfigError("family.n: expected a positive integer")
        tau = _finite("family.tau", data.get("tau", 2 * math.pi))
        if tau <= 0:
            raise ConfigError("family.tau: must be positive")
        lo, hi = (_finite(f"family.lam_interval[{k}]", x)
                  for k, x in enumerate(data.get("lam_interval", (0.0, 2.0))))
        if hi <= lo:
            raise ConfigError("family.lam_interval: empty interval")
        grid = data.get("grid", [])
        if isinstance(grid, dict):
            pts = int(grid.get("points", 0))
            if pts < 2:
                raise ConfigError("family.grid.points: need at least 2 points")
            g_lo = _finite("family.grid.lo", grid.get("lo", lo))
            g_hi = _finite("family.grid.hi", grid.get("hi", hi))
            grid = list(np.linspace(g_lo, g_hi, pts))
        grid = [_finite(f"family.grid[{k}]", x) for k, x in enumerate(grid)]
        flags = data.get("flags", {})
        if not isinstance(flags, dict):
            raise ConfigError("family.flags: expected an object")
        cfg = cls(kind, n, tau, data.get("M", "identity"), dict(data.get("coefficients", {})),
                  dict(flags), (lo, hi), grid)
        cfg.build()
        return cfg

    def boundary(self) -> np.ndarray:
        return parse_boundary(self.M, self.n)

    def build(self) -> HamiltonianFamily:
        M = self.boundary()
        c = self.coefficients
        d = 2 * self.n
        if self.kind == "linear_quadratic":
            if "S" not in c:
                raise ConfigError("family.coefficients.S: required for linear_quadratic")
            S = _matrix("family.coefficients.S", c["S"], d)
            if np.abs(S - S.T).max() > 1e-12:
                raise ConfigError("family.coefficients.S: must be symmetric")
            fam = linear_quadratic(S, self.tau, M, self.lam_interval)
        elif self.kind == "rotation_blocks":
            rho = [_finite(f"family.coefficients.rho[{k}]", x) for k, x in enumerate(c.get("rho", [1.0] * self.n))]
            if len(rho) != self.n:
                raise ConfigError(f"family.coefficients.rho: expected {self.n} entries")
            fam = rotation_family(rho, self.tau, M, self.lam_interval)
        elif self.kind == "quadratic_plus_quartic":
            fam = quartic(self.n, self.tau, M, self.lam_interval)
        else:
            h0 = _terms("family.coefficients.h0", c.get("h0", []), self.n)
            h1 = _terms("family.coefficients.h1", c.get("h1", []), self.n)
            try:
                fam = polynomial_family(h0, h1, self.n, self.tau, M, self.lam_interval)
            except ValueError as exc:
                raise ConfigError(f"family.coefficients: {exc}") from None
        for key, value in self.flags.items():
            fam.flags[key] = value
        return fam

    def as_dict(self) -> dict:
        out = asdict(self)
        out["lam_interval"] = list(self.lam_interval)
        out["grid"] = [float(x) for x in self.grid]
        return out


def load(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be an object")
    return data
