"""Command line entry point: ``symbif <command> --config PATH [--out PATH]``.

Exit codes: 0 success, 2 report contains unresolved entries, 3 config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .bifurcation import MODES, classify
from .brake import brake_indices
from .bvp import branch_switch, newton_bvp
from .config import ConfigError, FamilyConfig, load, parse_boundary, _finite, _matrix
from .dual_morse import DualOperatorSpec, assemble_and_count, morse_identity_rhs
from .index import maslov_index
from .symplectic import CoefficientPath, fundamental_solution

SCHEMA = "symbif.report/1"
COMMANDS = ("index", "scan", "morse-oracle", "brake-index", "solve-bvp", "confirm")


@dataclass
class ReportDocument:
    command: str
    config: dict
    settings: dict
    result: dict
    unresolved: bool = False
    schema: str = SCHEMA
    version: str = __version__

    def to_json(self) -> str:
        body = {"schema": self.schema, "version": self.version, "command": self.command,
                "config": self.config, "settings": self.settings, "unresolved": self.unresolved,
                "result": self.result}
        return json.dumps(_clean(body), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ReportDocument":
        data = json.loads(text)
        if data.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {data.get('schema')!r}")
        return cls(data["command"], data["config"], data["settings"], data["result"],
                   data["unresolved"], data["schema"], data["version"])

    def table(self) -> str:
        lines = [f"{self.command}  (schema {self.schema})"]
        res = self.result
        if "profile" in res:
            lines.append(f"{'lambda':>12} {'i':>5} {'nu':>4}")
            lines += [f"{p['lam']:12.6g} {p['i']:5d} {p['nu']:4d}" for p in res["profile"]]
        for c in res.get("candidates", []):
            ev = c["evidence"]
            lines.append(f"candidate mu={c['mu']:.9g} {c['classification']} "
                         f"i {ev.get('i_minus')} -> {ev.get('i_plus')}, nu_mu={ev.get('nu_mu')}")
        for b in res.get("branch_points", []):
            lines.append(f"branch lam={b['lam']:.6g} |u(0)|={b['amplitude']:.9g} "
                         f"residual={b['boundary_residual']:.2e}")
        for key in ("i", "nu", "mu1", "mu2", "nu1", "nu2", "m_minus", "m_zero", "predicted", "match"):
            if key in res:
                lines.append(f"{key}: {res[key]}")
        return "\n".join(lines) + "\n"


def _clean(obj):
    # JSON has no NaN/inf; encode them as strings so the output stays valid
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    return obj


def _family(cfg: dict) -> FamilyConfig:
    if "family" not in cfg:
        raise ConfigError("family: section required for this command")
    return FamilyConfig.from_dict(cfg["family"])


def _lam(cfg: dict, fc: Optional[FamilyConfig] = None) -> float:
    if "lam" in cfg:
        return _finite("lam", cfg["lam"])
    if fc is not None:
        return 0.5 * sum(fc.lam_interval)
    raise ConfigError("lam: required")


def cmd_index(cfg, args):
    if "B" in cfg:
        B = _matrix("B", cfg["B"])
        n = B.shape[0] // 2
        tau = _finite("tau", cfg.get("tau", 2 * np.pi))
        M = parse_boundary(cfg.get("M", "identity"), n)
        coef = CoefficientPath.constant(B, tau)
        used = {"B": B, "tau": tau, "M": M}
    else:
        fc = _family(cfg)
        fam = fc.build()
        lam = _lam(cfg, fc)
        coef, M = fam.coefficient(lam), fam.M
        used = {"family": fc.as_dict(), "lam": lam}
    gamma = fundamental_solution(coef, args.steps, error_estimate=False)
    rep = maslov_index(gamma, M, tol_kernel=args.tol_kernel)
    return used, rep.as_dict(), rep.unresolved


def cmd_scan(cfg, args, confirm: bool = False):
    fc = _family(cfg)
    fam = fc.build()
    mode = cfg.get("mode", "fixed_period")
    if mode not in MODES:
        raise ConfigError(f"mode: must be one of {MODES}")
    if len(fc.grid) < 2:
        raise ConfigError("family.grid: scan needs at least two grid points")
    report = classify(fam, fc.grid, mode=mode, steps=args.steps, tol_kernel=args.tol_kernel)
    result = report.as_dict()
    used = {"family": fc.as_dict(), "mode": mode}
    if confirm:
        opts = cfg.get("confirm", {})
        radius = _finite("confirm.radius", opts.get("radius", 0.05))
        dlams = [_finite(f"confirm.dlams[{k}]", x) for k, x in enumerate(opts.get("dlams", [1e-1, 1e-2, 1e-3]))]
        points = []
        for c in report.candidates:
            if c.kernel is None or c.kernel.size == 0:
                continue
            for bp in branch_switch(fam, c.mu, c.kernel, dlams, radius=radius):
                points.append(dict(bp.as_dict(), mu=c.mu))
        result["branch_points"] = points
        used["confirm"] = {"radius": radius, "dlams": dlams}
    return used, result, report.unresolved


def cmd_morse(cfg, args):
    if "B" in cfg:
        B = _matrix("B", cfg["B"])
        n = B.shape[0] // 2
        tau = _finite("tau", cfg.get("tau", 2 * np.pi))
        M = parse_boundary(cfg.get("M", "identity"), n)
        coef = CoefficientPath.constant(B, tau)
        used = {"B": B, "tau": tau, "M": M}
    else:
        fc = _family(cfg)
        fam = fc.build()
        lam = _lam(cfg, fc)
        coef, M, n, tau = fam.coefficient(lam), fam.M, fam.n, fam.tau
        used = {"family": fc.as_dict(), "lam": lam}
    if "K" not in cfg:
        raise ConfigError("K: required for morse-oracle")
    try:
        spec = DualOperatorSpec(M, tau, _finite("K", cfg["K"]), n)
    except ValueError as exc:
        raise ConfigError(f"K: {exc}") from None
    used["K"] = spec.K
    _, count = assemble_and_count(coef, spec, args.basis)
    rhs = morse_identity_rhs(coef, spec, args.steps, args.tol_kernel)
    match = count.m_minus == rhs["predicted_minus"] and count.m_zero == rhs["predicted_zero"]
    result = {"m_minus": count.m_minus, "m_zero": count.m_zero, "predicted": rhs["predicted_minus"],
              "predicted_zero": rhs["predicted_zero"], "match": match, "gap": count.gap,
              "converged": count.converged, "note": count.note, "indices": rhs}
    return used, result, not count.converged


def cmd_brake(cfg, args):
    fc = _family(cfg)
    fam = fc.build()
    if not fam.flags.get("reversible"):
        raise ConfigError("family: brake-index needs a reversible family")
    lam = _lam(cfg, fc)
    rep = brake_indices(fam.coefficient(lam), args.steps, tol=args.tol_kernel)
    return {"family": fc.as_dict(), "lam": lam}, rep.as_dict(), False


def cmd_bvp(cfg, args):
    fc = _family(cfg)
    fam = fc.build()
    lam = _lam(cfg, fc)
    z = cfg.get("z_init")
    if z is None:
        rng = np.random.default_rng(args.seed)
        z = fam.u(lam, 0.0) + 0.1 * rng.normal(size=2 * fam.n)
    z = np.array([_finite(f"z_init[{k}]", x) for k, x in enumerate(np.atleast_1d(z))])
    if z.shape != (2 * fam.n,):
        raise ConfigError(f"z_init: expected {2 * fam.n} entries")
    bp = newton_bvp(fam, lam, z)
    return {"family": fc.as_dict(), "lam": lam, "z_init": z}, bp.as_dict(), not bp.converged


HANDLERS = {"index": cmd_index, "scan": cmd_scan, "morse-oracle": cmd_morse, "brake-index": cmd_brake,
            "solve-bvp": cmd_bvp, "confirm": lambda c, a: cmd_scan(c, a, confirm=True)}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="symbif", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--out", help="write the JSON report here (default: stdout)")
    p.add_argument("--steps", type=int, default=4096)
    p.add_argument("--basis", type=int, default=256)
    p.add_argument("--tol-kernel", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--table", action="store_true", help="also print a plain text table to stderr")
    return p


def run(command: str, config_path, out: Optional[str] = None, **opts) -> tuple[int, Optional[ReportDocument]]:
    args = argparse.Namespace(steps=opts.get("steps", 4096), basis=opts.get("basis", 256),
                              tol_kernel=opts.get("tol_kernel", 1e-8), seed=opts.get("seed", 0))
    try:
        cfg = load(config_path)
        used, result, unresolved = HANDLERS[command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3, None
    settings = {"steps": args.steps, "basis": args.basis, "tol_kernel": args.tol_kernel, "seed": args.seed}
    doc = ReportDocument(command, used, settings, result, bool(unresolved))
    text = doc.to_json()
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)
    return (2 if doc.unresolved else 0), doc


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    code, doc = run(a.command, a.config, a.out, steps=a.steps, basis=a.basis,
                    tol_kernel=a.tol_kernel, seed=a.seed)
    if doc is not None and a.table:
        sys.stderr.write(doc.table())
    return code


if __name__ == "__main__":
    sys.exit(main())
