"""Command-line driver: configuration parsing, experiment orchestration, and
report emission.

Usage:  traction-gap <subcommand> --config <path> [--out <dir>]

Subcommands: check-loads, kernel, solve-linear, solve-limit, gap-report,
verify-explicit, nonlinear-study, rotated-check, nonuniqueness.

Reports are written as ``report.json`` (deterministic: identical config and
version produce byte-identical output) plus ``report.csv`` for the tabular
subcommands; wall time and other run metadata go to ``meta.json`` so the
main report stays reproducible.  Exit codes: 0 success, 1 usage, 2 invalid
configuration, 3 solver failure, 4 a certification check failed.

CSV columns (fixed):
  nonlinear-study : h,value_Gh,gap_to_limit,rot_dist,strain_rescaled
  gap-report      : theta,value,predicted,residual
  kernel          : wx,wy,wz,work_quadratic
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .galerkin import AssemblyError, SolverError
from .geometry import Domain
from .limits import (
    gap_report,
    min_limit,
    min_linear,
    incompressible_linear_bounds,
    nonuniqueness_check,
    rotated_no_gap_check,
    verify_explicit,
)
from .loads import (
    LoadError,
    LoadSpec,
    compatibility_report,
    default_rules,
    reversed_compatibility_witness,
)
from .scaled import convergence_study

USAGE = __doc__

DEFAULT_CONFIG: dict = {
    "domain": {"kind": "cylinder", "radius": 1.0, "height": 1.0},
    "phi_coeffs": [-1.0, 0.0, 6.0, 0.0, -9.0, 0.0, 4.0],
    "psi_coeffs": [-0.5, 1.0],
    "beta": 0.01,
    "surface_pressure": None,
    "builtin": None,
    "basis": {"kind": "full", "degree": 8, "degree1d": 4},
    "quadrature_order": 16,
    "kernel_samples": 200,
    "h_schedule": [0.2, 0.1, 0.05, 0.02],
    "penalty_kappa": 1.0e4,
    "nonlinear_degree": 4,
    "tolerances": {
        "classification": 1.0e-9,
        "cg": 1.0e-12,
        "theta": 1.0e-10,
        "rotated_relative": 1.0e-6,
        "nonuniqueness_relative": 1.0e-8,
        "explicit_residual": 1.0e-8,
    },
}


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"config field '{path}': {message}")
        self.path = path


def _require(cond: bool, path: str, message: str):
    if not cond:
        raise ConfigError(path, message)


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = dict(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(here, "unknown field")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, here)
        else:
            out[key] = value
    return out


def load_config(path: str | None) -> dict:
    if path is None:
        return json.loads(json.dumps(DEFAULT_CONFIG))
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError("(file)", f"config file not found: {path}")
    except json.JSONDecodeError as err:
        raise ConfigError("(file)", f"not valid JSON: {err}")
    if not isinstance(raw, dict):
        raise ConfigError("(root)", "config must be a JSON object")
    return _merge(DEFAULT_CONFIG, raw)


def validate_config(cfg: dict) -> dict:
    dom = cfg["domain"]
    _require(dom["kind"] in ("cylinder", "ball"), "domain.kind", "must be cylinder|ball")
    for key in ("radius", "height"):
        _require(isinstance(dom[key], (int, float)) and dom[key] > 0, f"domain.{key}",
                 "must be a positive number")
    for key in ("phi_coeffs", "psi_coeffs", "h_schedule"):
        _require(isinstance(cfg[key], list), key, "must be an array of numbers")
        _require(all(isinstance(v, (int, float)) for v in cfg[key]), key,
                 "must be an array of numbers")
    _require(isinstance(cfg["beta"], (int, float)), "beta", "must be a number")
    if cfg["surface_pressure"] is not None:
        _require(isinstance(cfg["surface_pressure"], (int, float)), "surface_pressure",
                 "must be a number or null")
    if cfg["builtin"] is not None:
        _require(cfg["builtin"] == "ball_pull_in", "builtin",
                 "the only builtin load is 'ball_pull_in'")
    basis = cfg["basis"]
    _require(basis["kind"] in ("full", "ansatz_k", "ansatz_k_div", "div_free"),
             "basis.kind", "unknown space kind")
    _require(isinstance(basis["degree"], int) and basis["degree"] >= 1, "basis.degree",
             "must be an integer >= 1")
    _require(isinstance(basis["degree1d"], int) and basis["degree1d"] >= 0,
             "basis.degree1d", "must be an integer >= 0")
    for key in ("quadrature_order", "kernel_samples", "nonlinear_degree"):
        _require(isinstance(cfg[key], int) and cfg[key] >= 1, key, "must be an integer >= 1")
    _require(isinstance(cfg["penalty_kappa"], (int, float)) and cfg["penalty_kappa"] > 0,
             "penalty_kappa", "must be a positive number")
    hs = cfg["h_schedule"]
    _require(all(0 < h < 1 for h in hs), "h_schedule", "entries must lie in (0, 1)")
    _require(all(b < a for a, b in zip(hs, hs[1:])), "h_schedule",
             "must be strictly decreasing")
    for key, value in cfg["tolerances"].items():
        _require(isinstance(value, (int, float)) and value > 0, f"tolerances.{key}",
                 "must be a positive number")
    return cfg


def spec_from_config(cfg: dict) -> LoadSpec:
    domain = Domain(cfg["domain"]["kind"], cfg["domain"]["radius"], cfg["domain"]["height"])
    if cfg["builtin"] is not None:
        return LoadSpec.ball_pull_in()
    beta = float(cfg["beta"])
    psi = tuple(beta * float(c) for c in cfg["psi_coeffs"]) if beta != 0.0 else ()
    try:
        return LoadSpec(
            phi_coeffs=tuple(float(c) for c in cfg["phi_coeffs"]),
            psi_coeffs=psi,
            surface_pressure=cfg["surface_pressure"],
            builtin=None,
            domain=domain,
        )
    except LoadError as err:
        raise ConfigError("phi_coeffs/psi_coeffs", str(err))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(dataclasses.asdict(obj))
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def config_hash(cfg: dict) -> str:
    canon = json.dumps(_jsonable(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


# ---------------------------------------------------------------------------
# subcommand implementations: each returns (results dict, csv rows or None,
# exit code)


def _cmd_check_loads(spec, cfg):
    rules = default_rules(spec, cfg["quadrature_order"])
    tol = cfg["tolerances"]["classification"]
    rep = compatibility_report(spec, rules, samples=cfg["kernel_samples"], tol=tol)
    witness = reversed_compatibility_witness(spec, rules, tol=tol)
    results = {
        "classification": rep.classification,
        "axis": rep.axis,
        "resultant": rep.resultant,
        "momentum_max": rep.momentum_max,
        "w2_min": min(rep.w2_values.values()),
        "w2_max": rep.w2_max,
        "spin_form_eigenvalues": rep.eigenvalues,
        "reversed_witness": witness,
    }
    return results, None, 0


def _cmd_kernel(spec, cfg):
    rules = default_rules(spec, cfg["quadrature_order"])
    rep = compatibility_report(
        spec, rules, samples=cfg["kernel_samples"], tol=cfg["tolerances"]["classification"]
    )
    rows = [("wx", "wy", "wz", "work_quadratic")] + [
        (d[0], d[1], d[2], v) for d, v in rep.w2_values.items()
    ]
    results = {
        "classification": rep.classification,
        "axis": rep.axis,
        "resultant": rep.resultant,
        "momentum_max": rep.momentum_max,
        "spin_form_eigenvalues": rep.eigenvalues,
        "samples": len(rep.w2_values),
    }
    return results, rows, 0


def _cmd_solve_linear(spec, cfg):
    degree = cfg["basis"]["degree"]
    res = min_linear(spec, degree=degree)
    bounds = incompressible_linear_bounds(spec, degree=degree)
    results = {
        "value": res.value,
        "iterations": res.iterations,
        "residual_norm": res.residual_norm,
        "degree": degree,
        "incompressible": {
            "upper": bounds.upper.value,
            "lower": bounds.lower,
            "kappa_schedule": list(bounds.kappa_schedule),
            "kappa_values": bounds.kappa_values,
        },
    }
    return results, None, 0


def _cmd_solve_limit(spec, cfg):
    res = min_limit(spec, degree=cfg["basis"]["degree"])
    results = {
        "value": res.value,
        "rotation": res.rotation,
        "iterations": res.iterations,
        "residual_norm": res.residual_norm,
        "degree": cfg["basis"]["degree"],
        "multistart_seed": 0,  # fixed seed of the full-SO(3) search
    }
    return results, None, 0


def _cmd_gap_report(spec, cfg):
    rep = gap_report(spec, degree=cfg["basis"]["degree"], order=cfg["quadrature_order"])
    rows = [("theta", "value", "predicted", "residual")] + [
        (r.theta, r.value, r.predicted, r.residual) for r in rep.decomposition
    ]
    code = 0 if (rep.margin > 0 and rep.incompressible.certified) else 4
    return _jsonable(rep), rows, code


def _cmd_verify_explicit(spec, cfg):
    res = verify_explicit(spec, order=cfg["quadrature_order"])
    tol = cfg["tolerances"]["explicit_residual"]
    checked = {
        k: v
        for k, v in res.items()
        if k not in ("strain_orthogonality_full", "axial_overlap")
    }
    code = 0 if all(v <= tol for v in checked.values()) else 4
    return {**res, "tolerance": tol}, None, code


def _cmd_nonlinear_study(spec, cfg):
    rows = convergence_study(
        spec, tuple(cfg["h_schedule"]), degree=cfg["nonlinear_degree"]
    )
    table = [("h", "value_Gh", "gap_to_limit", "rot_dist", "strain_rescaled")] + [
        (r.h, r.value, r.gap_to_limit, r.rotation_distance, r.strain_rescaled)
        for r in rows
    ]
    failed = [r for r in rows if r.status.startswith("error")]
    results = {"rows": rows, "errors": len(failed)}
    return _jsonable(results), table, 3 if failed else 0


def _cmd_rotated_check(spec, cfg):
    res = rotated_no_gap_check(spec, degree=cfg["basis"]["degree"])
    tol = cfg["tolerances"]["rotated_relative"]
    ok = res.relative_difference < tol and res.kernel_unchanged
    return {**_jsonable(res), "tolerance": tol}, None, 0 if ok else 4


def _cmd_nonuniqueness(spec, cfg):
    res = nonuniqueness_check(spec, order=cfg["quadrature_order"])
    tol = cfg["tolerances"]["nonuniqueness_relative"]
    ok = res.relative_value_difference < tol and res.distinct
    return {**_jsonable(res), "tolerance": tol}, None, 0 if ok else 4


SUBCOMMANDS = {
    "check-loads": _cmd_check_loads,
    "kernel": _cmd_kernel,
    "solve-linear": _cmd_solve_linear,
    "solve-limit": _cmd_solve_limit,
    "gap-report": _cmd_gap_report,
    "verify-explicit": _cmd_verify_explicit,
    "nonlinear-study": _cmd_nonlinear_study,
    "rotated-check": _cmd_rotated_check,
    "nonuniqueness": _cmd_nonuniqueness,
}


def _write_csv(path: Path, rows) -> None:
    lines = [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(USAGE)
        return 0 if argv else 1
    sub = argv[0]
    if sub not in SUBCOMMANDS:
        print(f"unknown subcommand: {sub!r}\n", file=sys.stderr)
        print(USAGE, file=sys.stderr)
        return 1
    parser = argparse.ArgumentParser(prog=f"traction-gap {sub}")
    parser.add_argument("--config", default=None, help="path to a JSON config")
    parser.add_argument("--out", default=".", help="output directory for reports")
    args = parser.parse_args(argv[1:])

    t0 = time.time()
    try:
        cfg = validate_config(load_config(args.config))
        spec = spec_from_config(cfg)
    except ConfigError as err:
        print(f"invalid configuration: {err}", file=sys.stderr)
        return 2

    try:
        results, csv_rows, code = SUBCOMMANDS[sub](spec, cfg)
    except (SolverError, AssemblyError) as err:
        print(f"solver error: {err}", file=sys.stderr)
        return 3
    except LoadError as err:
        print(f"invalid configuration: {err}", file=sys.stderr)
        return 2

    report = {
        "subcommand": sub,
        "version": __version__,
        "config_hash": config_hash(cfg),
        "tolerances": cfg["tolerances"],
        "results": _jsonable(results),
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(
        json.dumps(report, sort_keys=True, indent=2) + "\n"
    )
    if csv_rows is not None:
        _write_csv(out / "report.csv", csv_rows)
    (out / "meta.json").write_text(
        json.dumps({"wall_time_s": time.time() - t0, "subcommand": sub}) + "\n"
    )
    print(f"{sub}: exit {code}; report in {out / 'report.json'}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
