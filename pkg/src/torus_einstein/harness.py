"""Command-line front end.

    torus-einstein build-negative --n 1 --p 2 --q1 0 --q2 1 --s1 1 --lambda 0.5 --eps -4 --out fam.json
    torus-einstein build-positive --n 1 --p 2 --q1 2 --q2 1 --out fam.json
    torus-einstein verify fam.json
    torus-einstein diagnose fam.json --volume
    torus-einstein classify --q 1,2450 --qhat 49,50
    torus-einstein enumerate-pairs --kind spin --s-max 6
    torus-einstein dump-profile fam.json --grid 50

Exit codes: 0 all checks pass, 1 a verification failed, 2 usage error.
Configuration is a flat ``key = value`` file named by --config or by the
TORUS_EINSTEIN_CONFIG environment variable; ``--set key=value`` overrides it.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import enum
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import builders, diagnostics, serialize, topology, verifier
from .errors import EinsteinLabError, PreconditionError, SchemaVersionError, SolverError
from .profiles import Family, Kind, psi_consistency

__all__ = ["RunConfig", "load_config", "run_pipeline", "main", "CONFIG_ENV", "REPORT_VERSION"]

CONFIG_ENV = "TORUS_EINSTEIN_CONFIG"
REPORT_VERSION = 1

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    residual_tol: float = 1e-8
    identity_tol: float = 1e-9
    derivative_tol: float = 1e-6
    collapse_tol: float = 1e-9
    grid_points: int = 200
    derivative_points: int = 50
    scan_ratio: float = 1e3
    quad_epsrel: float = 1e-12
    lambda_floor: float = builders.LAMBDA_FLOOR
    vol_base: float | None = None
    output_format: str = "json"

    def __post_init__(self):
        for name in ("residual_tol", "identity_tol", "derivative_tol", "collapse_tol", "quad_epsrel"):
            if not getattr(self, name) > 0:
                raise PreconditionError(f"{name} must be positive")
        for name in ("grid_points", "derivative_points"):
            if getattr(self, name) < 10:
                raise PreconditionError(f"{name} must be at least 10")
        if not self.scan_ratio > 1:
            raise PreconditionError("scan_ratio must exceed 1")
        if self.output_format not in ("json", "csv"):
            raise PreconditionError("output_format must be json or csv")

    def with_overrides(self, items: dict[str, str]) -> "RunConfig":
        fields = {f.name: f for f in dataclasses.fields(self)}
        values = {}
        for key, raw in items.items():
            key = key.strip().replace("-", "_")
            if key not in fields:
                raise UsageError(f"unknown config key {key!r}")
            values[key] = _coerce(key, raw.strip())
        return dataclasses.replace(self, **values)


def _coerce(key: str, raw: str):
    if key == "output_format":
        return raw
    if key == "vol_base":
        return None if raw.lower() in ("", "none", "default") else float(raw)
    if key in ("grid_points", "derivative_points"):
        return int(raw)
    return float(raw)


def _parse_kv(text: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def load_config(path=None, overrides: dict[str, str] | None = None) -> RunConfig:
    """Defaults, then the config file (explicit path or $TORUS_EINSTEIN_CONFIG), then overrides."""
    cfg = RunConfig()
    path = path or os.environ.get(CONFIG_ENV)
    if path:
        cfg = cfg.with_overrides(_parse_kv(Path(path).read_text(encoding="utf-8")))
    if overrides:
        cfg = cfg.with_overrides(overrides)
    return cfg


# -- report rendering --------------------------------------------------------


def jsonable(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else repr(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return jsonable(obj.item())
    if dataclasses.is_dataclass(obj):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    return str(obj)


def render(report: dict) -> str:
    body = {"report_version": str(REPORT_VERSION), **report}
    return json.dumps(jsonable(body), sort_keys=True, indent=2) + "\n"


# -- checks shared by build and verify ---------------------------------------


def verify_family(family: Family, cfg: RunConfig) -> dict:
    params, coeffs = family.params, family.coeffs
    hi = family.s2 if family.compact else cfg.scan_ratio * family.s1
    grid = verifier.log_grid(family.s1, hi, cfg.grid_points)
    res = verifier.einstein_residual(params, coeffs, grid)
    tol = verifier.residual_tolerance(params.eps, cfg.residual_tol)
    checks = {
        "residual": {
            "max_abs": res.max_abs,
            "tolerance": tol,
            "structural_failures": len(res.structural),
            "pass": res.passed(tol),
        }
    }
    ends = [verifier.End.LEFT] + ([verifier.End.RIGHT] if family.compact else [])
    for end in ends:
        s_end = family.s1 if end is verifier.End.LEFT else family.s2
        try:
            rep = verifier.collapse_check(params, coeffs, end, s_end, cfg.collapse_tol)
            checks[f"collapse_{end.value.lower()}"] = {
                "slope": rep.slope,
                "alpha": rep.alpha_at_end,
                "U": rep.U_at_end,
                "pass": rep.passed,
            }
        except EinsteinLabError as exc:
            checks[f"collapse_{end.value.lower()}"] = {"error": str(exc), "pass": False}
    scan = verifier.domain_scan(params, coeffs, (family.s1, hi), cfg.grid_points)
    checks["domain_scan"] = {"failures": [list(f) for f in scan.failures[:10]], "pass": scan.passed}
    if coeffs.kind is Kind.GENERIC_PSI:
        r = psi_consistency(params, coeffs)
        checks["psi_consistency"] = {
            "residual": r,
            "relative": abs(r) / coeffs.psi**2,
            "pass": abs(r) <= cfg.identity_tol * coeffs.psi**2,
        }
    return {"checks": checks, "pass": all(c["pass"] for c in checks.values())}


def _family_summary(family: Family) -> dict:
    return json.loads(serialize.dumps(family))


# -- subcommands -------------------------------------------------------------


def _emit_family(family: Family, out: str | None, cfg: RunConfig) -> tuple[int, str]:
    report = verify_family(family, cfg)
    if out:
        serialize.export_family(family, out)
        payload = {"family_file": str(out), "family": _family_summary(family), **report}
    else:
        payload = {"family": _family_summary(family), **report}
    return (EXIT_OK if report["pass"] else EXIT_FAIL), render(payload)


def _build_negative(args, cfg: RunConfig, eps: float) -> tuple[int, str]:
    spec = builders.NegativeSpec(args.s1, args.lam, eps, args.q1, args.q2, args.psi_sign, cfg.lambda_floor)
    params = spec.params(args.n, args.p, cfg.vol_base)
    try:
        fam = builders.build_nonpositive(spec, params, check=False)
    except SolverError as exc:
        return EXIT_FAIL, render({"error": str(exc), "diagnostics": exc.diagnostics})
    return _emit_family(fam, args.out, cfg)


def _cmd_build_negative(args, cfg):
    return _build_negative(args, cfg, args.eps)


def _cmd_build_ricci_flat(args, cfg):
    return _build_negative(args, cfg, 0.0)


def _cmd_build_positive(args, cfg):
    spec = builders.PositiveSpec(args.q1, args.q2, args.n, args.p, cfg.vol_base)
    try:
        fam = builders.build_positive(spec, check=False)
    except SolverError as exc:
        return EXIT_FAIL, render({"error": str(exc), "diagnostics": exc.diagnostics})
    return _emit_family(fam, args.out, cfg)


def _load(path: str) -> Family:
    try:
        return serialize.import_family(path)
    except (OSError, ValueError, KeyError) as exc:
        if isinstance(exc, SchemaVersionError):
            raise
        raise UsageError(f"cannot read family file {path!r}: {exc}") from exc


def _cmd_verify(args, cfg):
    fam = _load(args.family)
    report = verify_family(fam, cfg)
    return (EXIT_OK if report["pass"] else EXIT_FAIL), render({"family_file": args.family, **report})


def _cmd_diagnose(args, cfg):
    fam = _load(args.family)
    wanted = [k for k in ("q_curvature", "volume", "decay") if getattr(args, k)]
    if not wanted:
        wanted = ["volume"]
    out: dict = {"family_file": args.family}
    ok = True
    for what in wanted:
        try:
            if what == "q_curvature":
                bm = diagnostics.boundary_metric(fam)
                q = diagnostics.q_curvature4(bm, fam.params)
                passed = abs(q) <= cfg.identity_tol
                ok &= passed
                out["q_curvature"] = {"Q": q, "boundary": bm, "pass": passed}
            elif what == "volume":
                out["volume"] = diagnostics.volume_report(fam).values
            else:
                out["decay"] = diagnostics.decay_report(fam)
        except PreconditionError as exc:
            raise UsageError(str(exc)) from exc
    return (EXIT_OK if ok else EXIT_FAIL), render(out)


def _pair(text: str) -> tuple[int, int]:
    try:
        a, b = text.split(",")
        return int(a), int(b)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected two integers 'a,b', got {text!r}") from exc


def _cmd_classify(args, cfg):
    v = topology.classify(args.q, args.qhat, args.mode)
    payload = {"q": list(args.q), "qhat": list(args.qhat), "mode": args.mode, "verdict": v}
    if not v.comparable:
        sys.stderr.write(f"error: {v.witness.get('reason')}\n")
        return EXIT_USAGE, render(payload)
    return EXIT_OK, render(payload)


def _cmd_enumerate_pairs(args, cfg):
    rows = topology.example_pairs(args.kind, range(args.s_max + 1), args.mode)
    if cfg.output_format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "q", "qhat", "homeomorphic", "diffeomorphic"])
        for s, (q, qh), v in rows:
            w.writerow([s, f"{q[0]},{q[1]}", f"{qh[0]},{qh[1]}", v.homeomorphic, v.diffeomorphic])
        return EXIT_OK, buf.getvalue()
    items = [
        {"s": s, "q": list(q), "qhat": list(qh), "homeomorphic": v.homeomorphic, "diffeomorphic": v.diffeomorphic}
        for s, (q, qh), v in rows
    ]
    return EXIT_OK, render({"kind": args.kind, "mode": args.mode, "pairs": items})


CSV_COLUMNS = ["s", "t", "alpha", "beta", "Delta", "U1", "U2", "b11", "b12", "b22"]


def dump_profile(family: Family, npoints: int, s_max: float | None = None) -> str:
    hi = family.s2 if family.compact else (s_max or 1e3 * family.s1)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for s in verifier.log_grid(family.s1, hi, npoints):
        s = float(s)
        smp = family.sample(s, order=0)
        B = smp.B[0]
        row = [s, family.t_of_s(s), smp.alpha[0], smp.beta[0], smp.delta[0], smp.U1[0], smp.U2[0], B[0, 0], B[0, 1], B[1, 1]]
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def _cmd_dump_profile(args, cfg):
    fam = _load(args.family)
    text = dump_profile(fam, args.grid, args.s_max)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        return EXIT_OK, render({"csv_file": args.out, "rows": str(args.grid)})
    return EXIT_OK, text


# -- parser ------------------------------------------------------------------


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="torus-einstein", description="Build, verify and classify torus-bundle Einstein metrics.")
    ap.add_argument("--config", help=f"flat key=value config file (default: ${CONFIG_ENV})")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config value")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", dest="sub_config", default=None, help=argparse.SUPPRESS)
    common.add_argument("--set", dest="sub_set", action="append", default=[], metavar="KEY=VALUE", help=argparse.SUPPRESS)
    sub = ap.add_subparsers(dest="command", required=True)
    _add = sub.add_parser

    def add_parser(name, **kw):
        return _add(name, parents=[common], **kw)

    sub.add_parser = add_parser

    def model_args(p, with_s1=True):
        p.add_argument("--n", type=_positive_int, required=True)
        p.add_argument("--p", type=_positive_int, required=True)
        p.add_argument("--q1", type=int, required=True)
        p.add_argument("--q2", type=int, required=True)
        if with_s1:
            p.add_argument("--s1", type=float, required=True)
            p.add_argument("--lambda", dest="lam", type=float, required=True)
            p.add_argument("--psi-sign", type=int, choices=(1, -1), default=1)
        p.add_argument("--out", help="write the family JSON here")

    p = sub.add_parser("build-negative", help="non-positive family (eps <= 0)")
    model_args(p)
    p.add_argument("--eps", type=float, required=True)
    p.set_defaults(func=_cmd_build_negative)

    p = sub.add_parser("build-ricci-flat", help="Ricci-flat family (eps = 0)")
    model_args(p)
    p.set_defaults(func=_cmd_build_ricci_flat)

    p = sub.add_parser("build-positive", help="compact family with eps = 2n + 2")
    model_args(p, with_s1=False)
    p.set_defaults(func=_cmd_build_positive)

    p = sub.add_parser("verify", help="re-run every check on a family file")
    p.add_argument("family")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("diagnose", help="geometric diagnostics of a family file")
    p.add_argument("family")
    p.add_argument("--q-curvature", action="store_true")
    p.add_argument("--volume", action="store_true")
    p.add_argument("--decay", action="store_true")
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("classify", help="homeomorphism / diffeomorphism of W_q and W_qhat")
    p.add_argument("--q", type=_pair, required=True)
    p.add_argument("--qhat", type=_pair, required=True)
    p.add_argument("--mode", choices=[m.value for m in topology.Mode], default="invariants")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("enumerate-pairs", help="classify the parametrised example pairs")
    p.add_argument("--kind", choices=[k.value for k in topology.PairKind], required=True)
    p.add_argument("--s-max", type=int, required=True)
    p.add_argument("--mode", choices=[m.value for m in topology.Mode], default="invariants")
    p.set_defaults(func=_cmd_enumerate_pairs)

    p = sub.add_parser("dump-profile", help="CSV of the profile functions on a log grid")
    p.add_argument("family")
    p.add_argument("--grid", type=int, default=200)
    p.add_argument("--s-max", type=float, default=None, help="upper end for non-compact families")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_dump_profile)
    return ap


def run_pipeline(argv: list[str]) -> tuple[int, str]:
    """Parse ``argv`` and run one subcommand; returns (exit code, report text)."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0), ""
    try:
        overrides = {}
        for item in [*args.set, *args.sub_set]:
            if "=" not in item:
                raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            overrides[k] = v
        cfg = load_config(args.sub_config or args.config, overrides)
        return args.func(args, cfg)
    except (UsageError, PreconditionError, SchemaVersionError, OSError) as exc:
        return EXIT_USAGE, render({"error": str(exc)})


def main(argv: list[str] | None = None) -> int:
    code, text = run_pipeline(sys.argv[1:] if argv is None else list(argv))
    if text:
        sys.stdout.write(text)
    return code
