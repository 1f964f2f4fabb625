"""Versioned JSON form of a Family.

Floats are written as JSON numbers, whose ``repr`` is the shortest string
that round-trips; integers are written as decimal strings so no reader can
coerce them to floating point.  Keys are sorted, so export -> import ->
export reproduces the file byte for byte.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .errors import SchemaVersionError
from .profiles import Family, Kind, ModelParams, SolutionCoefficients

__all__ = ["SCHEMA", "VERSION", "family_to_dict", "family_from_dict", "dumps", "export_family", "import_family"]

SCHEMA = "torus-einstein/family"
VERSION = 1


def _float(x: float):
    x = float(x)
    if math.isfinite(x):
        return x
    return {"float": repr(x)}


def _unfloat(v) -> float:
    if isinstance(v, dict):
        return float(v["float"])
    return float(v)


def _meta_value(v):
    if isinstance(v, bool):
        return v
    if isinstance(v, int):
        return {"int": str(v)}
    if isinstance(v, float):
        return _float(v)
    if isinstance(v, (list, tuple)):
        return [_meta_value(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _meta_value(x) for k, x in v.items()}
    return str(v)


def _meta_restore(v):
    if isinstance(v, dict):
        if set(v) == {"int"}:
            return int(v["int"])
        if set(v) == {"float"}:
            return float(v["float"])
        return {k: _meta_restore(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_meta_restore(x) for x in v]
    return v


def family_to_dict(family: Family) -> dict:
    p, c = family.params, family.coeffs
    return {
        "schema": SCHEMA,
        "version": str(VERSION),
        "params": {
            "n": str(p.n),
            "p": str(p.p),
            "q1": str(p.q1),
            "q2": str(p.q2),
            "eps": _float(p.eps),
            "vol_base": _float(p.vol_base),
        },
        "coeffs": {
            "kind": c.kind.value,
            "kappa": _float(c.kappa),
            "c1": _float(c.c1),
            "c2": _float(c.c2),
            "w1": _float(c.w1),
            "w2": _float(c.w2),
            "psi": _float(c.psi),
        },
        "domain": {
            "s1": _float(family.s1),
            "s2": None if family.s2 is None else _float(family.s2),
        },
        "metadata": _meta_value(dict(family.metadata)),
    }


def family_from_dict(d: dict) -> Family:
    if d.get("schema") != SCHEMA:
        raise SchemaVersionError(f"unknown schema {d.get('schema')!r}, expected {SCHEMA!r}")
    if str(d.get("version")) != str(VERSION):
        raise SchemaVersionError(f"schema version {d.get('version')!r} is not supported (expected {VERSION})")
    p, c, dom = d["params"], d["coeffs"], d["domain"]
    params = ModelParams(
        int(p["n"]), int(p["p"]), int(p["q1"]), int(p["q2"]), _unfloat(p["eps"]), _unfloat(p["vol_base"])
    )
    coeffs = SolutionCoefficients(
        Kind(c["kind"]),
        _unfloat(c["kappa"]),
        _unfloat(c["c1"]),
        _unfloat(c["c2"]),
        _unfloat(c["w1"]),
        _unfloat(c["w2"]),
        _unfloat(c["psi"]),
    )
    s2 = dom.get("s2")
    return Family(
        params,
        coeffs,
        _unfloat(dom["s1"]),
        None if s2 is None else _unfloat(s2),
        _meta_restore(d.get("metadata", {})),
    )


def dumps(family: Family) -> str:
    return json.dumps(family_to_dict(family), sort_keys=True, indent=2, allow_nan=False) + "\n"


def export_family(family: Family, path) -> None:
    Path(path).write_text(dumps(family), encoding="utf-8")


def import_family(path) -> Family:
    return family_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
