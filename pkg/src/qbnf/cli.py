"""Command line front end: ``qbnf {divisors,radii,run,validate,generate} CONFIG``.

Every command reads one JSON configuration file, validated against
:data:`CONFIG_SCHEMA` before any computation. Scalar flags given on the
command line override the corresponding config entries.

Exit codes: 0 success, 1 non-convergence (or failed validation),
2 configuration error, 3 internal invariant violation.
"""

import argparse
import csv
import io
import json
import logging
import math
import os
import sys

import jsonschema
import numpy as np

from . import constants as K
from . import kam, oracle
from .errors import ConfigError, InvariantViolation, QbnfError
from .families import builtin_frequencies, default_family, generate_commuting_family, preset_note
from .freq import FrequencyMatrix
from .symbol import SymbolSpace, VectorSymbol, norm, symbol_from_json, symbol_to_json

log = logging.getLogger("qbnf")

EXIT_OK, EXIT_NOCONV, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2, 3

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_matrix = {"type": "array", "minItems": 1, "items": {"type": "array", "minItems": 1, "items": _num}}
_atom = {
    "type": "object",
    "properties": {"p_idx": {"type": "array", "items": {"type": "integer"}},
                   "q": {"type": "array", "items": {"type": "integer"}},
                   "re": _num, "im": _num},
    "required": ["p_idx", "q", "re"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "frequencies": {"oneOf": [
            {"type": "string"},
            {"type": "object", "additionalProperties": False, "required": ["matrix"],
             "properties": {"matrix": _matrix, "name": {"type": "string"}}},
        ]},
        "gens": _matrix,
        "perturbation": {"oneOf": [
            {"type": "object", "additionalProperties": False, "required": ["family"],
             "properties": {"family": {
                 "type": "object", "additionalProperties": False,
                 "properties": {"m": {"enum": [1, 2]}, "target_norm": _pos, "rho": _pos,
                                "with_B": {"type": "boolean"}, "b_fraction": {"type": "number", "minimum": 0},
                                "lie_tol": _pos, "violate_commutation": {"type": "number", "minimum": 0}}}}},
            {"type": "object", "additionalProperties": False, "required": ["components"],
             "properties": {"components": {"type": "array", "minItems": 1,
                                           "items": {"type": "array", "items": _atom}}}},
            {"type": "object", "additionalProperties": False, "required": ["file"],
             "properties": {"file": {"type": "string"}}},
            {"type": "object", "additionalProperties": False, "required": ["zero"],
             "properties": {"zero": {"const": True}}},
        ]},
        "kam": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "mode": {"enum": [kam.BRJUNO, kam.DIOPHANTINE]},
                "alpha": _pos, "rho": _pos, "eta": _pos, "C": _pos,
                "hbar": {"type": "number", "minimum": 0, "maximum": 1},
                "max_iter": {"type": "integer", "minimum": 0},
                "lie_tol": _pos, "neumann_tol": _pos, "prune_tol": _pos,
                "drop_tol": {"type": "number", "minimum": 0},
                "target_norm": {"oneOf": [_pos, {"type": "null"}]}, "target_rel": _pos,
                "gamma": {"oneOf": [_pos, {"type": "null"}]},
                "tau": {"oneOf": [{"type": "number", "minimum": 0}, {"type": "null"}]},
                "dio_M_max": _pos, "k": {"type": "integer", "minimum": 0},
                "strict": {"type": "boolean"}, "audit_decomposition": {"type": "boolean"},
                "brjuno_K": {"type": "integer", "minimum": 0},
            },
        },
        "divisors": {
            "type": "object", "additionalProperties": False,
            "properties": {"K": {"type": "integer", "minimum": 0}, "tau": {"type": "number", "minimum": 0},
                           "M_max": _pos},
        },
        "radii": {
            "type": "object", "additionalProperties": False,
            "properties": {"k": {"type": "integer", "minimum": 0}, "alpha": _pos, "eta": _pos, "C": _pos,
                           "norm_V": {"type": "number", "minimum": 0},
                           "grad_Vbar": {"type": "number", "minimum": 0},
                           "K": {"type": "integer", "minimum": 0},
                           "tail_bound": {"type": "number", "minimum": 0},
                           "E": _pos, "lam": _pos, "gamma": _pos, "tau": {"type": "number", "minimum": 0},
                           "underomega_minus": _pos},
        },
        "validation": {
            "type": "object", "additionalProperties": False,
            "properties": {"N": {"type": "integer", "minimum": 1}, "strict": {"type": "boolean"},
                           "interior_radius": {"type": "integer", "minimum": 0},
                           "method": {"enum": ["lapack", "jacobi"]}, "tol": _pos},
        },
        "output": {
            "type": "object", "additionalProperties": False,
            "properties": {"dir": {"type": "string"},
                           "formats": {"type": "array", "items": {"enum": ["csv", "json"]}}},
        },
    },
}


# configuration

def load_config(path, overrides=()):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for key, value in overrides:
        _set_path(cfg, key, value)
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None
    return cfg


def _set_path(cfg, dotted, raw):
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    parts = dotted.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value


def frequencies_from(cfg):
    spec = cfg.get("frequencies", "golden_1x2")
    try:
        if isinstance(spec, str):
            return builtin_frequencies(spec)
        return FrequencyMatrix(spec["matrix"], name=spec.get("name"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _space(cfg, freq):
    gens = cfg.get("gens")
    if gens is None:
        gens = (0.5 * np.eye(freq.m)).tolist()
    prune = cfg.get("kam", {}).get("prune_tol", 1e-16)
    return SymbolSpace(freq, np.array(gens, dtype=float), prune_tol=prune)


def kam_config(cfg):
    try:
        return kam.KamConfig(**cfg.get("kam", {})).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def perturbation_from(cfg, kcfg):
    """Returns ``(V, B_expected or None)``."""
    pert = cfg.get("perturbation", {"family": {}})
    if "family" in pert:
        fam = dict(pert["family"])
        try:
            spec = default_family(hbar=kcfg.hbar, prune_tol=kcfg.prune_tol, **fam)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        # the reference family fixes its own frequencies and generators
        if "frequencies" in cfg and not np.array_equal(frequencies_from(cfg).omega, spec.omega.omega):
            raise ConfigError(f"family with m = {spec.omega.m} uses {spec.omega.name}; frequencies disagree")
        space = spec.W_gen.space
        if "gens" in cfg and not np.array_equal(np.array(cfg["gens"], dtype=float), space.gens):
            raise ConfigError(f"family uses generators {space.gens.tolist()}; gens disagree")
        return generate_commuting_family(spec, check=not fam.get("violate_commutation"))
    freq = frequencies_from(cfg)
    if "zero" in pert:
        return _space(cfg, freq).zero_vector(), None
    if "file" in pert:
        with open(pert["file"]) as fh:
            obj = json.load(fh)
        V = symbol_from_json(obj["V"] if "V" in obj else obj)
        B = symbol_from_json(obj["B_expected"]) if obj.get("B_expected") else None
        return V, B
    space = _space(cfg, freq)
    V = symbol_from_json({"header": {"omega": space.omega.tolist(), "gens": space.gens.tolist()},
                          "components": [[dict(a, im=a.get("im", 0.0)) for a in comp]
                                         for comp in pert["components"]]}, space)
    if len(V) != freq.m:
        raise ConfigError(f"perturbation has {len(V)} components, frequencies have m = {freq.m}")
    return V, None


# output helpers

def fmt(x):
    if x is None:
        return "na"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def records_csv(records):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(kam.IterationRecord.FIELDS)
    for rec in records:
        w.writerow([fmt(v) for v in rec.row()])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=1, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _outdir(cfg, args):
    d = args.out or cfg.get("output", {}).get("dir", "qbnf_out")
    os.makedirs(d, exist_ok=True)
    return d


def _formats(cfg):
    return set(cfg.get("output", {}).get("formats", ["csv", "json"]))


# commands

def cmd_divisors(cfg, args):
    freq = frequencies_from(cfg)
    d = cfg.get("divisors", {})
    Kmax = d.get("K", 3)
    rep = freq.report(Kmax, d.get("tau"), d.get("M_max"))
    out = rep.to_dict()
    out["frequencies"] = freq.omega.tolist()
    out["underomega"] = freq.underomega
    if isinstance(cfg.get("frequencies", "golden_1x2"), str):
        out["note"] = preset_note(cfg.get("frequencies", "golden_1x2"))
    path = os.path.join(_outdir(cfg, args), "divisors.json")
    dump_json(out, path)
    for M, v in rep.M_values:
        print(f"M={fmt(M)} M_M={fmt(v)}")
    if rep.no_small_divisors:
        print("no small divisors (m = l)")
    return EXIT_OK


def cmd_radii(cfg, args):
    freq = frequencies_from(cfg)
    r = dict(cfg.get("radii", {}))
    uo_minus = r.pop("underomega_minus", freq.underomega)
    try:
        rep = K.constants(freq, **r)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = rep.to_dict()
    if rep.gamma is not None and rep.tau is not None:
        max_B, ok = K.brjuno_budget(r.get("norm_V", 0.0), uo_minus, r.get("alpha", 0.5), r.get("eta", 0.5),
                                    r.get("k", 0), rep.B_alpha)
        out["budget"] = {"underomega_minus": uo_minus, "max_B": max_B, "B_alpha_ok": ok}
    dump_json(out, os.path.join(_outdir(cfg, args), "radii.json"))
    print(f"Z_k={fmt(rep.Z_k)} D_k={fmt(rep.D_k)} R_brjuno={fmt(rep.R_brjuno)} R_dio={fmt(rep.R_dio)}")
    return EXIT_OK


def result_dict(res):
    return {
        "config": res.config.to_dict(),
        "converged": bool(res.converged),
        "final_norm": res.final_norm,
        "initial_norm": res.initial_norm,
        "iterations": len(res.records),
        "B_infty": symbol_to_json(res.B_infty),
        "Ws": [symbol_to_json(W) for W in res.Ws],
        "tail_estimate_A": res.tail_estimate_A,
        "first_violation": res.first_violation,
        "decay_fit": kam.decay_fit(res.records),
    }


def cmd_run(cfg, args):
    kcfg = kam_config(cfg)
    V, _ = perturbation_from(cfg, kcfg)
    res = kam.classical_run(V, kcfg) if kcfg.hbar == 0 else kam.run(V, kcfg)
    d = _outdir(cfg, args)
    fm = _formats(cfg)
    if "csv" in fm:
        with open(os.path.join(d, "records.csv"), "w", newline="") as fh:
            fh.write(records_csv(res.records))
    if "json" in fm:
        dump_json(result_dict(res), os.path.join(d, "result.json"))
    print(f"converged={fmt(res.converged)} iterations={len(res.records)} final_norm={fmt(res.final_norm)}")
    if res.first_violation:
        print(f"bound violation: {res.first_violation}")
        return EXIT_INTERNAL
    return EXIT_OK if res.converged else EXIT_NOCONV


def cmd_validate(cfg, args):
    kcfg = kam_config(cfg)
    if kcfg.hbar <= 0:
        raise ConfigError("validation needs hbar > 0")
    V, _ = perturbation_from(cfg, kcfg)
    d = _outdir(cfg, args)
    path = args.result or os.path.join(d, "result.json")
    try:
        with open(path) as fh:
            result = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read result {path}: {exc}") from None
    B = symbol_from_json(result["B_infty"], V.space)
    v = cfg.get("validation", {})
    rep = oracle.spectrum_compare(V, B, v.get("N", 16), kcfg.hbar, v.get("interior_radius"),
                                  strict=v.get("strict", False), method=v.get("method", "lapack"))
    out = rep.to_dict()
    tol = v.get("tol", 1e-8)
    out["tol"] = tol
    out["passed"] = rep.interior_max_err <= tol
    dump_json(out, os.path.join(d, "spectrum_report.json"))
    print(f"interior_max_err={fmt(rep.interior_max_err)} ambiguous={rep.ambiguous} passed={fmt(out['passed'])}")
    return EXIT_OK if out["passed"] else EXIT_NOCONV


def cmd_generate(cfg, args):
    kcfg = kam_config(cfg)
    V, B = perturbation_from(cfg, kcfg)
    obj = {"V": symbol_to_json(V), "B_expected": None if B is None else symbol_to_json(B),
           "norm_V": norm(V, kcfg.rho), "hbar": kcfg.hbar}
    dump_json(obj, os.path.join(_outdir(cfg, args), "family.json"))
    print(f"atoms={V.atom_count()} norm_V={fmt(obj['norm_V'])}")
    return EXIT_OK


COMMANDS = {"divisors": cmd_divisors, "radii": cmd_radii, "run": cmd_run,
            "validate": cmd_validate, "generate": cmd_generate}


def build_parser():
    ap = argparse.ArgumentParser(prog="qbnf", description="Quantum Birkhoff normal forms for commuting families.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="JSON configuration file")
        p.add_argument("-o", "--out", help="output directory (overrides output.dir)")
        p.add_argument("-s", "--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a scalar config entry, e.g. kam.hbar=0.1")
        if name == "validate":
            p.add_argument("--result", help="result.json to validate (default: OUT/result.json)")
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        overrides = []
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not KEY=VALUE")
            overrides.append(tuple(item.split("=", 1)))
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except QbnfError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NOCONV


if __name__ == "__main__":
    sys.exit(main())
