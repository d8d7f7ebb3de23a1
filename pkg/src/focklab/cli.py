"""Batch experiment runner.

Subcommands: ``run <config>``, ``list``, ``validate <config>``.  Configs are
JSON with an embedded schema version; unknown keys are rejected before any
computation.  Exit codes: 0 success, 2 configuration errors, 3 numerical
failures (the failing solve report is serialized to failure.json).  The
``FOCKLAB_OUTDIR`` environment variable overrides the configured output
directory; a ``--output`` flag overrides both.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import jsonschema

from .experiments import EXPERIMENTS, run_experiment
from .linalg import EigenError, SolveError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_NUMBER_MATRIX = {
    "type": "array",
    "items": {"type": "array", "items": {"type": "number"}},
}

_RE_IM_MATRIX = {
    "type": "object",
    "properties": {"re": _NUMBER_MATRIX, "im": _NUMBER_MATRIX},
    "required": ["re"],
    "additionalProperties": False,
}

_FORM_FACTOR = {
    "type": "object",
    "properties": {
        "type": {"enum": ["power"]},
        "alpha": {"type": "number"},
        "label": {"type": "string"},
    },
    "additionalProperties": False,
}

_Z_POINTS = {
    "type": "array",
    "minItems": 1,
    "items": {
        "type": "array",
        "items": {"type": "number"},
        "minItems": 2,
        "maxItems": 2,
    },
}

_NUMBER_LIST = {"type": "array", "items": {"type": "number"}, "minItems": 1}

PARAMS_SCHEMAS = {
    "spectrum": {
        "type": "object",
        "properties": {
            "omega_e": {"type": "number"},
            "omega_g": {"type": "number"},
            "lam": {"type": "number"},
            "form_factor": _FORM_FACTOR,
            "count": {"type": "integer", "minimum": 1},
        },
        "required": ["omega_e", "lam", "form_factor"],
        "additionalProperties": False,
    },
    "resolvent-check": {
        "type": "object",
        "properties": {
            "omega_e": {"type": "number"},
            "omega_g": {"type": "number"},
            "lam": {"type": "number"},
            "form_factor": _FORM_FACTOR,
            "z_points": _Z_POINTS,
        },
        "required": ["omega_e", "lam", "form_factor", "z_points"],
        "additionalProperties": False,
    },
    "renorm-sweep": {
        "type": "object",
        "properties": {
            "rule": _FORM_FACTOR,
            "cutoffs": _NUMBER_LIST,
            "lam": {"type": "number"},
            "omega_e": {"type": "number"},
            "dressed_omega_e": {"type": "number"},
            "counterterm": {"type": "boolean"},
            "z": {"type": "array", "items": {"type": "number"},
                  "minItems": 2, "maxItems": 2},
            "iterations": {"type": "integer", "minimum": 1},
            "probes": {"type": "integer", "minimum": 1},
            "lambda_probe": _NUMBER_LIST,
        },
        "required": ["rule", "cutoffs", "lam", "omega_e"],
        "additionalProperties": False,
    },
    "table1": {
        "type": "object",
        "properties": {
            "witnesses": {"type": "array", "items": _FORM_FACTOR, "minItems": 1},
            "cutoffs": _NUMBER_LIST,
            "lam": {"type": "number"},
            "omega_e": {"type": "number"},
            "dressed_omega_e": {"type": "number"},
        },
        "required": ["witnesses", "cutoffs", "lam", "omega_e", "dressed_omega_e"],
        "additionalProperties": False,
    },
    "gsb": {
        "type": "object",
        "properties": {
            "dim_e": {"type": "integer", "minimum": 1},
            "dim_g": {"type": "integer", "minimum": 1},
            "E_e": _RE_IM_MATRIX,
            "E_g": _RE_IM_MATRIX,
            "channels": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "object",
                    "properties": {
                        "sigma_plus": _RE_IM_MATRIX,
                        "form_factor": _FORM_FACTOR,
                    },
                    "required": ["sigma_plus", "form_factor"],
                    "additionalProperties": False,
                },
            },
            "lam": {"type": "number"},
            "z_points": _Z_POINTS,
        },
        "required": ["dim_e", "dim_g", "E_e", "E_g", "channels", "lam", "z_points"],
        "additionalProperties": False,
    },
    "multiatom": {
        "type": "object",
        "properties": {
            "n_atoms": {"type": "integer", "minimum": 1},
            "omega_e": _NUMBER_LIST,
            "omega_g": _NUMBER_LIST,
            "form_factors": {"type": "array", "items": _FORM_FACTOR, "minItems": 1},
            "lam": {"type": "number"},
            "spin_spin": {
                "type": "object",
                "patternProperties": {r"^\d+$": _RE_IM_MATRIX},
                "additionalProperties": False,
            },
            "z_points": _Z_POINTS,
        },
        "required": ["n_atoms", "omega_e", "omega_g", "form_factors", "lam", "z_points"],
        "additionalProperties": False,
    },
    "decay-class": {
        "type": "object",
        "properties": {
            "form_factor": _FORM_FACTOR,
            "s": {"type": "number", "exclusiveMinimum": 1, "maximum": 2},
            "n_max": {"type": "integer", "minimum": 8},
        },
        "required": ["form_factor", "s", "n_max"],
        "additionalProperties": False,
    },
}

TOP_SCHEMA = {
    "type": "object",
    "properties": {
        "schema": {"const": 1},
        "experiment": {"enum": sorted(PARAMS_SCHEMAS)},
        "seed": {"type": "integer", "minimum": 0},
        "workers": {"type": "integer", "minimum": 1},
        "output_dir": {"type": "string"},
        "grid": {
            "type": "object",
            "properties": {
                "k_min": {"type": "number"},
                "k_max": {"type": "number"},
                "count": {"type": "integer", "minimum": 1},
                "dispersion": {"enum": ["linear", "quadratic", "massive"]},
                "quadrature": {"enum": ["midpoint", "trapezoid"]},
                "spacing": {"enum": ["linear", "log"]},
                "mass": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["k_min", "k_max", "count"],
            "additionalProperties": False,
        },
        "basis": {
            "type": "object",
            "properties": {
                "n_max": {"type": "integer", "minimum": 0},
                "cap": {"type": "integer", "minimum": 1},
            },
            "required": ["n_max"],
            "additionalProperties": False,
        },
        "params": {"type": "object"},
    },
    "required": ["schema", "experiment", "grid", "params"],
    "additionalProperties": False,
}

_NEEDS_BASIS = {"spectrum", "resolvent-check", "renorm-sweep", "table1",
                "gsb", "multiatom"}


class ConfigError(ValueError):
    pass


def load_and_validate(path: str):
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        config = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(config, TOP_SCHEMA)
        jsonschema.validate(config["params"], PARAMS_SCHEMAS[config["experiment"]])
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config schema violation: {exc.message}") from exc
    if config["experiment"] in _NEEDS_BASIS and "basis" not in config:
        raise ConfigError(f"experiment {config['experiment']!r} requires a basis block")
    return config, raw


def _resolve_outdir(config, cli_override):
    if cli_override:
        return Path(cli_override)
    env = os.environ.get("FOCKLAB_OUTDIR")
    if env:
        return Path(env)
    return Path(config.get("output_dir", "."))


def cmd_run(args) -> int:
    try:
        config, raw = load_and_validate(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outdir = _resolve_outdir(config, args.output)
    try:
        run_experiment(config, outdir, raw)
    except (SolveError, EigenError) as exc:
        payload = {"error": str(exc)}
        report = getattr(exc, "report", None)
        if report is not None:
            payload["report"] = report.as_dict()
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / "failure.json", "w", encoding="ascii") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote artifacts to {outdir}")
    return EXIT_OK


def cmd_list(_args) -> int:
    for name in sorted(EXPERIMENTS):
        print(f"{name:16s} {EXPERIMENTS[name][1]}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        config, _ = load_and_validate(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"ok: {config['experiment']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="focklab",
        description="Batch experiments on truncated Fock-space spin-boson models.")
    sub = parser.add_subparsers(dest="command")
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--output", default=None, help="override output directory")
    sub.add_parser("list", help="list available experiments")
    p_val = sub.add_parser("validate", help="validate a config without running")
    p_val.add_argument("config")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; normalize and re-raise as return code
        return int(exc.code) if exc.code is not None else EXIT_CONFIG
    if args.command == "run":
        return cmd_run(args)
    if args.command == "list":
        return cmd_list(args)
    if args.command == "validate":
        return cmd_validate(args)
    parser.print_usage(sys.stderr)
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
