"""Command line entry point: ``gasketlab <kind> [options]`` or ``gasketlab run --all``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import jsonschema

from . import experiments as ex
from .io import SCHEMA_VERSION, write_json, write_result
from .plotting import emit_plot_data

log = logging.getLogger("gasketlab")

EXIT_OK, EXIT_INVARIANT, EXIT_USAGE = 0, 1, 2
MAX_DEPTH = 12

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": list(ex.KINDS)},
        "dimension": {"type": "integer", "minimum": 2},
        "levels": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1},
        "depth_min": {"type": "integer", "minimum": 0},
        "depth_max": {"type": "integer", "minimum": 0, "maximum": MAX_DEPTH},
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number"}},
        "options": {"type": "object"},
    },
    "if": {"properties": {"kind": {"const": "walk"}}},
    "then": {"required": ["kind", "seed"]},
}


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: line {err.lineno}, column {err.colno}: {err.msg}") from None
    validate_config(data, source=str(path), text=text)
    return data


def _line_of(text: str, key) -> int | None:
    if text is None or not isinstance(key, str):
        return None
    for i, line in enumerate(text.splitlines(), 1):
        if f'"{key}"' in line:
            return i
    return None


def validate_config(data: dict, source: str = "<config>", text: str | None = None) -> None:
    v = jsonschema.Draft7Validator(CONFIG_SCHEMA)
    errors = sorted(v.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        field = "/".join(str(p) for p in e.absolute_path) or "<root>"
        line = _line_of(text, e.absolute_path[0] if e.absolute_path else None)
        where = f"line {line}, " if line else ""
        raise ConfigError(f"{source}: {where}field {field}: {e.message}")
    dmin, dmax = data.get("depth_min", 0), data.get("depth_max", 0)
    if "depth_min" in data and "depth_max" in data and dmin > dmax:
        raise ConfigError(f"{source}: field depth_min: {dmin} exceeds depth_max {dmax}")


def make_config(kind: str, data: dict | None = None, depth=None, seed=None) -> ex.ExperimentConfig:
    base = dict(ex.DEFAULT_SUITE.get(kind, {}))
    base.update({k: v for k, v in (data or {}).items() if k not in ("kind", "out")})
    if depth is not None:
        base["depth_max"] = depth
        base["depth_min"] = min(base.get("depth_min", 1), depth)
    if seed is not None:
        base["seed"] = seed
    if "levels" in base:
        base["levels"] = tuple(base["levels"])
    return ex.ExperimentConfig(kind=kind, **base)


def run_one(cfg: ex.ExperimentConfig, out: Path, plots: bool = True) -> ex.ExperimentResult:
    t0 = time.perf_counter()
    result = ex.run(cfg)
    result.timings["seconds"] = time.perf_counter() - t0
    result.summary["config"] = {
        "dimension": cfg.dimension, "levels": list(cfg.levels), "depth_min": cfg.depth_min,
        "depth_max": cfg.depth_max, "seed": cfg.seed, "tolerances": cfg.tolerances,
    }
    write_result(result, out)
    if plots:
        emit_plot_data(result, out)
    status = "PASS" if result.passed else "FAIL"
    print(f"[{status}] {cfg.kind}: " + ", ".join(f"{k}={'ok' if v else 'FAILED'}" for k, v in result.checks.items()))
    return result


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gasketlab", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="JSON experiment config")
        sp.add_argument("--depth", type=int, help="maximal depth (overrides the config)")
        sp.add_argument("--seed", type=int, help="random seed (overrides the config)")
        sp.add_argument("--out", type=Path, default=None, help="output directory (default: results)")
        sp.add_argument("--no-plots", action="store_true", help="skip PNG rendering")

    for kind in ex.KINDS:
        sp = sub.add_parser(kind, help=f"run the {kind} experiment")
        common(sp)
        sp.add_argument("--dimension", type=int)
        sp.add_argument("--levels", type=int, nargs="+")
    sp = sub.add_parser("run", help="run a config file or the full default suite")
    common(sp)
    sp.add_argument("--all", action="store_true", help="run every experiment of the default suite")
    sub.add_parser("schema", help="print the config JSON schema")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "schema":
        print(json.dumps(CONFIG_SCHEMA, indent=2))
        return EXIT_OK
    try:
        data = load_config(args.config) if args.config else None
        out = args.out or Path((data or {}).get("out", "results"))
        if args.command == "run":
            if args.all:
                kinds = list(ex.KINDS)
                configs = [make_config(k, None, args.depth, args.seed) for k in kinds]
            elif data is not None:
                configs = [make_config(data["kind"], data, args.depth, args.seed)]
            else:
                parser.error("run needs --config or --all")
        else:
            extra = dict(data or {})
            if data is not None and data["kind"] != args.command:
                raise ConfigError(f"config kind {data['kind']!r} does not match subcommand {args.command!r}")
            if args.dimension is not None:
                extra["dimension"] = args.dimension
            if args.levels is not None:
                extra["levels"] = args.levels
            merged = {**extra, "kind": args.command}
            merged.setdefault("seed", args.seed if args.seed is not None else 0)
            validate_config(merged, source="command line")
            configs = [make_config(args.command, extra, args.depth, args.seed)]
        for cfg in configs:
            if cfg.depth_max > MAX_DEPTH:
                raise ConfigError(f"depth {cfg.depth_max} exceeds the cap of {MAX_DEPTH}")
            if cfg.depth_min > cfg.depth_max:
                raise ConfigError(f"depth_min {cfg.depth_min} exceeds depth_max {cfg.depth_max}")
            _ = cfg.spec  # raises on bad dimension or levels
    except (ConfigError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_USAGE
    results = []
    try:
        for cfg in configs:
            results.append(run_one(cfg, out, plots=not args.no_plots))
    except (ResourceWarning, OverflowError, MemoryError) as err:
        print(f"resource cap exceeded: {err}", file=sys.stderr)
        return EXIT_USAGE
    if len(results) > 1:
        write_json(out / "suite.json", {
            "schema_version": SCHEMA_VERSION,
            "passed": all(r.passed for r in results),
            "experiments": {r.kind: {"passed": r.passed, "checks": r.checks} for r in results},
        })
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
