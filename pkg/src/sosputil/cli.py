"""
Command line entry point. One subcommand per experiment kind; every subcommand's flags
are generated from the kind's parameter schema, so the CLI, JSON config files and
the summary echo share one definition.

Precedence, later wins: kind defaults, --config file, flags, the SEED environment variable.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from .errors import ConfigError, SospLibError
from .harness import ExperimentSpec, SospExperiments, error_document, run
from .logger import logs, set_verbosity

SPEC_KEYS = ("seed", "output_path", "record_wall_time", "workers")


def _flag_names(name: str, schema: Dict[str, Any]) -> list:
    names = [f"--{name.replace('_', '-')}"]
    for extra in schema.get("flags", []):
        if extra not in names:
            names.append(extra)
    return names


def _add_schema_arguments(parser: argparse.ArgumentParser, properties: Dict[str, Dict[str, Any]]) -> None:
    """Numbers are read as strings so they may be expressions; the converters do the rest."""
    for name, schema in properties.items():
        default = schema.get("default")
        help_text = schema.get("description", "")
        if default is not None:
            help_text = f"{help_text} (default: {default})".strip()
        kwargs: Dict[str, Any] = {"dest": name, "default": None, "help": help_text}
        kind = schema.get("type")
        if kind == "boolean":
            kwargs["action"] = argparse.BooleanOptionalAction
        elif kind == "array":
            kwargs["nargs"] = "*"
            kwargs["metavar"] = "V"
        elif "enum" in schema:
            kwargs["choices"] = schema["enum"]
        else:
            kwargs["metavar"] = "X" if kind in ("number", "integer") else "S"
        parser.add_argument(*_flag_names(name, schema), **kwargs)


def build_arg_parser(library: Optional[SospExperiments] = None) -> argparse.ArgumentParser:
    library = library or SospExperiments()
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file with params (or a full spec with kind/params/seed)")
    common.add_argument("--seed", type=int, default=None, help="master seed (the SEED variable overrides it)")
    common.add_argument("--output", "-o", default=None, help="artifact prefix; writes <out>.csv/.summary.json/.meta.json")
    common.add_argument("--workers", type=int, default=None, help="threads for trial-level parallelism")
    common.add_argument("--wall-time", action="store_true", help="record wall time in the summary")
    common.add_argument("--verbose", "-v", action="count", default=0, help="-v for INFO, -vv for DEBUG")

    parser = argparse.ArgumentParser(prog="sosputil", description="Second-order stationary point experiments.")
    subparsers = parser.add_subparsers(dest="kind", required=True, metavar="KIND")
    subparsers.add_parser("schema", help="print the parameter schema of every experiment kind")
    for kind, command in library.KindDict.items():
        if not (command.on_cli and command.enabled):
            continue
        sub = subparsers.add_parser(
            kind,
            aliases=command.aliases,
            parents=[common],
            help=command.kind_schema["description"],
            description=command.kind_schema["description"],
        )
        _add_schema_arguments(sub, command.properties)
    return parser


def _load_config(path: Path) -> Dict[str, Any]:
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError("config", str(path), f"a readable JSON file ({e})") from e
    if not isinstance(doc, dict):
        raise ConfigError("config", str(path), "a JSON object")
    return doc


def spec_from_args(args: argparse.Namespace, library: SospExperiments, environ=os.environ) -> ExperimentSpec:
    kind = library.resolve_kind(args.kind)
    config: Dict[str, Any] = _load_config(args.config) if args.config else {}
    if "params" in config:
        if config.get("kind") not in (None, kind) and library.resolve_kind(config["kind"]) != kind:
            raise ConfigError("config", config.get("kind"), f"kind '{kind}'")
        params = dict(config["params"])
        settings = {k: config[k] for k in SPEC_KEYS if k in config}
    else:
        params = {k: v for k, v in config.items() if k not in SPEC_KEYS and k != "kind"}
        settings = {k: config[k] for k in SPEC_KEYS if k in config}
    for name in library.KindDict[kind].properties:
        value = getattr(args, name, None)
        if value is not None:
            params[name] = value
    if args.seed is not None:
        settings["seed"] = args.seed
    if environ.get("SEED"):
        try:
            settings["seed"] = int(environ["SEED"])
        except ValueError as e:
            raise ConfigError("SEED", environ["SEED"], "an integer") from e
    if args.output is not None:
        settings["output_path"] = args.output
    if args.workers is not None:
        settings["workers"] = args.workers
    if args.wall_time:
        settings["record_wall_time"] = True
    settings.setdefault("output_path", kind)
    return ExperimentSpec(kind=kind, params=params, **settings)


def main(argv: Optional[Sequence[str]] = None) -> int:
    library = SospExperiments()
    parser = build_arg_parser(library)
    args = parser.parse_args(argv)
    if args.kind == "schema":
        sys.stdout.write(json.dumps(library.get_schema(), indent=2) + "\n")
        return 0
    if args.verbose:
        set_verbosity(logging.INFO if args.verbose == 1 else logging.DEBUG)
    try:
        spec = spec_from_args(args, library)
    except SospLibError as e:
        logs.error("bad experiment spec: %s", e)
        sys.stdout.write(json.dumps(error_document(e, args.kind), sort_keys=True) + "\n")
        return 2
    return run(spec, library)


if __name__ == "__main__":
    sys.exit(main())
