"""Command-line entry point.

    sisid run CONFIG [--outputs DIR]
    sisid validate CONFIG
    sisid sweep CONFIG --param NAME --values V1,V2,...

CONFIG is a flat key-value file (see sisid.config) or the name of a
bundled scenario (fig1, fig2, fig3_noisefree, fig3_noisy). The SISID_OUTPUT_ROOT
environment variable, when set, is prepended to every relative output
directory.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import (
    ConfigError,
    bundled_config_path,
    config_from_mapping,
    load_config,
    load_config_mapping,
)
from .harness import run_experiment


def _resolve_config_path(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    return bundled_config_path(name)


def _resolve_output_dir(outputs: str) -> Path:
    root = os.environ.get("SISID_OUTPUT_ROOT")
    path = Path(outputs)
    if root and not path.is_absolute():
        return Path(root) / path
    return path


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_config(_resolve_config_path(args.config))
    out = _resolve_output_dir(args.outputs if args.outputs else config.outputs)
    result = run_experiment(config, output_dir=out)
    for err in result.manifest["errors"]:
        print(
            f"warning: {err['estimator']} hit a numerical error at step "
            f"{err['step']}: {err['message']}",
            file=sys.stderr,
        )
    print(f"wrote {len(result.manifest['files'])} trace file(s) to {result.output_dir}")
    return result.status


def _cmd_validate(args: argparse.Namespace) -> int:
    config = load_config(_resolve_config_path(args.config))
    print(f"ok: {args.config} ({len(config.estimators)} estimator(s), {config.steps} steps)")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    mapping = load_config_mapping(_resolve_config_path(args.config))
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values: expected at least one value")
    status = 0
    for value in values:
        variant = dict(mapping)
        variant[args.param] = value
        config = config_from_mapping(variant)
        out = _resolve_output_dir(config.outputs) / f"{args.param.replace('.', '_')}={value}"
        result = run_experiment(config, output_dir=out)
        print(f"{args.param}={value}: status {result.status} -> {out}")
        status = max(status, result.status)
    return status


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="sisid", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--outputs", default=None, help="override the output directory")
    p_run.set_defaults(fn=_cmd_run)

    p_val = sub.add_parser("validate", help="check a config file without running it")
    p_val.add_argument("config")
    p_val.set_defaults(fn=_cmd_validate)

    p_sweep = sub.add_parser("sweep", help="run the config once per parameter value")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--param", required=True, help="config key to vary (e.g. grls.alpha)")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.set_defaults(fn=_cmd_sweep)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
