#!/usr/bin/env python3
"""Command-line interface: ``mt uncertainty|zeno|causal``."""

import argparse
import asyncio
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path
from typing import Any, List, Optional

import pandas as pd
from pydantic import ValidationError

from config.settings import Settings, configure_logging, validate_required_settings
from core.errors import ConfigError, DomainError
from core.models import U64_MAX, ExperimentResult, RunManifest
from workflows.experiment_workflow import ExperimentCoordinator

__version__ = "0.1.0"

EXIT_CONFIG = 2
EXIT_DOMAIN = 3

DEFAULT_CONFIGS = {
    "uncertainty": "builtin:qubit-xz",
    "zeno": "builtin:zeno-qubit",
}

logger = logging.getLogger("mt")


def _seed(value: str) -> int:
    seed = int(value)
    if not 0 <= seed <= U64_MAX:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {value}")
    return seed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mt",
        description="Measurement-theory experiments: uncertainty certification, Zeno scans, causal trees.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file (.json/.yaml) or builtin:NAME")
    common.add_argument("--seed", type=_seed, default=0, help="master seed (u64)")
    common.add_argument("--out", help="output file; stdout when omitted")
    common.add_argument("--format", choices=["csv", "json"], default="csv", dest="output_format")
    common.add_argument("-v", "--verbose", action="store_true", help="log at INFO on stderr")

    uncertainty = subparsers.add_parser(
        "uncertainty", parents=[common], help="certify uncertainty inequalities over sampled states"
    )
    uncertainty.add_argument("--samples", type=int, default=1, help="number of system states")

    subparsers.add_parser("zeno", parents=[common], help="survival probability over an N sweep")

    causal = subparsers.add_parser(
        "causal", parents=[common], help="realize a tree file and print the root distribution"
    )
    causal.add_argument("--point", type=int, help="use the point state at this root index")
    return parser


def _csv_table(frame: pd.DataFrame) -> str:
    for column in frame.columns:
        if frame[column].dtype == bool:
            frame[column] = frame[column].map({True: "true", False: "false"})
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format="%.6f", lineterminator="\n")
    return buffer.getvalue()


def render(result: ExperimentResult) -> str:
    """JSON report, or CSV rows followed by a blank line and a one-row summary block."""
    if result.manifest.output_format == "json":
        payload = {
            "manifest": result.manifest.model_dump(mode="json"),
            "rows": result.rows,
            "summary": result.summary,
        }
        return json.dumps(payload, indent=2, default=_json_default) + "\n"

    rows = _csv_table(pd.DataFrame(result.rows, columns=result.columns))
    summary = {
        key: ";".join(str(item) for item in value) if isinstance(value, list) else value
        for key, value in result.summary.items()
    }
    return rows + "\n" + _csv_table(pd.DataFrame([summary]))


def _json_default(value: Any) -> Any:
    if isinstance(value, complex):
        return [value.real, value.imag]
    if hasattr(value, "item"):
        return value.item()
    raise TypeError(f"Cannot serialize {type(value).__name__}")


def write_atomic(text: str, path: str) -> None:
    """Write through a temporary file in the target directory, then rename."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, temporary = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(temporary, target)
    except BaseException:
        Path(temporary).unlink(missing_ok=True)
        raise


def manifest_from_args(args: argparse.Namespace) -> RunManifest:
    config = args.config or DEFAULT_CONFIGS.get(args.subcommand)
    if config is None:
        raise ConfigError(f"mt {args.subcommand} needs --config")
    return RunManifest(
        subcommand=args.subcommand,
        config=config,
        seed=args.seed,
        samples=getattr(args, "samples", 1),
        output_format=args.output_format,
        output_path=args.out,
        point=getattr(args, "point", None),
        version=__version__,
    )


def main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand; returns the process exit code."""
    args = build_parser().parse_args(argv)

    current = Settings()
    if args.verbose:
        current.logging.log_level = "INFO"
    configure_logging(current)
    try:
        validate_required_settings(current)
    except ValueError as e:
        logger.error("Configuration error: %s", e)
        return EXIT_CONFIG

    try:
        manifest = manifest_from_args(args)
        result = asyncio.run(ExperimentCoordinator(manifest, current).run())
    except (ConfigError, ValidationError) as e:
        logger.error("Configuration error: %s", e)
        return EXIT_CONFIG
    except DomainError as e:
        logger.error("Domain error: %s", e)
        return EXIT_DOMAIN

    text = render(result)
    if manifest.output_path:
        write_atomic(text, manifest.output_path)
        logger.info("Wrote %d rows to %s", len(result.rows), manifest.output_path)
    else:
        sys.stdout.write(text)

    if result.exit_code:
        logger.warning("Check failed: %s", result.summary)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
