"""Command-line front end.

Usage::

    cvprivacy spectrum --config tree.yaml --out spectrum.csv
    cvprivacy privacy-sweep --format json
    cvprivacy protocol-sim --seed 7 --threads 2

Without ``--config`` each subcommand runs a built-in default scenario.
Exit codes: 0 success, 2 configuration error, 3 numerical invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from importlib.metadata import PackageNotFoundError, version

from .config import default_config, load_config
from .errors import ConfigError, InvariantViolation
from .sweeps import COMMANDS

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3

log = logging.getLogger("cvprivacy")


def code_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def format_value(value) -> str:
    """Locale-independent CSV cell: 12 significant digits, empty for undefined."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return "%.12g" % value
    try:
        return "%.12g" % float(value)
    except (TypeError, ValueError):
        return str(value)


def _columns(rows: list) -> list:
    cols: list = []
    for row in rows:
        for key in row:
            if key not in cols:
                cols.append(key)
    return cols


def to_csv(rows: list, config_hash: str) -> str:
    cols = ["config_hash"] + [c for c in _columns(rows) if c != "config_hash"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        full = dict(row, config_hash=config_hash)
        writer.writerow([format_value(full.get(c)) for c in cols])
    return buf.getvalue()


def _jsonable(value):
    if isinstance(value, float) and math.isnan(value):
        return None
    if hasattr(value, "item"):
        return value.item()
    return value


def to_json(rows: list, config_hash: str, command: str, timings: list, seed: int) -> str:
    doc = {
        "command": command,
        "config_hash": config_hash,
        "code_version": code_version(),
        "seed": seed,
        "rows": [{k: _jsonable(v) for k, v in dict(r, config_hash=config_hash).items()} for r in rows],
        "timing_seconds": timings,
    }
    return json.dumps(doc, indent=2, sort_keys=False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvprivacy",
        description="Privacy diagnostics for phase estimation on Gaussian sensor networks.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "spectrum": "QFIm eigenvalues of the splitter-tree probe",
        "privacy-sweep": "privacy measure over squeezing, loss, displacement and depth",
        "compare-states": "tree vs cluster vs product privacy and the optimal cluster coupling",
        "two-mode": "two-party lossy probe: QFIm structure, privacy and optimal homodyne",
        "protocol-sim": "Monte-Carlo homodyne estimation against the Fisher bound",
        "oracle-check": "phase-space QFIm against the truncated Fock-space oracle",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="YAML scenario file (defaults to a built-in scenario)")
        p.add_argument("--out", help="output path (default: stdout or the config's output)")
        p.add_argument("--seed", type=int, help="override the config seed (unsigned 64-bit)")
        p.add_argument("--threads", type=int, default=1, help="worker threads across grid points")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config) if args.config else default_config(args.command)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg = cfg.with_seed(args.seed)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    t0 = time.perf_counter()
    try:
        rows, timings = COMMANDS[args.command](cfg, threads=args.threads)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ValueError, KeyError) as exc:
        # bad parameter combinations surface here, e.g. a cluster edge list for the wrong mode count
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("%s: %d rows in %.2f s", args.command, len(rows), time.perf_counter() - t0)
    if args.format == "csv":
        text = to_csv(rows, cfg.hash)
    else:
        text = to_json(rows, cfg.hash, args.command, timings, cfg.seed)
    out = args.out or cfg.output
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
