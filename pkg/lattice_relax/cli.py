#!/usr/bin/env python3
"""
Command line entry point for lattice-relax.

Usage:
    lattice-relax sweep --kind noise --config experiment.toml --out results/
    lattice-relax report --in results/noise_sweep.csv --avg iteration,class --out results/report.csv
    lattice-relax plot --in results/noise_sweep.csv --out results/plots/
"""

import argparse
import logging
import sys
from typing import List, Optional

from lattice_relax.config import ConfigError, load_config
from lattice_relax.experiment import NOISE, SAMPLES, read_results, run_sweep
from lattice_relax.plots import emit_plots
from lattice_relax.report import DIMENSIONS, significance_report, write_report
from lattice_relax.types import InvalidInputError

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'


def parse_dims(text: str) -> List[str]:
    """Parse a comma-separated list of dimensions to average over."""
    dims = [part.strip() for part in text.split(",") if part.strip()]
    unknown = [d for d in dims if d not in DIMENSIONS]
    if unknown:
        raise argparse.ArgumentTypeError(f"Unknown dimension(s) {unknown}; choose from {list(DIMENSIONS)}")
    return dims


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Recurrent refinement of segmentation belief maps")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    commands = parser.add_subparsers(dest="command", required=True)

    sweep = commands.add_parser("sweep", help="Run a noise or sample-size sweep")
    sweep.add_argument("--kind", required=True, choices=[NOISE, SAMPLES], help="Which sweep to run")
    sweep.add_argument("--config", help="TOML config file (default: built-in defaults)")
    sweep.add_argument("--out", required=True, help="Output directory for <kind>_sweep.csv")
    sweep.add_argument("--threads", type=int, help="Worker processes (overrides the config)")
    sweep.add_argument("--seed", type=int, help="Dataset seed (overrides the config)")
    sweep.add_argument("--paper-literal-metrics", dest="literal_metrics", action="store_true",
                       help="Report precision and recall as hits divided by misses")

    report = commands.add_parser("report", help="Welch significance table from sweep results")
    report.add_argument("--in", dest="input", required=True, help="Sweep results CSV")
    report.add_argument("--avg", type=parse_dims, default=[],
                        help=f"Comma-separated dimensions to average over, from {','.join(DIMENSIONS)}")
    report.add_argument("--out", required=True, help="Report CSV path")

    plot = commands.add_parser("plot", help="SVG bar charts from sweep results")
    plot.add_argument("--in", dest="input", required=True, help="Sweep results CSV")
    plot.add_argument("--config", help="TOML config file for colors and plotted metric")
    plot.add_argument("--out", required=True, help="Output directory")
    return parser


def command_sweep(args: argparse.Namespace) -> None:
    cfg = load_config(args.config).with_overrides(
        seed=args.seed,
        threads=args.threads,
        literal_metrics=True if args.literal_metrics else None,
    )
    if cfg.sweep.literal_metrics:
        logger.warning("Precision and recall use the unbounded hits-over-misses form")
    rows = run_sweep(cfg, args.kind, args.out)
    logger.info(f"Sweep '{args.kind}' finished with {len(rows)} rows")


def command_report(args: argparse.Namespace) -> None:
    rows = read_results(args.input)
    report = significance_report(rows, args.avg)
    write_report(report, args.out)


def command_plot(args: argparse.Namespace) -> None:
    cfg = load_config(args.config)
    rows = read_results(args.input)
    written = emit_plots(rows, args.out, colors=cfg.plot.colors, metric=cfg.plot.metric)
    logger.info(f"Wrote {len(written)} file(s) to {args.out}")


COMMANDS = {"sweep": command_sweep, "report": command_report, "plot": command_plot}


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run the subcommand and return the exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)
    try:
        COMMANDS[args.command](args)
    except (ConfigError, InvalidInputError, FileNotFoundError) as e:
        logger.error(f"Application failed: {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
