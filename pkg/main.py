"""
Command-line entry point for the retinal laser heating experiments.

Usage:
    python main.py <subcommand> [--config experiment.toml] [--out-dir out] [--threads 4] ...
"""
import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from dotenv import load_dotenv
from pydantic import ValidationError

load_dotenv()

from config import Config  # noqa: E402
from retina.experiments import (  # noqa: E402
    PIPELINES,
    ConfigError,
    ExperimentConfig,
    RunContext,
    dump_config,
    parse_config,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


# Configure logging
def setup_logging(level: Optional[str] = None):
    """Configure application-wide logging"""
    # Get log level from the argument or environment variable, default to INFO
    log_level_name = (level or os.environ.get('LOG_LEVEL', 'INFO')).upper()
    log_level = getattr(logging, log_level_name, logging.INFO)

    # Create formatter
    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    # Configure root logger
    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)

    # Remove existing handlers
    root_logger.handlers.clear()

    # Add console handler
    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(log_level)
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    # Log startup message
    root_logger.info(f"Logging initialized at {log_level_name} level")

    return root_logger


# Initialize logging
logger = setup_logging()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='retina-pmor',
        description='Heat model, absorption estimation, parametric reduction and MPC for retinal laser treatment')
    parser.add_argument('command', choices=sorted(PIPELINES), help='experiment to run')
    parser.add_argument('--config', type=Path, help='TOML experiment configuration (defaults if omitted)')
    parser.add_argument('--out-dir', type=Path, help='output directory')
    parser.add_argument('--threads', type=int, help='worker threads (default RETINA_PMOR_THREADS or 1)')
    parser.add_argument('--seed', type=int, help='overrides estimation.seed')
    parser.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'])
    parser.add_argument('--emit-plot-data', action='store_true', help='also write plot-ready CSVs')
    parser.add_argument('--mode', choices=['two-param', 'rpe-only'], help='overrides estimation.mode')
    parser.add_argument('--alpha-ch-fixed', type=float, help='choroid prefactor held in rpe-only mode')
    parser.add_argument('--p-level', type=float, help='confidence level of the intervals')
    parser.add_argument('--data', type=Path, help='measurement CSV (t, u, y_meas) for estimate')
    return parser


def _context(args: argparse.Namespace) -> RunContext:
    config = parse_config(args.config) if args.config else ExperimentConfig()
    if args.p_level is not None and not 0 < args.p_level < 1:
        raise ConfigError(f"--p-level must lie in (0, 1), got {args.p_level}")
    if args.data is not None and not args.data.is_file():
        raise ConfigError(f"measurement file not found: {args.data}")
    threads = args.threads if args.threads is not None else Config.threads()
    if threads < 1:
        raise ConfigError(f"--threads must be at least 1, got {threads}")
    out_dir = args.out_dir or Path(Config.OUT_DIR or config.output_dir)
    return RunContext(config=config, out_dir=out_dir, threads=threads, seed=args.seed,
                      emit_plot_data=args.emit_plot_data, mode=args.mode, alpha_ch_fixed=args.alpha_ch_fixed,
                      p_level=args.p_level, data=args.data)


def run_command(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, run one pipeline and map failures to exit codes.

    Returns:
        int: 0 on success, 1 on configuration errors, 2 on numerical failures
    """
    args = build_parser().parse_args(argv)
    if args.log_level:
        setup_logging(args.log_level)
    elif not Config.validate_runtime_config():
        return EXIT_CONFIG

    try:
        ctx = _context(args)
        ctx.out_dir.mkdir(parents=True, exist_ok=True)
        dump_config(ctx.config, ctx.out_dir)
    except (ConfigError, ValidationError) as e:
        logger.error(f"Configuration error: {e}")
        print(f"❌ {e}")
        return EXIT_CONFIG

    logger.info(f"Running {args.command} into {ctx.out_dir}")
    try:
        summary = PIPELINES[args.command](ctx)
    except (ConfigError, ValidationError) as e:
        logger.error(f"Configuration error in {args.command}: {e}")
        print(f"❌ {e}")
        return EXIT_CONFIG
    except (RuntimeError, ValueError, np.linalg.LinAlgError) as e:
        logger.exception(f"Numerical failure in {args.command}")
        print(f"❌ {args.command}: {type(e).__name__}: {e}")
        return EXIT_NUMERICAL

    print(f"✓ {summary}")
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(run_command())
