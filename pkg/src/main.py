#!/usr/bin/env python3
"""
Command-line entry point for the URLLC massive MIMO downlink simulator
"""
import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv
from tqdm import tqdm

# Add path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src import __version__
from src.core.config import (
    ConfigError,
    LoadedConfig,
    RunOptions,
    SweepAxes,
    apply_overrides,
    load_config,
    save_config,
)
from src.harness.reporting import build_manifest, emit_results
from src.harness.result_cache import ResultCache
from src.harness.simulation import SweepSpec, run_sweep
from src.harness.validation import run_validation

logger = logging.getLogger(__name__)

DEFAULT_OUT_DIR = "results"

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def parse_int_axis(text: str) -> List[int]:
    """'2..10' (inclusive range) or '1,2'"""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = (int(part) for part in text.split("..", 1))
            if hi < lo:
                raise argparse.ArgumentTypeError(f"empty range {text!r}")
            return list(range(lo, hi + 1))
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'a..b' or a comma list, got {text!r}")


def parse_str_axis(text: str) -> List[str]:
    return [part.strip().lower() for part in text.split(",") if part.strip()]


def _add_run_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON config file (default: config.json at the project root)")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="master seed")
    parser.add_argument("--deployments", type=int, default=None,
                        help="deployments per (K, f) cell")
    parser.add_argument("--workers", type=int, default=None, help="worker processes")
    parser.add_argument("--cache", nargs="?", const="", default=None, metavar="PATH",
                        help="reuse finished cells from a SQLite cache")
    parser.add_argument("--no-progress", action="store_true", help="hide the progress bar")
    parser.add_argument("--save-config", type=Path, default=None, metavar="PATH",
                        help="write the resolved configuration to PATH and exit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="urllc-mimo-sim",
        description="Monte-Carlo simulator for URLLC in single-cell massive MIMO downlink",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="run the sweep described by the config")
    _add_run_arguments(simulate)

    sweep = sub.add_parser("sweep", help="run a sweep with axes given on the command line")
    _add_run_arguments(sweep)
    sweep.add_argument("--k", type=parse_int_axis, default=None, help="K values, e.g. 2..10")
    sweep.add_argument("--f", type=parse_int_axis, default=None, help="f values, e.g. 1,2")
    sweep.add_argument("--precoder", type=parse_str_axis, default=None, help="e.g. mr,mmse")
    sweep.add_argument("--strategy", type=parse_str_axis, default=None,
                       help="e.g. equal,maxmin,maxprod")

    validate = sub.add_parser("validate", help="run the oracle checks")
    validate.add_argument("--quick", action="store_true", help="smaller instance counts")
    return parser


def setup_logging(verbose: bool):
    level_name = "DEBUG" if verbose else os.getenv("URLLC_SIM_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    # Per-instance solver output is only useful when debugging
    if not verbose:
        logging.getLogger('src.power_alloc.base').setLevel(logging.WARNING)


def _env_int(name: str) -> Optional[int]:
    value = os.getenv(name)
    if value is None or value == "":
        return None
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {value!r}")


def resolve_sweep(args: argparse.Namespace, loaded: LoadedConfig) -> SweepSpec:
    """Config file, then environment, then command line"""
    system, _ = apply_overrides(loaded.system, seed=_env_int("URLLC_SIM_SEED"))
    system, changed = apply_overrides(system, seed=args.seed, n_deployments=args.deployments)
    if changed:
        logger.info(f"Command-line overrides: {', '.join(changed)}")

    axes = loaded.sweep
    if args.command == "sweep":
        axes = SweepAxes(
            K_values=args.k or axes.K_values,
            f_values=args.f or axes.f_values,
            precoders=args.precoder or axes.precoders,
            strategies=args.strategy or axes.strategies,
        )
    elif not axes.K_values and not axes.f_values:
        # without a sweep section, simulate runs the configured cell only
        axes = SweepAxes(K_values=[system.K], f_values=[system.f],
                         precoders=axes.precoders, strategies=axes.strategies)
    return SweepSpec.from_axes(system, axes)


def run_simulation(args: argparse.Namespace) -> int:
    loaded = load_config(args.config)
    spec = resolve_sweep(args, loaded)

    workers = args.workers
    if workers is None:
        workers = _env_int("URLLC_SIM_WORKERS") or loaded.run.workers
    out_dir = args.out or Path(loaded.run.out_dir or DEFAULT_OUT_DIR)
    cache_path = args.cache if args.cache is not None else (os.getenv("URLLC_SIM_CACHE") or loaded.run.cache)
    if args.save_config is not None:
        resolved = LoadedConfig(system=spec.base, sweep=SweepAxes(**spec.to_dict()),
                                run=RunOptions(workers, str(out_dir), cache_path))
        save_config(resolved, args.save_config)
        logger.info(f"Wrote resolved configuration to {args.save_config}")
        return EXIT_OK

    cache = ResultCache(cache_path or None) if cache_path is not None else None

    n_cells = len(list(spec.cells()))
    logger.info(f"Sweep: {n_cells} (K, f) cells x {len(spec.precoders)} precoders x "
                f"{len(spec.strategies)} strategies, {spec.base.n_deployments} deployments "
                f"per cell, {workers} worker(s)")

    with tqdm(total=n_cells * spec.base.n_deployments, unit="dep",
              disable=args.no_progress) as bar:
        def progress(done: int, total: int):
            bar.update(done - bar.n)

        result = run_sweep(spec, workers=workers, cache=cache, progress_callback=progress)

    manifest = build_manifest(spec.base.to_dict(), spec.to_dict(),
                              [failure.to_dict() for failure in result.failures])
    emit_results(result.reports, out_dir, manifest)

    if result.failures:
        logger.error(f"{len(result.failures)} cell(s) failed; see {out_dir / 'manifest.json'}")
        return EXIT_FAILED
    return EXIT_OK


def run_validate(args: argparse.Namespace) -> int:
    results = run_validation(quick=args.quick)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<22} {r.seconds:7.1f}s  {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    load_dotenv()
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)

    try:
        if args.command == "validate":
            return run_validate(args)
        return run_simulation(args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_FAILED
    except Exception as e:
        logger.error(f"Simulation error: {e}")
        logger.debug("Traceback", exc_info=True)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
