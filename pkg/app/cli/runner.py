"""Command-line entry: ``run <config>`` executes one experiment, ``list`` shows the registry,
``show <workbook>`` prints what a stored run holds.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from pathlib import Path

from app.cli.config import RunConfig, parse_seed
from app.cli.experiments import EXPERIMENTS, get_experiment, list_experiments
from app.errors import SotlabError, ValidationError
from app.simulate.montecarlo import THREADS_ENV, resolve_threads
from app.workbook.results_store import ResultStore

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2


def output_path_for(cfg: RunConfig, config_path: Path, suffix: str, override: str | None = None) -> Path:
    if override:
        return Path(override)
    if cfg.output_path:
        return Path(cfg.output_path)
    return config_path.with_name(f"{config_path.stem}.result{suffix}")


def run(config_path, output: str | None = None, threads: int | None = None, seed: int | None = None,
        store: bool = False) -> int:
    """Execute the experiment described by *config_path* and write its output.

    Returns the process exit code: 0 on success, 1 for invalid input, 2 when
    the experiment itself failed.
    """
    config_path = Path(config_path)
    try:
        cfg = RunConfig.load(config_path)
        if seed is not None:
            cfg = dataclasses.replace(cfg, seed=parse_seed(seed))
        experiment = get_experiment(cfg.experiment)
        if threads is not None:
            resolve_threads(threads)
        started = time.perf_counter()
        result = experiment.run(cfg, threads)
        target = output_path_for(cfg, config_path, result.suffix, output)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(result.render(cfg), encoding="utf-8")
        if store or cfg.store:
            _write_store(cfg, result, target)
        elapsed = time.perf_counter() - started
    except ValidationError as exc:
        logger.debug("validation failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SotlabError, OSError) as exc:
        logger.debug("runtime failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"{cfg.experiment}: {result.summary} -> {target} ({elapsed:.2f}s)")
    return EXIT_OK


def _write_store(cfg: RunConfig, result, target: Path) -> None:
    store = ResultStore.beside(target)
    store.open(run_name=cfg.experiment)
    store.write_config(cfg.to_dict())
    if result.columns is not None:
        store.write_table(cfg.experiment, result.columns)
    else:
        store.write_json(cfg.experiment, result.document)
    if result.path_costs is not None:
        store.write_path_costs(cfg.experiment, result.path_costs)
    logger.info("results workbook written to %s", store.path)


def show(workbook, entry: str | None = None) -> int:
    """Print the contents of a results workbook, or one of its entries."""
    store = ResultStore(workbook)
    if not store.path.is_file():
        print(f"error: no workbook at {store.path}", file=sys.stderr)
        return EXIT_INVALID
    try:
        if entry is None:
            text = "".join(item.describe() + "\n" for item in store.entries())
        else:
            text = store.render(entry)
    except KeyError:
        print(f"error: {entry}: not in {store.path}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sotlab",
        description="Optimal transport toward random targets: batch experiments.",
        epilog="experiments:\n" + list_experiments(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the experiment described by a JSON config")
    run_p.add_argument("config", help="path to the run configuration")
    run_p.add_argument("--output", help="output file (default: config output_path, else <config>.result.<ext>)")
    run_p.add_argument("--threads", type=int,
                       help=f"worker threads (default: ${THREADS_ENV}, else all cores)")
    run_p.add_argument("--seed", type=int, help="base seed, overrides the config")
    run_p.add_argument("--store", action="store_true", help="also write an HDF5 results workbook")
    run_p.add_argument("--verbose", "-v", action="store_true", help="debug logging on stderr")

    sub.add_parser("list", help=f"list the {len(EXPERIMENTS)} experiments and their config fields")

    show_p = sub.add_parser("show", help="list the entries of a results workbook, or print one")
    show_p.add_argument("workbook", help="path to a .h5 file written with --store")
    show_p.add_argument("entry", nargs="?", help="entry path, e.g. outputs/tables/gap-curve")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.command == "list":
        sys.stdout.write(list_experiments())
        return EXIT_OK
    if args.command == "show":
        return show(args.workbook, args.entry)
    return run(args.config, args.output, args.threads, args.seed, args.store)
