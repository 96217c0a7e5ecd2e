"""
Command-line Subcommands
simulate, characterize, profile, violation and cz over one run configuration
"""

import argparse
import logging
import os
from typing import Callable, Dict, List, Optional

import config
from dataset_store import Dataset, RunConfig, load_dataset, load_model, load_run_config, save_dataset
from estimation import fit_maximum_likelihood, independent_estimates
from noise_model import GatesetModel
from pipeline import CharacterizationPipeline

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='gateset-characterization',
        description="Simulate and characterize a single-qubit gateset (with optional CZ) from count data",
    )
    parser.add_argument('--verbose', action='store_true', help="show DEBUG messages on the console")
    parser.add_argument('--log-dir', default=None, help="directory for the run and error logs")
    subparsers = parser.add_subparsers(dest='command', required=True)

    def add(name: str, help_text: str, needs_dataset: bool = True, takes_model: bool = False):
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument('--config', default=None, help="JSON run configuration (defaults from config.py)")
        sub.add_argument('--out', default=None, help="output directory (overrides the configuration)")
        sub.add_argument('--seed', type=int, default=None, help="master seed")
        sub.add_argument('--shots', type=int, default=None, help="shots per circuit for every class")
        sub.add_argument('--pstar', type=float, default=None,
                         help=f"maximum discrimination error for intervals (default {config.PSTAR})")
        if needs_dataset:
            sub.add_argument('--dataset', default=None,
                             help=f"dataset file (default <out>/{config.DATASET_FILE})")
        else:
            sub.add_argument('--dataset', default=None, help="extra copy of the simulated dataset")
        if takes_model:
            sub.add_argument('--model', default=None, help="model JSON (bare or wrapped in a 'model' key)")
        return sub

    add('simulate', "generate circuits and sample a dataset", needs_dataset=False)
    add('characterize', "independent estimates, MLE, profiles and violation reports")
    profile = add('profile', "likelihood profiles through a model", takes_model=True)
    profile.add_argument('--parameter', action='append', default=None,
                         help="parameter to profile (repeatable; default all)")
    add('violation', "model-violation statistic of a model", takes_model=True)
    add('cz', "CZ phase and decay characterization")
    return parser


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    run = load_run_config(args.config)
    return run.override(seed=args.seed, shots=args.shots, output_dir=args.out, pstar=args.pstar)


def _dataset_path(args: argparse.Namespace, run: RunConfig) -> str:
    return args.dataset or os.path.join(run.output_dir, config.DATASET_FILE)


def _load(args: argparse.Namespace, run: RunConfig) -> Dataset:
    path = _dataset_path(args, run)
    dataset = load_dataset(path)
    logger.info(f"Loaded {len(dataset)} records from {path}")
    return dataset


def _best_model(dataset: Dataset) -> GatesetModel:
    """MLE started from the independent estimates, for commands given no --model"""
    return fit_maximum_likelihood(independent_estimates(dataset).model, dataset).model


def cmd_simulate(args: argparse.Namespace, run: RunConfig) -> int:
    dataset = CharacterizationPipeline(run).simulate()
    if args.dataset:
        save_dataset(dataset, args.dataset)
    print(f"Simulated {len(dataset)} circuits into {run.output_dir}")
    return 0


def cmd_characterize(args: argparse.Namespace, run: RunConfig) -> int:
    pipeline = CharacterizationPipeline(run)
    result = pipeline.characterize(_load(args, run))
    if result.gaps:
        print(f"Partial report written to {run.output_dir}; missing: {', '.join(sorted(result.gaps))}")
    else:
        print(f"Report written to {run.output_dir}")
    return 0


def cmd_profile(args: argparse.Namespace, run: RunConfig) -> int:
    dataset = _load(args, run)
    model = load_model(args.model) if args.model else _best_model(dataset)
    result = CharacterizationPipeline(run).profile(dataset, model, args.parameter)
    for name, profile in result.profiles.items():
        print(f"{name}: [{profile.lower:.6g}, {profile.upper:.6g}] (max at {profile.argmax:.6g})")
    return 0 if not result.gaps else 1


def cmd_violation(args: argparse.Namespace, run: RunConfig) -> int:
    dataset = _load(args, run)
    model = load_model(args.model) if args.model else run.model
    report = CharacterizationPipeline(run).violation(dataset, model)
    verdict = 'REJECTED' if report.rejected else 'consistent'
    print(f"k={report.k_hat:.4f} bound={report.bound:.4f} -> {verdict}")
    return 0


def cmd_cz(args: argparse.Namespace, run: RunConfig) -> int:
    estimate = CharacterizationPipeline(run).cz(_load(args, run))
    print(f"alpha={estimate.alpha} beta={estimate.beta} "
          f"p_iz+p_zi={estimate.sum_iz_zi} p_zi+p_zz={estimate.sum_zi_zz}")
    return 0


COMMANDS: Dict[str, Callable[[argparse.Namespace, RunConfig], int]] = {
    'simulate': cmd_simulate,
    'characterize': cmd_characterize,
    'profile': cmd_profile,
    'violation': cmd_violation,
    'cz': cmd_cz,
}


def run(args: argparse.Namespace) -> int:
    """
    Dispatch a parsed command line

    Args:
        args: namespace from build_parser()

    Returns:
        Process exit code
    """
    run_config = run_config_from_args(args)
    return COMMANDS[args.command](args, run_config)


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)
