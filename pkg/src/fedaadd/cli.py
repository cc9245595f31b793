"""Command-line entry point: load a config, run the simulation, write reports."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .attacks import PoisonConfig
from .config import ExperimentConfig, config_echo, load_config
from .data import (
    generate_synthetic_dataset,
    load_examples_file,
    partition_homogeneous,
)
from .errors import ConfigurationError, ProtocolError
from .federation import BlacklistPolicy, ClientState, FederatedSimulation
from .model import MLP, ShapeTag, init_params
from .reporting import classify_attack_success, emit_reports, update_confusion_matrix
from .seeding import derive_seed

logger = logging.getLogger(__name__)


def build_simulation(config: ExperimentConfig, workers: int = 1) -> FederatedSimulation:
    """Assemble dataset, shards, model, and clients for ``config``."""
    if config.train_file is not None:
        train = load_examples_file(config.train_file, config.dataset.num_classes)
        test = load_examples_file(config.test_file, config.dataset.num_classes)
        if not train or not test:
            raise ConfigurationError("dataset files must contain at least one example")
        feature_dim = len(train[0].features)
    else:
        train, test = generate_synthetic_dataset(config.dataset)
        feature_dim = config.dataset.feature_dim

    shards = partition_homogeneous(
        train, config.num_clients, derive_seed(config.master_seed, "partition")
    )
    poison_by_client = dict(config.poisoned_clients)
    clients = [
        ClientState(
            client_id=shard.client_id,
            shard=shard,
            poison=poison_by_client.get(shard.client_id, PoisonConfig()),
        )
        for shard in shards
    ]

    if config.model.kind == MLP:
        shape_tag = ShapeTag.mlp(feature_dim, config.dataset.num_classes, config.model.hidden_units)
    else:
        shape_tag = ShapeTag.logreg(feature_dim, config.dataset.num_classes)
    initial = init_params(shape_tag, derive_seed(config.master_seed, "init"))

    return FederatedSimulation(
        clients=clients,
        test_set=test,
        initial_params=initial,
        train_cfg=config.train,
        detector_cfg=config.detector,
        blacklist=config.blacklist,
        master_seed=config.master_seed,
        discard_on_arrival=config.discard_on_arrival,
        workers=workers,
    )


def run_experiment(config: ExperimentConfig, workers: int = 1) -> int:
    """Run the configured experiment end to end and write reports.

    Returns 0 on success. A run in which every client ends up blacklisted is
    a defined terminal state, not an error; its reports cover the completed
    rounds.
    """
    simulation = build_simulation(config, workers=workers)
    records = simulation.run(config.rounds)

    poisoned_ids = {client_id for client_id, _ in config.poisoned_clients}
    matrix = update_confusion_matrix(records, poisoned_ids)
    outcome = None
    if config.baseline_accuracy is not None and records:
        outcome = classify_attack_success(
            config.baseline_accuracy, records[-1].global_accuracy
        )

    emit_reports(
        records,
        matrix,
        outcome,
        config.output_dir,
        config_echo=config_echo(config),
        blacklist_timeline=simulation.blacklist_timeline,
        terminal_state=simulation.terminal_state,
        num_classes=config.dataset.num_classes,
    )
    logger.info(
        "run complete: %d rounds, final accuracy %s, reports in %s",
        len(records),
        f"{records[-1].global_accuracy:.4f}" if records else "n/a",
        config.output_dir,
    )
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="fedaadd",
        description="Federated learning poisoning simulator with accuracy deviation detection.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run_parser = subparsers.add_parser("run", help="run one experiment from a config file")
    run_parser.add_argument("config", type=Path, help="path to the YAML experiment config")
    run_parser.add_argument("--output-dir", type=Path, default=None, help="override output_dir")
    run_parser.add_argument("--seed", type=int, default=None, help="override master_seed")
    run_parser.add_argument(
        "--workers", type=int, default=1, help="threads for client training (does not change results)"
    )
    run_parser.add_argument("-v", "--verbose", action="store_true", help="log round progress")

    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        config = load_config(args.config, master_seed_override=args.seed)
        if args.output_dir is not None:
            config.output_dir = args.output_dir
        return run_experiment(config, workers=args.workers)
    except (ConfigurationError, ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
