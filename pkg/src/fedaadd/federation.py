"""Synchronous federated averaging rounds with detection and blacklisting.

Each round the server sends the global parameters to every active client;
clients train on their round partition (after applying their poison
transform, or skipping training entirely for lazy poisoning) and return
updates. The server aggregates the updates, evaluates the new global model
and every individual client model on its test set, runs the deviation
detector, and applies the blacklist policy.

Detection uses the round's own results, so a client blacklisted this round
has already contributed to this round's aggregate; exclusion starts next
round. The optional discard-on-arrival mode instead drops a flagged client's
next update from the aggregate without blacklisting it, modelling a pipeline
where analysis runs in parallel with training and a compromised node's next
weights are thrown out when they arrive.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .attacks import STRATEGY_LAZY, PoisonConfig, apply_poison, lazy_update
from .data import ClientShard, LabeledExample, select_round_partition
from .detector import DetectionEvent, DetectorConfig, detect_round
from .errors import AllClientsBlacklistedError, ConfigurationError, ProtocolError
from .model import ParameterVector, TrainConfig, evaluate, train_local
from .seeding import derive_seed

logger = logging.getLogger(__name__)

TERMINAL_COMPLETED = "completed"
TERMINAL_ALL_BLACKLISTED = "all_clients_blacklisted"


@dataclass
class ClientState:
    """One simulated client: its data shard, poison setting, and liveness."""

    client_id: int
    shard: ClientShard
    poison: PoisonConfig = field(default_factory=PoisonConfig)
    active: bool = True


@dataclass(frozen=True)
class BlacklistPolicy:
    """Blacklist a client flagged in ``detections_required`` distinct rounds
    within the trailing ``window_rounds`` rounds. Blacklisting is permanent."""

    detections_required: int = 3
    window_rounds: int = 10
    enabled: bool = True

    def validate(self) -> None:
        if not 1 <= self.detections_required <= self.window_rounds:
            raise ConfigurationError(
                f"detections_required: must satisfy 1 <= {self.detections_required} "
                f"<= window_rounds ({self.window_rounds})"
            )


@dataclass
class RoundRecord:
    """Everything the server observed in one round."""

    round: int
    global_accuracy: float
    client_accuracies: dict[int, float]
    client_label_accuracies: dict[int, np.ndarray]
    flags: list[DetectionEvent]
    active_clients: list[int]


def aggregate_fedavg(updates: list[tuple[ParameterVector, int]]) -> ParameterVector:
    """Sample-count-weighted coordinate-wise mean of the updates.

    Updates are accumulated in list order; callers pass them in ascending
    client id so the summation order is fixed. The result is clamped to the
    coordinate-wise [min, max] envelope of the inputs, which a convex
    combination satisfies mathematically but floating-point accumulation can
    drift out of by an ulp.
    """
    if not updates:
        raise ValueError("aggregate_fedavg requires at least one update")
    tag = updates[0][0].shape_tag
    size = updates[0][0].values.shape
    total = 0.0
    accumulated = np.zeros(size)
    for params, count in updates:
        if params.shape_tag != tag or params.values.shape != size:
            raise ProtocolError(
                f"update shape {params.shape_tag} does not match {tag}"
            )
        if count <= 0:
            raise ValueError(f"sample_count must be positive (got {count})")
        accumulated += params.values * float(count)
        total += float(count)
    mean = accumulated / total
    stacked = np.stack([params.values for params, _ in updates])
    np.clip(mean, stacked.min(axis=0), stacked.max(axis=0), out=mean)
    return ParameterVector(mean, tag)


def flagged_rounds_by_client(history: list[RoundRecord]) -> dict[int, list[int]]:
    """Map each client to the sorted rounds in which it was flagged."""
    flagged: dict[int, list[int]] = {}
    for record in history:
        for cid in sorted({event.client_id for event in record.flags}):
            flagged.setdefault(cid, []).append(record.round)
    return flagged


def apply_blacklist_policy(
    history: list[RoundRecord], policy: BlacklistPolicy
) -> set[int]:
    """Clients whose flagged-round count within the trailing window meets the policy.

    The window covers the last ``window_rounds`` rounds inclusive of the
    current (latest) round. A round counts once per client no matter how many
    checks tripped. Returns the empty set when the policy is disabled.
    """
    if not policy.enabled or not history:
        return set()
    policy.validate()
    current = history[-1].round
    window_start = current - policy.window_rounds + 1
    blacklisted = set()
    for cid, rounds in flagged_rounds_by_client(history).items():
        in_window = sum(1 for r in rounds if r >= window_start)
        if in_window >= policy.detections_required:
            blacklisted.add(cid)
    return blacklisted


class FederatedSimulation:
    """Drives the barrier-synchronous round loop over in-process clients.

    Client training steps are pure, so they may run on a thread pool
    (``workers`` > 1) without affecting results: updates are keyed by client
    id and aggregated in ascending id order regardless of completion order.
    """

    def __init__(
        self,
        clients: list[ClientState],
        test_set: list[LabeledExample],
        initial_params: ParameterVector,
        train_cfg: TrainConfig,
        detector_cfg: DetectorConfig | None,
        blacklist: BlacklistPolicy,
        master_seed: int,
        discard_on_arrival: bool = False,
        workers: int = 1,
    ):
        if not clients:
            raise ConfigurationError("at least one client is required")
        self.clients = clients
        self.test_set = test_set
        self.global_params = initial_params
        self.train_cfg = train_cfg
        self.detector_cfg = detector_cfg
        self.blacklist = blacklist
        self.master_seed = master_seed
        self.discard_on_arrival = discard_on_arrival
        self.workers = max(1, workers)

        self.history: list[RoundRecord] = []
        self.blacklist_timeline: list[tuple[int, int]] = []
        self.terminal_state = TERMINAL_COMPLETED
        self.last_updates: dict[int, ParameterVector] = {}
        self._blacklisted: set[int] = set()
        self._pending_discard: set[int] = set()

    def _poison_seed(self, client: ClientState) -> int:
        if client.poison.rng_seed is not None:
            return client.poison.rng_seed
        return derive_seed(self.master_seed, "poison", client.client_id)

    def _train_seed(self, client: ClientState, round_index: int) -> int:
        base = self.train_cfg.rng_seed if self.train_cfg.rng_seed is not None else self.master_seed
        return derive_seed(base, "train", client.client_id, round_index)

    def _client_update(
        self, client: ClientState, round_index: int
    ) -> tuple[ParameterVector, int]:
        partition = select_round_partition(client.shard, round_index)
        if client.poison.strategy == STRATEGY_LAZY:
            return lazy_update(self.global_params), len(partition)
        data = apply_poison(partition, client.poison, self._poison_seed(client))
        cfg = replace(self.train_cfg, rng_seed=self._train_seed(client, round_index))
        return train_local(self.global_params, data, cfg), len(partition)

    def run_round(self, round_index: int) -> RoundRecord:
        """Execute one full round and append its record to the history."""
        active = [client for client in self.clients if client.active]
        if not active:
            raise AllClientsBlacklistedError(
                f"round {round_index}: every client has been blacklisted"
            )

        if self.workers > 1 and len(active) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                futures = {
                    client.client_id: pool.submit(self._client_update, client, round_index)
                    for client in active
                }
            results = {cid: future.result() for cid, future in futures.items()}
        else:
            results = {
                client.client_id: self._client_update(client, round_index)
                for client in active
            }
        self.last_updates = {cid: update for cid, (update, _) in results.items()}

        contributing = [cid for cid in sorted(results) if cid not in self._pending_discard]
        if contributing:
            self.global_params = aggregate_fedavg([results[cid] for cid in contributing])
        else:
            logger.warning(
                "round %d: all updates discarded on arrival, global model unchanged",
                round_index,
            )

        global_eval = evaluate(self.global_params, self.test_set)
        client_accuracies: dict[int, float] = {}
        client_label_accuracies: dict[int, np.ndarray] = {}
        for cid in sorted(results):
            result = evaluate(results[cid][0], self.test_set)
            client_accuracies[cid] = result.overall_accuracy
            client_label_accuracies[cid] = result.per_label_accuracy

        if self.detector_cfg is not None:
            flags = detect_round(
                client_accuracies, client_label_accuracies, round_index, self.detector_cfg
            )
        else:
            flags = []

        record = RoundRecord(
            round=round_index,
            global_accuracy=global_eval.overall_accuracy,
            client_accuracies=client_accuracies,
            client_label_accuracies=client_label_accuracies,
            flags=flags,
            active_clients=[client.client_id for client in active],
        )
        self.history.append(record)

        if self.blacklist.enabled:
            for cid in sorted(apply_blacklist_policy(self.history, self.blacklist)):
                if cid in self._blacklisted:
                    continue
                self._blacklisted.add(cid)
                self.blacklist_timeline.append((round_index, cid))
                for client in self.clients:
                    if client.client_id == cid:
                        client.active = False
                logger.info("round %d: client %d blacklisted", round_index, cid)

        if self.discard_on_arrival:
            self._pending_discard = {event.client_id for event in flags}

        return record

    def run(self, rounds: int) -> list[RoundRecord]:
        """Run up to ``rounds`` rounds, stopping early if every client is blacklisted."""
        for round_index in range(rounds):
            if not any(client.active for client in self.clients):
                self.terminal_state = TERMINAL_ALL_BLACKLISTED
                logger.warning(
                    "halting before round %d: all clients blacklisted", round_index
                )
                break
            self.run_round(round_index)
        else:
            self.terminal_state = TERMINAL_COMPLETED
        return self.history
