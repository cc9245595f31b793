"""Synthetic dataset generation and client shard management.

Examples are flat feature vectors paired with one-hot class labels. The
generator draws each class from its own Gaussian cluster with a shared
isotropic spread, sized so a linear classifier scores high but imperfect
accuracy. Shards are stratified so every client sees near-identical class
proportions, which the deviation detector assumes.

Each client's shard is split into two equal partitions that alternate
between rounds: even rounds train on partition A, odd rounds on partition B.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

PIXEL_MAX = 255.0


@dataclass
class LabeledExample:
    """One example: a fixed-length feature vector plus a one-hot label."""

    features: np.ndarray
    label: np.ndarray

    def label_index(self) -> int:
        return int(np.argmax(self.label))


def one_hot(index: int, num_classes: int) -> np.ndarray:
    """Return a one-hot vector of length ``num_classes`` with a 1.0 at ``index``."""
    label = np.zeros(num_classes)
    label[index] = 1.0
    return label


def is_one_hot(label: np.ndarray) -> bool:
    """True if ``label`` has exactly one entry equal to 1.0 and the rest 0.0."""
    return (
        np.count_nonzero(label == 1.0) == 1
        and np.count_nonzero(label) == 1
    )


@dataclass
class ClientShard:
    """A client's training data, split into the two alternating partitions."""

    client_id: int
    partition_a: list[LabeledExample]
    partition_b: list[LabeledExample]

    def size(self) -> int:
        return len(self.partition_a) + len(self.partition_b)


@dataclass(frozen=True)
class DatasetSpec:
    """Parameters of the synthetic Gaussian-cluster dataset.

    ``cluster_separation`` is the per-coordinate offset between class means
    in units of ``cluster_spread``. The default of 3.5 keeps a brute-force
    nearest-centroid classifier at roughly 0.95 accuracy on the test set:
    high, but with enough residual class overlap that poisoning leaves a
    visible accuracy gap.

    When ``pixel_features`` is set, features are affinely rescaled to
    [0, 255] and snapped to integers so pixel-style perturbations that round
    their output operate on integer-like values.
    """

    num_classes: int = 10
    feature_dim: int = 16
    examples_per_client: int = 500
    test_set_size: int = 1000
    generator_seed: int = 0
    num_clients: int = 10
    cluster_separation: float = 3.5
    cluster_spread: float = 1.0
    pixel_features: bool = False

    def validate(self) -> None:
        if self.num_classes < 2:
            raise ConfigurationError(f"num_classes: must be >= 2 (got {self.num_classes})")
        if self.feature_dim < self.num_classes:
            raise ConfigurationError(
                f"feature_dim: must be >= num_classes so class means can occupy "
                f"orthogonal directions (got {self.feature_dim} < {self.num_classes})"
            )
        if self.examples_per_client <= 0 or self.examples_per_client % 2 != 0:
            raise ConfigurationError(
                f"examples_per_client: must be positive and even (got {self.examples_per_client})"
            )
        if self.test_set_size <= 0:
            raise ConfigurationError(f"test_set_size: must be positive (got {self.test_set_size})")
        if self.num_clients <= 0:
            raise ConfigurationError(f"num_clients: must be positive (got {self.num_clients})")
        if self.cluster_spread <= 0:
            raise ConfigurationError(f"cluster_spread: must be positive (got {self.cluster_spread})")

    @property
    def train_size(self) -> int:
        return self.examples_per_client * self.num_clients


def class_means(spec: DatasetSpec) -> np.ndarray:
    """Fixed per-class cluster means: class c sits at separation * e_c."""
    means = np.zeros((spec.num_classes, spec.feature_dim))
    offset = spec.cluster_separation * spec.cluster_spread
    means[np.arange(spec.num_classes), np.arange(spec.num_classes)] = offset
    return means


def _balanced_labels(rng: np.random.Generator, n: int, num_classes: int) -> np.ndarray:
    counts = np.full(num_classes, n // num_classes)
    counts[: n % num_classes] += 1
    labels = np.repeat(np.arange(num_classes), counts)
    rng.shuffle(labels)
    return labels


def _sample_block(rng: np.random.Generator, spec: DatasetSpec, n: int, means: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    labels = _balanced_labels(rng, n, spec.num_classes)
    features = means[labels] + spec.cluster_spread * rng.standard_normal((n, spec.feature_dim))
    return features, labels


def generate_synthetic_dataset(spec: DatasetSpec) -> tuple[list[LabeledExample], list[LabeledExample]]:
    """Generate the (train, test) example lists for ``spec``.

    Deterministic for a given ``generator_seed``; per-class counts are
    balanced within one example in both splits.
    """
    spec.validate()
    rng = np.random.Generator(np.random.PCG64(spec.generator_seed))
    means = class_means(spec)
    train_x, train_y = _sample_block(rng, spec, spec.train_size, means)
    test_x, test_y = _sample_block(rng, spec, spec.test_set_size, means)

    if spec.pixel_features:
        lo = min(train_x.min(), test_x.min())
        hi = max(train_x.max(), test_x.max())
        scale = PIXEL_MAX / (hi - lo)
        train_x = np.rint((train_x - lo) * scale)
        test_x = np.rint((test_x - lo) * scale)

    def to_examples(xs: np.ndarray, ys: np.ndarray) -> list[LabeledExample]:
        return [LabeledExample(xs[i], one_hot(int(ys[i]), spec.num_classes)) for i in range(len(ys))]

    return to_examples(train_x, train_y), to_examples(test_x, test_y)


def partition_homogeneous(
    train: list[LabeledExample], num_clients: int, seed: int
) -> list[ClientShard]:
    """Split ``train`` into disjoint, equal-sized, stratified client shards.

    Each shard is shuffled and cut into two equal partitions. If the training
    set size is not divisible by ``2 * num_clients``, the excess examples are
    dropped; otherwise the union of all partitions equals the input.
    """
    if num_clients <= 0:
        raise ConfigurationError(f"num_clients: must be positive (got {num_clients})")
    shard_size = (len(train) // num_clients) // 2 * 2
    if shard_size == 0:
        raise ConfigurationError(
            f"cannot split {len(train)} examples into {num_clients} non-empty shards"
        )
    rng = np.random.Generator(np.random.PCG64(seed))

    by_class: dict[int, list[int]] = {}
    for i, example in enumerate(train):
        by_class.setdefault(example.label_index(), []).append(i)

    # Deal each class evenly across clients; remainders go to a shared pool.
    assignments: list[list[int]] = [[] for _ in range(num_clients)]
    pool: list[int] = []
    for label in sorted(by_class):
        idxs = np.array(by_class[label])
        rng.shuffle(idxs)
        base = len(idxs) // num_clients
        for k in range(num_clients):
            assignments[k].extend(idxs[k * base : (k + 1) * base].tolist())
        pool.extend(idxs[num_clients * base :].tolist())

    # Equalize shard sizes from the pool; whatever is left over is truncated.
    for k in range(num_clients):
        pool.extend(assignments[k][shard_size:])
        del assignments[k][shard_size:]
    pool_order = np.array(pool, dtype=int)
    rng.shuffle(pool_order)
    cursor = 0
    for k in range(num_clients):
        need = shard_size - len(assignments[k])
        assignments[k].extend(pool_order[cursor : cursor + need].tolist())
        cursor += need

    shards = []
    half = shard_size // 2
    for k in range(num_clients):
        order = np.array(assignments[k], dtype=int)
        rng.shuffle(order)
        shards.append(
            ClientShard(
                client_id=k,
                partition_a=[train[i] for i in order[:half]],
                partition_b=[train[i] for i in order[half:]],
            )
        )
    return shards


def select_round_partition(shard: ClientShard, round_index: int) -> list[LabeledExample]:
    """Partition A on even rounds, partition B on odd rounds."""
    if round_index < 0:
        raise ValueError(f"round_index must be >= 0 (got {round_index})")
    return shard.partition_a if round_index % 2 == 0 else shard.partition_b


def load_examples_file(path: str | Path, num_classes: int) -> list[LabeledExample]:
    """Load examples from a flat text file.

    One example per line: comma-separated real features followed by one
    integer class label in [0, num_classes). All lines must carry the same
    feature count.
    """
    path = Path(path)
    examples: list[LabeledExample] = []
    feature_dim = None
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) < 2:
                raise ConfigurationError(f"{path}:{lineno}: expected features plus a label")
            try:
                features = np.array([float(v) for v in fields[:-1]])
                label = int(fields[-1])
            except ValueError as exc:
                raise ConfigurationError(f"{path}:{lineno}: {exc}") from exc
            if feature_dim is None:
                feature_dim = len(features)
            elif len(features) != feature_dim:
                raise ConfigurationError(
                    f"{path}:{lineno}: expected {feature_dim} features, got {len(features)}"
                )
            if not 0 <= label < num_classes:
                raise ConfigurationError(
                    f"{path}:{lineno}: label {label} outside [0, {num_classes})"
                )
            examples.append(LabeledExample(features, one_hot(label, num_classes)))
    return examples


def write_examples_file(path: str | Path, examples: list[LabeledExample]) -> None:
    """Write examples in the flat text format read by :func:`load_examples_file`."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for example in examples:
            features = ",".join(repr(float(v)) for v in example.features)
            handle.write(f"{features},{example.label_index()}\n")
