"""Small deterministic multiclass classifiers with mini-batch SGD.

Two architectures share one flat parameter layout: multinomial logistic
regression (the default) and a single-hidden-layer tanh network. Both
minimize softmax cross-entropy. All reductions run in a fixed order, so
identical inputs produce bitwise-identical outputs regardless of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledExample
from .errors import ConfigurationError

LOGREG = "logreg"
MLP = "mlp"


@dataclass(frozen=True)
class ShapeTag:
    """Describes a model architecture and therefore its parameter layout.

    Layout of the flat value vector:
      logreg: [W (feature_dim x num_classes), b (num_classes)]
      mlp:    [W1 (feature_dim x hidden_units), b1 (hidden_units),
               W2 (hidden_units x num_classes), b2 (num_classes)]
    """

    kind: str
    feature_dim: int
    num_classes: int
    hidden_units: int = 0

    def __post_init__(self) -> None:
        if self.kind not in (LOGREG, MLP):
            raise ConfigurationError(f"unknown model kind {self.kind!r}")
        if self.kind == MLP and self.hidden_units <= 0:
            raise ConfigurationError("mlp models need hidden_units > 0")
        if self.feature_dim <= 0 or self.num_classes < 2:
            raise ConfigurationError("feature_dim must be positive and num_classes >= 2")

    @classmethod
    def logreg(cls, feature_dim: int, num_classes: int) -> "ShapeTag":
        return cls(LOGREG, feature_dim, num_classes)

    @classmethod
    def mlp(cls, feature_dim: int, num_classes: int, hidden_units: int) -> "ShapeTag":
        return cls(MLP, feature_dim, num_classes, hidden_units)

    @property
    def element_count(self) -> int:
        d, c, h = self.feature_dim, self.num_classes, self.hidden_units
        if self.kind == LOGREG:
            return d * c + c
        return d * h + h + h * c + c


@dataclass
class ParameterVector:
    """Flat model weights plus the shape tag needed to interpret them."""

    values: np.ndarray
    shape_tag: ShapeTag

    def copy(self) -> "ParameterVector":
        return ParameterVector(self.values.copy(), self.shape_tag)


@dataclass(frozen=True)
class TrainConfig:
    """Local training settings for one client round.

    ``rng_seed`` drives the batch shuffling; the experiment runner derives a
    per-client, per-round seed when it is left as None.
    """

    epochs: int = 10
    batch_size: int = 128
    learning_rate: float = 0.1
    rng_seed: int | None = None

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigurationError(f"epochs: must be >= 1 (got {self.epochs})")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size: must be >= 1 (got {self.batch_size})")
        if self.learning_rate < 0:
            raise ConfigurationError(f"learning_rate: must be >= 0 (got {self.learning_rate})")


@dataclass
class EvalResult:
    """Evaluation of one model on one test set.

    ``per_label_accuracy[l]`` is NaN when label ``l`` has no test examples;
    such labels are reported as absent and skipped by downstream per-label
    checks.
    """

    overall_accuracy: float
    per_label_accuracy: np.ndarray
    per_label_counts: np.ndarray


def _unpack(tag: ShapeTag, values: np.ndarray) -> tuple[np.ndarray, ...]:
    d, c, h = tag.feature_dim, tag.num_classes, tag.hidden_units
    if tag.kind == LOGREG:
        w = values[: d * c].reshape(d, c)
        b = values[d * c :]
        return w, b
    o1 = d * h
    o2 = o1 + h
    o3 = o2 + h * c
    return (
        values[:o1].reshape(d, h),
        values[o1:o2],
        values[o2:o3].reshape(h, c),
        values[o3:],
    )


def init_params(shape_tag: ShapeTag, seed: int) -> ParameterVector:
    """Deterministic small-magnitude init: weights uniform in [-0.05, 0.05], biases zero."""
    rng = np.random.Generator(np.random.PCG64(seed))
    values = np.zeros(shape_tag.element_count)
    if shape_tag.kind == LOGREG:
        w, _ = _unpack(shape_tag, values)
        w[:] = rng.uniform(-0.05, 0.05, w.shape)
    else:
        w1, _, w2, _ = _unpack(shape_tag, values)
        w1[:] = rng.uniform(-0.05, 0.05, w1.shape)
        w2[:] = rng.uniform(-0.05, 0.05, w2.shape)
    return ParameterVector(values, shape_tag)


def logits(params: ParameterVector, features: np.ndarray) -> np.ndarray:
    """Class scores for a (n, feature_dim) feature matrix."""
    tag = params.shape_tag
    if tag.kind == LOGREG:
        w, b = _unpack(tag, params.values)
        return features @ w + b
    w1, b1, w2, b2 = _unpack(tag, params.values)
    return np.tanh(features @ w1 + b1) @ w2 + b2


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def batch_loss(params: ParameterVector, features: np.ndarray, labels: np.ndarray) -> float:
    """Mean softmax cross-entropy of a batch (labels one-hot, shape (n, C))."""
    log_p = _log_softmax(logits(params, features))
    return float(-(labels * log_p).sum() / len(features))


def batch_gradient(params: ParameterVector, features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Flat analytic gradient of :func:`batch_loss` with respect to the parameters."""
    tag = params.shape_tag
    n = len(features)
    grad = np.zeros_like(params.values)
    if tag.kind == LOGREG:
        w, b = _unpack(tag, params.values)
        gw, gb = _unpack(tag, grad)
        delta = (_softmax(features @ w + b) - labels) / n
        gw[:] = features.T @ delta
        gb[:] = delta.sum(axis=0)
        return grad
    w1, b1, w2, b2 = _unpack(tag, params.values)
    gw1, gb1, gw2, gb2 = _unpack(tag, grad)
    hidden = np.tanh(features @ w1 + b1)
    delta2 = (_softmax(hidden @ w2 + b2) - labels) / n
    delta1 = (delta2 @ w2.T) * (1.0 - hidden**2)
    gw2[:] = hidden.T @ delta2
    gb2[:] = delta2.sum(axis=0)
    gw1[:] = features.T @ delta1
    gb1[:] = delta1.sum(axis=0)
    return grad


def stack_examples(data: list[LabeledExample]) -> tuple[np.ndarray, np.ndarray]:
    """Stack examples into (features, one-hot labels) matrices."""
    features = np.stack([example.features for example in data])
    labels = np.stack([example.label for example in data])
    return features, labels


def train_local(
    params: ParameterVector, data: list[LabeledExample], cfg: TrainConfig
) -> ParameterVector:
    """Run ``cfg.epochs`` passes of mini-batch SGD and return the updated parameters.

    The input parameters are not modified. Batch order is drawn from a
    generator seeded with ``cfg.rng_seed``, so the result is fully determined
    by (params, data order, cfg).
    """
    if not data:
        raise ValueError("train_local requires non-empty data")
    cfg.validate()
    if cfg.rng_seed is None:
        raise ConfigurationError(
            "rng_seed: required for train_local; the experiment runner derives one"
        )
    features, labels = stack_examples(data)
    current = params.copy()
    rng = np.random.Generator(np.random.PCG64(cfg.rng_seed))
    n = len(data)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            grad = batch_gradient(current, features[batch], labels[batch])
            current.values -= cfg.learning_rate * grad
    if not np.all(np.isfinite(current.values)):
        raise ValueError(
            "training produced non-finite parameters; lower the learning rate"
        )
    return current


def evaluate(params: ParameterVector, test: list[LabeledExample]) -> EvalResult:
    """Overall and per-label accuracy of ``params`` on ``test``.

    Neither the parameters nor the test data are modified.
    """
    if not test:
        raise ValueError("evaluate requires a non-empty test set")
    features, labels = stack_examples(test)
    predicted = logits(params, features).argmax(axis=1)
    true = labels.argmax(axis=1)
    return eval_from_predictions(true, predicted, params.shape_tag.num_classes)


def eval_from_predictions(true: np.ndarray, predicted: np.ndarray, num_classes: int) -> EvalResult:
    """Build an :class:`EvalResult` from true and predicted label indices."""
    counts = np.zeros(num_classes, dtype=int)
    correct = np.zeros(num_classes, dtype=int)
    for label in range(num_classes):
        mask = true == label
        counts[label] = int(mask.sum())
        correct[label] = int((predicted[mask] == label).sum())
    per_label = np.full(num_classes, np.nan)
    present = counts > 0
    per_label[present] = correct[present] / counts[present]
    overall = float(correct.sum() / counts.sum())
    return EvalResult(overall, per_label, counts)
