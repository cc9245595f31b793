"""Average accuracy deviation detection (AADD).

After every round the server evaluates each client's individual model on its
test set. AADD 1.0 flags a client whose overall accuracy falls more than a
round-dependent threshold below the mean accuracy of all active clients.
AADD 2.0 additionally applies the same check to every class label, with the
threshold scaled up (4.8x by default) because per-label accuracies are far
noisier than overall ones.

The threshold decays with the round index r (x = r + 2):

    epsilon(r, s) = x**(-1/1.5) * (log_coefficient * ln(x))**(1/3) * gain * s / 100

It is strictly positive and strictly decreasing for r >= 0: early rounds
tolerate the large natural spread of half-trained models, later rounds
tighten as clients converge. The curve constants are configurable because
the round-indexed schedule is the most setting-dependent part of the method.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ConfigurationError

logger = logging.getLogger(__name__)

AADD_1_0 = "AADD_1_0"
AADD_2_0 = "AADD_2_0"

AVERAGE_DEVIATION = "average_deviation"
LABEL_DEVIATION = "label_deviation"


@dataclass(frozen=True)
class ThresholdCurve:
    """Constants of the round-indexed threshold function."""

    log_coefficient: float = 3300.0
    gain: float = 1.6
    decay_exponent: float = -1.0 / 1.5
    log_exponent: float = 1.0 / 3.0


DEFAULT_CURVE = ThresholdCurve()


@dataclass(frozen=True)
class DetectorConfig:
    """Detector version and threshold scales."""

    version: str = AADD_2_0
    average_scale: float = 1.0
    label_scale: float = 4.8
    curve: ThresholdCurve = field(default_factory=ThresholdCurve)

    def validate(self) -> None:
        if self.version not in (AADD_1_0, AADD_2_0):
            raise ConfigurationError(f"version: must be {AADD_1_0} or {AADD_2_0}")
        if self.average_scale <= 0 or self.label_scale <= 0:
            raise ConfigurationError("average_scale and label_scale must be positive")


@dataclass(frozen=True)
class DetectionEvent:
    """One tripped deviation check: the client scored ``observed``, more than
    ``threshold`` below the cross-client ``mean``."""

    round: int
    client_id: int
    cause: str
    label: int | None
    observed: float
    mean: float
    threshold: float

    def cause_tag(self) -> str:
        if self.cause == LABEL_DEVIATION:
            return f"{LABEL_DEVIATION}:{self.label}"
        return self.cause


def epsilon_threshold(round_index: int, scale: float, curve: ThresholdCurve = DEFAULT_CURVE) -> float:
    """Evaluate the threshold curve at ``round_index`` (shifted to x = round + 2)."""
    x = round_index + 2
    base = (
        x**curve.decay_exponent
        * (curve.log_coefficient * math.log(x)) ** curve.log_exponent
        * curve.gain
    ) / 100.0
    # Scale multiplies last so scaling commutes with evaluation exactly.
    return base * scale


def check_average_deviation(
    client_acc: float,
    mean_acc: float,
    round_index: int,
    scale: float,
    curve: ThresholdCurve = DEFAULT_CURVE,
) -> bool:
    """True when the client's overall accuracy deviates below the mean by more
    than the round threshold (strict inequality)."""
    return (mean_acc - epsilon_threshold(round_index, scale, curve)) > client_acc


def check_label_deviation(
    client_label_acc: float,
    mean_label_acc: float,
    round_index: int,
    label_scale: float,
    curve: ThresholdCurve = DEFAULT_CURVE,
) -> bool:
    """Same deviation test applied to a single label's accuracy."""
    return (mean_label_acc - epsilon_threshold(round_index, label_scale, curve)) > client_label_acc


def detect_round(
    client_accuracies: Mapping[int, float],
    client_label_accuracies: Mapping[int, np.ndarray] | None,
    round_index: int,
    cfg: DetectorConfig,
) -> list[DetectionEvent]:
    """Run the configured checks over one round's per-client evaluations.

    Means are computed over the active clients only, including the client
    under test. Labels whose accuracy is absent (NaN) for any client are
    skipped: the per-label check assumes every client can be scored on every
    label. With fewer than two clients no deviation is measurable and
    detection is skipped.

    A client may produce several events in one round (one per tripped
    check); downstream accounting collapses them into a single positive
    decision per client and round.
    """
    cfg.validate()
    if len(client_accuracies) < 2:
        logger.info(
            "round %d: detection skipped, needs >= 2 active clients (got %d)",
            round_index,
            len(client_accuracies),
        )
        return []

    client_ids = sorted(client_accuracies)
    events: list[DetectionEvent] = []

    mean_acc = float(np.mean([client_accuracies[cid] for cid in client_ids]))
    avg_threshold = epsilon_threshold(round_index, cfg.average_scale, cfg.curve)
    for cid in client_ids:
        observed = client_accuracies[cid]
        if check_average_deviation(observed, mean_acc, round_index, cfg.average_scale, cfg.curve):
            events.append(
                DetectionEvent(
                    round=round_index,
                    client_id=cid,
                    cause=AVERAGE_DEVIATION,
                    label=None,
                    observed=float(observed),
                    mean=mean_acc,
                    threshold=avg_threshold,
                )
            )

    if cfg.version == AADD_2_0:
        if client_label_accuracies is None:
            raise ValueError(f"{AADD_2_0} needs per-label accuracies")
        label_matrix = np.stack([client_label_accuracies[cid] for cid in client_ids])
        label_threshold = epsilon_threshold(round_index, cfg.label_scale, cfg.curve)
        num_labels = label_matrix.shape[1]
        for label in range(num_labels):
            column = label_matrix[:, label]
            if np.isnan(column).any():
                logger.info(
                    "round %d: label %d absent from some evaluation, skipped", round_index, label
                )
                continue
            mean_label = float(np.mean(column))
            for row, cid in enumerate(client_ids):
                observed = float(column[row])
                if check_label_deviation(
                    observed, mean_label, round_index, cfg.label_scale, cfg.curve
                ):
                    events.append(
                        DetectionEvent(
                            round=round_index,
                            client_id=cid,
                            cause=LABEL_DEVIATION,
                            label=label,
                            observed=observed,
                            mean=mean_label,
                            threshold=label_threshold,
                        )
                    )

    events.sort(key=lambda e: (e.client_id, e.cause != AVERAGE_DEVIATION, e.label or 0))
    return events
