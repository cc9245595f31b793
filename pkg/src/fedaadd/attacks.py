"""Client-side poisoning strategies.

Three data attacks rewrite a copy of the client's round data before training:
random label flipping, targeted label flipping, and random pixel
perturbation. The fourth, lazy poisoning, skips training entirely and echoes
the received global parameters back to the server.

All attacks are pure: they return new example lists (sharing unmodified
entries with the input) and are deterministic given their seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledExample, one_hot
from .errors import ConfigurationError
from .model import ParameterVector

STRATEGY_NONE = "none"
STRATEGY_RANDOM_LABEL = "random_label"
STRATEGY_SPECIFIC_LABEL = "specific_label"
STRATEGY_RANDOM_PIXEL = "random_pixel"
STRATEGY_LAZY = "lazy"

STRATEGIES = (
    STRATEGY_NONE,
    STRATEGY_RANDOM_LABEL,
    STRATEGY_SPECIFIC_LABEL,
    STRATEGY_RANDOM_PIXEL,
    STRATEGY_LAZY,
)

# Sentinel for specific-label poisoning that redraws the target per example.
RANDOM_TARGET = "random"


@dataclass(frozen=True)
class PoisonConfig:
    """Which attack a client runs, and its strategy-specific knobs.

    ``rng_seed`` is optional; when omitted the experiment runner derives a
    per-client seed from the master seed.
    """

    strategy: str = STRATEGY_NONE
    no_labels: int | None = None
    source_label: int | None = None
    target_label: int | str | None = None
    part_of_labels: float = 1.0
    perc_img: float = 1.0
    nr_pixels: int = 600
    pixel_threshold: float = 0.5
    pixel_group_size: int = 1
    rng_seed: int | None = None

    def validate(self, num_classes: int | None = None) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"strategy: unknown value {self.strategy!r}")
        if self.strategy == STRATEGY_RANDOM_LABEL:
            if self.no_labels is None or self.no_labels < 0:
                raise ConfigurationError(
                    f"no_labels: required and must be >= 0 for {self.strategy} (got {self.no_labels})"
                )
        elif self.no_labels is not None:
            raise ConfigurationError(f"no_labels: only valid for {STRATEGY_RANDOM_LABEL}")
        if self.strategy == STRATEGY_SPECIFIC_LABEL:
            if self.source_label is None:
                raise ConfigurationError("source_label: required for specific_label")
            if num_classes is not None and not 0 <= self.source_label < num_classes:
                raise ConfigurationError(
                    f"source_label: {self.source_label} outside [0, {num_classes})"
                )
            if self.target_label is None:
                raise ConfigurationError(
                    f"target_label: required for specific_label (an integer or {RANDOM_TARGET!r})"
                )
            if isinstance(self.target_label, str) and self.target_label != RANDOM_TARGET:
                raise ConfigurationError(
                    f"target_label: must be an integer or {RANDOM_TARGET!r} (got {self.target_label!r})"
                )
            if (
                isinstance(self.target_label, int)
                and num_classes is not None
                and not 0 <= self.target_label < num_classes
            ):
                raise ConfigurationError(
                    f"target_label: {self.target_label} outside [0, {num_classes})"
                )
            if not 0.0 <= self.part_of_labels <= 1.0:
                raise ConfigurationError(
                    f"part_of_labels: must be in [0, 1] (got {self.part_of_labels})"
                )
        elif self.source_label is not None or self.target_label is not None:
            raise ConfigurationError(
                f"source_label/target_label: only valid for {STRATEGY_SPECIFIC_LABEL}"
            )
        if self.strategy == STRATEGY_RANDOM_PIXEL:
            if not 0.0 <= self.perc_img <= 1.0:
                raise ConfigurationError(f"perc_img: must be in [0, 1] (got {self.perc_img})")
            if not 0.0 <= self.pixel_threshold < 1.0:
                raise ConfigurationError(
                    f"pixel_threshold: must be in [0, 1) (got {self.pixel_threshold})"
                )
            if self.nr_pixels < 0:
                raise ConfigurationError(f"nr_pixels: must be >= 0 (got {self.nr_pixels})")
            if self.pixel_group_size < 1:
                raise ConfigurationError(
                    f"pixel_group_size: must be >= 1 (got {self.pixel_group_size})"
                )


def poison_random_labels(
    data: list[LabeledExample], no_labels: int, seed: int
) -> list[LabeledExample]:
    """Overwrite random labels with random classes, one index per data half.

    Runs ``no_labels`` iterations. Each iteration draws one class uniformly,
    then one index in the first half of ``data`` and one in the second half,
    and overwrites both labels with that class. Index collisions are allowed
    and later writes win, so the number of distinct labels touched falls
    short of ``no_labels``. Features are never modified.
    """
    if no_labels < 0:
        raise ConfigurationError(f"no_labels: must be >= 0 (got {no_labels})")
    if len(data) < 2:
        raise ValueError("poison_random_labels requires at least 2 examples")
    num_classes = len(data[0].label)
    rng = np.random.Generator(np.random.PCG64(seed))
    half = len(data) // 2
    poisoned = list(data)
    for _ in range(no_labels):
        label = one_hot(int(rng.integers(num_classes)), num_classes)
        first = int(rng.integers(0, half))
        second = int(rng.integers(half, len(data)))
        poisoned[first] = LabeledExample(poisoned[first].features, label)
        poisoned[second] = LabeledExample(poisoned[second].features, label.copy())
    return poisoned


def poison_specific_labels(
    data: list[LabeledExample],
    source_label: int,
    target: int | str,
    part_of_labels: float,
    seed: int,
) -> list[LabeledExample]:
    """Relabel examples of one class to a target class.

    Each example whose label is ``source_label`` is relabeled with
    probability ``part_of_labels``. The target is either a fixed class or,
    with ``RANDOM_TARGET``, a fresh uniform draw per example (which may
    redraw the source class itself).
    """
    num_classes = len(data[0].label) if data else 0
    if data and not 0 <= source_label < num_classes:
        raise ConfigurationError(f"source_label: {source_label} outside [0, {num_classes})")
    if isinstance(target, str) and target != RANDOM_TARGET:
        raise ConfigurationError(f"target: must be an integer or {RANDOM_TARGET!r}")
    rng = np.random.Generator(np.random.PCG64(seed))
    poisoned = list(data)
    for i, example in enumerate(poisoned):
        if example.label_index() != source_label:
            continue
        # random() lies in [0, 1), so 0.0 never poisons and 1.0 always does.
        if rng.random() < part_of_labels:
            new_label = int(rng.integers(num_classes)) if target == RANDOM_TARGET else int(target)
            poisoned[i] = LabeledExample(example.features, one_hot(new_label, num_classes))
    return poisoned


def poison_random_pixels(
    data: list[LabeledExample],
    perc_img: float,
    nr_pixels: int,
    threshold: float,
    seed: int,
    group_size: int = 1,
) -> list[LabeledExample]:
    """Randomly rescale feature values of a fraction of the examples.

    Selects ``floor(perc_img * len(data))`` distinct examples. For each,
    ``nr_pixels`` times (repeats allowed) draws one group of ``group_size``
    consecutive coordinates and replaces every value v in the group with
    ``round(uniform(v * (1 - threshold), v * (1 + threshold)))``. The
    rounding means features should be integer-like, e.g. pixel values in
    [0, 255]. Labels are never modified.
    """
    if not 0.0 <= perc_img <= 1.0:
        raise ConfigurationError(f"perc_img: must be in [0, 1] (got {perc_img})")
    if not 0.0 <= threshold < 1.0:
        raise ConfigurationError(f"threshold: must be in [0, 1) (got {threshold})")
    if not data:
        return []
    feature_dim = len(data[0].features)
    if feature_dim % group_size != 0:
        raise ConfigurationError(
            f"pixel_group_size: {group_size} does not divide feature_dim {feature_dim}"
        )
    num_groups = feature_dim // group_size
    rng = np.random.Generator(np.random.PCG64(seed))
    poisoned = list(data)
    selected = rng.choice(len(data), size=int(perc_img * len(data)), replace=False)
    for idx in selected:
        features = poisoned[idx].features.copy()
        for _ in range(nr_pixels):
            group = int(rng.integers(num_groups))
            for offset in range(group_size):
                coord = group * group_size + offset
                value = features[coord]
                lo = value * (1.0 - threshold)
                hi = value * (1.0 + threshold)
                if lo > hi:
                    lo, hi = hi, lo
                features[coord] = np.rint(rng.uniform(lo, hi))
        poisoned[idx] = LabeledExample(features, poisoned[idx].label)
    return poisoned


def lazy_update(received: ParameterVector) -> ParameterVector:
    """Echo the received parameters back unchanged; no training happens."""
    return received.copy()


def apply_poison(
    data: list[LabeledExample], cfg: PoisonConfig, seed: int
) -> list[LabeledExample]:
    """Apply ``cfg``'s data attack to a copy of ``data``.

    ``none`` and ``lazy`` return the input untouched; lazy poisoning acts on
    the parameter exchange, not the data.
    """
    if cfg.strategy in (STRATEGY_NONE, STRATEGY_LAZY):
        return data
    if cfg.strategy == STRATEGY_RANDOM_LABEL:
        return poison_random_labels(data, cfg.no_labels, seed)
    if cfg.strategy == STRATEGY_SPECIFIC_LABEL:
        return poison_specific_labels(
            data, cfg.source_label, cfg.target_label, cfg.part_of_labels, seed
        )
    if cfg.strategy == STRATEGY_RANDOM_PIXEL:
        return poison_random_pixels(
            data, cfg.perc_img, cfg.nr_pixels, cfg.pixel_threshold, seed, cfg.pixel_group_size
        )
    raise ConfigurationError(f"strategy: unknown value {cfg.strategy!r}")
