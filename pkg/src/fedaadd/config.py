"""Experiment configuration: YAML loading, validation, and defaults.

The config file is a single YAML document. Unknown keys anywhere are
rejected by name so typos fail loudly. Field defaults are documented in the
README; every omitted seed is derived from ``master_seed`` with a component
tag, so two configs differing only in one section keep identical random
streams everywhere else.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .attacks import PoisonConfig
from .data import DatasetSpec
from .detector import AADD_1_0, AADD_2_0, DetectorConfig, ThresholdCurve
from .errors import ConfigurationError
from .federation import BlacklistPolicy
from .model import LOGREG, MLP, TrainConfig
from .seeding import derive_seed


@dataclass(frozen=True)
class ModelSpec:
    """Classifier family trained by the clients."""

    kind: str = LOGREG
    hidden_units: int = 32

    def validate(self) -> None:
        if self.kind not in (LOGREG, MLP):
            raise ConfigurationError(f"model.kind: must be {LOGREG!r} or {MLP!r}")
        if self.kind == MLP and self.hidden_units < 1:
            raise ConfigurationError("model.hidden_units: must be >= 1")


@dataclass
class ExperimentConfig:
    """Fully resolved settings for one simulation run."""

    dataset: DatasetSpec
    train: TrainConfig
    model: ModelSpec
    num_clients: int
    rounds: int
    poisoned_clients: list[tuple[int, PoisonConfig]]
    detector: DetectorConfig | None
    blacklist: BlacklistPolicy
    master_seed: int
    output_dir: Path
    discard_on_arrival: bool = False
    baseline_accuracy: float | None = None
    train_file: Path | None = None
    test_file: Path | None = None

    def validate(self) -> None:
        if self.rounds < 1:
            raise ConfigurationError(f"rounds: must be >= 1 (got {self.rounds})")
        if self.num_clients < 1:
            raise ConfigurationError(f"num_clients: must be >= 1 (got {self.num_clients})")
        if self.train_file is None:
            self.dataset.validate()
        self.train.validate()
        self.model.validate()
        self.blacklist.validate()
        if self.detector is not None:
            self.detector.validate()
        seen: set[int] = set()
        for index, (client_id, poison) in enumerate(self.poisoned_clients):
            where = f"poisoned_clients[{index}]"
            if not 0 <= client_id < self.num_clients:
                raise ConfigurationError(
                    f"{where}.client_id: {client_id} outside [0, {self.num_clients})"
                )
            if client_id in seen:
                raise ConfigurationError(f"{where}.client_id: duplicate id {client_id}")
            seen.add(client_id)
            try:
                poison.validate(self.dataset.num_classes)
            except ConfigurationError as exc:
                raise ConfigurationError(f"{where}.poison.{exc}") from exc
        if (self.train_file is None) != (self.test_file is None):
            raise ConfigurationError(
                "dataset.train_file and dataset.test_file must be given together"
            )
        if self.baseline_accuracy is not None and not 0.0 <= self.baseline_accuracy <= 1.0:
            raise ConfigurationError("baseline_accuracy: must be in [0, 1]")


_TOP_KEYS = {
    "dataset",
    "num_clients",
    "rounds",
    "train",
    "model",
    "poisoned_clients",
    "detector",
    "blacklist",
    "discard_on_arrival",
    "master_seed",
    "output_dir",
    "baseline_accuracy",
}
_DATASET_KEYS = {
    "num_classes",
    "feature_dim",
    "examples_per_client",
    "test_set_size",
    "generator_seed",
    "cluster_separation",
    "cluster_spread",
    "pixel_features",
    "train_file",
    "test_file",
}
_TRAIN_KEYS = {"epochs", "batch_size", "learning_rate", "rng_seed"}
_MODEL_KEYS = {"kind", "hidden_units"}
_POISON_KEYS = {
    "strategy",
    "no_labels",
    "source_label",
    "target_label",
    "part_of_labels",
    "perc_img",
    "nr_pixels",
    "pixel_threshold",
    "pixel_group_size",
    "rng_seed",
}
_DETECTOR_KEYS = {"enabled", "version", "average_scale", "label_scale", "curve"}
_CURVE_KEYS = {"log_coefficient", "gain", "decay_exponent", "log_exponent"}
_BLACKLIST_KEYS = {"enabled", "detections_required", "window_rounds"}


def _require_mapping(value, where: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigurationError(f"{where}: expected a mapping")
    return value


def _reject_unknown(mapping: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigurationError(f"{where}: unknown key {unknown[0]!r}")


def _parse_poison(raw: dict, where: str) -> PoisonConfig:
    _reject_unknown(raw, _POISON_KEYS, where)
    if "strategy" not in raw:
        raise ConfigurationError(f"{where}.strategy: required")
    kwargs = dict(raw)
    target = kwargs.get("target_label")
    if isinstance(target, str):
        kwargs["target_label"] = target.lower()
    return PoisonConfig(**kwargs)


def _parse_detector(raw, where: str) -> DetectorConfig | None:
    if raw is None:
        return None
    raw = _require_mapping(raw, where)
    _reject_unknown(raw, _DETECTOR_KEYS, where)
    if not raw.get("enabled", True):
        return None
    curve_raw = _require_mapping(raw.get("curve"), f"{where}.curve")
    _reject_unknown(curve_raw, _CURVE_KEYS, f"{where}.curve")
    curve = ThresholdCurve(**curve_raw)
    version = raw.get("version", AADD_2_0)
    if version not in (AADD_1_0, AADD_2_0):
        raise ConfigurationError(f"{where}.version: must be {AADD_1_0} or {AADD_2_0}")
    return DetectorConfig(
        version=version,
        average_scale=float(raw.get("average_scale", 1.0)),
        label_scale=float(raw.get("label_scale", 4.8)),
        curve=curve,
    )


def parse_config(
    raw: dict, base_dir: Path | None = None, master_seed_override: int | None = None
) -> ExperimentConfig:
    """Build and validate an :class:`ExperimentConfig` from a parsed mapping."""
    raw = _require_mapping(raw, "config")
    _reject_unknown(raw, _TOP_KEYS, "config")
    if master_seed_override is not None:
        master_seed = master_seed_override
    elif "master_seed" in raw:
        master_seed = int(raw["master_seed"])
    else:
        raise ConfigurationError("master_seed: required")

    num_clients = int(raw.get("num_clients", 10))

    dataset_raw = _require_mapping(raw.get("dataset"), "dataset")
    _reject_unknown(dataset_raw, _DATASET_KEYS, "dataset")
    dataset_kwargs = dict(dataset_raw)
    train_file = dataset_kwargs.pop("train_file", None)
    test_file = dataset_kwargs.pop("test_file", None)
    if "generator_seed" not in dataset_kwargs:
        dataset_kwargs["generator_seed"] = derive_seed(master_seed, "dataset")
    dataset = DatasetSpec(num_clients=num_clients, **dataset_kwargs)

    train_raw = _require_mapping(raw.get("train"), "train")
    _reject_unknown(train_raw, _TRAIN_KEYS, "train")
    train_kwargs = dict(train_raw)
    train_kwargs.setdefault("rng_seed", None)
    train = TrainConfig(**train_kwargs)

    model_raw = _require_mapping(raw.get("model"), "model")
    _reject_unknown(model_raw, _MODEL_KEYS, "model")
    model = ModelSpec(**model_raw)

    poisoned: list[tuple[int, PoisonConfig]] = []
    for index, entry in enumerate(raw.get("poisoned_clients") or []):
        where = f"poisoned_clients[{index}]"
        entry = _require_mapping(entry, where)
        _reject_unknown(entry, {"client_id", "poison"}, where)
        if "client_id" not in entry:
            raise ConfigurationError(f"{where}.client_id: required")
        poison = _parse_poison(_require_mapping(entry.get("poison"), f"{where}.poison"), f"{where}.poison")
        poisoned.append((int(entry["client_id"]), poison))

    detector = _parse_detector(raw["detector"], "detector") if "detector" in raw else DetectorConfig()

    blacklist_raw = _require_mapping(raw.get("blacklist"), "blacklist")
    _reject_unknown(blacklist_raw, _BLACKLIST_KEYS, "blacklist")
    blacklist = BlacklistPolicy(
        detections_required=int(blacklist_raw.get("detections_required", 3)),
        window_rounds=int(blacklist_raw.get("window_rounds", 10)),
        enabled=bool(blacklist_raw.get("enabled", False)),
    )

    def resolve(p) -> Path | None:
        if p is None:
            return None
        path = Path(p)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return path

    config = ExperimentConfig(
        dataset=dataset,
        train=train,
        model=model,
        num_clients=num_clients,
        rounds=int(raw.get("rounds", 16)),
        poisoned_clients=poisoned,
        detector=detector,
        blacklist=blacklist,
        master_seed=master_seed,
        output_dir=Path(raw.get("output_dir", "out")),
        discard_on_arrival=bool(raw.get("discard_on_arrival", False)),
        baseline_accuracy=raw.get("baseline_accuracy"),
        train_file=resolve(train_file),
        test_file=resolve(test_file),
    )
    config.validate()
    return config


def load_config(path: str | Path, master_seed_override: int | None = None) -> ExperimentConfig:
    """Parse and validate the experiment config file at ``path``.

    YAML syntax errors are reported with their line and column; validation
    errors name the offending field. ``master_seed_override`` replaces the
    file's master seed before any seeds are derived from it.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        location = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigurationError(f"{path}: parse error at {location}: {exc.problem}") from exc
    try:
        return parse_config(raw, base_dir=path.parent, master_seed_override=master_seed_override)
    except TypeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc


def config_echo(config: ExperimentConfig) -> dict:
    """Plain-dict rendering of a config for the run summary, fixed key order."""
    poison_fields = (
        "strategy",
        "no_labels",
        "source_label",
        "target_label",
        "part_of_labels",
        "perc_img",
        "nr_pixels",
        "pixel_threshold",
        "pixel_group_size",
        "rng_seed",
    )

    def poison_dict(poison: PoisonConfig) -> dict:
        return {name: getattr(poison, name) for name in poison_fields}

    detector = config.detector
    return {
        "dataset": {
            "num_classes": config.dataset.num_classes,
            "feature_dim": config.dataset.feature_dim,
            "examples_per_client": config.dataset.examples_per_client,
            "test_set_size": config.dataset.test_set_size,
            "generator_seed": config.dataset.generator_seed,
            "cluster_separation": config.dataset.cluster_separation,
            "cluster_spread": config.dataset.cluster_spread,
            "pixel_features": config.dataset.pixel_features,
            "train_file": str(config.train_file) if config.train_file else None,
            "test_file": str(config.test_file) if config.test_file else None,
        },
        "num_clients": config.num_clients,
        "rounds": config.rounds,
        "train": {
            "epochs": config.train.epochs,
            "batch_size": config.train.batch_size,
            "learning_rate": config.train.learning_rate,
            "rng_seed": config.train.rng_seed,
        },
        "model": {"kind": config.model.kind, "hidden_units": config.model.hidden_units},
        "poisoned_clients": [
            {"client_id": client_id, "poison": poison_dict(poison)}
            for client_id, poison in config.poisoned_clients
        ],
        "detector": None
        if detector is None
        else {
            "version": detector.version,
            "average_scale": detector.average_scale,
            "label_scale": detector.label_scale,
            "curve": {
                "log_coefficient": detector.curve.log_coefficient,
                "gain": detector.curve.gain,
                "decay_exponent": detector.curve.decay_exponent,
                "log_exponent": detector.curve.log_exponent,
            },
        },
        "blacklist": {
            "enabled": config.blacklist.enabled,
            "detections_required": config.blacklist.detections_required,
            "window_rounds": config.blacklist.window_rounds,
        },
        "discard_on_arrival": config.discard_on_arrival,
        "master_seed": config.master_seed,
        "baseline_accuracy": config.baseline_accuracy,
    }
