"""fedaadd: a deterministic federated learning simulator for studying data and
model poisoning attacks, average accuracy deviation detection (AADD), and
client blacklisting at desk scale."""

__version__ = "0.1.0"

from .attacks import (
    PoisonConfig,
    lazy_update,
    poison_random_labels,
    poison_random_pixels,
    poison_specific_labels,
)
from .config import ExperimentConfig, ModelSpec, load_config
from .data import (
    ClientShard,
    DatasetSpec,
    LabeledExample,
    generate_synthetic_dataset,
    partition_homogeneous,
    select_round_partition,
)
from .detector import (
    AADD_1_0,
    AADD_2_0,
    DetectionEvent,
    DetectorConfig,
    ThresholdCurve,
    check_average_deviation,
    check_label_deviation,
    detect_round,
    epsilon_threshold,
)
from .errors import AllClientsBlacklistedError, ConfigurationError, ProtocolError
from .federation import (
    BlacklistPolicy,
    ClientState,
    FederatedSimulation,
    RoundRecord,
    aggregate_fedavg,
    apply_blacklist_policy,
)
from .model import (
    EvalResult,
    ParameterVector,
    ShapeTag,
    TrainConfig,
    evaluate,
    init_params,
    train_local,
)
from .reporting import (
    AttackOutcome,
    ConfusionMatrix,
    classify_attack_success,
    emit_reports,
    update_confusion_matrix,
)

__all__ = [
    "AADD_1_0",
    "AADD_2_0",
    "AllClientsBlacklistedError",
    "AttackOutcome",
    "BlacklistPolicy",
    "ClientShard",
    "ClientState",
    "ConfigurationError",
    "ConfusionMatrix",
    "DatasetSpec",
    "DetectionEvent",
    "DetectorConfig",
    "EvalResult",
    "ExperimentConfig",
    "FederatedSimulation",
    "LabeledExample",
    "ModelSpec",
    "ParameterVector",
    "PoisonConfig",
    "ProtocolError",
    "RoundRecord",
    "ShapeTag",
    "ThresholdCurve",
    "TrainConfig",
    "aggregate_fedavg",
    "apply_blacklist_policy",
    "check_average_deviation",
    "check_label_deviation",
    "classify_attack_success",
    "detect_round",
    "emit_reports",
    "epsilon_threshold",
    "evaluate",
    "generate_synthetic_dataset",
    "init_params",
    "lazy_update",
    "load_config",
    "partition_homogeneous",
    "poison_random_labels",
    "poison_random_pixels",
    "poison_specific_labels",
    "select_round_partition",
    "train_local",
    "update_confusion_matrix",
]
