"""Detection accounting and result serialization.

Every active (client, round) pair is one detection decision: positive if the
client was flagged at least once that round. Decisions are tallied into a
confusion matrix against the ground-truth poisoned set. Blacklisted clients
stop producing decisions once removed.

Reports are written with stable formatting and field order so a seeded run
serializes byte-identically every time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .federation import RoundRecord

SUCCESSFUL = "successful"
INSUFFICIENT = "insufficient"
EXCESSIVE = "excessive"

# A successful attack lowers final accuracy by 1.0 to 1.5 percentage points:
# enough to matter, little enough to hope to stay under the detector.
SUCCESS_BAND_PP = (-1.5, -1.0)


@dataclass
class ConfusionMatrix:
    """Per-(client, round) detection decisions against ground truth."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def actual_positive(self) -> int:
        return self.tp + self.fn

    @property
    def actual_negative(self) -> int:
        return self.fp + self.tn


@dataclass
class AttackOutcome:
    """Classification of an attack's effect on final global accuracy."""

    baseline_accuracy: float
    poisoned_accuracy: float
    delta_pp: float
    classification: str


def update_confusion_matrix(
    records: list[RoundRecord], poisoned_clients: set[int]
) -> ConfusionMatrix:
    """Tally one decision per active (client, round) across ``records``.

    A client is classified positive in a round when it received at least one
    detection event that round, regardless of how many checks tripped.
    """
    matrix = ConfusionMatrix()
    for record in records:
        flagged = {event.client_id for event in record.flags}
        for cid in record.active_clients:
            positive = cid in flagged
            poisoned = cid in poisoned_clients
            if positive and poisoned:
                matrix.tp += 1
            elif positive:
                matrix.fp += 1
            elif poisoned:
                matrix.fn += 1
            else:
                matrix.tn += 1
    return matrix


def classify_attack_success(baseline: float, poisoned: float) -> AttackOutcome:
    """Classify the accuracy change of a poisoned run against its baseline.

    The drop is measured in percentage points. Within [-1.5, -1.0] the attack
    is successful (boundaries inclusive); a smaller drop is insufficient, a
    larger one excessive.
    """
    if not (0.0 <= baseline <= 1.0 and 0.0 <= poisoned <= 1.0):
        raise ValueError("accuracies must lie in [0, 1]")
    delta_pp = (poisoned - baseline) * 100.0
    lo, hi = SUCCESS_BAND_PP
    if delta_pp > hi:
        classification = INSUFFICIENT
    elif delta_pp < lo:
        classification = EXCESSIVE
    else:
        classification = SUCCESSFUL
    return AttackOutcome(baseline, poisoned, delta_pp, classification)


def _format_value(value: float) -> str:
    if math.isnan(value):
        return ""
    return repr(float(value))


def write_rounds_csv(path: Path, records: list[RoundRecord], num_classes: int) -> None:
    """One row per active (round, client): accuracies plus flag causes."""
    header = ["round", "client_id", "overall_acc"]
    header += [f"label_{label}" for label in range(num_classes)]
    header += ["flag_causes"]
    lines = [",".join(header)]
    for record in records:
        causes_by_client: dict[int, list[str]] = {}
        for event in record.flags:
            causes_by_client.setdefault(event.client_id, []).append(event.cause_tag())
        for cid in record.active_clients:
            row = [str(record.round), str(cid), _format_value(record.client_accuracies[cid])]
            label_accs = record.client_label_accuracies[cid]
            row += [_format_value(label_accs[label]) for label in range(num_classes)]
            row.append(";".join(causes_by_client.get(cid, [])))
            lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def summary_dict(
    records: list[RoundRecord],
    matrix: ConfusionMatrix,
    outcome: AttackOutcome | None,
    config_echo: dict,
    blacklist_timeline: list[tuple[int, int]],
    terminal_state: str,
) -> dict:
    """Assemble the summary payload with a fixed key order."""
    trajectory = [record.global_accuracy for record in records]
    return {
        "config": config_echo,
        "terminal_state": terminal_state,
        "rounds_completed": len(records),
        "global_accuracy_trajectory": trajectory,
        "final_global_accuracy": trajectory[-1] if trajectory else None,
        "confusion_matrix": {
            "tp": matrix.tp,
            "fp": matrix.fp,
            "fn": matrix.fn,
            "tn": matrix.tn,
            "total_decisions": matrix.total,
        },
        "attack_outcome": None
        if outcome is None
        else {
            "baseline_accuracy": outcome.baseline_accuracy,
            "poisoned_accuracy": outcome.poisoned_accuracy,
            "delta_pp": outcome.delta_pp,
            "classification": outcome.classification,
        },
        "blacklist_timeline": [
            {"round": round_index, "client_id": cid} for round_index, cid in blacklist_timeline
        ],
    }


def emit_reports(
    records: list[RoundRecord],
    matrix: ConfusionMatrix,
    outcome: AttackOutcome | None,
    destination: str | Path,
    *,
    config_echo: dict | None = None,
    blacklist_timeline: list[tuple[int, int]] | None = None,
    terminal_state: str = "completed",
    num_classes: int | None = None,
) -> None:
    """Write ``rounds.csv`` and ``summary.json`` into ``destination``.

    ``num_classes`` sizes the per-label columns; when omitted it is taken
    from the first record (an empty run then writes no label columns).
    """
    destination = Path(destination)
    destination.mkdir(parents=True, exist_ok=True)
    if num_classes is None:
        if records:
            first = next(iter(records[0].client_label_accuracies.values()))
            num_classes = len(first)
        else:
            num_classes = 0
    write_rounds_csv(destination / "rounds.csv", records, num_classes)
    summary = summary_dict(
        records,
        matrix,
        outcome,
        config_echo or {},
        blacklist_timeline or [],
        terminal_state,
    )
    text = json.dumps(summary, indent=2) + "\n"
    (destination / "summary.json").write_text(text, encoding="utf-8", newline="\n")
