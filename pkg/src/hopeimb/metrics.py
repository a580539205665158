"""Confusion counts, per-class precision/recall/F1 and their macro/weighted averages."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import Label

CLASSES = (Label.HOPE, Label.NON_HOPE)
SCORE_NAMES = ("precision", "recall", "f1")


def _as_label(v) -> Label:
    if isinstance(v, Label):
        return v
    if isinstance(v, str):
        return Label(v)
    return Label.from_index(int(v))


@dataclass(frozen=True)
class ConfusionCounts:
    """Counts with Hope as the positive class."""

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_labels(cls, predictions: Sequence, truths: Sequence) -> "ConfusionCounts":
        tp = fp = fn = tn = 0
        for p, t in zip(predictions, truths):
            p_hope = _as_label(p) is Label.HOPE
            t_hope = _as_label(t) is Label.HOPE
            if p_hope and t_hope:
                tp += 1
            elif p_hope:
                fp += 1
            elif t_hope:
                fn += 1
            else:
                tn += 1
        return cls(tp, fp, fn, tn)

    def flipped(self) -> "ConfusionCounts":
        """Same counts with NonHope as the positive class."""
        return ConfusionCounts(tp=self.tn, fp=self.fn, fn=self.fp, tn=self.tp)


@dataclass
class EvalReport:
    per_class: dict[Label, dict[str, float]]
    macro: dict[str, float]
    weighted: dict[str, float]
    support: dict[Label, int]
    confusion: ConfusionCounts
    zero_division: list[str] = field(default_factory=list)

    @property
    def macro_f1(self) -> float:
        return self.macro["f1"]

    @property
    def weighted_f1(self) -> float:
        return self.weighted["f1"]

    def to_dict(self) -> dict:
        c = self.confusion
        return {
            "per_class": {lab.value: dict(s) for lab, s in self.per_class.items()},
            "macro": dict(self.macro),
            "weighted": dict(self.weighted),
            "support": {lab.value: n for lab, n in self.support.items()},
            "confusion": {"tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn},
            "zero_division": list(self.zero_division),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvalReport":
        return cls(
            per_class={Label(k): dict(v) for k, v in d["per_class"].items()},
            macro=dict(d["macro"]),
            weighted=dict(d["weighted"]),
            support={Label(k): int(v) for k, v in d["support"].items()},
            confusion=ConfusionCounts(**d["confusion"]),
            zero_division=list(d.get("zero_division", [])),
        )

    def csv_rows(self) -> list[list]:
        rows = [["row", "precision", "recall", "f1", "support"]]
        for lab in CLASSES:
            s = self.per_class[lab]
            rows.append([lab.value, s["precision"], s["recall"], s["f1"], self.support[lab]])
        total = sum(self.support.values())
        rows.append(["macro", self.macro["precision"], self.macro["recall"], self.macro["f1"], total])
        rows.append(["weighted", self.weighted["precision"], self.weighted["recall"],
                     self.weighted["f1"], total])
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for row in self.csv_rows():
            w.writerow([f"{v:.6f}" if isinstance(v, float) else v for v in row])
        return buf.getvalue()

    def write(self, directory: str | Path) -> None:
        directory = Path(directory)
        (directory / "report.json").write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        (directory / "report.csv").write_text(self.to_csv())


def _ratio(num: int, den: int, flag: str, flags: list[str]) -> float:
    if den == 0:
        flags.append(flag)
        return 0.0
    return num / den


def _class_scores(c: ConfusionCounts, name: str, flags: list[str]) -> dict[str, float]:
    precision = _ratio(c.tp, c.tp + c.fp, f"{name}.precision", flags)
    recall = _ratio(c.tp, c.tp + c.fn, f"{name}.recall", flags)
    if precision + recall == 0:
        flags.append(f"{name}.f1")
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return {"precision": precision, "recall": recall, "f1": f1}


def average_from_class_scores(scores: Mapping, supports: Mapping | None = None,
                              mode: str = "macro") -> float:
    """Macro (0.5 * sum) or support-weighted mean of the Hope and NonHope scores."""
    scores = {_as_label(k): float(v) for k, v in scores.items()}
    if any(lab not in scores for lab in CLASSES):
        raise ValueError("scores must contain both Hope and NonHope")
    if mode == "macro":
        return 0.5 * (scores[Label.HOPE] + scores[Label.NON_HOPE])
    if mode != "weighted":
        raise ValueError(f"mode must be 'macro' or 'weighted', got {mode!r}")
    if supports is None:
        raise ValueError("weighted average needs supports")
    supports = {_as_label(k): v for k, v in supports.items()}
    if any(lab not in supports for lab in CLASSES):
        raise ValueError("supports must contain both Hope and NonHope")
    total = supports[Label.HOPE] + supports[Label.NON_HOPE]
    if total <= 0:
        raise ValueError("supports must sum to a positive number")
    return (supports[Label.HOPE] / total) * scores[Label.HOPE] + \
        (supports[Label.NON_HOPE] / total) * scores[Label.NON_HOPE]


def score(predictions: Sequence, truths: Sequence) -> EvalReport:
    if len(predictions) != len(truths):
        raise ValueError(f"{len(predictions)} predictions for {len(truths)} truths")
    if len(truths) == 0:
        raise ValueError("cannot score an empty evaluation set")
    conf = ConfusionCounts.from_labels(predictions, truths)
    flags: list[str] = []
    per_class = {
        Label.HOPE: _class_scores(conf, Label.HOPE.value, flags),
        Label.NON_HOPE: _class_scores(conf.flipped(), Label.NON_HOPE.value, flags),
    }
    support = {Label.HOPE: conf.tp + conf.fn, Label.NON_HOPE: conf.tn + conf.fp}
    macro = {}
    weighted = {}
    for name in SCORE_NAMES:
        by_class = {lab: per_class[lab][name] for lab in CLASSES}
        macro[name] = average_from_class_scores(by_class, mode="macro")
        weighted[name] = average_from_class_scores(by_class, support, mode="weighted")
    return EvalReport(per_class, macro, weighted, support, conf, flags)
