"""Held-out evaluation: splits, confusion matrices, precision/recall/F1, external predictions."""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import Corpus
from .labels import LabelSet
from .mnb import MnbModel, argmax_label, predict
from .text import tokenize, vectorize_tokens


class EvaluationError(ValueError):
    pass


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def train_test_split(corpus: Corpus, test_fraction: float, seed: int) -> tuple[Corpus, Corpus]:
    """Stratified split: per label, ``round(n * test_fraction)`` snippets (at least 1) go to test.

    Both halves keep the corpus order and its label set.
    """
    if not 0 < test_fraction < 1:
        raise EvaluationError("test fraction must lie strictly between 0 and 1")
    by_label: dict[str, list[int]] = {}
    for i, s in enumerate(corpus):
        by_label.setdefault(s.language, []).append(i)
    rng = random.Random(seed)
    test_idx: set[int] = set()
    for lab in corpus.label_set.labels:
        members = by_label.get(lab)
        if not members:
            continue
        if len(members) < 2:
            raise EvaluationError(f"label {lab!r} has a single snippet; cannot split it")
        n_test = min(max(1, _round_half_up(len(members) * test_fraction)), len(members) - 1)
        test_idx.update(rng.sample(members, n_test))
    train = tuple(s for i, s in enumerate(corpus) if i not in test_idx)
    test = tuple(s for i, s in enumerate(corpus) if i in test_idx)
    return Corpus(train, corpus.label_set), Corpus(test, corpus.label_set)


def subset_corpus(corpus: Corpus, labels: Sequence[str]) -> Corpus:
    """Restrict a corpus (and its label set) to `labels`, e.g. the C family."""
    labels = list(labels)
    counts = corpus.per_language_counts
    missing = [lab for lab in labels if not counts.get(lab)]
    if missing:
        raise EvaluationError(f"labels absent from corpus: {missing}")
    keep = set(labels)
    return Corpus(tuple(s for s in corpus if s.language in keep), corpus.label_set.restrict(labels))


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    labels: tuple[str, ...]
    counts: np.ndarray  # counts[gold, predicted]

    def __eq__(self, other):
        return (isinstance(other, ConfusionMatrix) and self.labels == other.labels
                and np.array_equal(self.counts, other.counts))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "counts": self.counts.tolist()}


def confusion(gold: Sequence[str], pred: Sequence[str], labels: LabelSet | Sequence[str]) -> ConfusionMatrix:
    labels = tuple(labels)
    if len(gold) != len(pred):
        raise EvaluationError(f"{len(gold)} gold labels but {len(pred)} predictions")
    index = {lab: i for i, lab in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for g, p in zip(gold, pred):
        if g not in index or p not in index:
            bad = g if g not in index else p
            raise EvaluationError(f"label {bad!r} is not in the label set")
        counts[index[g], index[p]] += 1
    return ConfusionMatrix(labels, counts)


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvaluationReport:
    matrix: ConfusionMatrix
    accuracy: float
    per_class: dict[str, ClassScores]
    macro: dict[str, float]
    zero_division: tuple[str, ...] = ()
    averaging: str = "macro"

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro": dict(self.macro),
            "averaging": self.averaging,
            "per_class": {lab: {"precision": c.precision, "recall": c.recall,
                                "f1": c.f1, "support": c.support}
                          for lab, c in self.per_class.items()},
            "zero_division": list(self.zero_division),
            "matrix": self.matrix.to_dict(),
        }

    def ranked(self) -> list[tuple[str, ClassScores]]:
        """Classes by descending F1, ties by label."""
        return sorted(self.per_class.items(), key=lambda kv: (-kv[1].f1, kv[0]))


def _ratio(num: int, den: int) -> tuple[float, bool]:
    return (num / den, False) if den else (0.0, True)


def metrics(matrix: ConfusionMatrix) -> EvaluationReport:
    counts = matrix.counts
    total = int(counts.sum())
    if total == 0:
        raise EvaluationError("cannot score an empty confusion matrix")
    per_class = {}
    zero_div = []
    for i, lab in enumerate(matrix.labels):
        tp = int(counts[i, i])
        p, zp = _ratio(tp, int(counts[:, i].sum()))
        r, zr = _ratio(tp, int(counts[i, :].sum()))
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        if zp or zr:
            zero_div.append(lab)
        per_class[lab] = ClassScores(p, r, f1, int(counts[i, :].sum()))
    n = len(per_class)
    macro = {key: math.fsum(getattr(c, key) for c in per_class.values()) / n
             for key in ("precision", "recall", "f1")}
    accuracy = int(np.trace(counts)) / total
    return EvaluationReport(matrix, accuracy, per_class, macro, tuple(zero_div))


def predict_corpus(model: MnbModel, corpus: Corpus) -> list:
    cfg = model.config
    return [predict(model, vectorize_tokens(tokenize(s.text, cfg), model.vocab, cfg)) for s in corpus]


def _report_labels(test: Corpus, pred: Sequence[str]) -> list[str]:
    # label-set labels seen in gold or predictions, then any others
    seen = set(test.labels) | set(pred)
    ordered = [lab for lab in test.label_set.labels if lab in seen]
    return ordered + sorted(seen - set(ordered))


def evaluate_model(model: MnbModel, test: Corpus) -> EvaluationReport:
    if not len(test):
        raise EvaluationError("empty test corpus")
    unknown = sorted({s.language for s in test} - set(model.labels))
    if unknown:
        raise EvaluationError(f"test labels unknown to the model: {unknown}")
    pred = [p.label for p in predict_corpus(model, test)]
    return metrics(confusion(test.labels, pred, _report_labels(test, pred)))


# ---------------------------------------------------------------- external predictions


def load_external(path: str | Path) -> dict[str, str | dict[str, float]]:
    """Read an external predictions file: ``{snippet_id: label | {label: probability}}``."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise EvaluationError("external predictions must be a JSON object keyed by snippet id")
    for sid, entry in data.items():
        if isinstance(entry, dict):
            for lab, p in entry.items():
                if not isinstance(p, (int, float)) or isinstance(p, bool) or p < 0:
                    raise EvaluationError(f"{sid}: probability for {lab!r} must be a number >= 0")
            if not entry:
                raise EvaluationError(f"{sid}: empty probability map")
        elif not isinstance(entry, str):
            raise EvaluationError(f"{sid}: entry must be a label or a probability map")
    return data


def decode_external(entry: str | Mapping[str, float]) -> str:
    if isinstance(entry, str):
        return entry
    return argmax_label(dict(entry))


def compare_external(test: Corpus, external: Mapping[str, str | Mapping[str, float]]) -> EvaluationReport:
    """Score someone else's predictions for `test` exactly as our own are scored."""
    if not len(test):
        raise EvaluationError("empty test corpus")
    missing = [s.id for s in test if s.id not in external]
    if missing:
        raise EvaluationError(f"external predictions missing ids: {', '.join(missing)}")
    pred = [decode_external(external[s.id]) for s in test]
    outside = sorted({p for p in pred} - set(test.label_set.labels))
    if outside:
        raise EvaluationError(f"external predictions use labels outside the label set: {outside}")
    return metrics(confusion(test.labels, pred, _report_labels(test, pred)))


def predictions_to_external(test: Corpus, preds) -> dict[str, dict[str, float]]:
    return {s.id: dict(p.posterior) for s, p in zip(test, preds)}


# ---------------------------------------------------------------- rendering


def render_text(report: EvaluationReport) -> str:
    width = max([len("language")] + [len(lab) for lab in report.per_class])
    lines = [f"{'language':<{width}}  precision  recall  f1-score  support"]
    for lab, c in report.ranked():
        lines.append(f"{lab:<{width}}  {c.precision:9.2f}  {c.recall:6.2f}  {c.f1:8.2f}  {c.support:7d}")
    m = report.macro
    lines.append("")
    lines.append(f"{'macro avg':<{width}}  {m['precision']:9.2f}  {m['recall']:6.2f}  {m['f1']:8.2f}"
                 f"  {report.matrix.total:7d}")
    lines.append(f"accuracy {report.accuracy:.4f}")
    if report.zero_division:
        lines.append(f"zero-division (scored 0): {', '.join(report.zero_division)}")
    lines.append("")
    lines.append("confusion matrix (rows = gold, columns = predicted)")
    labels = report.matrix.labels
    cw = max(5, max(len(lab) for lab in labels))
    lines.append(" " * (width + 2) + " ".join(f"{lab:>{cw}}" for lab in labels))
    for lab, row in zip(labels, report.matrix.counts.tolist()):
        lines.append(f"{lab:<{width}}  " + " ".join(f"{n:>{cw}d}" for n in row))
    return "\n".join(lines) + "\n"


def render_json(report: EvaluationReport, meta: dict | None = None) -> str:
    d = report.to_dict()
    if meta:
        d["meta"] = meta
    return json.dumps(d, indent=2, ensure_ascii=False) + "\n"
