"""Multinomial Naive Bayes over sparse (possibly fractional) term weights."""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .text import (PipelineConfig, SparseVector, Vocabulary, fit_vocabulary_tokens, tokenize,
                   vectorize_tokens)

MODEL_FORMAT = "snipclass-mnb"
MODEL_VERSION = 1
DEFAULT_ALPHA_GRID = (0.001, 0.01, 0.1, 0.5, 1.0)


class TrainingError(ValueError):
    pass


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MnbModel:
    labels: tuple[str, ...]
    log_prior: np.ndarray          # (n_classes,)
    log_likelihood: np.ndarray     # (n_classes, |V|)
    alpha: float
    vocab: Vocabulary
    config: PipelineConfig
    format_version: int = MODEL_VERSION
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "format_version": self.format_version,
            "alpha": self.alpha,
            "config": self.config.to_dict(),
            "labels": list(self.labels),
            "log_prior": self.log_prior.tolist(),
            "vocabulary": self.vocab.to_dict(),
            "log_likelihood": self.log_likelihood.tolist(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MnbModel":
        if d.get("format") != MODEL_FORMAT:
            raise ModelFormatError("not a snipclass model file")
        if d.get("format_version") != MODEL_VERSION:
            raise ModelFormatError(f"unsupported model version {d.get('format_version')!r}")
        try:
            vocab = Vocabulary.from_dict(d["vocabulary"])
            model = cls(
                labels=tuple(d["labels"]),
                log_prior=np.asarray(d["log_prior"], dtype=np.float64),
                log_likelihood=np.asarray(d["log_likelihood"], dtype=np.float64),
                alpha=float(d["alpha"]),
                vocab=vocab,
                config=PipelineConfig.from_dict(d["config"]),
                meta=d.get("meta", {}),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"corrupt model file ({exc})") from None
        if model.log_likelihood.shape != (len(model.labels), len(vocab)) \
                or model.log_prior.shape != (len(model.labels),):
            raise ModelFormatError("corrupt model file (array shapes disagree)")
        return model


def save_model(model: MnbModel, path: str | Path) -> None:
    # json writes floats with repr(), the shortest string that round-trips exactly
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(model.to_dict(), fh, ensure_ascii=False, allow_nan=False)
        fh.write("\n")


def load_model(path: str | Path) -> MnbModel:
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"corrupt model file ({exc})") from None
    if not isinstance(d, dict):
        raise ModelFormatError("corrupt model file (not an object)")
    return MnbModel.from_dict(d)


def train(vectors: Sequence[tuple[SparseVector, str]], alpha: float, vocab: Vocabulary,
          config: PipelineConfig, labels: Sequence[str] | None = None) -> MnbModel:
    """Fit class priors and additively smoothed term likelihoods.

    ``P(t|c) = (W[c,t] + alpha) / (W[c] + alpha * |V|)`` where ``W[c,t]`` is the
    summed weight of term t over class-c vectors.  Class order is `labels` if
    given, else sorted.
    """
    if not alpha > 0:
        raise TrainingError(f"alpha must be > 0, got {alpha}")
    present = {lab for _, lab in vectors}
    if labels is None:
        labels = sorted(present)
    labels = tuple(labels)
    if len(present) < 2:
        raise TrainingError("degenerate training set: need at least 2 distinct labels")
    class_index = {lab: i for i, lab in enumerate(labels)}
    unknown = present - set(class_index)
    if unknown:
        raise TrainingError(f"labels missing from class list: {sorted(unknown)}")
    empty = [lab for lab in labels if lab not in present]
    if empty:
        raise TrainingError(f"no training vectors for labels {empty}")

    n_vocab = len(vocab)
    rows, cols, vals = [], [], []
    class_counts = np.zeros(len(labels), dtype=np.float64)
    for v, lab in vectors:
        c = class_index[lab]
        class_counts[c] += 1
        for t, w in v.items():
            rows.append(c)
            cols.append(t)
            vals.append(w)
    if cols and max(cols) >= n_vocab:
        raise TrainingError("feature index outside the vocabulary")
    weights = np.zeros((len(labels), n_vocab), dtype=np.float64)
    np.add.at(weights, (np.asarray(rows, dtype=np.intp), np.asarray(cols, dtype=np.intp)),
              np.asarray(vals, dtype=np.float64))

    log_prior = np.log(class_counts / class_counts.sum())
    smoothed = weights + alpha
    log_likelihood = np.log(smoothed) - np.log(smoothed.sum(axis=1, keepdims=True))
    return MnbModel(labels, log_prior, log_likelihood, float(alpha), vocab, config)


def log_joint(model: MnbModel, v: SparseVector) -> np.ndarray:
    if not v:
        return model.log_prior.copy()
    # fixed summation order, independent of how the dict was built
    idx = np.fromiter(sorted(v), dtype=np.intp, count=len(v))
    w = np.fromiter((v[i] for i in idx.tolist()), dtype=np.float64, count=len(v))
    return model.log_prior + model.log_likelihood[:, idx] @ w


@dataclass(frozen=True)
class Prediction:
    label: str
    posterior: dict[str, float]

    def top(self, n: int = 3) -> list[tuple[str, float]]:
        return sorted(self.posterior.items(), key=lambda kv: (-kv[1], kv[0]))[:n]


def softmax(scores: np.ndarray) -> np.ndarray:
    shifted = np.exp(scores - scores.max())
    return shifted / shifted.sum()


TIE_RTOL = 1e-12


def argmax_label(probs: dict[str, float]) -> str:
    """Highest-probability label; ties go to the lexicographically smallest.

    Probabilities within a relative 1e-12 of the maximum count as tied, so
    classes that tie in exact arithmetic are not split by rounding noise.
    """
    best = max(probs.values())
    return min(lab for lab, p in probs.items() if p >= best * (1 - TIE_RTOL))


def predict(model: MnbModel, v: SparseVector) -> Prediction:
    post = softmax(log_joint(model, v))
    posterior = {lab: float(p) for lab, p in zip(model.labels, post)}
    return Prediction(argmax_label(posterior), posterior)


def predict_text(model: MnbModel, text: str) -> Prediction:
    return predict(model, vectorize_tokens(tokenize(text, model.config), model.vocab, model.config))


# ---------------------------------------------------------------- model selection


def kfold_split(n: int, k: int, labels: Sequence[str], seed: int) -> list[list[int]]:
    """Stratified k folds over ``range(n)``.

    Each class is shuffled and dealt round-robin, continuing from the fold
    where the previous class stopped, so fold sizes differ by at most one.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if len(labels) != n:
        raise ValueError("labels must have length n")
    by_class: dict[str, list[int]] = {}
    for i, lab in enumerate(labels):
        by_class.setdefault(lab, []).append(i)
    for lab in sorted(by_class):
        if len(by_class[lab]) < k:
            raise ValueError(f"class {lab!r} has {len(by_class[lab])} members, fewer than k={k}")
    rng = random.Random(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for lab in sorted(by_class):
        members = by_class[lab][:]
        rng.shuffle(members)
        for j, i in enumerate(members):
            folds[(offset + j) % k].append(i)
        offset = (offset + len(members)) % k
    return [sorted(f) for f in folds]


@dataclass(frozen=True)
class GridSearchResult:
    alpha_grid: tuple[float, ...]
    fold_count: int
    mean_cv_accuracy: tuple[float, ...]
    best_alpha: float
    seed: int
    fold_accuracy: tuple[tuple[float, ...], ...] = ()
    scoring: str = "accuracy"

    def to_dict(self) -> dict:
        return {"alpha_grid": list(self.alpha_grid), "fold_count": self.fold_count,
                "mean_cv_accuracy": list(self.mean_cv_accuracy), "best_alpha": self.best_alpha,
                "seed": self.seed, "scoring": self.scoring}


def grid_search_cv(docs: Sequence[Sequence[str]], labels: Sequence[str], alpha_grid: Sequence[float],
                   k: int, seed: int, config: PipelineConfig) -> GridSearchResult:
    """Pick alpha by mean held-out accuracy over stratified k-fold CV.

    `docs` are token lists; the vocabulary is refit on every fold's
    training part.  Ties in mean accuracy go to the smallest alpha.
    """
    alpha_grid = tuple(float(a) for a in alpha_grid)
    if not alpha_grid:
        raise ValueError("alpha grid is empty")
    if any(not a > 0 for a in alpha_grid):
        raise ValueError("all alphas must be > 0")
    folds = kfold_split(len(docs), k, labels, seed)
    class_order = tuple(sorted(set(labels)))
    acc = np.zeros((len(alpha_grid), k))
    for f, held_out in enumerate(folds):
        held = set(held_out)
        train_idx = [i for i in range(len(docs)) if i not in held]
        vocab = fit_vocabulary_tokens([docs[i] for i in train_idx], config)
        train_vecs = [(vectorize_tokens(docs[i], vocab, config), labels[i]) for i in train_idx]
        test_vecs = [vectorize_tokens(docs[i], vocab, config) for i in held_out]
        gold = [labels[i] for i in held_out]
        for a, alpha in enumerate(alpha_grid):
            model = train(train_vecs, alpha, vocab, config, labels=class_order)
            correct = sum(predict(model, v).label == g for v, g in zip(test_vecs, gold))
            acc[a, f] = correct / len(held_out)
    means = tuple(math.fsum(row) / k for row in acc.tolist())
    best = max(means)
    best_alpha = min(a for a, m in zip(alpha_grid, means) if m == best)
    return GridSearchResult(alpha_grid, k, means, best_alpha, seed,
                            tuple(tuple(row) for row in acc.tolist()))


def fit(texts: Sequence[str], labels: Sequence[str], alpha: float, config: PipelineConfig) -> MnbModel:
    """Tokenize, fit the vocabulary, vectorize and train in one go."""
    docs = [tokenize(t, config) for t in texts]
    return _fit_docs(docs, labels, alpha, config)


def _fit_docs(docs, labels, alpha, config) -> MnbModel:
    vocab = fit_vocabulary_tokens(docs, config)
    vectors = [(vectorize_tokens(d, vocab, config), lab) for d, lab in zip(docs, labels)]
    return train(vectors, alpha, vocab, config)


def fit_with_search(texts: Sequence[str], labels: Sequence[str], alpha_grid: Sequence[float],
                    folds: int, seed: int, config: PipelineConfig) -> tuple[MnbModel, GridSearchResult]:
    """Grid-search alpha by CV, then retrain on everything at the best alpha."""
    docs = [tokenize(t, config) for t in texts]
    result = grid_search_cv(docs, labels, alpha_grid, folds, seed, config)
    model = _fit_docs(docs, labels, result.best_alpha, config)
    return model, result
