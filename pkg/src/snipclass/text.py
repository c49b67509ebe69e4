"""Bag-of-words features for code snippets: tokenizing, TF-IDF, top-k pruning."""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, asdict
from typing import Iterable, Sequence

import numpy as np

TOKEN_RULE = "alnum_underscore"
_TOKEN_RE = re.compile(r"[a-z0-9_]+")
_TOKEN_RE_CASED = re.compile(r"[A-Za-z0-9_]+")

FEATURE_MODES = ("tfidf", "counts")
SELECT_MODES = ("tfidf", "count")

# term index -> weight; never holds explicit zeros
SparseVector = dict


@dataclass(frozen=True)
class PipelineConfig:
    top_k: int = 10
    token_rule: str = TOKEN_RULE
    lowercase: bool = True
    features: str = "tfidf"
    select_by: str = "tfidf"
    min_df: int = 1

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.token_rule != TOKEN_RULE:
            raise ValueError(f"unknown token rule {self.token_rule!r}")
        if self.features not in FEATURE_MODES:
            raise ValueError(f"features must be one of {FEATURE_MODES}")
        if self.select_by not in SELECT_MODES:
            raise ValueError(f"select_by must be one of {SELECT_MODES}")
        if self.min_df < 1:
            raise ValueError("min_df must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        return cls(**d)


def tokenize(text: str, config: PipelineConfig = PipelineConfig()) -> list[str]:
    if config.lowercase:
        return _TOKEN_RE.findall(text.lower())
    return _TOKEN_RE_CASED.findall(text)


@dataclass(frozen=True, eq=False)
class Vocabulary:
    terms: tuple[str, ...]
    doc_freq: np.ndarray
    idf: np.ndarray
    n_docs: int

    def __post_init__(self):
        object.__setattr__(self, "index_of", {t: i for i, t in enumerate(self.terms)})

    def __len__(self) -> int:
        return len(self.terms)

    def __eq__(self, other):
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return (self.terms == other.terms and self.n_docs == other.n_docs
                and np.array_equal(self.doc_freq, other.doc_freq)
                and np.array_equal(self.idf, other.idf))

    def to_dict(self) -> dict:
        return {"terms": list(self.terms), "doc_freq": self.doc_freq.tolist(),
                "idf": self.idf.tolist(), "n_docs": self.n_docs}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(tuple(d["terms"]), np.asarray(d["doc_freq"], dtype=np.int64),
                   np.asarray(d["idf"], dtype=np.float64), int(d["n_docs"]))


def smoothed_idf(doc_freq, n_docs: int):
    return np.log((1.0 + n_docs) / (1.0 + np.asarray(doc_freq, dtype=np.float64))) + 1.0


def fit_vocabulary_tokens(docs: Sequence[Sequence[str]], config: PipelineConfig = PipelineConfig()) -> Vocabulary:
    """Fit on already-tokenized documents."""
    df: Counter = Counter()
    for toks in docs:
        df.update(set(toks))
    terms = sorted(t for t, n in df.items() if n >= config.min_df)
    if not terms:
        raise ValueError("empty vocabulary")
    doc_freq = np.array([df[t] for t in terms], dtype=np.int64)
    n_docs = len(docs)
    return Vocabulary(tuple(terms), doc_freq, smoothed_idf(doc_freq, n_docs), n_docs)


def fit_vocabulary(texts: Iterable[str], config: PipelineConfig = PipelineConfig()) -> Vocabulary:
    """Fit a vocabulary on raw snippet texts (pass ``corpus.texts`` for a Corpus)."""
    return fit_vocabulary_tokens([tokenize(t, config) for t in texts], config)


def term_counts(tokens: Iterable[str], vocab: Vocabulary) -> SparseVector:
    out: dict[int, float] = {}
    index_of = vocab.index_of
    for tok in tokens:
        i = index_of.get(tok)
        if i is not None:
            out[i] = out.get(i, 0) + 1
    return out


def tfidf_transform(counts: SparseVector, vocab: Vocabulary) -> SparseVector:
    if not counts:
        return {}
    idf = vocab.idf
    weighted = {i: c * float(idf[i]) for i, c in counts.items() if c}
    norm = math.sqrt(math.fsum(w * w for w in weighted.values()))
    if norm == 0.0:
        return {}
    return {i: w / norm for i, w in weighted.items()}


def top_k_indices(v: SparseVector, k: int) -> list[int]:
    """Indices of the k largest weights; ties go to the smaller index."""
    return sorted(v, key=lambda i: (-v[i], i))[:k]


def select_top_k(v: SparseVector, k: int) -> SparseVector:
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(v) <= k:
        return dict(v)
    keep = top_k_indices(v, k)
    return {i: v[i] for i in sorted(keep)}


def vectorize_tokens(tokens: Sequence[str], vocab: Vocabulary, config: PipelineConfig) -> SparseVector:
    counts = term_counts(tokens, vocab)
    weights = tfidf_transform(counts, vocab)
    values = weights if config.features == "tfidf" else counts
    if len(values) <= config.top_k:
        return dict(values)
    ranking = weights if config.select_by == "tfidf" else counts
    return {i: values[i] for i in sorted(top_k_indices(ranking, config.top_k))}


def vectorize(text: str, vocab: Vocabulary, config: PipelineConfig) -> SparseVector:
    return vectorize_tokens(tokenize(text, config), vocab, config)


def vectorize_corpus(corpus, vocab: Vocabulary, config: PipelineConfig) -> list[tuple[SparseVector, str]]:
    return [(vectorize(s.text, vocab, config), s.language) for s in corpus]
