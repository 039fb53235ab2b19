"""Text features over a training vocabulary.

Documents are lists of sentences (token lists). Bag-of-words uses unigram
counts; the tf-idf variant adds within-sentence bigrams and reweights by
smoothed inverse document frequency, then L2-normalizes each row. Terms
unseen in training are ignored at transform time.
"""
from __future__ import annotations

import math

import numpy as np


def extract_terms(doc: list, bigrams: bool = False) -> list[str]:
    terms = [t for sent in doc for t in sent]
    if bigrams:
        for sent in doc:
            terms.extend(f"{a} {b}" for a, b in zip(sent, sent[1:]))
    return terms


class Vocabulary:
    def __init__(self, index: dict, df: np.ndarray, n_docs: int):
        self.index = index
        self.df = df
        self.n_docs = n_docs

    @property
    def size(self) -> int:
        return len(self.index)

    @property
    def terms(self) -> list[str]:
        return sorted(self.index, key=self.index.get)

    @classmethod
    def fit(cls, docs: list, bigrams: bool = False, min_df: int = 1) -> "Vocabulary":
        if not docs:
            raise ValueError("cannot fit a vocabulary on an empty corpus")
        df_counts: dict[str, int] = {}
        for doc in docs:
            for term in set(extract_terms(doc, bigrams)):
                df_counts[term] = df_counts.get(term, 0) + 1
        kept = sorted(t for t, c in df_counts.items() if c >= min_df)
        if not kept:
            raise ValueError("vocabulary is empty after document-frequency filtering")
        index = {t: i for i, t in enumerate(kept)}
        df = np.array([df_counts[t] for t in kept], dtype=np.float64)
        return cls(index, df, len(docs))


class BowFeaturizer:
    """Unigram count vectors over the training vocabulary."""

    bigrams = False

    def __init__(self, min_df: int = 1):
        self.min_df = min_df
        self.vocabulary_: Vocabulary | None = None

    def fit(self, docs: list) -> "BowFeaturizer":
        self.vocabulary_ = Vocabulary.fit(docs, bigrams=self.bigrams, min_df=self.min_df)
        return self

    def _counts(self, docs: list) -> np.ndarray:
        vocab = self.vocabulary_
        if vocab is None:
            raise ValueError("featurizer is not fitted")
        X = np.zeros((len(docs), vocab.size), dtype=np.float64)
        for i, doc in enumerate(docs):
            for term in extract_terms(doc, self.bigrams):
                j = vocab.index.get(term)
                if j is not None:
                    X[i, j] += 1.0
        return X

    def transform(self, docs: list) -> np.ndarray:
        return self._counts(docs)

    def fit_transform(self, docs: list) -> np.ndarray:
        return self.fit(docs).transform(docs)


class TfidfFeaturizer(BowFeaturizer):
    """Unigrams plus within-sentence bigrams, idf-weighted, L2-normalized.

    weight(t, d) = tf(t, d) * (ln((1 + N) / (1 + df(t))) + 1)
    """

    bigrams = True

    def transform(self, docs: list) -> np.ndarray:
        X = self._counts(docs)
        vocab = self.vocabulary_
        idf = np.log((1.0 + vocab.n_docs) / (1.0 + vocab.df)) + 1.0
        X *= idf
        norms = np.sqrt((X * X).sum(axis=1))
        nonzero = norms > 0
        X[nonzero] /= norms[nonzero, None]
        return X
