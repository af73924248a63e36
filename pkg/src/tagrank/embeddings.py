"""Skip-gram tag embeddings with negative sampling.

Each training session's tag list is one document and each tag one word.
Training is single-threaded and fully deterministic for a given seed; the
context ("output") vectors are discarded after training.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Session, TagVocabulary


@dataclass
class EmbeddingConfig:
    dim: int = 100
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    initial_lr: float = 0.025
    min_lr: float = 1e-4
    seed: int = 0


@dataclass
class TagEmbeddings:
    dim: int
    vectors: np.ndarray  # (vocab, dim)
    seed: int

    def vector(self, tag_id: int) -> np.ndarray:
        if not 0 <= tag_id < self.vectors.shape[0]:
            raise KeyError(f"unknown tag id: {tag_id}")
        return self.vectors[tag_id]


def embedding_of(embeddings: TagEmbeddings, tag_id: int) -> np.ndarray:
    return embeddings.vector(tag_id)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


def train_embeddings(
    train_sessions: Sequence[Session],
    vocabulary: TagVocabulary,
    config: EmbeddingConfig,
) -> TagEmbeddings:
    """Train skip-gram vectors over the tag-list documents.

    Negative samples are drawn from the unigram distribution raised to 0.75.
    The learning rate decays linearly with processed tokens down to
    ``config.min_lr``. Vocabulary tags absent from the training lists keep
    their seeded initial vector.
    """
    if not train_sessions:
        raise ValueError("cannot train embeddings on an empty corpus")
    if config.dim < 1 or config.epochs < 1:
        raise ValueError("dim and epochs must be >= 1")
    n_tags = len(vocabulary)
    rng = np.random.default_rng(config.seed)
    vec_in = (rng.random((n_tags, config.dim)) - 0.5) / config.dim
    vec_out = np.zeros((n_tags, config.dim))

    docs = [s.tags for s in train_sessions]
    counts = np.zeros(n_tags)
    for doc in docs:
        for t in doc:
            counts[t] += 1.0
    noise = counts**0.75
    total = noise.sum()
    if total == 0.0:
        raise ValueError("cannot train embeddings on an empty corpus")
    cum_noise = np.cumsum(noise / total)

    total_tokens = sum(len(d) for d in docs) * config.epochs
    processed = 0
    for _ in range(config.epochs):
        for doc in docs:
            for i, center in enumerate(doc):
                lr = max(
                    config.min_lr,
                    config.initial_lr * (1.0 - processed / total_tokens),
                )
                processed += 1
                span = int(rng.integers(1, config.window + 1))
                contexts = doc[max(0, i - span) : i] + doc[i + 1 : i + 1 + span]
                h = vec_in[center]
                for ctx in contexts:
                    draws = np.searchsorted(
                        cum_noise, rng.random(config.negatives)
                    )
                    negs = [int(n) for n in draws if int(n) != ctx]
                    targets = np.asarray([ctx] + negs, dtype=np.int64)
                    labels = np.zeros(len(targets))
                    labels[0] = 1.0
                    out = vec_out[targets]
                    g = lr * (labels - _sigmoid(out @ h))
                    grad_h = g @ out
                    np.add.at(vec_out, targets, np.outer(g, h))
                    h += grad_h
    if not np.isfinite(vec_in).all():
        raise FloatingPointError("non-finite embedding values after training")
    return TagEmbeddings(dim=config.dim, vectors=vec_in, seed=config.seed)


def save_embeddings(
    embeddings: TagEmbeddings, vocabulary: TagVocabulary, path: str | Path
) -> None:
    """Plain-text format: header "dim vocab_size", then tag + dim numbers per line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{embeddings.dim} {embeddings.vectors.shape[0]}\n")
        for tid, tag in enumerate(vocabulary.id_to_tag):
            values = " ".join(repr(float(x)) for x in embeddings.vectors[tid])
            fh.write(f"{tag} {values}\n")


def load_embeddings(
    path: str | Path, vocabulary: TagVocabulary, seed: int = -1
) -> TagEmbeddings:
    """Inverse of save_embeddings; rows are matched to the vocabulary by tag."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("bad embeddings header")
        dim, size = int(header[0]), int(header[1])
        if size != len(vocabulary):
            raise ValueError(
                f"embeddings vocabulary size {size} != corpus vocabulary {len(vocabulary)}"
            )
        vectors = np.zeros((size, dim))
        filled = np.zeros(size, dtype=bool)
        for line in fh:
            tokens = line.rstrip("\n").split(" ")
            if len(tokens) < dim + 1:
                raise ValueError("bad embeddings row")
            # tags may contain single internal spaces; numbers are the last dim tokens
            tag = " ".join(tokens[: len(tokens) - dim])
            tid = vocabulary.id_of(tag)
            vectors[tid] = [float(x) for x in tokens[len(tokens) - dim :]]
            filled[tid] = True
        if not filled.all():
            raise ValueError("embeddings file is missing vocabulary tags")
    return TagEmbeddings(dim=dim, vectors=vectors, seed=seed)
