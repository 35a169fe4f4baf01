"""Patch-index bookkeeping and the stochastic embedding samplers.

Positive embeddings come from the target branch's prompt-relevant patches,
negatives from each branch's own irrelevant patches; fractional sampling
rates round up so a single surviving patch is never dropped to nothing.
Batches slice the hidden-state tensors directly, so target-branch batches
stay attached to the autograd graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch

from ._validation import check_in_range
from .exceptions import ConfigurationError


@dataclass(frozen=True)
class PatchIndexSets:
    """Disjoint relevant/irrelevant patch indices for one map."""

    positive: np.ndarray
    negative: np.ndarray
    modality: Optional[str] = None
    branch: Optional[str] = None

    def __post_init__(self):
        pos = np.asarray(self.positive, dtype=np.int64)
        neg = np.asarray(self.negative, dtype=np.int64)
        object.__setattr__(self, "positive", pos)
        object.__setattr__(self, "negative", neg)
        if np.intersect1d(pos, neg).size:
            raise ConfigurationError("positive and negative index sets must be disjoint")


@dataclass
class EmbeddingBatch:
    """Sampled hidden-state rows plus their provenance.

    ``origin`` is (modality, branch, polarity); ``source_indices`` are the
    patch indices each row came from.
    """

    vectors: torch.Tensor
    origin: tuple[str, str, str]
    source_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        self.source_indices = np.asarray(self.source_indices, dtype=np.int64)
        if len(self.vectors) != len(self.source_indices):
            raise ConfigurationError(
                f"{len(self.vectors)} vectors but {len(self.source_indices)} source indices")

    def __len__(self) -> int:
        return int(len(self.source_indices))

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[-1]) if self.vectors.ndim else 0


def _take(hidden, indices: np.ndarray, origin) -> EmbeddingBatch:
    if isinstance(hidden, torch.Tensor):
        vectors = hidden[torch.from_numpy(indices)]
    else:
        vectors = np.asarray(hidden)[indices]
        vectors = torch.as_tensor(vectors)
    return EmbeddingBatch(vectors=vectors, origin=tuple(origin), source_indices=indices)


def _sample_count(rate: float, population: int) -> int:
    return min(population, math.ceil(rate * population))


def sample_positive(hidden, idx: PatchIndexSets, rate: float,
                    rng: np.random.Generator) -> EmbeddingBatch:
    """Uniform sample without replacement of ceil(rate*|I+|) relevant patches."""
    check_in_range(rate, 0.0, 1.0, "positive sampling rate", lo_open=True)
    origin = (idx.modality or "?", idx.branch or "target", "positive")
    if idx.positive.size == 0:
        empty = np.empty(0, dtype=np.int64)
        return _take(hidden, empty, origin)
    k = _sample_count(rate, idx.positive.size)
    chosen = rng.choice(idx.positive, size=k, replace=False)
    return _take(hidden, np.asarray(chosen, dtype=np.int64), origin)


def sample_negative(hidden_src, hidden_trg, idx_src: PatchIndexSets,
                    idx_trg: PatchIndexSets, rate: float,
                    rng: np.random.Generator) -> tuple[EmbeddingBatch, EmbeddingBatch]:
    """Independent per-branch samples of ceil(rate*|I-|) irrelevant patches.

    Each branch is thresholded on its own relevance map, so the two index
    sets (and the two draws) are independent.
    """
    check_in_range(rate, 0.0, 1.0, "negative sampling rate", lo_open=True)

    def _draw(hidden, idx: PatchIndexSets, branch: str) -> EmbeddingBatch:
        origin = (idx.modality or "?", branch, "negative")
        if idx.negative.size == 0:
            return _take(hidden, np.empty(0, dtype=np.int64), origin)
        k = _sample_count(rate, idx.negative.size)
        chosen = rng.choice(idx.negative, size=k, replace=False)
        return _take(hidden, np.asarray(chosen, dtype=np.int64), origin)

    return _draw(hidden_src, idx_src, "source"), _draw(hidden_trg, idx_trg, "target")


def align_counts(a: EmbeddingBatch, b: EmbeddingBatch,
                 rng: np.random.Generator) -> tuple[EmbeddingBatch, EmbeddingBatch]:
    """Randomly drop rows from the longer batch so both have min(|a|,|b|) rows.

    Survivors keep their original order; equal-length inputs pass through
    untouched.
    """
    if len(a) == len(b):
        return a, b

    def _trim(batch: EmbeddingBatch, n: int) -> EmbeddingBatch:
        keep = np.sort(rng.choice(len(batch), size=n, replace=False))
        return EmbeddingBatch(vectors=batch.vectors[torch.from_numpy(keep)]
                              if isinstance(batch.vectors, torch.Tensor) else batch.vectors[keep],
                              origin=batch.origin,
                              source_indices=batch.source_indices[keep])

    n = min(len(a), len(b))
    if len(a) > n:
        return _trim(a, n), b
    return a, _trim(b, n)
