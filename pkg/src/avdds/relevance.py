"""Prompt-relevance scores from cross-attention probes.

Per patch, the raw score is the max over text tokens of the query-key product;
min-max normalization maps each audio map (and each video grid image
independently) into [0,1] before thresholding into relevant / irrelevant
index sets. A constant map has no meaningful ordering, so it normalizes to
all zeros (no positives) and is flagged.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
import torch

from ._validation import check_in_range
from .backends.base import ProbeData
from .exceptions import ConfigurationError, ShapeError
from .sampling import PatchIndexSets

logger = logging.getLogger(__name__)


@dataclass
class RelevanceMap:
    """Normalized per-patch scores: (n_q,) for audio, (M, n_q) for video grids."""

    scores: np.ndarray
    layer_set: tuple[str, ...] = ()
    branch: str = "target"
    degenerate: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.ndim not in (1, 2):
            raise ShapeError("relevance scores must be 1-D (audio) or 2-D (video grids)")

    def rows(self):
        """Iterate 1-D score vectors (one per video grid; a single one for audio)."""
        if self.scores.ndim == 1:
            yield self.scores
        else:
            yield from self.scores


@dataclass(frozen=True)
class ThresholdConfig:
    tau_a: float = 0.8
    tau_v: float = 0.8

    def __post_init__(self):
        check_in_range(self.tau_a, 0.0, 1.0, "tau_a")
        check_in_range(self.tau_v, 0.0, 1.0, "tau_v")


def _row_max_scores(queries: torch.Tensor, keys: torch.Tensor) -> np.ndarray:
    logits = queries.detach() @ keys.detach().transpose(-1, -2)
    return logits.max(dim=-1).values.cpu().numpy()


def _normalize_rows(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Min-max along the last axis; constant rows become zeros and are flagged."""
    arr = np.asarray(raw, dtype=np.float64)
    lo = arr.min(axis=-1, keepdims=True)
    hi = arr.max(axis=-1, keepdims=True)
    span = hi - lo
    flat = (span == 0.0)
    safe_span = np.where(flat, 1.0, span)
    out = np.where(flat, 0.0, (arr - lo) / safe_span)
    return out, flat.reshape(flat.shape[:-1] + (-1,))[..., 0]


def _resample_last_axis(arr: np.ndarray, n: int) -> np.ndarray:
    if arr.shape[-1] == n:
        return arr
    src = np.linspace(0.0, 1.0, arr.shape[-1])
    dst = np.linspace(0.0, 1.0, n)
    flat = arr.reshape(-1, arr.shape[-1])
    out = np.stack([np.interp(dst, src, row) for row in flat], axis=0)
    return out.reshape(arr.shape[:-1] + (n,))


def relevance_scores(probes: ProbeData) -> np.ndarray:
    """Raw per-patch prompt-relevance scores from probed queries and keys.

    Single probe layer: the plain row-max of Q K^T. Multiple layers: the mean
    of per-layer min-max-normalized row-max scores (layers with differing
    patch counts are linearly resampled to the largest raster first).
    """
    if not probes.layers:
        raise ConfigurationError("no probe layers to score")
    per_layer = [_row_max_scores(p.queries, p.keys) for p in probes.layers.values()]
    if len(per_layer) == 1:
        return per_layer[0]
    n_q = max(scores.shape[-1] for scores in per_layer)
    normalized = []
    for scores in per_layer:
        norm, _ = _normalize_rows(scores)
        normalized.append(_resample_last_axis(norm, n_q))
    return np.mean(np.stack(normalized, axis=0), axis=0)


def minmax_normalize(raw: Union[np.ndarray, Sequence[float]], *,
                     branch: str = "target",
                     layer_set: tuple[str, ...] = ()) -> RelevanceMap:
    """Map raw scores into [0,1] per audio map / per video grid image."""
    arr = np.asarray(raw, dtype=np.float64)
    if arr.size == 0:
        raise ConfigurationError("cannot normalize an empty score vector")
    out, flat = _normalize_rows(arr)
    if np.any(flat):
        logger.warning("constant relevance scores on %s branch: no patch marked relevant", branch)
    return RelevanceMap(scores=out, layer_set=tuple(layer_set), branch=branch,
                        degenerate=np.atleast_1d(flat))


def threshold_patches(scores: Union[RelevanceMap, np.ndarray], tau: float, *,
                      modality: str | None = None,
                      branch: str | None = None) -> PatchIndexSets:
    """Split a 1-D score vector at tau: I+ strictly above, ties go to I-."""
    check_in_range(tau, 0.0, 1.0, "tau")
    if isinstance(scores, RelevanceMap):
        branch = branch or scores.branch
        values = scores.scores
    else:
        values = np.asarray(scores, dtype=np.float64)
    if values.ndim != 1:
        raise ShapeError("threshold_patches expects a single 1-D map; "
                         "iterate RelevanceMap.rows() for video grids")
    idx = np.arange(values.size)
    mask = values > tau
    return PatchIndexSets(positive=idx[mask], negative=idx[~mask],
                          modality=modality, branch=branch)
