"""Patch-level contrastive losses tying the two modalities together.

``info_nce`` is the standard temperature-scaled softmax contrastive loss over
cosine similarities with positional positives. ``cmds_loss`` combines the
cross-modal alignments per grid image: relevant target-audio patches are
paired with relevant target-video patches, and irrelevant source-video
patches with irrelevant source-audio patches, positives first in each
concatenated list. Both argument orders are summed, grids averaged.

The formula never consumes the target branch's irrelevant patches; the
``eq7-plus-intramodal`` pairing variant additionally aligns each modality's
irrelevant patches across source and target branches, matched by patch index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import torch
import torch.nn.functional as F

from ._validation import check_positive
from .exceptions import ConfigurationError, ShapeError
from .sampling import EmbeddingBatch, align_counts

PAIRING_VARIANTS = ("eq7-as-written", "eq7-plus-intramodal")


@dataclass(frozen=True)
class ContrastiveConfig:
    alpha: float = 0.07
    cosine_epsilon: float = 1e-8
    pairing_variant: str = "eq7-as-written"
    lambda_cmds: float = 10.0

    def __post_init__(self):
        check_positive(self.alpha, "alpha")
        if self.cosine_epsilon < 0:
            raise ConfigurationError("cosine_epsilon must be >= 0")
        if self.lambda_cmds < 0:
            raise ConfigurationError("lambda_cmds must be >= 0")
        if self.pairing_variant not in PAIRING_VARIANTS:
            raise ConfigurationError(
                f"pairing_variant must be one of {PAIRING_VARIANTS}, got {self.pairing_variant!r}")


@dataclass
class CmdsBreakdown:
    """Bookkeeping emitted alongside the scalar loss."""

    pair_counts: list[tuple[int, int]] = field(default_factory=list)  # (positives, negatives) per grid
    degenerate_grids: list[bool] = field(default_factory=list)
    degenerate: bool = False


def _as_matrix(batch: Union[EmbeddingBatch, torch.Tensor, np.ndarray]) -> torch.Tensor:
    if isinstance(batch, EmbeddingBatch):
        batch = batch.vectors
    mat = torch.as_tensor(batch)
    if mat.ndim != 2:
        raise ShapeError(f"embedding batch must be 2-D (N, d), got shape {tuple(mat.shape)}")
    return mat


def info_nce(f_x, f_y, alpha: float, cosine_epsilon: float = 1e-8) -> torch.Tensor:
    """Mean over rows of -log softmax of the diagonal cosine similarity.

    Empty inputs define the loss as 0 (degenerate case, flagged by callers).
    """
    check_positive(alpha, "alpha")
    x = _as_matrix(f_x)
    y = _as_matrix(f_y)
    if len(x) != len(y):
        raise ShapeError(f"batch sizes differ: {len(x)} vs {len(y)}")
    if len(x) == 0:
        return torch.zeros((), dtype=x.dtype)
    if x.shape[1] != y.shape[1]:
        raise ShapeError(f"embedding dims differ: {x.shape[1]} vs {y.shape[1]}")
    dots = x @ y.T
    norms = torch.linalg.vector_norm(x, dim=1)[:, None] * torch.linalg.vector_norm(y, dim=1)[None, :]
    sim = dots / torch.clamp(norms, min=cosine_epsilon)
    logits = sim / alpha
    log_probs = torch.diagonal(logits) - torch.logsumexp(logits, dim=1)
    return -log_probs.mean()


def match_dims(batch: Union[EmbeddingBatch, torch.Tensor], target_dim: int):
    """Linearly resample each vector's feature axis to ``target_dim``.

    Features are treated as uniformly spaced samples with endpoints pinned,
    so resampling a linear ramp up and back down is exact. Identity (the same
    object) when dimensions already match. Differentiable.
    """
    if target_dim < 1:
        raise ConfigurationError("target_dim must be >= 1")
    vectors = batch.vectors if isinstance(batch, EmbeddingBatch) else batch
    vectors = torch.as_tensor(vectors)
    if vectors.ndim != 2:
        raise ShapeError("match_dims expects (N, d) embeddings")
    if vectors.shape[1] == target_dim:
        return batch
    if len(vectors) == 0:
        resampled = vectors.new_zeros((0, target_dim))
    else:
        resampled = F.interpolate(vectors.unsqueeze(1), size=target_dim,
                                  mode="linear", align_corners=True).squeeze(1)
    if isinstance(batch, EmbeddingBatch):
        return EmbeddingBatch(vectors=resampled, origin=batch.origin,
                              source_indices=batch.source_indices)
    return resampled


def _common_dim(batches) -> int:
    dims = [b.dim for b in batches if len(b) > 0]
    return max(dims) if dims else 1


def _intramodal_term(neg_src: EmbeddingBatch, neg_trg: EmbeddingBatch,
                     config: ContrastiveConfig) -> torch.Tensor:
    """Same-index pairs of irrelevant patches across the two branches."""
    common, src_pos, trg_pos = np.intersect1d(
        neg_src.source_indices, neg_trg.source_indices, return_indices=True)
    if common.size == 0:
        return torch.zeros(())
    x = neg_src.vectors[torch.from_numpy(src_pos)]
    y = neg_trg.vectors[torch.from_numpy(trg_pos)]
    return info_nce(x, y, config.alpha, config.cosine_epsilon)


def cmds_loss(pos_audio: EmbeddingBatch,
              pos_video: Sequence[EmbeddingBatch],
              neg_audio_src: EmbeddingBatch,
              neg_video_src: Sequence[EmbeddingBatch],
              config: ContrastiveConfig,
              *,
              rng: np.random.Generator,
              neg_audio_trg: Optional[EmbeddingBatch] = None,
              neg_video_trg: Optional[Sequence[EmbeddingBatch]] = None,
              ) -> tuple[torch.Tensor, CmdsBreakdown]:
    """Cross-modal contrastive loss averaged over the M video grid images.

    Counts are aligned by random drop before concatenation (``rng`` drives
    the drops), and audio/video feature dimensions are interpolated to a
    common size. A grid whose concatenated lists come out empty contributes 0
    and is flagged.
    """
    n_grids = len(pos_video)
    if n_grids < 1:
        raise ConfigurationError("need at least one video grid")
    if len(neg_video_src) != n_grids:
        raise ConfigurationError(
            f"inconsistent grid count: {n_grids} positive vs {len(neg_video_src)} negative batches")
    if config.pairing_variant == "eq7-plus-intramodal":
        if neg_audio_trg is None or neg_video_trg is None or len(neg_video_trg) != n_grids:
            raise ConfigurationError(
                "eq7-plus-intramodal requires target-branch negative batches for both modalities")

    # intramodal terms pair within one modality, where dims natively agree
    raw_neg_audio_src, raw_neg_video_src = neg_audio_src, list(neg_video_src)

    dim = _common_dim([pos_audio, neg_audio_src, *pos_video, *neg_video_src])
    pos_audio = match_dims(pos_audio, dim)
    neg_audio_src = match_dims(neg_audio_src, dim)
    pos_video = [match_dims(b, dim) for b in pos_video]
    neg_video_src = [match_dims(b, dim) for b in neg_video_src]

    breakdown = CmdsBreakdown()
    total = torch.zeros(())
    for i in range(n_grids):
        a_pos, v_pos = align_counts(pos_audio, pos_video[i], rng)
        v_neg, a_neg = align_counts(neg_video_src[i], neg_audio_src, rng)
        breakdown.pair_counts.append((len(a_pos), len(v_neg)))
        n_pairs = len(a_pos) + len(v_neg)
        if n_pairs == 0:
            breakdown.degenerate_grids.append(True)
            continue
        breakdown.degenerate_grids.append(False)
        f_x = torch.cat([_as_matrix(a_pos), _as_matrix(v_neg)], dim=0)
        f_y = torch.cat([_as_matrix(v_pos), _as_matrix(a_neg)], dim=0)
        total = total + info_nce(f_x, f_y, config.alpha, config.cosine_epsilon) \
                      + info_nce(f_y, f_x, config.alpha, config.cosine_epsilon)

    if config.pairing_variant == "eq7-plus-intramodal":
        total = total + n_grids * _intramodal_term(raw_neg_audio_src, neg_audio_trg, config)
        for i in range(n_grids):
            total = total + _intramodal_term(raw_neg_video_src[i], neg_video_trg[i], config)

    breakdown.degenerate = all(breakdown.degenerate_grids)
    return total / n_grids, breakdown
