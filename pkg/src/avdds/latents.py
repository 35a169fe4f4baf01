"""Latent containers, prompt pairs, and the forward-noising primitive.

Latents are plain ``torch.Tensor`` payloads wrapped with the metadata needed
to decode them back into media. All losses operate on the raw tensors; the
wrappers only travel across the public editing API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

from ._validation import check_finite, check_rank, check_same_shape
from .exceptions import ConfigurationError


@dataclass
class VideoLatent:
    """Per-frame latent stack of shape (frames, channels, height, width)."""

    data: torch.Tensor
    frame_rate: float

    def __post_init__(self):
        check_rank(self.data, 4, "VideoLatent.data")
        if self.data.shape[0] < 1:
            raise ConfigurationError("VideoLatent needs at least one frame")
        check_finite(self.data, "VideoLatent.data")

    @property
    def num_frames(self) -> int:
        return int(self.data.shape[0])


@dataclass
class AudioLatent:
    """Spectrogram-grid latent of shape (channels, height, width)."""

    data: torch.Tensor
    duration: float

    def __post_init__(self):
        check_rank(self.data, 3, "AudioLatent.data")
        check_finite(self.data, "AudioLatent.data")


@dataclass(frozen=True)
class PromptPair:
    """Source (optional) and target text descriptions for one edit.

    When ``y_src`` is absent the source branch is conditioned on the null
    prompt, same as the unconditional CFG branch.
    """

    y_trg: str
    y_src: Optional[str] = None
    null_prompt: str = ""

    def __post_init__(self):
        if not self.y_trg:
            raise ConfigurationError("target prompt must be nonempty")

    @property
    def source_text(self) -> str:
        return self.y_src if self.y_src is not None else self.null_prompt


@dataclass(frozen=True)
class DiffusionTimestep:
    """Continuous timestep in (0,1) plus its nearest discrete schedule index."""

    t: float
    backend_index: Optional[int] = None

    def __post_init__(self):
        if not (0.0 < self.t < 1.0):
            raise ConfigurationError(f"timestep must lie in (0,1), got {self.t}")


def sample_timestep(rng: np.random.Generator,
                    t_range: tuple[float, float] = (0.0, 1.0),
                    schedule=None) -> DiffusionTimestep:
    """Draw t uniformly from the open interval ``t_range`` ⊆ (0,1).

    When a noise schedule is supplied, the nearest discrete backend index is
    attached to the returned timestep.
    """
    lo, hi = float(t_range[0]), float(t_range[1])
    if not (0.0 <= lo < hi <= 1.0):
        raise ConfigurationError(f"timestep range must satisfy 0 <= lo < hi <= 1, got ({lo}, {hi})")
    t = float(rng.uniform(lo, hi))
    # endpoints are excluded; a draw exactly on one is nudged inward
    if t <= 0.0:
        t = math.nextafter(0.0, 1.0)
    elif t >= 1.0:
        t = math.nextafter(1.0, 0.0)
    index = schedule.index_for(t) if schedule is not None else None
    return DiffusionTimestep(t=t, backend_index=index)


def forward_noise(z0: torch.Tensor, alpha_bar: float, eps: torch.Tensor) -> torch.Tensor:
    """Variance-preserving forward process: sqrt(ab)*z0 + sqrt(1-ab)*eps."""
    check_same_shape(z0, eps, "z0", "eps")
    ab = float(alpha_bar)
    return math.sqrt(ab) * z0 + math.sqrt(1.0 - ab) * eps


def noise_latent(z0: torch.Tensor, t: DiffusionTimestep, eps: torch.Tensor,
                 schedule) -> torch.Tensor:
    """Noise a clean latent to level t using the backend's discrete schedule."""
    index = t.backend_index if t.backend_index is not None else schedule.index_for(t.t)
    return forward_noise(z0, schedule[index], eps)
