"""Zero-shot joint audio-video editing.

Latents of both modalities are optimized together under a delta denoising
score objective plus a patch-level cross-modal contrastive loss built from
the denoiser's own cross-attention relevance maps. Denoiser backends are
pluggable; a deterministic toy backend ships for exact verification.
"""

from .backends import (
    BackendDescriptor,
    DenoiserHandle,
    LayerProbe,
    NoisePrediction,
    NoiseSchedule,
    ProbeData,
    ToyDenoiser,
    load_backend,
    make_toy_backend,
)
from .contrastive import ContrastiveConfig, cmds_loss, info_nce, match_dims
from .editor import (
    CrossModalEditor,
    EditConfig,
    RunLog,
    RunState,
    edit_step,
    run_edit,
    schedule_weights,
)
from .exceptions import BackendError, ConfigurationError, GradientError, ShapeError
from .grid import FramePermutation, GridSpec, pack_grid, shuffle_frames, unpack_grid
from .guidance import GuidanceConfig, cfg_predict, dds_gradient, dds_loss, sds_gradient
from .latents import (
    AudioLatent,
    DiffusionTimestep,
    PromptPair,
    VideoLatent,
    forward_noise,
    noise_latent,
    sample_timestep,
)
from .metrics import (
    AvAlignConfig,
    EmbedderHandle,
    MetricReport,
    av_align,
    clap_sim,
    clip_f,
    clip_t,
    dino_sim,
    evaluate_clip,
    ib_sim,
    lpaps,
    make_stub_embedders,
    obj_score,
    peak_iou,
)
from .relevance import (
    RelevanceMap,
    ThresholdConfig,
    minmax_normalize,
    relevance_scores,
    threshold_patches,
)
from .rng import split_stream
from .sampling import (
    EmbeddingBatch,
    PatchIndexSets,
    align_counts,
    sample_negative,
    sample_positive,
)

__version__ = "0.1.0"

__all__ = [
    "AudioLatent",
    "AvAlignConfig",
    "BackendDescriptor",
    "BackendError",
    "ConfigurationError",
    "ContrastiveConfig",
    "CrossModalEditor",
    "DenoiserHandle",
    "DiffusionTimestep",
    "EditConfig",
    "EmbedderHandle",
    "EmbeddingBatch",
    "FramePermutation",
    "GradientError",
    "GridSpec",
    "GuidanceConfig",
    "LayerProbe",
    "MetricReport",
    "NoisePrediction",
    "NoiseSchedule",
    "PatchIndexSets",
    "ProbeData",
    "PromptPair",
    "RelevanceMap",
    "RunLog",
    "RunState",
    "ShapeError",
    "ThresholdConfig",
    "ToyDenoiser",
    "VideoLatent",
    "align_counts",
    "av_align",
    "cfg_predict",
    "clap_sim",
    "clip_f",
    "clip_t",
    "cmds_loss",
    "dds_gradient",
    "dds_loss",
    "dino_sim",
    "edit_step",
    "evaluate_clip",
    "forward_noise",
    "ib_sim",
    "info_nce",
    "load_backend",
    "lpaps",
    "make_stub_embedders",
    "make_toy_backend",
    "match_dims",
    "minmax_normalize",
    "noise_latent",
    "obj_score",
    "pack_grid",
    "peak_iou",
    "relevance_scores",
    "run_edit",
    "sample_negative",
    "sample_positive",
    "sample_timestep",
    "schedule_weights",
    "sds_gradient",
    "shuffle_frames",
    "split_stream",
    "threshold_patches",
    "unpack_grid",
]
