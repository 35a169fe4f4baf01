"""Joint audio-video latent optimization.

Every step: draw a fresh frame permutation and pack the video latents into
grid images, noise source and target branches with a shared (t, eps) per
modality, run CFG noise predictions for both branches, apply the scheduled
delta-denoising gradient at the latent positions, and (after warmup) add the
exact gradient of the cross-modal contrastive loss before the SGD update.

All randomness flows through named Philox streams keyed by
``(seed, purpose, ...)``; the stream tags below are a stable replay API:

    ("perm", step)                frame permutation
    ("t", modality, step)         timestep draw
    ("eps", modality, step)       injected gaussian noise
    ("pos", "audio", step)        positive patch sampling, audio
    ("pos", "video", step, m)     positive patch sampling, video grid m
    ("neg", "audio", step)        negative patch sampling, audio
    ("neg", "video", step, m)     negative patch sampling, video grid m
    ("align", step)               count alignment drops inside the cmds loss

The scheduled DDS scale is applied per the reference score-distillation
convention: the noise difference is averaged over the denoiser image's
spatial extent before scaling, which is the convention the published scale
values (2000/4000 video, 1000/5000 audio) were tuned under.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import torch
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ._validation import check_in_range, check_positive
from .backends.base import DenoiserHandle, ProbeData
from .contrastive import PAIRING_VARIANTS, CmdsBreakdown, ContrastiveConfig, cmds_loss
from .exceptions import ConfigurationError, GradientError, ShapeError
from .grid import GridSpec, pack_grid, shuffle_frames, unpack_grid
from .guidance import cfg_predict, dds_gradient, dds_loss
from .latents import AudioLatent, PromptPair, VideoLatent, noise_latent, sample_timestep
from .relevance import minmax_normalize, relevance_scores, threshold_patches
from .rng import split_stream
from .sampling import sample_negative, sample_positive


@dataclass(frozen=True)
class EditConfig:
    """All schedules and hyperparameters of one edit run."""

    total_steps: int = 200
    warmup_steps: int = 15
    lambda_cmds: float = 10.0
    video_dds_scale: tuple[float, float] = (2000.0, 4000.0)
    audio_dds_scale: tuple[float, float] = (1000.0, 5000.0)
    lr0: float = 1.0
    lr_decay: float = 0.99
    tau_a: float = 0.8
    tau_v: float = 0.8
    pos_rate: float = 0.5
    neg_rate: float = 0.8
    n_g: int = 2
    omega_video: float = 7.5
    omega_audio: float = 3.5
    alpha: float = 0.07
    cosine_epsilon: float = 1e-8
    seed: int = 0
    pairing_variant: str = "eq7-as-written"
    t_range: tuple[float, float] = (0.0, 1.0)
    grad_clip: Optional[float] = 10.0
    checkpoint_every: int = 0
    debug_relevance: bool = False

    def __post_init__(self):
        if self.total_steps < 0:
            raise ConfigurationError("total_steps must be >= 0")
        if self.warmup_steps < 0:
            raise ConfigurationError("warmup_steps must be >= 0")
        if self.total_steps > 0 and not self.warmup_steps < self.total_steps:
            raise ConfigurationError("warmup_steps must be < total_steps")
        for name, pair in (("video_dds_scale", self.video_dds_scale),
                           ("audio_dds_scale", self.audio_dds_scale)):
            if len(pair) != 2:
                raise ConfigurationError(f"{name} must be a (warmup, main) pair")
            if not all(v > 0 for v in pair):
                raise ConfigurationError(f"{name} values must be > 0")
            object.__setattr__(self, name, (float(pair[0]), float(pair[1])))
        check_positive(self.lr0, "lr0")
        check_in_range(self.lr_decay, 0.0, 1.0, "lr_decay", lo_open=True)
        check_in_range(self.tau_a, 0.0, 1.0, "tau_a")
        check_in_range(self.tau_v, 0.0, 1.0, "tau_v")
        check_in_range(self.pos_rate, 0.0, 1.0, "pos_rate", lo_open=True)
        check_in_range(self.neg_rate, 0.0, 1.0, "neg_rate", lo_open=True)
        if self.n_g < 1:
            raise ConfigurationError("n_g must be >= 1")
        check_positive(self.alpha, "alpha")
        if self.cosine_epsilon < 0:
            raise ConfigurationError("cosine_epsilon must be >= 0")
        if self.lambda_cmds < 0:
            raise ConfigurationError("lambda_cmds must be >= 0")
        if self.pairing_variant not in PAIRING_VARIANTS:
            raise ConfigurationError(f"pairing_variant must be one of {PAIRING_VARIANTS}")
        lo, hi = self.t_range
        if not (0.0 <= lo < hi <= 1.0):
            raise ConfigurationError("t_range must satisfy 0 <= lo < hi <= 1")
        object.__setattr__(self, "t_range", (float(lo), float(hi)))
        if self.grad_clip is not None and not self.grad_clip > 0:
            raise ConfigurationError("grad_clip must be > 0 or null")
        if self.checkpoint_every < 0:
            raise ConfigurationError("checkpoint_every must be >= 0")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["video_dds_scale"] = list(self.video_dds_scale)
        out["audio_dds_scale"] = list(self.audio_dds_scale)
        out["t_range"] = list(self.t_range)
        return out

    @classmethod
    def from_mapping(cls, mapping: dict, path: str = "edit") -> "EditConfig":
        """Build from a config document section, rejecting unknown keys."""
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise ConfigurationError(f"{path}.{sorted(unknown)[0]}: unknown key")
        kwargs = {}
        for key, value in mapping.items():
            if key in ("video_dds_scale", "audio_dds_scale", "t_range"):
                if not isinstance(value, (list, tuple)) or len(value) != 2:
                    raise ConfigurationError(f"{path}.{key}: expected a pair of numbers")
                value = tuple(float(v) for v in value)
            kwargs[key] = value
        try:
            return cls(**kwargs)
        except ConfigurationError as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc

    def contrastive(self) -> ContrastiveConfig:
        return ContrastiveConfig(alpha=self.alpha, cosine_epsilon=self.cosine_epsilon,
                                 pairing_variant=self.pairing_variant,
                                 lambda_cmds=self.lambda_cmds)


def schedule_weights(step: int, config: EditConfig) -> tuple[float, float, float, float]:
    """(video_scale, audio_scale, cmds_weight, lr) for one step.

    The warmup phase runs the first ``warmup_steps`` steps with the phase-one
    DDS scales and a zero contrastive weight; afterwards the phase-two scales
    and ``lambda_cmds`` apply. The learning rate decays multiplicatively from
    ``lr0`` every step.
    """
    if not 0 <= step < config.total_steps:
        raise ConfigurationError(f"step {step} outside [0, {config.total_steps})")
    warm = step < config.warmup_steps
    video_scale = config.video_dds_scale[0] if warm else config.video_dds_scale[1]
    audio_scale = config.audio_dds_scale[0] if warm else config.audio_dds_scale[1]
    cmds_weight = 0.0 if warm else config.lambda_cmds
    lr = config.lr0 * config.lr_decay ** step
    return video_scale, audio_scale, cmds_weight, lr


@dataclass
class RunState:
    """Mutable optimization state; source latents are never written."""

    theta_v: torch.Tensor
    theta_a: torch.Tensor
    source_v: torch.Tensor
    source_a: torch.Tensor
    prompts: PromptPair
    text_embeddings: dict
    step: int = 0


@dataclass
class RunLog:
    """Header plus one deterministic record per step.

    Records carry no wall-clock fields, so identical (config, seed, backends)
    reproduce the serialized log byte for byte; timing lives outside the log.
    """

    header: dict
    records: list = field(default_factory=list)

    def append(self, record: dict) -> None:
        self.records.append(record)

    def dumps(self) -> str:
        lines = [json.dumps({"header": self.header}, sort_keys=False)]
        lines.extend(json.dumps(r, sort_keys=False) for r in self.records)
        return "\n".join(lines) + "\n"

    def to_jsonl(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def from_jsonl(cls, path) -> "RunLog":
        lines = Path(path).read_text().splitlines()
        header = json.loads(lines[0])["header"]
        return cls(header=header, records=[json.loads(line) for line in lines[1:]])


def _embed_prompts(backend: DenoiserHandle, prompts: PromptPair) -> dict:
    return {
        "trg": backend.encode_text(prompts.y_trg),
        "src": backend.encode_text(prompts.source_text),
        "null": backend.encode_text(prompts.null_prompt),
    }


def _hidden_matrix(probes: ProbeData) -> torch.Tensor:
    """Hidden states across probe layers, concatenated on the feature axis."""
    layers = list(probes.layers.values())
    if len(layers) == 1:
        return layers[0].hidden
    patch_counts = {p.hidden.shape[-2] for p in layers}
    if len(patch_counts) != 1:
        raise ConfigurationError(
            "probe layers disagree on patch count; configure a single-resolution layer set")
    return torch.cat([p.hidden for p in layers], dim=-1)


def _cmds_terms(config: EditConfig,
                probes_v_trg: ProbeData, probes_v_src: ProbeData,
                probes_a_trg: ProbeData, probes_a_src: ProbeData,
                step: int) -> tuple[torch.Tensor, CmdsBreakdown, dict, dict]:
    """Relevance -> index sets -> sampled batches -> contrastive loss."""
    h_v_trg = _hidden_matrix(probes_v_trg)
    h_v_src = _hidden_matrix(probes_v_src)
    h_a_trg = _hidden_matrix(probes_a_trg)
    h_a_src = _hidden_matrix(probes_a_src)

    map_a_trg = minmax_normalize(relevance_scores(probes_a_trg), branch="target")
    map_a_src = minmax_normalize(relevance_scores(probes_a_src), branch="source")
    map_v_trg = minmax_normalize(relevance_scores(probes_v_trg), branch="target")
    map_v_src = minmax_normalize(relevance_scores(probes_v_src), branch="source")

    idx_a_trg = threshold_patches(map_a_trg.scores, config.tau_a, modality="audio", branch="target")
    idx_a_src = threshold_patches(map_a_src.scores, config.tau_a, modality="audio", branch="source")

    seed = config.seed
    pos_audio = sample_positive(h_a_trg, idx_a_trg, config.pos_rate,
                                split_stream(seed, "pos", "audio", step))
    neg_audio_src, neg_audio_trg = sample_negative(
        h_a_src, h_a_trg, idx_a_src, idx_a_trg, config.neg_rate,
        split_stream(seed, "neg", "audio", step))

    pos_video, neg_video_src, neg_video_trg = [], [], []
    for m in range(map_v_trg.scores.shape[0]):
        idx_m_trg = threshold_patches(map_v_trg.scores[m], config.tau_v,
                                      modality="video", branch="target")
        idx_m_src = threshold_patches(map_v_src.scores[m], config.tau_v,
                                      modality="video", branch="source")
        pos_video.append(sample_positive(h_v_trg[m], idx_m_trg, config.pos_rate,
                                         split_stream(seed, "pos", "video", step, m)))
        n_src, n_trg = sample_negative(h_v_src[m], h_v_trg[m], idx_m_src, idx_m_trg,
                                       config.neg_rate,
                                       split_stream(seed, "neg", "video", step, m))
        neg_video_src.append(n_src)
        neg_video_trg.append(n_trg)

    value, breakdown = cmds_loss(pos_audio, pos_video, neg_audio_src, neg_video_src,
                                 config.contrastive(), rng=split_stream(seed, "align", step),
                                 neg_audio_trg=neg_audio_trg, neg_video_trg=neg_video_trg)

    counts = {
        "pos_count_audio": len(pos_audio),
        "neg_count_audio": len(neg_audio_src),
        "pos_counts_video": [len(b) for b in pos_video],
        "neg_counts_video": [len(b) for b in neg_video_src],
        "relevance_degenerate": bool(np.any(map_a_trg.degenerate) or np.any(map_v_trg.degenerate)
                                     or np.any(map_a_src.degenerate) or np.any(map_v_src.degenerate)),
    }
    debug = {
        "relevance_audio_target": map_a_trg.scores,
        "relevance_audio_source": map_a_src.scores,
        "relevance_video_target": map_v_trg.scores,
        "relevance_video_source": map_v_src.scores,
        "patch_hw_video": next(iter(probes_v_trg.layers.values())).patch_hw,
        "patch_hw_audio": next(iter(probes_a_trg.layers.values())).patch_hw,
    }
    return value, breakdown, counts, debug


def _clip_grad(grad: torch.Tensor, max_norm: Optional[float]) -> tuple[torch.Tensor, float, bool]:
    norm = float(torch.linalg.vector_norm(grad))
    if max_norm is not None and norm > max_norm:
        return grad * (max_norm / norm), norm, True
    return grad, norm, False


def edit_step(state: RunState, video_backend: DenoiserHandle,
              audio_backend: DenoiserHandle, config: EditConfig) -> tuple[dict, Optional[dict]]:
    """Run one optimization iteration, mutating state in place.

    Returns the step's log record plus a debug payload (relevance maps) when
    the contrastive term or debug dumping is active.
    """
    step = state.step
    scale_v, scale_a, w_cmds, lr = schedule_weights(step, config)
    seed = config.seed
    spec = GridSpec(config.n_g, int(state.theta_v.shape[0]))
    perm = shuffle_frames(spec.frames, split_stream(seed, "perm", step), step=step)

    sched_v = video_backend.noise_schedule
    sched_a = audio_backend.noise_schedule
    t_v = sample_timestep(split_stream(seed, "t", "video", step), config.t_range, sched_v)
    t_a = sample_timestep(split_stream(seed, "t", "audio", step), config.t_range, sched_a)

    grid_shape = (spec.num_grids,) + tuple(video_backend.latent_shape)
    eps_v = torch.from_numpy(
        split_stream(seed, "eps", "video", step).standard_normal(grid_shape)
    ).to(state.theta_v.dtype)
    eps_a = torch.from_numpy(
        split_stream(seed, "eps", "audio", step).standard_normal(tuple(audio_backend.latent_shape))
    ).to(state.theta_a.dtype)

    need_probes = w_cmds > 0 or config.debug_relevance
    emb_v = state.text_embeddings["video"]
    emb_a = state.text_embeddings["audio"]

    # target branches stay in the autograd graph for the contrastive term
    zt_trg_v = noise_latent(pack_grid(state.theta_v, spec, perm), t_v, eps_v, sched_v)
    zt_trg_a = noise_latent(state.theta_a, t_a, eps_a, sched_a)
    pred_trg_v = video_backend.predict_noise(zt_trg_v, emb_v["trg"], t_v, capture_probes=need_probes)
    pred_trg_a = audio_backend.predict_noise(zt_trg_a, emb_a["trg"], t_a, capture_probes=need_probes)

    with torch.no_grad():
        zt_src_v = noise_latent(pack_grid(state.source_v, spec, perm), t_v, eps_v, sched_v)
        zt_src_a = noise_latent(state.source_a, t_a, eps_a, sched_a)
        null_trg_v = video_backend.predict_noise(zt_trg_v.detach(), emb_v["null"], t_v)
        null_trg_a = audio_backend.predict_noise(zt_trg_a.detach(), emb_a["null"], t_a)
        cond_src_v = video_backend.predict_noise(zt_src_v, emb_v["src"], t_v, capture_probes=need_probes)
        cond_src_a = audio_backend.predict_noise(zt_src_a, emb_a["src"], t_a, capture_probes=need_probes)
        null_src_v = video_backend.predict_noise(zt_src_v, emb_v["null"], t_v)
        null_src_a = audio_backend.predict_noise(zt_src_a, emb_a["null"], t_a)

        eps_cfg_trg_v = cfg_predict(pred_trg_v.eps_hat.detach(), null_trg_v.eps_hat, config.omega_video)
        eps_cfg_src_v = cfg_predict(cond_src_v.eps_hat, null_src_v.eps_hat, config.omega_video)
        eps_cfg_trg_a = cfg_predict(pred_trg_a.eps_hat.detach(), null_trg_a.eps_hat, config.omega_audio)
        eps_cfg_src_a = cfg_predict(cond_src_a.eps_hat, null_src_a.eps_hat, config.omega_audio)

        loss_dds_v = float(dds_loss(eps_cfg_trg_v, eps_cfg_src_v))
        loss_dds_a = float(dds_loss(eps_cfg_trg_a, eps_cfg_src_a))

        gh, gw = video_backend.latent_shape[-2:]
        ah, aw = audio_backend.latent_shape[-2:]
        g_theta_v = unpack_grid(dds_gradient(eps_cfg_trg_v, eps_cfg_src_v), spec, perm) * (scale_v / (gh * gw))
        g_theta_a = dds_gradient(eps_cfg_trg_a, eps_cfg_src_a) * (scale_a / (ah * aw))

    cmds_value = None
    breakdown = None
    counts = {}
    debug = None
    if w_cmds > 0:
        cmds_value, breakdown, counts, debug = _cmds_terms(
            config, pred_trg_v.probes, cond_src_v.probes,
            pred_trg_a.probes, cond_src_a.probes, step)
    elif config.debug_relevance:
        with torch.no_grad():
            _, _, _, debug = _cmds_terms(
                config, pred_trg_v.probes, cond_src_v.probes,
                pred_trg_a.probes, cond_src_a.probes, step)

    surrogate = (g_theta_v * state.theta_v).sum() + (g_theta_a * state.theta_a).sum()
    if cmds_value is not None:
        surrogate = surrogate + w_cmds * cmds_value
    state.theta_v.grad = None
    state.theta_a.grad = None
    surrogate.backward()

    grad_v, grad_a = state.theta_v.grad, state.theta_a.grad
    if not (torch.isfinite(grad_v).all() and torch.isfinite(grad_a).all()):
        raise GradientError(f"non-finite gradient at step {step}")
    grad_v, norm_v, clipped_v = _clip_grad(grad_v, config.grad_clip)
    grad_a, norm_a, clipped_a = _clip_grad(grad_a, config.grad_clip)

    with torch.no_grad():
        # explicit mul-then-sub: keeps the update bit-reproducible by the
        # plain expression theta - lr*g (fused alpha-add rounds differently)
        state.theta_v.sub_(lr * grad_v)
        state.theta_a.sub_(lr * grad_a)
    state.theta_v.grad = None
    state.theta_a.grad = None
    if not (torch.isfinite(state.theta_v).all() and torch.isfinite(state.theta_a).all()):
        raise GradientError(f"non-finite latent after update at step {step}")

    record = {
        "step": step,
        "lr": lr,
        "scale_video": scale_v,
        "scale_audio": scale_a,
        "cmds_weight": w_cmds,
        "t_video": t_v.t,
        "t_index_video": t_v.backend_index,
        "t_audio": t_a.t,
        "t_index_audio": t_a.backend_index,
        "perm": perm.perm.tolist(),
        "loss_dds_video": loss_dds_v,
        "loss_dds_audio": loss_dds_a,
        "loss_cmds": float(cmds_value.detach()) if cmds_value is not None else None,
        "pos_count_audio": counts.get("pos_count_audio"),
        "neg_count_audio": counts.get("neg_count_audio"),
        "pos_counts_video": counts.get("pos_counts_video"),
        "neg_counts_video": counts.get("neg_counts_video"),
        "cmds_pair_counts": breakdown.pair_counts if breakdown is not None else None,
        "cmds_degenerate": breakdown.degenerate if breakdown is not None else None,
        "relevance_degenerate": counts.get("relevance_degenerate"),
        "grad_norm_video": norm_v,
        "grad_norm_audio": norm_a,
        "clipped_video": clipped_v,
        "clipped_audio": clipped_a,
    }
    state.step = step + 1
    return record, debug


def run_edit(video: VideoLatent, audio: AudioLatent, prompts: PromptPair,
             backends: tuple[DenoiserHandle, DenoiserHandle], config: EditConfig,
             *, checkpoint_dir=None,
             step_callback: Optional[Callable[[dict, Optional[dict]], None]] = None,
             ) -> tuple[VideoLatent, AudioLatent, RunLog]:
    """Optimize target latents for ``config.total_steps`` iterations.

    ``backends`` is the (video-grid, audio) handle pair. Source latents are
    never mutated; the run is a pure function of (inputs, config, backends).
    """
    video_backend, audio_backend = backends
    if video_backend.modality != "video-grid":
        raise ConfigurationError(f"first backend must be video-grid, got {video_backend.modality}")
    if audio_backend.modality != "audio":
        raise ConfigurationError(f"second backend must be audio, got {audio_backend.modality}")

    spec = GridSpec(config.n_g, video.num_frames)
    channels, fh, fw = video.data.shape[1:]
    grid_shape = (int(channels), int(fh) * config.n_g, int(fw) * config.n_g)
    if grid_shape != tuple(video_backend.latent_shape):
        raise ShapeError(f"packed grid shape {grid_shape} != video backend latent shape "
                         f"{tuple(video_backend.latent_shape)}")
    if tuple(audio.data.shape) != tuple(audio_backend.latent_shape):
        raise ShapeError(f"audio latent shape {tuple(audio.data.shape)} != backend shape "
                         f"{tuple(audio_backend.latent_shape)}")

    state = RunState(
        theta_v=video.data.detach().clone().requires_grad_(True),
        theta_a=audio.data.detach().clone().requires_grad_(True),
        source_v=video.data.detach().clone(),
        source_a=audio.data.detach().clone(),
        prompts=prompts,
        text_embeddings={
            "video": _embed_prompts(video_backend, prompts),
            "audio": _embed_prompts(audio_backend, prompts),
        },
    )
    log = RunLog(header={
        "config": config.to_dict(),
        "prompts": {"y_src": prompts.y_src, "y_trg": prompts.y_trg,
                    "null_prompt": prompts.null_prompt},
        "video_shape": list(video.data.shape),
        "audio_shape": list(audio.data.shape),
        "frame_rate": video.frame_rate,
        "duration": audio.duration,
        "num_grids": spec.num_grids,
    })

    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    for step in range(config.total_steps):
        try:
            record, debug = edit_step(state, video_backend, audio_backend, config)
        except GradientError as exc:
            log.append({"step": step, "aborted": True, "reason": str(exc)})
            exc.run_log = log
            raise
        log.append(record)
        if step_callback is not None:
            step_callback(record, debug)
        if checkpoint_dir is not None and config.checkpoint_every > 0 \
                and (step + 1) % config.checkpoint_every == 0:
            from .tensorio import save_tensor
            save_tensor(checkpoint_dir / f"step_{step + 1:06d}.video", state.theta_v.detach())
            save_tensor(checkpoint_dir / f"step_{step + 1:06d}.audio", state.theta_a.detach())

    edited_video = VideoLatent(data=state.theta_v.detach().clone(), frame_rate=video.frame_rate)
    edited_audio = AudioLatent(data=state.theta_a.detach().clone(), duration=audio.duration)
    return edited_video, edited_audio, log


_ESTIMATOR_FIELDS = [f.name for f in dataclasses.fields(EditConfig)]


class CrossModalEditor(BaseEstimator):
    """sklearn-style wrapper around :func:`run_edit`.

    Hyperparameters mirror :class:`EditConfig` one to one, so ``get_params``/
    ``set_params``/``clone`` compose with model selection utilities. ``fit``
    takes ``X = (VideoLatent, AudioLatent)`` and ``y`` as the prompts (a
    :class:`PromptPair`, a ``(y_src, y_trg)`` pair, or a bare target string)
    and stores the edited latents plus the run log as fitted attributes.
    Like other transductive estimators there is no out-of-sample
    ``transform``; use ``fit_transform``.
    """

    def __init__(self, video_backend=None, audio_backend=None, *,
                 total_steps=200, warmup_steps=15, lambda_cmds=10.0,
                 video_dds_scale=(2000.0, 4000.0), audio_dds_scale=(1000.0, 5000.0),
                 lr0=1.0, lr_decay=0.99, tau_a=0.8, tau_v=0.8,
                 pos_rate=0.5, neg_rate=0.8, n_g=2,
                 omega_video=7.5, omega_audio=3.5, alpha=0.07, cosine_epsilon=1e-8,
                 seed=0, pairing_variant="eq7-as-written", t_range=(0.0, 1.0),
                 grad_clip=10.0, checkpoint_every=0, debug_relevance=False):
        self.video_backend = video_backend
        self.audio_backend = audio_backend
        self.total_steps = total_steps
        self.warmup_steps = warmup_steps
        self.lambda_cmds = lambda_cmds
        self.video_dds_scale = video_dds_scale
        self.audio_dds_scale = audio_dds_scale
        self.lr0 = lr0
        self.lr_decay = lr_decay
        self.tau_a = tau_a
        self.tau_v = tau_v
        self.pos_rate = pos_rate
        self.neg_rate = neg_rate
        self.n_g = n_g
        self.omega_video = omega_video
        self.omega_audio = omega_audio
        self.alpha = alpha
        self.cosine_epsilon = cosine_epsilon
        self.seed = seed
        self.pairing_variant = pairing_variant
        self.t_range = t_range
        self.grad_clip = grad_clip
        self.checkpoint_every = checkpoint_every
        self.debug_relevance = debug_relevance

    def _edit_config(self) -> EditConfig:
        values = {name: getattr(self, name) for name in _ESTIMATOR_FIELDS}
        values["video_dds_scale"] = tuple(values["video_dds_scale"])
        values["audio_dds_scale"] = tuple(values["audio_dds_scale"])
        values["t_range"] = tuple(values["t_range"])
        return EditConfig(**values)

    @staticmethod
    def _prompts(y) -> PromptPair:
        if isinstance(y, PromptPair):
            return y
        if isinstance(y, str):
            return PromptPair(y_trg=y)
        if isinstance(y, (tuple, list)) and len(y) == 2:
            return PromptPair(y_src=y[0], y_trg=y[1])
        raise ConfigurationError("y must be a PromptPair, a (y_src, y_trg) pair, or a target string")

    def fit(self, X, y):
        if self.video_backend is None or self.audio_backend is None:
            raise ConfigurationError("both video_backend and audio_backend are required")
        video, audio = X
        prompts = self._prompts(y)
        edited_video, edited_audio, log = run_edit(
            video, audio, prompts, (self.video_backend, self.audio_backend),
            self._edit_config())
        self.video_latent_ = edited_video
        self.audio_latent_ = edited_audio
        self.run_log_ = log
        self.n_steps_ = len(log.records)
        return self

    def fit_transform(self, X, y) -> tuple[VideoLatent, AudioLatent]:
        self.fit(X, y)
        return self.video_latent_, self.audio_latent_

    def transform(self, X=None):
        if not hasattr(self, "video_latent_"):
            raise NotFittedError("CrossModalEditor is transductive; call fit or fit_transform first")
        return self.video_latent_, self.audio_latent_
