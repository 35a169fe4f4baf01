"""Deterministic toy denoiser for desk-scale verification.

One cross-attention block: a patch-wise linear query map over latent
channels, linear key/value maps over text-token embeddings, row-softmax
attention, and a linear output head added residually to the noisy latent.
Every weight is drawn once from a seeded Philox stream, so two constructions
with the same arguments are bitwise identical, and all operations are plain
torch ops so gradients with respect to the input latent are exact.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
import torch
from scipy import ndimage

from .._validation import check_finite
from ..exceptions import ConfigurationError, ShapeError
from ..latents import DiffusionTimestep
from ..rng import split_stream
from .base import (
    BackendDescriptor,
    DenoiserHandle,
    LayerProbe,
    NoisePrediction,
    NoiseSchedule,
    ProbeData,
)


def _seeded_matrix(seed: int, tag: str, shape: tuple[int, ...], scale: float) -> torch.Tensor:
    values = split_stream(seed, "toy-weights", tag).standard_normal(shape) * scale
    return torch.from_numpy(values)


class ToyDenoiser(DenoiserHandle):
    def __init__(self, modality: str, latent_shape: tuple[int, ...],
                 n_text_tokens: int = 4, seed: int = 0, *,
                 attn_dim: int = 8, text_dim: int = 8, out_gain: float = 0.25,
                 schedule_steps: int = 1000, layer_name: str = "attn0",
                 frame_hw: Optional[tuple[int, int]] = None,
                 decode_hw: tuple[int, int] = (64, 64)):
        if modality not in ("video-grid", "audio"):
            raise ConfigurationError(f"unknown modality {modality!r}")
        if len(latent_shape) != 3:
            raise ConfigurationError("latent_shape must be (channels, height, width)")
        if n_text_tokens < 1:
            raise ConfigurationError("need at least one text token")
        self.modality = modality
        self.latent_shape = tuple(int(v) for v in latent_shape)
        self.noise_schedule = NoiseSchedule.cosine(schedule_steps)
        self.probe_layers = [layer_name]
        self.n_text_tokens = int(n_text_tokens)
        self.seed = int(seed)
        self.attn_dim = int(attn_dim)
        self.text_dim = int(text_dim)
        self.out_gain = float(out_gain)
        # codec geometry: frame_hw is the per-frame latent raster for the
        # video codec (the denoiser itself sees packed grid images)
        self.frame_hw = tuple(frame_hw) if frame_hw is not None else self.latent_shape[1:]
        self.decode_hw = tuple(decode_hw)

        channels = self.latent_shape[0]
        d = self.attn_dim
        self.w_query = _seeded_matrix(seed, f"{modality}/q", (channels, d), 1.0 / math.sqrt(channels))
        self.w_key = _seeded_matrix(seed, f"{modality}/k", (self.text_dim, d), 1.0 / math.sqrt(self.text_dim))
        self.w_value = _seeded_matrix(seed, f"{modality}/v", (self.text_dim, d), 1.0 / math.sqrt(self.text_dim))
        self.w_out = _seeded_matrix(seed, f"{modality}/o", (d, channels), self.out_gain / math.sqrt(d))

    # text ------------------------------------------------------------------
    def encode_text(self, y: str) -> torch.Tensor:
        rows = [
            split_stream(self.seed, "toy-text", self.modality, y, i).standard_normal(self.text_dim)
            for i in range(self.n_text_tokens)
        ]
        return torch.from_numpy(np.stack(rows, axis=0))

    # denoiser ---------------------------------------------------------------
    def predict_noise(self, z_t: torch.Tensor, y_emb: torch.Tensor,
                      t: DiffusionTimestep, capture_probes: bool = False) -> NoisePrediction:
        self._check_latent(z_t)
        if y_emb.ndim != 2 or y_emb.shape[1] != self.text_dim:
            raise ShapeError(f"text embedding must be (n_k, {self.text_dim}), got {tuple(y_emb.shape)}")
        check_finite(y_emb, "y_emb")

        batched = z_t if z_t.ndim == 4 else z_t.unsqueeze(0)
        n_grids, channels, height, width = batched.shape
        dtype = batched.dtype
        w_q = self.w_query.to(dtype)
        w_k = self.w_key.to(dtype)
        w_v = self.w_value.to(dtype)
        w_o = self.w_out.to(dtype)

        patches = batched.reshape(n_grids, channels, height * width).transpose(1, 2)  # (M, n_q, C)
        queries = patches @ w_q
        keys = y_emb.to(dtype) @ w_k
        values = y_emb.to(dtype) @ w_v
        logits = queries @ keys.T / math.sqrt(self.attn_dim)
        attn = torch.softmax(logits, dim=-1)
        hidden = attn @ values  # (M, n_q, d)
        residual = (hidden @ w_o).transpose(1, 2).reshape(n_grids, channels, height, width)

        gain = 1.0 + 0.25 * math.cos(math.pi * float(t.t))
        eps_hat = batched + gain * residual
        if z_t.ndim == 3:
            eps_hat = eps_hat.squeeze(0)

        probes = None
        if capture_probes:
            if z_t.ndim == 3:
                probe = LayerProbe(queries=queries.squeeze(0),
                                   keys=keys,
                                   hidden=hidden.squeeze(0),
                                   patch_hw=(height, width))
            else:
                probe = LayerProbe(queries=queries,
                                   keys=keys.unsqueeze(0).expand(n_grids, -1, -1),
                                   hidden=hidden,
                                   patch_hw=(height, width))
            probes = ProbeData(layers={self.probe_layers[0]: probe})
        return NoisePrediction(eps_hat=eps_hat, probes=probes)

    # codec -------------------------------------------------------------------
    def encode_media(self, media: np.ndarray) -> torch.Tensor:
        if self.modality == "video-grid":
            return self._encode_frames(media)
        return self._encode_mel(media)

    def decode_media(self, latent: torch.Tensor) -> np.ndarray:
        if self.modality == "video-grid":
            return self._decode_frames(latent)
        return self._decode_mel(latent)

    def decode_waveform(self, latent: torch.Tensor, duration: float,
                        sample_rate: int) -> np.ndarray:
        if self.modality != "audio":
            raise ShapeError("waveform decoding is an audio-backend operation")
        return toy_waveform_from_latent(latent, duration, sample_rate)

    def _encode_frames(self, frames: np.ndarray) -> torch.Tensor:
        if frames.ndim != 4:
            raise ShapeError("frames must have shape (T, H, W, 3)")
        gray = frames.astype(np.float64).mean(axis=-1) / 127.5 - 1.0
        fh, fw = self.frame_hw
        zoom = (1.0, fh / gray.shape[1], fw / gray.shape[2])
        small = ndimage.zoom(gray, zoom, order=1)
        channels = self.latent_shape[0]
        latent = np.repeat(small[:, None, :, :], channels, axis=1)
        return torch.from_numpy(latent)

    def _decode_frames(self, latent: torch.Tensor) -> np.ndarray:
        data = latent.detach().cpu().numpy().mean(axis=1)  # (T, h, w)
        dh, dw = self.decode_hw
        zoom = (1.0, dh / data.shape[1], dw / data.shape[2])
        big = ndimage.zoom(data, zoom, order=1)
        pixels = np.clip((big + 1.0) * 127.5, 0, 255).astype(np.uint8)
        return np.repeat(pixels[..., None], 3, axis=-1)

    def _encode_mel(self, mel: np.ndarray) -> torch.Tensor:
        if mel.ndim != 2:
            raise ShapeError("mel spectrogram must have shape (bands, frames)")
        channels, height, width = self.latent_shape
        zoom = (height / mel.shape[0], width / mel.shape[1])
        small = ndimage.zoom(mel.astype(np.float64), zoom, order=1)
        small = (small - small.mean()) / (small.std() + 1e-6)
        latent = np.repeat(small[None, :, :], channels, axis=0)
        return torch.from_numpy(latent)

    def _decode_mel(self, latent: torch.Tensor) -> np.ndarray:
        return latent.detach().cpu().numpy().mean(axis=0)


def make_toy_backend(modality: str, latent_shape: tuple[int, ...],
                     n_text_tokens: int = 4, seed: int = 0, **kwargs) -> ToyDenoiser:
    """Factory matching the backend contract; see ToyDenoiser for options."""
    return ToyDenoiser(modality, latent_shape, n_text_tokens=n_text_tokens, seed=seed, **kwargs)


def build(descriptor: BackendDescriptor) -> ToyDenoiser:
    """Descriptor driver entry point (``avdds.backends.toy:build``)."""
    opts = dict(descriptor.options)
    handle = ToyDenoiser(
        descriptor.modality,
        descriptor.latent_shape,
        n_text_tokens=int(opts.pop("text_tokens", 4)),
        seed=int(opts.pop("seed", 0)),
        attn_dim=int(opts.pop("attn_dim", 8)),
        text_dim=int(opts.pop("text_dim", 8)),
        out_gain=float(opts.pop("out_gain", 0.25)),
        schedule_steps=len(descriptor.schedule),
        layer_name=descriptor.probe_layers[0],
        frame_hw=tuple(opts.pop("frame_hw")) if "frame_hw" in opts else None,
        decode_hw=tuple(opts.pop("decode_hw", (64, 64))),
    )
    opts.pop("mel", None)  # consumed by media ingestion, not the denoiser
    if opts:
        raise ConfigurationError(f"unknown toy backend options: {sorted(opts)}")
    return handle


def toy_waveform_from_latent(latent: torch.Tensor, duration: float,
                             sample_rate: int) -> np.ndarray:
    """Sonify an audio latent: rows become amplitude envelopes of log-spaced
    sine banks. A stand-in for a real vocoder so toy runs produce playable wavs.
    """
    amp = latent.detach().cpu().numpy().mean(axis=0)  # (bands, frames)
    amp = amp - amp.min()
    if amp.max() > 0:
        amp = amp / amp.max()
    n_samples = max(1, int(round(duration * sample_rate)))
    t = np.arange(n_samples) / sample_rate
    bands, frames = amp.shape
    freqs = np.geomspace(110.0, 3520.0, bands)
    frame_pos = np.linspace(0.0, duration, frames)
    wave = np.zeros(n_samples)
    for b in range(bands):
        envelope = np.interp(t, frame_pos, amp[b])
        wave += envelope * np.sin(2.0 * np.pi * freqs[b] * t)
    peak = np.abs(wave).max()
    if peak > 0:
        wave = 0.5 * wave / peak
    return wave.astype(np.float32)
