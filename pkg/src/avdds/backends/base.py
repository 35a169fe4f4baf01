"""Denoiser backend contracts.

A backend wraps a text-conditioned latent denoiser. The framework only
touches three surfaces: text encoding, noise prediction with optional
cross-attention probes, and a media codec (the backend's VAE stand-in).
Pretrained models plug in through a JSON descriptor naming a driver callable;
the built-in toy backend implements the same contract at desk scale.
"""

from __future__ import annotations

import abc
import importlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from .._validation import check_finite
from ..exceptions import BackendError, ConfigurationError, ShapeError
from ..latents import DiffusionTimestep

MODALITIES = ("video-grid", "audio")


@dataclass(frozen=True)
class NoiseSchedule:
    """Discrete cumulative-alpha table, monotone decreasing, values in (0,1]."""

    alpha_bar: np.ndarray

    def __post_init__(self):
        ab = np.asarray(self.alpha_bar, dtype=np.float64)
        object.__setattr__(self, "alpha_bar", ab)
        if ab.ndim != 1 or ab.size < 1:
            raise ConfigurationError("noise schedule must be a nonempty 1-D table")
        if not (np.all(ab > 0.0) and np.all(ab <= 1.0)):
            raise ConfigurationError("noise schedule values must lie in (0, 1]")
        if np.any(np.diff(ab) >= 0):
            raise ConfigurationError("noise schedule must be strictly decreasing in index")

    def __len__(self) -> int:
        return int(self.alpha_bar.size)

    def __getitem__(self, index: int) -> float:
        if not 0 <= index < len(self):
            raise ConfigurationError(f"schedule index {index} outside [0, {len(self)})")
        return float(self.alpha_bar[index])

    def index_for(self, t: float) -> int:
        """Nearest discrete index for continuous t in (0,1)."""
        if not (0.0 < t < 1.0):
            raise ConfigurationError(f"t must lie in (0,1), got {t}")
        return int(round(t * (len(self) - 1)))

    @classmethod
    def cosine(cls, n_steps: int = 1000) -> "NoiseSchedule":
        """Squared-cosine table; close to 1 at index 0, close to 0 at the end."""
        i = np.arange(n_steps, dtype=np.float64)
        ab = np.cos(0.5 * np.pi * (i + 1.0) / (n_steps + 1.0)) ** 2
        return cls(alpha_bar=ab)


@dataclass
class LayerProbe:
    """Cross-attention capture for one layer.

    Shapes: audio ``queries (n_q, d)``, ``keys (n_k, d)``, ``hidden (n_q, d)``;
    video-grid adds a leading grid dimension M to each. ``patch_hw`` is the
    spatial raster the flat patch axis unflattens to.
    """

    queries: torch.Tensor
    keys: torch.Tensor
    hidden: torch.Tensor
    patch_hw: tuple[int, int]

    def __post_init__(self):
        if self.queries.shape[-2] != self.hidden.shape[-2]:
            raise ShapeError("queries and hidden states disagree on patch count")
        for name in ("queries", "keys", "hidden"):
            check_finite(getattr(self, name), f"LayerProbe.{name}")


@dataclass
class ProbeData:
    """Per-layer probes captured during one conditional forward pass."""

    layers: dict[str, LayerProbe] = field(default_factory=dict)

    def __post_init__(self):
        if not self.layers:
            raise ConfigurationError("ProbeData requires at least one probed layer")

    def layer_names(self) -> tuple[str, ...]:
        return tuple(self.layers)


@dataclass
class NoisePrediction:
    eps_hat: torch.Tensor
    probes: Optional[ProbeData] = None


class DenoiserHandle(abc.ABC):
    """Abstract text-conditioned denoiser.

    Immutable after construction; every ``predict_noise`` call owns its
    activations, so one handle may serve concurrent edit runs.
    """

    modality: str
    latent_shape: tuple[int, ...]
    noise_schedule: NoiseSchedule
    probe_layers: list[str]

    @abc.abstractmethod
    def encode_text(self, y: str) -> torch.Tensor:
        """Deterministic token embeddings (n_k, d_text); "" is the null prompt."""

    @abc.abstractmethod
    def predict_noise(self, z_t: torch.Tensor, y_emb: torch.Tensor,
                      t: DiffusionTimestep, capture_probes: bool = False) -> NoisePrediction:
        """Predict the injected noise; optionally capture attention probes.

        Must be differentiable with respect to ``z_t``: gradients of any
        scalar built from ``eps_hat`` or probe tensors flow back exactly.
        """

    # media codec (the backend's VAE contract) -----------------------------
    @abc.abstractmethod
    def encode_media(self, media: np.ndarray) -> torch.Tensor:
        """Pixels/spectrogram -> latent tensor."""

    @abc.abstractmethod
    def decode_media(self, latent: torch.Tensor) -> np.ndarray:
        """Latent tensor -> pixels/spectrogram."""

    def decode_waveform(self, latent: torch.Tensor, duration: float,
                        sample_rate: int) -> np.ndarray:
        """Audio latent -> waveform (vocoder path); optional per backend."""
        raise BackendError(f"{type(self).__name__} does not provide a waveform decoder")

    def _check_latent(self, z_t: torch.Tensor) -> None:
        shape = tuple(z_t.shape)
        if self.modality == "audio":
            if shape != tuple(self.latent_shape):
                raise ShapeError(f"audio latent shape {shape} != backend shape {tuple(self.latent_shape)}")
        else:
            if len(shape) != 4 or shape[1:] != tuple(self.latent_shape):
                raise ShapeError(
                    f"video-grid latent must be (M, {', '.join(map(str, self.latent_shape))}), got {shape}")
        check_finite(z_t, "z_t")


@dataclass(frozen=True)
class BackendDescriptor:
    """Parsed adapter descriptor (JSON file).

    Fields: ``modality``, ``driver`` (dotted ``module:callable`` building a
    DenoiserHandle from this descriptor), ``latent_shape``, ``schedule``
    (either ``{"cosine": n}`` or ``{"table": [...]}``), ``probe_layers``
    (hook-point names), and free-form ``options`` (e.g. mel parameters,
    text token count, seeds).
    """

    modality: str
    driver: str
    latent_shape: tuple[int, ...]
    schedule: NoiseSchedule
    probe_layers: tuple[str, ...]
    options: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path) -> "BackendDescriptor":
        raw = json.loads(Path(path).read_text())
        return cls.from_mapping(raw, source=str(path))

    @classmethod
    def from_mapping(cls, raw: dict, source: str = "<descriptor>") -> "BackendDescriptor":
        required = {"modality", "driver", "latent_shape", "schedule", "probe_layers"}
        missing = required - set(raw)
        if missing:
            raise ConfigurationError(f"{source}: missing descriptor keys {sorted(missing)}")
        if raw["modality"] not in MODALITIES:
            raise ConfigurationError(f"{source}: modality must be one of {MODALITIES}")
        sched_spec = raw["schedule"]
        if "cosine" in sched_spec:
            schedule = NoiseSchedule.cosine(int(sched_spec["cosine"]))
        elif "table" in sched_spec:
            schedule = NoiseSchedule(alpha_bar=np.asarray(sched_spec["table"], dtype=np.float64))
        else:
            raise ConfigurationError(f"{source}: schedule needs 'cosine' or 'table'")
        probe_layers = tuple(raw["probe_layers"])
        if not probe_layers:
            raise ConfigurationError(f"{source}: probe_layers must be nonempty")
        return cls(
            modality=raw["modality"],
            driver=raw["driver"],
            latent_shape=tuple(int(v) for v in raw["latent_shape"]),
            schedule=schedule,
            probe_layers=probe_layers,
            options=dict(raw.get("options", {})),
        )


def load_backend(descriptor: BackendDescriptor | str | Path) -> DenoiserHandle:
    """Build a DenoiserHandle from a descriptor (or a descriptor file path)."""
    if not isinstance(descriptor, BackendDescriptor):
        descriptor = BackendDescriptor.from_file(descriptor)
    module_name, _, attr = descriptor.driver.partition(":")
    if not attr:
        raise ConfigurationError(f"driver must look like 'package.module:callable', got {descriptor.driver!r}")
    try:
        module = importlib.import_module(module_name)
        builder = getattr(module, attr)
    except (ImportError, AttributeError) as exc:
        raise BackendError(f"cannot load backend driver {descriptor.driver!r}: {exc}") from exc
    handle = builder(descriptor)
    if not isinstance(handle, DenoiserHandle):
        raise BackendError(f"driver {descriptor.driver!r} did not return a DenoiserHandle")
    return handle
