from .base import (
    BackendDescriptor,
    DenoiserHandle,
    LayerProbe,
    NoisePrediction,
    NoiseSchedule,
    ProbeData,
    load_backend,
)
from .toy import ToyDenoiser, make_toy_backend, toy_waveform_from_latent

__all__ = [
    "BackendDescriptor",
    "DenoiserHandle",
    "LayerProbe",
    "NoisePrediction",
    "NoiseSchedule",
    "ProbeData",
    "ToyDenoiser",
    "load_backend",
    "make_toy_backend",
    "toy_waveform_from_latent",
]
