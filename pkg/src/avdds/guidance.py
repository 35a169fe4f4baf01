"""Classifier-free guidance and delta/score distillation gradients.

The distillation gradients follow the Jacobian-free convention: the noise
difference is applied directly at the latent positions, skipping the denoiser
Jacobian. The contrastive loss elsewhere in the package is differentiated
exactly instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from ._validation import check_same_shape


@dataclass(frozen=True)
class GuidanceConfig:
    """Guidance weight for one modality's CFG combination."""

    omega: float = 7.5

    def __post_init__(self):
        if not torch.isfinite(torch.tensor(self.omega)):
            raise ValueError("omega must be finite")


def cfg_predict(eps_cond: torch.Tensor, eps_null: torch.Tensor, omega: float) -> torch.Tensor:
    """(1 + omega) * eps_cond - omega * eps_null."""
    check_same_shape(eps_cond, eps_null, "eps_cond", "eps_null")
    return (1.0 + omega) * eps_cond - omega * eps_null


def dds_loss(eps_trg: torch.Tensor, eps_src: torch.Tensor) -> torch.Tensor:
    """Squared L2 norm of the branch difference."""
    check_same_shape(eps_trg, eps_src, "eps_trg", "eps_src")
    diff = eps_trg - eps_src
    return (diff * diff).sum()


def dds_gradient(eps_trg: torch.Tensor, eps_src: torch.Tensor) -> torch.Tensor:
    """Jacobian-free update direction: the raw branch difference."""
    check_same_shape(eps_trg, eps_src, "eps_trg", "eps_src")
    return eps_trg - eps_src


def sds_gradient(eps_pred: torch.Tensor, eps_true: torch.Tensor) -> torch.Tensor:
    """Single-branch ablation: predicted noise minus the injected noise."""
    check_same_shape(eps_pred, eps_true, "eps_pred", "eps_true")
    return eps_pred - eps_true
