"""Frame-to-grid packing with per-iteration shuffling.

Each grid image tiles n_g x n_g permuted frame latents, so an image denoiser
edits n_g^2 frames in one pass; reshuffling the assignment every optimization
step spreads temporal coherence across grids. Packing is a pure coordinate
permutation, bitwise invertible given the same permutation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

from .exceptions import ConfigurationError, ShapeError


@dataclass(frozen=True)
class GridSpec:
    """Geometry of one packing: side length n_g and frame count F = M * n_g^2."""

    n_g: int
    frames: int

    def __post_init__(self):
        if self.n_g < 1:
            raise ConfigurationError("grid side must be >= 1")
        if self.frames < 1:
            raise ConfigurationError("need at least one frame")
        if self.frames % (self.n_g ** 2) != 0:
            raise ConfigurationError(
                f"{self.frames} frames do not fill {self.n_g}x{self.n_g} grids; "
                "frame count must be divisible by n_g^2 (no padding)")

    @property
    def per_grid(self) -> int:
        return self.n_g ** 2

    @property
    def num_grids(self) -> int:
        return self.frames // self.per_grid


@dataclass(frozen=True)
class FramePermutation:
    """A bijection on frame indices plus the step it was drawn for."""

    perm: np.ndarray
    step: Optional[int] = None

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.int64)
        object.__setattr__(self, "perm", perm)
        if not np.array_equal(np.sort(perm), np.arange(perm.size)):
            raise ConfigurationError("perm is not a permutation of 0..F-1")

    def __len__(self) -> int:
        return int(self.perm.size)

    @property
    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.perm.size)
        return inv


def shuffle_frames(n_frames: int, rng: np.random.Generator,
                   step: Optional[int] = None) -> FramePermutation:
    """Uniform random frame permutation; drawn fresh each optimization step."""
    if n_frames < 1:
        raise ConfigurationError("need at least one frame")
    return FramePermutation(perm=rng.permutation(n_frames), step=step)


def _check_pack_args(z_v: torch.Tensor, spec: GridSpec, perm: FramePermutation) -> None:
    if z_v.ndim != 4:
        raise ShapeError(f"video latent must be (F, C, h, w), got shape {tuple(z_v.shape)}")
    if z_v.shape[0] != spec.frames:
        raise ShapeError(f"latent has {z_v.shape[0]} frames but spec expects {spec.frames}")
    if len(perm) != spec.frames:
        raise ConfigurationError(f"permutation covers {len(perm)} frames, spec has {spec.frames}")


def pack_grid(z_v: torch.Tensor, spec: GridSpec, perm: FramePermutation) -> torch.Tensor:
    """Tile permuted frames into grid images: (F, C, h, w) -> (M, C, n_g*h, n_g*w).

    Tile (r, c) of grid m holds frame perm[m*n_g^2 + r*n_g + c]. Lossless.
    """
    _check_pack_args(z_v, spec, perm)
    n_g = spec.n_g
    rows = []
    for m in range(spec.num_grids):
        grid_rows = []
        for r in range(n_g):
            tiles = [z_v[perm.perm[m * spec.per_grid + r * n_g + c]] for c in range(n_g)]
            grid_rows.append(torch.cat(tiles, dim=-1))
        rows.append(torch.cat(grid_rows, dim=-2))
    return torch.stack(rows, dim=0)


def unpack_grid(z_g: torch.Tensor, spec: GridSpec, perm: FramePermutation) -> torch.Tensor:
    """Exact inverse of pack_grid for the same (spec, perm)."""
    if z_g.ndim != 4:
        raise ShapeError(f"grid latent must be (M, C, H, W), got shape {tuple(z_g.shape)}")
    if z_g.shape[0] != spec.num_grids:
        raise ShapeError(f"latent has {z_g.shape[0]} grids but spec expects {spec.num_grids}")
    if len(perm) != spec.frames:
        raise ConfigurationError(f"permutation covers {len(perm)} frames, spec has {spec.frames}")
    n_g = spec.n_g
    height, width = z_g.shape[-2], z_g.shape[-1]
    if height % n_g or width % n_g:
        raise ShapeError(f"grid image {height}x{width} not divisible into {n_g}x{n_g} tiles")
    tile_h, tile_w = height // n_g, width // n_g
    frames = [None] * spec.frames
    for m in range(spec.num_grids):
        for r in range(n_g):
            for c in range(n_g):
                frame_idx = int(perm.perm[m * spec.per_grid + r * n_g + c])
                frames[frame_idx] = z_g[m, :, r * tile_h:(r + 1) * tile_h,
                                        c * tile_w:(c + 1) * tile_w]
    return torch.stack(frames, dim=0)


def grid_patch_to_frame(spec: GridSpec, perm: FramePermutation,
                        frame_hw: tuple[int, int], m: int, q: int) -> tuple[int, int, int]:
    """Map a flat patch index within grid image m to (frame, row, col)."""
    tile_h, tile_w = frame_hw
    grid_w = tile_w * spec.n_g
    row, col = divmod(q, grid_w)
    r, in_r = divmod(row, tile_h)
    c, in_c = divmod(col, tile_w)
    frame = int(perm.perm[m * spec.per_grid + r * spec.n_g + c])
    return frame, in_r, in_c


def frame_to_grid_patch(spec: GridSpec, perm: FramePermutation,
                        frame_hw: tuple[int, int], frame: int,
                        row: int, col: int) -> tuple[int, int]:
    """Inverse patch mapping: frame-local (row, col) to (grid m, flat patch q)."""
    tile_h, tile_w = frame_hw
    slot = int(perm.inverse[frame])
    m, within = divmod(slot, spec.per_grid)
    r, c = divmod(within, spec.n_g)
    grid_w = tile_w * spec.n_g
    q = (r * tile_h + row) * grid_w + (c * tile_w + col)
    return m, q
