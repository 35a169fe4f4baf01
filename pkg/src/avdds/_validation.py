"""Input validation helpers used across modules.

These mirror the sklearn ``check_*`` idiom: validate, raise with a useful
message, return the (possibly coerced) value.
"""

from __future__ import annotations

import numpy as np
import torch

from .exceptions import ConfigurationError, ShapeError


def check_finite(x, name: str = "tensor"):
    """Raise ``ValueError`` if *x* contains NaN or Inf. Returns *x*."""
    if isinstance(x, torch.Tensor):
        ok = bool(torch.isfinite(x.detach()).all())
    else:
        ok = bool(np.isfinite(np.asarray(x)).all())
    if not ok:
        raise ValueError(f"{name} contains non-finite entries")
    return x


def check_same_shape(a, b, a_name: str = "a", b_name: str = "b"):
    """Raise ``ShapeError`` unless *a* and *b* have identical shapes."""
    sa, sb = tuple(a.shape), tuple(b.shape)
    if sa != sb:
        raise ShapeError(f"{a_name} has shape {sa} but {b_name} has shape {sb}")
    return a, b


def check_rank(x, rank: int, name: str = "tensor"):
    if x.ndim != rank:
        raise ShapeError(f"{name} must have {rank} dimensions, got shape {tuple(x.shape)}")
    return x


def check_in_range(value: float, lo: float, hi: float, name: str,
                   lo_open: bool = False, hi_open: bool = False) -> float:
    """Range check with configurable open/closed endpoints."""
    ok = (value > lo if lo_open else value >= lo) and (value < hi if hi_open else value <= hi)
    if not ok:
        lb = "(" if lo_open else "["
        rb = ")" if hi_open else "]"
        raise ConfigurationError(f"{name} must be in {lb}{lo}, {hi}{rb}, got {value}")
    return value


def check_positive(value: float, name: str) -> float:
    if not value > 0:
        raise ConfigurationError(f"{name} must be > 0, got {value}")
    return value
