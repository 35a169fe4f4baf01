"""Flat binary tensor container with a JSON shape header.

``base.bin`` holds raw little-endian values in C order; ``base.json`` records
dtype and shape, enough to reload the tensor anywhere without pickle.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

_DTYPES = {"float32": np.float32, "float64": np.float64}


def save_tensor(base_path, tensor: torch.Tensor) -> None:
    base = str(base_path)
    array = np.ascontiguousarray(tensor.detach().cpu().numpy())
    if array.dtype.name not in _DTYPES:
        raise ValueError(f"unsupported dtype {array.dtype.name}")
    Path(base + ".bin").write_bytes(array.astype(array.dtype.newbyteorder("<")).tobytes())
    header = {"dtype": array.dtype.name, "shape": list(array.shape), "order": "C", "byteorder": "little"}
    Path(base + ".json").write_text(json.dumps(header))


def load_tensor(base_path) -> torch.Tensor:
    base = str(base_path)
    header = json.loads(Path(base + ".json").read_text())
    dtype = _DTYPES[header["dtype"]]
    raw = Path(base + ".bin").read_bytes()
    array = np.frombuffer(raw, dtype=np.dtype(dtype).newbyteorder("<")).astype(dtype)
    return torch.from_numpy(array.reshape(header["shape"]).copy())
