"""Pinned, splittable random streams.

All stochastic choices in the framework (timesteps, injected noise, frame
permutations, patch sampling, count alignment) come from Philox counter-based
generators keyed by ``(seed, *tags)``. Philox is a named 64-bit algorithm with
identical output on every platform, and keying by tags gives independent
streams per purpose: consuming draws in one subsystem never shifts another
subsystem's stream.
"""

from __future__ import annotations

import hashlib

import numpy as np


def split_stream(seed: int, *tags) -> np.random.Generator:
    """Return an independent generator keyed by ``(seed, *tags)``.

    Tags are stringified, so any hashable mix of purpose names and step
    indices works: ``split_stream(seed, "eps", "audio", step)``.
    """
    material = repr((int(seed),) + tuple(str(t) for t in tags)).encode("utf-8")
    digest = hashlib.blake2b(material, digest_size=16).digest()
    key = np.frombuffer(digest, dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
