"""Deterministic derivation of sub-seeds from a master seed and labels."""

from __future__ import annotations

import zlib

import numpy as np


def _as_int(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label)
    return zlib.crc32(str(label).encode("utf-8"))


def derive_seed(master: int, *labels) -> int:
    """64-bit seed that depends only on ``master`` and the ordered ``labels``.

    Labels may be integers or strings; strings are hashed with CRC-32 so the
    result is stable across interpreter runs.
    """
    entropy = [int(master)] + [_as_int(x) for x in labels]
    words = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return int(words[0]) | (int(words[1]) << 32)


def derive_rng(master: int, *labels) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *labels))
