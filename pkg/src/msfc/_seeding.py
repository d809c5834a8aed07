"""Stable per-task seed derivation.

Every independently trained object (restart, fold, direct model, bootstrap
cell) gets its own seed mixed from the base seed and a textual task key, so
serial and parallel execution see the same random streams.
"""

from __future__ import annotations

import zlib

import numpy as np


def derive_seed(base_seed: int, *keys) -> int:
    words = [int(base_seed) & 0xFFFFFFFF]
    for key in keys:
        words.append(zlib.crc32(str(key).encode("utf-8")))
    return int(np.random.SeedSequence(words).generate_state(1, dtype=np.uint32)[0])


def derive_rng(base_seed: int, *keys) -> np.random.Generator:
    return np.random.default_rng(derive_seed(base_seed, *keys))
