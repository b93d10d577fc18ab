"""Deterministic derivation of per-task random streams from one master seed.

Every source of randomness in the package draws from a stream keyed by
(master seed, stream id, indices...).  Streams are independent of each
other and of unrelated settings: e.g. the subsample drawn at boosting
iteration t does not change when ``max_trees`` changes.
"""

from __future__ import annotations

import numpy as np

# Stream ids.  Frozen: changing any value changes all seeded output.
SUBSAMPLE = 1
CV_ASSIGN = 2
CV_FOLD = 3
BASELINE_PERMUTE = 4
SIM_TRAIN = 5
SIM_TEST = 6


def derive_rng(seed: int, *path: int) -> np.random.Generator:
    """Generator for the stream at (seed, *path)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.default_rng(ss)


def derive_seed(seed: int, *path: int) -> int:
    """64-bit integer seed for the stream at (seed, *path)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
