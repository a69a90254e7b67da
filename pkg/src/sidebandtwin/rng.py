"""Counter-based random streams.

Every stream is a Philox generator keyed by a SeedSequence built from the
64-bit base seed and a tuple of stream indices, so stream (seed, i, j) can
be regenerated alone, in any order, on any worker.
"""

from __future__ import annotations

import numpy as np

SEED_MASK = (1 << 64) - 1


def stream(seed: int, *indices: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & SEED_MASK,
                                spawn_key=tuple(int(i) for i in indices))
    return np.random.Generator(np.random.Philox(ss))
