"""Named, order-independent random streams.

Every draw in the package comes from ``stream(seed, replicate, name)``: a
Philox generator keyed by the master seed, the replicate index and a fixed
stream id. Replicates can therefore run in any order or concurrently and
still reproduce bit-for-bit.
"""

from __future__ import annotations

import numpy as np

STREAM_IDS = {
    "directions": 1,
    "w1": 2,
    "w2": 3,
    "epsilon": 4,
    "solver": 5,
}


def stream(seed: int, replicate: int = 0, name: str = "w1") -> np.random.Generator:
    if name not in STREAM_IDS:
        raise KeyError(f"unknown stream {name!r}; expected one of {sorted(STREAM_IDS)}")
    if seed < 0 or replicate < 0:
        raise ValueError("seed and replicate must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(replicate), STREAM_IDS[name]))
    return np.random.Generator(np.random.Philox(ss))
