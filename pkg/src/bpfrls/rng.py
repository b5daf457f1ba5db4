"""Seeded random streams.

Every random quantity in the package is drawn from a Philox4x64 counter-based
generator whose key is derived from ``(seed, stream-id)`` through numpy's
``SeedSequence``.  Streams that need one draw per time step (particle noise,
resampling offsets) move the counter to a block indexed by the step, so the
values used at step ``t`` do not depend on how many draws happened before.
"""

from __future__ import annotations

import numpy as np

GENERATOR_ID = f"philox4x64-seedsequence/numpy-{np.__version__}"

# stream identifiers
INPUT = 1
MEAS_NOISE = 2
PROC_NOISE = 3
PF_INIT = 10
PF_NOISE = 11
PF_RESAMPLE = 12


def stream_key(seed: int, stream: int) -> int:
    """128-bit Philox key for a (seed, stream) pair."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    lo, hi = np.random.SeedSequence(int(seed), spawn_key=(int(stream),)).generate_state(2, np.uint64)
    return int(lo) | (int(hi) << 64)


def generator(seed: int, stream: int, block: int = 0) -> np.random.Generator:
    """Generator for ``stream`` of ``seed``, positioned at counter block ``block``.

    Blocks are 2**128 draws apart, so distinct blocks never overlap.
    """
    bitgen = np.random.Philox(key=stream_key(seed, stream), counter=[0, 0, int(block), 0])
    return np.random.Generator(bitgen)
