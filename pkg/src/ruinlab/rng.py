"""Counter-based random streams.

Every random draw goes through a Philox4x64-10 generator whose 128-bit key is
``(seed, stream)``, with the counter starting at zero.  The same contract can be
reproduced in any language that ships Random123-compatible Philox.  Replicate
``r`` of an experiment with base seed ``b`` uses ``seed = b XOR r``.
"""

import numpy as np

JUMPS = 0
BROWNIAN = 1

_MASK64 = (1 << 64) - 1


def generator(seed: int, stream: int) -> np.random.Generator:
    """Return an independent generator for ``(seed, stream)``."""
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream must be non-negative")
    key = np.array([seed & _MASK64, stream & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def replicate_seed(base_seed: int, replicate: int) -> int:
    return (base_seed ^ replicate) & _MASK64
