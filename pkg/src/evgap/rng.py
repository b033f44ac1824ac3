"""Order-independent per-sample random streams.

Every random decision in the toolkit is keyed by ``(seed, sample_id, stream)``
so that results do not depend on processing order or thread count.

Key derivation (all arithmetic modulo 2**64)::

    h   = FNV-1a 64-bit hash of sample_id encoded as UTF-8
    z   = mix64((seed XOR h) + GOLDEN * (stream + 1))
    u   = (z >> 11) * 2**-53            # uniform draw in [0, 1)

where ``mix64`` is the splitmix64 finalizer::

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

and ``GOLDEN = 0x9E3779B97F4A7C15``.  When more than one draw is needed the
64-bit key seeds a numpy ``Generator`` (``np.random.default_rng(z)``).
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3

# stream indices used across modules
STREAM_LOW_STEERING = 0
STREAM_SPLIT = 16


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & MASK64
    return h


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_key(seed: int, sample_id: str, stream: int = 0) -> int:
    h = fnv1a64(sample_id.encode("utf-8"))
    return mix64(((seed & MASK64) ^ h) + GOLDEN * (stream + 1))


def uniform(seed: int, sample_id: str, stream: int = 0) -> float:
    """Single uniform draw in [0, 1) for ``(seed, sample_id, stream)``."""
    return (derive_key(seed, sample_id, stream) >> 11) * 2.0**-53


def derive_rng(seed: int, sample_id: str, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(derive_key(seed, sample_id, stream))
