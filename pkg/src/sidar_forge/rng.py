"""Seeded random streams.

Samplers draw from ``numpy.random.Generator(Philox)`` streams keyed by
``(seed, category, index)`` so that, for example, asking for more lights
never shifts the occluder draws. The renderer needs per-(pixel, sample)
numbers that do not depend on how work is chunked, so it uses a stateless
64-bit hash instead (``uniform_hash``).
"""

from __future__ import annotations

import zlib

import numpy as np

MASK64 = (1 << 64) - 1

CATEGORIES = ("cameras", "lights", "occluders", "counts", "render", "scene")


def category_tag(name: str) -> int:
    return zlib.crc32(name.encode("ascii"))


def stream(seed: int, category: str, index: int = 0) -> np.random.Generator:
    """Independent generator for one (seed, category, index) triple."""
    ss = np.random.SeedSequence(entropy=int(seed) & MASK64,
                                spawn_key=(category_tag(category), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(master_seed: int, *keys: int) -> int:
    """64-bit child seed of ``master_seed`` for the given integer keys."""
    ss = np.random.SeedSequence(entropy=int(master_seed) & MASK64, spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def mix64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finaliser on a uint64 array (wrapping arithmetic)."""
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = x ^ (x >> np.uint64(30))
        x = x * _C1
        x = x ^ (x >> np.uint64(27))
        x = x * _C2
        x = x ^ (x >> np.uint64(31))
    return x


def uniform_hash(key: int, counter: np.ndarray, dim: int) -> np.ndarray:
    """Uniform doubles in [0, 1) from (key, per-path counter, dimension).

    ``counter`` is a uint64 array identifying the path (pixel and sample);
    ``dim`` identifies the random decision along the path.
    """
    with np.errstate(over="ignore"):
        k = mix64(np.uint64(key & MASK64) ^ (np.uint64(dim) * _GOLDEN))
        x = mix64(np.asarray(counter, dtype=np.uint64) ^ k)
        x = mix64(x + _GOLDEN)
    return (x >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
