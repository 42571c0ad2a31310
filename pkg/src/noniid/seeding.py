"""Counter-based seed derivation.

``hash64(master, index)`` is ``mix(mix(master) XOR index)`` where ``mix`` is the
SplitMix64 finalizer with the usual constants::

    z = (x + 0x9E3779B97F4A7C15) mod 2**64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2**64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2**64
    return z ^ (z >> 31)

Derived seeds depend only on ``(master, index)``, so generation order and
parallelism cannot change results.
"""

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    z = (int(x) + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def hash64(master: int, index: int) -> int:
    return splitmix64(splitmix64(int(master) & MASK64) ^ (int(index) & MASK64))


def rng_for(master: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(hash64(master, index)))
