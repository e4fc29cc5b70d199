"""Deterministic random streams.

Every stochastic component draws from an RngStream, a PCG64 generator
addressed by (seed, stream_id). Stream k is ``PCG64(seed).jumped(k)``, so
replica streams are 2**127 draws apart and a replica's output depends only on
its own (seed, stream_id), never on scheduling or worker count.

Both kernel backends consume the stream exclusively through the bit
generator's ``next_double`` output: the compiled kernel calls it directly,
the pure-Python kernel goes through ``Generator.random()``, which is the same
call, so draw sequences are bitwise identical across backends.
"""

from __future__ import annotations

import numpy as np
from numpy.random import PCG64, Generator

_MASK64 = (1 << 64) - 1


def splitmix64(z: int) -> int:
    """One splitmix64 scramble round; a cheap stateless hash on 64-bit ints."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


class RngStream:
    """A named, reproducible substream of the run's random source.

    Parameters
    ----------
    seed : int
        Run seed, non-negative.
    stream_id : int
        Substream index (replica index for replica runs).
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        if stream_id < 0:
            raise ValueError("stream_id must be non-negative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.bit_generator = PCG64(self.seed).jumped(self.stream_id)
        self.generator = Generator(self.bit_generator)

    def random(self) -> float:
        """Next uniform double in [0, 1); one next_double call."""
        return float(self.generator.random())

    def uniform_block(self, n: int) -> np.ndarray:
        """n consecutive uniforms; same stream positions as n random() calls."""
        return self.generator.random(n)

    def derived_key(self, salt: int = 0) -> int:
        """A 64-bit key that is a pure function of (seed, stream_id, salt).

        Used for quenched structures (e.g. link orientations) that must be
        reproducible without consuming draws from the main stream.
        """
        return splitmix64(splitmix64(self.seed ^ (salt & _MASK64)) ^ self.stream_id)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"
