"""Reproducible random streams keyed by ``(seed, stream_id)``."""

from __future__ import annotations

import numpy as np


class RngStream:
    """A reproducible PCG64 stream.

    Streams with the same seed and different ``stream_id`` come from
    independent children of one :class:`numpy.random.SeedSequence`, so work
    units can be handed out in any order (or to any number of threads)
    without changing the draws each unit sees.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def random(self, size=None):
        return self.generator.random(size)

    def uniform_open(self, size=None):
        """Uniforms on (0, 1]; safe to feed into ``log`` and negative powers."""
        return 1.0 - self.generator.random(size)

    def child(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
