"""Seeded uniform substreams.

Each consumer owns a substream keyed by (seed, namespace, index), so adding a
server or a policy never shifts the uniforms another consumer sees.
"""
from __future__ import annotations

import numpy as np

# substream namespaces
SERVICE = 0
COUPLING_FRESH = 1
RANDOM_ORDER = 2
WORKLOAD = 3


def generator(seed: int, *key: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seed must be a nonnegative integer")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


class UniformStream:
    """Uniforms on [0, 1) handed out one at a time, drawn in blocks."""

    __slots__ = ("_gen", "_buf", "_pos", "_block", "consumed")

    def __init__(self, seed: int, *key: int, block: int = 512):
        self._gen = generator(seed, *key)
        self._buf: list[float] = []
        self._pos = 0
        self._block = block
        self.consumed = 0

    def next(self) -> float:
        if self._pos == len(self._buf):
            self._buf = self._gen.random(self._block).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        self.consumed += 1
        return u
