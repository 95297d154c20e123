"""Counter-keyed random streams.

Every random draw in a run comes from a Philox generator keyed by
``(master seed, stream label, counters...)``.  A batch is split into fixed
blocks and each block gets its own key, so the samples do not depend on how
many threads produce them or in which order.
"""

from __future__ import annotations

import zlib

import numpy as np

BLOCK = 4096


def label_id(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


class Streams:
    """Factory of independent generators derived from one master seed."""

    def __init__(self, seed: int):
        if seed < 0 or seed >= 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.seed = int(seed)

    def generator(self, label: str, *counters: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(label_id(label), *map(int, counters)))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, label: str, index: int = 0) -> "Streams":
        """Derived master seed, e.g. for one point of a sweep."""
        g = self.generator("child:" + label, index)
        return Streams(int(g.integers(0, 2**63)))


def blocks(N: int, block: int = BLOCK) -> list[tuple[int, int]]:
    return [(lo, min(lo + block, N)) for lo in range(0, N, block)]
