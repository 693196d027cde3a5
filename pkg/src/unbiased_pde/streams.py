"""Counter-based random streams keyed by (master seed, copy, role, i, j).

Every estimator copy owns a Philox key derived from the master seed and the
copy index.  Roles and sub-indices are packed into the two high words of the
Philox counter, so substreams never overlap (each would need 2**128 blocks to
reach the next) and can be created in any order, on any thread, with the same
result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FIELD = 1
OUTER = 2
PATH = 3
AUX = 4

_MASK32 = (1 << 32) - 1


def _counter(role: int, i: int, j: int) -> list[int]:
    if not (0 <= i <= _MASK32 and 0 <= j):
        raise ValueError(f"substream indices out of range: ({i}, {j})")
    return [0, 0, (role << 32) | i, j]


@dataclass(frozen=True)
class CopyStreams:
    """All substreams belonging to one estimator copy."""

    key: tuple[int, int]

    def stream(self, role: int, i: int = 0, j: int = 0) -> np.random.Generator:
        bitgen = np.random.Philox(key=np.array(self.key, dtype=np.uint64),
                                  counter=_counter(role, i, j))
        return np.random.Generator(bitgen)

    def field(self, block: int) -> np.random.Generator:
        return self.stream(FIELD, 0, block)

    def outer(self) -> np.random.Generator:
        return self.stream(OUTER)

    def path(self, i: int, j: int) -> np.random.Generator:
        return self.stream(PATH, i, j)


@dataclass(frozen=True)
class StreamFactory:
    seed: int

    def copy(self, index: int) -> CopyStreams:
        ss = np.random.SeedSequence(self.seed, spawn_key=(int(index),))
        k0, k1 = (int(v) for v in ss.generate_state(2, dtype=np.uint64))
        return CopyStreams((k0, k1))

    def generator(self, index: int, role: int = AUX) -> np.random.Generator:
        """Convenience: a single generator for copy ``index``."""
        return self.copy(index).stream(role)
