"""Counter-based random streams.

Every variate in comlab is a pure function of ``(seed, stream_id, counter)``.
The triple maps onto a Philox-4x64 generator: ``(seed, stream_id)`` is the
128-bit key and ``counter`` occupies the third word of the 256-bit block
counter, leaving 2**128 blocks of headroom per counter value.  Sample ``k`` of
a run always uses ``counter = base + k``, so results do not depend on how draws
are batched or distributed over workers.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np

_MASK64 = (1 << 64) - 1

# role tags mixed into stream ids so independent parts of a run never share a key
STREAM_GROUP = 0x01
STREAM_POINTS = 0x02
STREAM_UNITARY = 0x03
STREAM_CHECKS = 0x04


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _philox_state(seed: int, stream_id: int, counter: int) -> dict:
    return {
        "bit_generator": "Philox",
        "state": {
            "counter": np.array([0, 0, counter & _MASK64, 0], dtype=np.uint64),
            "key": np.array([seed & _MASK64, stream_id & _MASK64], dtype=np.uint64),
        },
        "buffer": np.zeros(4, dtype=np.uint64),
        "buffer_pos": 4,
        "has_uint32": 0,
        "uinteger": 0,
    }


@dataclass(frozen=True)
class RngStream:
    """Coordinates of one reproducible random stream."""

    seed: int
    stream_id: int = 0
    counter: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id", "counter"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
                raise TypeError(f"{name} must be an integer, got {type(v).__name__}")
            object.__setattr__(self, name, int(v) & _MASK64)

    def generator(self) -> np.random.Generator:
        """A fresh numpy Generator positioned at this stream's counter."""
        bg = np.random.Philox(key=[0, 0])
        bg.state = _philox_state(self.seed, self.stream_id, self.counter)
        return np.random.Generator(bg)

    def at(self, counter: int) -> RngStream:
        return replace(self, counter=int(counter))

    def offset(self, k: int) -> RngStream:
        return replace(self, counter=self.counter + int(k))

    def substream(self, tag: int) -> RngStream:
        """Statistically independent stream derived from this one and ``tag``."""
        sid = _splitmix64(self.stream_id ^ _splitmix64(int(tag) & _MASK64))
        return RngStream(self.seed, sid, self.counter)

    def as_dict(self) -> dict:
        return {"seed": self.seed, "stream_id": self.stream_id, "counter": self.counter}


def generators(rng: RngStream, count: int) -> Iterator[np.random.Generator]:
    """Yield generators for counters ``rng.counter, ..., rng.counter + count - 1``.

    One bit generator is re-keyed in place, which is several times cheaper than
    constructing a new one per draw.  Each yielded generator is only valid
    until the next iteration.
    """
    bg = np.random.Philox(key=[0, 0])
    gen = np.random.Generator(bg)
    for k in range(count):
        bg.state = _philox_state(rng.seed, rng.stream_id, rng.counter + k)
        yield gen
