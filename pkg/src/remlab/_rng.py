"""Counter-based 64-bit hashing and random streams.

Every random quantity in the package is a pure function of a 64-bit key and a
counter, so replicas can be regenerated independently and in any order.  The
mixing function is the SplitMix64 finalizer; a stream is the SplitMix64
sequence started from a key.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def mix64_array(z: np.ndarray) -> np.ndarray:
    """Vectorized :func:`mix64` over a ``uint64`` array (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def _label_word(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & MASK64
    data = str(label).encode()
    h = 0x6A09E667F3BCC908
    for b in data:
        h = mix64(h ^ b)
    return h


def derive_key(seed: int, *labels) -> int:
    """Derive a stream key from an experiment seed and a path of labels.

    Labels may be integers (replica ids, dimensions) or strings (module
    names).  ``derive_key(s, "dynamics", 7)`` is the key of replica 7 of the
    dynamics stream of experiment ``s``.
    """
    k = mix64(int(seed) ^ 0xD1B54A32D192ED03)
    for lab in labels:
        k = mix64((k + GOLDEN) ^ _label_word(lab))
    return k


def replica_keys(seed: int, label, count: int, offset: int = 0) -> np.ndarray:
    """Keys for ``count`` replicas of one labelled stream, as ``uint64``."""
    base = derive_key(seed, label)
    return np.array(
        [mix64(base ^ mix64(offset + i + 1)) for i in range(count)], dtype=np.uint64
    )


class Stream:
    """SplitMix64 stream: ``next()`` returns ``mix64(key + k*GOLDEN)`` for k = 1, 2, ...

    The compiled kernels implement exactly the same sequence, so a replica run
    through either backend consumes identical random words.
    """

    __slots__ = ("state",)

    def __init__(self, key: int):
        self.state = int(key) & MASK64

    def next(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def uniform(self) -> float:
        """Uniform on [0, 1) with 53 random bits."""
        return (self.next() >> 11) * (1.0 / 9007199254740992.0)

    def open_uniform(self) -> float:
        """Uniform on (0, 1); never returns an endpoint."""
        return ((self.next() >> 11) + 0.5) * (1.0 / 9007199254740992.0)
