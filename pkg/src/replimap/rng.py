"""Labelled, seed-derived random streams.

Every random draw in the toolkit comes from a stream identified by a 64-bit
seed and a string label.  The generator is xoshiro256** seeded through a
splitmix64 expansion of ``seed ^ hash64(label)``; the bit stream is fixed for
``format_version`` 1 and does not depend on platform or thread count.

Two flavours share the same algorithm:

* :class:`RngStream` -- a single stream on Python integers.
* :class:`StreamBatch` -- many independent streams advanced in lockstep with
  numpy ``uint64`` arrays.  Draws can be masked so that a stream only advances
  when it actually consumes a value.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_TWO_M53 = 1.0 / 9007199254740992.0


@lru_cache(maxsize=1 << 16)
def hash64(label: str) -> int:
    """FNV-1a over the UTF-8 bytes of ``label``."""
    h = _FNV_OFFSET
    for b in label.encode("utf-8"):
        h = ((h ^ b) * _FNV_PRIME) & MASK64
    return h


def _splitmix_out(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def splitmix64(state: int, count: int) -> list[int]:
    """First ``count`` outputs of splitmix64 started at ``state``."""
    out = []
    for _ in range(count):
        state = (state + GOLDEN) & MASK64
        out.append(_splitmix_out(state))
    return out


def mix64(key: int) -> int:
    return splitmix64(key, 1)[0]


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class RngStream:
    """A single xoshiro256** stream.

    Not safe to share between concurrent tasks; derive a child per task with
    :meth:`child` instead.
    """

    __slots__ = ("seed", "label", "key", "_s")

    def __init__(self, seed: int, label: str = ""):
        if not 0 <= int(seed) <= MASK64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self.label = label
        self.key = self.seed ^ hash64(label)
        self._s = splitmix64(self.key, 4)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, label={self.label!r})"

    def child(self, label: str) -> "RngStream":
        # Keyed on the parent's mixed key so nesting is order-sensitive.
        return RngStream(mix64(self.key), label)

    def child_key(self, label: str) -> int:
        return mix64(self.key) ^ hash64(label)

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * _TWO_M53


# numpy versions -------------------------------------------------------------

_U = np.uint64


def _np_splitmix_expand(keys: np.ndarray) -> np.ndarray:
    state = keys.astype(np.uint64, copy=True)
    out = np.empty((4, state.size), dtype=np.uint64)
    with np.errstate(over="ignore"):
        for i in range(4):
            state = state + _U(GOLDEN)
            z = state
            z = (z ^ (z >> _U(30))) * _U(_MIX1)
            z = (z ^ (z >> _U(27))) * _U(_MIX2)
            out[i] = z ^ (z >> _U(31))
    return out


def _np_rotl(x: np.ndarray, k: int) -> np.ndarray:
    return (x << _U(k)) | (x >> _U(64 - k))


class StreamBatch:
    """``n`` independent xoshiro256** streams advanced together.

    Stream ``i`` of a batch built from key ``k`` yields exactly the same
    numbers as ``RngStream`` with ``seed ^ hash64(label) == k``.
    """

    def __init__(self, keys):
        keys = np.asarray(keys, dtype=np.uint64).ravel()
        self.keys = keys
        self._s = list(_np_splitmix_expand(keys))

    @classmethod
    def children(cls, parent: RngStream, labels) -> "StreamBatch":
        base = mix64(parent.key)
        return cls(np.array([base ^ hash64(lab) for lab in labels], dtype=np.uint64))

    @property
    def size(self) -> int:
        return self.keys.size

    def next_u64(self, mask: np.ndarray | None = None) -> np.ndarray:
        s0, s1, s2, s3 = self._s
        with np.errstate(over="ignore"):
            result = _np_rotl(s1 * _U(5), 7) * _U(9)
        t = s1 << _U(17)
        n2 = s2 ^ s0
        n3 = s3 ^ s1
        n1 = s1 ^ n2
        n0 = s0 ^ n3
        n2 ^= t
        n3 = _np_rotl(n3, 45)
        if mask is None:
            self._s = [n0, n1, n2, n3]
        else:
            for old, new in zip(self._s, (n0, n1, n2, n3)):
                np.copyto(old, new, where=mask)
        return result

    def uniform(self, mask=None) -> np.ndarray:
        return (self.next_u64(mask) >> _U(11)).astype(np.float64) * _TWO_M53

    def normal(self, mask=None) -> np.ndarray:
        """Box-Muller, cosine branch only; consumes two draws per stream."""
        u1 = self.uniform(mask)
        u2 = self.uniform(mask)
        return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)

    def poisson(self, lam, mask=None) -> np.ndarray:
        """Inversion sampling; consumes exactly one draw per stream."""
        lam = np.broadcast_to(np.asarray(lam, dtype=np.float64), (self.size,))
        u = self.uniform(mask)
        k = np.zeros(self.size, dtype=np.int64)
        p = np.exp(-lam)
        cdf = p.copy()
        active = u >= cdf
        cap = int(np.max(lam, initial=0.0) + 40.0 * np.sqrt(np.max(lam, initial=0.0)) + 100)
        while active.any() and k.max(initial=0) < cap:
            k = np.where(active, k + 1, k)
            p = np.where(active, p * lam / np.maximum(k, 1), p)
            cdf = np.where(active, cdf + p, cdf)
            active = active & (u >= cdf) & (p > 0)
        return k
