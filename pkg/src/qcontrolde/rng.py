"""Deterministic, path-addressable, buffered random streams.

Every stream is a Philox-4x64 counter-based generator whose 128-bit key is
derived from ``(master_seed, path)`` through :class:`numpy.random.SeedSequence`.
Raw 64-bit words are produced in blocks and handed out from a buffer, so
the variates a consumer sees depend only on the seed, the path and the
draw index, never on the block size or on which thread consumes the stream.
"""

from __future__ import annotations

import hashlib
import math
from typing import Hashable, Sequence

import numpy as np

GENERATOR_FAMILY = "philox4x64/seedsequence-path/v1"
DEFAULT_BUFFER = 4096

_U53 = 1.0 / (1 << 53)


def _path_words(path: Sequence[Hashable]) -> tuple[int, ...]:
    words: list[int] = []
    for element in path:
        if isinstance(element, (bool, np.bool_)):
            words += [2, int(element)]
        elif isinstance(element, (int, np.integer)):
            if element < 0:
                raise ValueError(f"negative path element {element!r}")
            words += [0, int(element)]
        elif isinstance(element, str):
            digest = hashlib.blake2b(element.encode(), digest_size=8).digest()
            words += [1, int.from_bytes(digest, "little")]
        else:
            raise TypeError(f"unsupported path element {element!r}")
    return tuple(words)


class RngStream:
    """A single-owner random stream addressed by ``(master_seed, path)``."""

    def __init__(
        self,
        master_seed: int,
        path: Sequence[Hashable] = (),
        buffer_size: int = DEFAULT_BUFFER,
    ):
        if buffer_size < 1:
            raise ValueError("buffer_size must be >= 1")
        self.master_seed = int(master_seed)
        self.path = tuple(path)
        self.buffer_size = int(buffer_size)
        seq = np.random.SeedSequence(
            self.master_seed & ((1 << 64) - 1), spawn_key=_path_words(self.path)
        )
        self._bitgen = np.random.Philox(key=seq.generate_state(2, np.uint64))
        self._buffer = np.empty(0, dtype=np.uint64)
        self._cursor = 0
        self.drawn = 0

    def __repr__(self) -> str:
        return f"RngStream(seed={self.master_seed}, path={self.path}, drawn={self.drawn})"

    def child(self, *path: Hashable) -> "RngStream":
        """Stream at ``self.path + path``; independent of this stream's cursor."""
        return RngStream(self.master_seed, self.path + tuple(path), self.buffer_size)

    def raw(self, count: int) -> np.ndarray:
        """Next ``count`` raw 64-bit words."""
        count = int(count)
        if count < 0:
            raise ValueError("count must be >= 0")
        out = np.empty(count, dtype=np.uint64)
        filled = 0
        while filled < count:
            if self._cursor == self._buffer.size:
                self._buffer = self._bitgen.random_raw(self.buffer_size)
                self._cursor = 0
            take = min(count - filled, self._buffer.size - self._cursor)
            out[filled : filled + take] = self._buffer[self._cursor : self._cursor + take]
            self._cursor += take
            filled += take
        self.drawn += count
        return out

    def uniform(self, count: int) -> np.ndarray:
        """Uniform variates on (0, 1], 53-bit resolution."""
        return ((self.raw(count) >> np.uint64(11)).astype(np.float64) + 1.0) * _U53

    def uniform1(self) -> float:
        return float(self.uniform(1)[0])

    def gaussian(self, count: int, mean: float = 0.0, sigma: float = 1.0) -> np.ndarray:
        """Normal variates by Box-Muller; each variate consumes two uniforms."""
        if sigma < 0 or not math.isfinite(sigma):
            raise ValueError(f"sigma must be finite and >= 0, got {sigma}")
        u = self.uniform(2 * int(count)).reshape(-1, 2)
        z = np.sqrt(-2.0 * np.log(u[:, 0])) * np.cos(2.0 * np.pi * u[:, 1])
        if sigma == 0:
            return np.full(int(count), float(mean))
        return mean + sigma * z

    def integers(self, high: int, count: int) -> np.ndarray:
        """Integers in ``[0, high)``; modulo bias is below 2**-50 for small ``high``."""
        if high < 1:
            raise ValueError("high must be >= 1")
        return (self.raw(count) % np.uint64(high)).astype(np.int64)

    def subset(self, n: int, k: int) -> np.ndarray:
        """Uniformly random ``k``-subset of ``range(n)``, sorted."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot choose {k} of {n}")
        keys = self.uniform(n)
        return np.sort(np.argsort(keys, kind="stable")[:k])


def seeded_stream(
    master_seed: int, path: Sequence[Hashable] = (), buffer_size: int = DEFAULT_BUFFER
) -> RngStream:
    return RngStream(master_seed, path, buffer_size)


def draw_uniform(stream: RngStream, count: int) -> np.ndarray:
    return stream.uniform(count)


def draw_gaussian(stream: RngStream, count: int, mean: float = 0.0, sigma: float = 1.0) -> np.ndarray:
    return stream.gaussian(count, mean, sigma)


def derive_seed(master_seed: int, *path: Hashable) -> int:
    """A 63-bit integer seed derived from ``(master_seed, path)``."""
    word = RngStream(master_seed, ("seed",) + path, buffer_size=1).raw(1)[0]
    return int(word >> np.uint64(1))
