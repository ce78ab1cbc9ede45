"""Seeded random streams and deterministic sharding of Monte-Carlo loops.

Every stochastic routine receives either an explicit ``numpy.random.Generator``
or a master seed from which per-shard generators are derived.  A shard stream
is a PCG64 generator seeded from ``SeedSequence([seed, h(name), shard])`` where
``h`` is the first 8 bytes (little endian) of the SHA-256 digest of the
experiment name.  Shards have a fixed size, so results never depend on how many
workers process them.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

DEFAULT_SHARD_SIZE = 1 << 14


def name_hash(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def stream(seed: int, name: str = "", shard: int = 0) -> np.random.Generator:
    """Return the generator for ``(seed, name, shard)``."""
    if seed is None:
        raise ValueError("an explicit integer seed is required")
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), name_hash(name), int(shard)])
    return np.random.Generator(np.random.PCG64(ss))


def child_seed(rng: np.random.Generator) -> int:
    """Draw a 63-bit seed from ``rng`` (used to hand a stream to sharded code)."""
    return int(rng.integers(0, 2**63 - 1))


def shard_sizes(m: int, shard_size: int = DEFAULT_SHARD_SIZE) -> List[int]:
    full, rest = divmod(int(m), int(shard_size))
    sizes = [shard_size] * full
    if rest:
        sizes.append(rest)
    return sizes


def map_shards(
    fn: Callable[[int, np.random.Generator], T],
    m: int,
    seed: int,
    name: str,
    shard_size: int = DEFAULT_SHARD_SIZE,
    workers: int = 1,
) -> List[T]:
    """Apply ``fn(size, rng)`` to each shard of ``m`` items, in shard order."""
    sizes = shard_sizes(m, shard_size)
    jobs = [(size, stream(seed, name, i)) for i, size in enumerate(sizes)]
    if workers <= 1 or len(jobs) <= 1:
        return [fn(size, rng) for size, rng in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


@dataclass
class Moments:
    """Running first and second moments of a (possibly vector) statistic."""

    count: int = 0
    total: np.ndarray | float = 0.0
    total_sq: np.ndarray | float = 0.0

    def add(self, values: np.ndarray) -> "Moments":
        values = np.asarray(values, dtype=np.float64)
        self.count += values.shape[0]
        self.total = self.total + values.sum(axis=0)
        self.total_sq = self.total_sq + (values * values).sum(axis=0)
        return self

    def merge(self, other: "Moments") -> "Moments":
        return Moments(self.count + other.count, self.total + other.total,
                       self.total_sq + other.total_sq)

    @property
    def mean(self):
        return self.total / self.count

    @property
    def variance(self):
        """Unbiased sample variance."""
        mean = self.mean
        return np.maximum(self.total_sq - self.count * mean * mean, 0.0) / (self.count - 1)

    @property
    def stderr(self):
        return np.sqrt(self.variance / self.count)


def merge_moments(parts: Sequence[Moments]) -> Moments:
    out = Moments()
    for part in parts:
        out = out.merge(part)
    return out


def resolve_seed(rng) -> int:
    """Accept an integer master seed or a Generator (from which one is drawn)."""
    if isinstance(rng, np.random.Generator):
        return child_seed(rng)
    if rng is None:
        raise ValueError("an explicit integer seed is required")
    return int(rng)


def as_generator(rng, name: str = "") -> np.random.Generator:
    """Accept a Generator as is, or turn an integer seed into the stream ``(seed, name, 0)``."""
    if isinstance(rng, np.random.Generator):
        return rng
    return stream(resolve_seed(rng), name)
