"""The vertex-resampling chain, its permuted variant, the lifted chain, and the noise operator.

One step draws survival bits ``z`` with ``Pr[z_i = 1] = keep_prob``; an edge
keeps its sign iff both endpoints survive and is otherwise resampled uniformly.
The characters are eigenvectors with eigenvalue ``keep_prob ** |V(S)|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import ArgumentError
from .fourier import Monomial
from .graphs import (Graph, GraphBatch, _pack, _pad_mask, _random_packed, edge_pairs, num_slots,
                     permute_batch, random_permutations)
from .streams import DEFAULT_SHARD_SIZE, Moments, as_generator, map_shards, merge_moments, resolve_seed
from .distinguish import AdvantageEstimate, TestFunction


@dataclass(frozen=True)
class ChainParams:
    """Keep probability ``p`` and whether to relabel by a uniform permutation first.

    ``drop_convention`` switches to the reading where an edge survives iff both
    endpoints draw ``z = 0`` with ``z ~ Ber(p)``; it exists as a negative control.
    """

    keep_prob: float
    permute: bool = False
    drop_convention: bool = False

    def __post_init__(self):
        if not (0.0 <= self.keep_prob <= 1.0):
            raise ArgumentError(f"keep_prob must lie in [0, 1], got {self.keep_prob}")

    @property
    def survival(self) -> float:
        """Probability that a given vertex keeps its incident edges."""
        return 1.0 - self.keep_prob if self.drop_convention else self.keep_prob


@dataclass(frozen=True)
class LiftedState:
    x: np.ndarray
    G: Graph

    def __post_init__(self):
        if np.shape(self.x) != (self.G.n,):
            raise ArgumentError("clique indicator length does not match the graph")


def eigenvalue(S: Monomial, p: float) -> float:
    """``p ** |V(S)|``; 1 for the empty monomial."""
    if not (0.0 <= p <= 1.0):
        raise ArgumentError("p must lie in [0, 1]")
    return p ** S.num_vertices


def _survivors(n: int, m: int, params: ChainParams, rng) -> np.ndarray:
    """Bernoulli survival bits from 32-bit uniforms (probability error below 2^-32)."""
    threshold = int(round(params.survival * 2.0**32))
    if threshold <= 0:
        return np.zeros((m, n), dtype=bool)
    if threshold >= 1 << 32:
        return np.ones((m, n), dtype=bool)
    words = rng.bit_generator.random_raw((m * n + 1) // 2).view(np.uint32)[: m * n]
    return (words < np.uint32(threshold)).reshape(m, n)


def edge_indicator_matrix(G: Graph, dtype=np.float32) -> np.ndarray:
    """Symmetric 0/1 adjacency matrix of ``G``."""
    I, J = edge_pairs(G.n)
    A = np.zeros((G.n, G.n), dtype=dtype)
    A[I, J] = G.bits
    return A + A.T


def _resample_packed(packed: np.ndarray, Z: np.ndarray, n: int, rng) -> np.ndarray:
    I, J = edge_pairs(n)
    keep = _pack(Z[:, I] & Z[:, J])
    fresh = _random_packed(n, packed.shape[0], rng)
    return (packed & keep) | (fresh & ~keep & np.uint8(0xFF))


def _permute_indicators(X: np.ndarray, pis: np.ndarray) -> np.ndarray:
    out = np.empty_like(X)
    np.put_along_axis(out, pis, X, axis=1)
    return out


# cap on graphs x slots handled at once; keeps the int64 permutation scratch near 64 MB
_CHUNK_ENTRIES = 1 << 23


def _chunk_rows(n: int) -> int:
    return max(1, _CHUNK_ENTRIES // max(1, num_slots(n)))


def step_batch(batch: GraphBatch, params: ChainParams, rng) -> GraphBatch:
    """One chain step applied independently to every graph of a batch."""
    n, m = batch.n, len(batch)
    rows = _chunk_rows(n)
    if m > rows:
        parts = [step_batch(GraphBatch(n, batch.packed[a:a + rows]), params, rng) for a in range(0, m, rows)]
        return GraphBatch(n, np.concatenate([b.packed for b in parts]))
    if params.permute:
        batch = permute_batch(batch, random_permutations(n, m, rng), check=False)
    Z = _survivors(n, m, params, rng)
    packed = _resample_packed(batch.packed, Z, n, rng)
    if packed.shape[1]:
        packed[:, -1] &= np.uint8(_pad_mask(n))
    return GraphBatch(n, packed)


def step(G: Graph, params: ChainParams, rng) -> Graph:
    """One step of the (optionally permuted) vertex-resampling chain."""
    return step_batch(GraphBatch(G.n, G.packed[None, :]), params, rng)[0]


def step_lifted_batch(X: np.ndarray, batch: GraphBatch, params: ChainParams, rng) -> Tuple[np.ndarray, GraphBatch]:
    """Lifted step on ``(x, G)`` pairs: ``y = x AND z`` with the same survival bits."""
    n, m = batch.n, len(batch)
    X = np.asarray(X, dtype=np.uint8)
    rows = _chunk_rows(n)
    if m > rows:
        parts = [step_lifted_batch(X[a:a + rows], GraphBatch(n, batch.packed[a:a + rows]), params, rng)
                 for a in range(0, m, rows)]
        return (np.concatenate([p[0] for p in parts]),
                GraphBatch(n, np.concatenate([p[1].packed for p in parts])))
    if params.permute:
        pis = random_permutations(n, m, rng)
        batch = permute_batch(batch, pis, check=False)
        X = _permute_indicators(X, pis)
    Z = _survivors(n, m, params, rng)
    packed = _resample_packed(batch.packed, Z, n, rng)
    if packed.shape[1]:
        packed[:, -1] &= np.uint8(_pad_mask(n))
    return (X & Z).astype(np.uint8), GraphBatch(n, packed)


def step_lifted(state: LiftedState, params: ChainParams, rng) -> LiftedState:
    Y, H = step_lifted_batch(state.x[None, :], GraphBatch(state.G.n, state.G.packed[None, :]), params, rng)
    return LiftedState(Y[0], H[0])


def step_edge_counts(G: Graph, params: ChainParams, m: int, rng, adjacency: Optional[np.ndarray] = None) -> np.ndarray:
    """Exact edge counts of ``m`` independent chain steps from ``G``.

    The surviving edges contribute ``z^T A z / 2`` (``A`` the 0/1 adjacency
    matrix) and the resampled slots a fair binomial.  Relabeling does not
    change edge counts, so ``permute`` is irrelevant here.
    """
    n = G.n
    if adjacency is None:
        adjacency = edge_indicator_matrix(G)
    Z = _survivors(n, m, params, rng).astype(np.float32)
    kept = np.rint(np.einsum("ki,ki->k", Z @ adjacency, Z) / 2).astype(np.int64)
    w = Z.sum(axis=1).astype(np.int64)
    return kept + rng.binomial(num_slots(n) - w * (w - 1) // 2, 0.5)


def apply_T_montecarlo(f, G: Graph, params: ChainParams, m: int, seed, shard_size: int = DEFAULT_SHARD_SIZE,
                       workers: int = 1, name: str = "apply-T") -> AdvantageEstimate:
    """Empirical mean of ``f`` over ``m`` chain steps from ``G``, with stderr."""
    if m < 1:
        raise ArgumentError("need at least one sample")
    seed = resolve_seed(seed)
    if not isinstance(f, TestFunction):
        f = TestFunction(fn=f, label=getattr(f, "__name__", "f"), binary=False)
    single = GraphBatch(G.n, G.packed[None, :])

    def shard(size, rng):
        if f.edge_count_fn is not None and f.batch_fn is None:
            values = f.on_edge_counts(step_edge_counts(G, params, size, rng), G.n)
        else:
            values = f.batch(step_batch(single[np.zeros(size, dtype=np.int64)], params, rng))
        return Moments().add(values)

    mom = merge_moments(map_shards(shard, m, seed, name, shard_size, workers))
    se = float(mom.stderr) if m > 1 else float("nan")
    return AdvantageEstimate(float(mom.mean), se, m, seed)
