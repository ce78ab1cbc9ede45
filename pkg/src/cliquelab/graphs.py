"""Graphs as sign vectors over edge slots, and the null / planted samplers.

An ``n``-vertex graph is a vector in {+1, -1}^C(n,2) indexed by unordered
pairs ``{i, j}`` (``i < j``) in lexicographic order; +1 means the edge is
present.  Signs are stored bit-packed (bit 1 <-> +1), little bit order within
each byte, so slot ``e`` lives in bit ``e & 7`` of byte ``e >> 3``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence, Tuple

import numpy as np

from .errors import ArgumentError

_POPCOUNT = np.array([bin(b).count("1") for b in range(256)], dtype=np.int64)


def num_slots(n: int) -> int:
    return n * (n - 1) // 2


def num_bytes(n: int) -> int:
    return (num_slots(n) + 7) // 8


def vertex_count(slots: int) -> int:
    """Invert ``num_slots``; raises if ``slots`` is not triangular."""
    n = (1 + math.isqrt(1 + 8 * slots)) // 2
    if num_slots(n) != slots:
        raise ArgumentError(f"{slots} is not of the form n(n-1)/2")
    return n


def edge_index(i: int, j: int, n: int) -> int:
    """Slot of the pair ``{i, j}``; requires ``0 <= i < j < n``."""
    if not (0 <= i < j < n):
        raise ArgumentError(f"need 0 <= i < j < n, got i={i}, j={j}, n={n}")
    return i * n - i * (i + 1) // 2 + (j - i - 1)


def edge_pair(slot: int, n: int) -> Tuple[int, int]:
    """Inverse of :func:`edge_index`."""
    if not (0 <= slot < num_slots(n)):
        raise ArgumentError(f"slot {slot} out of range for n={n}")
    I, J = edge_pairs(n)
    return int(I[slot]), int(J[slot])


def slot_of(i, j, n: int):
    """Vectorized :func:`edge_index` without validation; requires i < j."""
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    return i * n - i * (i + 1) // 2 + (j - i - 1)


@lru_cache(maxsize=64)
def edge_pairs(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Endpoint arrays ``(I, J)`` of every slot, in slot order."""
    I, J = np.triu_indices(n, 1)
    I = I.astype(np.int64)
    J = J.astype(np.int64)
    I.setflags(write=False)
    J.setflags(write=False)
    return I, J


def _pad_mask(n: int) -> int:
    rest = num_slots(n) % 8
    return (1 << rest) - 1 if rest else 0xFF


def _pack(bits: np.ndarray) -> np.ndarray:
    return np.packbits(np.asarray(bits, dtype=np.uint8), axis=-1, bitorder="little")


def _unpack(packed: np.ndarray, n: int) -> np.ndarray:
    return np.unpackbits(packed, axis=-1, count=num_slots(n), bitorder="little")


def _select_bits(packed: np.ndarray, slots: np.ndarray) -> np.ndarray:
    slots = np.asarray(slots, dtype=np.int64)
    return (packed[..., slots >> 3] >> (slots & 7).astype(np.uint8)) & np.uint8(1)


class Graph:
    """Immutable n-vertex graph in the sign-vector representation."""

    __slots__ = ("n", "packed")

    def __init__(self, n: int, packed):
        packed = np.array(packed, dtype=np.uint8, copy=True).reshape(-1)
        if n < 0:
            raise ArgumentError("n must be nonnegative")
        if packed.shape[0] != num_bytes(n):
            raise ArgumentError(f"expected {num_bytes(n)} packed bytes for n={n}, got {packed.shape[0]}")
        if packed.size and int(packed[-1]) & ~_pad_mask(n) & 0xFF:
            raise ArgumentError("nonzero padding bits")
        packed.setflags(write=False)
        self.n = int(n)
        self.packed = packed

    @classmethod
    def from_bits(cls, bits, n: int | None = None) -> "Graph":
        bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
        if n is None:
            n = vertex_count(bits.shape[0])
        if bits.shape[0] != num_slots(n):
            raise ArgumentError(f"expected {num_slots(n)} signs for n={n}, got {bits.shape[0]}")
        if np.any(bits > 1):
            raise ArgumentError("bits must be 0 or 1")
        return cls(n, _pack(bits))

    @classmethod
    def from_signs(cls, signs, n: int | None = None) -> "Graph":
        signs = np.asarray(signs).reshape(-1)
        if not np.all((signs == 1) | (signs == -1)):
            raise ArgumentError("signs must be +1 or -1")
        return cls.from_bits((signs > 0).astype(np.uint8), n)

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls(n, np.zeros(num_bytes(n), dtype=np.uint8))

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls.from_bits(np.ones(num_slots(n), dtype=np.uint8), n)

    @property
    def num_slots(self) -> int:
        return num_slots(self.n)

    @property
    def bits(self) -> np.ndarray:
        return _unpack(self.packed, self.n)

    @property
    def signs(self) -> np.ndarray:
        return self.bits.astype(np.int8) * 2 - 1

    def sign(self, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        e = edge_index(i, j, self.n)
        return 1 if (self.packed[e >> 3] >> (e & 7)) & 1 else -1

    @property
    def edge_count(self) -> int:
        return int(_POPCOUNT[self.packed].sum())

    def adjacency(self, dtype=np.float32) -> np.ndarray:
        """Symmetric ±1 adjacency matrix with zero diagonal."""
        A = np.zeros((self.n, self.n), dtype=dtype)
        I, J = edge_pairs(self.n)
        s = self.signs.astype(dtype)
        A[I, J] = s
        A[J, I] = s
        return A

    def __eq__(self, other):
        return isinstance(other, Graph) and self.n == other.n and np.array_equal(self.packed, other.packed)

    def __hash__(self):
        return hash((self.n, self.packed.tobytes()))

    def __repr__(self):
        return f"Graph(n={self.n}, edges={self.edge_count}/{self.num_slots})"

    def to_text(self) -> str:
        return f"{self.n}\n{''.join('1' if b else '0' for b in self.bits)}\n"

    @classmethod
    def from_text(cls, text: str) -> "Graph":
        lines = text.split()
        if not lines:
            raise ArgumentError("empty graph text")
        n = int(lines[0])
        body = lines[1] if len(lines) > 1 else ""
        if set(body) - {"0", "1"}:
            raise ArgumentError("graph body must be a string of 0/1 characters")
        bits = np.frombuffer(body.encode("ascii"), dtype=np.uint8) - ord("0")
        return cls.from_bits(bits, n)

    def to_bytes(self) -> bytes:
        return struct.pack("<Q", self.n) + self.packed.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Graph":
        if len(data) < 8:
            raise ArgumentError("truncated graph header")
        (n,) = struct.unpack("<Q", data[:8])
        return cls(n, np.frombuffer(data[8:], dtype=np.uint8))


def write_graph(path, graph: Graph, binary: bool = False) -> None:
    path = Path(path)
    if binary:
        path.write_bytes(graph.to_bytes())
    else:
        path.write_text(graph.to_text())


def read_graph(path, binary: bool | None = None) -> Graph:
    path = Path(path)
    if binary is None:
        binary = path.suffix == ".bin"
    return Graph.from_bytes(path.read_bytes()) if binary else Graph.from_text(path.read_text())


class GraphBatch:
    """``m`` graphs on the same vertex count, stored as an ``(m, bytes)`` array."""

    __slots__ = ("n", "packed")

    def __init__(self, n: int, packed: np.ndarray):
        packed = np.asarray(packed, dtype=np.uint8)
        if packed.ndim != 2 or packed.shape[1] != num_bytes(n):
            raise ArgumentError(f"packed batch must have shape (m, {num_bytes(n)})")
        self.n = int(n)
        self.packed = packed

    @classmethod
    def from_graphs(cls, graphs: Sequence[Graph]) -> "GraphBatch":
        graphs = list(graphs)
        if not graphs:
            raise ArgumentError("empty graph list")
        n = graphs[0].n
        if any(g.n != n for g in graphs):
            raise ArgumentError("graphs differ in vertex count")
        return cls(n, np.stack([g.packed for g in graphs]))

    @classmethod
    def from_bits(cls, bits: np.ndarray, n: int) -> "GraphBatch":
        return cls(n, _pack(bits))

    @staticmethod
    def concat(batches: Iterable["GraphBatch"]) -> "GraphBatch":
        batches = list(batches)
        return GraphBatch(batches[0].n, np.concatenate([b.packed for b in batches]))

    def __len__(self):
        return self.packed.shape[0]

    def __getitem__(self, item):
        if isinstance(item, (int, np.integer)):
            return Graph(self.n, self.packed[item])
        return GraphBatch(self.n, self.packed[item])

    def __iter__(self):
        for row in self.packed:
            yield Graph(self.n, row)

    def bits(self, slots=None) -> np.ndarray:
        if slots is None:
            return _unpack(self.packed, self.n)
        return _select_bits(self.packed, slots)

    def signs(self, slots=None) -> np.ndarray:
        return self.bits(slots).astype(np.int8) * 2 - 1

    def edge_counts(self) -> np.ndarray:
        return _POPCOUNT[self.packed].sum(axis=1)


@dataclass(frozen=True)
class ModelParams:
    """Vertex count ``n`` and real clique parameter ``k`` (bias ``q = k/n``)."""

    n: int
    k: float

    def __post_init__(self):
        if self.n < 0:
            raise ArgumentError("n must be nonnegative")
        if not (0 <= self.k <= self.n):
            raise ArgumentError(f"k must lie in [0, n], got k={self.k}, n={self.n}")

    @property
    def q(self) -> float:
        return self.k / self.n if self.n else 0.0


def as_indicator(x, n: int) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (n,):
        raise ArgumentError(f"clique indicator must have length {n}")
    if not np.all((x == 0) | (x == 1)):
        raise ArgumentError("clique indicator entries must be 0 or 1")
    return x.astype(np.uint8)


def _random_packed(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    packed = rng.integers(0, 256, size=(m, num_bytes(n)), dtype=np.uint8)
    if packed.shape[1]:
        packed[:, -1] &= np.uint8(_pad_mask(n))
    return packed


def _plant_packed(packed: np.ndarray, X: np.ndarray, n: int) -> None:
    """Set every slot inside each row's clique to +1, in place."""
    rows, verts = np.nonzero(X)
    total = rows.shape[0]
    offset = 1
    while offset < total:
        a = np.arange(total - offset)
        b = a + offset
        same = rows[a] == rows[b]
        if not same.any():
            break
        a, b = a[same], b[same]
        slots = slot_of(verts[a], verts[b], n)
        np.bitwise_or.at(packed, (rows[a], slots >> 3), (1 << (slots & 7)).astype(np.uint8))
        offset += 1


def sample_null(n: int, rng: np.random.Generator) -> Graph:
    """Draw from G(n, 1/2)."""
    if n < 0:
        raise ArgumentError("n must be nonnegative")
    return Graph(n, _random_packed(n, 1, rng)[0])


def sample_null_batch(n: int, m: int, rng: np.random.Generator) -> GraphBatch:
    return GraphBatch(n, _random_packed(n, m, rng))


def sample_clique_indicators(params: ModelParams, m: int, rng: np.random.Generator) -> np.ndarray:
    return (rng.random((m, params.n)) < params.q).astype(np.uint8)


def sample_planted(params: ModelParams, rng: np.random.Generator) -> Tuple[Graph, np.ndarray]:
    """Draw ``(G, x)`` from the binomial-k planted clique model."""
    batch, X = sample_planted_batch(params, 1, rng)
    return batch[0], X[0]


def sample_planted_batch(params: ModelParams, m: int, rng: np.random.Generator) -> Tuple[GraphBatch, np.ndarray]:
    packed = _random_packed(params.n, m, rng)
    X = sample_clique_indicators(params, m, rng)
    _plant_packed(packed, X, params.n)
    return GraphBatch(params.n, packed), X


def plant_clique(G: Graph, x) -> Graph:
    """Copy of ``G`` with every pair inside ``x`` forced to +1."""
    x = as_indicator(x, G.n)
    packed = G.packed.copy()[None, :]
    _plant_packed(packed, x[None, :], G.n)
    return Graph(G.n, packed[0])


def plant_clique_batch(batch: GraphBatch, X) -> GraphBatch:
    X = np.asarray(X, dtype=np.uint8)
    if X.shape != (len(batch), batch.n):
        raise ArgumentError("indicator array does not match the batch")
    packed = batch.packed.copy()
    _plant_packed(packed, X, batch.n)
    return GraphBatch(batch.n, packed)


def _check_permutation(pi, n: int) -> np.ndarray:
    pi = np.asarray(pi, dtype=np.int64)
    if pi.shape[-1] != n or not np.all(np.sort(pi, axis=-1) == np.arange(n)):
        raise ArgumentError("pi must be a permutation of range(n)")
    return pi


def _permuted_slots(pi: np.ndarray, n: int) -> np.ndarray:
    I, J = edge_pairs(n)
    a, b = pi[..., I], pi[..., J]
    return slot_of(np.minimum(a, b), np.maximum(a, b), n)


def permute_graph(G: Graph, pi) -> Graph:
    """Relabel vertices: the output sign at ``{pi[i], pi[j]}`` is G's sign at ``{i, j}``."""
    pi = _check_permutation(pi, G.n)
    bits = G.bits
    out = np.empty_like(bits)
    out[_permuted_slots(pi, G.n)] = bits
    return Graph.from_bits(out, G.n)


def permute_batch(batch: GraphBatch, pis: np.ndarray, check: bool = True) -> GraphBatch:
    """Apply row ``r`` of ``pis`` to graph ``r``."""
    pis = _check_permutation(pis, batch.n) if check else np.asarray(pis, dtype=np.int64)
    bits = batch.bits()
    out = np.empty_like(bits)
    np.put_along_axis(out, _permuted_slots(pis, batch.n), bits, axis=1)
    return GraphBatch.from_bits(out, batch.n)


def random_permutations(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` independent uniform permutations (one per row)."""
    return rng.permuted(np.broadcast_to(np.arange(n), (m, n)), axis=1)


class NullModel:
    """G(n, 1/2) as a batch sampler."""

    def __init__(self, n: int):
        self.n = int(n)

    def sample(self, rng):
        return sample_null(self.n, rng)

    def sample_batch(self, m, rng):
        return sample_null_batch(self.n, m, rng)

    def sample_edge_counts(self, m, rng):
        return rng.binomial(num_slots(self.n), 0.5, size=m)

    def __repr__(self):
        return f"NullModel(n={self.n})"


class PlantedModel:
    """Binomial-k planted clique model G(n, 1/2, k) as a batch sampler."""

    def __init__(self, n: int, k: float):
        self.params = ModelParams(n, k)
        self.n = int(n)
        self.k = k

    @property
    def q(self):
        return self.params.q

    def sample(self, rng):
        return sample_planted(self.params, rng)[0]

    def sample_with_clique(self, rng):
        return sample_planted(self.params, rng)

    def sample_batch(self, m, rng):
        return sample_planted_batch(self.params, m, rng)[0]

    def sample_batch_with_cliques(self, m, rng):
        return sample_planted_batch(self.params, m, rng)

    def sample_edge_counts(self, m, rng):
        """Exact edge-count law: C(w,2) forced edges plus a fair binomial on the rest."""
        N = num_slots(self.n)
        w = rng.binomial(self.n, self.q, size=m)
        forced = w * (w - 1) // 2
        return forced + rng.binomial(N - forced, 0.5)

    def __repr__(self):
        return f"PlantedModel(n={self.n}, k={self.k})"
