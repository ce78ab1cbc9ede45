"""Fourier characters on graphs, monomial bases, and polynomials over them.

A monomial is a set ``S`` of edge slots; its character is the product of the
graph's signs over ``S``.  Bases are ordered by (degree, lexicographic slots)
with the constant monomial at index 0.  By default the degree of ``S`` is the
number of edges; ``mode="vertices"`` bounds the vertex support instead.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .errors import ArgumentError, ResourceError
from .graphs import Graph, GraphBatch, edge_pairs, num_slots, slot_of

DEFAULT_BASIS_CAP = 2_000_000
_CHUNK_BYTES = 64 << 20


@dataclass(frozen=True)
class Monomial:
    """Edge set ``S`` (sorted slots) on ``n`` vertices with its vertex support."""

    edges: Tuple[int, ...]
    n: int
    vertices: Tuple[int, ...] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        edges = tuple(sorted(int(e) for e in self.edges))
        N = num_slots(self.n)
        if len(set(edges)) != len(edges):
            raise ArgumentError("repeated edge slot in monomial")
        if edges and (edges[0] < 0 or edges[-1] >= N):
            raise ArgumentError(f"edge slot out of range for n={self.n}")
        I, J = edge_pairs(self.n)
        support = sorted({int(I[e]) for e in edges} | {int(J[e]) for e in edges})
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "vertices", tuple(support))

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[int, int]], n: int) -> "Monomial":
        slots = []
        for i, j in pairs:
            i, j = min(i, j), max(i, j)
            if not (0 <= i < j < n):
                raise ArgumentError(f"bad pair ({i}, {j}) for n={n}")
            slots.append(int(slot_of(i, j, n)))
        return cls(tuple(slots), n)

    @property
    def degree(self) -> int:
        return len(self.edges)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    def pairs(self) -> List[Tuple[int, int]]:
        I, J = edge_pairs(self.n)
        return [(int(I[e]), int(J[e])) for e in self.edges]


def covering_graph_count(s: int, v: int) -> int:
    """Number of ``s``-edge graphs on ``v`` labeled vertices with no isolated vertex."""
    return _covering_count(int(s), int(v))


@lru_cache(maxsize=None)
def _covering_count(s: int, v: int) -> int:
    if s == 0:
        return 1 if v == 0 else 0
    total = 0
    for t in range(v + 1):
        total += (-1) ** t * math.comb(v, t) * math.comb(math.comb(v - t, 2), s)
    return total


def basis_size(n: int, d: int, mode: str = "edges") -> int:
    """Number of monomials (constant included) without enumerating them."""
    if mode == "edges":
        N = num_slots(n)
        return sum(math.comb(N, s) for s in range(d + 1))
    if mode == "vertices":
        total = 1
        for v in range(2, min(d, n) + 1):
            total += math.comb(n, v) * sum(covering_graph_count(s, v) for s in range(1, math.comb(v, 2) + 1))
        return total
    raise ArgumentError(f"unknown degree mode {mode!r}")


def _vertex_mode_edge_sets(n: int, d: int) -> List[Tuple[int, ...]]:
    out = []
    for v in range(2, min(d, n) + 1):
        for U in itertools.combinations(range(n), v):
            inside = [(a, b) for a, b in itertools.combinations(U, 2)]
            for s in range(1, len(inside) + 1):
                for pairs in itertools.combinations(inside, s):
                    if len({u for p in pairs for u in p}) == v:
                        out.append(tuple(sorted(int(slot_of(a, b, n)) for a, b in pairs)))
    out.sort(key=lambda S: (len(S), S))
    return out


class BasisIndex:
    """An ordered, duplicate-free list of monomials with the constant at index 0."""

    def __init__(self, n: int, d: int, monomials: Sequence[Monomial], mode: str = "edges"):
        monomials = list(monomials)
        if not monomials or monomials[0].edges != ():
            raise ArgumentError("the constant monomial must come first")
        if any(m.n != n for m in monomials):
            raise ArgumentError("monomials on a different vertex count")
        self.n = int(n)
        self.d = int(d)
        self.mode = mode
        self.monomials = tuple(monomials)
        self._lookup: Dict[Tuple[int, ...], int] = {m.edges: i for i, m in enumerate(monomials)}
        if len(self._lookup) != len(monomials):
            raise ArgumentError("duplicate monomials in basis")
        width = max(1, max(m.degree for m in monomials))
        pad = num_slots(n)
        idx = np.full((len(monomials), width), pad, dtype=np.int64)
        for row, m in enumerate(monomials):
            idx[row, : m.degree] = m.edges
        idx.setflags(write=False)
        self._idx = idx
        self.degrees = np.array([m.degree for m in monomials], dtype=np.int64)
        self.vertex_counts = np.array([m.num_vertices for m in monomials], dtype=np.int64)

    def __len__(self):
        return len(self.monomials)

    def __getitem__(self, i) -> Monomial:
        return self.monomials[i]

    def __iter__(self):
        return iter(self.monomials)

    def __repr__(self):
        return f"BasisIndex(n={self.n}, d={self.d}, mode={self.mode!r}, size={len(self)})"

    def index_of(self, S) -> int:
        key = S.edges if isinstance(S, Monomial) else tuple(sorted(S))
        try:
            return self._lookup[key]
        except KeyError:
            raise ArgumentError(f"monomial {key} not in basis") from None

    def features(self, batch: GraphBatch, include_constant: bool = True) -> np.ndarray:
        """Character values, shape ``(len(batch), len(basis))`` (float64)."""
        if batch.n != self.n:
            raise ArgumentError(f"batch has n={batch.n}, basis has n={self.n}")
        idx = self._idx if include_constant else self._idx[1:]
        m = len(batch)
        out = np.empty((m, idx.shape[0]), dtype=np.float64)
        step = max(1, _CHUNK_BYTES // max(1, idx.size))
        for lo in range(0, m, step):
            signs = batch[lo : lo + step].signs()
            ext = np.concatenate([signs, np.ones((signs.shape[0], 1), dtype=np.int8)], axis=1)
            if idx.shape[1] == 1:
                out[lo : lo + step] = ext[:, idx[:, 0]]
            else:
                out[lo : lo + step] = ext[:, idx].prod(axis=2, dtype=np.int8)
        return out


def enumerate_monomials(n: int, d: int, mode: str = "edges", cap: int = DEFAULT_BASIS_CAP) -> BasisIndex:
    """All monomials of degree at most ``d``, constant first."""
    if d < 0:
        raise ArgumentError("d must be nonnegative")
    size = basis_size(n, d, mode)
    if size > cap:
        raise ResourceError(f"basis of size {size} exceeds the enumeration cap {cap}", cap=cap)
    if mode == "edges":
        N = num_slots(n)
        sets = [S for s in range(d + 1) for S in itertools.combinations(range(N), s)]
    else:
        sets = [()] + _vertex_mode_edge_sets(n, d)
    return BasisIndex(n, d, [Monomial(S, n) for S in sets], mode=mode)


def chi(S: Monomial, G: Graph) -> int:
    """Character of ``S`` at ``G``; the empty product is 1."""
    if S.n != G.n:
        raise ArgumentError("monomial and graph disagree on n")
    if not S.edges:
        return 1
    slots = np.asarray(S.edges, dtype=np.int64)
    zeros = int(np.count_nonzero(((G.packed[slots >> 3] >> (slots & 7).astype(np.uint8)) & 1) == 0))
    return -1 if zeros & 1 else 1


def chi_batch(S: Monomial, batch: GraphBatch) -> np.ndarray:
    """Character of ``S`` on every graph of a batch, as int8."""
    if not S.edges:
        return np.ones(len(batch), dtype=np.int8)
    zeros = (batch.bits(np.asarray(S.edges)) == 0).sum(axis=1)
    return (1 - 2 * (zeros & 1)).astype(np.int8)


def chi_biased(B: Iterable[int], x, bias: float) -> float:
    """``prod_{i in B} (x_i - bias) / sqrt(bias (1 - bias))``."""
    if not (0.0 < bias < 1.0):
        raise ArgumentError(f"bias must lie in (0, 1), got {bias}")
    x = np.asarray(x, dtype=np.float64)
    B = np.asarray(list(B), dtype=np.int64)
    if B.size == 0:
        return 1.0
    return float(np.prod((x[..., B] - bias) / math.sqrt(bias * (1.0 - bias)), axis=-1))


def chi_biased_batch(B: Iterable[int], X: np.ndarray, bias: float) -> np.ndarray:
    if not (0.0 < bias < 1.0):
        raise ArgumentError(f"bias must lie in (0, 1), got {bias}")
    X = np.asarray(X, dtype=np.float64)
    B = np.asarray(list(B), dtype=np.int64)
    if B.size == 0:
        return np.ones(X.shape[0])
    return np.prod((X[:, B] - bias) / math.sqrt(bias * (1.0 - bias)), axis=1)


class Polynomial:
    """Real coefficients over a :class:`BasisIndex`."""

    def __init__(self, basis: BasisIndex, coeffs):
        coeffs = np.asarray(coeffs, dtype=np.float64).reshape(-1)
        if coeffs.shape[0] != len(basis):
            raise ArgumentError(f"expected {len(basis)} coefficients, got {coeffs.shape[0]}")
        self.basis = basis
        self.coeffs = coeffs

    @property
    def n(self):
        return self.basis.n

    def __call__(self, G: Graph) -> float:
        return eval_polynomial(self, G)

    def eval_batch(self, batch: GraphBatch) -> np.ndarray:
        if batch.n != self.basis.n:
            raise ArgumentError("batch and polynomial disagree on n")
        out = np.empty(len(batch))
        step = max(1, _CHUNK_BYTES // (8 * len(self.basis)))
        for lo in range(0, len(batch), step):
            out[lo : lo + step] = self.basis.features(batch[lo : lo + step]) @ self.coeffs
        return out

    def to_text(self) -> str:
        lines = [f"{self.basis.n} {self.basis.d}"]
        for m, c in zip(self.basis.monomials, self.coeffs):
            if m.degree == 0:
                lines.append(f"const {float(c)!r}")
            elif c != 0.0:
                lines.append(" ".join([str(m.degree), *map(str, m.edges), repr(float(c))]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Polynomial":
        rows = [line.split() for line in text.strip().splitlines() if line.strip()]
        if not rows or len(rows[0]) != 2:
            raise ArgumentError("polynomial header must be 'n d'")
        n, d = int(rows[0][0]), int(rows[0][1])
        const = 0.0
        sets, values = [], []
        for row in rows[1:]:
            if row[0] == "const":
                const = float(row[1])
                continue
            s = int(row[0])
            if len(row) != s + 2:
                raise ArgumentError(f"malformed polynomial line: {' '.join(row)}")
            sets.append(tuple(int(e) for e in row[1 : s + 1]))
            values.append(float(row[-1]))
        monomials = [Monomial((), n)] + [Monomial(S, n) for S in sets]
        return cls(BasisIndex(n, d, monomials), [const] + values)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "Polynomial":
        return cls.from_text(Path(path).read_text())

    def on_basis(self, basis: BasisIndex) -> "Polynomial":
        """Re-express over a larger basis containing every monomial of this one."""
        coeffs = np.zeros(len(basis))
        for m, c in zip(self.basis.monomials, self.coeffs):
            coeffs[basis.index_of(m)] += c
        return Polynomial(basis, coeffs)


def eval_polynomial(f: Polynomial, G: Graph) -> float:
    """``sum_i c_i chi_{S_i}(G)``."""
    if G.n != f.basis.n:
        raise ArgumentError(f"graph has n={G.n}, polynomial has n={f.basis.n}")
    signs = np.concatenate([G.signs, np.ones(1, dtype=np.int8)])
    values = signs[f.basis._idx].prod(axis=1, dtype=np.int8)
    return float(values @ f.coeffs)


def canonical_form(pairs: Sequence[Tuple[int, int]]) -> Tuple[Tuple[int, int], ...]:
    """Isomorphism-invariant label of an edge set (brute force over its support)."""
    support = sorted({u for p in pairs for u in p})
    best = None
    for perm in itertools.permutations(range(len(support))):
        relabel = dict(zip(support, perm))
        key = tuple(sorted(tuple(sorted((relabel[a], relabel[b]))) for a, b in pairs))
        if best is None or key < best:
            best = key
    return best if best is not None else ()


class OrbitBasis:
    """Symmetrized basis: one normalized orbit sum per isomorphism class.

    Feature ``O`` is ``sum_{S in O} chi_S / sqrt(|O|)``; for distinct classes
    these are orthonormal under the null and span the permutation-invariant
    part of the underlying basis.
    """

    def __init__(self, basis: BasisIndex):
        self.basis = basis
        groups: Dict[tuple, List[int]] = {}
        for i, m in enumerate(basis.monomials[1:], start=1):
            groups.setdefault(canonical_form(m.pairs()), []).append(i)
        self.classes = list(groups)
        self.members = [np.array(groups[c], dtype=np.int64) for c in self.classes]
        self.sizes = np.array([len(g) for g in self.members], dtype=np.int64)
        self.vertex_counts = np.array([basis.vertex_counts[g[0]] for g in self.members], dtype=np.int64)
        self._edge_only = basis.mode == "edges" and basis.d == 1

    @property
    def n(self):
        return self.basis.n

    def __len__(self):
        return len(self.classes)

    def features(self, batch: GraphBatch) -> np.ndarray:
        """Orbit features, shape ``(len(batch), len(self))``."""
        if self._edge_only:
            return edge_orbit_feature(batch.edge_counts(), self.n)[:, None]
        full = self.basis.features(batch)
        return np.stack([full[:, g].sum(axis=1) for g in self.members], axis=1) / np.sqrt(self.sizes)

    def expand(self, h) -> np.ndarray:
        """Per-monomial coefficients (constant slot zero) of ``sum_O h_O feature_O``."""
        coeffs = np.zeros(len(self.basis))
        for value, group, size in zip(np.asarray(h, dtype=np.float64), self.members, self.sizes):
            coeffs[group] = value / math.sqrt(size)
        return coeffs


def edge_orbit_feature(edge_counts, n: int) -> np.ndarray:
    """Normalized sum of all single-edge characters, from edge counts."""
    N = num_slots(n)
    return (2.0 * np.asarray(edge_counts, dtype=np.float64) - N) / math.sqrt(N)
