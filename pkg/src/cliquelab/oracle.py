"""Exact brute-force ground truth for tiny vertex counts.

Graphs on ``n`` vertices are indexed by integers ``g`` in ``[0, 2^N)``; bit
``e`` of ``g`` set means slot ``e`` has sign -1.  With that indexing the
character of an edge mask ``S`` at ``g`` is the Sylvester Hadamard entry
``H[S, g] = (-1)^{popcount(S & g)}``, so Fourier transforms are matrix products.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Union

import numpy as np
from scipy.linalg import hadamard

from .errors import ArgumentError, ResourceError
from .fourier import BasisIndex, Monomial, Polynomial, enumerate_monomials
from .graphs import GraphBatch, ModelParams, edge_pairs, num_slots, slot_of
from .noise import ChainParams

DEFAULT_ORACLE_CAP = 5


def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise ResourceError(f"exact enumeration at n={n} exceeds the oracle cap n <= {cap}", cap=cap)


@lru_cache(maxsize=8)
def _hadamard(N: int) -> np.ndarray:
    H = hadamard(1 << N).astype(np.float64)
    H.setflags(write=False)
    return H


@lru_cache(maxsize=8)
def all_graphs(n: int) -> GraphBatch:
    """Every graph on ``n`` vertices, row ``g`` being graph index ``g``."""
    N = num_slots(n)
    g = np.arange(1 << N, dtype=np.int64)
    minus = (g[:, None] >> np.arange(N)) & 1
    return GraphBatch.from_bits((1 - minus).astype(np.uint8), n)


def mask_of(S: Monomial) -> int:
    return sum(1 << e for e in S.edges)


@lru_cache(maxsize=8)
def _mask_vertex_counts(n: int) -> np.ndarray:
    N = num_slots(n)
    I, J = edge_pairs(n)
    masks = np.arange(1 << N, dtype=np.int64)
    touched = np.zeros((1 << N, n), dtype=bool)
    for e in range(N):
        on = ((masks >> e) & 1).astype(bool)
        touched[on, I[e]] = True
        touched[on, J[e]] = True
    return touched.sum(axis=1)


@dataclass
class ExactDistribution:
    """Probability of each graph index on ``n`` vertices."""

    n: int
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (1 << num_slots(self.n),):
            raise ArgumentError("weight vector has the wrong length")
        if np.any(self.weights < 0):
            raise ArgumentError("negative weight")


def exact_null_distribution(n: int, cap: int = DEFAULT_ORACLE_CAP) -> ExactDistribution:
    _check_cap(n, cap)
    size = 1 << num_slots(n)
    return ExactDistribution(n, np.full(size, 1.0 / size))


def clique_mask(x, n: int) -> int:
    verts = [i for i in range(n) if x[i]]
    return sum(1 << int(slot_of(a, b, n)) for a, b in itertools.combinations(verts, 2))


def exact_planted_distribution(params: ModelParams, cap: int = DEFAULT_ORACLE_CAP) -> ExactDistribution:
    """Exact law of the binomial-k planted model, by marginalizing the clique indicator."""
    n = params.n
    _check_cap(n, cap)
    N = num_slots(n)
    q = params.q
    g = np.arange(1 << N, dtype=np.int64)
    columns = []
    for x in itertools.product((0, 1), repeat=n):
        w = sum(x)
        px = q**w * (1.0 - q) ** (n - w)
        C = clique_mask(x, n)
        free = N - bin(C).count("1")
        columns.append(np.where((g & C) == 0, px * 2.0**-free, 0.0))
    stacked = np.stack(columns, axis=1)
    weights = np.array([math.fsum(row) for row in stacked])
    return ExactDistribution(n, weights)


def function_table(f, n: int, cap: int = DEFAULT_ORACLE_CAP) -> np.ndarray:
    """Values of ``f`` at every graph index; accepts a table, a Polynomial, or a callable."""
    _check_cap(n, cap)
    size = 1 << num_slots(n)
    if isinstance(f, np.ndarray):
        if f.shape != (size,):
            raise ArgumentError(f"table must have length {size}")
        return f.astype(np.float64)
    graphs = all_graphs(n)
    if isinstance(f, Polynomial):
        return f.eval_batch(graphs)
    if hasattr(f, "batch"):
        return np.asarray(f.batch(graphs), dtype=np.float64)
    return np.array([float(f(G)) for G in graphs])


def exact_expectation(f, dist: ExactDistribution, cap: int = DEFAULT_ORACLE_CAP) -> float:
    """``sum_G weight(G) f(G)`` over all graphs."""
    _check_cap(dist.n, cap)
    return math.fsum(dist.weights * function_table(f, dist.n, cap))


def fourier_coefficients(table: np.ndarray, n: int) -> np.ndarray:
    """Coefficient of every edge mask ``S`` (indexed by the mask integer)."""
    N = num_slots(n)
    return _hadamard(N) @ table / (1 << N)


def from_fourier(coeffs: np.ndarray, n: int) -> np.ndarray:
    return _hadamard(num_slots(n)) @ coeffs


def exact_moments(dist: ExactDistribution) -> np.ndarray:
    """``E[chi_S]`` for every mask ``S``."""
    return _hadamard(num_slots(dist.n)) @ dist.weights


def exact_low_degree_optimum(params: ModelParams, d: int, mode: str = "edges",
                             cap: int = DEFAULT_ORACLE_CAP) -> float:
    """``sqrt(sum_{0<|S|<=d} E_P[chi_S]^2)`` from the exact planted law."""
    dist = exact_planted_distribution(params, cap)
    moments = exact_moments(dist)
    basis = enumerate_monomials(params.n, d, mode)
    return math.sqrt(math.fsum(moments[mask_of(S)] ** 2 for S in basis.monomials[1:]))


@lru_cache(maxsize=8)
def _permutation_actions(n: int) -> np.ndarray:
    """Row ``r``: graph index of ``pi_r(g)`` for every ``g``."""
    N = num_slots(n)
    I, J = edge_pairs(n)
    g = np.arange(1 << N, dtype=np.int64)
    rows = []
    for pi in itertools.permutations(range(n)):
        pi = np.array(pi)
        a, b = pi[I], pi[J]
        target = slot_of(np.minimum(a, b), np.maximum(a, b), n)
        out = np.zeros_like(g)
        for e in range(N):
            out |= ((g >> e) & 1) << target[e]
        rows.append(out)
    return np.stack(rows)


def symmetrize_table(table: np.ndarray, n: int) -> np.ndarray:
    """Average of ``f(pi(G))`` over all vertex permutations."""
    actions = _permutation_actions(n)
    return table[actions].mean(axis=0)


def exact_apply_T(f, n: int, p: float, symmetrize: bool = False, cap: int = DEFAULT_ORACLE_CAP) -> np.ndarray:
    """Table of ``Tf`` via the spectral form: scale each coefficient by ``p ** |V(S)|``."""
    if not (0.0 <= p <= 1.0):
        raise ArgumentError("p must lie in [0, 1]")
    table = function_table(f, n, cap)
    if symmetrize:
        table = symmetrize_table(table, n)
    coeffs = fourier_coefficients(table, n)
    return from_fourier(coeffs * p ** _mask_vertex_counts(n), n)


def exact_apply_T_direct(f, n: int, params: ChainParams, cap: int = DEFAULT_ORACLE_CAP) -> np.ndarray:
    """Table of ``Tf`` by summing over survival patterns and averaging over resampled slots."""
    table = function_table(f, n, cap)
    N = num_slots(n)
    g = np.arange(1 << N, dtype=np.int64)
    s = params.survival
    terms = []
    for z in itertools.product((0, 1), repeat=n):
        alive = sum(z)
        pz = s**alive * (1.0 - s) ** (n - alive)
        if pz == 0.0:
            continue
        K = clique_mask(z, n)
        key = g & K
        sums = np.bincount(key, weights=table, minlength=1 << N)
        counts = np.bincount(key, minlength=1 << N)
        terms.append(pz * sums[key] / counts[key])
    out = np.array([math.fsum(col) for col in np.stack(terms, axis=1)])
    if params.permute:
        # relabeling first means Tf(g) averages the plain result over pi(g)
        out = out[_permutation_actions(n)].mean(axis=0)
    return out


def exact_projection(table: np.ndarray, n: int, basis: BasisIndex) -> np.ndarray:
    """Table of the orthogonal projection of ``table`` onto the span of ``basis``."""
    coeffs = fourier_coefficients(table, n)
    keep = np.zeros_like(coeffs)
    for S in basis.monomials:
        keep[mask_of(S)] = coeffs[mask_of(S)]
    return from_fourier(keep, n)
