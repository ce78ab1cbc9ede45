"""Advantage and R-ratio estimation, the edge-count test, and the closed-form low-degree advantage."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Callable, Optional

import numpy as np
from scipy import stats

from .errors import ArgumentError
from .fourier import BasisIndex, covering_graph_count
from .graphs import Graph, GraphBatch, num_slots
from .streams import DEFAULT_SHARD_SIZE, Moments, map_shards, merge_moments, resolve_seed


class TestFunction:
    """A test on graphs with optional vectorized forms.

    ``fn`` maps a Graph to a real.  ``batch_fn`` maps a GraphBatch to an array.
    ``edge_count_fn(counts, n)`` declares that the test depends on the graph
    only through its edge count, which unlocks exact fast samplers.
    """

    __test__ = False

    def __init__(self, fn=None, batch_fn=None, edge_count_fn=None, label="test", binary=True):
        if fn is None and batch_fn is None and edge_count_fn is None:
            raise ArgumentError("a test needs at least one evaluation route")
        self.fn = fn
        self.batch_fn = batch_fn
        self.edge_count_fn = edge_count_fn
        self.label = label
        self.binary = binary

    def __call__(self, G: Graph) -> float:
        if self.fn is not None:
            value = self.fn(G)
        elif self.edge_count_fn is not None:
            value = self.edge_count_fn(np.array([G.edge_count]), G.n)[0]
        else:
            value = self.batch_fn(GraphBatch(G.n, G.packed[None, :]))[0]
        return self._check(np.asarray([value], dtype=np.float64))[0]

    def batch(self, batch: GraphBatch) -> np.ndarray:
        if self.batch_fn is not None:
            values = self.batch_fn(batch)
        elif self.edge_count_fn is not None:
            values = self.edge_count_fn(batch.edge_counts(), batch.n)
        else:
            values = [self.fn(G) for G in batch]
        return self._check(np.asarray(values, dtype=np.float64))

    def on_edge_counts(self, counts, n: int) -> np.ndarray:
        if self.edge_count_fn is None:
            raise ArgumentError(f"test {self.label!r} is not a function of the edge count")
        return self._check(np.asarray(self.edge_count_fn(np.asarray(counts), n), dtype=np.float64))

    def _check(self, values: np.ndarray) -> np.ndarray:
        if self.binary and not np.all(np.abs(values) == 1.0):
            raise ArgumentError(f"test {self.label!r} returned a value outside {{+1, -1}}")
        return values

    def __repr__(self):
        return f"TestFunction({self.label!r})"


def constant_test(value: float = 1.0) -> TestFunction:
    return TestFunction(
        fn=lambda G: value,
        edge_count_fn=lambda c, n: np.full(np.shape(c), value, dtype=np.float64),
        label=f"constant({value})",
        binary=abs(value) == 1,
    )


def _edge_majority(counts, n):
    # strict inequality, so an exact tie maps to -1
    return np.where(2 * np.asarray(counts) > num_slots(n), 1.0, -1.0)


def edge_count_test(G: Graph) -> int:
    """+1 iff the graph has more than half of all possible edges."""
    return 1 if 2 * G.edge_count > G.num_slots else -1


EDGE_COUNT_TEST = TestFunction(fn=edge_count_test, edge_count_fn=_edge_majority, label="edge-count")


@dataclass
class AdvantageEstimate:
    """Point estimate with its standard error, sample count and seed."""

    estimate: float
    stderr: float
    samples: int
    seed: Optional[int] = None
    signed: Optional[float] = None
    squared: Optional[float] = None
    squared_stderr: Optional[float] = None

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None}


def has_edge_count_law(sampler) -> bool:
    """Whether ``sampler`` can draw exact edge counts without building graphs."""
    return hasattr(sampler, "sample_edge_counts") and getattr(sampler, "supports_edge_counts", True)


def _planted_null_values(test, planted, null, size, rng):
    if test.edge_count_fn is not None and has_edge_count_law(planted) and has_edge_count_law(null):
        n = planted.n
        return (test.on_edge_counts(planted.sample_edge_counts(size, rng), n),
                test.on_edge_counts(null.sample_edge_counts(size, rng), n))
    return test.batch(planted.sample_batch(size, rng)), test.batch(null.sample_batch(size, rng))


def adv_montecarlo(test: TestFunction, planted, null, m: int, seed, shard_size: int = DEFAULT_SHARD_SIZE,
                   workers: int = 1, name: str = "adv") -> AdvantageEstimate:
    """Estimate ``|E_P[test] - E_N[test]|`` from ``m`` draws of each distribution.

    When the test is declared a function of the edge count and both samplers
    expose exact edge-count laws, graphs are never materialized.
    """
    if m < 2:
        raise ArgumentError("need at least 2 samples")
    seed = resolve_seed(seed)

    def shard(size, rng):
        vp, vn = _planted_null_values(test, planted, null, size, rng)
        return Moments().add(vp), Moments().add(vn)

    parts = map_shards(shard, m, seed, name, shard_size, workers)
    mp = merge_moments([p for p, _ in parts])
    mn = merge_moments([q for _, q in parts])
    diff = float(mp.mean - mn.mean)
    stderr = float(math.sqrt(mp.variance / m + mn.variance / m))
    return AdvantageEstimate(abs(diff), stderr, m, seed, signed=diff)


def r_ratio_montecarlo(f: TestFunction, planted, null, m: int, seed, shard_size: int = DEFAULT_SHARD_SIZE,
                       workers: int = 1, name: str = "r-ratio") -> AdvantageEstimate:
    """Estimate ``(E_P[f] - E_N[f]) / ||f||_{2,N}`` with a delta-method stderr."""
    if m < 2:
        raise ArgumentError("need at least 2 samples")
    seed = resolve_seed(seed)

    def shard(size, rng):
        vp, vn = _planted_null_values(f, planted, null, size, rng)
        return Moments().add(vp), Moments().add(np.stack([vn, vn * vn], axis=1))

    parts = map_shards(shard, m, seed, name, shard_size, workers)
    mp = merge_moments([p for p, _ in parts])
    mn = merge_moments([q for _, q in parts])
    num = float(mp.mean - mn.mean[0])
    second = float(mn.mean[1])
    if second <= 0:
        raise ArgumentError("f vanishes under the null")
    norm = math.sqrt(second)
    ratio = num / norm
    var_num = mp.variance / m + mn.variance[0] / m
    var_norm = mn.variance[1] / m / (4 * second)
    stderr = math.sqrt(var_num / second + ratio * ratio * var_norm / second)
    return AdvantageEstimate(abs(ratio), float(stderr), m, seed, signed=ratio)


def split_sample_square(values_a: np.ndarray, values_b: np.ndarray, blocks: int = 32):
    """Unbiased estimate of ``sum_i mu_i^2`` from two independent sample halves.

    Each argument has shape ``(h, l)``.  The stderr is a delete-one-block
    jackknife over ``blocks`` aligned blocks of both halves.
    """
    h = min(values_a.shape[0], values_b.shape[0])
    blocks = max(2, min(blocks, h))
    edges = np.linspace(0, h, blocks + 1).astype(np.int64)
    sa = np.add.reduceat(values_a[:h], edges[:-1], axis=0)
    sb = np.add.reduceat(values_b[:h], edges[:-1], axis=0)
    return split_sample_square_from_blocks(sa, sb, np.diff(edges))


def split_sample_square_from_blocks(sa: np.ndarray, sb: np.ndarray, counts: np.ndarray):
    """Same as :func:`split_sample_square` from per-block sums ``(blocks, l)`` and block sizes."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    ta, tb = sa.sum(axis=0), sb.sum(axis=0)
    U = float((ta / total) @ (tb / total))
    g = len(counts)
    loo = np.array([((ta - sa[j]) / (total - counts[j])) @ ((tb - sb[j]) / (total - counts[j])) for j in range(g)])
    var = (g - 1) / g * float(((loo - loo.mean()) ** 2).sum())
    return U, math.sqrt(var)


def _root_stderr(U: float, se: float) -> float:
    # delta method for sqrt, kept finite near zero
    return se / (2.0 * math.sqrt(max(U, se)))


def claim_2_5_estimate(basis, planted, m: int, seed, shard_size: int = DEFAULT_SHARD_SIZE, workers: int = 1,
                       name: str = "split-sample", features: Optional[Callable] = None) -> AdvantageEstimate:
    """Bias-corrected estimate of ``sqrt(sum_i E_P[f_i]^2)`` over a null-orthonormal family.

    ``basis`` is a BasisIndex (constant dropped) or any object with a
    ``features(batch)`` method; ``features`` overrides both and maps
    ``(size, rng)`` to a feature matrix, for samplers that skip graphs.
    """
    if m < 4 or m % 2:
        raise ArgumentError("m must be even and at least 4")
    seed = resolve_seed(seed)
    if features is None:
        dim = len(basis) - 1 if isinstance(basis, BasisIndex) else len(basis)
        shard_size = max(1, min(shard_size, (1 << 22) // max(1, dim)))
        if isinstance(basis, BasisIndex):
            features = lambda size, rng: basis.features(planted.sample_batch(size, rng), include_constant=False)
        else:
            features = lambda size, rng: basis.features(planted.sample_batch(size, rng))
    half = m // 2

    def shard(size, rng):
        return features(size, rng).sum(axis=0), size

    # at least 32 shards per half, so the shards double as jackknife blocks
    size = max(1, min(shard_size, -(-half // 32)))
    parts_a = map_shards(shard, half, seed, name + "/a", size, workers)
    parts_b = map_shards(shard, half, seed, name + "/b", size, workers)
    sa = np.stack([p[0] for p in parts_a])
    sb = np.stack([p[0] for p in parts_b])
    counts = np.array([p[1] for p in parts_a])
    U, se = split_sample_square_from_blocks(sa, sb, counts)
    return AdvantageEstimate(math.sqrt(max(U, 0.0)), _root_stderr(U, se), m, seed, squared=U, squared_stderr=se)


@dataclass
class ClosedForm:
    """Closed-form low-degree advantage with the quantities of its sandwich."""

    value: float
    r2: float
    leading: float
    lower: float
    remainder: float


def closed_form_terms(n: int, d: int, mode: str = "edges"):
    """``{(s, v): count}`` of monomials with ``s`` edges spanning ``v`` vertices."""
    terms = {}
    if mode == "vertices":
        for v in range(2, min(d, n) + 1):
            for s in range(1, math.comb(v, 2) + 1):
                terms[(s, v)] = math.comb(n, v) * covering_graph_count(s, v)
    else:
        for s in range(1, d + 1):
            for v in range(2, min(2 * s, n) + 1):
                c = covering_graph_count(s, v)
                if c:
                    terms[(s, v)] = math.comb(n, v) * c
    return terms


def low_degree_advantage_closed_form(n: int, k: float, d: int, mode: str = "edges") -> ClosedForm:
    """``sqrt(sum_{0<|S|<=d} (k/n)^{2|V(S)|})`` grouped by edge and vertex counts."""
    if d < 0:
        raise ArgumentError("d must be nonnegative")
    if not (0 <= k <= n):
        raise ArgumentError("k must lie in [0, n]")
    q = k / n if n else 0.0
    parts = [float(count) * q ** (2 * v) for (s, v), count in closed_form_terms(n, d, mode).items()]
    r2 = math.fsum(parts)
    if not math.isfinite(r2):
        raise OverflowError("closed-form advantage overflowed")
    leading = num_slots(n) * q**4 if d >= 1 else 0.0
    lower = k**4 / (2.0 * n * n) if n else 0.0
    return ClosedForm(math.sqrt(r2), r2, leading, lower, r2 - leading)


def edge_count_advantage_exact(n: int, k: float) -> float:
    """Exact advantage of the edge-count test from the binomial mixture law."""
    N = num_slots(n)
    half = N // 2  # +1 iff count > N/2, i.e. count >= half + 1
    p_null = stats.binom.sf(half, N, 0.5)
    w = np.arange(n + 1)
    pw = stats.binom.pmf(w, n, k / n)
    forced = w * (w - 1) // 2
    tail = stats.binom.sf(half - forced, N - forced, 0.5)
    p_planted = float(np.sum(pw * tail))
    return 2.0 * abs(p_planted - p_null)


def planted_edge_count_pmf(n: int, k: float) -> np.ndarray:
    """Exact law of the planted edge count on ``0..C(n,2)``."""
    N = num_slots(n)
    out = np.zeros(N + 1)
    pw = stats.binom.pmf(np.arange(n + 1), n, k / n)
    for w in np.flatnonzero(pw > 1e-300):
        forced = int(w) * (int(w) - 1) // 2
        out[forced:] += pw[w] * stats.binom.pmf(np.arange(N - forced + 1), N - forced, 0.5)
    return out


def edge_count_advantage_predicted(n: int, k: float) -> float:
    """Large-n prediction ``k^2 / (sqrt(pi) n)``."""
    return k * k / (math.sqrt(math.pi) * n)
