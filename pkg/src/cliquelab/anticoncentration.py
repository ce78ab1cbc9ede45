"""Lifted subspaces, the lifted-chain contraction, anticoncentration, and hypercontractivity checks.

On the lifted space ``(x, G)`` with ``x ~ Ber(q)^n`` and ``G ~ G(n, 1/2)``, an
element of ``W_{A,B}`` has the form ``G_A * chi^q_B(x) * r(x_{V(A)})`` with
``B`` disjoint from ``V(A)``.  One lifted step with keep probability ``p`` maps
the ``pq``-biased element with data ``(A, B, r)`` to the ``q``-biased element
with the same data, scaled by

    p^|V(A)| * (p (1 - q) / (1 - p q))^(|B| / 2).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, asdict, field
from typing import Callable, Optional, Sequence

import numpy as np

from .distinguish import TestFunction
from .errors import ArgumentError
from .fourier import Monomial, chi_batch, chi_biased_batch
from .graphs import GraphBatch, PlantedModel, sample_null_batch
from .noise import ChainParams, LiftedState, step_batch, step_edge_counts, step_lifted_batch
from .streams import Moments, map_shards, merge_moments, resolve_seed, stream


@dataclass
class SubspaceElement:
    """``G_A * chi^bias_B(x) * r(x_{V(A)})``; ``side`` is ``"W"`` (bias q) or ``"W'"`` (bias p q)."""

    A: Monomial
    B: tuple
    r: np.ndarray
    side: str
    q: float
    p: float = 1.0

    def __post_init__(self):
        self.B = tuple(sorted(int(b) for b in self.B))
        self.r = np.asarray(self.r, dtype=np.float64).reshape(-1)
        if self.side not in ("W", "W'"):
            raise ArgumentError("side must be 'W' or \"W'\"")
        if set(self.B) & set(self.A.vertices):
            raise ArgumentError("invalid pair: B meets the vertex support of A")
        if len(set(self.B)) != len(self.B) or any(not 0 <= b < self.A.n for b in self.B):
            raise ArgumentError("B must be a set of vertices")
        if self.r.shape != (1 << self.A.num_vertices,):
            raise ArgumentError(f"r needs {1 << self.A.num_vertices} entries")
        if not (0 < self.bias < 1):
            raise ArgumentError("bias must lie in (0, 1)")

    @property
    def n(self):
        return self.A.n

    @property
    def bias(self) -> float:
        return self.q if self.side == "W" else self.p * self.q

    def on_side(self, side: str) -> "SubspaceElement":
        return SubspaceElement(self.A, self.B, self.r, side, self.q, self.p)

    def r_index(self, X: np.ndarray) -> np.ndarray:
        V = np.asarray(self.A.vertices, dtype=np.int64)
        if V.size == 0:
            return np.zeros(X.shape[0], dtype=np.int64)
        return (X[:, V].astype(np.int64) << np.arange(V.size)).sum(axis=1)

    def evaluate(self, X: np.ndarray, batch: GraphBatch) -> np.ndarray:
        X = np.asarray(X)
        return chi_batch(self.A, batch) * chi_biased_batch(self.B, X, self.bias) * self.r[self.r_index(X)]


def eval_subspace_element(w: SubspaceElement, state: LiftedState) -> float:
    return float(w.evaluate(state.x[None, :], GraphBatch(state.G.n, state.G.packed[None, :]))[0])


def contraction_factor(num_vertices_A: int, size_B: int, p: float, q: float) -> float:
    """Scalar by which one lifted step maps a ``W'`` element onto its ``W`` counterpart."""
    return p**num_vertices_A * (p * (1.0 - q) / (1.0 - p * q)) ** (size_B / 2.0)


def contraction_factor_printed(num_vertices_A: int, size_B: int, p: float, q: float) -> float:
    """The factor with ``(1 - p)`` in place of ``(1 - q)``, as the closed form is printed."""
    return p ** (num_vertices_A + size_B / 2.0) * ((1.0 - p) / (1.0 - p * q)) ** (size_B / 2.0)


def contraction_bound(num_vertices_A: int, size_B: int, p: float) -> float:
    return p ** ((num_vertices_A + size_B) / 2.0)


def _biased_weights(v: int, bias: float) -> np.ndarray:
    idx = np.arange(1 << v)
    ones = np.array([bin(i).count("1") for i in idx])
    return bias**ones * (1.0 - bias) ** (v - ones)


def exact_norm_ratio(w: SubspaceElement) -> float:
    """``||T* w||_{2, q} / ||w||_{2, pq}`` by enumerating ``r``'s argument."""
    v = w.A.num_vertices
    num = contraction_factor(v, len(w.B), w.p, w.q) ** 2 * float(_biased_weights(v, w.q) @ w.r**2)
    den = float(_biased_weights(v, w.p * w.q) @ w.r**2)
    return math.sqrt(num / den)


@dataclass
class Claim65Report:
    factor: float
    factor_printed: float
    bound: float
    factor_within_bound: bool
    norm_ratio: float
    norm_ratio_within_bound: bool
    probe_estimates: list
    probe_expected: list
    probe_stderr: list
    probes_within_4se: int
    probes: int
    samples: int
    seed: int
    mc_norm_ratio: Optional[float] = None
    mc_norm_ratio_stderr: Optional[float] = None

    def to_dict(self):
        return asdict(self)

    @property
    def passed(self) -> bool:
        return self.factor_within_bound and self.norm_ratio_within_bound and self.probes_within_4se == self.probes


def claim_6_5_check(w: SubspaceElement, p: float, q: float, m: int, seed, probes: int = 20,
                    norm_samples: int = 0) -> Claim65Report:
    """Compare Monte-Carlo ``T* w`` at random lifted states with the closed form.

    The chain is the non-permuted lifted step.  ``norm_samples > 0`` adds a
    Monte-Carlo estimate of the norm ratio next to the exact one.
    """
    if not (0 < p < 1 and 0 < q < 1):
        raise ArgumentError("need 0 < p, q < 1")
    seed = resolve_seed(seed)
    w = SubspaceElement(w.A, w.B, w.r, "W'", q, p)
    target = w.on_side("W")
    v, b = w.A.num_vertices, len(w.B)
    factor = contraction_factor(v, b, p, q)
    bound = contraction_bound(v, b, p)
    chain = ChainParams(p)
    rng = stream(seed, "contraction/probes")
    X0 = (rng.random((probes, w.n)) < q).astype(np.uint8)
    G0 = sample_null_batch(w.n, probes, rng)
    estimates, expected, errors = [], [], []
    for i in range(probes):
        x, G = X0[i], G0[i]

        def shard(size, srng, x=x, G=G):
            X = np.broadcast_to(x, (size, w.n)).copy()
            Y, H = step_lifted_batch(X, GraphBatch(w.n, np.broadcast_to(G.packed, (size, G.packed.size)).copy()),
                                     chain, srng)
            return Moments().add(w.evaluate(Y, H))

        mom = merge_moments(map_shards(shard, m, seed, f"contraction/probe/{i}", 1 << 14))
        estimates.append(float(mom.mean))
        errors.append(float(mom.stderr))
        expected.append(factor * float(target.evaluate(x[None, :], GraphBatch(w.n, G.packed[None, :]))[0]))
    within = sum(abs(e - t) <= 4 * s + 1e-12 for e, t, s in zip(estimates, expected, errors))
    ratio = exact_norm_ratio(w)
    report = Claim65Report(factor, contraction_factor_printed(v, b, p, q), bound, factor <= bound + 1e-15, ratio,
                           ratio <= bound + 1e-12, estimates, expected, errors, int(within), probes, m, seed)
    if norm_samples:
        report.mc_norm_ratio, report.mc_norm_ratio_stderr = _mc_norm_ratio(w, target, factor, norm_samples, seed)
    return report


def _mc_norm_ratio(w, target, factor, m, seed):
    rng = stream(seed, "contraction/norms")
    Xq = (rng.random((m, w.n)) < w.q).astype(np.uint8)
    Xpq = (rng.random((m, w.n)) < w.p * w.q).astype(np.uint8)
    Gq, Gpq = sample_null_batch(w.n, m, rng), sample_null_batch(w.n, m, rng)
    num = (factor * target.evaluate(Xq, Gq)) ** 2
    den = w.evaluate(Xpq, Gpq) ** 2
    ratio = math.sqrt(num.mean() / den.mean())
    rel = 0.5 * math.sqrt(num.var(ddof=1) / m / num.mean() ** 2 + den.var(ddof=1) / m / den.mean() ** 2)
    return ratio, ratio * rel


@dataclass
class AnticoncentrationReport:
    b: float
    prob_estimate: float
    prob_stderr: float
    second_moment: float
    second_moment_stderr: float
    norm2: float
    fourth_moment: float
    samples: int
    seed: int
    degenerate: bool = False

    def to_dict(self):
        return asdict(self)

    def paley_zygmund_floor(self, theta: float) -> float:
        """``(1 - sqrt(theta))^2 E[f^2]^2 / E[f^4]`` from the first-pass moments."""
        if self.fourth_moment <= 0:
            return 0.0
        return (1.0 - math.sqrt(theta)) ** 2 * self.second_moment**2 / self.fourth_moment


def _values(f, size, sampler, rng):
    if hasattr(sampler, "sample_values"):
        return sampler.sample_values(f, size, rng)
    batch = sampler.sample_batch(size, rng)
    return f.batch(batch) if isinstance(f, TestFunction) else np.asarray(f(batch), dtype=np.float64)


def anticonc_estimate(f, sampler, b: float, m: int, seed, name: str = "anticonc") -> AnticoncentrationReport:
    """Two independent passes: estimate ``E[f^2]``, then ``Pr[|f| >= b sqrt(E[f^2])]``."""
    if m < 2:
        raise ArgumentError("need at least 2 samples")
    if not b > 0:
        raise ArgumentError("b must be positive")
    seed = resolve_seed(seed)

    def first(size, rng):
        v = _values(f, size, sampler, rng)
        return Moments().add(np.stack([v * v, v**4], axis=1))

    mom = merge_moments(map_shards(first, m, seed, name + "/moments", 1 << 14))
    second, fourth = float(mom.mean[0]), float(mom.mean[1])
    second_se = float(mom.stderr[0])
    if second <= 0:
        return AnticoncentrationReport(b, 0.0, 0.0, second, second_se, 0.0, fourth, m, seed, degenerate=True)
    level = b * math.sqrt(second)

    def hit(size, rng):
        return Moments().add((np.abs(_values(f, size, sampler, rng)) >= level).astype(np.float64))

    prob = merge_moments(map_shards(hit, m, seed, name + "/tail", 1 << 14))
    return AnticoncentrationReport(b, float(prob.mean), float(prob.stderr), second, second_se, math.sqrt(second),
                                   fourth, m, seed)


class ProductSampler:
    """Draws from the ``bias``-biased cube ``{0,1}^dims`` as a ``(size, dims)`` array."""

    def __init__(self, dims: int, bias: float = 0.5):
        self.dims = dims
        self.bias = bias

    def sample_values(self, f, size, rng):
        return np.asarray(f((rng.random((size, self.dims)) < self.bias).astype(np.uint8)), dtype=np.float64)


def cube_points(dims: int) -> np.ndarray:
    """All ``2^dims`` points of ``{0,1}^dims``, row ``i`` holding the bits of ``i``."""
    idx = np.arange(1 << dims, dtype=np.int64)
    return ((idx[:, None] >> np.arange(dims)) & 1).astype(np.uint8)


def cube_weights(points: np.ndarray, bias: float) -> np.ndarray:
    ones = points.sum(axis=1)
    return bias**ones * (1.0 - bias) ** (points.shape[1] - ones)


def subsets_up_to(dims: int, d: int):
    return [S for s in range(d + 1) for S in itertools.combinations(range(dims), s)]


def character_matrix(points: np.ndarray, subsets, bias: float) -> np.ndarray:
    """``bias``-biased characters of every subset (columns) at every point (rows)."""
    return np.stack([chi_biased_batch(S, points, bias) for S in subsets], axis=1)


def exact_norm(values: np.ndarray, weights: np.ndarray, r: float) -> float:
    return float(weights @ np.abs(values) ** r) ** (1.0 / r)


@dataclass
class HypercontractivityReport:
    mode: str
    dims: int
    d: int
    bias: float
    trials: int
    constant: float
    passes: int
    eight_four_passes: int
    log_convex_passes: int
    worst_ratio: float
    worst_eight_four_ratio: float
    seed: int

    def to_dict(self):
        return asdict(self)

    @property
    def passed(self) -> bool:
        return self.passes == self.eight_four_passes == self.log_convex_passes == self.trials


def hypercontract_suite(mode: str, dims: int, d: int, trials: int, seed, bias: Optional[float] = None) -> HypercontractivityReport:
    """Exact hypercontractivity and log-convexity checks on random low-degree functions.

    ``bonami``: uniform cube, arbitrary degree-``d`` functions, constant
    ``sqrt(3)^d`` for both ``(2,4)`` and ``(4,8)``.
    ``biased_symmetric``: ``bias``-biased cube, symmetric functions (one random
    coefficient per monomial size), ``(2,4)`` constant ``8^d``; the ``(4,8)``
    check does not apply and counts as passed.
    """
    if mode == "bonami":
        bias = 0.5 if bias is None else bias
        if bias != 0.5:
            raise ArgumentError("the bonami suite runs on the uniform cube")
        if dims > 20:
            raise ArgumentError("bonami suite enumerates 2^dims points; need dims <= 20")
        constant = math.sqrt(3.0) ** d
    elif mode == "biased_symmetric":
        if bias is None or not (0 < bias < 1):
            raise ArgumentError("biased_symmetric needs a bias in (0, 1)")
        if d > dims * bias:
            raise ArgumentError(f"need d <= dims * bias, got d={d}, dims={dims}, bias={bias}")
        if dims > 20:
            raise ArgumentError("need dims <= 20")
        constant = 8.0**d
    else:
        raise ArgumentError(f"unknown mode {mode!r}")
    seed = resolve_seed(seed)
    rng = stream(seed, f"hyper/{mode}")
    points = cube_points(dims)
    weights = cube_weights(points, bias)
    subsets = subsets_up_to(dims, d)
    chars = character_matrix(points, subsets, bias)
    sizes = np.array([len(S) for S in subsets])
    passes = eight_four = convex = 0
    worst = worst84 = 0.0
    for _ in range(trials):
        if mode == "bonami":
            coeffs = rng.standard_normal(len(subsets))
        else:
            coeffs = rng.standard_normal(d + 1)[sizes]
        values = chars @ coeffs
        n1, n2, n4, n8 = (exact_norm(values, weights, r) for r in (1, 2, 4, 8))
        ratio = n4 / n2
        worst = max(worst, ratio)
        passes += ratio <= constant * (1 + 1e-12)
        ratio84 = n8 / n4
        worst84 = max(worst84, ratio84)
        # Bonami applied to f^2 gives ||f||_8 <= sqrt(3)^d ||f||_4; f^2 breaks the symmetric precondition
        eight_four += mode != "bonami" or ratio84 <= constant * (1 + 1e-12)
        convex += n1 >= n2**3 / n4**2 * (1 - 1e-12) and n4 / n2 <= (n8 / n4) ** 2 * (1 + 1e-12)
    return HypercontractivityReport(mode, dims, d, bias, trials, constant, int(passes), int(eight_four), int(convex),
                                    worst, worst84, seed)


@dataclass
class Lemma62Report:
    norm_f: float
    norm_f_stderr: float
    norm_Tf: float
    norm_Tf_stderr: float
    survival_ratio: float
    survival_threshold: float
    hypothesis_held: bool
    anticonc_b: float
    anticonc_prob: float
    anticonc_stderr: float
    samples: int
    y_count: int
    seed: int
    degenerate: bool = False

    def to_dict(self):
        return asdict(self)


def _noised_values(f: TestFunction, G, chain, y_count, rng):
    if f.edge_count_fn is not None and f.batch_fn is None:
        return f.on_edge_counts(step_edge_counts(G, chain, y_count, rng), G.n)
    ys = step_batch(GraphBatch(G.n, np.broadcast_to(G.packed, (y_count, G.packed.size)).copy()), chain, rng)
    return f.batch(ys)


def lemma_6_2_experiment(f: TestFunction, n: int, k: float, p: float, d: int, m: int, seed, y_count: int = 64,
                         b: float = 0.1) -> Lemma62Report:
    """Survival ``||Tf||_{2,P} / ||f||_{2,P'}`` and anticoncentration of ``Tf`` under ``P``.

    ``T`` is the permuted chain with keep probability ``p``; ``P = G(n,1/2,k)``
    and ``P' = G(n,1/2,pk)``.  ``||Tf||^2`` is estimated without bias by
    multiplying two independent inner averages.
    """
    if m < 2 or y_count < 2 or y_count % 2:
        raise ArgumentError("need m >= 2 and an even y_count >= 2")
    seed = resolve_seed(seed)
    P, Pp = PlantedModel(n, k), PlantedModel(n, p * k)
    chain = ChainParams(p, permute=True)

    def outer_f(size, rng):
        v = f.batch(Pp.sample_batch(size, rng))
        return Moments().add(v * v)

    mf = merge_moments(map_shards(outer_f, m, seed, "survival/f", 4096))
    norm_f = math.sqrt(float(mf.mean))
    norm_f_se = float(mf.stderr) / (2 * norm_f) if norm_f > 0 else float("nan")
    if norm_f == 0:
        return Lemma62Report(0.0, 0.0, 0.0, 0.0, float("nan"), p**d, False, b, 0.0, 0.0, m, y_count, seed, True)

    def outer_T(size, rng):
        batch = P.sample_batch(size, rng)
        rows = np.empty((size, 2))
        for i, G in enumerate(batch):
            v = _noised_values(f, G, chain, y_count, rng)
            rows[i] = v[: y_count // 2].mean(), v[y_count // 2 :].mean()
        return rows

    rows = np.concatenate(map_shards(outer_T, m, seed, "survival/T", 1024))
    prod = rows[:, 0] * rows[:, 1]
    sq = max(float(prod.mean()), 0.0)
    norm_T = math.sqrt(sq)
    norm_T_se = float(prod.std(ddof=1) / math.sqrt(m)) / (2 * max(norm_T, 1e-300))
    ratio = norm_T / norm_f
    tf = rows.mean(axis=1)
    hits = np.abs(tf) >= b * norm_T
    return Lemma62Report(norm_f, norm_f_se, norm_T, norm_T_se, ratio, p**d, bool(ratio >= p**d), b,
                         float(hits.mean()), float(hits.std(ddof=1) / math.sqrt(m)), m, y_count, seed)
