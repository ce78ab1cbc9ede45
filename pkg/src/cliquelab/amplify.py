"""Black-box amplification: turn a test A into a test B via the noised high-degree part of A.

With ``f = A`` and ``f_+`` its projection onto a low-degree space,
``C(x) = mean_j [A(y_j) - f_+(y_j)]`` over ``y_j ~ M(x)`` estimates
``T f_-(x)``; ``B`` outputs +1 iff ``|C(x)|`` clears a threshold.  The projection
coefficients are fitted once from null samples and reused for every ``x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict, field
from typing import Optional

import numpy as np

from .distinguish import (EDGE_COUNT_TEST, AdvantageEstimate, TestFunction, adv_montecarlo, claim_2_5_estimate,
                          has_edge_count_law)
from .errors import ArgumentError
from .fourier import BasisIndex, OrbitBasis, edge_orbit_feature
from .graphs import Graph, GraphBatch, NullModel, PlantedModel, num_slots
from .noise import ChainParams, step_batch, step_edge_counts
from .streams import Moments, map_shards, merge_moments, resolve_seed, stream

# Absolute constant of the anticoncentration claim: 2c = 1 / (4 * 9^16 * 8^32).
LOG10_ANTICONC_C = -math.log10(2.0 * 4.0 * 9.0**16 * 8.0**32)


@dataclass
class ReductionParams:
    """Reduction parameters in exponent form (base ``n``) plus desk-scale overrides.

    ``p = n^(alpha-beta)``, ``eps = p^sqrt(d)``, ``q = n^(2d)``,
    ``gamma = c^((4d/(beta-alpha))^2)`` and ``delta = delta_constant * eps / gamma``.
    gamma underflows for the paper's ``c``, so it is carried as ``log10``.
    """

    alpha: float
    beta: float
    d: int
    n: int
    delta_constant: float = 400.0
    eps_exp: Optional[float] = None
    threshold: Optional[float] = None
    p: float = field(init=False)
    eps: float = field(init=False)
    p_exponent: float = field(init=False)
    eps_exponent: float = field(init=False)
    q_exponent: float = field(init=False)
    log10_q: float = field(init=False)
    gamma_base_log10: float = field(init=False)
    gamma_exponent: float = field(init=False)
    log10_gamma: float = field(init=False)
    log10_delta_thm: float = field(init=False)

    def __post_init__(self):
        if not (0 < self.alpha < self.beta):
            raise ArgumentError(f"need 0 < alpha < beta, got alpha={self.alpha}, beta={self.beta}")
        if self.d < 1:
            raise ArgumentError("d must be at least 1")
        if self.n < 2:
            raise ArgumentError("n must be at least 2")
        self.p_exponent = self.alpha - self.beta
        self.eps_exponent = self.p_exponent * math.sqrt(self.d)
        self.q_exponent = 2.0 * self.d
        self.p = self.n**self.p_exponent
        self.eps = self.p ** math.sqrt(self.d)
        self.log10_q = self.q_exponent * math.log10(self.n)
        self.gamma_base_log10 = LOG10_ANTICONC_C
        self.gamma_exponent = (4.0 * self.d / (self.beta - self.alpha)) ** 2
        self.log10_gamma = self.gamma_exponent * self.gamma_base_log10
        self.log10_delta_thm = math.log10(self.delta_constant) + math.log10(self.eps) - self.log10_gamma

    def to_dict(self):
        return asdict(self)


def derive_params(alpha: float, beta: float, d: int, n: int, delta_constant: float = 400.0, **overrides) -> ReductionParams:
    return ReductionParams(alpha, beta, d, n, delta_constant, **overrides)


@dataclass
class ProjectionFit:
    """Null-sample estimates ``c_i = mean_j f_i(z_j) A(z_j)`` (constant first).

    When ``orbit`` is set the coefficients live in orbit coordinates, which is
    the exact projection whenever ``A`` is invariant under vertex relabeling.
    """

    basis: BasisIndex
    chat: np.ndarray
    stderr: np.ndarray
    z_count: int
    seed: int
    orbit: Optional[OrbitBasis] = None

    def __post_init__(self):
        width = (len(self.orbit) if self.orbit is not None else len(self.basis) - 1) + 1
        if self.chat.shape != (width,):
            raise ArgumentError("coefficient vector does not match the basis")

    @property
    def edge_count_only(self) -> bool:
        return self.orbit is not None and self.orbit._edge_only

    def features(self, batch: GraphBatch) -> np.ndarray:
        ones = np.ones((len(batch), 1))
        if self.orbit is not None:
            return np.hstack([ones, self.orbit.features(batch)])
        return np.hstack([ones, self.basis.features(batch, include_constant=False)])

    def features_from_edge_counts(self, counts) -> np.ndarray:
        phi = edge_orbit_feature(counts, self.basis.n)
        return np.stack([np.ones_like(phi), phi], axis=1)

    def f_plus(self, batch: GraphBatch) -> np.ndarray:
        return self.features(batch) @ self.chat

    def f_plus_from_edge_counts(self, counts) -> np.ndarray:
        if not self.edge_count_only:
            raise ArgumentError("this fit is not a function of the edge count")
        return self.features_from_edge_counts(counts) @ self.chat

    def per_monomial(self) -> np.ndarray:
        """Coefficients over the full basis (constant first)."""
        if self.orbit is None:
            return self.chat.copy()
        out = self.orbit.expand(self.chat[1:])
        out[0] = self.chat[0]
        return out


def fit_projection(A: TestFunction, basis, z_count: int, seed, symmetric: bool = False,
                   name: str = "amplify/fit") -> ProjectionFit:
    """Estimate the low-degree projection of ``A`` from ``z_count`` null samples."""
    if z_count < 1:
        raise ArgumentError("z_count must be positive")
    seed = resolve_seed(seed)
    orbit = None
    if isinstance(basis, OrbitBasis):
        orbit, basis = basis, basis.basis
    elif symmetric:
        orbit = OrbitBasis(basis)
    null = NullModel(basis.n)
    probe = ProjectionFit(basis, np.zeros((len(orbit) if orbit else len(basis) - 1) + 1), np.zeros(1), 0, seed, orbit)
    fast = probe.edge_count_only and A.edge_count_fn is not None
    width = probe.chat.shape[0]
    shard_size = max(1, min(1 << 14, (1 << 22) // width))

    def shard(size, rng):
        if fast:
            counts = null.sample_edge_counts(size, rng)
            F, a = probe.features_from_edge_counts(counts), A.on_edge_counts(counts, basis.n)
        else:
            batch = null.sample_batch(size, rng)
            F, a = probe.features(batch), A.batch(batch)
        return Moments().add(F * a[:, None])

    mom = merge_moments(map_shards(shard, z_count, seed, name, shard_size))
    stderr = np.asarray(mom.stderr) if z_count > 1 else np.full(width, np.nan)
    return ProjectionFit(basis, np.asarray(mom.mean, dtype=np.float64), stderr, z_count, seed, orbit)


def _repeat(G: Graph, count: int) -> GraphBatch:
    return GraphBatch(G.n, np.broadcast_to(G.packed, (count, G.packed.shape[0])).copy())


def _residuals(x: Graph, A: TestFunction, fit: ProjectionFit, params: ChainParams, y_count: int, rng,
               adjacency=None) -> np.ndarray:
    """``A(y_j) - f_+(y_j)`` for ``y_j ~ M(x)``."""
    if fit.edge_count_only and A.edge_count_fn is not None:
        counts = step_edge_counts(x, params, y_count, rng, adjacency)
        return A.on_edge_counts(counts, x.n) - fit.f_plus_from_edge_counts(counts)
    ys = step_batch(_repeat(x, y_count), params, rng)
    return A.batch(ys) - fit.f_plus(ys)


def estimate_C(x: Graph, A: TestFunction, fit: ProjectionFit, params: ChainParams, y_count: int, rng):
    """``(C(x), stderr)`` with ``C(x) = mean_j [A(y_j) - f_+(y_j)]``."""
    if y_count < 1:
        raise ArgumentError("y_count must be positive")
    rng = rng if isinstance(rng, np.random.Generator) else stream(resolve_seed(rng), "amplify/C")
    r = _residuals(x, A, fit, params, y_count, rng)
    se = float(r.std(ddof=1) / math.sqrt(y_count)) if y_count > 1 else float("nan")
    return float(r.mean()), se


def estimate_C_batch(batch: GraphBatch, A: TestFunction, fit: ProjectionFit, params: ChainParams, y_count: int,
                     rng) -> np.ndarray:
    return np.array([_residuals(x, A, fit, params, y_count, rng).mean() for x in batch])


class ReductionTest(TestFunction):
    """The ±1 test ``B(x) = +1 iff |C(x)| >= threshold`` with its own random stream."""

    def __init__(self, A: TestFunction, fit: ProjectionFit, params: ChainParams, threshold: float, y_count: int,
                 seed, label: str = "B"):
        # threshold 0 is the limiting case B = +1
        if not threshold >= 0:
            raise ArgumentError("threshold must be nonnegative")
        if y_count < 1:
            raise ArgumentError("y_count must be positive")
        self.A = A
        self.fit = fit
        self.params = params
        self.threshold = threshold
        self.y_count = y_count
        self.rng = stream(resolve_seed(seed), "amplify/B")
        super().__init__(batch_fn=self._batch, label=label)

    def C_values(self, batch: GraphBatch, rng=None) -> np.ndarray:
        return estimate_C_batch(batch, self.A, self.fit, self.params, self.y_count, rng or self.rng)

    def _batch(self, batch: GraphBatch) -> np.ndarray:
        return np.where(np.abs(self.C_values(batch)) >= self.threshold, 1.0, -1.0)


def build_test_B(A: TestFunction, fit: ProjectionFit, params: ChainParams, threshold: float, y_count: int,
                 seed) -> ReductionTest:
    return ReductionTest(A, fit, params, threshold, y_count, seed)


class ChainedSampler:
    """The law ``M(P)``: draw from ``base`` and take one chain step."""

    def __init__(self, base, params: ChainParams):
        self.base = base
        self.params = params
        self.n = base.n

    def sample_batch(self, m, rng):
        return step_batch(self.base.sample_batch(m, rng), self.params, rng)

    def sample(self, rng):
        return self.sample_batch(1, rng)[0]


def paired_advantage(B: ReductionTest, planted: PlantedModel, m: int, seed, name: str = "amplify/paired"):
    """Advantage of ``B`` estimated on coupled pairs ``(G, plant(G, x))`` with shared chain randomness.

    Each pair has the exact null and planted marginals, so the mean paired
    difference is unbiased for ``E_P[B] - E_N[B]``; its stderr comes from the
    paired differences.
    """
    seed = resolve_seed(seed)
    n = planted.n
    from .graphs import plant_clique_batch, sample_clique_indicators, sample_null_batch

    def shard(size, rng):
        nulls = sample_null_batch(n, size, rng)
        X = sample_clique_indicators(planted.params, size, rng)
        planted_batch = plant_clique_batch(nulls, X)
        diffs = np.empty(size)
        for i in range(size):
            state = rng.bit_generator.state
            cn = _residuals(nulls[i], B.A, B.fit, B.params, B.y_count, rng).mean()
            rng.bit_generator.state = state
            cp = _residuals(planted_batch[i], B.A, B.fit, B.params, B.y_count, rng).mean()
            diffs[i] = (abs(cp) >= B.threshold) * 2.0 - (abs(cn) >= B.threshold) * 2.0
        return Moments().add(diffs)

    mom = merge_moments(map_shards(shard, m, seed, name, 1024))
    diff = float(mom.mean)
    return AdvantageEstimate(abs(diff), float(mom.stderr), m, seed, signed=diff)


@dataclass
class ReductionReport:
    params: dict
    adv_A_star: dict
    r_star: dict
    adv_B: dict
    adv_B_paired: Optional[dict]
    fit_z_count: int
    y_count: int
    threshold: float
    log10_gamma: Optional[float] = None

    def to_dict(self):
        return asdict(self)


def evaluate_reduction(A: TestFunction, chain: ChainParams, planted: PlantedModel, basis: BasisIndex, m: int, seed,
                       threshold: float, z_count: int, y_count: int, symmetric: bool = True,
                       reduction: Optional[ReductionParams] = None, paired: bool = False,
                       r_samples: Optional[int] = None) -> ReductionReport:
    """Advantage of ``A`` on ``(M(P), N)``, the low-degree advantage of ``M(P)``, and the advantage of ``B`` on ``(P, N)``."""
    if m < 2:
        raise ArgumentError("need at least 2 samples")
    seed = resolve_seed(seed)
    null = NullModel(planted.n)
    star = ChainedSampler(planted, chain)
    adv_a = adv_montecarlo(A, star, null, m, seed, name="reduction/adv-A", shard_size=4096)
    rs = r_samples or (m if m % 2 == 0 else m + 1)
    orbit = OrbitBasis(basis) if symmetric else basis
    r_star = claim_2_5_estimate(orbit, star, rs, seed, name="reduction/r-star", shard_size=4096)
    fit = fit_projection(A, basis, z_count, seed, symmetric=symmetric)
    B = build_test_B(A, fit, chain, threshold, y_count, seed)
    adv_b = adv_montecarlo(B, planted, null, m, seed, name="reduction/adv-B", shard_size=1024)
    adv_p = paired_advantage(B, planted, m, seed).to_dict() if paired else None
    return ReductionReport(
        params={"n": planted.n, "k": planted.k, "keep_prob": chain.keep_prob, "permute": chain.permute, "d": basis.d},
        adv_A_star=adv_a.to_dict(), r_star=r_star.to_dict(), adv_B=adv_b.to_dict(), adv_B_paired=adv_p,
        fit_z_count=z_count, y_count=y_count, threshold=threshold,
        log10_gamma=reduction.log10_gamma if reduction else None,
    )
