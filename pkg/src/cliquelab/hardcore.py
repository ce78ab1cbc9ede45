"""Hard-core perturbation of a planted distribution via a smoothed dual.

We minimize ``E_P[sigma(1 + g)]`` over ``g = sum_i g_i f_i`` by SGD, where
``sigma`` is the base-2 softplus at scale ``delta``, then accept a draw ``x``
from ``P`` with probability ``sigma'(1 + g(x))``.  At a point where the
gradient ``(<f_i, sigma'(1+g)>_P)_i`` is small, the accepted law has small
low-degree advantage.

For permutation-invariant planted laws the optimum can be taken symmetric, so
optimization runs in the orbit basis; with degree 1 and an edge-count sampler,
no graph is ever materialized.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.special import expit

from .distinguish import (AdvantageEstimate, claim_2_5_estimate, has_edge_count_law, low_degree_advantage_closed_form,
                          planted_edge_count_pmf, split_sample_square_from_blocks)
from .errors import ArgumentError, HardnessGateError, SamplerError
from .fourier import BasisIndex, OrbitBasis, Polynomial, edge_orbit_feature, enumerate_monomials
from .graphs import Graph, GraphBatch, PlantedModel, num_slots
from .streams import DEFAULT_SHARD_SIZE, Moments, map_shards, merge_moments, resolve_seed, stream

LN2 = math.log(2.0)


def _check_delta(delta):
    if not delta > 0:
        raise ArgumentError(f"delta must be positive, got {delta}")


def sigma(t, delta: float):
    """``(delta / ln 2) * ln(1 + 2^(t/delta))``, the antiderivative of :func:`sigma_prime`."""
    _check_delta(delta)
    u = np.asarray(t, dtype=np.float64) * (LN2 / delta)
    return np.logaddexp(0.0, u) * (delta / LN2)


def sigma_prime(t, delta: float):
    """``1 / (1 + 2^(-t/delta))``."""
    _check_delta(delta)
    return expit(np.asarray(t, dtype=np.float64) * (LN2 / delta))


def sigma_second(t, delta: float):
    _check_delta(delta)
    s = sigma_prime(t, delta)
    return s * (1.0 - s) * (LN2 / delta)


def round_mantissa(x, bits: int = 48) -> np.ndarray:
    """Round each float to ``bits`` bits of mantissa."""
    mant, expo = np.frexp(np.asarray(x, dtype=np.float64))
    return np.ldexp(np.round(mant * 2.0**bits) / 2.0**bits, expo)


class FeatureSource:
    """Draws feature vectors ``(f_1(x), ..., f_l(x))`` for ``x ~ P``.

    ``draw(size, rng)`` returns ``(features, payload)``; the payload is what
    the acceptance step needs later (a GraphBatch or an array of edge counts).
    """

    def __init__(self, draw: Callable, dim: int, features: Callable, label: str = ""):
        self.draw = draw
        self.dim = dim
        self.features = features
        self.label = label


def graph_feature_source(basis, planted) -> FeatureSource:
    if isinstance(basis, BasisIndex):
        feats = lambda batch: basis.features(batch, include_constant=False)
        dim = len(basis) - 1
    else:
        feats = basis.features
        dim = len(basis)

    def draw(size, rng):
        batch = planted.sample_batch(size, rng)
        return feats(batch), batch

    return FeatureSource(draw, dim, feats, "graphs")


def edge_count_feature_source(planted) -> FeatureSource:
    n = planted.n

    def feats(counts):
        return edge_orbit_feature(counts, n)[:, None]

    def draw(size, rng):
        counts = planted.sample_edge_counts(size, rng)
        return feats(counts), counts

    return FeatureSource(draw, 1, feats, "edge-counts")


@dataclass
class SGDConfig:
    """Settings for :func:`sgd_optimize`.

    The step size defaults to ``1 / R`` with ``R = max ||f(x)||^2 / delta`` over
    the first block of draws; iterates from the last half of the run are averaged.
    """

    batch_size: int = 1024
    max_iters: int = 1_000_000
    check_every: int = 50_000
    validation_size: int = 10_000_000
    step_size: Optional[float] = None
    round_bits: int = 48
    block_floats: int = 1 << 22

    def __post_init__(self):
        if self.batch_size < 1 or self.max_iters < 1 or self.check_every < 1:
            raise ArgumentError("SGD sizes must be positive")
        if self.validation_size < 4 or self.validation_size % 2:
            raise ArgumentError("validation_size must be even and at least 4")


@dataclass
class DualSolution:
    """Dual coefficients ``g*`` on the non-constant basis slots, with fit metadata."""

    basis: BasisIndex
    coeffs: np.ndarray
    delta: float
    converged: bool = False
    iterations: int = 0
    seed: Optional[int] = None
    grad_norm: Optional[float] = None
    grad_norm_stderr: Optional[float] = None
    orbit: Optional[OrbitBasis] = field(default=None, repr=False)
    orbit_coeffs: Optional[np.ndarray] = None
    step_size: Optional[float] = None

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.coeffs.shape != (len(self.basis) - 1,):
            raise ArgumentError("coefficients must align with the non-constant basis slots")
        _check_delta(self.delta)

    @property
    def n(self):
        return self.basis.n

    @property
    def edge_count_only(self) -> bool:
        return self.orbit is not None and self.orbit._edge_only

    def values(self, batch: GraphBatch) -> np.ndarray:
        if self.orbit is not None:
            return self.orbit.features(batch) @ self.orbit_coeffs
        return self.basis.features(batch, include_constant=False) @ self.coeffs

    def values_from_edge_counts(self, counts) -> np.ndarray:
        if not self.edge_count_only:
            raise ArgumentError("this solution is not a function of the edge count")
        return edge_orbit_feature(counts, self.n) * self.orbit_coeffs[0]

    def __call__(self, G: Graph) -> float:
        return float(self.values(GraphBatch(G.n, G.packed[None, :]))[0])

    def as_polynomial(self) -> Polynomial:
        return Polynomial(self.basis, np.concatenate([[0.0], self.coeffs]))

    def metadata(self) -> dict:
        meta = {
            "delta": self.delta,
            "converged": bool(self.converged),
            "seed": self.seed,
            "iterations": int(self.iterations),
            "grad_norm": self.grad_norm,
            "grad_norm_stderr": self.grad_norm_stderr,
            "step_size": self.step_size,
            "degree": self.basis.d,
            "mode": self.basis.mode,
        }
        if self.orbit_coeffs is not None:
            meta["orbit_coeffs"] = [float(v) for v in self.orbit_coeffs]
        return meta

    def save(self, path) -> Path:
        """Write the polynomial file at ``path`` and a JSON sidecar next to it."""
        path = Path(path)
        self.as_polynomial().save(path)
        sidecar = path.with_name(path.name + ".json")
        sidecar.write_text(json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n")
        return sidecar

    @classmethod
    def load(cls, path) -> "DualSolution":
        path = Path(path)
        poly = Polynomial.load(path)
        meta = json.loads(path.with_name(path.name + ".json").read_text())
        orbit = orbit_coeffs = None
        if "orbit_coeffs" in meta:
            basis = enumerate_monomials(poly.n, meta["degree"], meta.get("mode", "edges"))
            orbit = OrbitBasis(basis)
            orbit_coeffs = np.asarray(meta["orbit_coeffs"])
            coeffs = orbit.expand(orbit_coeffs)[1:]
            stored = poly.on_basis(basis).coeffs[1:]
            if not np.allclose(coeffs, stored, rtol=1e-12, atol=0.0):
                raise ArgumentError("polynomial file and sidecar disagree")
        else:
            basis, coeffs = poly.basis, poly.coeffs[1:]
        return cls(basis, coeffs, meta["delta"], meta["converged"], meta["iterations"], meta["seed"],
                   meta.get("grad_norm"), meta.get("grad_norm_stderr"), orbit, orbit_coeffs, meta.get("step_size"))


def _source_for(basis, planted, symmetric):
    """Pick the coordinates and feature source the optimizer works in."""
    orbit = None
    if isinstance(basis, OrbitBasis):
        orbit, basis = basis, basis.basis
    elif symmetric:
        orbit = OrbitBasis(basis)
    if orbit is not None:
        if orbit._edge_only and has_edge_count_law(planted):
            return basis, orbit, edge_count_feature_source(planted)
        return basis, orbit, graph_feature_source(orbit, planted)
    return basis, None, graph_feature_source(basis, planted)


def gradient_split_sample(h: np.ndarray, source: FeatureSource, delta: float, m: int, seed: int,
                          name: str = "hardcore/gradient"):
    """Split-sample estimate of ``||(<f_i, sigma'(1+g)>_P)_i||_2`` and of ``E_P[sigma'(1+g)]``.

    Returns ``(norm, norm_stderr, squared, squared_stderr, accept_mean, accept_stderr)``.
    """
    half = m // 2
    size = max(1, min(DEFAULT_SHARD_SIZE * 8, (1 << 22) // source.dim, -(-half // 32)))

    def shard(count, rng):
        F, _ = source.draw(count, rng)
        s = sigma_prime(1.0 + F @ h, delta)
        return (F * s[:, None]).sum(axis=0), count, Moments().add(s)

    pa = map_shards(shard, half, seed, name + "/a", size)
    pb = map_shards(shard, half, seed, name + "/b", size)
    U, se = split_sample_square_from_blocks(np.stack([p[0] for p in pa]), np.stack([p[0] for p in pb]),
                                            np.array([p[1] for p in pa]))
    acc = merge_moments([p[2] for p in pa] + [p[2] for p in pb])
    norm = math.sqrt(max(U, 0.0))
    return norm, se / (2.0 * math.sqrt(max(U, se))), U, se, float(acc.mean), float(acc.stderr)


def sgd_optimize(basis, planted, delta: float, config: Optional[SGDConfig] = None, seed=0,
                 symmetric: Optional[bool] = None) -> DualSolution:
    """Minimize ``E_P[sigma(1 + g)]`` by constant-step SGD with tail averaging.

    Stops at the first checkpoint where the split-sample gradient norm of the
    averaged iterate is at most ``delta / 3``; otherwise returns the last
    averaged iterate with ``converged=False``.
    """
    _check_delta(delta)
    config = config or SGDConfig()
    seed = resolve_seed(seed)
    if symmetric is None:
        symmetric = isinstance(planted, PlantedModel)
    basis, orbit, source = _source_for(basis, planted, symmetric)
    dim = source.dim
    h = np.zeros(dim)
    block = max(1, config.block_floats // (config.batch_size * max(1, dim)))
    rng = stream(seed, "hardcore/sgd")
    eta = config.step_size
    it = 0
    running = np.zeros(dim)
    # running sums at checkpoints, for averaging the last half of the iterates
    prefix = [(0, np.zeros(dim))]
    converged = False
    stats = (None, None)
    check = 0
    while it < config.max_iters:
        rows = min(block, config.max_iters - it)
        F, _ = source.draw(rows * config.batch_size, rng)
        F = F.reshape(rows, config.batch_size, dim)
        if eta is None:
            R = float((F * F).sum(axis=2).max()) / delta
            eta = 1.0 / R if R > 0 else 1.0
        for r in range(rows):
            f = F[r]
            s = sigma_prime(1.0 + f @ h, delta)
            h = h - eta * (f.T @ s) / config.batch_size
            running = running + h
            it += 1
            if it % config.check_every == 0 or it == config.max_iters:
                prefix.append((it, running.copy()))
                avg = _tail_average(prefix, it)
                check += 1
                norm, norm_se, *_ = gradient_split_sample(avg, source, delta, config.validation_size, seed,
                                                          name=f"hardcore/validate/{check}")
                stats = (norm, norm_se)
                if norm <= delta / 3:
                    converged = True
                    break
        if converged:
            break
    h = avg
    return _finish(basis, orbit, h, delta, converged, it, seed, stats, eta)


def _tail_average(prefix, it):
    """Average of iterates ``it//2 + 1 .. it`` from checkpointed running sums."""
    start = it // 2
    # checkpoints are sparse, so average from the latest checkpoint at or before the midpoint
    base_it, base_sum = max((p for p in prefix if p[0] <= start), key=lambda p: p[0])
    return (prefix[-1][1] - base_sum) / (it - base_it)


def _finish(basis, orbit, h, delta, converged, iterations, seed, stats, eta):
    if orbit is not None:
        return DualSolution(basis, orbit.expand(h)[1:], delta, converged, iterations, seed, stats[0], stats[1],
                            orbit, np.asarray(h, dtype=np.float64), eta)
    return DualSolution(basis, h, delta, converged, iterations, seed, stats[0], stats[1], step_size=eta)


def acceptance_probability(sol: DualSolution, G: Graph) -> float:
    """``sigma'(1 + g*(G))``."""
    return float(sigma_prime(1.0 + sol(G), sol.delta))


class HardcoreSampler:
    """Rejection sampler: draw from the planted sampler, keep with probability ``sigma'(1 + g*)``."""

    def __init__(self, solution: DualSolution, planted, max_iters: int = 1000):
        if max_iters < 1:
            raise ArgumentError("max_iters must be positive")
        self.solution = solution
        self.planted = planted
        self.max_iters = max_iters

    @property
    def n(self):
        return self.solution.n

    @property
    def supports_edge_counts(self) -> bool:
        return self.solution.edge_count_only and has_edge_count_law(self.planted)

    def acceptance(self, batch: GraphBatch) -> np.ndarray:
        return sigma_prime(1.0 + self.solution.values(batch), self.solution.delta)

    def sample(self, rng):
        """One accepted graph and the number of proposals it took."""
        for attempt in range(1, self.max_iters + 1):
            G = self.planted.sample(rng)
            if rng.random() < acceptance_probability(self.solution, G):
                return G, attempt
        raise SamplerError(f"no acceptance within {self.max_iters} proposals; the solution is badly conditioned")

    def _rejection(self, m, rng, propose, accept):
        chunks, filled = [], 0
        for _ in range(self.max_iters):
            if filled >= m:
                break
            want = m - filled
            payload = propose(want, rng)
            keep = rng.random(want) < accept(payload)
            chunks.append(payload[keep])
            filled += int(keep.sum())
        if filled < m:
            raise SamplerError(f"no acceptance within {self.max_iters} proposals; the solution is badly conditioned")
        return chunks

    def sample_batch(self, m: int, rng) -> GraphBatch:
        chunks = self._rejection(m, rng, self.planted.sample_batch, self.acceptance)
        return GraphBatch.concat(chunks)

    def sample_edge_counts(self, m: int, rng) -> np.ndarray:
        if not self.supports_edge_counts:
            raise ArgumentError("edge-count sampling needs a degree-1 symmetric solution and an edge-count law")
        sol = self.solution
        accept = lambda c: sigma_prime(1.0 + sol.values_from_edge_counts(c), sol.delta)
        return np.concatenate(self._rejection(m, rng, self.planted.sample_edge_counts, accept))


def sample_hardcore(sampler: HardcoreSampler, rng):
    return sampler.sample(rng)


def mild_hardness_gate(n: int, k: float, d: int, c: Optional[float] = None):
    """``(eps, c, passed)`` with ``eps`` the closed-form advantage at degree ``4d``; default ``c = sqrt(3)^d``."""
    if c is None:
        c = math.sqrt(3.0) ** d
    eps = low_degree_advantage_closed_form(n, k, 4 * d).value
    return eps, c, c * eps <= 0.125


def build_hardcore(planted: PlantedModel, d: int, delta: float, config: Optional[SGDConfig] = None, seed=0,
                   c: Optional[float] = None, check_gate: bool = True, symmetric: bool = True,
                   mode: str = "edges", max_iters: int = 1000) -> HardcoreSampler:
    """Gate, optimize, round, and re-verify; returns the rejection sampler for ``P*``."""
    _check_delta(delta)
    config = config or SGDConfig()
    seed = resolve_seed(seed)
    eps, c, ok = mild_hardness_gate(planted.n, planted.k, d, c)
    if check_gate and not ok:
        raise HardnessGateError(f"mild hardness fails: c*eps = {c * eps:.4g} > 1/8 (c={c:.4g}, eps={eps:.4g})")
    basis = enumerate_monomials(planted.n, d, mode)
    baseline = low_degree_advantage_closed_form(planted.n, planted.k, d, mode).value
    if delta >= baseline:
        target = OrbitBasis(basis) if symmetric else None
        sol = _finish(basis, target, np.zeros(len(target) if target else len(basis) - 1), delta, True, 0, seed,
                      (None, None), None)
        return HardcoreSampler(sol, planted, max_iters)
    target = OrbitBasis(basis) if symmetric else basis
    sol = sgd_optimize(target, planted, delta, config, seed, symmetric=symmetric)
    sol = round_solution(sol, config.round_bits)
    _, _, source = _source_for(sol.orbit or sol.basis, planted, sol.orbit is not None)
    h = sol.orbit_coeffs if sol.orbit is not None else sol.coeffs
    norm, norm_se, *_ = gradient_split_sample(h, source, delta, config.validation_size, seed, "hardcore/rounded")
    sol.grad_norm, sol.grad_norm_stderr = norm, norm_se
    sol.converged = bool(sol.converged and norm <= delta / 3)
    return HardcoreSampler(sol, planted, max_iters)


def round_solution(sol: DualSolution, bits: int = 48) -> DualSolution:
    if sol.orbit is not None:
        h = round_mantissa(sol.orbit_coeffs, bits)
        return _finish(sol.basis, sol.orbit, h, sol.delta, sol.converged, sol.iterations, sol.seed,
                       (sol.grad_norm, sol.grad_norm_stderr), sol.step_size)
    return DualSolution(sol.basis, round_mantissa(sol.coeffs, bits), sol.delta, sol.converged, sol.iterations,
                        sol.seed, sol.grad_norm, sol.grad_norm_stderr, step_size=sol.step_size)


def exact_edge_gradient(sol: DualSolution, n: int, k: float):
    """Exact ``(gradient norm, E_P[p])`` for a degree-1 symmetric solution, from the edge-count law."""
    if not sol.edge_count_only:
        raise ArgumentError("exact gradient needs a degree-1 symmetric solution")
    pmf = planted_edge_count_pmf(n, k)
    counts = np.arange(num_slots(n) + 1)
    phi = edge_orbit_feature(counts, n)
    p = sigma_prime(1.0 + sol.orbit_coeffs[0] * phi, sol.delta)
    return abs(float(np.sum(pmf * phi * p))), float(np.sum(pmf * p))


@dataclass
class HardcoreReport:
    delta: float
    converged: bool
    grad_norm: float
    grad_norm_stderr: float
    acceptance_rate: float
    acceptance_stderr: float
    advantage: float
    advantage_stderr: float
    advantage_squared: float
    advantage_squared_stderr: float
    density_bound: float
    samples: int
    validation_samples: int
    seed: int
    baseline: Optional[float] = None

    def to_dict(self):
        return asdict(self)


def hardcore_report(sampler: HardcoreSampler, m: int, seed, validation_size: int = 10_000_000) -> HardcoreReport:
    """Gradient gate, acceptance rate, and the Claim-2.5 advantage of ``P*`` from ``m`` accepted draws."""
    if m < 4 or m % 2:
        raise ArgumentError("m must be even and at least 4")
    seed = resolve_seed(seed)
    sol = sampler.solution
    planted = sampler.planted
    _, _, source = _source_for(sol.orbit or sol.basis, planted, sol.orbit is not None)
    h = sol.orbit_coeffs if sol.orbit is not None else sol.coeffs
    norm, norm_se, _, _, acc, acc_se = gradient_split_sample(h, source, sol.delta, validation_size, seed,
                                                             "report/gradient")
    if sampler.supports_edge_counts:
        feats = lambda size, rng: edge_orbit_feature(sampler.sample_edge_counts(size, rng), sol.n)[:, None]
        est = claim_2_5_estimate(None, sampler, m, seed, name="report/advantage", features=feats)
    elif sol.orbit is not None:
        est = claim_2_5_estimate(sol.orbit, sampler, m, seed, name="report/advantage")
    else:
        est = claim_2_5_estimate(sol.basis, sampler, m, seed, name="report/advantage")
    baseline = None
    if isinstance(planted, PlantedModel):
        baseline = low_degree_advantage_closed_form(planted.n, planted.k, sol.basis.d, sol.basis.mode).value
    return HardcoreReport(sol.delta, bool(sol.converged), norm, norm_se, acc, acc_se, est.estimate, est.stderr,
                          est.squared, est.squared_stderr, 1.0 / acc, m, validation_size, seed, baseline)


def dual_objective_montecarlo(coeffs: np.ndarray, basis: BasisIndex, planted, delta: float, m: int, seed,
                              name: str = "hardcore/objective") -> AdvantageEstimate:
    """``E_P[sigma(1 + g)]`` for one or more coefficient vectors (columns of ``coeffs``)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    cols = coeffs.reshape(coeffs.shape[0], -1)
    seed = resolve_seed(seed)

    def shard(size, rng):
        F = basis.features(planted.sample_batch(size, rng), include_constant=False)
        return Moments().add(sigma(1.0 + F @ cols, delta))

    mom = merge_moments(map_shards(shard, m, seed, name, 4096))
    mean, se = np.asarray(mom.mean), np.asarray(mom.stderr)
    return AdvantageEstimate(mean if mean.size > 1 else float(mean[0]), se if se.size > 1 else float(se[0]), m, seed)
