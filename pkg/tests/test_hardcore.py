import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cliquelab.distinguish import low_degree_advantage_closed_form
from cliquelab.errors import ArgumentError, HardnessGateError
from cliquelab.fourier import OrbitBasis, enumerate_monomials, edge_orbit_feature
from cliquelab.graphs import NullModel, PlantedModel
from cliquelab.hardcore import (DualSolution, HardcoreSampler, SGDConfig, build_hardcore, exact_edge_gradient,
                                hardcore_report, mild_hardness_gate, round_mantissa, round_solution, sigma,
                                sigma_prime, sigma_second, sgd_optimize)
from cliquelab.streams import stream

SMALL = SGDConfig(batch_size=256, max_iters=100_000, check_every=10_000, validation_size=10_000_000)


def test_sigma_anchor_values():
    assert sigma(0.0, 0.1) == pytest.approx(0.1, abs=1e-15)
    assert sigma_prime(0.0, 0.1) == pytest.approx(0.5, abs=1e-15)
    assert sigma_prime(0.1, 0.1) == pytest.approx(2 / 3, abs=1e-15)
    assert sigma_second(0.0, 0.1) == pytest.approx(0.25 * math.log(2) / 0.1, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(-50, 50), st.floats(1e-3, 2.0))
def test_sigma_envelope(t, delta):
    s = float(sigma(t, delta))
    assert max(t, 0.0) - 1e-12 <= s <= max(t, 0.0) + delta + 1e-12
    assert 0.0 <= float(sigma_prime(t, delta)) <= 1.0


def test_sigma_prime_is_the_derivative():
    t = np.linspace(-1, 1, 41)
    h = 1e-6
    numeric = (sigma(t + h, 0.2) - sigma(t - h, 0.2)) / (2 * h)
    assert np.allclose(numeric, sigma_prime(t, 0.2), atol=1e-8)
    with pytest.raises(ArgumentError):
        sigma(0.0, 0.0)


def test_round_mantissa():
    x = np.array([1 / 3, -math.pi, 1e-300, 0.0, 12345.678])
    r = round_mantissa(x, 48)
    assert np.all(np.abs(r - x) <= np.abs(x) * 2.0**-48)
    assert np.array_equal(round_mantissa(r, 48), r)


def _covering_count_bruteforce(s, v):
    pairs = list(itertools.combinations(range(v), 2))
    return sum(1 for E in itertools.combinations(pairs, s) if len({u for e in E for u in e}) == v)


def test_gate_value_from_bruteforce_counts():
    n, k, D = 200, 3, 4
    q = k / n
    r2 = sum(math.comb(n, v) * _covering_count_bruteforce(s, v) * q ** (2 * v)
             for s in range(1, D + 1) for v in range(2, 2 * s + 1))
    eps, c, ok = mild_hardness_gate(n, k, 1)
    assert eps == pytest.approx(math.sqrt(r2), rel=1e-12)
    assert eps == pytest.approx(0.032759132971015244, rel=1e-12)
    assert c == pytest.approx(math.sqrt(3)) and ok
    assert not mild_hardness_gate(n, k, 1, c=9)[2]


def test_gate_refuses_easy_parameters():
    with pytest.raises(HardnessGateError):
        build_hardcore(PlantedModel(50, 12), 1, 0.01)


def test_delta_above_baseline_gives_zero_solution():
    planted = PlantedModel(100, 2)
    baseline = low_degree_advantage_closed_form(100, 2, 1).value
    sampler = build_hardcore(planted, 1, baseline * 1.5, seed=1)
    assert np.all(sampler.solution.coeffs == 0) and sampler.solution.converged
    acc = sampler.acceptance(planted.sample_batch(10, stream(1, "a")))
    assert np.allclose(acc, sigma_prime(1.0, baseline * 1.5), rtol=0, atol=1e-15)


@pytest.fixture(scope="module")
def small_sampler():
    return build_hardcore(PlantedModel(80, 2), 1, 0.01, config=SMALL, seed=3)


def test_sgd_reaches_the_gradient_gate(small_sampler):
    sol = small_sampler.solution
    assert sol.converged
    exact, accept = exact_edge_gradient(sol, 80, 2)
    assert exact <= sol.delta / 3
    assert abs(sol.grad_norm - exact) <= 4 * sol.grad_norm_stderr + 1e-4
    assert 0.5 < accept <= 1.0


def test_edge_count_and_graph_samplers_agree(small_sampler):
    counts = small_sampler.sample_edge_counts(100_000, stream(4, "c")).astype(np.float64)
    graphs = small_sampler.sample_batch(5_000, stream(4, "g")).edge_counts().astype(np.float64)
    se = math.sqrt(counts.var() / counts.size + graphs.var() / graphs.size)
    assert abs(counts.mean() - graphs.mean()) <= 4 * se


def test_report_shrinks_the_advantage(small_sampler):
    rep = hardcore_report(small_sampler, 200_000, seed=5, validation_size=200_000)
    assert rep.converged
    assert rep.advantage <= rep.baseline
    assert rep.density_bound == pytest.approx(1 / rep.acceptance_rate)


def test_save_and_load_round_trip(small_sampler, tmp_path):
    sol = small_sampler.solution
    sidecar = sol.save(tmp_path / "g.poly")
    assert sidecar.exists()
    back = DualSolution.load(tmp_path / "g.poly")
    assert np.array_equal(back.coeffs, sol.coeffs)
    assert back.delta == sol.delta and back.converged == sol.converged
    assert np.array_equal(back.orbit_coeffs, sol.orbit_coeffs)


def test_rounding_preserves_values(small_sampler):
    sol = small_sampler.solution
    again = round_solution(sol, 48)
    assert np.array_equal(again.orbit_coeffs, sol.orbit_coeffs)


def test_unsymmetric_optimizer_on_tiny_graphs():
    basis = enumerate_monomials(6, 1)
    planted = PlantedModel(6, 1)
    cfg = SGDConfig(batch_size=128, max_iters=4_000, check_every=1_000, validation_size=100_000)
    sol = sgd_optimize(basis, planted, 0.05, cfg, seed=6, symmetric=False)
    assert sol.orbit is None and sol.coeffs.shape == (15,)
    assert sol.converged
    # by symmetry the optimum puts equal weight on every edge
    assert np.std(sol.coeffs) <= 0.1 * abs(np.mean(sol.coeffs)) + 0.02


def test_dual_solution_validation():
    basis = enumerate_monomials(5, 1)
    with pytest.raises(ArgumentError):
        DualSolution(basis, np.zeros(3), 0.1)
    with pytest.raises(ArgumentError):
        DualSolution(basis, np.zeros(10), 0.0)
