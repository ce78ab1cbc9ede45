import math

import numpy as np
import pytest

from cliquelab import amplify
from cliquelab.distinguish import EDGE_COUNT_TEST, TestFunction, adv_montecarlo, constant_test
from cliquelab.errors import ArgumentError
from cliquelab.fourier import Monomial, enumerate_monomials, edge_orbit_feature
from cliquelab.graphs import NullModel, PlantedModel, edge_index, sample_null, sample_null_batch
from cliquelab.noise import ChainParams
from cliquelab.streams import stream

EDGE01 = TestFunction(fn=lambda G: G.sign(0, 1), label="chi01")


@pytest.mark.parametrize("d,p_exp,eps_exp,q_exp", [(4, -0.1, -0.2, 8.0), (100, -0.1, -1.0, 200.0), (1, -0.1, -0.1, 2.0)])
def test_derive_params_exponents(d, p_exp, eps_exp, q_exp):
    r = amplify.derive_params(0.1, 0.2, d, 1000)
    assert r.p_exponent == pytest.approx(p_exp)
    assert r.eps_exponent == pytest.approx(eps_exp)
    assert r.q_exponent == pytest.approx(q_exp)
    assert r.p == pytest.approx(1000**p_exp)
    assert r.log10_q == pytest.approx(3 * q_exp)


def test_gamma_is_carried_in_log_space():
    r = amplify.derive_params(0.1, 0.2, 1, 200)
    assert r.gamma_exponent == pytest.approx(1600.0)
    assert r.log10_gamma == pytest.approx(1600 * amplify.LOG10_ANTICONC_C)
    assert r.log10_gamma < -50_000
    assert math.isfinite(r.log10_delta_thm)


@pytest.mark.parametrize("alpha,beta", [(0.2, 0.2), (0.3, 0.2), (0.0, 0.2)])
def test_derive_params_rejects_bad_exponents(alpha, beta):
    with pytest.raises(ArgumentError):
        amplify.derive_params(alpha, beta, 1, 100)


def test_fit_of_constant_test():
    basis = enumerate_monomials(6, 1)
    fit = amplify.fit_projection(constant_test(1.0), basis, 50_000, seed=1)
    assert fit.chat[0] == 1.0
    assert np.all(np.abs(fit.chat[1:]) <= 4 * fit.stderr[1:] + 1e-12)


def test_fit_recovers_a_character():
    basis = enumerate_monomials(6, 1)
    fit = amplify.fit_projection(EDGE01, basis, 50_000, seed=2)
    e = basis.index_of(Monomial((edge_index(0, 1, 6),), 6))
    assert fit.chat[e] == 1.0
    rest = np.delete(fit.chat, [0, e])
    assert np.all(np.abs(rest) <= 4 * np.delete(fit.stderr, [0, e]))


def test_symmetric_fit_of_edge_count_test():
    n = 40
    basis = enumerate_monomials(n, 1)
    fit = amplify.fit_projection(EDGE_COUNT_TEST, basis, 400_000, seed=3, symmetric=True)
    assert fit.edge_count_only
    # E_N[phi * sign(phi)] = E|phi| which tends to sqrt(2/pi)
    assert fit.chat[1] == pytest.approx(math.sqrt(2 / math.pi), abs=0.03)
    G = sample_null(n, stream(3, "g"))
    batch = sample_null_batch(n, 50, stream(3, "b"))
    assert np.allclose(fit.f_plus(batch), fit.f_plus_from_edge_counts(batch.edge_counts()))
    assert fit.per_monomial().shape == (len(basis),)


def test_C_vanishes_when_A_is_low_degree():
    n = 8
    basis = enumerate_monomials(n, 1)
    fit = amplify.fit_projection(EDGE01, basis, 100_000, seed=4)
    G = sample_null(n, stream(4, "x"))
    C, se = amplify.estimate_C(G, EDGE01, fit, ChainParams(0.5), 20_000, stream(4, "c"))
    assert abs(C) <= 4 * se + 0.02


def test_threshold_extremes():
    n = 20
    basis = enumerate_monomials(n, 1)
    fit = amplify.fit_projection(EDGE_COUNT_TEST, basis, 50_000, seed=5, symmetric=True)
    chain = ChainParams(0.7, permute=True)
    never = amplify.build_test_B(EDGE_COUNT_TEST, fit, chain, math.inf, 16, seed=5)
    always = amplify.build_test_B(EDGE_COUNT_TEST, fit, chain, 0.0, 16, seed=5)
    batch = sample_null_batch(n, 40, stream(5, "b"))
    assert np.all(never.batch(batch) == -1.0)
    assert np.all(always.batch(batch) == 1.0)
    with pytest.raises(ArgumentError):
        amplify.build_test_B(EDGE_COUNT_TEST, fit, chain, -1.0, 16, seed=5)
    adv = adv_montecarlo(never, PlantedModel(n, 4), NullModel(n), 200, seed=5)
    assert adv.estimate == 0.0


def test_paired_and_independent_estimates_agree():
    n, k = 24, 5
    basis = enumerate_monomials(n, 1)
    fit = amplify.fit_projection(EDGE_COUNT_TEST, basis, 100_000, seed=6, symmetric=True)
    chain = ChainParams(0.7, permute=True)
    rng = stream(6, "pilot")
    pilot = amplify.estimate_C_batch(sample_null_batch(n, 300, rng), EDGE_COUNT_TEST, fit, chain, 32, rng)
    B = amplify.build_test_B(EDGE_COUNT_TEST, fit, chain, float(np.quantile(np.abs(pilot), 0.7)), 32, seed=6)
    planted = PlantedModel(n, k)
    paired = amplify.paired_advantage(B, planted, 4_000, seed=6)
    indep = adv_montecarlo(B, planted, NullModel(n), 4_000, seed=7, shard_size=1024)
    assert abs(paired.signed - indep.signed) <= 4 * math.hypot(paired.stderr, indep.stderr)
    assert paired.stderr < indep.stderr


def test_chained_sampler_transports_clique_size():
    n, k, p = 30, 6, 0.5
    sampler = amplify.ChainedSampler(PlantedModel(n, k), ChainParams(p, permute=True))
    a = sampler.sample_batch(40_000, stream(8, "a")).edge_counts().astype(np.float64)
    b = PlantedModel(n, p * k).sample_edge_counts(200_000, stream(8, "b")).astype(np.float64)
    assert abs(a.mean() - b.mean()) <= 4 * math.sqrt(a.var() / a.size + b.var() / b.size)
