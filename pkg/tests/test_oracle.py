import math

import numpy as np
import pytest

from cliquelab.errors import ResourceError
from cliquelab.fourier import Monomial, Polynomial, enumerate_monomials
from cliquelab.graphs import ModelParams, edge_index, num_slots
from cliquelab.noise import ChainParams
from cliquelab import oracle
from cliquelab.streams import stream


def test_planted_weights_normalized():
    dist = oracle.exact_planted_distribution(ModelParams(4, 1.5))
    assert np.all(dist.weights >= 0)
    assert abs(math.fsum(dist.weights) - 1.0) <= 1e-12


def test_k_zero_is_uniform():
    dist = oracle.exact_planted_distribution(ModelParams(4, 0))
    assert np.allclose(dist.weights, 2.0 ** -6, rtol=0, atol=1e-15)


def test_forced_clique_at_n2():
    dist = oracle.exact_planted_distribution(ModelParams(2, 2))
    # graph index 0 has its single slot at sign +1
    assert dist.weights[0] == pytest.approx(1.0, abs=1e-15)
    assert dist.weights[1] == 0.0


def test_exact_expectations():
    planted = oracle.exact_planted_distribution(ModelParams(4, 1))
    null = oracle.exact_null_distribution(4)
    edge = lambda G: G.sign(0, 1)
    assert oracle.exact_expectation(lambda G: 1.0, planted) == pytest.approx(1.0, abs=1e-12)
    assert oracle.exact_expectation(edge, planted) == pytest.approx(0.0625, abs=1e-12)
    assert oracle.exact_expectation(edge, null) == 0.0


@pytest.mark.parametrize("n,k,d,value", [(4, 1, 1, 0.153093108923949), (4, 0, 2, 0.0), (4, 1, 0, 0.0)])
def test_exact_low_degree_optimum(n, k, d, value):
    assert oracle.exact_low_degree_optimum(ModelParams(n, k), d) == pytest.approx(value, abs=1e-9)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_degree_one_optimum_identity(n):
    k = 0.7 * n / 2
    q = k / n
    got = oracle.exact_low_degree_optimum(ModelParams(n, k), 1)
    assert abs(got - math.sqrt(num_slots(n)) * q * q) <= 1e-12


def test_optimum_monotone_in_degree():
    params = ModelParams(4, 1.3)
    values = [oracle.exact_low_degree_optimum(params, d) for d in range(0, 7)]
    assert all(b >= a - 1e-15 for a, b in zip(values, values[1:]))


def test_cap_enforced():
    with pytest.raises(ResourceError, match="cap"):
        oracle.exact_planted_distribution(ModelParams(6, 1))
    assert oracle.exact_null_distribution(6, cap=6).weights.size == 1 << 15


def _char_table(pairs, n):
    S = Monomial.from_pairs(pairs, n)
    return oracle.function_table(lambda G: float(np.prod([G.sign(i, j) for i, j in pairs])), n), S


@pytest.mark.parametrize("pairs,factor", [([(0, 1)], 0.25), ([(0, 1), (1, 2), (0, 2)], 0.125), ([], 1.0)])
def test_apply_T_eigenvalues(pairs, factor):
    table, _ = _char_table(pairs, 4)
    assert np.allclose(oracle.exact_apply_T(table, 4, 0.5), factor * table, atol=1e-12)


@pytest.mark.parametrize("p", [0.0, 0.3, 0.9, 1.0])
@pytest.mark.parametrize("n", [3, 4])
def test_spectral_and_direct_routes_agree(n, p):
    table = stream(11, f"T/{n}").standard_normal(1 << num_slots(n))
    spectral = oracle.exact_apply_T(table, n, p)
    direct = oracle.exact_apply_T_direct(table, n, ChainParams(p))
    assert np.max(np.abs(spectral - direct)) <= 1e-10


def test_permuted_chain_is_symmetrized_operator():
    table = stream(12, "Tsym").standard_normal(1 << num_slots(4))
    a = oracle.exact_apply_T(table, 4, 0.6, symmetrize=True)
    b = oracle.exact_apply_T_direct(table, 4, ChainParams(0.6, permute=True))
    assert np.max(np.abs(a - b)) <= 1e-10


def test_drop_convention_breaks_eigenvalues():
    table, _ = _char_table([(0, 1)], 4)
    wrong = oracle.exact_apply_T_direct(table, 4, ChainParams(0.3, drop_convention=True))
    assert not np.allclose(wrong, 0.09 * table)
    assert np.allclose(wrong, 0.49 * table)


def test_projection_and_fourier_round_trip():
    table = stream(13, "proj").standard_normal(64)
    assert np.allclose(oracle.from_fourier(oracle.fourier_coefficients(table, 4), 4), table)
    basis = enumerate_monomials(4, 1)
    proj = oracle.exact_projection(table, 4, basis)
    coeffs = oracle.fourier_coefficients(proj, 4)
    keep = {oracle.mask_of(S) for S in basis}
    assert all(abs(c) < 1e-12 for m, c in enumerate(coeffs) if m not in keep)


def test_polynomial_tables():
    basis = enumerate_monomials(4, 2)
    c = stream(14, "pt").standard_normal(len(basis))
    f = Polynomial(basis, c)
    coeffs = oracle.fourier_coefficients(oracle.function_table(f, 4), 4)
    for S, value in zip(basis, c):
        assert coeffs[oracle.mask_of(S)] == pytest.approx(value, abs=1e-12)
