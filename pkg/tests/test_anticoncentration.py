import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cliquelab import anticoncentration as ac
from cliquelab.checks import random_subspace_element
from cliquelab.distinguish import EDGE_COUNT_TEST, constant_test
from cliquelab.errors import ArgumentError
from cliquelab.fourier import Monomial, chi_biased
from cliquelab.graphs import GraphBatch, sample_null
from cliquelab.noise import LiftedState
from cliquelab.streams import stream


def _single_vertex_factor(p, q):
    # one vertex: y = x with prob p, else 0; average the pq-biased character and divide by the q-biased one
    b = p * q
    chi_b = lambda y: (y - b) / math.sqrt(b * (1 - b))
    chi_q = lambda x: (x - q) / math.sqrt(q * (1 - q))
    return [(p * chi_b(x) + (1 - p) * chi_b(0)) / chi_q(x) for x in (0, 1)]


@pytest.mark.parametrize("p,q", [(0.5, 0.2), (0.3, 0.05), (0.9, 0.4)])
def test_factor_from_one_vertex_enumeration(p, q):
    f0, f1 = _single_vertex_factor(p, q)
    assert f0 == pytest.approx(f1, rel=1e-12)
    assert ac.contraction_factor(0, 1, p, q) == pytest.approx(f0, rel=1e-12)
    assert ac.contraction_factor(3, 2, p, q) == pytest.approx(p**3 * f0**2, rel=1e-12)


def test_worked_factor_values():
    assert ac.contraction_factor(2, 1, 0.5, 0.2) == pytest.approx(1 / 6, abs=1e-12)
    assert ac.contraction_factor_printed(2, 1, 0.5, 0.2) == pytest.approx(0.131762, abs=5e-7)
    assert ac.contraction_bound(2, 1, 0.5) == pytest.approx(0.353553, abs=5e-7)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 8), st.integers(0, 6), st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_factor_limits_and_bound(v, b, p, q):
    assert ac.contraction_factor(v, 0, p, q) == pytest.approx(p**v)
    assert ac.contraction_factor(v, b, 1.0, q) == pytest.approx(1.0)
    assert ac.contraction_factor(v, b, p, q) <= ac.contraction_bound(v, b, p) * (1 + 1e-12)


def test_subspace_element_validation():
    A = Monomial.from_pairs([(0, 1)], 6)
    with pytest.raises(ArgumentError, match="B meets"):
        ac.SubspaceElement(A, (1,), np.ones(4), "W", 0.2)
    with pytest.raises(ArgumentError):
        ac.SubspaceElement(A, (3,), np.ones(3), "W", 0.2)
    with pytest.raises(ArgumentError):
        ac.SubspaceElement(A, (3,), np.ones(4), "V", 0.2)
    w = ac.SubspaceElement(A, (3,), np.ones(4), "W'", 0.2, 0.5)
    assert w.bias == pytest.approx(0.1) and w.on_side("W").bias == 0.2


def test_evaluation_matches_definition():
    n = 7
    A = Monomial.from_pairs([(0, 1), (1, 2)], n)
    r = np.arange(8, dtype=float) - 3
    w = ac.SubspaceElement(A, (4, 6), r, "W", 0.3)
    rng = stream(1, "eval")
    for _ in range(10):
        x = (rng.random(n) < 0.5).astype(np.uint8)
        G = sample_null(n, rng)
        want = G.sign(0, 1) * G.sign(1, 2) * chi_biased([4, 6], x, 0.3) * r[x[0] + 2 * x[1] + 4 * x[2]]
        assert ac.eval_subspace_element(w, LiftedState(x, G)) == pytest.approx(want, rel=1e-12)


def test_contraction_check_on_random_elements():
    rng = stream(2, "elements")
    for i in range(3):
        w = random_subspace_element(20, 0.5, 0.2, rng)
        rep = ac.claim_6_5_check(w, 0.5, 0.2, 20_000, seed=i, probes=8)
        assert rep.passed, rep.to_dict()


def test_norm_ratio_monte_carlo_agrees():
    A = Monomial.from_pairs([(0, 1), (2, 3)], 10)
    w = ac.SubspaceElement(A, (5,), stream(3, "r").standard_normal(16), "W'", 0.3, 0.6)
    rep = ac.claim_6_5_check(w, 0.6, 0.3, 2_000, seed=3, probes=2, norm_samples=400_000)
    assert abs(rep.mc_norm_ratio - rep.norm_ratio) <= 4 * rep.mc_norm_ratio_stderr
    assert rep.norm_ratio <= rep.bound


def test_anticoncentration_of_rademacher_sum():
    f = lambda X: (2.0 * X - 1.0).sum(axis=1)
    rep = ac.anticonc_estimate(f, ac.ProductSampler(10), 0.1, 200_000, seed=4)
    exact = 1 - math.comb(10, 5) / 1024
    assert abs(rep.prob_estimate - exact) <= 4 * rep.prob_stderr
    assert abs(rep.second_moment - 10) <= 4 * rep.second_moment_stderr
    assert rep.paley_zygmund_floor(0.01) <= exact


def test_anticoncentration_degenerate_and_bad_args():
    rep = ac.anticonc_estimate(lambda X: np.zeros(len(X)), ac.ProductSampler(4), 0.5, 1_000, seed=5)
    assert rep.degenerate and rep.prob_estimate == 0.0
    with pytest.raises(ArgumentError):
        ac.anticonc_estimate(lambda X: X[:, 0], ac.ProductSampler(4), 0.0, 100, seed=5)


def test_cube_helpers():
    pts = ac.cube_points(3)
    assert pts.shape == (8, 3) and np.array_equal(pts[5], [1, 0, 1])
    w = ac.cube_weights(pts, 0.2)
    assert w.sum() == pytest.approx(1.0)
    subsets = ac.subsets_up_to(4, 2)
    assert len(subsets) == 1 + 4 + 6
    chars = ac.character_matrix(ac.cube_points(4), subsets, 0.3)
    gram = chars.T @ (ac.cube_weights(ac.cube_points(4), 0.3)[:, None] * chars)
    assert np.allclose(gram, np.eye(len(subsets)), atol=1e-12)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_bonami_suite(d):
    rep = ac.hypercontract_suite("bonami", 8, d, 30, seed=d)
    assert rep.passed
    assert rep.worst_ratio <= math.sqrt(3) ** d


@pytest.mark.parametrize("d", [1, 2])
def test_biased_symmetric_suite(d):
    rep = ac.hypercontract_suite("biased_symmetric", 10, d, 30, seed=d, bias=0.3)
    assert rep.passed and rep.constant == 8.0**d


def test_hypercontract_suite_rejects_bad_modes():
    with pytest.raises(ArgumentError):
        ac.hypercontract_suite("other", 4, 1, 1, 0)
    with pytest.raises(ArgumentError):
        ac.hypercontract_suite("biased_symmetric", 4, 3, 1, 0, bias=0.3)
    with pytest.raises(ArgumentError):
        ac.hypercontract_suite("bonami", 4, 1, 1, 0, bias=0.3)


def test_survival_experiment_degenerate_function():
    zero = constant_test(0.0)
    rep = ac.lemma_6_2_experiment(zero, 20, 3, 0.7, 1, 100, seed=6)
    assert rep.degenerate


def test_survival_experiment_runs_on_edge_count_test():
    rep = ac.lemma_6_2_experiment(EDGE_COUNT_TEST, 30, 4, 0.8, 1, 400, seed=7, y_count=32)
    assert rep.norm_f == pytest.approx(1.0)
    assert 0.0 <= rep.survival_ratio <= 1.0 + 4 * rep.norm_Tf_stderr
    assert rep.survival_threshold == pytest.approx(0.8)
    assert 0.0 <= rep.anticonc_prob <= 1.0
