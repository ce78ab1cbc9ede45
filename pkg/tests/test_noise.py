import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cliquelab.errors import ArgumentError
from cliquelab.fourier import Monomial, chi_batch
from cliquelab.graphs import (GraphBatch, ModelParams, PlantedModel, edge_index, num_slots, sample_clique_indicators,
                              sample_null, sample_null_batch, sample_planted_batch)
from cliquelab.noise import (ChainParams, LiftedState, apply_T_montecarlo, eigenvalue, step, step_batch,
                             step_edge_counts, step_lifted, step_lifted_batch)
from cliquelab.streams import stream


def _repeat(G, m):
    return GraphBatch(G.n, np.repeat(G.packed[None, :], m, axis=0))


def test_keep_all_is_identity():
    G = sample_null(20, stream(1, "g"))
    assert step(G, ChainParams(1.0), stream(1, "s")) == G
    x = (np.arange(20) % 2).astype(np.uint8)
    out = step_lifted(LiftedState(x, G), ChainParams(1.0), stream(1, "l"))
    assert out.G == G and np.array_equal(out.x, x)


def test_keep_none_gives_fresh_null_graphs():
    G = sample_null(12, stream(2, "g"))
    out = step_batch(_repeat(G, 200_000), ChainParams(0.0), stream(2, "s"))
    signs = out.signs().astype(np.float64)
    assert abs(signs.mean()) <= 4 / math.sqrt(signs.size)


@pytest.mark.parametrize("pairs,p,value", [([(0, 1)], 0.5, 0.25), ([(0, 1), (1, 2), (2, 3)], 0.178, 0.178**4)])
def test_eigenvalue_examples(pairs, p, value):
    assert eigenvalue(Monomial.from_pairs(pairs, 6), p) == pytest.approx(value, rel=1e-12)


def test_eigenvalue_rejects_bad_p():
    with pytest.raises(ArgumentError):
        eigenvalue(Monomial((), 4), 1.5)
    with pytest.raises(ArgumentError):
        ChainParams(-0.1)


@pytest.mark.parametrize("pairs", [[(0, 1)], [(0, 1), (1, 2)], [(0, 1), (1, 2), (0, 2)], [(0, 1), (2, 3)]])
def test_characters_are_eigenvectors(pairs):
    n, p = 10, 0.6
    S = Monomial.from_pairs(pairs, n)
    G = sample_null(n, stream(3, "eig"))
    start = chi_batch(S, _repeat(G, 1))[0]
    batch = step_batch(_repeat(G, 400_000), ChainParams(p), stream(5, "eig"))
    values = chi_batch(S, batch).astype(np.float64)
    target = start * p ** S.num_vertices
    assert abs(values.mean() - target) <= 4 * values.std() / math.sqrt(values.size)


def test_apply_T_montecarlo_on_an_edge():
    G = sample_null(10, stream(14, "T"))
    est = apply_T_montecarlo(lambda H: float(H.sign(2, 5)), G, ChainParams(0.5), 200_000, seed=14)
    assert abs(est.estimate - 0.25 * G.sign(2, 5)) <= 4 * est.stderr


def test_drop_convention_flips_the_eigenvalue():
    n, p = 8, 0.3
    S = Monomial.from_pairs([(0, 1)], n)
    G = sample_null(n, stream(6, "drop"))
    sign = G.sign(0, 1)
    batch = step_batch(_repeat(G, 400_000), ChainParams(p, drop_convention=True), stream(6, "d"))
    got = sign * chi_batch(S, batch).astype(np.float64).mean()
    assert abs(got - 0.49) < 0.01
    assert abs(got - 0.09) > 0.3


def test_edge_counts_match_full_steps():
    G = sample_null(30, stream(7, "ec"))
    params = ChainParams(0.55)
    fast = step_edge_counts(G, params, 100_000, stream(7, "fast")).astype(np.float64)
    slow = step_batch(_repeat(G, 20_000), params, stream(7, "slow")).edge_counts().astype(np.float64)
    se = math.sqrt(fast.var() / fast.size + slow.var() / slow.size)
    assert abs(fast.mean() - slow.mean()) <= 4 * se
    assert abs(fast.var() - slow.var()) <= 0.1 * slow.var()


def test_edge_counts_at_extremes():
    G = sample_null(15, stream(8, "x"))
    assert np.all(step_edge_counts(G, ChainParams(1.0), 10, stream(8, "a")) == G.edge_count)


def test_null_is_stationary():
    n = 9
    start = sample_null_batch(n, 200_000, stream(9, "s"))
    out = step_batch(start, ChainParams(0.4, permute=True), stream(9, "t"))
    S = Monomial.from_pairs([(0, 1), (1, 2)], n)
    values = chi_batch(S, out).astype(np.float64)
    assert abs(values.mean()) <= 4 / math.sqrt(values.size)


def test_lifted_clique_size_is_binomial():
    n, k, p = 40, 8, 0.5
    params = ModelParams(n, k)
    batch, X = sample_planted_batch(params, 100_000, stream(10, "lift"))
    Y, _ = step_lifted_batch(X, batch, ChainParams(p), stream(10, "step"))
    sizes = Y.sum(axis=1).astype(np.float64)
    mean, var = n * p * k / n, n * p * k / n * (1 - p * k / n)
    assert abs(sizes.mean() - mean) <= 4 * math.sqrt(var / sizes.size)
    assert abs(sizes.var() - var) <= 0.05 * var


def test_lifted_step_keeps_the_clique_planted():
    n = 25
    batch, X = sample_planted_batch(ModelParams(n, 6), 500, stream(11, "keep"))
    Y, H = step_lifted_batch(X, batch, ChainParams(0.7, permute=True), stream(11, "k"))
    bits = H.bits()
    I, J = np.triu_indices(n, 1)
    inside = Y[:, I].astype(bool) & Y[:, J].astype(bool)
    assert np.all(bits[inside] == 1)


def test_chain_transports_planted_to_smaller_clique():
    n, k, p = 30, 6, 0.6
    S = Monomial.from_pairs([(0, 1), (1, 2), (0, 2)], n)
    start, _ = sample_planted_batch(ModelParams(n, k), 300_000, stream(12, "tr"))
    moved = step_batch(start, ChainParams(p), stream(12, "st"))
    direct, _ = sample_planted_batch(ModelParams(n, p * k), 300_000, stream(12, "dir"))
    a = chi_batch(S, moved).astype(np.float64)
    b = chi_batch(S, direct).astype(np.float64)
    assert abs(a.mean() - b.mean()) <= 4 * math.sqrt(a.var() / a.size + b.var() / b.size)
    assert a.mean() == pytest.approx((p * k / n) ** 3, abs=4 * math.sqrt(a.var() / a.size))


def test_large_batches_are_chunked_consistently():
    n = 200
    batch = sample_null_batch(n, 1000, stream(13, "big"))
    out = step_batch(batch, ChainParams(0.7, permute=True), stream(13, "s"))
    assert len(out) == 1000 and out.n == n
    X = sample_clique_indicators(ModelParams(n, 6), 1000, stream(13, "x"))
    Y, H = step_lifted_batch(X, batch, ChainParams(0.7, permute=True), stream(13, "l"))
    assert Y.shape == (1000, n) and len(H) == 1000


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.0, 1.0))
def test_steps_are_seed_deterministic(seed, p):
    G = sample_null(11, stream(seed, "g"))
    assert step(G, ChainParams(p, permute=True), stream(seed, "a")) == step(G, ChainParams(p, permute=True),
                                                                            stream(seed, "a"))


def test_lifted_state_validation():
    with pytest.raises(ArgumentError):
        LiftedState(np.zeros(3, dtype=np.uint8), sample_null(4, stream(1)))
