"""
The vertex-resampling chain
===========================

One step keeps each vertex with probability p and redraws every edge that
touches a dropped vertex.  Characters are eigenvectors with eigenvalue
p^{|V(S)|}, and a planted clique of size k becomes one of size about pk.
"""

import numpy as np

from cliquelab.fourier import Monomial, chi_batch
from cliquelab.graphs import GraphBatch, ModelParams, sample_null, sample_planted_batch
from cliquelab.noise import ChainParams, step_batch
from cliquelab.streams import stream

n, p, m = 10, 0.6, 200_000
G = sample_null(n, stream(1, "start"))
copies = GraphBatch(n, np.repeat(G.packed[None, :], m, axis=0))
after = step_batch(copies, ChainParams(p), stream(1, "step"))

for name, pairs in [("edge", [(0, 1)]), ("path", [(0, 1), (1, 2)]), ("triangle", [(0, 1), (1, 2), (0, 2)]),
                    ("matching", [(0, 1), (2, 3)])]:
    S = Monomial.from_pairs(pairs, n)
    start = chi_batch(S, copies[:1])[0]
    values = chi_batch(S, after) * start
    se = values.std() / np.sqrt(m)
    print(f"{name:9s} |V|={S.num_vertices}  measured {values.mean():.4f} +- {se:.4f}  p^|V| = {p ** S.num_vertices:.4f}")

# Clique transport: the lifted clique indicator thins to Bin(n, p q).
_, X = sample_planted_batch(ModelParams(40, 8), 50_000, stream(2, "x"))
Z = stream(2, "z").random(X.shape) < p
print("clique size before", X.sum(1).mean(), "after", (X & Z).sum(1).mean(), "expected", p * 8)
