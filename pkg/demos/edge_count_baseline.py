"""
The edge-count test
===================

The simplest detector for a planted clique counts edges.  Its advantage is
known exactly from a binomial mixture, and for large n it approaches
k^2 / (sqrt(pi) n).
"""

import numpy as np

from cliquelab.distinguish import (EDGE_COUNT_TEST, adv_montecarlo, edge_count_advantage_exact,
                                   edge_count_advantage_predicted)
from cliquelab.graphs import NullModel, PlantedModel

# Monte Carlo draws edge counts directly from their exact laws, so no graph is built.
for n, k in [(200, 6), (1000, 15), (4000, 40)]:
    est = adv_montecarlo(EDGE_COUNT_TEST, PlantedModel(n, k), NullModel(n), 200_000, seed=1)
    print(f"n={n:5d} k={k:3d}  MC {est.estimate:.4f} +- {est.stderr:.4f}"
          f"  exact {edge_count_advantage_exact(n, k):.4f}  large-n {edge_count_advantage_predicted(n, k):.4f}")

# Materializing graphs gives the same answer, only slower.
n, k = 60, 5
planted = PlantedModel(n, k)
counts = planted.sample_batch(20_000, np.random.default_rng(2)).edge_counts()
print("mean surplus over N/2:", counts.mean() - n * (n - 1) / 4, "expected:", 0.5 * (n * (n - 1) / 2) * (k / n) ** 2)
