"""
How one lifted step contracts the biased subspace
=================================================

For w = G_A * chi_B * r(x_{V(A)}) one lifted step multiplies by
p^{|V(A)|} (p(1-q)/(1-pq))^{|B|/2}.  Monte Carlo from fixed states tells
this apart from the closed form with (1-p) in place of (1-q).
"""

import numpy as np

from cliquelab.anticoncentration import (SubspaceElement, claim_6_5_check, contraction_bound, contraction_factor,
                                         contraction_factor_printed)
from cliquelab.fourier import Monomial

p, q, n = 0.5, 0.2, 30
w = SubspaceElement(Monomial.from_pairs([(0, 1)], n), (3,), np.ones(4), "W'", q, p)
rep = claim_6_5_check(w, p, q, 200_000, seed=5, probes=10)
ratios = np.array(rep.probe_estimates) / (np.array(rep.probe_expected) / rep.factor)
print(f"factor {contraction_factor(2, 1, p, q):.6f}  with (1-p): {contraction_factor_printed(2, 1, p, q):.6f}"
      f"  bound {contraction_bound(2, 1, p):.6f}")
print(f"measured per-probe factor {ratios.mean():.4f} +- {ratios.std(ddof=1) / np.sqrt(len(ratios)):.4f}")
print(f"probes within 4 stderr of the factor: {rep.probes_within_4se}/{rep.probes}")
