"""
The CHSH polytope by linear programming
=======================================

Local bound by enumeration and l1 distance to the local set by a revised
simplex with Bland's rule.
"""

import itertools

import numpy as np

from dikey import Correlation, Scenario, chsh_functional, l1_distance_to_local, local_bound

f = chsh_functional()
print("CHSH local bound:", local_bound(f))

s = Scenario.uniform(2, 2, 2, 2)


def box(visibility):
    """Isotropic mixture of the Tsirelson-optimal correlation with white noise."""
    v = np.zeros(s.shape)
    for x, y, a, b in itertools.product(range(2), repeat=4):
        v[x, y, a, b] = 0.25 * (1 + visibility * (-1) ** (a + b + x * y) / np.sqrt(2))
    return Correlation(s, v)


# The distance drops to zero once the CHSH value falls to the local bound,
# i.e. below visibility 1/sqrt(2).
for vis in (1.0, 0.9, 0.8, 1 / np.sqrt(2), 0.6):
    p = box(vis)
    rep = l1_distance_to_local(p)
    print(f"visibility {vis:.3f}  CHSH {f.value(p):.4f}  distance {rep.distance:.4e}  "
          f"({rep.iterations} pivots, {len(rep.weights)} vertices in the witness)")
