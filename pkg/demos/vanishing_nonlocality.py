"""
Key from almost local correlations
==================================

As eps shrinks, Alice's two measurements merge and the correlation slides
toward a local one. The certified rate stays at log2 d the whole way.
"""

import numpy as np

from dikey import born_correlation, devetak_winter, ideal_realization, l1_between, l1_distance_to_local

# p_0 is local: with eps = 0 both of Alice's settings are the same measurement.
d = 2
p0 = born_correlation(ideal_realization(d, 0.0))
print("LP distance of p_0 to the local set:", l1_distance_to_local(p0).distance)

# The l1 gap to p_0 bounds the distance to the local set from above.
print("\n   eps        l1(p_eps, p_0)   LP distance   rate")
for eps in np.logspace(-1, -6, 6):
    real = ideal_realization(d, eps)
    pe = born_correlation(real)
    print(f"{eps:9.1e}   {l1_between(pe, p0):14.6e}   {l1_distance_to_local(pe).distance:11.3e}"
          f"   {devetak_winter(real).dw_rate:.6f}")

# The LP column is zero because Bob only has his key setting here. A
# positive lower bound needs extra Bob measurements, which can be supplied
# through the bob_extra argument (see chsh_lp.py for the LP on a CHSH box).
