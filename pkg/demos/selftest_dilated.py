"""
Self-testing through junk and local unitaries
=============================================

Hide the ideal strategy inside larger spaces with a random junk state and
random local unitaries, then let the isometries dig it back out.
"""

from dikey import devetak_winter, dilate, ideal_realization, isometries_for, verify_state_extraction

real = dilate(ideal_realization(3, 0.4), 2, 2, seed=11)
print("local dimensions:", real.dim_a, real.dim_b)

# The isometries are built from Alice's and Bob's operators only.
iso = isometries_for(real)
ext = verify_state_extraction(iso, real.state)
print("distance to phi_d (x) junk:", ext.residual)
print("junk state lives on", ext.junk_state.shape[0], "dimensions")

# Eve holds the purification of the whole dilated state and still learns nothing.
rep = devetak_winter(real)
print("H(A|E) =", rep.h_a_given_e, " product-form residual =", rep.product_form_residual)

# Using the wrong dilation seed breaks the extraction.
wrong = isometries_for(dilate(ideal_realization(3, 0.4), 2, 2, seed=12))
print("residual with mismatched isometries:", verify_state_extraction(wrong, real.state).residual)
