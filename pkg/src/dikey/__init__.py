"""Device-independent key rates certified by self-testing.

Builds the perturbed-Fourier family of two-basis measurements on a maximally
entangled state, checks the self-testing identities that pin the
eavesdropper's entropy, evaluates Devetak-Winter rates and measures the
distance of the resulting correlations to the local polytope.
"""

from .construction import (
    OverlapMatrix,
    Povm,
    Realization,
    Scenario,
    dilate,
    fourier_basis,
    ideal_realization,
    load_measurements,
    max_entangled,
    overlap_closed_form,
    overlap_direct,
    pauli_x,
    u_epsilon,
    with_key_noise,
)
from .keyrate import (
    ClassicalQuantumState,
    Correlation,
    KeyRateReport,
    born_correlation,
    devetak_winter,
    h_a_given_b,
    h_a_given_e,
    sigma_ae,
)
from .linalg import (
    hermitian_eigen,
    kron,
    partial_trace,
    purify,
    shannon_entropy,
    von_neumann_entropy,
)
from .locality import (
    BellFunctional,
    DistanceReport,
    chsh_functional,
    enumerate_vertices,
    l1_between,
    l1_distance_to_local,
    local_bound,
)
from .selftest import (
    IsometryPair,
    RelationReport,
    build_isometries,
    check_relations,
    isometries_for,
    run_selftest,
    verify_bob_projection,
    verify_matrix_selftest,
    verify_measurement_extraction,
    verify_state_extraction,
)

__version__ = "0.1.0"
