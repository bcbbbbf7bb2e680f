import itertools

import numpy as np
import pytest

from dikey.linalg import (
    DimensionError,
    NotHermitianError,
    NotPSDError,
    NormalizationError,
    binary_entropy,
    hermitian_eigen,
    kron,
    partial_trace,
    projector,
    purification_factor,
    purify,
    random_density_matrix,
    shannon_entropy,
    von_neumann_entropy,
)


def rand_c(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def rand_herm(rng, n):
    a = rand_c(rng, n, n)
    return a + a.conj().T


def test_kron_identity_and_basis():
    assert np.allclose(kron(np.eye(2), np.eye(2)), np.eye(4))
    m = kron(np.diag([1, 0]), np.diag([0, 1]))
    expected = np.zeros((4, 4))
    expected[1, 1] = 1
    assert np.array_equal(m, expected)


def test_kron_index_formula():
    rng = np.random.default_rng(1)
    a, b = rand_c(rng, 2, 3), rand_c(rng, 3, 2)
    m = kron(a, b)
    for i, j, k, l in itertools.product(range(2), range(3), range(3), range(2)):
        assert m[i * 3 + k, j * 2 + l] == pytest.approx(a[i, j] * b[k, l], abs=1e-14)


def test_kron_trace_and_associativity():
    rng = np.random.default_rng(2)
    for _ in range(20):
        a, b, c = rand_c(rng, 2, 2), rand_c(rng, 3, 3), rand_c(rng, 2, 2)
        assert abs(np.trace(kron(a, b)) - np.trace(a) * np.trace(b)) < 1e-12
        assert np.abs(kron(kron(a, b), c) - kron(a, kron(b, c))).max() < 1e-12


def test_partial_trace_product_state():
    rng = np.random.default_rng(3)
    ra, rb = random_density_matrix(3, rng), rand_herm(rng, 2)
    out = partial_trace(kron(ra, rb), [3, 2], keep=[0])
    assert np.abs(out - np.trace(rb) * ra).max() < 1e-12


@pytest.mark.parametrize("d", [2, 3, 5])
def test_partial_trace_max_entangled_by_summation(d):
    phi = np.zeros(d * d, dtype=complex)
    for j in range(d):
        phi[j * d + j] = 1 / np.sqrt(d)
    rho = projector(phi)
    # direct summation: (rho_A)_{ij} = sum_k rho[(i,k),(j,k)]
    oracle = np.zeros((d, d), dtype=complex)
    for i, j, k in itertools.product(range(d), repeat=3):
        oracle[i, j] += rho[i * d + k, j * d + k]
    assert np.abs(partial_trace(rho, [d, d], [0]) - oracle).max() < 1e-12
    assert np.abs(oracle - np.eye(d) / d).max() < 1e-12


def test_partial_trace_everything_and_errors():
    rng = np.random.default_rng(4)
    m = rand_c(rng, 6, 6)
    full = partial_trace(m, [2, 3], keep=[])
    assert full.shape == (1, 1)
    assert abs(full[0, 0] - np.trace(m)) < 1e-12
    with pytest.raises(DimensionError):
        partial_trace(m, [2, 2], keep=[0])


def test_partial_trace_composition():
    rng = np.random.default_rng(5)
    dims = [2, 3, 2]
    rho = random_density_matrix(12, rng)
    joint = partial_trace(rho, dims, keep=[0])
    step = partial_trace(partial_trace(rho, dims, keep=[0, 1]), [2, 3], keep=[0])
    assert np.abs(joint - step).max() < 1e-12
    middle = partial_trace(rho, dims, keep=[1])
    step = partial_trace(partial_trace(rho, dims, keep=[1, 2]), [3, 2], keep=[0])
    assert np.abs(middle - step).max() < 1e-12


@pytest.mark.parametrize("method", ["jacobi", "lapack"])
def test_eigen_known_spectra(method):
    s = hermitian_eigen(np.diag([3.0, 1.0, 2.0]), method=method)
    assert np.allclose(s.eigenvalues, [3, 2, 1], atol=1e-12)
    s = hermitian_eigen(np.array([[0, 1], [1, 0]]), method=method)
    assert np.allclose(s.eigenvalues, [1, -1], atol=1e-12)


@pytest.mark.parametrize("method", ["jacobi", "lapack"])
def test_eigen_random_hermitian(method):
    rng = np.random.default_rng(6)
    for n in (1, 2, 6, 9):
        m = rand_herm(rng, n)
        s = hermitian_eigen(m, method=method)
        w, v = s.eigenvalues, s.eigenvectors
        norm = np.linalg.norm(m, 2)
        assert abs(w.sum() - np.trace(m).real) < 1e-9 * max(1, norm)
        assert np.all(np.diff(w) <= 1e-12)
        assert np.abs(v.conj().T @ v - np.eye(n)).max() < 1e-9
        for i in range(n):
            assert np.linalg.norm(m @ v[:, i] - w[i] * v[:, i]) <= 1e-9 * norm
        assert np.abs(m - (v * w) @ v.conj().T).max() <= 1e-9 * norm


def test_jacobi_matches_lapack():
    rng = np.random.default_rng(7)
    for _ in range(10):
        m = rand_herm(rng, 7)
        a = hermitian_eigen(m, method="jacobi").eigenvalues
        b = hermitian_eigen(m, method="lapack").eigenvalues
        assert np.abs(a - b).max() < 1e-10


def test_eigen_rejects_non_hermitian():
    with pytest.raises(NotHermitianError):
        hermitian_eigen(np.array([[0, 1], [0, 0]]))


def test_von_neumann_values():
    assert von_neumann_entropy(projector([1, 1j]) / 2) == pytest.approx(0, abs=1e-12)
    for d in (2, 3, 7):
        assert von_neumann_entropy(np.eye(d) / d) == pytest.approx(np.log2(d), abs=1e-12)
    # 0.5*1 + 2*0.25*2 = 1.5
    assert von_neumann_entropy(np.diag([0.5, 0.25, 0.25])) == pytest.approx(1.5, abs=1e-12)


def test_von_neumann_clamps_roundoff_but_rejects_negativity():
    assert von_neumann_entropy(np.diag([1 + 5e-8, -5e-8])) == pytest.approx(0, abs=1e-6)
    with pytest.raises(NotPSDError):
        von_neumann_entropy(np.diag([1.1, -0.1]))


def test_von_neumann_additive():
    rng = np.random.default_rng(8)
    for _ in range(25):
        a = random_density_matrix(2, rng)
        b = random_density_matrix(3, rng, rank=2)
        lhs = von_neumann_entropy(kron(a, b))
        assert lhs == pytest.approx(von_neumann_entropy(a) + von_neumann_entropy(b), abs=1e-8)


def test_shannon_values():
    assert shannon_entropy([1, 0, 0, 0]) == 0
    assert shannon_entropy(np.full(5, 0.2)) == pytest.approx(np.log2(5), abs=1e-12)
    # 0.75*log2(4/3) + 0.25*2
    assert shannon_entropy([0.75, 0.25]) == pytest.approx(0.8112781244591328, abs=1e-12)
    assert binary_entropy(0.1) == pytest.approx(0.4689955935892812, abs=1e-12)
    with pytest.raises(NormalizationError):
        shannon_entropy([0.5, 0.6])
    with pytest.raises(NormalizationError):
        shannon_entropy([1.1, -0.1])


def test_purify_pure_and_mixed():
    v = np.array([0.6, 0.8j])
    psi = purify(projector(v))
    assert psi.size == 2
    assert abs(abs(np.vdot(v, psi)) - 1) < 1e-12

    psi = purify(np.eye(2) / 2)
    assert psi.size == 4
    reduced = partial_trace(projector(psi), [2, 2], [1])
    assert np.abs(reduced - np.eye(2) / 2).max() < 1e-12


def test_purify_round_trip():
    rng = np.random.default_rng(9)
    for _ in range(10):
        rho = random_density_matrix(4, rng, rank=3)
        psi = purify(rho)
        assert psi.size == 12
        assert np.abs(partial_trace(projector(psi), [4, 3], [0]) - rho).max() < 1e-9
        factor = purification_factor(psi, 4)
        assert np.abs(factor @ factor.conj().T - rho).max() < 1e-9


def test_purify_rejects_non_psd():
    with pytest.raises(NotPSDError):
        purify(np.diag([1.2, -0.2]))
