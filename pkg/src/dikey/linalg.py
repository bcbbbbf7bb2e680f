"""Dense complex linear algebra and entropy primitives.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``; state
vectors are 1-d arrays. All logarithms are base 2, so entropies are in bits.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

HERMITIAN_TOL = 1e-9
NEGATIVE_EIG_TOL = 1e-7
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


class DimensionError(ValueError):
    pass


class NotHermitianError(ValueError):
    pass


class NotPSDError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


class NormalizationError(ValueError):
    pass


class Spectrum(NamedTuple):
    """Eigenvalues in descending order and the matching eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def kron(a, b) -> np.ndarray:
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def kron_all(*mats) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, np.asarray(m, dtype=complex))
    return out


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    return np.outer(v, v.conj())


def dagger(m) -> np.ndarray:
    return np.asarray(m).conj().T


def max_abs(m) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m))) if m.size else 0.0


def hermiticity_residual(m) -> float:
    m = np.asarray(m)
    return max_abs(m - m.conj().T)


def partial_trace(m, dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``.

    ``dims`` gives the local dimensions in tensor order. The kept subsystems
    stay in their original relative order. Tracing out everything returns a
    1x1 matrix holding the trace.
    """
    m = np.asarray(m, dtype=complex)
    dims = [int(x) for x in dims]
    total = int(np.prod(dims)) if dims else 1
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    if total != m.shape[0]:
        raise DimensionError(
            f"product of dims {dims} is {total}, matrix has size {m.shape[0]}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise DimensionError(f"keep indices {keep} out of range for {len(dims)} subsystems")

    t = m.reshape(dims + dims)
    n = len(dims)
    for i in reversed(range(len(dims))):
        if i in keep:
            continue
        t = np.trace(t, axis1=i, axis2=i + n)
        n -= 1
    kept = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(kept, kept)


def permute_subsystems(v, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder the tensor factors of a vector (1-d) or an operator (2-d)."""
    v = np.asarray(v)
    dims = list(dims)
    order = list(order)
    n = len(dims)
    new_dims = [dims[k] for k in order]
    if v.ndim == 1:
        return v.reshape(dims).transpose(order).reshape(-1)
    if v.ndim == 2 and v.shape[0] == v.shape[1]:
        t = v.reshape(dims + dims).transpose(order + [k + n for k in order])
        size = int(np.prod(new_dims))
        return t.reshape(size, size)
    # columns are vectors
    r = v.shape[1]
    return v.reshape(dims + [r]).transpose(order + [n]).reshape(-1, r)


def _jacobi_eigh(m: np.ndarray, tol: float, max_sweeps: int):
    a = np.array(m, dtype=complex)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = np.linalg.norm(a)
    if n == 1 or scale == 0.0:
        return np.real(np.diag(a)).copy(), v
    threshold = tol * scale
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.abs(a) ** 2) - np.sum(np.abs(np.diag(a)) ** 2))
        if off <= threshold:
            return np.real(np.diag(a)).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                # unitary phase on index q makes a[p, q] real and positive
                phase = apq / mag
                a[:, q] *= phase.conjugate()
                a[q, :] *= phase
                v[:, q] *= phase.conjugate()
                app = a[p, p].real
                aqq = a[q, q].real
                tau = (aqq - app) / (2.0 * mag)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q]
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :]
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    raise ConvergenceError(f"Jacobi did not converge within {max_sweeps} sweeps")


def hermitian_eigen(m, method: str = "lapack", tol: float = HERMITIAN_TOL) -> Spectrum:
    """Full eigendecomposition of a Hermitian matrix, eigenvalues descending.

    ``method="jacobi"`` runs cyclic complex Jacobi rotations (threshold
    1e-12 times the Frobenius norm, at most 100 sweeps); ``"lapack"`` defers
    to ``numpy.linalg.eigh`` and is the default because it is much faster on
    the 100+ dimensional operators produced by dilated realizations.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, max_abs(m))
    if hermiticity_residual(m) > tol * scale:
        raise NotHermitianError(
            f"matrix is not Hermitian (residual {hermiticity_residual(m):.3e})")
    h = 0.5 * (m + m.conj().T)
    if method == "jacobi":
        w, v = _jacobi_eigh(h, JACOBI_TOL, JACOBI_MAX_SWEEPS)
    elif method == "lapack":
        w, v = np.linalg.eigh(h)
    else:
        raise ValueError(f"unknown eigensolver {method!r}")
    order = np.argsort(w)[::-1]
    return Spectrum(np.asarray(w)[order], np.asarray(v)[:, order])


def _entropy_from_eigenvalues(w: np.ndarray) -> float:
    w = np.asarray(w, dtype=float)
    if w.size and w.min() < -NEGATIVE_EIG_TOL:
        raise NotPSDError(f"negative eigenvalue {w.min():.3e}")
    w = w[w > 0]
    return float(-np.sum(w * np.log2(w))) + 0.0


def von_neumann_entropy(rho, check_trace: bool = True) -> float:
    """-tr(rho log2 rho); eigenvalues in [-1e-7, 0) count as zero."""
    rho = np.asarray(rho, dtype=complex)
    if check_trace and abs(np.trace(rho).real - 1.0) > HERMITIAN_TOL:
        raise NormalizationError(f"trace {np.trace(rho).real:.12g} is not 1")
    w = hermitian_eigen(rho).eigenvalues
    return _entropy_from_eigenvalues(w)


def shannon_entropy(p) -> float:
    p = np.asarray(p, dtype=float).ravel()
    if p.size == 0:
        raise NormalizationError("empty distribution")
    if p.min() < -1e-12 or abs(p.sum() - 1.0) > 1e-9:
        raise NormalizationError(
            f"not a probability distribution (min {p.min():.3e}, sum {p.sum():.12g})")
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p))) + 0.0


def binary_entropy(q: float) -> float:
    return shannon_entropy([q, 1.0 - q])


def purify(rho, rank_tol: float = 1e-12) -> np.ndarray:
    """Purification |psi> = sum_i sqrt(l_i) |v_i> (x) |i>_E with dim E = rank(rho).

    The environment is the last tensor factor.
    """
    rho = np.asarray(rho, dtype=complex)
    spec = hermitian_eigen(rho)
    w, v = spec.eigenvalues, spec.eigenvectors
    if w[-1] < -NEGATIVE_EIG_TOL:
        raise NotPSDError(f"negative eigenvalue {w[-1]:.3e}")
    if abs(np.sum(w) - 1.0) > HERMITIAN_TOL:
        raise NormalizationError(f"trace {np.sum(w):.12g} is not 1")
    keep = w > rank_tol * max(1.0, w[0])
    factor = v[:, keep] * np.sqrt(w[keep])
    return factor.reshape(-1)


def purification_factor(psi, dim_system: int) -> np.ndarray:
    """Reshape a purification into the matrix L with rho = L L^dagger."""
    psi = np.asarray(psi, dtype=complex).ravel()
    if psi.size % dim_system:
        raise DimensionError(
            f"vector of length {psi.size} is not a purification of a {dim_system}-dim system")
    return psi.reshape(dim_system, psi.size // dim_system)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_isometry(dim_in: int, dim_out: int, rng: np.random.Generator) -> np.ndarray:
    if dim_out < dim_in:
        raise DimensionError("isometry needs dim_out >= dim_in")
    return random_unitary(dim_out, rng)[:, :dim_in]
