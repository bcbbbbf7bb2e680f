"""Algebraic self-testing checks for the two-basis measurement family.

Given Alice's projective measurements P (key) and Q with overlap matrix O,
and Bob-side operators P_hat, Q_hat obeying the same relations, the local
isometries

    V = (1 / O[d-1, j]) sum_k (1 / O[k, j]) |k> (x) P[d-1] Q[j] P[k]

map the state onto the maximally entangled state tensored with junk. The
functions here build those isometries and report residuals of every
identity they are supposed to satisfy.

States are handled through a factor L with rho = L L^dagger so that the
transformed operators on C^d (x) C^d (x) A' (x) B' are never stored densely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .construction import OverlapMatrix, Povm, Realization, max_entangled
from .linalg import hermitian_eigen, ket, max_abs, projector

ANCHOR_TOL = 1e-6


class SelfTestError(ValueError):
    pass


class NearZeroOverlapError(SelfTestError):
    pass


def _overlap_array(o) -> np.ndarray:
    return np.asarray(o.entries if isinstance(o, OverlapMatrix) else o, dtype=float)


@dataclass(frozen=True)
class RelationReport:
    max_residual_pqp: float
    max_residual_qpq: float
    projectivity_residual: float
    pqp: np.ndarray
    qpq: np.ndarray

    @property
    def max_residual(self) -> float:
        return max(self.max_residual_pqp, self.max_residual_qpq, self.projectivity_residual)


def check_relations(p: Povm, q: Povm, o) -> RelationReport:
    """Residuals of P_j Q_k P_j = O_jk^2 P_j and Q_k P_j Q_k = O_jk^2 Q_k."""
    o = _overlap_array(o)
    d = o.shape[0]
    if p.n_outcomes != d or q.n_outcomes != d or o.shape != (d, d):
        raise SelfTestError(
            f"need {d} outcomes on both measurements, got {p.n_outcomes} and {q.n_outcomes}")
    if p.dim != q.dim:
        raise SelfTestError(f"measurements act on different spaces ({p.dim} vs {q.dim})")
    pqp = np.zeros((d, d))
    qpq = np.zeros((d, d))
    for j in range(d):
        for k in range(d):
            o2 = o[j, k] ** 2
            pqp[j, k] = max_abs(p[j] @ q[k] @ p[j] - o2 * p[j])
            qpq[j, k] = max_abs(q[k] @ p[j] @ q[k] - o2 * q[k])
    proj = max(p.projectivity_residual(), q.projectivity_residual())
    return RelationReport(float(pqp.max()), float(qpq.max()), proj, pqp, qpq)


@dataclass(frozen=True)
class IsometryPair:
    v_a: np.ndarray
    v_b: np.ndarray
    anchor: int
    d: int
    a_tilde_ref: np.ndarray
    b_tilde_ref: np.ndarray

    @property
    def dim_a(self) -> int:
        return self.v_a.shape[1]

    @property
    def dim_b(self) -> int:
        return self.v_b.shape[1]


def _isometry(p: Povm, q: Povm, o: np.ndarray, j: int) -> np.ndarray:
    d = o.shape[0]
    n = p.dim
    v = np.zeros((d * n, n), dtype=complex)
    head = p[d - 1] @ q[j]
    for k in range(d):
        v[k * n:(k + 1) * n] = head @ p[k] / (o[d - 1, j] * o[k, j])
    return v


def build_isometries(p: Povm, q: Povm, p_hat: Povm, q_hat: Povm, o,
                     anchor: int = 0, tol: float = ANCHOR_TOL) -> IsometryPair:
    o = _overlap_array(o)
    d = o.shape[0]
    if not 0 <= anchor < d:
        raise SelfTestError(f"anchor {anchor} out of range for d={d}")
    for m in (p, q, p_hat, q_hat):
        if m.n_outcomes != d:
            raise SelfTestError(f"expected {d} outcomes, got {m.n_outcomes}")
    column = o[:, anchor]
    if column.min() <= tol:
        k = int(column.argmin())
        raise NearZeroOverlapError(
            f"overlap O[{k},{anchor}] = {column[k]:.3e} is below the threshold {tol:g}")
    return IsometryPair(
        v_a=_isometry(p, q, o, anchor),
        v_b=_isometry(p_hat, q_hat, o, anchor),
        anchor=anchor, d=d,
        a_tilde_ref=p[d - 1], b_tilde_ref=p_hat[d - 1],
    )


def isometries_for(real: Realization, anchor: int = 0, overlap=None) -> IsometryPair:
    """Isometries from a realization's two Alice settings and its hatted operators."""
    if real.hats is None:
        raise SelfTestError("realization carries no Bob-side hatted operators")
    p, q = real.alice[real.key_alice], real.alice[1 - real.key_alice]
    if overlap is None:
        overlap = real.meta.get("overlap")
    if overlap is None:
        from .construction import overlap_direct
        overlap = overlap_direct(real.meta["d"], real.meta["eps"])
    return build_isometries(p, q, real.hats[0], real.hats[1], overlap, anchor)


def isometry_residual(v: np.ndarray) -> float:
    return max_abs(v.conj().T @ v - np.eye(v.shape[1]))


def _block(m: np.ndarray, i: int, j: int, n: int) -> np.ndarray:
    return m[i * n:(i + 1) * n, j * n:(j + 1) * n]


def verify_measurement_extraction(iso: IsometryPair, p: Povm) -> float:
    """max_a ||V_A P_a V_A^dagger - |a><a| (x) A~||_max with A~ read off block (0, 0).

    Also folds in the distance of A~ from P[d-1], its exact value.
    """
    d, n = iso.d, iso.dim_a
    a_tilde = _block(iso.v_a @ p[0] @ iso.v_a.conj().T, 0, 0, n)
    worst = max_abs(a_tilde - iso.a_tilde_ref)
    for a in range(d):
        lhs = iso.v_a @ p[a] @ iso.v_a.conj().T
        rhs = np.kron(projector(ket(a, d)), a_tilde)
        worst = max(worst, max_abs(lhs - rhs))
    return worst


def extracted_a_tilde(iso: IsometryPair, p: Povm) -> np.ndarray:
    return _block(iso.v_a @ p[0] @ iso.v_a.conj().T, 0, 0, iso.dim_a)


def verify_bob_projection(iso: IsometryPair) -> float:
    """||V_B V_B^dagger - I (x) B~||_max, B~ being the first diagonal block."""
    n = iso.dim_b
    vv = iso.v_b @ iso.v_b.conj().T
    b_tilde = _block(vv, 0, 0, n)
    return max_abs(vv - np.kron(np.eye(iso.d), b_tilde))


def _state_factor(rho, rank_tol: float = 1e-13) -> np.ndarray:
    spec = hermitian_eigen(rho)
    w = spec.eigenvalues
    keep = w > rank_tol * max(1.0, w[0])
    return spec.eigenvectors[:, keep] * np.sqrt(w[keep])


def _transform(iso: IsometryPair, factor: np.ndarray) -> np.ndarray:
    """(V_A (x) V_B) on columns of ``factor``, reordered to (C^d, C^d, A', B')."""
    na, nb, d = iso.dim_a, iso.dim_b, iso.d
    r = factor.shape[1]
    t = factor.reshape(na, nb, r)
    t = np.einsum("Ii,ijr->Ijr", iso.v_a, t)
    t = np.einsum("Jj,Ijr->IJr", iso.v_b, t)
    t = t.reshape(d, na, d, nb, r).transpose(0, 2, 1, 3, 4)
    return t.reshape(d * d * na * nb, r)


def _max_abs_product(left: np.ndarray, right: np.ndarray, chunk: int = 512) -> float:
    """max |left @ right^dagger| evaluated in row chunks."""
    worst = 0.0
    rc = right.conj().T
    for start in range(0, left.shape[0], chunk):
        worst = max(worst, float(np.abs(left[start:start + chunk] @ rc).max()))
    return worst


def _phi_component(iso: IsometryPair, transformed: np.ndarray) -> np.ndarray:
    """(<phi_d| (x) I_{A'B'}) applied to each column."""
    d = iso.d
    phi = max_entangled(d)
    t = transformed.reshape(d * d, -1, transformed.shape[1])
    return np.einsum("p,pjr->jr", phi.conj(), t)


@dataclass(frozen=True)
class StateExtraction:
    residual: float
    junk_state: np.ndarray


def verify_state_extraction(iso: IsometryPair, rho, d: int | None = None) -> StateExtraction:
    """Residual of (V_A (x) V_B) rho (V_A (x) V_B)^dagger = |phi_d><phi_d| (x) sigma.

    sigma is obtained by the partial inner product with phi_d; the returned
    junk state is sigma normalised to unit trace.
    """
    d = iso.d if d is None else d
    if d != iso.d:
        raise SelfTestError(f"isometries target C^{iso.d}, asked for d={d}")
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (iso.dim_a * iso.dim_b,) * 2:
        raise SelfTestError(f"state of shape {rho.shape} does not match isometries")
    factor = _state_factor(rho)
    lt = _transform(iso, factor)
    m = _phi_component(iso, lt)
    phi = max_entangled(d)
    product = np.kron(phi[:, None], m).reshape(-1, m.shape[1])
    left = np.hstack([lt, -product])
    right = np.hstack([lt, product])
    residual = _max_abs_product(left, right)
    sigma = m @ m.conj().T
    tr = np.trace(sigma).real
    return StateExtraction(residual, sigma / tr if tr > 0 else sigma)


def verify_matrix_selftest(real: Realization, iso: IsometryPair) -> float:
    """Residual of the matrix-form condition for Alice's key setting.

    Checks (V_A (x) V_B)(A_a (x) I) rho (V_A (x) V_B)^dagger against
    (|a><a| (x) I)|phi_d><phi_d| (x) (A~ (x) B~) sigma for every outcome a,
    that each left-hand side has trace 1/d, and that (A~ (x) B~) sigma is a
    unit-trace positive operator.
    """
    d = iso.d
    factor = _state_factor(real.state)
    lt = _transform(iso, factor)
    m = _phi_component(iso, lt)
    phi = max_entangled(d)
    sigma_factor = np.kron(phi[:, None], m).reshape(-1, m.shape[1])
    a_tilde = iso.a_tilde_ref
    b_tilde = iso.b_tilde_ref
    ab = np.kron(a_tilde, b_tilde)
    ab_m = ab @ m
    worst = 0.0
    key = real.alice[real.key_alice]
    eye_b = np.eye(real.dim_b)
    for a in range(d):
        applied = np.kron(key[a], eye_b) @ factor
        lt_a = _transform(iso, applied)
        u_a = np.kron(projector(ket(a, d)), np.eye(d)) @ phi
        rhs_left = np.kron(u_a[:, None], ab_m).reshape(-1, m.shape[1])
        residual = _max_abs_product(np.hstack([lt_a, -rhs_left]), np.hstack([lt, sigma_factor]))
        trace = np.sum(lt_a.conj() * lt).real
        worst = max(worst, residual, abs(trace - 1.0 / d))
    junk = ab_m @ m.conj().T
    herm = max_abs(junk - junk.conj().T)
    lam = np.linalg.eigvalsh(0.5 * (junk + junk.conj().T)).min()
    return float(max(worst, herm, max(0.0, -lam), abs(np.trace(junk).real - 1.0)))


@dataclass(frozen=True)
class SelfTestReport:
    relations: RelationReport
    isometry_a: float
    isometry_b: float
    measurement: float
    bob_projection: float
    state: float
    matrix_form: float
    anchor: int

    @property
    def max_residual(self) -> float:
        return max(self.relations.max_residual, self.isometry_a, self.isometry_b,
                   self.measurement, self.bob_projection, self.state, self.matrix_form)

    def to_dict(self) -> dict:
        return {
            "anchor": self.anchor,
            "relation_pqp": self.relations.max_residual_pqp,
            "relation_qpq": self.relations.max_residual_qpq,
            "projectivity": self.relations.projectivity_residual,
            "isometry_a": self.isometry_a,
            "isometry_b": self.isometry_b,
            "measurement_extraction": self.measurement,
            "bob_projection": self.bob_projection,
            "state_extraction": self.state,
            "matrix_form": self.matrix_form,
        }


def run_selftest(real: Realization, anchor: int = 0, overlap=None) -> SelfTestReport:
    """Every self-testing residual for one realization and anchor column."""
    if overlap is None:
        from .construction import overlap_direct
        overlap = overlap_direct(real.meta["d"], real.meta["eps"])
    p, q = real.alice[real.key_alice], real.alice[1 - real.key_alice]
    relations = check_relations(p, q, overlap)
    iso = isometries_for(real, anchor, overlap)
    return SelfTestReport(
        relations=relations,
        isometry_a=isometry_residual(iso.v_a),
        isometry_b=isometry_residual(iso.v_b),
        measurement=verify_measurement_extraction(iso, p),
        bob_projection=verify_bob_projection(iso),
        state=verify_state_extraction(iso, real.state).residual,
        matrix_form=verify_matrix_selftest(real, iso),
        anchor=anchor,
    )
