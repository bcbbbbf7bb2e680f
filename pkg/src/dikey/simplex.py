"""Dense revised simplex method with Bland's anti-cycling rule.

Solves ``min c @ x  s.t.  A x = b, x >= 0``. A feasible starting basis can be
passed in; otherwise phase one runs on artificial variables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-10
MAX_ITER = 10**6
REFACTOR_EVERY = 50


@dataclass
class LPResult:
    x: np.ndarray
    objective: float
    status: str  # "optimal", "infeasible", "unbounded", "iteration-cap"
    iterations: int
    basis: list[int]


def _solve_phase(c, a, b, basis, tol, max_iter, start_iter=0):
    m, n = a.shape
    basis = list(basis)
    b_inv = np.linalg.inv(a[:, basis])
    it = start_iter
    since_refactor = 0
    while True:
        if it >= max_iter:
            return basis, b_inv, "iteration-cap", it
        x_b = b_inv @ b
        y = c[basis] @ b_inv
        reduced = c - y @ a
        reduced[basis] = 0.0
        # Bland: lowest-index improving column enters
        candidates = np.flatnonzero(reduced < -tol)
        if candidates.size == 0:
            return basis, b_inv, "optimal", it
        enter = int(candidates[0])
        direction = b_inv @ a[:, enter]
        positive = direction > tol
        if not positive.any():
            return basis, b_inv, "unbounded", it
        ratios = np.full(m, np.inf)
        ratios[positive] = np.maximum(x_b[positive], 0.0) / direction[positive]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + tol * max(1.0, abs(best)))
        # Bland: among tied rows, the basic variable with lowest index leaves
        leave = int(ties[np.argmin([basis[r] for r in ties])])
        basis[leave] = enter
        it += 1
        since_refactor += 1
        if since_refactor >= REFACTOR_EVERY:
            b_inv = np.linalg.inv(a[:, basis])
            since_refactor = 0
        else:
            pivot = direction[leave]
            row = b_inv[leave] / pivot
            b_inv -= np.outer(direction, row)
            b_inv[leave] = row


def revised_simplex(c, a_eq, b_eq, basis=None, tol: float = PIVOT_TOL,
                    max_iter: int = MAX_ITER) -> LPResult:
    c = np.asarray(c, dtype=float)
    a = np.asarray(a_eq, dtype=float).copy()
    b = np.asarray(b_eq, dtype=float).copy()
    m, n = a.shape
    if basis is not None:
        basis = list(basis)
        x_b = np.linalg.solve(a[:, basis], b)
        if x_b.min() < -1e-9:
            raise ValueError("supplied basis is not primal feasible")
        basis, b_inv, status, it = _solve_phase(c, a, b, basis, tol, max_iter)
        return _finish(c, a, b, basis, b_inv, status, it, n)

    neg = b < 0
    a[neg] *= -1
    b[neg] *= -1
    a1 = np.hstack([a, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    basis1, b_inv, status, it = _solve_phase(c1, a1, b, list(range(n, n + m)), tol, max_iter)
    if status == "iteration-cap":
        return _finish(c, a, b, basis1, b_inv, status, it, n)
    if c1[basis1] @ (b_inv @ b) > 1e-8 * max(1.0, np.abs(b).max()):
        x = np.zeros(n)
        return LPResult(x, np.inf, "infeasible", it, basis1)
    # drive remaining zero-level artificials out of the basis where possible
    for r, var in enumerate(list(basis1)):
        if var < n:
            continue
        row = b_inv[r] @ a
        options = [j for j in np.flatnonzero(np.abs(row) > tol) if j not in basis1]
        if options:
            basis1[r] = int(options[0])
            b_inv = np.linalg.inv(a1[:, basis1])
    keep_rows = [r for r, var in enumerate(basis1) if var < n]
    if len(keep_rows) < m:
        # redundant equality rows: drop them
        kept = [basis1[r] for r in keep_rows]
        rows = _independent_rows(a, kept)
        a, b = a[rows], b[rows]
        basis1 = kept
    basis, b_inv, status, it2 = _solve_phase(c, a, b, basis1, tol, max_iter, it)
    return _finish(c, a, b, basis, b_inv, status, it2, n)


def _independent_rows(a, cols):
    """Indices of rows of ``a[:, cols]`` forming a nonsingular square block."""
    sub = a[:, cols]
    chosen, ortho = [], []
    for r in range(sub.shape[0]):
        v = sub[r].copy()
        for u in ortho:
            v -= (u @ v) * u
        nrm = np.linalg.norm(v)
        if nrm > 1e-9:
            ortho.append(v / nrm)
            chosen.append(r)
        if len(chosen) == len(cols):
            break
    return chosen


def _finish(c, a, b, basis, b_inv, status, it, n):
    x = np.zeros(n)
    x_b = b_inv @ b
    for r, var in enumerate(basis):
        if var < n:
            x[var] = x_b[r]
    x = np.maximum(x, 0.0)
    return LPResult(x, float(c[:n] @ x), status, it, list(basis))
