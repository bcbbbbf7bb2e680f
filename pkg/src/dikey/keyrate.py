"""Born-rule correlations, classical-quantum states and Devetak-Winter rates."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .construction import Realization, Scenario
from .linalg import (
    DimensionError,
    max_abs,
    partial_trace,
    purification_factor,
    purify,
    shannon_entropy,
    von_neumann_entropy,
)

PROB_TOL = 1e-9


class CorrelationError(ValueError):
    pass


class PurificationError(ValueError):
    pass


@dataclass(frozen=True)
class Correlation:
    """p(a, b | x, y) stored as a zero-padded array indexed [x, y, a, b]."""

    scenario: Scenario
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.scenario.shape:
            raise CorrelationError(
                f"values have shape {values.shape}, scenario needs {self.scenario.shape}")
        values = np.where(self.scenario.mask(), values, 0.0)
        object.__setattr__(self, "values", values)

    def validate(self, tol: float = PROB_TOL) -> "Correlation":
        p = self.values
        s = self.scenario
        for x in range(s.alice_settings):
            for y in range(s.bob_settings):
                block = p[x, y]
                if block.min() < -1e-12:
                    raise CorrelationError(f"negative probability at (x={x}, y={y})")
                if abs(block.sum() - 1) > tol:
                    raise CorrelationError(
                        f"probabilities at (x={x}, y={y}) sum to {block.sum():.12g}")
        alice_marg = p.sum(axis=3)
        bob_marg = p.sum(axis=2)
        if s.bob_settings > 1 and np.abs(alice_marg - alice_marg[:, :1]).max() > tol:
            x, y = np.unravel_index(np.abs(alice_marg - alice_marg[:, :1]).max(axis=2).argmax(),
                                    alice_marg.shape[:2])
            raise CorrelationError(f"Alice's marginal is signalling at (x={x}, y={y})")
        if s.alice_settings > 1 and np.abs(bob_marg - bob_marg[:1]).max() > tol:
            x, y = np.unravel_index(np.abs(bob_marg - bob_marg[:1]).max(axis=2).argmax(),
                                    bob_marg.shape[:2])
            raise CorrelationError(f"Bob's marginal is signalling at (x={x}, y={y})")
        return self

    def block(self, x: int, y: int) -> np.ndarray:
        ka = self.scenario.alice_outcomes[x]
        kb = self.scenario.bob_outcomes[y]
        return self.values[x, y, :ka, :kb]

    def alice_marginal(self, x: int, y: int = 0) -> np.ndarray:
        return self.block(x, y).sum(axis=1)

    def bob_marginal(self, y: int, x: int = 0) -> np.ndarray:
        return self.block(x, y).sum(axis=0)

    def to_dict(self) -> dict:
        s = self.scenario
        p = [[self.block(x, y).tolist() for y in range(s.bob_settings)]
             for x in range(s.alice_settings)]
        return {"scenario": s.to_dict(), "p": p}

    @classmethod
    def from_dict(cls, data: dict, validate: bool = True) -> "Correlation":
        try:
            s = Scenario.from_dict(data["scenario"])
            raw = data["p"]
        except (KeyError, TypeError) as exc:
            raise CorrelationError(f"malformed correlation: {exc}") from None
        values = np.zeros(s.shape)
        try:
            if len(raw) != s.alice_settings:
                raise CorrelationError("number of x blocks disagrees with scenario")
            for x in range(s.alice_settings):
                if len(raw[x]) != s.bob_settings:
                    raise CorrelationError(f"number of y blocks at x={x} disagrees with scenario")
                for y in range(s.bob_settings):
                    block = np.asarray(raw[x][y], dtype=float)
                    expected = (s.alice_outcomes[x], s.bob_outcomes[y])
                    if block.shape != expected:
                        raise CorrelationError(
                            f"block (x={x}, y={y}) has shape {block.shape}, expected {expected}")
                    values[x, y, :expected[0], :expected[1]] = block
        except (TypeError, ValueError) as exc:
            if isinstance(exc, CorrelationError):
                raise
            raise CorrelationError(f"malformed probabilities: {exc}") from None
        corr = cls(s, values)
        return corr.validate() if validate else corr


def save_correlation(corr: Correlation, path) -> None:
    Path(path).write_text(json.dumps(corr.to_dict(), indent=1))


def load_correlation(path) -> Correlation:
    return Correlation.from_dict(json.loads(Path(path).read_text()))


def born_correlation(real: Realization) -> Correlation:
    """p(a,b|x,y) = tr[(A^x_a (x) B^y_b) rho] for every setting pair."""
    s = real.scenario
    rho = real.state.reshape(real.dim_a, real.dim_b, real.dim_a, real.dim_b)
    values = np.zeros(s.shape)
    for x, ma in enumerate(real.alice):
        # contract Alice first: R[a, l, k] = sum_ij A_a[i, j] rho[j, l, i, k]
        reduced = np.einsum("aij,jlik->alk", ma.stacked(), rho)
        for y, mb in enumerate(real.bob):
            block = np.einsum("bkl,alk->ab", mb.stacked(), reduced)
            if np.abs(block.imag).max() > 1e-9:
                raise CorrelationError(f"complex probabilities at (x={x}, y={y})")
            values[x, y, :ma.n_outcomes, :mb.n_outcomes] = block.real
    corr = Correlation(s, values)
    return corr.validate()


def h_a_given_b(corr: Correlation, x: int, y: int) -> float:
    """Conditional Shannon entropy H(A|B) = H(AB) - H(B) of p(., .|x, y)."""
    block = np.clip(corr.block(x, y), 0.0, None)
    return shannon_entropy(block.ravel()) - shannon_entropy(block.sum(axis=0))


@dataclass(frozen=True)
class ClassicalQuantumState:
    """Block-diagonal sigma_AE: one unnormalised environment state per outcome."""

    blocks: tuple[np.ndarray, ...]

    @property
    def outcome_probs(self) -> np.ndarray:
        return np.array([np.trace(b).real for b in self.blocks])

    @property
    def env_state(self) -> np.ndarray:
        return sum(self.blocks)

    @property
    def dim_e(self) -> int:
        return self.blocks[0].shape[0]

    def matrix(self) -> np.ndarray:
        k, n = len(self.blocks), self.dim_e
        out = np.zeros((k * n, k * n), dtype=complex)
        for a, b in enumerate(self.blocks):
            out[a * n:(a + 1) * n, a * n:(a + 1) * n] = b
        return out

    def product_form_residual(self) -> float:
        """max_a ||block_a - p_a sigma_E||_max."""
        env = self.env_state
        return max(max_abs(b - p * env) for b, p in zip(self.blocks, self.outcome_probs))


def purification_residual(real: Realization, purification) -> float:
    factor = purification_factor(purification, real.dim_a * real.dim_b)
    return max_abs(factor @ factor.conj().T - real.state)


def sigma_ae(real: Realization, purification, tol: float = 1e-9) -> ClassicalQuantumState:
    """Blocks tr_AB[(A^x_a (x) I_B (x) I_E)|psi><psi|] for Alice's key setting."""
    n = real.dim_a * real.dim_b
    try:
        factor = purification_factor(purification, n)
    except DimensionError as exc:
        raise PurificationError(str(exc)) from None
    if max_abs(factor @ factor.conj().T - real.state) > tol:
        raise PurificationError("vector does not purify the realization's state")
    psi = factor.reshape(real.dim_a, real.dim_b, -1)
    key = real.alice[real.key_alice]
    blocks = []
    for e in key.effects:
        applied = np.einsum("ij,jbe->ibe", e, psi)
        blocks.append(np.einsum("ibe,ibf->ef", applied, psi.conj()))
    return ClassicalQuantumState(tuple(blocks))


def h_a_given_e(cq: ClassicalQuantumState) -> float:
    """H(AE) - H(E) with H(AE) evaluated on the block-diagonal sigma_AE."""
    return von_neumann_entropy(cq.matrix()) - von_neumann_entropy(cq.env_state)


@dataclass(frozen=True)
class KeyRateReport:
    h_a: float
    h_a_given_b: float
    h_a_given_e: float
    dw_rate: float
    product_form_residual: float
    purification_residual: float
    env_dim: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def devetak_winter(real: Realization, purification=None) -> KeyRateReport:
    """Devetak-Winter rate H(A|E) - H(A|B) for one explicit purification.

    The value certifies this model only; it is not an infimum over all models
    compatible with the correlation. Defaults to the canonical purification.
    """
    if purification is None:
        purification = purify(real.state)
    cq = sigma_ae(real, purification)
    corr = born_correlation(real)
    hae = h_a_given_e(cq)
    hab = h_a_given_b(corr, real.key_alice, real.key_bob)
    ha = shannon_entropy(corr.alice_marginal(real.key_alice, real.key_bob))
    return KeyRateReport(
        h_a=ha,
        h_a_given_b=hab,
        h_a_given_e=hae,
        dw_rate=hae - hab,
        product_form_residual=cq.product_form_residual(),
        purification_residual=purification_residual(real, purification),
        env_dim=cq.dim_e,
    )


def extend_purification(purification, dim_system: int, isometry) -> np.ndarray:
    """Apply an isometry on the environment factor of a purification."""
    factor = purification_factor(purification, dim_system)
    return (factor @ np.asarray(isometry).T).reshape(-1)


def reduced_state(purification, dims, keep) -> np.ndarray:
    psi = np.asarray(purification, dtype=complex).ravel()
    return partial_trace(np.outer(psi, psi.conj()), dims, keep)
