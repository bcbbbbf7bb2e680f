"""Ideal and dilated realizations of the perturbed-Fourier family.

Alice holds two d-outcome projective measurements, the computational basis
and the basis rotated by ``U_eps``, the ``eps``-th fractional power of the
cyclic shift. Both parties share the maximally entangled state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .linalg import (
    HERMITIAN_TOL,
    kron,
    ket,
    max_abs,
    permute_subsystems,
    projector,
    random_density_matrix,
    random_unitary,
)


class PovmError(ValueError):
    pass


class ParameterError(ValueError):
    pass


def _check_dim(d: int) -> int:
    if int(d) != d or d < 2:
        raise ParameterError(f"dimension must be an integer >= 2, got {d}")
    return int(d)


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not 0.0 <= eps <= 1.0:
        raise ParameterError(f"epsilon must lie in [0, 1], got {eps}")
    return eps


@dataclass(frozen=True)
class Scenario:
    """Outcome counts per setting for each party; setting counts are implied."""

    alice_outcomes: tuple[int, ...]
    bob_outcomes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "alice_outcomes", tuple(int(k) for k in self.alice_outcomes))
        object.__setattr__(self, "bob_outcomes", tuple(int(k) for k in self.bob_outcomes))
        if not self.alice_outcomes or not self.bob_outcomes:
            raise ParameterError("each party needs at least one setting")
        if min(self.alice_outcomes + self.bob_outcomes) < 1:
            raise ParameterError("outcome counts must be >= 1")

    @property
    def alice_settings(self) -> int:
        return len(self.alice_outcomes)

    @property
    def bob_settings(self) -> int:
        return len(self.bob_outcomes)

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.alice_settings, self.bob_settings,
                max(self.alice_outcomes), max(self.bob_outcomes))

    def mask(self) -> np.ndarray:
        """Boolean array over the padded (x, y, a, b) tensor marking real entries."""
        m = np.zeros(self.shape, dtype=bool)
        for x, ka in enumerate(self.alice_outcomes):
            for y, kb in enumerate(self.bob_outcomes):
                m[x, y, :ka, :kb] = True
        return m

    def vertex_count(self) -> int:
        return int(np.prod(self.alice_outcomes, dtype=object) * np.prod(self.bob_outcomes, dtype=object))

    @classmethod
    def uniform(cls, n_a: int, k_a: int, n_b: int, k_b: int) -> "Scenario":
        return cls((k_a,) * n_a, (k_b,) * n_b)

    def to_dict(self) -> dict:
        return {
            "alice_settings": self.alice_settings,
            "alice_outcomes": list(self.alice_outcomes),
            "bob_settings": self.bob_settings,
            "bob_outcomes": list(self.bob_outcomes),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        try:
            ka, kb = data["alice_outcomes"], data["bob_outcomes"]
        except KeyError as exc:
            raise ParameterError(f"scenario is missing {exc}") from None
        if isinstance(ka, int):
            ka = [ka] * int(data["alice_settings"])
        if isinstance(kb, int):
            kb = [kb] * int(data["bob_settings"])
        s = cls(tuple(ka), tuple(kb))
        for key, n in (("alice_settings", s.alice_settings), ("bob_settings", s.bob_settings)):
            if key in data and int(data[key]) != n:
                raise ParameterError(f"{key}={data[key]} disagrees with outcome list length {n}")
        return s


@dataclass(frozen=True)
class Povm:
    """A measurement: one positive effect per outcome, summing to identity."""

    effects: tuple[np.ndarray, ...]

    def __post_init__(self):
        effects = tuple(np.asarray(e, dtype=complex) for e in self.effects)
        object.__setattr__(self, "effects", effects)
        if not effects:
            raise PovmError("a POVM needs at least one effect")
        dim = effects[0].shape[0]
        for a, e in enumerate(effects):
            if e.shape != (dim, dim):
                raise PovmError(f"effect {a} has shape {e.shape}, expected {(dim, dim)}")
            if max_abs(e - e.conj().T) > HERMITIAN_TOL:
                raise PovmError(f"effect {a} is not Hermitian")
            if np.linalg.eigvalsh(0.5 * (e + e.conj().T)).min() < -HERMITIAN_TOL:
                raise PovmError(f"effect {a} is not positive semidefinite")
        if self.completeness_residual() > HERMITIAN_TOL:
            raise PovmError(
                f"effects do not sum to identity (residual {self.completeness_residual():.3e})")

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    @property
    def n_outcomes(self) -> int:
        return len(self.effects)

    def __len__(self):
        return len(self.effects)

    def __getitem__(self, a):
        return self.effects[a]

    def stacked(self) -> np.ndarray:
        return np.stack(self.effects)

    def completeness_residual(self) -> float:
        return max_abs(sum(self.effects) - np.eye(self.dim))

    def projectivity_residual(self) -> float:
        worst = 0.0
        for a, ea in enumerate(self.effects):
            for b, eb in enumerate(self.effects):
                target = ea if a == b else 0.0
                worst = max(worst, max_abs(ea @ eb - target))
        return worst

    def is_projective(self, tol: float = HERMITIAN_TOL) -> bool:
        return self.projectivity_residual() <= tol

    def conjugated(self, w: np.ndarray) -> "Povm":
        """Effects ``W E W^dagger`` for a unitary W."""
        return Povm(tuple(w @ e @ w.conj().T for e in self.effects))

    def tensor_identity(self, junk: int) -> "Povm":
        return Povm(tuple(kron(e, np.eye(junk)) for e in self.effects))

    def conj(self) -> "Povm":
        return Povm(tuple(e.conj() for e in self.effects))

    @classmethod
    def from_basis(cls, vectors) -> "Povm":
        return cls(tuple(projector(v) for v in vectors))


@dataclass(frozen=True)
class OverlapMatrix:
    """Entries ``|<j|e_k>|`` between the computational and a second basis."""

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", np.asarray(self.entries, dtype=float))

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def stochasticity_residual(self) -> float:
        sq = self.entries ** 2
        return float(max(np.abs(sq.sum(axis=0) - 1).max(), np.abs(sq.sum(axis=1) - 1).max()))

    def min_entry(self) -> float:
        return float(self.entries.min())


@dataclass(frozen=True)
class Realization:
    """A bipartite state with a list of measurements on each side.

    ``hats`` optionally carries Bob-side operators satisfying the same
    overlap relations as Alice's two measurements; they are needed to build
    Bob's self-testing isometry.
    """

    state: np.ndarray
    dim_a: int
    dim_b: int
    alice: tuple[Povm, ...]
    bob: tuple[Povm, ...]
    key_alice: int = 0
    key_bob: int = 0
    hats: tuple[Povm, Povm] | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        state = np.asarray(self.state, dtype=complex)
        object.__setattr__(self, "state", state)
        object.__setattr__(self, "alice", tuple(self.alice))
        object.__setattr__(self, "bob", tuple(self.bob))
        n = self.dim_a * self.dim_b
        if state.shape != (n, n):
            raise ParameterError(f"state has shape {state.shape}, expected {(n, n)}")
        if abs(np.trace(state).real - 1) > HERMITIAN_TOL:
            raise ParameterError("state does not have unit trace")
        if np.linalg.eigvalsh(0.5 * (state + state.conj().T)).min() < -HERMITIAN_TOL:
            raise ParameterError("state is not positive semidefinite")
        for side, povms, dim in (("alice", self.alice, self.dim_a), ("bob", self.bob, self.dim_b)):
            for i, m in enumerate(povms):
                if m.dim != dim:
                    raise ParameterError(f"{side} measurement {i} acts on dim {m.dim}, expected {dim}")
        if not 0 <= self.key_alice < len(self.alice) or not 0 <= self.key_bob < len(self.bob):
            raise ParameterError("key setting index out of range")
        if self.hats is not None:
            for m in self.hats:
                if m.dim != self.dim_b:
                    raise ParameterError("hatted operators must act on Bob's space")

    @property
    def scenario(self) -> Scenario:
        return Scenario(tuple(m.n_outcomes for m in self.alice),
                        tuple(m.n_outcomes for m in self.bob))


def fourier_basis(d: int) -> list[np.ndarray]:
    """Vectors chi_j = d^{-1/2} sum_k w^{jk} |k> with w = exp(2 pi i / d)."""
    d = _check_dim(d)
    k = np.arange(d)
    return [np.exp(2j * np.pi * j * k / d) / np.sqrt(d) for j in range(d)]


def _fourier_matrix(d: int) -> np.ndarray:
    return np.column_stack(fourier_basis(d))


def pauli_x(d: int) -> np.ndarray:
    """Generalised Pauli X, sum_j w^j |chi_j><chi_j| = exp(G) = U_1.

    With chi_j = d^{-1/2} sum_k w^{jk} |k> this is the cyclic shift
    |j> -> |j-1 mod d>; its adjoint is the shift |j> -> |j+1 mod d>. The two
    coincide for d = 2.
    """
    d = _check_dim(d)
    return np.roll(np.eye(d, dtype=complex), -1, axis=0)


def u_epsilon(d: int, eps: float) -> np.ndarray:
    """Fractional shift sum_j w^{eps j} |chi_j><chi_j|, built from its spectral form."""
    d = _check_dim(d)
    eps = _check_eps(eps)
    f = _fourier_matrix(d)
    phases = np.exp(2j * np.pi * eps * np.arange(d) / d)
    return (f * phases) @ f.conj().T


def generator(d: int) -> np.ndarray:
    """G with exp(G) equal to the cyclic shift."""
    d = _check_dim(d)
    f = _fourier_matrix(d)
    return (f * (2j * np.pi * np.arange(d) / d)) @ f.conj().T


def overlap_direct(d: int, eps: float) -> OverlapMatrix:
    return OverlapMatrix(np.abs(u_epsilon(d, eps)))


def overlap_closed_form(d: int, eps: float) -> OverlapMatrix:
    """Geometric-sum formula for ``|<j|U_eps|k>|``, valid for 0 < eps < 1.

    O_jk^2 = (1 - cos 2 pi t) / (d^2 (1 - cos(2 pi t / d))) with t = eps - k + j.
    """
    d = _check_dim(d)
    eps = float(eps)
    if not 0.0 < eps < 1.0:
        raise ParameterError(f"closed form needs 0 < eps < 1, got {eps}")
    j = np.arange(d)[:, None]
    k = np.arange(d)[None, :]
    t = eps - k + j
    sq = (1 - np.cos(2 * np.pi * t)) / (d * d * (1 - np.cos(2 * np.pi * t / d)))
    return OverlapMatrix(np.sqrt(sq))


def max_entangled(d: int) -> np.ndarray:
    d = _check_dim(d)
    return np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d)


def computational_povm(d: int) -> Povm:
    return Povm.from_basis(np.eye(d, dtype=complex))


def rotated_povm(d: int, eps: float) -> Povm:
    u = u_epsilon(d, eps)
    return Povm.from_basis(u.T)


def ideal_realization(d: int, eps: float, bob_extra=()) -> Realization:
    """Maximally entangled state, Alice measuring {|j>} (x=0) and {U|k>} (x=1).

    Bob's measurements are the plug-in settings in ``bob_extra`` followed by
    the key setting {|b>}, so the key index is ``len(bob_extra)``. The hatted
    operators are the entrywise conjugates of Alice's measurements.
    """
    d = _check_dim(d)
    eps = _check_eps(eps)
    p = computational_povm(d)
    q = rotated_povm(d, eps)
    bob = tuple(bob_extra) + (computational_povm(d),)
    phi = max_entangled(d)
    return Realization(
        state=projector(phi), dim_a=d, dim_b=d, alice=(p, q), bob=bob,
        key_alice=0, key_bob=len(bob) - 1, hats=(p.conj(), q.conj()),
        meta={"d": d, "eps": eps, "junk_a": 1, "junk_b": 1},
    )


@dataclass(frozen=True)
class DilationData:
    w_a: np.ndarray
    w_b: np.ndarray
    junk_state: np.ndarray


def dilation_data(dim_a: int, dim_b: int, junk_dim_a: int, junk_dim_b: int, seed: int) -> DilationData:
    """Seeded local unitaries and full-rank junk state used by :func:`dilate`."""
    rng = np.random.default_rng(seed)
    junk = random_density_matrix(junk_dim_a * junk_dim_b, rng)
    w_a = random_unitary(dim_a * junk_dim_a, rng)
    w_b = random_unitary(dim_b * junk_dim_b, rng)
    return DilationData(w_a, w_b, junk)


def dilate(real: Realization, junk_dim_a: int, junk_dim_b: int, seed: int) -> Realization:
    """Embed ``real`` with a junk state and hide it behind random local unitaries.

    The new local spaces are ``H_A (x) C^junk_a`` and ``H_B (x) C^junk_b``;
    the correlation is unchanged.
    """
    if junk_dim_a < 1 or junk_dim_b < 1:
        raise ParameterError("junk dimensions must be >= 1")
    da, db = real.dim_a, real.dim_b
    data = dilation_data(da, db, junk_dim_a, junk_dim_b, seed)
    full = kron(real.state, data.junk_state)
    # (A, B, A', B') -> (A, A', B, B')
    full = permute_subsystems(full, [da, db, junk_dim_a, junk_dim_b], [0, 2, 1, 3])
    w = kron(data.w_a, data.w_b)
    state = w @ full @ w.conj().T
    state = 0.5 * (state + state.conj().T)

    def lift(m: Povm, junk: int, u: np.ndarray) -> Povm:
        return m.tensor_identity(junk).conjugated(u)

    alice = tuple(lift(m, junk_dim_a, data.w_a) for m in real.alice)
    bob = tuple(lift(m, junk_dim_b, data.w_b) for m in real.bob)
    hats = None
    if real.hats is not None:
        hats = tuple(lift(m, junk_dim_b, data.w_b) for m in real.hats)
    meta = dict(real.meta, junk_a=junk_dim_a, junk_b=junk_dim_b, seed=seed)
    return Realization(state, da * junk_dim_a, db * junk_dim_b, alice, bob,
                       real.key_alice, real.key_bob, hats, meta)


def with_key_noise(real: Realization, q: float) -> Realization:
    """Replace Bob's key measurement by one that shifts the outcome cyclically with probability q."""
    if not 0.0 <= q <= 1.0:
        raise ParameterError(f"flip probability must lie in [0, 1], got {q}")
    key = real.bob[real.key_bob]
    k = key.n_outcomes
    noisy = Povm(tuple((1 - q) * key[b] + q * key[(b - 1) % k] for b in range(k)))
    bob = list(real.bob)
    bob[real.key_bob] = noisy
    return Realization(real.state, real.dim_a, real.dim_b, real.alice, tuple(bob),
                       real.key_alice, real.key_bob, real.hats, dict(real.meta, noise=q))


def parse_measurements(data: dict) -> list[Povm]:
    """Measurements from the plug-in JSON layout.

    ``{"dim": n, "settings": [{"outcomes": [matrix, ...]}, ...]}`` where every
    matrix is a list of rows and every entry is a ``[re, im]`` pair.
    """
    try:
        dim = int(data["dim"])
        settings = data["settings"]
    except (KeyError, TypeError, ValueError) as exc:
        raise PovmError(f"malformed measurement file: {exc}") from None
    out = []
    for i, setting in enumerate(settings):
        effects = []
        for a, raw in enumerate(setting["outcomes"]):
            arr = np.asarray(raw, dtype=float)
            if arr.shape != (dim, dim, 2):
                raise PovmError(f"setting {i} outcome {a} has shape {arr.shape}, expected {(dim, dim, 2)}")
            effects.append(arr[..., 0] + 1j * arr[..., 1])
        try:
            out.append(Povm(tuple(effects)))
        except PovmError as exc:
            raise PovmError(f"setting {i}: {exc}") from None
    return out


def load_measurements(path) -> list[Povm]:
    return parse_measurements(json.loads(Path(path).read_text()))


def dump_measurements(povms) -> dict:
    povms = list(povms)
    dim = povms[0].dim if povms else 0
    return {
        "dim": dim,
        "settings": [
            {"outcomes": [np.stack([e.real, e.imag], axis=-1).tolist() for e in m.effects]}
            for m in povms
        ],
    }
