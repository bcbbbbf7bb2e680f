"""The local polytope: deterministic strategies, local bounds, l1 distances."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .construction import ParameterError, Scenario
from .keyrate import Correlation, CorrelationError
from .simplex import MAX_ITER, PIVOT_TOL, revised_simplex

VERTEX_CAP = 10**6


class VertexCapError(RuntimeError):
    def __init__(self, count: int, cap: int):
        super().__init__(f"scenario has {count} deterministic strategies, cap is {cap}")
        self.count = count
        self.cap = cap


class DeterministicStrategy(NamedTuple):
    alice: tuple[int, ...]
    bob: tuple[int, ...]


def _check_cap(s: Scenario, cap: int) -> int:
    count = s.vertex_count()
    if count > cap:
        raise VertexCapError(count, cap)
    return int(count)


def enumerate_vertices(s: Scenario, cap: int = VERTEX_CAP) -> Iterator[DeterministicStrategy]:
    """Lazily yield every deterministic strategy once, Alice's assignment varying slowest."""
    _check_cap(s, cap)
    alice_ranges = [range(k) for k in s.alice_outcomes]
    bob_ranges = [range(k) for k in s.bob_outcomes]
    for la in itertools.product(*alice_ranges):
        for lb in itertools.product(*bob_ranges):
            yield DeterministicStrategy(la, lb)


def _assignment_arrays(s: Scenario, cap: int):
    _check_cap(s, cap)
    la = np.array(list(itertools.product(*[range(k) for k in s.alice_outcomes])), dtype=np.int64)
    lb = np.array(list(itertools.product(*[range(k) for k in s.bob_outcomes])), dtype=np.int64)
    la = la.reshape(-1, s.alice_settings)
    lb = lb.reshape(-1, s.bob_settings)
    return la, lb


def deterministic_correlation(strategy: DeterministicStrategy, s: Scenario) -> Correlation:
    values = np.zeros(s.shape)
    for x, a in enumerate(strategy.alice):
        for y, b in enumerate(strategy.bob):
            values[x, y, a, b] = 1.0
    return Correlation(s, values)


@dataclass(frozen=True)
class BellFunctional:
    """Coefficients c(a, b, x, y) stored zero-padded as [x, y, a, b]."""

    scenario: Scenario
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.shape != self.scenario.shape:
            raise ParameterError(f"coefficients have shape {c.shape}, scenario needs {self.scenario.shape}")
        object.__setattr__(self, "coefficients", np.where(self.scenario.mask(), c, 0.0))

    def value(self, corr: Correlation) -> float:
        if corr.scenario != self.scenario:
            raise CorrelationError("functional and correlation scenarios differ")
        return float(np.sum(self.coefficients * corr.values))

    def to_dict(self) -> dict:
        s = self.scenario
        c = [[self.coefficients[x, y, :s.alice_outcomes[x], :s.bob_outcomes[y]].tolist()
              for y in range(s.bob_settings)] for x in range(s.alice_settings)]
        return {"scenario": s.to_dict(), "c": c}

    @classmethod
    def from_dict(cls, data: dict) -> "BellFunctional":
        try:
            s = Scenario.from_dict(data["scenario"])
            raw = data["c"]
            c = np.zeros(s.shape)
            if len(raw) != s.alice_settings:
                raise ParameterError("number of x blocks disagrees with scenario")
            for x in range(s.alice_settings):
                if len(raw[x]) != s.bob_settings:
                    raise ParameterError(f"number of y blocks at x={x} disagrees with scenario")
                for y in range(s.bob_settings):
                    block = np.asarray(raw[x][y], dtype=float)
                    expected = (s.alice_outcomes[x], s.bob_outcomes[y])
                    if block.shape != expected:
                        raise ParameterError(f"block (x={x}, y={y}) has shape {block.shape}, expected {expected}")
                    c[x, y, :expected[0], :expected[1]] = block
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ParameterError):
                raise
            raise ParameterError(f"malformed functional: {exc}") from None
        return cls(s, c)


def load_functional(path) -> BellFunctional:
    return BellFunctional.from_dict(json.loads(Path(path).read_text()))


def chsh_functional() -> BellFunctional:
    """sum_{xy} (-1)^{xy} E_xy written on probabilities; local bound 2."""
    s = Scenario.uniform(2, 2, 2, 2)
    c = np.zeros(s.shape)
    for x, y, a, b in itertools.product(range(2), repeat=4):
        c[x, y, a, b] = (-1) ** (x * y + a + b)
    return BellFunctional(s, c)


def best_local_strategy(f: BellFunctional, cap: int = VERTEX_CAP) -> tuple[float, DeterministicStrategy]:
    """Maximum of f over deterministic strategies together with a maximiser.

    Alice's assignments are enumerated; Bob best-responds setting by setting,
    which reaches the same maximum as enumerating every vertex. Integer
    coefficients are summed in integer arithmetic.
    """
    s = f.scenario
    la, _ = _assignment_arrays(Scenario(s.alice_outcomes, (1,)), cap)
    _check_cap(s, cap)
    c = f.coefficients
    integral = np.array_equal(c, np.round(c))
    if integral:
        c = np.round(c).astype(np.int64)
    x_idx = np.arange(s.alice_settings)
    # scores[alice, y, b] = sum_x c[x, y, la[alice, x], b]
    scores = c[x_idx[None, :], :, la, :].sum(axis=1)
    bob_mask = np.zeros((s.bob_settings, s.shape[3]), dtype=bool)
    for y, k in enumerate(s.bob_outcomes):
        bob_mask[y, :k] = True
    low = np.iinfo(np.int64).min // 4 if integral else -np.inf
    scores = np.where(bob_mask[None], scores, low)
    best_b = scores.argmax(axis=2)
    totals = scores.max(axis=2).sum(axis=1)
    i = int(totals.argmax())
    strategy = DeterministicStrategy(tuple(int(v) for v in la[i]), tuple(int(v) for v in best_b[i]))
    value = int(totals[i]) if integral else float(totals[i])
    return float(value), strategy


def local_bound(f: BellFunctional, cap: int = VERTEX_CAP) -> float:
    return best_local_strategy(f, cap)[0]


def l1_between(p: Correlation, q: Correlation) -> float:
    """Unnormalised sum over (a, b, x, y) of |p - q|."""
    if p.scenario != q.scenario:
        raise CorrelationError("correlations live in different scenarios")
    return float(np.abs(p.values - q.values).sum())


@dataclass(frozen=True)
class DistanceReport:
    distance: float
    weights: list[tuple[int, float]]
    iterations: int
    status: str
    local_model: Correlation
    per_setting: np.ndarray

    @property
    def max_per_setting(self) -> float:
        return float(self.per_setting.max())

    @property
    def mean_per_setting(self) -> float:
        return float(self.per_setting.mean())

    def vertices(self) -> list[DeterministicStrategy]:
        s = self.local_model.scenario
        la, lb = _assignment_arrays(s, VERTEX_CAP)
        out = []
        for v, _ in self.weights:
            ia, ib = divmod(v, lb.shape[0])
            out.append(DeterministicStrategy(tuple(int(t) for t in la[ia]),
                                             tuple(int(t) for t in lb[ib])))
        return out

    def to_dict(self) -> dict:
        return {
            "distance": self.distance,
            "status": self.status,
            "iterations": self.iterations,
            "max_per_setting": self.max_per_setting,
            "mean_per_setting": self.mean_per_setting,
            "weights": [[int(v), float(w)] for v, w in self.weights],
            "vertices": [{"alice": list(v.alice), "bob": list(v.bob)} for v in self.vertices()],
        }


def vertex_matrix(s: Scenario, cap: int = VERTEX_CAP) -> tuple[np.ndarray, np.ndarray]:
    """0/1 matrix with one column per vertex over the flattened valid entries.

    Returns the matrix and the flat positions (into the padded tensor) of
    its rows. Vertex order matches :func:`enumerate_vertices`.
    """
    la, lb = _assignment_arrays(s, cap)
    mask = s.mask()
    flat = np.flatnonzero(mask.ravel())
    row_of = -np.ones(mask.size, dtype=np.int64)
    row_of[flat] = np.arange(flat.size)
    row_of = row_of.reshape(mask.shape)
    n_vert = la.shape[0] * lb.shape[0]
    mat = np.zeros((flat.size, n_vert))
    cols = np.arange(n_vert)
    ia = np.repeat(np.arange(la.shape[0]), lb.shape[0])
    ib = np.tile(np.arange(lb.shape[0]), la.shape[0])
    for x in range(s.alice_settings):
        for y in range(s.bob_settings):
            rows = row_of[x, y, la[ia, x], lb[ib, y]]
            mat[rows, cols] = 1.0
    return mat, flat


def l1_distance_to_local(corr: Correlation, cap: int = VERTEX_CAP,
                         max_iter: int = MAX_ITER, tol: float = PIVOT_TOL) -> DistanceReport:
    """min over local q of sum |p - q|, solved as an LP over vertex weights.

    Variables: weights w_v >= 0 with sum 1 and a slack pair per entry, so
    that sum_v w_v p_v + s+ - s- = p. The objective is sum (s+ + s-).
    """
    s = corr.scenario
    verts, flat = vertex_matrix(s, cap)
    p = corr.values.ravel()[flat]
    n_ent, n_vert = verts.shape
    eye = np.eye(n_ent)
    a_eq = np.zeros((n_ent + 1, n_vert + 2 * n_ent))
    a_eq[:n_ent, :n_vert] = verts
    a_eq[:n_ent, n_vert:n_vert + n_ent] = eye
    a_eq[:n_ent, n_vert + n_ent:] = -eye
    a_eq[n_ent, :n_vert] = 1.0
    b_eq = np.concatenate([p, [1.0]])
    c = np.concatenate([np.zeros(n_vert), np.ones(2 * n_ent)])

    # start from the closest single vertex
    start = int(np.abs(verts - p[:, None]).sum(axis=0).argmin())
    resid = p - verts[:, start]
    basis = [start] + [n_vert + e if resid[e] >= 0 else n_vert + n_ent + e for e in range(n_ent)]
    result = revised_simplex(c, a_eq, b_eq, basis=basis, tol=tol, max_iter=max_iter)

    w = result.x[:n_vert]
    w = np.where(w > 1e-13, w, 0.0)
    if w.sum() > 0:
        w = w / w.sum()
    model_flat = verts @ w
    values = np.zeros(corr.values.size)
    values[flat] = model_flat
    model = Correlation(s, values.reshape(s.shape))
    diff = np.abs(corr.values - model.values)
    distance = float(diff.sum())
    per_setting = diff.sum(axis=(2, 3))
    weights = [(int(v), float(w[v])) for v in np.flatnonzero(w)]
    return DistanceReport(distance, weights, result.iterations, result.status, model, per_setting)
