"""Acceptance gate: one PASS/FAIL line per criterion with runtime.

Run with ``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""
import contextlib
import itertools
import json
import math
import sys
import time

import numpy as np
import pytest
from scipy.linalg import expm

from dikey.cli import main
from dikey.construction import (
    Povm,
    Realization,
    dilate,
    ideal_realization,
    overlap_closed_form,
    overlap_direct,
)
from dikey.keyrate import (
    Correlation,
    born_correlation,
    devetak_winter,
    extend_purification,
    h_a_given_e,
    sigma_ae,
)
from dikey.linalg import (
    kron,
    purify,
    random_density_matrix,
    random_isometry,
    random_unitary,
    shannon_entropy,
    von_neumann_entropy,
)
from dikey.locality import (
    chsh_functional,
    deterministic_correlation,
    enumerate_vertices,
    l1_between,
    l1_distance_to_local,
    local_bound,
)
from dikey.selftest import build_isometries, check_relations, run_selftest, verify_bob_projection

DIMS = (2, 3, 4, 5, 6)
EPS = (0.1, 0.3, 0.5, 0.7, 0.9)
GRID = list(itertools.product(DIMS, EPS))
SEEDS = range(5)


@contextlib.contextmanager
def criterion(number, title, budget, request=None):
    """Collect failure messages, then print a single PASS/FAIL line."""
    failures = []
    start = time.perf_counter()
    yield failures
    elapsed = time.perf_counter() - start
    if elapsed > budget:
        failures.append(f"runtime {elapsed:.1f}s over budget {budget:.0f}s")
    status = "PASS" if not failures else "FAIL"
    line = f"{status} criterion {number}: {title} ({elapsed:.2f}s, budget {budget:.0f}s)"
    if failures:
        line += " :: " + "; ".join(failures[:3])
    capman = request.config.pluginmanager.getplugin("capturemanager") if request else None
    ctx = capman.global_and_fixture_disabled() if capman else contextlib.nullcontext()
    with ctx:
        print("\n" + line, flush=True)
    assert not failures, line


def _certify_cli(d, eps, tmp_path):
    out = tmp_path / f"certify_{d}_{eps}.json"
    code = main(["certify", "--d", str(d), "--epsilon", str(eps), "--out", str(out)])
    return code, json.loads(out.read_text())


def test_criterion_1_key_rate(request, tmp_path):
    with criterion(1, "dw_rate = log2(d) on the 5x5 grid", 5, request) as fail:
        for d, eps in GRID:
            code, report = _certify_cli(d, eps, tmp_path)
            err = abs(report["dw_rate"] - math.log2(d))
            if code != 0 or err > 1e-8:
                fail.append(f"(d={d}, eps={eps}) exit {code}, |dw - log2 d| = {err:.2e}")


def test_criterion_2_privacy_pinning(request):
    with criterion(2, "H(A|E) = log2(d) on dilated 2x2 junk, 5 seeds", 60, request) as fail:
        for (d, eps), seed in itertools.product(GRID, SEEDS):
            real = dilate(ideal_realization(d, eps), 2, 2, seed)
            rep = devetak_winter(real)
            err = abs(rep.h_a_given_e - math.log2(d))
            if err > 1e-8 or rep.product_form_residual > 1e-8:
                fail.append(f"(d={d}, eps={eps}, seed={seed}) err {err:.2e}, "
                            f"product form {rep.product_form_residual:.2e}")


def _perturbed_q(real, angle=0.1):
    d = real.dim_a
    # real plus imaginary part: a purely real rotation leaves circular states unchanged
    gen = np.zeros((d, d), dtype=complex)
    gen[0, 1], gen[1, 0] = -1.0 + 1j, 1.0 + 1j
    return real.alice[1].conjugated(expm(angle * gen))


def test_criterion_3_selftest_suite(request):
    with criterion(3, "self-test residuals <= 1e-8 with negative controls > 1e-3", 60, request) as fail:
        for d, eps in GRID:
            for real in (ideal_realization(d, eps), dilate(ideal_realization(d, eps), 2, 2, 0)):
                rep = run_selftest(real)
                if rep.max_residual > 1e-8:
                    fail.append(f"(d={d}, eps={eps}, dim_a={real.dim_a}) residual {rep.max_residual:.2e}")
            ideal = ideal_realization(d, eps)
            o = overlap_direct(d, eps)
            rel = check_relations(ideal.alice[0], _perturbed_q(ideal), o)
            if rel.max_residual <= 1e-3:
                fail.append(f"(d={d}, eps={eps}) perturbed Q residual only {rel.max_residual:.2e}")
            p_hat, q_hat = ideal.hats
            mixed = Povm(tuple(0.8 * e + 0.2 * np.eye(d) / d for e in p_hat))
            iso = build_isometries(ideal.alice[0], ideal.alice[1], mixed, q_hat, o)
            bob = verify_bob_projection(iso)
            if bob <= 1e-3:
                fail.append(f"(d={d}, eps={eps}) non-projective hats residual only {bob:.2e}")


def test_criterion_4_overlap_closed_form(request):
    with criterion(4, "overlap direct vs closed form on 200 samples", 5, request) as fail:
        rng = np.random.default_rng(2024)
        for _ in range(200):
            d = int(rng.integers(2, 9))
            eps = float(rng.uniform(1e-6, 1 - 1e-6))
            direct, closed = overlap_direct(d, eps), overlap_closed_form(d, eps)
            err = np.abs(direct.entries - closed.entries).max()
            if err > 1e-10 or min(direct.min_entry(), closed.min_entry()) <= 0:
                fail.append(f"(d={d}, eps={eps:.6f}) err {err:.2e}")


def test_criterion_5_vanishing_nonlocality(request):
    with criterion(5, "l1 to eps=0 vanishes and bounds the LP distance", 120, request) as fail:
        p0 = born_correlation(ideal_realization(2, 0.0))
        d0 = l1_distance_to_local(p0).distance
        if d0 > 1e-9:
            fail.append(f"p_0 LP distance {d0:.2e}")
        prev = math.inf
        for k in range(1, 7):
            eps = 10.0 ** -k
            pe = born_correlation(ideal_realization(2, eps))
            l1 = l1_between(pe, p0)
            lp = l1_distance_to_local(pe)
            if not l1 < prev:
                fail.append(f"eps={eps:g}: l1 {l1:.3e} not below previous {prev:.3e}")
            if not l1 < 10 * eps:
                fail.append(f"eps={eps:g}: l1 {l1:.3e} not below 10 eps")
            if lp.status != "optimal" or lp.distance > l1 + 1e-9:
                fail.append(f"eps={eps:g}: LP {lp.status} {lp.distance:.3e} > l1 {l1:.3e}")
            prev = l1


def test_criterion_6_lp_sanity(request):
    with criterion(6, "CHSH local bound 2, PR distance > 0.4, vertices local", 5, request) as fail:
        bound = local_bound(chsh_functional())
        if bound != 2.0:
            fail.append(f"CHSH local bound {bound!r}")
        s = chsh_functional().scenario
        pr = np.zeros(s.shape)
        for x, y, a, b in itertools.product(range(2), repeat=4):
            pr[x, y, a, b] = 0.5 * ((a ^ b) == (x & y))
        dist = l1_distance_to_local(Correlation(s, pr)).distance
        if not dist > 0.4:
            fail.append(f"PR distance {dist:.3e}")
        for v in enumerate_vertices(s):
            dv = l1_distance_to_local(deterministic_correlation(v, s)).distance
            if dv > 1e-9:
                fail.append(f"vertex {v} distance {dv:.2e}")


def _random_projective(dim, k, rng):
    u = random_unitary(dim, rng)
    groups = np.array_split(np.arange(dim), k)
    return Povm(tuple(u[:, g] @ u[:, g].conj().T for g in groups))


def test_criterion_7_entropy_properties(request):
    with criterion(7, "additivity, purification independence, entropy bounds", 60, request) as fail:
        rng = np.random.default_rng(7)
        for i in range(100):
            # additivity
            rho = random_density_matrix(int(rng.integers(2, 5)), rng)
            sigma = random_density_matrix(int(rng.integers(2, 5)), rng)
            gap = abs(von_neumann_entropy(kron(rho, sigma))
                      - von_neumann_entropy(rho) - von_neumann_entropy(sigma))
            if gap > 1e-8:
                fail.append(f"instance {i}: additivity gap {gap:.2e}")
            # random model: state, Alice key POVM, Bob key POVM
            da, db = int(rng.integers(2, 4)), int(rng.integers(2, 4))
            k = int(rng.integers(2, da + 1))
            state = random_density_matrix(da * db, rng, rank=int(rng.integers(1, da * db + 1)))
            alice = _random_projective(da, k, rng)
            bob = _random_projective(db, int(rng.integers(1, db + 1)), rng)
            real = Realization(state, da, db, (alice,), (bob,))
            psi = purify(state)
            hae = h_a_given_e(sigma_ae(real, psi))
            if not -1e-9 <= hae <= math.log2(k) + 1e-9:
                fail.append(f"instance {i}: H(A|E) = {hae:.6f} outside [0, log2 {k}]")
            r = psi.size // (da * db)
            extended = extend_purification(psi, da * db, random_isometry(r, r + int(rng.integers(1, 4)), rng))
            diff = abs(h_a_given_e(sigma_ae(real, extended)) - hae)
            if diff > 1e-8:
                fail.append(f"instance {i}: purification dependence {diff:.2e}")
            # H(A|E) <= H(A)
            h_a = shannon_entropy(born_correlation(real).alice_marginal(0))
            if hae > h_a + 1e-9:
                fail.append(f"instance {i}: H(A|E) {hae:.6f} exceeds H(A) {h_a:.6f}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
