"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line; the lines are repeated
in the terminal summary. Run ``python3 tests/test_acceptance.py`` for the
lines alone.
"""

import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest
import scipy.integrate
import scipy.linalg
from scipy.special import roots_legendre

from fracplap import (ClassQuery, PowerTerm, ProblemSpec, Refusal, WeightSpec, assemble,
                      build_grid, check_class, first_eigenpair, hardy_constant, lattice_supremal_beta,
                      minimize, moser_certify, mountain_pass, multi_solution_search, phi,
                      phi_gradient, scaling_check, supremal_beta, to_bq)
from fracplap.weights import critical_exponent

LINES = []


def report(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}"
    LINES.append(line)
    print(line)
    assert ok, line


def independent_pencil(grid, s):
    """p = 2 stiffness and mass built without the package's assembly."""
    n, h, x = grid.n, grid.h, grid.nodes
    sp = 2 * s
    xi, wq = roots_legendre(4)
    t, wq = 0.5 * (xi + 1), 0.5 * wq
    adj = h ** (1 - sp) * sum(wq[a] * wq[b] * (1 + t[b] - t[a]) ** (-1 - sp)
                              for a in range(4) for b in range(4))
    D = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(D, 1.0)
    C = 2 * h * h * D ** (-1 - sp)
    np.fill_diagonal(C, 0.0)
    idx = np.arange(n - 1)
    C[idx, idx + 1] = C[idx + 1, idx] = 2 * adj
    tail = np.array([2 * h * (scipy.integrate.quad(lambda y: (xi_ - y) ** (-1 - sp), -np.inf, grid.A)[0]
                              + scipy.integrate.quad(lambda y: (y - xi_) ** (-1 - sp), grid.B, np.inf)[0])
                     for xi_ in x])
    K = np.diag(C.sum(axis=1) + tail) - C
    return K, np.diag(np.full(n, h))


def test_criterion_01_p2_oracle():
    g = build_grid(-1, 1, 256)
    K, M = independent_pencil(g, 0.5)
    lam_ref = scipy.linalg.eigh(K, M, eigvals_only=True)[0]
    t0 = time.perf_counter()
    r = first_eigenpair(assemble(g, 0.5, 2.0), WeightSpec.constant())
    dt = time.perf_counter() - t0
    rel = abs(r.lam - lam_ref) / lam_ref
    report(1, rel <= 1e-6 and dt <= 10.0,
           f"lambda={r.lam:.10f} oracle={lam_ref:.10f} rel={rel:.2e} time={dt:.2f}s")


def test_criterion_02_gradient_checks():
    rng = np.random.default_rng(2)
    g = build_grid(-1, 1, 64)
    worst = 0.0
    for p in (1.5, 2.0, 3.0):
        E = assemble(g, 0.5, p)
        q = 1.2 if p < 2 else 4.0
        spec = ProblemSpec(0.5, p, q, lam=0.5)
        for _ in range(20):
            u, v = rng.standard_normal((2, g.n))
            eps = 1e-6
            fd_e = (E.energy(u + eps * v) - E.energy(u - eps * v)) / (2 * eps * p)
            an_e = float(np.dot(E.gradient_values(u), v))
            fd_p = (phi(spec, u + eps * v, E) - phi(spec, u - eps * v, E)) / (2 * eps)
            an_p = float(np.dot(phi_gradient(spec, u, E).values, v))
            worst = max(worst, abs(fd_e - an_e) / abs(an_e), abs(fd_p - an_p) / abs(an_p))
    report(2, worst <= 1e-6, f"max relative FD mismatch {worst:.2e} over 3x20 functions")


def test_criterion_03_homogeneity():
    rng = np.random.default_rng(3)
    g = build_grid(-1, 1, 128)
    worst = 0.0
    for p in (1.5, 2.0, 3.0):
        E = assemble(g, 0.5, p)
        u, v = rng.standard_normal((2, g.n))
        for t in (0.3, 2.0, 7.5):
            worst = max(worst,
                        abs(E.energy(t * u) - t ** p * E.energy(u)) / (t ** p * E.energy(u)),
                        abs(E.weak_action(t * u, v) - t ** (p - 1) * E.weak_action(u, v))
                        / abs(t ** (p - 1) * E.weak_action(u, v)))
    E = assemble(g, 0.5, 2.5)
    lam = first_eigenpair(E, WeightSpec.constant()).lam
    for c in (0.5, 3.0):
        lc = first_eigenpair(E, WeightSpec.constant(c)).lam
        worst = max(worst, abs(lc - lam / c) / (lam / c))
    report(3, worst <= 1e-10, f"max relative defect {worst:.2e}")


def test_criterion_04_weight_boundary():
    cq = ClassQuery("B_q", 1, 0.5, 2, 2)
    checker = supremal_beta(cq)
    lattice = lattice_supremal_beta(cq)
    # admissibility: beta < s a + 1/r, maximised over the feasible (a, r)
    a = np.linspace(0, cq.a_max, 100001)
    analytic = float(np.max(cq.s * a + np.minimum(cq.budget(a), 1.0)))
    accept = bool(check_class(WeightSpec.power(1 - 2e-3), cq))
    reject = not check_class(WeightSpec.power(1 + 2e-3), cq)
    ok = (abs(checker - 1) <= 1e-3 and abs(lattice - 1) <= 1e-3 and abs(analytic - 1) <= 1e-3
          and accept and reject)
    report(4, ok, f"checker={checker:.6f} lattice={lattice:.6f} criterion={analytic:.6f}")


def test_criterion_05_inclusions():
    rng = np.random.default_rng(5)
    converted = failures = 0
    while converted < 100:
        s, p = rng.uniform(0.1, 0.9), rng.uniform(1.2, 4.0)
        ps = critical_exponent(1, s, p)
        q = rng.uniform(1.0, min(ps, 6.0))
        cert = check_class(WeightSpec.power(rng.uniform(0, 1.2)), ClassQuery("A_q", 1, s, p, q))
        if not cert:
            continue
        b = to_bq(cert)
        converted += 1
        if not b or b.a != 0.0 or b.cls != "B_q":
            failures += 1
    tilde = tfail = 0
    for s in np.linspace(0.1, 0.45, 8):
        for p in (1.5, 2.0):
            for q in (1.0, 1.5, 2.0):
                if not q < critical_exponent(1, s, p):
                    continue
                for beta in (0.0, 0.1, 0.3):
                    cert = check_class(WeightSpec.power(beta), ClassQuery("Btilde_q", 1, s, p, q))
                    if cert:
                        tilde += 1
                        tfail += not to_bq(cert)
    report(5, failures == 0 and tfail == 0 and tilde > 0,
           f"A_q->B_q {converted} converted, {failures} failures; "
           f"Btilde->B_q {tilde} converted, {tfail} failures")


def test_criterion_06_hardy():
    details, ok = [], True
    for sp in (0.8, 1.0, 1.2):
        consts = []
        for n in (128, 256):
            rep = hardy_constant(assemble(build_grid(-1, 1, n), sp / 2, 2.0))
            ok &= rep.size == 50 and all(math.isfinite(r) and r >= 0 for r in rep.ratios)
            consts.append(rep.constant)
        var = abs(consts[1] - consts[0]) / consts[0]
        ok &= var <= 0.10
        details.append(f"sp={sp}: C={consts[1]:.4f} var={var:.2%}")
    report(6, ok, "; ".join(details))


def test_criterion_07_moser():
    g = build_grid(-1, 1, 256)
    E = assemble(g, 0.5, 2.0)
    h = WeightSpec.constant()
    eig = first_eigenpair(E, h)
    cert = check_class(h, ClassQuery("B_q", 1, 0.5, 2, 2))
    mc = moser_certify(eig.u, eig.lam, h, cert)
    ok = (mc.issued and mc.violation is None and mc.terminal_k <= 60
          and mc.U[mc.terminal_k] <= 1e-10 and mc.bound >= mc.direct_max)
    report(7, ok, f"issued={mc.issued} terminal_k={mc.terminal_k} bound={mc.bound:.4f} "
                  f"direct_max={mc.direct_max:.4f}")


def test_criterion_08_mountain_pass_and_minimize():
    E = assemble(build_grid(-1, 1, 128), 0.5, 2.0)
    t0 = time.perf_counter()
    mp = mountain_pass(ProblemSpec(0.5, 2.0, 4.0), E)
    dt = time.perf_counter() - t0
    mn = minimize(ProblemSpec(0.5, 2.0, 1.5), E)
    ok = (mp.phi > 0 and mp.residual <= 1e-6 and dt <= 60 and np.abs(mp.u.values).max() > 0
          and mn.phi < 0 and mn.residual <= 1e-8)
    report(8, ok, f"mountain pass phi={mp.phi:.6f} res={mp.residual:.1e} time={dt:.2f}s; "
                  f"minimize phi={mn.phi:.3e} res={mn.residual:.1e}")


def test_criterion_09_norm_trend():
    g = build_grid(-1, 1, 128)
    E = assemble(g, 0.5, 2.0)
    trends = {}
    for q in (1.5, 4.0):
        norms = []
        for c in (1.0, 0.5, 0.25, 0.125):
            spec = ProblemSpec(0.5, 2.0, q, K=WeightSpec.constant(c))
            r = (minimize if q < 2 else mountain_pass)(spec, E)
            norms.append(math.sqrt(float(np.dot(g.weights, r.u.values ** 2))) if r.converged
                         else math.nan)
        trends[q] = norms
    ok = bool(np.all(np.diff(trends[1.5]) < 0) and np.all(np.diff(trends[4.0]) > 0))
    fmt = lambda v: "[" + ", ".join(f"{x:.4g}" for x in v) + "]"
    report(9, ok, f"q<p norms {fmt(trends[1.5])}; q>p norms {fmt(trends[4.0])}")


def test_criterion_10_scaling_law():
    g = build_grid(-1, 1, 128)
    f = 1 + 0.5 * g.nodes ** 2
    errs = {p: scaling_check(assemble(g, 0.5, p), f, [8.0]).max_error for p in (1.5, 2.0, 3.0)}
    report(10, all(e <= 1e-6 for e in errs.values()),
           " ".join(f"p={p}: {e:.1e}" for p, e in errs.items()))


def test_criterion_11_multiplicity():
    E = assemble(build_grid(-1, 1, 128), 0.5, 2.0)
    res = multi_solution_search(ProblemSpec(0.5, 2.0, 4.0), E, count=2)
    ok = (len(res) == 2 and not res.shortfall and all(r.converged for r in res)
          and 0 < res[0].phi < res[1].phi)
    report(11, ok, "phi = " + ", ".join(f"{r.phi:.6f}" for r in res))


def test_criterion_12_determinism(tmp_path):
    runs = [["eig", "--p", "2.5", "--n", "64", "--init", "random", "--seed", "7"],
            ["multi", "--q", "4", "--n", "64", "--count", "2"],
            ["hardy", "--s", "0.6", "--n", "64"],
            ["check-weight", "--beta", "0.9", "--q", "2"]]
    same = True
    for i, args in enumerate(runs):
        blobs = []
        for k in range(2):
            out = tmp_path / f"{i}_{k}"
            subprocess.run([sys.executable, "-m", "fracplap.cli", *args, "--out", str(out)],
                           check=False, capture_output=True)
            blobs.append(sorted((p.name, p.read_bytes()) for p in out.iterdir()))
        same &= blobs[0] == blobs[1] and len(blobs[0]) > 0
    report(12, same, f"{len(runs)} commands run twice, artifacts byte-identical={same}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
