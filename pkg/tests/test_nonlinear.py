import json
import math

import numpy as np
import pytest

from fracplap import (ConfigurationError, PowerTerm, PreconditionError, ProblemSpec, Refusal,
                      SolverConfig, WeightSpec, assemble, build_grid, minimize, mountain_pass,
                      multi_solution_search, phi, phi_gradient, weighted_integral)
from fracplap.nonlinear import sign_change_seed


@pytest.fixture(scope="module")
def E128():
    return assemble(build_grid(-1, 1, 128), 0.5, 2.0)


@pytest.fixture(scope="module")
def mp4(E128):
    return mountain_pass(ProblemSpec(0.5, 2.0, 4.0), E128)


@pytest.fixture(scope="module")
def min15(E128):
    return minimize(ProblemSpec(0.5, 2.0, 1.5), E128)


def l2(u, g):
    return math.sqrt(float(np.dot(g.weights, u * u)))


def test_spec_windows():
    with pytest.raises(ConfigurationError):
        ProblemSpec(0.5, 2.0, 2.0)
    with pytest.raises(ConfigurationError):
        ProblemSpec(0.3, 2.0, 6.0)
    with pytest.raises(ConfigurationError):
        ProblemSpec(0.5, 2.0, 4.0, perturbations=(PowerTerm(WeightSpec.constant(), 5.0),))
    with pytest.raises(ConfigurationError):
        ProblemSpec(0.5, 2.0, 1.5, K=WeightSpec.power(1.5))


def test_resonance_flag():
    spec = ProblemSpec(0.5, 2.0, 4.0, lam=8.0, lambda1=7.3)
    assert spec.flags


def test_phi_zero_and_homogeneity(E128):
    g = E128.grid
    spec = ProblemSpec(0.5, 2.0, 4.0)
    assert phi(spec, np.zeros(g.n), E128) == 0.0
    u = np.sin(np.pi * (g.nodes + 1) / 2)
    for t in (0.5, 2.0, 10.0):
        expect = t ** 2 * E128.energy(u) / 2 - t ** 4 * float(np.dot(g.weights, u ** 4)) / 4
        assert phi(spec, t * u, E128) == pytest.approx(expect, rel=1e-12)
    assert phi(spec, 100 * u, E128) < 0


def test_phi_term_by_term(E128, rng):
    g = E128.grid
    h, K, K1 = WeightSpec.power(0.3), WeightSpec.constant(1.5), WeightSpec.constant(0.25)
    spec = ProblemSpec(0.5, 2.0, 4.0, K=K, lam=1.2, h=h, perturbations=(PowerTerm(K1, 3.0),))
    u = g.function(rng.standard_normal(g.n))
    expect = (E128.energy(u) / 2 - 1.2 / 2 * weighted_integral(u, 2, h)
              - weighted_integral(u, 4, K) / 4 - weighted_integral(u, 3, K1) / 3)
    assert phi(spec, u, E128) == pytest.approx(expect, rel=1e-10)


@pytest.mark.parametrize("p,q", [(1.5, 1.2), (2.0, 4.0), (3.0, 4.5)])
def test_phi_gradient_fd(p, q, rng):
    g = build_grid(-1, 1, 48)
    E = assemble(g, 0.5, p)
    spec = ProblemSpec(0.5, p, q, lam=0.3)
    for _ in range(5):
        u, v = rng.standard_normal((2, g.n))
        eps = 1e-6
        fd = (phi(spec, u + eps * v, E) - phi(spec, u - eps * v, E)) / (2 * eps)
        assert np.dot(phi_gradient(spec, u, E).values, v) == pytest.approx(fd, rel=1e-6)


def test_phi_gradient_zero_and_scaling(E128):
    g = E128.grid
    spec = ProblemSpec(0.5, 2.0, 4.0, K=WeightSpec.constant(1.0))
    np.testing.assert_array_equal(phi_gradient(spec, np.zeros(g.n), E128).values, 0.0)
    # with the energy switched off only the q-term remains in the difference
    u = np.cos(g.nodes)
    base = phi_gradient(spec, u, E128).values - E128.gradient_values(u)
    scaled = phi_gradient(spec, 3 * u, E128).values - E128.gradient_values(3 * u)
    np.testing.assert_allclose(scaled, 3 ** 3 * base, rtol=1e-12)


def test_phi_is_even(E128, rng):
    spec = ProblemSpec(0.5, 2.0, 4.0, perturbations=(PowerTerm(WeightSpec.constant(0.2), 3.0),))
    u = rng.standard_normal(E128.grid.n)
    assert phi(spec, -u, E128) == pytest.approx(phi(spec, u, E128), rel=1e-15)


def test_minimize_sublinear(min15):
    assert min15.converged and min15.method == "minimize"
    assert min15.phi < 0 and min15.residual <= 1e-8


def test_minimize_refuses_without_forcing(E128):
    spec = ProblemSpec(0.5, 2.0, 1.5, K=WeightSpec.constant(0.0))
    assert isinstance(minimize(spec, E128), Refusal)


def test_minimize_sign_symmetry(E128, min15):
    seed = -sign_change_seed(E128.grid, 0)
    neg = minimize(ProblemSpec(0.5, 2.0, 1.5), E128, seed=seed)
    assert neg.phi == pytest.approx(min15.phi, rel=1e-8)
    np.testing.assert_allclose(neg.u.values, -min15.u.values, atol=1e-7)


def test_minimize_wrong_regime(E128):
    with pytest.raises(PreconditionError):
        minimize(ProblemSpec(0.5, 2.0, 4.0), E128)


def test_mountain_pass(mp4):
    assert mp4.converged and mp4.method == "mountain-pass"
    assert mp4.phi > 0 and mp4.residual <= 1e-6
    assert np.abs(mp4.u.values).max() > 0.1
    assert mp4.path_history


def test_mountain_pass_needs_positive_K(E128):
    spec = ProblemSpec(0.5, 2.0, 4.0, K=WeightSpec.constant(0.0))
    with pytest.raises(PreconditionError):
        mountain_pass(spec, E128)


def test_mountain_pass_perturbation_continuity(E128, mp4):
    deltas = []
    for amp in (0.4, 0.2, 0.1):
        spec = ProblemSpec(0.5, 2.0, 4.0,
                           perturbations=(PowerTerm(WeightSpec.constant(amp), 3.0),))
        r = mountain_pass(spec, E128)
        assert r.converged
        deltas.append(abs(r.phi - mp4.phi))
    assert deltas[0] > deltas[1] > deltas[2]


def test_homogeneous_scaling_map(E128, min15):
    # if u solves with K then t u solves with t^(p-q) K
    c = 0.5
    r = minimize(ProblemSpec(0.5, 2.0, 1.5, K=WeightSpec.constant(c)), E128)
    t = c ** (1 / (2.0 - 1.5))
    pred = t * min15.u.values
    assert np.abs(r.u.values - pred).max() <= 1e-6 * np.abs(pred).max()


@pytest.mark.parametrize("q", [1.5, 4.0])
def test_norm_trend(E128, q):
    g = E128.grid
    norms = []
    for c in (1.0, 0.5, 0.25, 0.125):
        spec = ProblemSpec(0.5, 2.0, q, K=WeightSpec.constant(c))
        r = (minimize if q < 2 else mountain_pass)(spec, E128)
        assert r.converged
        norms.append(l2(r.u.values, g))
    d = np.diff(norms)
    assert np.all(d < 0) if q < 2 else np.all(d > 0)


def test_multi_solution_search(E128, mp4):
    res = multi_solution_search(ProblemSpec(0.5, 2.0, 4.0), E128, count=2)
    assert len(res) == 2 and not res.shortfall
    assert 0 < res[0].phi < res[1].phi
    assert all(r.converged for r in res)
    assert res[0].phi == pytest.approx(mp4.phi, rel=1e-8)
    g = E128.grid
    a, b = res[0].u.values, res[1].u.values
    assert min(l2(a - b, g), l2(a + b, g)) > 1e-3 * max(l2(a, g), l2(b, g))
    data = json.loads(json.dumps(res.to_list()))
    assert [d["phi"] for d in data] == sorted(d["phi"] for d in data)


def test_multi_count_one_is_mountain_pass(E128, mp4):
    res = multi_solution_search(ProblemSpec(0.5, 2.0, 4.0), E128, count=1)
    assert len(res) == 1
    assert res[0].phi == pytest.approx(mp4.phi, rel=1e-8)


def test_multi_windows(E128):
    with pytest.raises(ConfigurationError):
        multi_solution_search(ProblemSpec(0.5, 2.0, 4.0), E128, count=5)
    with pytest.raises(PreconditionError):
        multi_solution_search(ProblemSpec(0.5, 2.0, 4.0, odd=False), E128)


def test_solve_result_json(mp4):
    d = json.loads(mp4.to_json())
    assert set(d) == {"phi", "residual", "method", "values"}
