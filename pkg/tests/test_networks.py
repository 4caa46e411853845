import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayesmet import bounds, estimation, networks as nw, probes
from bayesmet.priors import FlatPrior

G_EXAMPLE = (8 + 10 * math.pi + 2 * math.pi**2) / (20 + 5 * math.pi**2)


def example_functions():
    v = np.array([[2 / math.sqrt(4 + math.pi**2), 2 / math.sqrt(5)],
                  [math.pi / math.sqrt(4 + math.pi**2), 1 / math.sqrt(5)]])
    return nw.LinearFunctions(v, [0.5, 0.5])


def test_qfim_eigenvalues_and_inverse():
    spec = nw.NetworkSpec(d=4, v=0.25, j=0.3)
    f, finv = nw.qfim_sensor_symmetric(spec)
    vals = np.sort(np.linalg.eigvalsh(f))
    expect = sorted([4 * spec.v * (1 + 3 * spec.j)] + [4 * spec.v * (1 - spec.j)] * 3)
    assert np.allclose(vals, expect)
    assert np.abs(f @ finv - np.eye(4)).max() <= 1e-10


def test_qfim_rejects_singular_j():
    with pytest.raises(Exception):
        nw.NetworkSpec(d=2, v=0.25, j=1.0)
    with pytest.raises(Exception):
        nw.NetworkSpec(d=3, v=0.25, j=-0.5)


def test_geometry_examples():
    n, g = nw.geometry(example_functions(), 2)
    assert n == pytest.approx(1.0, abs=1e-12)
    assert g == pytest.approx(G_EXAMPLE, abs=1e-12)
    # orthogonal V with uniform weights: G = 0
    n, g = nw.geometry(nw.LinearFunctions.identity(3), 3)
    assert g == pytest.approx(0.0, abs=1e-12)
    # single function along the ones vector: G = d - 1
    d = 4
    ones = nw.LinearFunctions(np.ones((d, 1)), [1.0])
    _, g = nw.geometry(ones, d)
    assert g == pytest.approx(d - 1, abs=1e-12)


def test_asymptotic_error_trivial_case():
    spec = nw.NetworkSpec(d=3, v=0.25, j=1e-12)
    err = nw.asymptotic_error(spec, nw.LinearFunctions.identity(3), 1)
    assert err == pytest.approx(1.0, abs=1e-9)  # N/(4 mu v) with h = 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_asymptotic_error_matrix_oracle(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 6))
    l = int(rng.integers(1, d + 1))
    v = rng.normal(size=(d, l))
    w = rng.random(l) + 0.1
    w /= w.sum()
    j = float(rng.uniform(1 / (1 - d) + 0.05, 0.95))
    spec = nw.NetworkSpec(d=d, v=0.25, j=j)
    funcs = nw.LinearFunctions(v, w)
    _, finv = nw.qfim_sensor_symmetric(spec)
    oracle = float(np.trace(funcs.wf @ funcs.v.T @ finv @ funcs.v))
    assert nw.asymptotic_error(spec, funcs, 1) == pytest.approx(oracle, rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 3.0))
def test_asymptotic_error_homogeneity(seed, scale):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(3, 2))
    funcs = nw.LinearFunctions(v, [0.4, 0.6])
    scaled = nw.LinearFunctions(scale * v, [0.4, 0.6])
    spec = nw.NetworkSpec(d=3, v=0.25, j=0.2)
    a = nw.asymptotic_error(spec, funcs, 7)
    b = nw.asymptotic_error(spec, scaled, 7)
    assert b == pytest.approx(scale**2 * a, rel=1e-12)


def test_j_opt_values():
    assert nw.j_opt(0.0, 2) == pytest.approx(0.0, abs=1e-12)
    assert nw.j_opt(0.0, 5) == pytest.approx(0.0, abs=1e-12)
    assert nw.j_opt(G_EXAMPLE, 2) == pytest.approx(0.561, abs=1e-3)
    assert nw.j_opt(2.0, 4) == pytest.approx(2 / 6, abs=1e-12)  # removable limit


@pytest.mark.parametrize("d", [2, 3, 5, 10])
def test_j_opt_matches_dense_scan(d):
    for g in np.linspace(-0.9, d - 1 - 0.1, 10):
        js = np.linspace(1 / (1 - d) + 1e-4, 1 - 1e-4, 5000)
        h = nw.correlation_link(js, g, d)
        best = js[np.argmin(h)]
        step = js[1] - js[0]
        assert abs(nw.j_opt(float(g), d) - best) <= 2 * step


def test_gamma_opt_values_and_roundtrip():
    assert nw.gamma_opt(G_EXAMPLE) == pytest.approx(0.531, abs=1e-3)
    assert nw.gamma_opt(0.0) == 1.0
    for g in (0.2, G_EXAMPLE, -0.5, 0.9):
        gam = nw.gamma_opt(g)
        assert nw.gamma_correlations(gam, 2) == pytest.approx(nw.j_opt(g, 2), abs=1e-10)


def test_gamma_correlations_span():
    """J(gamma) covers (-1/(2^{d-1}-1), 1] and never leaves it."""
    for d in (2, 3, 4):
        lo = -1 / (2 ** (d - 1) - 1)
        gammas = np.linspace(0, 100, 2001)
        js = np.array([nw.gamma_correlations(g, d) for g in gammas])
        assert js.max() == 1.0  # gamma = 0
        assert js.min() > lo
        assert js.min() < lo + 0.01  # approaches the endpoint


def test_imaging_local_scaling_properties():
    for d in (2, 3):
        f, _ = nw.imaging_local_scaling(4, 4, d)
        assert f == pytest.approx(4 * d / (1 + d) ** 2, rel=1e-12)
    f_inf, bound_inf = nw.imaging_local_scaling(10**6, 4.0, 2)
    assert f_inf == pytest.approx(0.0, abs=1e-6)
    assert bound_inf == pytest.approx(math.pi**2 / (3 * 16), abs=1e-6)


def test_imaging_global_optimum_and_large_d():
    for d in (2, 3, 7):
        beta = nw.imaging_global_optimum(d)
        assert beta == pytest.approx(1 / math.sqrt(d + math.sqrt(d)))
        val = nw.imaging_global_bound(4, d)
        nearby = [nw.imaging_global_bound(4, d, beta * s) for s in (0.97, 1.03)]
        assert all(val <= x for x in nearby)
    d = 100
    local = nw.imaging_local_scaling(4, 4.0, d)[1]
    glob = nw.imaging_global_bound(4.0, d)
    assert abs(local - glob) <= 2 / d**1.5


def test_imaging_local_matches_estimation_pipeline():
    n_big, nbar, d = 4, 4, 2
    probe = probes.make_imaging_probe("local_product", d, nbar, n_local=n_big)
    gen = probes.imaging_generators(probe.space)
    prior = FlatPrior([0.0] * d, [2 * math.pi / nbar] * d)
    mom = estimation.prior_moments_generic(probe, gen, prior)
    est = estimation.solve_estimator(mom)
    pipeline = estimation.single_shot_bound(mom, est, prior)
    _, formula = nw.imaging_local_scaling(n_big, nbar, d)
    assert abs(pipeline - formula) <= 1e-6


def test_imaging_global_matches_estimation_pipeline():
    d, nbar, alpha = 2, 2, 1.0  # beta = 1/sqrt(3)
    probe = probes.make_imaging_probe("global_gnoon", d, nbar, alpha=alpha)
    gen = probes.imaging_generators(probe.space)
    prior = FlatPrior([0.0] * d, [2 * math.pi / nbar] * d)
    mom = estimation.prior_moments_generic(probe, gen, prior)
    est = estimation.solve_estimator(mom)
    pipeline = estimation.single_shot_bound(mom, est, prior)
    formula = nw.imaging_global_bound(nbar, d, beta=1 / math.sqrt(3))
    assert abs(pipeline - formula) <= 1e-6
