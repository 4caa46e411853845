import math

import numpy as np
import pytest

from bayesmet import measurements as ms, priors, probes
from bayesmet.priors import FlatPrior


def test_flat_prior_basics():
    p = FlatPrior(0.3, 1.2)
    assert p.n_params == 1
    assert p.density == pytest.approx(1 / 1.2)
    assert p.variance() == pytest.approx(1.2**2 / 12)
    assert p.interval() == pytest.approx((-0.3, 0.9))


def test_flat_prior_validation_and_width_flag():
    with pytest.raises(ValueError):
        FlatPrior(0.0, -1.0)
    with pytest.warns(UserWarning, match="square error"):
        FlatPrior(0.0, 2 * math.pi)


@pytest.mark.parametrize("n,expect", [(1, math.pi / 2), (2, math.pi / 2),
                                      (3, math.pi / 6), (4, math.pi / 4)])
def test_noon_intrinsic_width(n, expect):
    assert priors.noon_intrinsic_width(n) == pytest.approx(expect)


def test_worthwhile_repetitions_flat_prior():
    w0 = 0.8
    fq = 5.0
    mu = priors.worthwhile_repetitions(w0**2 / 12, fq)
    assert mu == pytest.approx(12 / (w0**2 * fq))


@pytest.mark.parametrize("delta", [1e-1, 1e-2, 1e-3])
def test_worthwhile_one_mode_family(delta):
    # |psi> = sqrt(1-d)|0> + sqrt(d)|N/d>: W_int = 2 pi d / N, F_q = 4N^2(1-d)/d
    n = 1.0
    var = (2 * math.pi * delta / n) ** 2 / 12
    fq = 4 * n**2 * (1 - delta) / delta
    bound = priors.worthwhile_repetitions(var, fq)
    assert bound == pytest.approx(3 / (4 * math.pi**2 * delta * (1 - delta)), rel=1e-12)


def test_worthwhile_diverges_as_delta_vanishes():
    vals = [priors.worthwhile_repetitions((2 * math.pi * d) ** 2 / 12, 4 * (1 - d) / d)
            for d in (1e-1, 1e-2, 1e-3)]
    assert vals[0] < vals[1] < vals[2]


def test_sine_vs_square_error_region():
    # 2[1 - (2/W) sin(W/2)] stays within 12% of W^2/12 for W <= 2
    for w0 in np.linspace(0.05, 2.0, 40):
        sine = 2 * (1 - (2 / w0) * math.sin(w0 / 2))
        square = w0**2 / 12
        assert abs(sine - square) / square <= 0.12


def test_prior_scan_mu_zero_is_prior(canonical):
    noon = canonical["noon"]
    gen = probes.mz_generator(noon.space)
    pom = ms.catalog_pom("counting_even", noon.space)
    prior = FlatPrior(math.pi / 4, math.pi / 2, grid_points=400)
    scan = priors.prior_scan(noon, gen, pom, prior, math.pi / 4, [0, 3], seed=1)
    flat = scan.snapshots[0]
    assert np.abs(flat - flat[0]).max() < 1e-12
    assert priors._trapz_nd(flat, scan.grids) == pytest.approx(1.0, abs=1e-9)


def test_prior_scan_posterior_normalized_and_matches_likelihood_argmax(canonical):
    noon = canonical["noon"]
    gen = probes.mz_generator(noon.space)
    pom = ms.catalog_pom("counting_even", noon.space)
    prior = FlatPrior(math.pi / 4, math.pi / 2, grid_points=600)
    scan = priors.prior_scan(noon, gen, pom, prior, 0.9, [5, 25], seed=42)
    table = ms.likelihood_table(noon, gen, pom, scan.grids[0])
    rng = np.random.default_rng(42)
    cdf = np.cumsum(table[:, np.searchsorted(scan.grids[0], 0.9)])
    draws = np.minimum(np.searchsorted(cdf, rng.random(25), side="right"),
                       table.shape[0] - 1)
    for mu, snap in scan.snapshots.items():
        assert priors._trapz_nd(snap, scan.grids) == pytest.approx(1.0, abs=1e-6)
        like = np.prod(table[draws[:mu]], axis=0)
        assert np.argmax(snap) == np.argmax(like)


@pytest.mark.parametrize("kind", ["noon", "coherent", "tsv"])
def test_full_circle_prior_is_ambiguous(canonical, kind):
    """With W0 = 2 pi the posterior keeps several prominent maxima at mu = 100."""
    probe = canonical[kind]
    gen = probes.mz_generator(probe.space)
    name = "counting_odd" if kind == "coherent" else "counting_even"
    pom = ms.catalog_pom(name, probe.space)
    with pytest.warns(UserWarning):
        prior = FlatPrior(math.pi, 2 * math.pi, grid_points=800)
    # generic true value, away from the likelihood's mirror axes
    scan = priors.prior_scan(probe, gen, pom, prior, 2.0, [100], seed=7)
    assert scan.maxima_counts[100] >= 2


def test_qubit_network_scan_concentrates_on_sum_lines():
    """gamma = 0 only resolves theta1 + theta2; ridge posterior, several maxima."""
    net = probes.make_qubit_network(0.0, 2)
    gen = probes.qubit_network_generators(2)
    pom = ms.catalog_pom("qubit_local", net.space)
    with pytest.warns(UserWarning):
        prior = FlatPrior([math.pi, math.pi], [2 * math.pi, 2 * math.pi],
                          grid_points=120)
    scan = priors.prior_scan(net, gen, pom, prior, [1.0, 2.0], [60], seed=11)
    snap = scan.snapshots[60]
    t1, t2 = np.meshgrid(scan.grids[0], scan.grids[1], indexing="ij")
    ridge = np.cos((t1 + t2) / 2 - 1.5) ** 2  # peaked where t1+t2 = 3 mod 2pi
    on = snap[ridge > 0.99].mean()
    off = snap[ridge < 0.01].mean()
    assert on > 50 * off  # mass sits on the theta1+theta2 lines only


def test_prior_scan_rejects_outside_true_value(canonical):
    noon = canonical["noon"]
    gen = probes.mz_generator(noon.space)
    pom = ms.catalog_pom("counting_even", noon.space)
    prior = FlatPrior(0.0, math.pi / 2)
    with pytest.raises(ValueError):
        priors.prior_scan(noon, gen, pom, prior, 2.0, [1], seed=0)
