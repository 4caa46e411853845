import math

import numpy as np
import pytest

from bayesmet import probes
from bayesmet.fockspace import ModeSpace, NumericalError, number_op
from bayesmet.probes import ProbeState
from conftest import CANONICAL, TABLE51


def test_tsv_resource_budget(canonical):
    nbar = canonical["tsv"].nbar
    assert nbar == pytest.approx(2.0, abs=1e-4)


def test_noon_exact_closed_form(canonical):
    noon = canonical["noon"]
    sp = noon.space
    expect = np.zeros(sp.dim, dtype=complex)
    expect[sp.basis_index([2, 0])] = expect[sp.basis_index([0, 2])] = 1 / math.sqrt(2)
    assert np.abs(noon.vector - expect).max() < 1e-15


def test_ses_qfi(canonical):
    from bayesmet import bounds

    ses = canonical["ses"]
    fq = bounds.qfi(ses, probes.mz_generator(ses.space))
    assert fq == pytest.approx(22.0, abs=0.1)


@pytest.mark.parametrize("kind", CANONICAL)
def test_correlations_against_summary_table(canonical, kind):
    q, j = probes.correlations(canonical[kind])
    q_ref, j_ref, _ = TABLE51[kind]
    assert q == pytest.approx(q_ref, abs=max(2e-3, 2e-3 * abs(q_ref)))
    assert j == pytest.approx(j_ref, abs=max(2e-3, 2e-3 * abs(j_ref)))


@pytest.mark.parametrize("kind", CANONICAL)
def test_probe_norm_and_leakage(canonical, kind):
    probe = canonical[kind]
    assert abs(np.linalg.norm(probe.vector) - 1) <= 1e-10
    if kind != "noon":  # definite photon number, exact at its cutoff
        assert probes.leakage(probe) <= probes.LEAKAGE_TOL


def test_unknown_kind_and_small_cutoff():
    with pytest.raises(ValueError):
        probes.make_probe("thermal")
    with pytest.raises(NumericalError):
        probes.make_probe("coherent", cutoff=8)  # leakage gate must trip


def test_encode_identity(canonical):
    noon = canonical["noon"]
    gen = probes.mz_generator(noon.space)
    same = probes.encode(noon, gen, 0.0)
    assert np.abs(same.vector - noon.vector).max() == 0


def test_encode_noon_phases(canonical):
    noon = canonical["noon"]
    sp = noon.space
    gen = probes.mz_generator(sp)
    theta = 0.37
    out = probes.encode(noon, gen, theta)
    i20, i02 = sp.basis_index([2, 0]), sp.basis_index([0, 2])
    assert out.vector[i20] == pytest.approx(np.exp(-1j * theta) / math.sqrt(2))
    assert out.vector[i02] == pytest.approx(np.exp(+1j * theta) / math.sqrt(2))


def test_encode_qubit_pair_phase_pattern():
    # e^{-i(s_z1 t1 + s_z2 t2)/2} splits the sum and difference sectors
    net = probes.make_qubit_network(0.7, 2)
    gen = probes.qubit_network_generators(2)
    t1, t2 = 0.31, -0.52
    out = probes.encode(net, gen, [t1, t2]).vector
    sp = net.space
    norm = math.sqrt(2 * (1 + 0.49))
    expect = {
        (0, 0): np.exp(-0.5j * (t1 + t2)) / norm,
        (1, 1): np.exp(+0.5j * (t1 + t2)) / norm,
        (0, 1): 0.7 * np.exp(-0.5j * (t1 - t2)) / norm,
        (1, 0): 0.7 * np.exp(+0.5j * (t1 - t2)) / norm,
    }
    for ns, val in expect.items():
        assert out[sp.basis_index(ns)] == pytest.approx(val, abs=1e-12)


def test_encode_preserves_purity_and_trace(canonical):
    mixed = probes.lossy_encode(canonical["noon"], 0.8, 0.0)
    gen = probes.mz_generator(mixed.space)
    out = probes.encode(mixed, gen, 0.9)
    assert np.trace(out.matrix).real == pytest.approx(1.0, abs=1e-9)
    pur_in = np.trace(mixed.matrix @ mixed.matrix).real
    pur_out = np.trace(out.matrix @ out.matrix).real
    assert pur_out == pytest.approx(pur_in, abs=1e-9)


def test_lossy_encode_dorner_matrix():
    space = ModeSpace(3, 2)
    vec = (3 / math.sqrt(19)) * space.basis_ket([0, 2]) \
        + math.sqrt(10 / 19) * space.basis_ket([2, 0])
    probe = ProbeState(space=space, nbar=2.0, kind="dorner", vector=vec)
    phi = 0.61
    rho = probes.lossy_encode(probe, 0.9, phi).matrix
    order = [space.basis_index(x) for x in ([0, 0], [0, 2], [1, 0], [2, 0])]
    sub = rho[np.ix_(order, order)] * 190
    assert np.allclose(np.diag(sub), [1, 90, 18, 81], atol=1e-10)
    assert sub[1, 3] == pytest.approx(27 * math.sqrt(10) * np.exp(2j * phi), abs=1e-9)
    assert sub[3, 1] == pytest.approx(27 * math.sqrt(10) * np.exp(-2j * phi), abs=1e-9)


def test_lossy_encode_unit_transmissivity_is_pure(canonical):
    out = probes.lossy_encode(canonical["noon"], 1.0, 0.3)
    assert np.trace(out.matrix @ out.matrix).real == pytest.approx(1.0, abs=1e-10)
    # and coincides with the unitary encoding by N_1
    from bayesmet.probes import Generator

    gen = Generator((number_op(out.space, 0),))
    unitary = probes.encode(canonical["noon"], gen, 0.3)
    assert np.abs(out.matrix - unitary.density()).max() < 1e-12


@pytest.mark.parametrize("eta,phi", [(0.9, 0.2), (0.55, 1.1), (0.17, -0.4)])
def test_lossy_encode_trace_one(canonical, eta, phi):
    out = probes.lossy_encode(canonical["noon"], eta, phi)
    assert np.trace(out.matrix).real == pytest.approx(1.0, abs=1e-12)


def test_lossy_encode_rejects_bad_eta(canonical):
    with pytest.raises(ValueError):
        probes.lossy_encode(canonical["noon"], 0.0, 0.1)
    with pytest.raises(ValueError):
        probes.lossy_encode(canonical["noon"], 1.2, 0.1)


def test_qubit_network_gamma_one_separable():
    net = probes.make_qubit_network(1.0, 2)
    plus = np.ones(2) / math.sqrt(2)
    assert np.abs(net.vector - np.kron(plus, plus)).max() < 1e-12


@pytest.mark.parametrize("d", [2, 3, 4])
@pytest.mark.parametrize("gamma", [0.0, 0.3, 1.0, 2.5])
def test_qubit_network_correlations_formula(d, gamma):
    from bayesmet import bounds

    net = probes.make_qubit_network(gamma, d)
    gen = probes.qubit_network_generators(d)
    f = bounds.qfim(net, gen)
    if gamma == 0.0:
        j_meas = f[0, 1] / f[0, 0]
        assert j_meas == pytest.approx(1.0, abs=1e-12)  # maximally entangled
        return
    j_expect = (1 - gamma**2) / (1 + (2 ** (d - 1) - 1) * gamma**2)
    assert f[0, 1] / f[0, 0] == pytest.approx(j_expect, abs=1e-10)
    assert f[0, 0] == pytest.approx(1.0, abs=1e-10)  # 4v = 1


def test_imaging_global_closed_form():
    probe = probes.make_imaging_probe("global_gnoon", 2, 2, alpha=1.0)
    sp = probe.space
    nz = np.flatnonzero(np.abs(probe.vector) > 1e-14)
    expect = {sp.basis_index([2, 0, 0]), sp.basis_index([0, 2, 0]),
              sp.basis_index([0, 0, 2])}
    assert set(nz) == expect
    assert np.allclose(probe.vector[nz], 1 / math.sqrt(3))


def test_imaging_local_amplitudes():
    n_big, nbar, d = 4, 4.0, 2
    probe = probes.make_imaging_probe("local_product", d, nbar, n_local=n_big)
    amp = math.sqrt(nbar / (n_big * (d + 1)))
    one = np.zeros(n_big + 1)
    one[0] = math.sqrt(1 - amp**2)
    one[n_big] = amp
    expect = np.kron(np.kron(one, one), one)
    assert np.abs(probe.vector - expect).max() < 1e-12


@pytest.mark.parametrize("kind,d,nbar", [("global_gnoon", 2, 2), ("global_gnoon", 3, 4),
                                         ("local_product", 2, 4)])
def test_imaging_resource_check(kind, d, nbar):
    probe = probes.make_imaging_probe(kind, d, nbar)
    total = probe.space.total_numbers()
    assert float((np.abs(probe.vector) ** 2) @ total) == pytest.approx(nbar, abs=1e-9)


def test_imaging_rejects_bad_nbar():
    with pytest.raises(ValueError):
        probes.make_imaging_probe("global_gnoon", 2, 2.5)
