import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayesmet import fockspace as fs


def test_creation_cutoff2_matrix():
    space = fs.ModeSpace(2, 1)
    a_dag = fs.creation(space).matrix
    assert np.allclose(a_dag, [[0, 0], [1, 0]])


def test_creation_amplitudes():
    space = fs.ModeSpace(9, 1)
    a_dag = fs.creation(space).matrix
    for n in range(space.cutoff - 1):
        assert a_dag[n + 1, n] == pytest.approx(math.sqrt(n + 1))
    assert np.count_nonzero(a_dag) == space.cutoff - 1


def test_commutator_truncation_corner():
    # [a, a^dag] = I except the top diagonal entry, which is 1 - cutoff
    space = fs.ModeSpace(4, 1)
    a_dag = fs.creation(space).matrix
    a = a_dag.conj().T
    comm = a @ a_dag - a_dag @ a
    expected = np.eye(4, dtype=complex)
    expected[-1, -1] = 1 - space.cutoff
    assert np.abs(comm - expected).max() < 1e-12


def test_mode_index_out_of_range():
    space = fs.ModeSpace(3, 2)
    with pytest.raises(ValueError):
        fs.creation(space, 2)


def test_jordan_schwinger_su2_on_safe_subspace():
    space = fs.ModeSpace(6, 2)
    jx = fs.jordan_schwinger(space, "x").matrix
    jy = fs.jordan_schwinger(space, "y").matrix
    jz = fs.jordan_schwinger(space, "z").matrix
    resid = jx @ jy - jy @ jx - 1j * jz
    safe = np.flatnonzero(space.total_numbers() < space.cutoff - 1)
    assert np.abs(resid[np.ix_(safe, safe)]).max() < 1e-10


def test_jz_diagonal_and_jx_structure():
    space = fs.ModeSpace(5, 2)
    jz = fs.jordan_schwinger(space, "z").matrix
    n1, n2 = space.mode_numbers(0), space.mode_numbers(1)
    assert np.allclose(np.diag(jz), (n1 - n2) / 2)
    assert np.abs(jz - np.diag(np.diag(jz))).max() == 0
    jx = fs.jordan_schwinger(space, "x").matrix
    assert np.abs(jx - jx.conj().T).max() < 1e-14
    assert np.abs(np.diag(jx)).max() == 0


def test_beam_splitter_displacement_identity():
    # U_BS D_1(alpha)|0,0> = |alpha/sqrt2, -i alpha/sqrt2>
    space = fs.ModeSpace(21, 2)
    alpha = math.sqrt(2)
    state = fs.beam_splitter(space).matrix @ (
        fs.displacement(space, 0, alpha).matrix @ fs.vacuum(space)
    )

    def coherent(beta, d):
        n = np.arange(d)
        v = beta**n / np.sqrt([math.factorial(k) for k in n])
        return v * math.exp(-abs(beta) ** 2 / 2)

    target = np.kron(coherent(alpha / math.sqrt(2), 21),
                     coherent(-1j * alpha / math.sqrt(2), 21))
    fidelity = abs(np.vdot(target, state)) ** 2
    assert fidelity >= 1 - 1e-8


def test_trivial_unitaries():
    space = fs.ModeSpace(7, 2)
    assert np.allclose(fs.phase_shift_diff(space, 0.0).matrix, np.eye(space.dim))
    one = fs.ModeSpace(7, 1)
    assert np.allclose(fs.squeeze(one, 0, 0.0).matrix, np.eye(7))
    assert np.allclose(fs.displacement(one, 0, 0.0).matrix, np.eye(7))


@pytest.mark.parametrize("builder", [
    lambda s: fs.beam_splitter(s),
    lambda s: fs.phase_shift_diff(s, 0.73),
    lambda s: fs.displacement(s, 0, 1.2 + 0.3j),
    lambda s: fs.squeeze(s, 1, 0.8),
])
def test_unitarity_on_buffered_subspace(builder):
    space = fs.ModeSpace(12, 2)
    assert fs.unitarity_defect(builder(space)) <= 1e-8


def test_hermitian_eig_paulis():
    space = fs.ModeSpace(2, 1)
    vals, _ = fs.hermitian_eig(fs.MultiModeOperator(fs.pauli("z"), space))
    assert np.allclose(vals, [-1, 1])
    vals, vecs = fs.hermitian_eig(fs.MultiModeOperator(fs.pauli("y"), space))
    assert np.allclose(vals, [-1, 1])
    for i, sign in enumerate((-1, 1)):
        v = vecs[:, i]
        expect = np.array([1, sign * 1j]) / math.sqrt(2)
        overlap = abs(np.vdot(expect, v))
        assert overlap == pytest.approx(1.0, abs=1e-12)


def test_hermitian_eig_jz_spectrum_matches_enumeration():
    space = fs.ModeSpace(3, 2)
    vals, _ = fs.hermitian_eig(fs.jordan_schwinger(space, "z"))
    n1, n2 = space.mode_numbers(0), space.mode_numbers(1)
    assert np.allclose(vals, np.sort((n1 - n2) / 2))


def test_hermitian_eig_rejects_non_hermitian():
    space = fs.ModeSpace(3, 1)
    with pytest.raises(fs.NumericalError):
        fs.hermitian_eig(fs.creation(space))


def test_expm_of_zero_and_unitarity():
    assert np.allclose(fs.matrix_exp(np.zeros((4, 4))), np.eye(4))
    h = np.diag([0.0, 1.0, 2.5]) + 0.3 * (np.eye(3, k=1) + np.eye(3, k=-1))
    u = fs.unitary_from_hermitian(h, t=0.9)
    assert np.abs(u.conj().T @ u - np.eye(3)).max() < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 1000))
def test_kron_mixed_product(seed):
    rng = np.random.default_rng(seed)
    a, b, c, d = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
                  for _ in range(4))
    left = np.kron(a, b) @ np.kron(c, d)
    right = np.kron(a @ c, b @ d)
    assert np.abs(left - right).max() < 1e-12


def test_memory_budget_guard():
    with pytest.raises(ValueError):
        fs.ModeSpace(200, 2, max_bytes=10**6)
