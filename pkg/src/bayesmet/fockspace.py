"""Truncated bosonic-mode and qubit operator algebra.

Everything lives on a tensor product of ``modes`` copies of a Fock space
truncated to ``cutoff`` levels per mode (qubits are just ``cutoff=2``).
Operators are dense complex matrices; mode 0 is the leftmost Kronecker
factor, so the flat index of |n_0, ..., n_{k-1}> is sum(n_i * cutoff**(k-1-i)).

Unitaries are built from Hermitian generators through an eigendecomposition
(e^{-iH} = V e^{-i diag} V^dagger) rather than Pade expm, which keeps them
unitary to ~1e-13 and comfortably inside the 1e-8 gate.  The two-mode beam
splitter additionally exploits that J_x conserves total photon number, so it
is diagonalised block by block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

HERMITIAN_TOL = 1e-10
UNITARY_TOL = 1e-8


class NumericalError(RuntimeError):
    """A numerical invariant failed (truncation, completeness, spectrum...)."""


@dataclass(frozen=True)
class ModeSpace:
    """Truncated tensor-product space: `modes` modes with `cutoff` levels each."""

    cutoff: int
    modes: int
    max_bytes: int = 2 * 1024**3

    def __post_init__(self):
        if self.cutoff < 2:
            raise ValueError("cutoff must be >= 2")
        if self.modes < 1:
            raise ValueError("modes must be >= 1")
        if 16 * self.dim**2 > self.max_bytes:
            raise ValueError(
                f"dense operators on dim {self.dim} exceed the "
                f"{self.max_bytes} byte budget"
            )

    @property
    def dim(self) -> int:
        return self.cutoff**self.modes

    def occupations(self) -> np.ndarray:
        """(dim, modes) array: photon number of each mode per basis state."""
        grids = np.meshgrid(
            *[np.arange(self.cutoff)] * self.modes, indexing="ij"
        )
        return np.stack([g.ravel() for g in grids], axis=1)

    def mode_numbers(self, mode: int) -> np.ndarray:
        """Photon number of `mode` for every flat basis index."""
        if not 0 <= mode < self.modes:
            raise ValueError(f"mode {mode} out of range for {self.modes} modes")
        return self.occupations()[:, mode]

    def total_numbers(self) -> np.ndarray:
        return self.occupations().sum(axis=1)

    def basis_index(self, ns) -> int:
        ns = tuple(ns)
        if len(ns) != self.modes or any(n < 0 or n >= self.cutoff for n in ns):
            raise ValueError(f"occupation {ns} not representable")
        idx = 0
        for n in ns:
            idx = idx * self.cutoff + n
        return idx

    def basis_ket(self, ns) -> np.ndarray:
        ket = np.zeros(self.dim, dtype=complex)
        ket[self.basis_index(ns)] = 1.0
        return ket


@dataclass(frozen=True)
class MultiModeOperator:
    """Dense operator on a ModeSpace."""

    matrix: np.ndarray
    space: ModeSpace
    hermitian: bool = False

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        if m.shape != (self.space.dim, self.space.dim):
            raise ValueError(f"matrix shape {m.shape} does not match dim {self.space.dim}")
        if self.hermitian:
            defect = np.abs(m - m.conj().T).max()
            if defect > HERMITIAN_TOL:
                raise NumericalError(
                    f"operator flagged Hermitian has defect {defect:.2e} > {HERMITIAN_TOL}"
                )

    def dag(self) -> "MultiModeOperator":
        return MultiModeOperator(self.matrix.conj().T, self.space, self.hermitian)

    def __matmul__(self, other):
        if isinstance(other, MultiModeOperator):
            return MultiModeOperator(self.matrix @ other.matrix, self.space)
        return self.matrix @ other


def _single_mode_creation(cutoff: int) -> np.ndarray:
    a_dag = np.zeros((cutoff, cutoff), dtype=complex)
    n = np.arange(cutoff - 1)
    a_dag[n + 1, n] = np.sqrt(n + 1)
    return a_dag


def _embed(space: ModeSpace, mode: int, op: np.ndarray) -> np.ndarray:
    """Kronecker-embed a single-mode operator at position `mode`."""
    mats = [np.eye(space.cutoff, dtype=complex)] * space.modes
    mats[mode] = op
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def creation(space: ModeSpace, mode: int = 0) -> MultiModeOperator:
    """a^dagger on the indexed mode: a^dagger|n> = sqrt(n+1)|n+1>, zero on the top level."""
    if not 0 <= mode < space.modes:
        raise ValueError(f"mode {mode} out of range for {space.modes} modes")
    return MultiModeOperator(_embed(space, mode, _single_mode_creation(space.cutoff)), space)


def annihilation(space: ModeSpace, mode: int = 0) -> MultiModeOperator:
    return creation(space, mode).dag()


def number_op(space: ModeSpace, mode: int = 0) -> MultiModeOperator:
    diag = space.mode_numbers(mode).astype(complex)
    return MultiModeOperator(np.diag(diag), space, hermitian=True)


def total_number(space: ModeSpace) -> MultiModeOperator:
    return MultiModeOperator(np.diag(space.total_numbers().astype(complex)), space, hermitian=True)


def jordan_schwinger(space: ModeSpace, axis: str) -> MultiModeOperator:
    """Two-mode angular momentum J_x, J_y, J_z from the Jordan-Schwinger map.

    Built from the matrix elements directly (each row of a_1^dag a_2 has at
    most one entry), so large cutoffs stay cheap.
    """
    if space.modes != 2:
        raise ValueError("Jordan-Schwinger operators need exactly 2 modes")
    n1 = space.mode_numbers(0)
    n2 = space.mode_numbers(1)
    if axis == "z":
        return MultiModeOperator(np.diag((n1 - n2) / 2).astype(complex), space, hermitian=True)
    if axis not in ("x", "y"):
        raise ValueError(f"axis must be x, y or z, got {axis!r}")
    d = space.cutoff
    m = np.zeros((space.dim, space.dim), dtype=complex)
    # a_1^dag a_2 |n1, n2> = sqrt((n1+1) n2) |n1+1, n2-1>
    src = np.flatnonzero((n1 < d - 1) & (n2 > 0))
    dst = src + d - 1  # (n1+1)*d + (n2-1)
    amp = np.sqrt((n1[src] + 1) * n2[src])
    if axis == "x":
        m[dst, src] = 0.5 * amp
        m[src, dst] = 0.5 * amp
    else:  # y
        m[dst, src] = -0.5j * amp
        m[src, dst] = 0.5j * amp
    return MultiModeOperator(m, space, hermitian=True)


# Pauli matrices (qubit = cutoff-2 mode).
_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli(axis: str) -> np.ndarray:
    return _PAULI[axis].copy()


def pauli_at(space: ModeSpace, mode: int, axis: str) -> MultiModeOperator:
    if space.cutoff != 2:
        raise ValueError("Pauli operators need a qubit space (cutoff 2)")
    return MultiModeOperator(_embed(space, mode, _PAULI[axis]), space, hermitian=True)


def hermitian_eig(op: MultiModeOperator | np.ndarray):
    """Eigendecomposition of a Hermitian operator, eigenvalues ascending.

    Raises NumericalError if the input is not Hermitian to 1e-10.
    """
    m = op.matrix if isinstance(op, MultiModeOperator) else np.asarray(op, dtype=complex)
    defect = np.abs(m - m.conj().T).max()
    if defect > HERMITIAN_TOL:
        raise NumericalError(f"hermitian_eig: input has Hermiticity defect {defect:.2e}")
    vals, vecs = np.linalg.eigh(m)
    return vals, vecs


def unitary_from_hermitian(h: np.ndarray, t: float = 1.0) -> np.ndarray:
    """e^{-i t H} for Hermitian H via eigendecomposition."""
    vals, vecs = hermitian_eig(h)
    return (vecs * np.exp(-1j * t * vals)) @ vecs.conj().T


def matrix_exp(a: np.ndarray) -> np.ndarray:
    """General matrix exponential (scaling-and-squaring Pade)."""
    return scipy.linalg.expm(np.asarray(a, dtype=complex))


# --- blocked beam splitter -------------------------------------------------
#
# J_x conserves n_1 + n_2, so exp(-i (pi/2) J_x) is block diagonal over total
# photon number.  The per-space block eigendecompositions are cached; they are
# reused both to build the dense unitary and to apply it lazily to vectors.

_jx_block_cache: dict[int, list[tuple[np.ndarray, np.ndarray, np.ndarray]]] = {}


def _jx_blocks(space: ModeSpace):
    if space.modes != 2:
        raise ValueError("beam splitter needs exactly 2 modes")
    key = space.cutoff
    if key not in _jx_block_cache:
        jx = jordan_schwinger(space, "x").matrix
        totals = space.total_numbers()
        blocks = []
        for t in range(int(totals.max()) + 1):
            idx = np.flatnonzero(totals == t)
            vals, vecs = np.linalg.eigh(jx[np.ix_(idx, idx)])
            blocks.append((idx, vals, vecs))
        _jx_block_cache[key] = blocks
    return _jx_block_cache[key]


def apply_beam_splitter(space: ModeSpace, psi: np.ndarray, sign: int = 1) -> np.ndarray:
    """Apply exp(-i sign (pi/2) J_x) to a state vector or a (dim, k) batch."""
    out = np.array(psi, dtype=complex, copy=True)
    for idx, vals, vecs in _jx_blocks(space):
        phases = np.exp(-1j * sign * (np.pi / 2) * vals)
        if out.ndim == 2:
            out[idx] = vecs @ (phases[:, None] * (vecs.conj().T @ out[idx]))
        else:
            out[idx] = vecs @ (phases * (vecs.conj().T @ out[idx]))
    return out


def beam_splitter(space: ModeSpace) -> MultiModeOperator:
    """50:50 beam splitter U_BS = exp(-i (pi/2) J_x)."""
    u = np.zeros((space.dim, space.dim), dtype=complex)
    for idx, vals, vecs in _jx_blocks(space):
        block = (vecs * np.exp(-1j * (np.pi / 2) * vals)) @ vecs.conj().T
        u[np.ix_(idx, idx)] = block
    return MultiModeOperator(u, space)


def phase_shift_diff(space: ModeSpace, theta: float) -> MultiModeOperator:
    """Difference phase shift exp(-i J_z theta) (diagonal in the number basis)."""
    if space.modes != 2:
        raise ValueError("phase_shift_diff needs exactly 2 modes")
    n1 = space.mode_numbers(0)
    n2 = space.mode_numbers(1)
    return MultiModeOperator(np.diag(np.exp(-1j * theta * (n1 - n2) / 2)), space)


def displacement(space: ModeSpace, mode: int, alpha: complex) -> MultiModeOperator:
    """D(alpha) = exp(alpha a^dagger - alpha* a) on a single targeted mode."""
    a_dag = _single_mode_creation(space.cutoff)
    gen = alpha * a_dag - np.conj(alpha) * a_dag.conj().T
    u = unitary_from_hermitian(1j * gen)  # exp(gen) with gen anti-Hermitian
    return MultiModeOperator(_embed(space, mode, u), space)


def squeeze(space: ModeSpace, mode: int, zeta: complex) -> MultiModeOperator:
    """S(zeta) = exp[(zeta* a^2 - zeta a^dagger^2)/2] on a single targeted mode."""
    a_dag = _single_mode_creation(space.cutoff)
    a = a_dag.conj().T
    gen = 0.5 * (np.conj(zeta) * (a @ a) - zeta * (a_dag @ a_dag))
    u = unitary_from_hermitian(1j * gen)
    return MultiModeOperator(_embed(space, mode, u), space)


def vacuum(space: ModeSpace) -> np.ndarray:
    return space.basis_ket([0] * space.modes)


def unitarity_defect(op: MultiModeOperator, buffer: int = 3) -> float:
    """max |U^dagger U - I| restricted to total photon number <= cutoff - buffer."""
    g = op.matrix.conj().T @ op.matrix - np.eye(op.space.dim)
    keep = np.flatnonzero(op.space.total_numbers() <= op.space.cutoff - buffer)
    if keep.size == 0:
        return 0.0
    return float(np.abs(g[np.ix_(keep, keep)]).max())
