"""POM catalog and likelihood tables.

Catalog POMs are rank-1 projector families: photon counting after a phase
offset and a 50:50 splitter (even/odd offsets pi/4 and pi/2 on mode 2,
calibrated for a prior centred on 0), pi/8 quadratures, undo-and-count for
the coherent probe, parity, and local qubit projectors (|0> +- |1>)/sqrt(2).
The counting amplitude convention is

    a(n1, n2 | theta) = <n1, n2| e^{-i(pi/2)J_x} e^{-i phi N_2} |psi(theta)>,

which for a NOON probe with phi = pi/4 reproduces the closed form
p(n, 2-n|theta) = cos^2[theta + (2n-3) pi/4] / (n! (2-n)!).

Each eigencolumn is its own outcome even when labels are degenerate (the
paper's code convention), so parity and counting share one projector set
and differ only in their labels.

On large spaces the projector matrix (dim x dim) is never materialized:
the POM stores the measurement-basis transform and applies it to state
vectors, which is exact and cheap because every factor is a diagonal phase,
a blocked J_x exponential or a single-mode unitary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fockspace import (
    ModeSpace,
    NumericalError,
    _single_mode_creation,
    apply_beam_splitter,
    unitary_from_hermitian,
)
from .probes import Generator, ProbeState

COMPLETENESS_TOL = 1e-7
NEGATIVITY_TOL = 1e-12

CATALOG = ("counting_even", "counting_odd", "quadrature_pi8",
           "undo_count_coherent", "parity", "qubit_local")


@dataclass(frozen=True)
class Pom:
    """Rank-1 POM: outcome labels plus a way to get amplitudes <chi_k|psi>.

    Either `columns` holds the projector columns explicitly, or `transform`
    applies the conjugate preparation unitary to a state batch so that the
    amplitude of outcome k is simply component k of the transformed vector.
    `completeness_defect` bounds max|sum_k E_k - I|.
    """

    space: ModeSpace
    outcomes: np.ndarray
    columns: np.ndarray | None = None
    transform: object = None
    completeness_defect: float = 0.0
    subspace: bool = False  # estimator POMs resolve identity on supp(rho) only

    def __post_init__(self):
        object.__setattr__(self, "outcomes", np.asarray(self.outcomes))
        if (self.columns is None) == (self.transform is None):
            raise ValueError("exactly one of columns / transform must be set")
        if self.columns is not None:
            cols = np.asarray(self.columns, dtype=complex)
            object.__setattr__(self, "columns", cols)
            gram = cols.conj().T @ cols
            resolved = cols @ cols.conj().T
            defect = float(np.abs(resolved - np.eye(self.space.dim)).max())
            object.__setattr__(self, "completeness_defect", defect)
            if not self.subspace and defect > COMPLETENESS_TOL:
                raise NumericalError(
                    f"POM completeness defect {defect:.2e} > {COMPLETENESS_TOL}"
                )
            if np.abs(gram - np.diag(np.diag(gram))).max() > 1e-9:
                raise NumericalError("projector columns are not orthogonal")

    @property
    def n_outcomes(self) -> int:
        return self.outcomes.shape[0]

    def amplitudes(self, psi: np.ndarray) -> np.ndarray:
        """<chi_k|psi> for a vector or a (dim, batch) array of vectors."""
        if self.columns is not None:
            return self.columns.conj().T @ psi
        return self.transform(psi)


class _CountingTransform:
    """Phase offsets, a 50:50 splitter and optionally a displacement, applied
    to the evolved state; component k of the result is the amplitude of |k>."""

    def __init__(self, space: ModeSpace, mode2_phase: float = 0.0,
                 bs_sign: int = 1, displace_mode1: complex | None = None,
                 pi_jz: bool = False):
        self.space = space
        self.bs_sign = bs_sign
        n1 = space.mode_numbers(0)
        n2 = space.mode_numbers(1)
        self.phase = np.exp(-1j * mode2_phase * n2)
        if pi_jz:
            self.phase = self.phase * np.exp(-1j * np.pi * (n1 - n2) / 2)
        if displace_mode1 is not None:
            a_dag = _single_mode_creation(space.cutoff)
            gen = displace_mode1 * a_dag - np.conj(displace_mode1) * a_dag.conj().T
            self.disp = unitary_from_hermitian(1j * gen)  # D(alpha) on mode 1
        else:
            self.disp = None

    def __call__(self, psi: np.ndarray) -> np.ndarray:
        out = np.asarray(psi, dtype=complex)
        batch = out.ndim == 2
        out = out * (self.phase[:, None] if batch else self.phase)
        out = apply_beam_splitter(self.space, out, sign=self.bs_sign)
        if self.disp is not None:
            d = self.space.cutoff
            shape = (d, d, -1) if batch else (d, d)
            m = out.reshape(shape)
            out = np.tensordot(self.disp, m, axes=(1, 0)).reshape(out.shape)
        return out


class _QuadratureTransform:
    """Inverse of the pi/8-quadrature sequence, in the X1 (x) X2 eigenbasis."""

    def __init__(self, space: ModeSpace):
        self.space = space
        d = space.cutoff
        a_dag = _single_mode_creation(d)
        x = (a_dag * np.exp(1j * np.pi / 8) + a_dag.conj().T * np.exp(-1j * np.pi / 8)) / np.sqrt(2)
        vals, vecs = np.linalg.eigh(x)
        self.vals = vals
        self.vecs = vecs
        self.phase = np.exp(-1j * (np.pi / 4) * space.mode_numbers(0))

    def __call__(self, psi: np.ndarray) -> np.ndarray:
        out = np.asarray(psi, dtype=complex)
        batch = out.ndim == 2
        out = out * (self.phase[:, None] if batch else self.phase)
        out = apply_beam_splitter(self.space, out, sign=-1)
        d = self.space.cutoff
        m = out.reshape((d, d, -1)) if batch else out.reshape((d, d))
        m = np.tensordot(self.vecs.conj().T, m, axes=(1, 0))        # mode-1 basis
        m = np.tensordot(self.vecs.conj().T, m, axes=(1, 1))        # mode-2 basis
        m = np.moveaxis(m, 0, 1)
        return m.reshape(out.shape)


def _transform_defect(space: ModeSpace, transform, trials: int = 4) -> float:
    """Upper estimate of the completeness defect: norm loss on random states."""
    rng = np.random.default_rng(12345)
    worst = 0.0
    for _ in range(trials):
        psi = rng.normal(size=space.dim) + 1j * rng.normal(size=space.dim)
        psi /= np.linalg.norm(psi)
        worst = max(worst, abs(1.0 - np.linalg.norm(transform(psi)) ** 2))
    return worst


def catalog_pom(name: str, space: ModeSpace) -> Pom:
    """One of the named measurement schemes on the given space."""
    if name not in CATALOG:
        raise ValueError(f"unknown POM {name!r}")
    if name == "qubit_local":
        if space.cutoff != 2:
            raise ValueError("qubit_local needs a qubit space (cutoff 2)")
        plus_minus = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
        cols = np.ones((1, 1), dtype=complex)
        for _ in range(space.modes):
            cols = np.kron(cols, plus_minus)
        signs = np.array([1, -1])
        labels = np.ones((1,), dtype=int)
        for _ in range(space.modes):
            labels = (labels[:, None] * signs[None, :]).ravel()
        return Pom(space=space, outcomes=labels, columns=cols)

    if space.modes != 2:
        raise ValueError(f"{name} needs a 2-mode optical space")
    n1 = space.mode_numbers(0)
    n2 = space.mode_numbers(1)
    if name == "counting_even":
        tr = _CountingTransform(space, mode2_phase=np.pi / 4)
        outcomes = n1 * n2
    elif name == "counting_odd":
        tr = _CountingTransform(space, mode2_phase=np.pi / 2)
        outcomes = n1 * n2
    elif name == "parity":
        tr = _CountingTransform(space, mode2_phase=np.pi / 4)
        outcomes = (-1.0) ** (n1 + n2)
    elif name == "undo_count_coherent":
        tr = _CountingTransform(space, bs_sign=-1, displace_mode1=np.sqrt(2), pi_jz=True)
        outcomes = n1 * n2
    else:  # quadrature_pi8
        tr = _QuadratureTransform(space)
        outcomes = np.multiply.outer(tr.vals, tr.vals).ravel()
    defect = _transform_defect(space, tr)
    if defect > COMPLETENESS_TOL:
        raise NumericalError(f"POM completeness defect {defect:.2e} > {COMPLETENESS_TOL}")
    return Pom(space=space, outcomes=outcomes, transform=tr, completeness_defect=defect)


def estimator_pom(estimator, space: ModeSpace) -> Pom:
    """Projective POM from the eigenvectors of a single-parameter estimator S.

    Complete on the support of rho only, which contains every encoded state
    inside the prior box.
    """
    if estimator.projectors is None:
        raise ValueError("estimator POM needs a single-parameter estimator")
    return Pom(space=space, outcomes=estimator.estimates,
               columns=estimator.projectors, subspace=True)


def joint_estimator_pom(estimator, space: ModeSpace, tol: float = 1e-9) -> Pom:
    """Common-eigenbasis POM of commuting multi-parameter estimators S_k."""
    from .estimation import commutation_check

    if commutation_check(estimator) > tol:
        raise NumericalError("estimators do not commute; no joint projective POM")
    rng = np.random.default_rng(7)
    mix = sum(w * s for w, s in zip(rng.normal(size=estimator.n_params),
                                    estimator.s_support))
    mix = 0.5 * (mix + mix.conj().T)
    _, vecs = np.linalg.eigh(mix)
    labels = np.stack(
        [np.real(np.einsum("im,ij,jm->m", vecs.conj(), s, vecs))
         for s in estimator.s_support],
        axis=1,
    )
    return Pom(space=space, outcomes=labels, columns=estimator.support_basis @ vecs,
               subspace=True)


def likelihood_table(probe: ProbeState, gen: Generator, pom: Pom, theta_grid):
    """p(m | theta) on a 1D or 2D grid; columns sum to 1 within 1e-7.

    Returns an array of shape (n_outcomes, n_grid) in 1D or
    (n_outcomes, n1, n2) in 2D.
    """
    if isinstance(theta_grid, (tuple, list)):
        grids = [np.asarray(g, dtype=float) for g in theta_grid]
    else:
        grids = [np.asarray(theta_grid, dtype=float)]
    if len(grids) != len(gen):
        raise ValueError("grid dimension does not match the number of generators")
    diags = gen.diagonals()
    if diags is None:
        raise NumericalError("likelihood_table needs diagonal generators")
    mesh = np.meshgrid(*grids, indexing="ij")
    flat = [m.ravel() for m in mesh]
    n_pts = flat[0].size
    phase_exp = sum(np.multiply.outer(lam, th) for lam, th in zip(diags, flat))
    phases = np.exp(-1j * phase_exp)  # (dim, n_pts)

    if probe.pure:
        psi = phases * probe.vector[:, None]
        amps = pom.amplitudes(psi)
        table = np.abs(amps) ** 2
    else:
        vals, vecs = np.linalg.eigh(probe.matrix)
        keep = vals > 1e-14
        table = np.zeros((pom.n_outcomes, n_pts))
        for q, v in zip(vals[keep], vecs[:, keep].T):
            amps = pom.amplitudes(phases * v[:, None])
            table += q * np.abs(amps) ** 2

    neg = table.min()
    if neg < -NEGATIVITY_TOL:
        raise NumericalError(f"negative probability {neg:.2e} in likelihood table")
    np.clip(table, 0.0, None, out=table)
    defect = np.abs(1.0 - table.sum(axis=0)).max()
    if defect > COMPLETENESS_TOL:
        raise NumericalError(
            f"likelihood columns sum to 1 with defect {defect:.2e} > {COMPLETENESS_TOL} "
            "(truncation failure)"
        )
    if len(grids) == 2:
        return table.reshape(pom.n_outcomes, grids[0].size, grids[1].size)
    return table
