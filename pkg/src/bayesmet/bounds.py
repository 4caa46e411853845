"""Asymptotic and alternative precision bounds.

Quantum Fisher information (pure states, single or commuting multi-parameter
generators), classical Fisher information from a likelihood table by central
finite differences, the Cramer-Rao curve 1/(mu F_q) resp. Tr(W F_q^{-1})/mu,
the saturation threshold mu_tau, and the quantum Ziv-Zakai / Weiss-Weinstein
bounds evaluated on a fidelity profile by grid quadrature / grid supremum.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

_trapezoid = getattr(np, "trapezoid", np.trapz)

from .fockspace import NumericalError
from .probes import Generator, ProbeState

FISHER_DROP = 1e-12  # likelihood entries below this are skipped in F(theta)


def qfi(probe: ProbeState, gen: Generator) -> float:
    """F_q = 4 Var(K) for a pure probe under exp(-i K theta)."""
    if not probe.pure:
        raise ValueError("qfi is implemented for pure probes only "
                         "(mixed-state logarithmic derivatives are out of scope)")
    if len(gen) != 1:
        raise ValueError("qfi is single-parameter; use qfim")
    k = gen.operators[0].matrix
    kv = k @ probe.vector
    mean = float(np.real(probe.vector.conj() @ kv))
    second = float(np.real(kv.conj() @ kv))
    return 4.0 * (second - mean**2)


def qfim(probe: ProbeState, gen: Generator) -> np.ndarray:
    """(F_q)_ij = 4(<K_i K_j> - <K_i><K_j>) for commuting generators, pure probe."""
    if not probe.pure:
        raise ValueError("qfim is implemented for pure probes only")
    kvs = [op.matrix @ probe.vector for op in gen.operators]
    means = [float(np.real(probe.vector.conj() @ kv)) for kv in kvs]
    d = len(gen)
    f = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            f[i, j] = f[j, i] = 4.0 * (
                float(np.real(kvs[i].conj() @ kvs[j])) - means[i] * means[j]
            )
    return f


def _mixed_qfi(rho: np.ndarray, drho: np.ndarray, support_threshold: float = 1e-12) -> float:
    """Spectral SLD formula F_q = sum 2|<i|drho|j>|^2/(p_i+p_j).

    Private helper for the lossy demo; the public qfi contract stays
    pure-state only.
    """
    vals, vecs = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    b = vecs.conj().T @ drho @ vecs
    denom = vals[:, None] + vals[None, :]
    mask = denom > support_threshold
    out = np.zeros_like(denom)
    out[mask] = 2.0 * np.abs(b[mask]) ** 2 / denom[mask]
    return float(out.sum())


def classical_fisher(likelihood: np.ndarray, theta_grid, stability_check: bool = True):
    """Classical Fisher information from a gridded likelihood table.

    1D tables (n_outcomes, n) give F(theta) on the interior grid; 2D tables
    (n_outcomes, n1, n2) give the 2x2 matrix per interior point.  Central
    differences on the grid; outcome terms with p < 1e-12 are dropped.
    Returns (interior grid(s), F).
    """
    like = np.asarray(likelihood, dtype=float)
    if like.ndim == 2:
        grid = np.asarray(theta_grid, dtype=float)
        h = grid[1] - grid[0]
        p = like[:, 1:-1]
        dp = (like[:, 2:] - like[:, :-2]) / (2 * h)
        f = _fisher_sum(dp * dp, p)
        if stability_check and grid.size >= 5:
            # Richardson check; median over the grid so that isolated
            # likelihood zeros (where terms are dropped) do not trip it
            p2 = like[:, 2:-2]
            dp2 = (like[:, 4:] - like[:, :-4]) / (4 * h)
            f2 = _fisher_sum(dp2 * dp2, p2)
            rel = np.abs(f[1:-1] - f2) / np.maximum(np.abs(f[1:-1]), 1e-30)
            if np.median(rel) > 0.01:
                warnings.warn(
                    f"classical_fisher: doubling the step moves F by "
                    f"{np.median(rel):.1%} (median); grid too coarse", stacklevel=2,
                )
        return grid[1:-1], f
    if like.ndim == 3:
        g1 = np.asarray(theta_grid[0], dtype=float)
        g2 = np.asarray(theta_grid[1], dtype=float)
        h1, h2 = g1[1] - g1[0], g2[1] - g2[0]
        p = like[:, 1:-1, 1:-1]
        d1 = (like[:, 2:, 1:-1] - like[:, :-2, 1:-1]) / (2 * h1)
        d2 = (like[:, 1:-1, 2:] - like[:, 1:-1, :-2]) / (2 * h2)
        f = np.stack(
            [
                [_fisher_sum(d1 * d1, p), _fisher_sum(d1 * d2, p)],
                [_fisher_sum(d1 * d2, p), _fisher_sum(d2 * d2, p)],
            ]
        )
        return (g1[1:-1], g2[1:-1]), np.moveaxis(f, (0, 1), (-2, -1))
    raise ValueError("likelihood must be a 1D-grid or 2D-grid table")


def _fisher_sum(num: np.ndarray, p: np.ndarray) -> np.ndarray:
    mask = p > FISHER_DROP
    contrib = np.where(mask, num / np.where(mask, p, 1.0), 0.0)
    return contrib.sum(axis=0)


def qcrb_curve(fq, mu_max: int, weights=None) -> np.ndarray:
    """Cramer-Rao curve over mu = 1..mu_max: 1/(mu F_q) or Tr(W F_q^{-1})/mu."""
    mu = np.arange(1, mu_max + 1, dtype=float)
    fq_arr = np.asarray(fq, dtype=float)
    if fq_arr.ndim == 0:
        if fq_arr <= 0:
            raise NumericalError("quantum Fisher information is zero: one or more "
                                 "parameters cannot be estimated with finite precision")
        return 1.0 / (mu * float(fq_arr))
    d = fq_arr.shape[0]
    if weights is None:
        weights = np.full(d, 1.0 / d)
    w = np.asarray(weights, dtype=float)
    if np.linalg.matrix_rank(fq_arr, tol=1e-12) < d:
        raise NumericalError("quantum Fisher information matrix is singular: one or "
                             "more parameters cannot be estimated with finite precision")
    inv = np.linalg.inv(fq_arr)
    return float(np.trace(np.diag(w) @ inv)) / mu


def saturation_mu(errors: np.ndarray, crb: np.ndarray, eps_tau: float = 0.05):
    """Smallest mu whose relative CRB deviation stays below eps_tau afterwards."""
    errors = np.asarray(errors, dtype=float)
    crb = np.asarray(crb, dtype=float)
    if errors.shape != crb.shape:
        raise ValueError("curves must share the mu axis")
    rel = np.abs(errors - crb) / errors
    below = rel <= eps_tau
    for i in range(below.size):
        if below[i:].all():
            return i + 1
    return None


@dataclass(frozen=True)
class FidelityProfile:
    """f(theta) = <psi_0|psi(theta)> on a uniform grid of [0, W0].

    `amplitude2` carries f(2 theta), needed by the Weiss-Weinstein bound.
    """

    theta_grid: np.ndarray
    amplitude: np.ndarray
    amplitude2: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    def __post_init__(self):
        if abs(self.amplitude[0] - 1.0) > 1e-9:
            raise NumericalError("fidelity profile must start at f(0) = 1")


def fidelity_profile(probe: ProbeState, gen: Generator, width: float,
                     points: int = 1000) -> FidelityProfile:
    if not probe.pure or len(gen) != 1:
        raise ValueError("fidelity profiles need a pure probe and one generator")
    diags = gen.diagonals()
    if diags is None:
        raise NumericalError("fidelity_profile needs a diagonal generator")
    lam = diags[0]
    grid = np.linspace(0.0, width, points)
    w = np.abs(probe.vector) ** 2
    amp = np.exp(-1j * np.multiply.outer(grid, lam)) @ w
    amp2 = np.exp(-2j * np.multiply.outer(grid, lam)) @ w
    return FidelityProfile(theta_grid=grid, amplitude=amp, amplitude2=amp2)


def qzzb(profile: FidelityProfile, width: float, mu_max: int) -> np.ndarray:
    """Quantum Ziv-Zakai bound for a flat prior of the given width, mu = 1..mu_max."""
    theta = profile.theta_grid
    fid = np.clip(profile.values, 0.0, 1.0)
    mu = np.arange(1, mu_max + 1)
    integrand = (
        0.5 * theta * (1 - theta / width)
        * (1 - np.sqrt(np.clip(1 - fid[None, :] ** mu[:, None], 0.0, None)))
    )
    return _trapezoid(integrand, theta, axis=1)


def qwwb(profile: FidelityProfile, width: float, mu_max: int,
         denominator_guard: float = 1e-12) -> np.ndarray:
    """Quantum Weiss-Weinstein bound (s = 1/2) by grid supremum, mu = 1..mu_max."""
    h = profile.theta_grid
    f = profile.amplitude
    f2 = profile.amplitude2
    fid = np.abs(f) ** 2
    out = np.empty(mu_max)
    for i, mu in enumerate(range(1, mu_max + 1)):
        cross = np.real((f**2 * np.conj(f2)) ** mu)
        denom = fid**mu - (1 - 2 * h / width) * cross
        num = 0.5 * h**2 * (1 - h / width) ** 2 * fid ** (2 * mu)
        ok = np.abs(denom) > denominator_guard
        if not ok.any():
            raise NumericalError("Weiss-Weinstein: all grid points hit the "
                                 "denominator guard")
        out[i] = np.max(num[ok] / denom[ok])
    return out
