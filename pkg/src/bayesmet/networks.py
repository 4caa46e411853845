"""Sensor-symmetric network asymptotics and phase-imaging scalings.

Everything here is closed form: the sensor-symmetric quantum Fisher matrix
F_q = 4v[(1-J) I + J 11^T] and its inverse, the normalisation and geometry
parameters of a set of linear functions, the asymptotic error through
h(J, G, d), the optimal correlation strength J_opt (and gamma_opt for two
qubits), and the local/global single-shot imaging bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fockspace import NumericalError


@dataclass(frozen=True)
class LinearFunctions:
    """Columns of V are the coefficient vectors f_j; Wf weights them (trace 1)."""

    v: np.ndarray
    wf: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.v, dtype=float))
        wf = np.asarray(self.wf, dtype=float)
        if wf.ndim == 1:
            wf = np.diag(wf)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "wf", wf)
        if wf.shape != (v.shape[1], v.shape[1]):
            raise ValueError("Wf must be l x l for V with l columns")
        if np.abs(wf - np.diag(np.diag(wf))).max() > 1e-12 or np.diag(wf).min() < 0:
            raise ValueError("Wf must be diagonal and nonnegative")
        if abs(np.trace(wf) - 1.0) > 1e-9:
            raise ValueError("Wf must have unit trace")
        if not np.linalg.norm(v, axis=0).all():
            raise ValueError("V has an all-zero column")

    @property
    def g_matrix(self) -> np.ndarray:
        return self.v @ self.wf @ self.v.T

    @classmethod
    def identity(cls, d: int) -> "LinearFunctions":
        return cls(np.eye(d), np.full(d, 1.0 / d))


@dataclass(frozen=True)
class NetworkSpec:
    """Sensor-symmetric network: d sensors, per-sensor variance v, correlations J."""

    d: int
    v: float
    j: float

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("networks need d >= 2 sensors")
        if not 0 < 4 * self.v <= 1:
            raise ValueError("qubit sensors need 0 < 4v <= 1")
        if not 1 / (1 - self.d) < self.j < 1:
            raise NumericalError(
                f"J = {self.j} outside (1/(1-d), 1): Fisher matrix is singular"
            )


def qfim_sensor_symmetric(spec: NetworkSpec) -> tuple[np.ndarray, np.ndarray]:
    """F_q = 4v[(1-J) I + J 11^T] and its closed-form inverse."""
    d, v, j = spec.d, spec.v, spec.j
    ones = np.ones((d, d))
    f = 4 * v * ((1 - j) * np.eye(d) + j * ones)
    inv = ((1 + (d - 1) * j) * np.eye(d) - j * ones) / (4 * v * (1 - j) * (1 + (d - 1) * j))
    return f, inv


def geometry(funcs: LinearFunctions, d: int) -> tuple[float, float]:
    """Normalisation N = sum w_j |f_j|^2 and geometry G in [-1, d-1]."""
    v, wf = funcs.v, np.diag(funcs.wf)
    if v.shape[0] != d:
        raise ValueError("function coefficients must have d rows")
    norms2 = np.sum(v**2, axis=0)
    norm_term = float(wf @ norms2)
    if norm_term <= 0:
        raise ValueError("degenerate all-zero functions")
    # |f|^2 [d cos^2(phi_1) - 1] = (f . 1)^2 - |f|^2, avoiding angle extraction
    proj2 = v.sum(axis=0) ** 2
    g = float(wf @ (proj2 - norms2)) / norm_term
    return norm_term, g


def correlation_link(j: float, g: float, d: int) -> float:
    """h(J, G, d) = [1 + (d-2-G) J] / ((1-J)[1 + (d-1) J])."""
    return (1 + (d - 2 - g) * j) / ((1 - j) * (1 + (d - 1) * j))


def asymptotic_error(spec: NetworkSpec, funcs: LinearFunctions, mu: int) -> float:
    """Cramer-Rao error (N/(4 mu v)) h(J, G, d) of the linear functions."""
    norm_term, g = geometry(funcs, spec.d)
    return norm_term / (4 * mu * spec.v) * correlation_link(spec.j, g, spec.d)


def j_opt(g: float, d: int) -> float:
    """Correlation strength minimizing h(., G, d) on 1/(1-d) < J < 1."""
    if not -1 < g < d - 1:
        raise ValueError("geometry parameter must lie strictly inside (-1, d-1)")
    if abs(g - (d - 2)) < 1e-12:
        return (d - 2) / (2 * (d - 1))  # removable singularity
    return (1 - math.sqrt((g + 1) * (d - 1 - g) / (d - 1))) / (g + 2 - d)


def gamma_opt(g: float) -> float:
    """Two-sensor state parameter realising j_opt(G, 2); positive branch."""
    if not -1 < g < 1:
        raise ValueError("geometry parameter must lie strictly inside (-1, 1)")
    if g == 0:
        return 1.0
    root = math.sqrt(1 - g * g)
    return math.sqrt((g - 1 + root) / (g + 1 - root))


def gamma_correlations(gamma: float, d: int) -> float:
    """Inter-sensor correlations of the gamma state: (1-g^2)/(1+(2^{d-1}-1)g^2)."""
    return (1 - gamma**2) / (1 + (2 ** (d - 1) - 1) * gamma**2)


def imaging_local_scaling(n: int, nbar: float, d: int) -> tuple[float, float]:
    """f(N, nbar, d) and the local-strategy single-shot bound (1/nbar^2)[pi^2/3 - f]."""
    if n <= 0:
        raise ValueError("N must be a positive integer")
    x = n * math.pi / nbar
    f = (
        4 * nbar**3 * ((1 + d) * n - nbar)
        * (n * math.pi * math.cos(x) - nbar * math.sin(x)) ** 2
        / (math.pi**2 * n**6 * (1 + d) ** 2)
    )
    bound = (math.pi**2 / 3 - f) / nbar**2
    return f, bound


def imaging_global_bound(nbar: float, d: int, beta: float | None = None) -> float:
    """Generalised-NOON single-shot bound; beta defaults to the optimum 1/sqrt(d+sqrt(d))."""
    if beta is None:
        beta = 1.0 / math.sqrt(d + math.sqrt(d))
    if not 0 < beta < 1 / math.sqrt(d):
        raise ValueError("beta must lie in (0, 1/sqrt(d))")
    gain = 4 * beta**2 * (1 - d * beta**2) / (1 + beta**2 * (1 - d))
    return (math.pi**2 / 3 - gain) / nbar**2


def imaging_global_optimum(d: int) -> float:
    return 1.0 / math.sqrt(d + math.sqrt(d))
