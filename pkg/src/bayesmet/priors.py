"""Flat priors, the posterior-ambiguity scan and the practicality criterion."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

_trapezoid = getattr(np, "trapezoid", np.trapz)

from .fockspace import NumericalError

DEFAULT_GRID_1D = 1000
DEFAULT_GRID_2D = 200


@dataclass(frozen=True)
class FlatPrior:
    """Hyper-rectangular uniform prior: density 1/prod(widths) inside the box."""

    means: tuple
    widths: tuple
    grid_points: int = 0  # 0 -> dimension-dependent default

    def __post_init__(self):
        means = tuple(float(m) for m in np.atleast_1d(self.means))
        widths = tuple(float(w) for w in np.atleast_1d(self.widths))
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "widths", widths)
        if len(means) != len(widths):
            raise ValueError("means and widths must have the same length")
        if any(w <= 0 for w in widths):
            raise ValueError("prior widths must be positive")
        if self.grid_points == 0:
            default = DEFAULT_GRID_1D if len(means) == 1 else DEFAULT_GRID_2D
            object.__setattr__(self, "grid_points", default)
        if any(w > 2 for w in widths):
            warnings.warn(
                "prior width above 2: the square error is no longer a reliable "
                "surrogate for a periodic deviation function",
                stacklevel=2,
            )

    @property
    def n_params(self) -> int:
        return len(self.means)

    @property
    def density(self) -> float:
        return 1.0 / math.prod(self.widths)

    def variance(self, k: int = 0) -> float:
        return self.widths[k] ** 2 / 12

    def interval(self, k: int = 0) -> tuple[float, float]:
        return (self.means[k] - self.widths[k] / 2, self.means[k] + self.widths[k] / 2)

    def axis(self, k: int = 0, points: int | None = None) -> np.ndarray:
        a, b = self.interval(k)
        return np.linspace(a, b, points or self.grid_points)


def noon_intrinsic_width(n: int) -> float:
    """Largest unambiguous flat-prior width of an N-photon NOON probe."""
    if n < 1:
        raise ValueError("NOON intrinsic width needs N >= 1")
    return math.pi / n if n % 2 == 0 else math.pi / (2 * n)


def worthwhile_repetitions(prior_variance: float, fq: float) -> float:
    """Trials needed before the asymptotic error can beat the prior variance."""
    if fq <= 0 or prior_variance <= 0:
        raise ValueError("prior variance and F_q must be positive")
    return 1.0 / (prior_variance * fq)


def count_posterior_maxima(density: np.ndarray, rel_height: float = 0.5) -> int:
    """Local maxima above rel_height of the global maximum (1D or 2D grid)."""
    d = np.asarray(density, dtype=float)
    top = d.max()
    if top <= 0:
        return 0
    if d.ndim == 1:
        inner = d[1:-1]
        is_max = (inner >= d[:-2]) & (inner > d[2:]) & (inner >= rel_height * top)
        # plateau-safe: require strictly greater than one neighbour
        return int(np.count_nonzero(is_max))
    if d.ndim == 2:
        c = d[1:-1, 1:-1]
        mask = c >= rel_height * top
        for off in ((0, 1), (1, 0), (1, 1), (1, -1)):
            before = d[1 - off[0]:d.shape[0] - 1 - off[0],
                       1 - off[1]:d.shape[1] - 1 - off[1]]
            after = d[1 + off[0]:d.shape[0] - 1 + off[0],
                      1 + off[1]:d.shape[1] - 1 + off[1]]
            mask &= (c >= before) & (c > after)
        return int(np.count_nonzero(mask))
    raise ValueError("density must be a 1D or 2D grid")


@dataclass(frozen=True)
class PriorScan:
    """Posterior snapshots of one simulated outcome trajectory."""

    grids: tuple
    snapshots: dict       # mu -> posterior on the grid
    maxima_counts: dict   # mu -> number of prominent local maxima
    theta_true: tuple
    seed: int


def prior_scan(probe, gen, pom, prior: FlatPrior, theta_true, mu_list, seed: int) -> PriorScan:
    """Bayes-update a gridded posterior along one simulated trajectory.

    Outcomes are drawn from p(m|theta_true); after each of the mu_list trial
    counts the (trapezoid-normalized) posterior is recorded together with the
    number of local maxima above 50% of its global maximum.  The judgement of
    the intrinsic width from these counts is left to the caller.
    """
    from .measurements import likelihood_table  # local import, avoids a cycle

    theta_true = tuple(float(t) for t in np.atleast_1d(theta_true))
    if len(theta_true) != prior.n_params:
        raise ValueError("theta_true dimension does not match the prior")
    for t, (a, b) in zip(theta_true, [prior.interval(k) for k in range(prior.n_params)]):
        if not a <= t <= b:
            raise ValueError(f"theta_true {t} outside the prior box [{a}, {b}]")
    if prior.n_params not in (1, 2):
        raise ValueError("prior_scan supports 1 or 2 parameters")

    grids = tuple(prior.axis(k) for k in range(prior.n_params))
    if prior.n_params == 1:
        table = likelihood_table(probe, gen, pom, grids[0])
        true_idx = (int(np.searchsorted(grids[0], theta_true[0])),)
    else:
        table = likelihood_table(probe, gen, pom, grids)
        true_idx = tuple(int(np.searchsorted(g, t)) for g, t in zip(grids, theta_true))
    true_idx = tuple(min(i, g.size - 1) for i, g in zip(true_idx, grids))

    column = table[(slice(None), *true_idx)]
    cdf = np.cumsum(column)
    rng = np.random.default_rng(seed)
    mu_list = sorted(int(m) for m in mu_list)
    mu_max = mu_list[-1] if mu_list else 0
    draws = np.minimum(
        np.searchsorted(cdf, rng.random(mu_max), side="right"), table.shape[0] - 1
    )

    posterior = np.ones([g.size for g in grids])
    posterior /= _trapz_nd(posterior, grids)
    snapshots, counts = {}, {}
    if 0 in mu_list:
        snapshots[0] = posterior.copy()
        counts[0] = count_posterior_maxima(posterior)
    for step in range(1, mu_max + 1):
        posterior = posterior * table[draws[step - 1]]
        norm = _trapz_nd(posterior, grids)
        if norm > 1e-16:
            posterior = posterior / norm
        else:
            raise NumericalError("posterior norm underflow (degenerate simulation)")
        if step in mu_list:
            snapshots[step] = posterior.copy()
            counts[step] = count_posterior_maxima(posterior)
    return PriorScan(grids=grids, snapshots=snapshots, maxima_counts=counts,
                     theta_true=theta_true, seed=seed)


def _trapz_nd(values: np.ndarray, grids) -> float:
    out = values
    for ax in range(len(grids) - 1, -1, -1):
        out = _trapezoid(out, grids[ax], axis=ax)
    return float(out)
