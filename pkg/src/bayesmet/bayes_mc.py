"""Monte-Carlo Bayesian mean-square-error engine.

The three-step method: (1) Bayes-update a gridded posterior along a string
of simulated outcomes and take its variance, (2) average over mc_samples
independent strings per true value theta' (law of large numbers), (3)
integrate over theta' against the prior - a rectangle rule in 1D and
Simpson's rule on the outer grid in 2D, deliberately asymmetric to match the
thesis's own numbers.  Outcomes are drawn by inverse CDF over the discrete
likelihood column; posteriors reuse a running product so the whole error
curve over mu comes out of one pass.

Every (theta'-index) task owns an RNG stream spawned deterministically from
the master seed, and results are reduced in task order, so curves are
bit-identical for a fixed seed regardless of the thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .fockspace import NumericalError
from .measurements import Pom, likelihood_table
from .priors import FlatPrior
from .probes import Generator, ProbeState

UNDERFLOW = 1e-16


@dataclass(frozen=True)
class McConfig:
    """Grid and sampling constants of the MC engine.

    1D defaults follow the thesis's code (1250-point grid, 125 outer steps,
    1250 samples); 2D uses a 100-point grid per axis with a 20-point outer
    grid and 200 samples.  `outer_steps` is the number of outer integration
    points (per axis in 2D).
    """

    seed: int
    mu_max: int
    grid_points: int = 1250
    outer_steps: int = 125
    mc_samples: int = 1250
    threads: int | None = None

    def __post_init__(self):
        if self.mu_max < 1:
            raise ValueError("mu_max must be >= 1")
        if self.outer_steps < 3:
            raise ValueError("the outer theta' integral needs three rectangles at least")
        if self.grid_points % self.outer_steps != 0:
            raise ValueError("grid_points must be divisible by outer_steps")

    @classmethod
    def default_2d(cls, seed: int, mu_max: int, grid_points: int = 100,
                   outer_steps: int = 20, mc_samples: int = 200,
                   threads: int | None = None) -> "McConfig":
        return cls(seed=seed, mu_max=mu_max, grid_points=grid_points,
                   outer_steps=outer_steps, mc_samples=mc_samples, threads=threads)

    @property
    def n_threads(self) -> int:
        return self.threads or os.cpu_count() or 1


@dataclass(frozen=True)
class FunctionWeights:
    """Linear-function weighting V (d x l), diagonal Wf (trace 1), G = V Wf V^T."""

    v: np.ndarray
    wf: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.v, dtype=float))
        wf = np.asarray(self.wf, dtype=float)
        if wf.ndim == 1:
            wf = np.diag(wf)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "wf", wf)
        if np.diag(wf).min() < 0 or abs(np.trace(wf) - 1.0) > 1e-9:
            raise ValueError("Wf must be nonnegative diagonal with unit trace")
        g = self.g_matrix
        if np.linalg.eigvalsh(g).min() < -1e-12:
            raise ValueError("G = V Wf V^T must be PSD")

    @property
    def g_matrix(self) -> np.ndarray:
        return self.v @ self.wf @ self.v.T

    @classmethod
    def identity(cls, d: int = 2) -> "FunctionWeights":
        return cls(np.eye(d), np.full(d, 1.0 / d))


@dataclass(frozen=True)
class MseCurve:
    """Bayesian error per trial count with MC standard errors."""

    mu: np.ndarray
    errors: np.ndarray
    stderr: np.ndarray
    config: McConfig

    def __post_init__(self):
        if (np.asarray(self.errors) < -1e-12).any():
            raise NumericalError("negative Bayesian errors")


def _trapz_weights(grid: np.ndarray) -> np.ndarray:
    w = np.full(grid.size, grid[1] - grid[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def _simpson_weights(grid: np.ndarray) -> np.ndarray:
    """Exact weight vector of scipy's Simpson rule on this grid."""
    from scipy.integrate import simpson

    w = np.empty(grid.size)
    probe = np.zeros(grid.size)
    for i in range(grid.size):
        probe[i] = 1.0
        w[i] = simpson(probe, x=grid)
        probe[i] = 0.0
    return w


def _spawn_rngs(seed: int, n: int) -> list:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _stat_variance(moments):
    m1, m2 = moments[1], moments[2]
    return m2 - m1**2


def _stat_second_moment(moments):
    return moments[2]


def _stat_fourth_combo(moments):
    m1, m2, m3, m4 = moments[1], moments[2], moments[3], moments[4]
    return m4 - 4 * m1 * m3 + 6 * m1**2 * m2 - 3 * m1**4


def _run_outer_1d(table, cdf_col, theta, wq, config, rng, order, stat):
    """One theta' point: mc_samples strings of mu_max outcomes, running posterior."""
    n_out = table.shape[0]
    samples, mu_max = config.mc_samples, config.mu_max
    draws = np.minimum(
        np.searchsorted(cdf_col, rng.random((samples, mu_max)), side="right"),
        n_out - 1,
    )
    moment_w = [wq * theta**k for k in range(order + 1)]
    post = np.full((samples, theta.size), 1.0 / (theta[-1] - theta[0]))
    sums = np.zeros(mu_max)
    sq_sums = np.zeros(mu_max)
    for m in range(mu_max):
        post *= table[draws[:, m], :]
        norms = post @ moment_w[0]
        dead = norms <= UNDERFLOW
        if dead.any():
            post[dead] = 0.0
            norms[dead] = 1.0
        post /= norms[:, None]
        moments = [post @ w for w in moment_w]
        vals = stat(moments)
        sums[m] = vals.sum()
        sq_sums[m] = (vals**2).sum()
    return sums, sq_sums


def _engine_1d(probe, gen, pom, prior, config, order, stat):
    theta = prior.axis(0, config.grid_points)
    table = likelihood_table(probe, gen, pom, theta)
    wq = _trapz_weights(theta)
    step = config.grid_points // config.outer_steps
    outer_idx = np.arange(0, config.grid_points, step)
    # rectangle rule, normalized to unit mass (the raw rule overshoots by
    # grid/(grid-1), which would bias the curve by ~1e-3 relative)
    outer_w = 1.0 / outer_idx.size
    cdfs = np.cumsum(table[:, outer_idx], axis=0)
    rngs = _spawn_rngs(config.seed, outer_idx.size)

    def task(i):
        return _run_outer_1d(table, cdfs[:, i], theta, wq, config, rngs[i], order, stat)

    if config.n_threads > 1:
        with ThreadPoolExecutor(max_workers=config.n_threads) as pool:
            results = list(pool.map(task, range(outer_idx.size)))
    else:
        results = [task(i) for i in range(outer_idx.size)]

    n_s = config.mc_samples
    errors = np.zeros(config.mu_max)
    var_sum = np.zeros(config.mu_max)
    for sums, sq_sums in results:  # fixed reduction order
        mean = sums / n_s
        errors += outer_w * mean
        if n_s > 1:
            var_s = (sq_sums - n_s * mean**2) / (n_s - 1)
            var_sum += outer_w**2 * np.maximum(var_s, 0.0) / n_s
    return errors, np.sqrt(var_sum)


def mse_curve_1d(probe: ProbeState, gen: Generator, pom: Pom, prior: FlatPrior,
                 config: McConfig) -> MseCurve:
    """Bayesian mean square error for mu = 1..mu_max, single parameter."""
    if prior.n_params != 1:
        raise ValueError("mse_curve_1d needs a 1D prior")
    errors, stderr = _engine_1d(probe, gen, pom, prior, config, 2, _stat_variance)
    return MseCurve(mu=np.arange(1, config.mu_max + 1), errors=errors,
                    stderr=stderr, config=config)


def taylor_error_curve(probe: ProbeState, gen: Generator, pom: Pom, prior: FlatPrior,
                       config: McConfig) -> np.ndarray:
    """Estimate of the quartic Taylor remainder, indexed mu = 0..mu_max.

    The mu = 0 entry is the deterministic prior value; the rest is the MC
    average of the fourth posterior central-moment combination over 12.
    """
    if prior.n_params != 1:
        raise ValueError("taylor_error_curve needs a 1D prior")
    theta = prior.axis(0, config.grid_points)
    wq = _trapz_weights(theta)
    dens = np.full(theta.size, 1.0 / prior.widths[0])
    moments = [dens @ (wq * theta**k) for k in range(5)]
    prior_combo = (moments[4] - 4 * moments[1] * moments[3]
                   + 6 * moments[1]**2 * moments[2] - 3 * moments[1]**4)
    errors, _ = _engine_1d(probe, gen, pom, prior, config, 4, _stat_fourth_combo)
    return np.concatenate([[prior_combo], errors]) / 12.0


def precision_self_check(probe: ProbeState, gen: Generator, pom: Pom, prior: FlatPrior,
                         config: McConfig) -> float:
    """Relative defect between int p(theta) theta^2 and its nested MC estimate."""
    if prior.n_params != 1:
        raise ValueError("precision_self_check needs a 1D prior")
    direct = prior.means[0] ** 2 + prior.widths[0] ** 2 / 12
    curve, _ = _engine_1d(probe, gen, pom, prior, config, 2, _stat_second_moment)
    return abs(curve[-1] - direct) / direct


def _run_outer_2d(table, cdf_col, grids, wqs, gmat, config, rng):
    n_out = table.shape[0]
    samples, mu_max = config.mc_samples, config.mu_max
    draws = np.minimum(
        np.searchsorted(cdf_col, rng.random((samples, mu_max)), side="right"),
        n_out - 1,
    )
    t1, t2 = grids
    w1, w2 = wqs
    w1t = w1 * t1
    w1tt = w1 * t1**2
    w2t = w2 * t2
    w2tt = w2 * t2**2
    area = (t1[-1] - t1[0]) * (t2[-1] - t2[0])
    post = np.full((samples, t1.size, t2.size), 1.0 / area)
    sums = np.zeros(mu_max)
    sq_sums = np.zeros(mu_max)
    for m in range(mu_max):
        post *= table[draws[:, m]]
        marg1 = post @ w2                     # (samples, n1)
        norms = marg1 @ w1
        dead = norms <= UNDERFLOW
        if dead.any():
            post[dead] = 0.0
            norms[dead] = 1.0
        post /= norms[:, None, None]
        marg1 = post @ w2
        marg2 = np.einsum("sij,i->sj", post, w1)
        m1 = marg1 @ w1t
        m2 = marg2 @ w2t
        m11 = marg1 @ w1tt
        m22 = marg2 @ w2tt
        cross = (post @ w2t) @ w1t
        var1 = m11 - m1**2
        var2 = m22 - m2**2
        cov = cross - m1 * m2
        vals = gmat[0, 0] * var1 + gmat[1, 1] * var2 + 2 * gmat[0, 1] * cov
        sums[m] = vals.sum()
        sq_sums[m] = (vals**2).sum()
    return sums, sq_sums


def mse_curve_2d(probe: ProbeState, gen: Generator, pom: Pom, prior: FlatPrior,
                 weights: FunctionWeights, config: McConfig) -> MseCurve:
    """Bayesian error of linear functions of two parameters, mu = 1..mu_max."""
    if prior.n_params != 2:
        raise ValueError("mse_curve_2d needs a 2D prior")
    gmat = weights.g_matrix
    if gmat.shape != (2, 2):
        raise ValueError("FunctionWeights must act on 2 parameters")
    grids = (prior.axis(0, config.grid_points), prior.axis(1, config.grid_points))
    table = likelihood_table(probe, gen, pom, grids)
    wqs = (_trapz_weights(grids[0]), _trapz_weights(grids[1]))

    outer1 = np.linspace(*prior.interval(0), config.outer_steps)
    outer2 = np.linspace(*prior.interval(1), config.outer_steps)
    idx1 = np.minimum(np.searchsorted(grids[0], outer1, side="left"),
                      grids[0].size - 1)
    idx2 = np.minimum(np.searchsorted(grids[1], outer2, side="left"),
                      grids[1].size - 1)
    s1 = _simpson_weights(outer1) / prior.widths[0]
    s2 = _simpson_weights(outer2) / prior.widths[1]

    pairs = [(i, j) for i in range(outer1.size) for j in range(outer2.size)]
    cdfs = {
        (i, j): np.cumsum(table[:, idx1[i], idx2[j]])
        for i, j in pairs
    }
    rngs = _spawn_rngs(config.seed, len(pairs))

    def task(k):
        i, j = pairs[k]
        return _run_outer_2d(table, cdfs[(i, j)], grids, wqs, gmat, config, rngs[k])

    if config.n_threads > 1:
        with ThreadPoolExecutor(max_workers=config.n_threads) as pool:
            results = list(pool.map(task, range(len(pairs))))
    else:
        results = [task(k) for k in range(len(pairs))]

    n_s = config.mc_samples
    errors = np.zeros(config.mu_max)
    var_sum = np.zeros(config.mu_max)
    for k, (sums, sq_sums) in enumerate(results):
        i, j = pairs[k]
        w = s1[i] * s2[j]
        mean = sums / n_s
        errors += w * mean
        if n_s > 1:
            var_s = (sq_sums - n_s * mean**2) / (n_s - 1)
            var_sum += w**2 * np.maximum(var_s, 0.0) / n_s
    return MseCurve(mu=np.arange(1, config.mu_max + 1), errors=errors,
                    stderr=np.sqrt(var_sum), config=config)
