"""Single-shot optimal quantum estimators and their bounds.

The working objects are the prior moments

    rho      = int p(theta) rho(theta) dtheta
    rho_bar_k = int p(theta) rho(theta) theta_k dtheta

For the Mach-Zehnder interferometer with a flat prior these have the closed
entrywise form rho = rho_0 o K, rho_bar = rho_0 o L; for everything else
they are computed by Gauss-Legendre quadrature (the two routes cross-check
each other where both apply).  The optimal estimator S_k solves the Sylvester
equation S_k rho + rho S_k = 2 rho_bar_k, which is only determined on the
support of rho; it is solved there by dividing in the eigenbasis of rho.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fockspace import NumericalError, hermitian_eig
from .priors import FlatPrior
from .probes import Generator, ProbeState

SUPPORT_THRESHOLD = 1e-12
SYLVESTER_TOL = 1e-8


@dataclass(frozen=True)
class PriorMoments:
    """rho and the first-moment matrices rho_bar_k of a flat prior."""

    rho: np.ndarray
    rho_bar: tuple
    prior: FlatPrior

    def __post_init__(self):
        object.__setattr__(self, "rho", np.asarray(self.rho, dtype=complex))
        object.__setattr__(self, "rho_bar", tuple(np.asarray(m, dtype=complex)
                                                  for m in self.rho_bar))
        tr = np.trace(self.rho)
        if abs(tr - 1.0) > 1e-8:
            raise NumericalError(f"Tr rho = {tr} is not 1 to 1e-8")
        if np.abs(self.rho - self.rho.conj().T).max() > 1e-9:
            raise NumericalError("rho is not Hermitian")
        for k, (m, mean) in enumerate(zip(self.rho_bar, self.prior.means)):
            if np.abs(m - m.conj().T).max() > 1e-9:
                raise NumericalError(f"rho_bar[{k}] is not Hermitian")
            if abs(np.trace(m) - mean) > 1e-8:
                raise NumericalError(
                    f"Tr rho_bar[{k}] = {np.trace(m)} != prior mean {mean}"
                )

    @property
    def n_params(self) -> int:
        return len(self.rho_bar)


@dataclass(frozen=True)
class QuantumEstimator:
    """Optimal quantum estimators S_k restricted to the support of rho.

    `support_basis` holds the eigenvectors of rho with eigenvalue above the
    support threshold as columns (full dimension); `s_support` holds each S_k
    in that eigenbasis; `matrices` are the same operators embedded back in the
    full space.  For a single parameter `estimates`/`projectors` give the
    spectral decomposition of S whose projectors form the optimal POM.
    """

    support_basis: np.ndarray
    support_weights: np.ndarray
    s_support: tuple
    matrices: tuple
    estimates: np.ndarray | None = None
    projectors: np.ndarray | None = None

    @property
    def n_params(self) -> int:
        return len(self.s_support)


def _kl_matrices(delta: np.ndarray, width: float, mean: float):
    """Entrywise K and L for frequency differences delta = (n-m) - (k-l)."""
    x = delta[:, None] - delta[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.exp(-0.5j * x * mean)
        b = np.sin(x * width / 4)
        c = np.cos(x * width / 4)
        d = mean - 2j / x
        kmat = 4 * a * b / (x * width)
        lmat = (2 * a / x) * (2 * b * d / width + 1j * c)
    zero = x == 0
    kmat[zero] = 1.0
    lmat[zero] = mean
    return kmat, lmat


def prior_moments_interferometer(probe: ProbeState, prior: FlatPrior) -> PriorMoments:
    """Closed-form moments for a pure 2-mode probe under J_z and a flat prior."""
    if not probe.pure or probe.space.modes != 2:
        raise ValueError("the interferometric route needs a 2-mode pure probe")
    if prior.n_params != 1:
        raise ValueError("the interferometric route is single-parameter")
    delta = (probe.space.mode_numbers(0) - probe.space.mode_numbers(1)).astype(float)
    kmat, lmat = _kl_matrices(delta, prior.widths[0], prior.means[0])
    rho0 = np.outer(probe.vector, probe.vector.conj())
    return PriorMoments(rho=rho0 * kmat, rho_bar=(rho0 * lmat,), prior=prior)


def _gl_nodes(prior: FlatPrior, nodes: int):
    grids, weights = [], []
    for mean, width in zip(prior.means, prior.widths):
        x, w = np.polynomial.legendre.leggauss(nodes)
        grids.append(mean + 0.5 * width * x)
        weights.append(0.5 * w)  # times width, over prior density 1/width
    return grids, weights


def _moments_from_phases(rho0, diags, prior, nodes):
    """Accumulate rho and rho_bar entrywise: per-axis quadrature of phase factors."""
    grids, weights = _gl_nodes(prior, nodes)
    d = len(diags)
    kfac = []  # per-axis  sum_n w_n exp(-i x theta_n)  on the frequency matrix
    lfac = []  # same with an extra theta_n
    for lam, th, w in zip(diags, grids, weights):
        x = lam[:, None] - lam[None, :]
        e = np.exp(-1j * np.multiply.outer(th, x))  # (nodes, dim, dim)
        kfac.append(np.tensordot(w, e, axes=1))
        lfac.append(np.tensordot(w * th, e, axes=1))
    kprod = np.ones_like(kfac[0])
    for f in kfac:
        kprod = kprod * f
    rho = rho0 * kprod
    rho_bar = []
    for k in range(d):
        prod = np.ones_like(kfac[0])
        for i in range(d):
            prod = prod * (lfac[i] if i == k else kfac[i])
        rho_bar.append(rho0 * prod)
    return rho, rho_bar


def prior_moments_generic(probe: ProbeState, gen: Generator, prior: FlatPrior,
                          nodes: int = 200, check_convergence: bool = True) -> PriorMoments:
    """Moments by Gauss-Legendre quadrature for any probe and commuting generators."""
    if prior.n_params != len(gen):
        raise ValueError("prior dimension does not match the number of generators")
    diags = gen.diagonals()
    basis = None
    if diags is None:
        if len(gen) > 1:
            raise NumericalError(
                "non-diagonal multi-parameter generators need a shared eigenbasis; "
                "not provided"
            )
        vals, basis = hermitian_eig(gen.operators[0])
        diags = [vals]
    rho0 = probe.density()
    if basis is not None:
        rho0 = basis.conj().T @ rho0 @ basis
    rho, rho_bar = _moments_from_phases(rho0, diags, prior, nodes)
    if check_convergence:
        rho2, rho_bar2 = _moments_from_phases(rho0, diags, prior, 2 * nodes)
        drift = max(
            np.abs(rho - rho2).max(),
            max(np.abs(a - b).max() for a, b in zip(rho_bar, rho_bar2)),
        )
        if drift > 1e-6:
            raise NumericalError(
                f"quadrature not converged: doubling nodes moves moments by {drift:.2e}"
            )
    if basis is not None:
        rho = basis @ rho @ basis.conj().T
        rho_bar = [basis @ m @ basis.conj().T for m in rho_bar]
    return PriorMoments(rho=rho, rho_bar=tuple(rho_bar), prior=prior)


def solve_estimator(moments: PriorMoments,
                    support_threshold: float = SUPPORT_THRESHOLD) -> QuantumEstimator:
    """Sylvester solve S_k rho + rho S_k = 2 rho_bar_k on the support of rho."""
    rho = moments.rho
    dim = rho.shape[0]
    # cheap pre-restriction: PSD implies rows/cols with zero diagonal vanish
    active = np.flatnonzero(np.real(np.diag(rho)) > 1e-15)
    rho_a = rho[np.ix_(active, active)]
    p_all, v_all = np.linalg.eigh(0.5 * (rho_a + rho_a.conj().T))
    keep = p_all > support_threshold
    p = p_all[keep]
    v = v_all[:, keep]
    basis = np.zeros((dim, p.size), dtype=complex)
    basis[active] = v

    s_support, matrices = [], []
    denom = p[:, None] + p[None, :]
    for k, rb in enumerate(moments.rho_bar):
        # The moments must live on the support, otherwise the cutoff failed.
        # Cauchy-Schwarz allows |<a|rho_bar|b>| up to theta * sqrt(p_a p_b), so
        # eigenvalue thresholding alone can leak ~ theta * sqrt(1e-12); anything
        # past 1e-5 signals a genuine truncation problem.
        proj = basis @ (basis.conj().T @ rb @ basis) @ basis.conj().T
        lost = np.abs(rb - proj).max()
        if lost > 1e-5 * max(1.0, np.abs(rb).max()):
            raise NumericalError(
                f"rho_bar[{k}] leaks off the support of rho by {lost:.2e}; "
                "check the cutoff in the intermediate calculations"
            )
        b = basis.conj().T @ rb @ basis
        s_d = 2 * b / denom
        asym = np.abs(s_d - s_d.conj().T).max()
        if asym > 1e-5 * max(1.0, np.abs(s_d).max()):
            raise NumericalError(
                "the estimates of the unknown parameter must be real; "
                f"check the cutoff (non-Hermitian part {asym:.2e})"
            )
        s_d = 0.5 * (s_d + s_d.conj().T)
        s_full = basis @ s_d @ basis.conj().T
        # residual on the support of rho (off-support rho_bar mass was gated above)
        resid = np.abs(s_d * denom - 2 * b).max()
        if resid > SYLVESTER_TOL:
            raise NumericalError(f"Sylvester residual {resid:.2e} > {SYLVESTER_TOL}")
        s_support.append(s_d)
        matrices.append(s_full)

    estimates = projectors = None
    if len(s_support) == 1:
        vals, vecs = np.linalg.eigh(s_support[0])
        estimates = vals.real
        projectors = basis @ vecs
    return QuantumEstimator(
        support_basis=basis,
        support_weights=p,
        s_support=tuple(s_support),
        matrices=tuple(matrices),
        estimates=estimates,
        projectors=projectors,
    )


def single_shot_bound(moments: PriorMoments, estimator: QuantumEstimator,
                      prior: FlatPrior, weights=None) -> float:
    """sum_k w_k [ int p(theta) theta_k^2 - Tr(rho S_k^2) ]."""
    d = moments.n_params
    if weights is None:
        weights = np.full(d, 1.0 / d)
    weights = np.asarray(weights, dtype=float)
    if weights.min() < 0 or abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be nonnegative with trace 1")
    p = estimator.support_weights
    total = 0.0
    for w, mean, width, s_d in zip(weights, prior.means, prior.widths,
                                   estimator.s_support):
        second_moment = mean**2 + width**2 / 12
        tr_rho_s2 = float(np.real(np.sum(p * np.einsum("ij,ji->i", s_d, s_d))))
        total += w * (second_moment - tr_rho_s2)
    if total < -1e-8:
        raise NumericalError(f"single-shot bound came out negative: {total:.3e}")
    return float(total)


def commutation_check(estimator: QuantumEstimator) -> float:
    """Max pairwise commutator norm of the S_k; ~0 authorizes a joint projective POM."""
    if estimator.n_params < 2:
        raise ValueError("commutation_check needs at least 2 parameters")
    worst = 0.0
    for i in range(estimator.n_params):
        for j in range(i + 1, estimator.n_params):
            a, b = estimator.s_support[i], estimator.s_support[j]
            worst = max(worst, float(np.abs(a @ b - b @ a).max()))
    return worst


def noon_collective_bound(mu: int, prior: FlatPrior, nbar: int = 2,
                          nodes: int = 400) -> float:
    """Single-shot bound for one collective POM on mu copies of a NOON state.

    Works in the per-copy 2-dimensional effective space spanned by |N,0> and
    |0,N>, where rho(theta) = [[1, e^{-i nbar theta}], [e^{i nbar theta}, 1]]/2.
    """
    if not 1 <= mu <= 10:
        raise ValueError("collective bound supports 1 <= mu <= 10 copies")
    if prior.n_params != 1:
        raise ValueError("collective bound is single-parameter")
    mean, width = prior.means[0], prior.widths[0]
    x, w = np.polynomial.legendre.leggauss(nodes)
    thetas = mean + 0.5 * width * x
    w = 0.5 * w
    dim = 2**mu
    rho = np.zeros((dim, dim), dtype=complex)
    rho_bar = np.zeros((dim, dim), dtype=complex)
    for wt, th in zip(w, thetas):
        single = 0.5 * np.array([[1, np.exp(-1j * nbar * th)],
                                 [np.exp(1j * nbar * th), 1]])
        full = single
        for _ in range(mu - 1):
            full = np.kron(full, single)
        rho += wt * full
        rho_bar += wt * th * full
    moments = PriorMoments(rho=rho, rho_bar=(rho_bar,), prior=prior)
    est = solve_estimator(moments)
    return single_shot_bound(moments, est, prior)


def high_prior_approx_bound(probe: ProbeState, gen: Generator, prior: FlatPrior) -> float:
    """Narrow-prior single-shot approximation Var_p (1 - Var_p F_q), single parameter."""
    if prior.n_params != 1 or len(gen) != 1:
        raise ValueError("the high-prior-knowledge approximation is single-parameter")
    if not probe.pure:
        raise ValueError("pure probes only")
    k = gen.operators[0].matrix
    kv = k @ probe.vector
    fq = 4 * (float(np.real(kv.conj() @ kv)) - float(np.real(probe.vector.conj() @ kv)) ** 2)
    var = prior.variance(0)
    return var * (1.0 - var * fq)
