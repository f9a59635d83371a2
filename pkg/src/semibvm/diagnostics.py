"""Efficiency and posterior-normality diagnostics.

Computable objects around the local-asymptotic-normality expansion of the
symmetric-error models: the scalar information v_eta = E_eta0[s_eta
s_eta0], the matrix V_n (v_eta Z_n in regression, an average of
Z_i v_eta(W_i) Z_i' blocks in the mixed model), the efficient centering
statistic Delta_n = n^{-1/2} V_n^{-1} score(theta0), the numeric LAN
remainder over a grid of local parameters, per-observation KL-ball sums,
and the Kolmogorov-Smirnov distance between standardized posterior draws
and their reference normal (the total-variation statement is not
estimable from draws; per-projection KS is the implemented surrogate).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .densities import Density, SymmetricDensity, _adaptive_pair
from .exceptions import (
    DivergenceInfiniteError,
    InsufficientMcSizeError,
    SingularInformationError,
    UnreliableChainError,
)
from .mixed import (
    MixedDataset,
    RandomEffectLaw,
    make_integrator,
    psi_score_batch,
    score_mixed,
)
from .quadrature import QuadratureScheme
from .regression import RegressionDataset, loglik_regression, score_regression
from .samplers.chain import PosteriorChain, chain_ess


@dataclass(frozen=True)
class FisherInfo:
    """Efficient information summary.

    v_eta is the scalar regression information; v_eta_of_w maps flattened
    random-covariate patterns to m x m blocks in the mixed model.  V_n is
    the p x p matrix entering the LAN expansion.
    """

    V_n: np.ndarray
    v_eta: float | None = None
    v_eta_of_w: dict | None = None
    mc_se: float | None = None

    @property
    def rho_min(self) -> float:
        return float(np.linalg.eigvalsh(self.V_n)[0])

    @property
    def rho_max(self) -> float:
        return float(np.linalg.eigvalsh(self.V_n)[-1])

    def inverse(self) -> np.ndarray:
        try:
            return np.linalg.inv(self.V_n)
        except np.linalg.LinAlgError as exc:
            raise SingularInformationError(str(exc)) from exc


def _score_cross_moment(eta: SymmetricDensity, eta0: SymmetricDensity,
                        scheme: QuadratureScheme) -> float:
    """v_eta = int s_eta(x) s_eta0(x) eta0(x) dx over eta0's support
    (intersected with eta's, on which the model class lives)."""
    hw = min(eta0.effective_halfwidth(scheme), eta.effective_halfwidth(scheme))
    breakpoints = (-hw, hw)

    def integrand(x):
        return (eta.score_at(x) * eta0.score_at(x) * eta0.pdf(x))[None, :]

    return float(_adaptive_pair(integrand, scheme, breakpoints)[0])


def d2_distance(eta: SymmetricDensity, eta0: SymmetricDensity,
                scheme: QuadratureScheme | None = None) -> float:
    """d_2(eta, eta0) = sqrt(E_eta0 (s_eta - s_eta0)^2)."""
    scheme = scheme or QuadratureScheme()
    hw = min(eta0.effective_halfwidth(scheme), eta.effective_halfwidth(scheme))

    def integrand(x):
        d = eta.score_at(x) - eta0.score_at(x)
        return (d * d * eta0.pdf(x))[None, :]

    return float(np.sqrt(max(_adaptive_pair(integrand, scheme, (-hw, hw))[0],
                             0.0)))


def fisher_regression(eta: SymmetricDensity, eta0: SymmetricDensity,
                      design_matrix: np.ndarray,
                      scheme: QuadratureScheme | None = None) -> FisherInfo:
    """Regression information: V_n = v_eta * Z_n exactly."""
    scheme = scheme or QuadratureScheme()
    v = _score_cross_moment(eta, eta0, scheme)
    return FisherInfo(V_n=v * np.asarray(design_matrix, float), v_eta=v)


def fisher_mixed(
    f: SymmetricDensity,
    G: RandomEffectLaw,
    f0: SymmetricDensity,
    G0: RandomEffectLaw,
    data: MixedDataset,
    mc_size: int = 2000,
    rng: np.random.Generator | None = None,
    mc_se_tol: float | None = None,
) -> FisherInfo:
    """Monte Carlo information for the mixed model.

    For each distinct random-covariate block w, draws y ~ Psi_{eta0}(.|w)
    (b from G0, errors from f0) and averages s_eta(y|w) s_eta0(y|w)'.
    V_n = n^{-1} sum_i Z_i v(W_i) Z_i'.  The largest elementwise MC
    standard error is reported; if mc_se_tol is given and exceeded,
    InsufficientMcSizeError is raised.
    """
    rng = rng or np.random.default_rng(0)
    integ = make_integrator(G)
    integ0 = make_integrator(G0)
    blocks: dict[bytes, np.ndarray] = {}
    se_worst = 0.0
    n, m = data.n, data.m
    v_map: dict[bytes, np.ndarray] = {}
    for i in range(n):
        key = data.random_covariates[i].tobytes()
        if key in blocks:
            continue
        w = data.random_covariates[i]
        b = G0.sample(rng, mc_size)            # (S, q)
        eps = f0.sample(rng, mc_size * m).reshape(mc_size, m)
        y = b @ w + eps
        s_eta = psi_score_batch(y, w, f, G, integ)     # (S, m)
        s_eta0 = psi_score_batch(y, w, f0, G0, integ0)
        prods = np.einsum("sj,sk->sjk", s_eta, s_eta0)
        v_hat = prods.mean(axis=0)
        se = prods.std(axis=0, ddof=1) / np.sqrt(mc_size)
        se_worst = max(se_worst, float(se.max()))
        blocks[key] = v_hat
        v_map[key] = v_hat
    if mc_se_tol is not None and se_worst > mc_se_tol:
        raise InsufficientMcSizeError(
            f"max MC standard error {se_worst:.3e} exceeds {mc_se_tol:g}"
        )
    V = np.zeros((data.p, data.p))
    for i in range(n):
        v_hat = blocks[data.random_covariates[i].tobytes()]
        zi = data.fixed_covariates[i]
        V += zi @ v_hat @ zi.T
    return FisherInfo(V_n=V / n, v_eta_of_w=v_map, mc_se=se_worst)


def delta_n(data, theta0, eta0, info: FisherInfo) -> np.ndarray:
    """Delta_n = n^{-1/2} V_n^{-1} score(theta0).

    eta0 is the error SymmetricDensity for regression data, or an
    (f0, G0) pair for mixed data.
    """
    theta0 = np.asarray(theta0, float)
    if isinstance(data, RegressionDataset):
        score = score_regression(data, theta0, eta0)
        n = data.n
    elif isinstance(data, MixedDataset):
        f0, g0 = eta0
        score = score_mixed(data, theta0, f0, g0)
        n = data.n
    else:
        raise TypeError("data must be a RegressionDataset or MixedDataset")
    try:
        solved = np.linalg.solve(info.V_n, score)
    except np.linalg.LinAlgError as exc:
        raise SingularInformationError(str(exc)) from exc
    return solved / np.sqrt(n)


def lan_remainder(
    data: RegressionDataset,
    eta: SymmetricDensity,
    theta0,
    h_grid: np.ndarray,
    info: FisherInfo,
) -> np.ndarray:
    """log LR(theta0 + h/sqrt(n)) minus its linear-quadratic expansion.

    Returns one remainder per row of h_grid; -inf log-likelihoods from
    out-of-support perturbations propagate as non-finite remainders.
    """
    theta0 = np.asarray(theta0, float)
    h_grid = np.atleast_2d(np.asarray(h_grid, float))
    n = data.n
    base = loglik_regression(data, theta0, eta)
    score = score_regression(data, theta0, eta)
    out = np.empty(h_grid.shape[0])
    for k, h in enumerate(h_grid):
        shifted = loglik_regression(data, theta0 + h / np.sqrt(n), eta)
        out[k] = (shifted - base - h @ score / np.sqrt(n)
                  + 0.5 * h @ info.V_n @ h)
    return out


def ball_radius_h_grid(p: int, radius: float = 2.0, n_directions: int = 16,
                       n_radii: int = 4) -> np.ndarray:
    """Deterministic grid of local-parameter vectors covering |h| <= radius,
    including h = 0."""
    if p == 1:
        r = np.linspace(-radius, radius, 2 * n_radii + 1)
        return r[:, None]
    angles = np.linspace(0.0, 2.0 * np.pi, n_directions, endpoint=False)
    radii = np.linspace(radius / n_radii, radius, n_radii)
    pts = [np.zeros(p)]
    for r in radii:
        for a in angles:
            h = np.zeros(p)
            h[0], h[1] = r * np.cos(a), r * np.sin(a)
            pts.append(h)
    return np.asarray(pts)


def _shifted_kl_moments(eta0: Density, eta: Density, delta: float,
                        scheme: QuadratureScheme) -> tuple[float, float]:
    """K and V between eta0 and the delta-shifted eta (per-observation
    divergence in the regression model)."""
    hw = eta0.effective_halfwidth(scheme)
    cuts = {-hw, hw}
    if np.isfinite(eta.support_halfwidth):
        for edge in (-eta.support_halfwidth + delta,
                     eta.support_halfwidth + delta):
            if -hw < edge < hw:
                cuts.add(edge)
    breakpoints = sorted(cuts)

    def moments(x):
        lp = eta0.logpdf(x)
        lq = eta.logpdf(x - delta)
        mass = np.exp(lp)
        if np.any((lq == -np.inf) & (mass > 1e-300)):
            raise DivergenceInfiniteError(
                "shifted density vanishes on the truth's support"
            )
        ratio = np.where(mass > 0, lp - lq, 0.0)
        return np.vstack([mass * ratio, mass * ratio * ratio, mass])

    first, second, norm = _adaptive_pair(moments, scheme, breakpoints)
    k = first / norm
    v = max(second / norm - k * k, 0.0)
    return float(k), float(v)


@dataclass(frozen=True)
class KlBallReport:
    sum_k: float
    sum_v: float
    in_ball: bool


def kl_ball_membership(
    theta,
    eta: Density,
    theta0,
    eta0: Density,
    covariates: np.ndarray,
    epsilon: float,
    c2: float = 1.0,
    scheme: QuadratureScheme | None = None,
) -> KlBallReport:
    """Summed per-observation KL mean and variation between the true model
    (theta0, eta0) and (theta, eta), with membership in the ball
    {sum K <= n eps^2, sum V <= c2 n eps^2}.

    An infinite divergence yields sums of +inf and in_ball=False.
    """
    scheme = scheme or QuadratureScheme()
    z = np.asarray(covariates, float)
    deltas = z @ (np.asarray(theta, float) - np.asarray(theta0, float))
    n = z.shape[0]
    # Divergences depend on theta only through the per-observation shift;
    # cache by rounded shift (Bernoulli-type designs repeat few values).
    cache: dict[float, tuple[float, float]] = {}
    sum_k = sum_v = 0.0
    try:
        for d in deltas:
            key = round(float(d), 14)
            if key not in cache:
                cache[key] = _shifted_kl_moments(eta0, eta, key, scheme)
            k, v = cache[key]
            sum_k += k
            sum_v += v
    except DivergenceInfiniteError:
        return KlBallReport(np.inf, np.inf, False)
    bound = n * epsilon * epsilon
    return KlBallReport(sum_k, sum_v,
                        bool(sum_k <= bound and sum_v <= c2 * bound))


def mean_hellinger_regression(
    theta1, eta1: Density, theta2, eta2: Density,
    covariates: np.ndarray, scheme: QuadratureScheme | None = None,
) -> float:
    """h_n^2 = n^{-1} sum_i h^2(eta1(. - theta1'Z_i), eta2(. - theta2'Z_i));
    the squared mean Hellinger distance between the two model points."""
    scheme = scheme or QuadratureScheme()
    z = np.asarray(covariates, float)
    deltas = z @ (np.asarray(theta2, float) - np.asarray(theta1, float))
    radius = max(eta1.effective_halfwidth(scheme),
                 eta2.effective_halfwidth(scheme)) + float(np.max(np.abs(deltas)))
    cache: dict[float, float] = {}

    def h2_of(delta: float) -> float:
        cuts = {-radius, radius}
        for d, offset in ((eta1, 0.0), (eta2, delta)):
            if np.isfinite(d.support_halfwidth):
                for edge in (-d.support_halfwidth + offset,
                             d.support_halfwidth + offset):
                    if -radius < edge < radius:
                        cuts.add(edge)

        def integrand(x):
            diff = (np.exp(0.5 * eta1.logpdf(x))
                    - np.exp(0.5 * eta2.logpdf(x - delta)))
            return (diff * diff)[None, :]

        return float(_adaptive_pair(integrand, scheme, sorted(cuts))[0])

    total = 0.0
    for d in deltas:
        key = round(float(d), 14)
        if key not in cache:
            cache[key] = h2_of(key)
        total += cache[key]
    return total / z.shape[0]


@dataclass
class BvmReport:
    """Posterior-vs-normal comparison for one fitted chain."""

    n: int
    delta_n: np.ndarray
    V_n: np.ndarray
    ks_coordinates: np.ndarray
    ess: np.ndarray
    ks_projections: np.ndarray | None = None
    lan_max_abs: float | None = None
    sum_k: float | None = None
    sum_v: float | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "n": self.n,
            "delta_n": np.asarray(self.delta_n).tolist(),
            "V_n": np.asarray(self.V_n).tolist(),
            "ks_coordinates": np.asarray(self.ks_coordinates).tolist(),
            "ess": np.asarray(self.ess).tolist(),
            "ks_projections": None if self.ks_projections is None
            else np.asarray(self.ks_projections).tolist(),
            "lan_max_abs": self.lan_max_abs,
            "sum_k": self.sum_k,
            "sum_v": self.sum_v,
            "extra": self.extra,
        }
        return json.dumps(payload)


def bvm_distance(
    chain: PosteriorChain,
    theta0,
    delta: np.ndarray,
    info: FisherInfo,
    n: int,
    projections: Sequence[np.ndarray] | None = None,
    min_ess: float = 100.0,
) -> BvmReport:
    """Per-coordinate KS statistics of sqrt(n)(theta - theta0) draws
    against N(Delta_n, V_n^{-1}) marginals.

    Raises UnreliableChainError when any coordinate ESS is below min_ess.
    """
    theta0 = np.asarray(theta0, float)
    ess = chain_ess(chain.theta)
    if np.any(ess < min_ess):
        raise UnreliableChainError(
            f"chain ESS {ess} below required minimum {min_ess}"
        )
    standardized = np.sqrt(n) * (chain.theta - theta0)
    cov = info.inverse()
    p = standardized.shape[1]
    ks = np.empty(p)
    for j in range(p):
        sd = np.sqrt(cov[j, j])
        ks[j] = stats.kstest(standardized[:, j], "norm",
                             args=(delta[j], sd)).statistic
    ks_proj = None
    if projections is not None:
        ks_proj = np.empty(len(projections))
        for i, a in enumerate(projections):
            a = np.asarray(a, float)
            sd = np.sqrt(a @ cov @ a)
            ks_proj[i] = stats.kstest(standardized @ a, "norm",
                                      args=(float(a @ delta), sd)).statistic
    return BvmReport(
        n=n, delta_n=np.asarray(delta, float), V_n=info.V_n,
        ks_coordinates=ks, ess=ess, ks_projections=ks_proj,
    )
