"""Frequentist comparison estimators.

* ordinary least squares for the linear regression model;
* Gaussian maximum likelihood for the random-intercept mixed model, which
  coincides with the best linear unbiased estimator of the fixed effects.
  The marginal covariance per group is sigma_eps^2 I + sigma_b^2 11', so
  the likelihood is profiled in the variance ratio lambda = sigma_b^2 /
  sigma_eps^2 (golden-section on log lambda plus a Newton polish), with
  the GLS solution for theta at each ratio.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import OptimizerFailureError, SingularDesignError
from .mixed import MixedDataset
from .regression import RegressionDataset

LOGLIK_TOL = 1e-10
GOLDEN_MAX_ITER = 200
LOG_LAMBDA_RANGE = (-18.0, 9.0)


@dataclass(frozen=True)
class FrequentistFit:
    theta: np.ndarray
    sigma_eps2: float
    sigma_b2: float
    converged: bool
    iterations: int
    loglik: float
    reml: bool = False

    def to_json(self) -> str:
        d = asdict(self)
        d["theta"] = np.asarray(self.theta).tolist()
        return json.dumps(d)

    @classmethod
    def from_json(cls, text: str) -> "FrequentistFit":
        d = json.loads(text)
        d["theta"] = np.asarray(d["theta"], float)
        return cls(**d)


def ols(data: RegressionDataset) -> np.ndarray:
    """Least-squares coefficients via the normal equations."""
    z, x = data.covariates, data.responses
    theta, _, rank, _ = np.linalg.lstsq(z, x, rcond=None)
    if rank < data.p:
        raise SingularDesignError(f"design rank {rank} < p={data.p}")
    return theta


def _profile_pieces(data: MixedDataset):
    z = data.fixed_covariates           # (n, p, m)
    x = data.responses                  # (n, m)
    zbar = z.sum(axis=2)                # (n, p): Z_i 1
    xbar = x.sum(axis=1)                # (n,)
    s_zz = np.einsum("ipm,iqm->pq", z, z)
    s_bb = zbar.T @ zbar
    t_zx = np.einsum("ipm,im->p", z, x)
    t_bx = zbar.T @ xbar
    return z, x, zbar, xbar, s_zz, s_bb, t_zx, t_bx


def _gls_theta(data: MixedDataset, lam: float) -> np.ndarray:
    """GLS solution at variance ratio lambda (V = I + lambda 11')."""
    z, x, zbar, xbar, s_zz, s_bb, t_zx, t_bx = _profile_pieces(data)
    c = lam / (1.0 + data.m * lam)
    return np.linalg.solve(s_zz - c * s_bb, t_zx - c * t_bx)


def _profile_loglik(data: MixedDataset, lam: float) -> tuple[float, np.ndarray, float]:
    """Profile log-likelihood, GLS theta, and sigma_eps^2 at ratio lambda."""
    n, m = data.n, data.m
    theta = _gls_theta(data, lam)
    r = data.residuals(theta)
    c = lam / (1.0 + m * lam)
    rss = float((r * r).sum() - c * (r.sum(axis=1) ** 2).sum())
    sigma_eps2 = rss / (n * m)
    ll = -0.5 * (n * m * (np.log(2.0 * np.pi * sigma_eps2) + 1.0)
                 + n * np.log1p(m * lam))
    return ll, theta, sigma_eps2


def gaussian_ml_mixed(data: MixedDataset, reml: bool = False,
                      max_iter: int = GOLDEN_MAX_ITER) -> FrequentistFit:
    """Gaussian ML fit of the random-intercept model.

    reml=True applies the restricted-likelihood correction (excluded from
    the reference comparisons, offered for completeness).
    """
    n, m = data.n, data.m

    def objective(u: float) -> float:
        lam = np.exp(u)
        ll, theta, sig2 = _profile_loglik(data, lam)
        if reml:
            c = lam / (1.0 + m * lam)
            z = data.fixed_covariates
            zbar = z.sum(axis=2)
            a = np.einsum("ipm,iqm->pq", z, z) - c * (zbar.T @ zbar)
            sign, logdet = np.linalg.slogdet(a / sig2)
            if sign <= 0:
                return -np.inf
            ll -= 0.5 * logdet
        return ll

    lo, hi = LOG_LAMBDA_RANGE
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c1, c2 = b - phi * (b - a), a + phi * (b - a)
    f1, f2 = objective(c1), objective(c2)
    iters = 0
    while iters < max_iter:
        iters += 1
        if f1 < f2:
            a, c1, f1 = c1, c2, f2
            c2 = a + phi * (b - a)
            f2 = objective(c2)
        else:
            b, c2, f2 = c2, c1, f1
            c1 = b - phi * (b - a)
            f1 = objective(c1)
        if b - a < 1e-10:
            break
    u = 0.5 * (a + b)

    # Newton polish in u, safeguarded to the bracket.
    for _ in range(10):
        h = 1e-5
        f0, fp, fm = objective(u), objective(u + h), objective(u - h)
        g = (fp - fm) / (2 * h)
        hally = (fp - 2 * f0 + fm) / (h * h)
        if hally >= -1e-12:
            break
        step = -g / hally
        u_new = np.clip(u + step, lo, hi)
        if objective(u_new) < f0 - LOGLIK_TOL:
            break
        if abs(objective(u_new) - f0) < LOGLIK_TOL:
            u = u_new
            break
        u = u_new

    lam = float(np.exp(u))
    ll, theta, sigma_eps2 = _profile_loglik(data, lam)
    # Treat the lower bracket edge as sigma_b2 = 0.
    sigma_b2 = 0.0 if u <= lo + 1e-8 else lam * sigma_eps2
    converged = iters < max_iter
    if not converged:
        raise OptimizerFailureError(
            f"profile search did not converge in {max_iter} iterations "
            f"(bracket [{a:.3g}, {b:.3g}])"
        )
    if reml:
        sigma_eps2 *= (n * m) / (n * m - data.p)
        sigma_b2 = lam * sigma_eps2 if sigma_b2 > 0 else 0.0
    return FrequentistFit(
        theta=theta,
        sigma_eps2=float(sigma_eps2),
        sigma_b2=float(sigma_b2),
        converged=converged,
        iterations=iters,
        loglik=float(objective(u)),
        reml=reml,
    )


def gls_fixed_effects(data: MixedDataset, sigma_eps2: float,
                      sigma_b2: float) -> np.ndarray:
    """Closed-form GLS theta at injected variance components."""
    if sigma_eps2 <= 0:
        raise ValueError("sigma_eps2 must be positive")
    return _gls_theta(data, sigma_b2 / sigma_eps2)
