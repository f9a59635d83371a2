"""Fully conjugate Gibbs sampler for the Gaussian random-intercept model.

Model: X_ij = theta' Z_ij + b_i + eps_ij with eps ~ N(0, sigma_eps^2) and
b_i ~ N(0, sigma_b^2); normal prior on theta, inverse-gamma priors on both
variances.  Every conditional is sampled exactly.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import NumericalFailureError
from ..mixed import MixedDataset
from .chain import PosteriorChain, SamplerConfig, chain_ess, sample_inverse_gamma


def _init_theta(x: np.ndarray, z: np.ndarray) -> np.ndarray:
    theta, *_ = np.linalg.lstsq(z, x, rcond=None)
    return theta


def fit_b1_mixed(data: MixedDataset, cfg: SamplerConfig) -> PosteriorChain:
    rng = np.random.default_rng(cfg.seed)
    n, m, p = data.n, data.m, data.p
    x_flat, z_flat = data.stacked_regression()
    Z = data.fixed_covariates  # (n, p, m)
    X = data.responses         # (n, m)
    s_zz = z_flat.T @ z_flat

    theta = _init_theta(x_flat, z_flat)
    resid0 = x_flat - z_flat @ theta
    sigma_eps2 = cfg.fixed_sigma_eps2 or max(float(resid0.var()), 1e-8)
    sigma_b2 = cfg.fixed_sigma_b2 or 1.0
    b = np.zeros(n)

    prior_prec = 1.0 / cfg.theta_prior_var
    prior_mean = cfg.theta_prior_mean

    kept = cfg.kept
    theta_draws = np.empty((kept, p))
    sig_eps_draws = np.empty(kept)
    sig_b_draws = np.empty(kept)
    keep_idx = 0

    for it in range(cfg.iterations):
        # b_i | rest
        group_resid = (X - np.einsum("p,ipm->im", theta, Z)).sum(axis=1)
        prec_b = m / sigma_eps2 + 1.0 / sigma_b2
        mean_b = group_resid / sigma_eps2 / prec_b
        b = mean_b + rng.standard_normal(n) / np.sqrt(prec_b)

        # theta | rest
        y = x_flat - np.repeat(b, m)
        prec = s_zz / sigma_eps2 + prior_prec * np.eye(p)
        rhs = z_flat.T @ y / sigma_eps2 + prior_prec * prior_mean
        chol = np.linalg.cholesky(prec)
        mean_t = np.linalg.solve(prec, rhs)
        theta = mean_t + np.linalg.solve(chol.T, rng.standard_normal(p))

        # sigma_eps^2 | rest
        eps = X - np.einsum("p,ipm->im", theta, Z) - b[:, None]
        if cfg.fixed_sigma_eps2 is None:
            sigma_eps2 = sample_inverse_gamma(
                rng, cfg.ig_shape_eps + 0.5 * n * m,
                cfg.ig_rate_eps + 0.5 * float((eps * eps).sum()),
            )
        # sigma_b^2 | rest
        if cfg.fixed_sigma_b2 is None:
            sigma_b2 = sample_inverse_gamma(
                rng, cfg.ig_shape_b + 0.5 * n,
                cfg.ig_rate_b + 0.5 * float(b @ b),
            )

        if not (np.all(np.isfinite(theta)) and np.isfinite(sigma_eps2)
                and np.isfinite(sigma_b2)):
            raise NumericalFailureError(f"non-finite state at iteration {it}")

        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            theta_draws[keep_idx] = theta
            sig_eps_draws[keep_idx] = sigma_eps2
            sig_b_draws[keep_idx] = sigma_b2
            keep_idx += 1

    theta_draws = theta_draws[:keep_idx]
    return PosteriorChain(
        theta=theta_draws,
        hyper={
            "sigma_eps2": sig_eps_draws[:keep_idx],
            "sigma_b2": sig_b_draws[:keep_idx],
        },
        acceptance={},
        ess=chain_ess(theta_draws),
        seed=cfg.seed,
        config=cfg.echo(),
    )


def b1_gibbs_refresh(
    state: dict,
    data: MixedDataset,
    cfg: SamplerConfig,
    rng: np.random.Generator,
) -> dict:
    """One Gibbs sweep of the B1 conditionals on an explicit state dict
    (keys theta, b, sigma_eps2, sigma_b2); used by the joint-distribution
    sampler validation."""
    n, m, p = data.n, data.m, data.p
    Z, X = data.fixed_covariates, data.responses
    x_flat, z_flat = data.stacked_regression()
    s_zz = z_flat.T @ z_flat
    theta = state["theta"]
    sigma_eps2 = state["sigma_eps2"]
    sigma_b2 = state["sigma_b2"]

    group_resid = (X - np.einsum("p,ipm->im", theta, Z)).sum(axis=1)
    prec_b = m / sigma_eps2 + 1.0 / sigma_b2
    b = group_resid / sigma_eps2 / prec_b + rng.standard_normal(n) / np.sqrt(prec_b)

    y = x_flat - np.repeat(b, m)
    prec = s_zz / sigma_eps2 + np.eye(p) / cfg.theta_prior_var
    rhs = z_flat.T @ y / sigma_eps2 + cfg.theta_prior_mean / cfg.theta_prior_var
    chol = np.linalg.cholesky(prec)
    theta = np.linalg.solve(prec, rhs) + np.linalg.solve(
        chol.T, rng.standard_normal(p)
    )

    eps = X - np.einsum("p,ipm->im", theta, Z) - b[:, None]
    sigma_eps2 = sample_inverse_gamma(
        rng, cfg.ig_shape_eps + 0.5 * n * m,
        cfg.ig_rate_eps + 0.5 * float((eps * eps).sum()),
    )
    sigma_b2 = sample_inverse_gamma(
        rng, cfg.ig_shape_b + 0.5 * n, cfg.ig_rate_b + 0.5 * float(b @ b)
    )
    return {"theta": theta, "b": b, "sigma_eps2": sigma_eps2,
            "sigma_b2": sigma_b2}
