"""Metropolis-within-Gibbs sampler for the random-series error prior.

Responses are rescaled so that initial residuals sit inside (-1/2, 1/2),
the support of the exponential-series density; the scale is recorded and
theta draws are mapped back to the original units.  The theta block uses a
p-dimensional random walk and each bounded coefficient c_j a univariate
random walk; the density normalizer is recomputed by quadrature for every
proposal (incrementally, since single-coefficient moves shift the exponent
by one basis column).
"""

from __future__ import annotations

import numpy as np

from ..exceptions import OutOfSupportError
from ..priors import SeriesSpec, fourier_basis
from ..regression import RegressionDataset
from .chain import PosteriorChain, SamplerConfig, ScaleAdapter, chain_ess

QUAD_NODES = 128
THETA_TARGET_ACCEPT = 0.25
COEF_TARGET_ACCEPT = 0.44
SUPPORT_MARGIN = 0.45


class _SeriesState:
    """Mutable sampler state with cached basis evaluations."""

    def __init__(self, x: np.ndarray, z: np.ndarray, spec: SeriesSpec,
                 theta: np.ndarray):
        self.x, self.z, self.spec = x, z, spec
        self.J = spec.truncation
        j = np.arange(1, self.J + 1, dtype=float)
        self.decay = j ** (-spec.decay_alpha)
        self.coeffs = np.zeros(self.J)
        qx, qw = np.polynomial.legendre.leggauss(QUAD_NODES)
        self.quad_x, self.quad_w = 0.5 * qx, 0.5 * qw
        self.B_quad = fourier_basis(self.quad_x, self.J)
        self.wq = self.B_quad @ self.amplitudes
        self.set_theta(theta)

    @property
    def amplitudes(self) -> np.ndarray:
        return self.decay * self.coeffs

    def set_theta(self, theta: np.ndarray) -> bool:
        """Refresh residual caches; False if infeasible (residual outside
        the support)."""
        r = self.x - self.z @ theta
        if np.any(np.abs(r) >= 0.5):
            return False
        self.theta = theta
        self.B_plus = fourier_basis(r, self.J)
        self.B_minus = fourier_basis(-r, self.J)
        a = self.amplitudes
        self.w_plus = self.B_plus @ a
        self.w_minus = self.B_minus @ a
        return True

    def log_normalizer(self) -> float:
        m = self.wq.max()
        return float(m + np.log(self.quad_w @ np.exp(self.wq - m)))

    def loglik(self) -> float:
        n = self.x.size
        lp = np.logaddexp(self.w_plus, self.w_minus) - np.log(2.0)
        return float(lp.sum() - n * self.log_normalizer())

    def shift_coefficient(self, j: int, delta_c: float) -> None:
        da = self.decay[j] * delta_c
        self.coeffs[j] += delta_c
        self.w_plus += da * self.B_plus[:, j]
        self.w_minus += da * self.B_minus[:, j]
        self.wq += da * self.B_quad[:, j]


def fit_series_regression(data: RegressionDataset,
                          cfg: SamplerConfig) -> PosteriorChain:
    spec = cfg.series or SeriesSpec()
    rng = np.random.default_rng(cfg.seed)
    p = data.p

    theta_ols, *_ = np.linalg.lstsq(data.covariates, data.responses, rcond=None)
    resid = data.responses - data.covariates @ theta_ols
    scale = max(1.0, float(np.max(np.abs(resid))) / SUPPORT_MARGIN)
    x = data.responses / scale
    state = _SeriesState(x, data.covariates, spec, theta_ols / scale)
    if not state.set_theta(theta_ols / scale):
        raise OutOfSupportError("initial residuals leave (-1/2, 1/2)")

    prior_prec = 1.0 / cfg.theta_prior_var

    def log_prior_theta(th):
        d = th - cfg.theta_prior_mean
        return -0.5 * prior_prec * float(d @ d)

    theta_adapter = ScaleAdapter(np.array([cfg.theta_proposal_scale]),
                                 THETA_TARGET_ACCEPT)
    coef_adapter = ScaleAdapter(np.full(spec.truncation,
                                        cfg.coef_proposal_scale),
                                COEF_TARGET_ACCEPT)

    kept = cfg.kept
    theta_draws = np.empty((kept, p))
    coef_draws = np.empty((kept, spec.truncation))
    keep_idx = 0
    theta_acc = coef_acc = 0.0
    theta_tries = coef_tries = 0

    current_ll = state.loglik()
    current_lp = log_prior_theta(state.theta)

    for it in range(cfg.iterations):
        adapting = cfg.adapt and it < cfg.burn_in

        # theta block
        step = theta_adapter.scales[0]
        proposal = state.theta + step * rng.standard_normal(p)
        saved = (state.theta, state.B_plus, state.B_minus,
                 state.w_plus, state.w_minus)
        accepted = False
        if state.set_theta(proposal):
            new_ll = state.loglik()
            new_lp = log_prior_theta(proposal)
            if np.log(rng.uniform()) < new_ll + new_lp - current_ll - current_lp:
                current_ll, current_lp = new_ll, new_lp
                accepted = True
        if not accepted:
            (state.theta, state.B_plus, state.B_minus,
             state.w_plus, state.w_minus) = saved
        theta_acc += accepted
        theta_tries += 1
        if adapting:
            theta_adapter.update(np.array([float(accepted)]))

        # coefficient blocks
        if cfg.update_coefficients:
            acc_vec = np.zeros(spec.truncation)
            for j in range(spec.truncation):
                delta = coef_adapter.scales[j] * rng.standard_normal()
                if abs(state.coeffs[j] + delta) > spec.coefficient_bound:
                    continue  # uniform prior: out-of-bound proposals rejected
                state.shift_coefficient(j, delta)
                new_ll = state.loglik()
                if np.log(rng.uniform()) < new_ll - current_ll:
                    current_ll = new_ll
                    acc_vec[j] = 1.0
                else:
                    state.shift_coefficient(j, -delta)
            coef_acc += acc_vec.mean()
            coef_tries += 1
            if adapting:
                coef_adapter.update(acc_vec)

        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            theta_draws[keep_idx] = scale * state.theta
            coef_draws[keep_idx] = state.coeffs
            keep_idx += 1

    theta_draws = theta_draws[:keep_idx]
    return PosteriorChain(
        theta=theta_draws,
        hyper={},
        acceptance={
            "theta": theta_acc / max(theta_tries, 1),
            "coefficients": coef_acc / max(coef_tries, 1),
        },
        ess=chain_ess(theta_draws),
        seed=cfg.seed,
        config=cfg.echo(),
        extras={"scale": scale, "coefficients": coef_draws[:keep_idx]},
    )
