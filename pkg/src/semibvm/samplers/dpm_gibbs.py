"""Blocked Gibbs sampler for models with a symmetrized-DPM error density.

The error density is the symmetrized mixture
f(e) = sum_k w_k (phi_{s_k}(e - z_k) + phi_{s_k}(e + z_k)) / 2 with
stick-breaking weights truncated at level T.  Each observation is
augmented with a component label and a sign; conditional on (label, sign)
the observation is Gaussian with mean theta' Z + b + sign * z_k and
standard deviation s_k, so theta and the random intercepts have exact
normal conditionals under heteroscedastic Gaussian regression.  Stick
weights are Beta-updated; atoms move by random-walk Metropolis inside
[-M, M] x [scale_lo, scale_hi] (empty components are redrawn from the
base measure, which is their exact conditional).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..densities import LOG_SQRT_2PI
from ..exceptions import NumericalFailureError

#: Metropolis passes over the atoms per Gibbs sweep (cheap: the atom
#: conditionals depend on the data only through per-component counts and
#: first two moments, computed once per sweep).
ATOM_SUBSTEPS = 4
from ..mixed import MixedDataset
from ..priors import DpmSpec
from ..regression import RegressionDataset
from .chain import (
    PosteriorChain,
    SamplerConfig,
    ScaleAdapter,
    chain_ess,
    sample_inverse_gamma,
)


@dataclass
class _Workspace:
    """Static quantities shared by every sweep."""

    x: np.ndarray            # (G,) responses
    z: np.ndarray            # (G, p) covariate rows
    gidx: np.ndarray | None  # (G,) group index, None for plain regression
    n_groups: int
    spec: DpmSpec
    cfg: SamplerConfig

    @property
    def size(self) -> int:
        return self.x.size

    @property
    def p(self) -> int:
        return self.z.shape[1]


def _initial_state(ws: _Workspace, rng: np.random.Generator) -> dict:
    """OLS theta; atoms from k-means on absolute residuals (non-essential,
    shortens burn-in); remaining atoms from the base measure."""
    spec, cfg = ws.spec, ws.cfg
    T = spec.truncation_level
    theta, *_ = np.linalg.lstsq(ws.z, ws.x, rcond=None)
    e = ws.x - ws.z @ theta
    signs = np.where(e >= 0, 1.0, -1.0)
    k_init = min(T, 5)

    z_atoms, s_atoms = spec.sample_base(rng, T)
    labels = rng.integers(0, T, size=ws.size)
    if k_init > 1 and np.unique(np.abs(e)).size >= k_init:
        try:
            from scipy.cluster.vq import kmeans2

            centers, assign = kmeans2(
                np.abs(e)[:, None], k_init, minit="points", seed=rng
            )
            z_atoms[:k_init] = np.clip(
                centers.ravel(), 0.0, spec.location_bound
            )
            for c in range(k_init):
                members = np.abs(e)[assign == c]
                sd = members.std() if members.size > 1 else 1.0
                s_atoms[c] = np.clip(sd if sd > 0 else 1.0,
                                     spec.scale_lo, spec.scale_hi)
            labels = assign.astype(np.int64)
        except Exception:
            pass  # fall back to base-measure atoms and random labels

    weights = np.full(T, 1.0 / T)
    state = {
        "theta": theta,
        "weights": weights,
        "z_atoms": z_atoms,
        "s_atoms": s_atoms,
        "labels": labels,
        "signs": signs,
        "sigma_b2": cfg.fixed_sigma_b2 or 1.0,
    }
    if ws.gidx is not None:
        state["b"] = np.zeros(ws.n_groups)
    return state


def _marginal_loglik(e: np.ndarray, w, z_at, s_at) -> float:
    """Mixture log-likelihood of residuals with labels and signs summed out."""
    return float(dpm_mixture_logpdf(e, w, z_at, s_at).sum())


def _sweep(
    state: dict,
    ws: _Workspace,
    rng: np.random.Generator,
    adapters: tuple[ScaleAdapter, ScaleAdapter] | None,
) -> float:
    """One full Gibbs sweep, in place; returns the atom acceptance rate."""
    cfg, spec = ws.cfg, ws.spec
    T = spec.truncation_level
    G = ws.size
    theta = state["theta"]
    w, z_at, s_at = state["weights"], state["z_atoms"], state["s_atoms"]
    b = state.get("b")

    # --- marginal refresh of theta -----------------------------------------
    # Metropolis steps against the label/sign-marginalized likelihood; the
    # labels are redrawn conditionally on theta immediately below, so the
    # combination forms one valid block update of (theta, labels, signs).
    offset = b[ws.gidx] if b is not None else 0.0
    wt_cur = 1.0 / (s_at[state["labels"]] ** 2)
    prec = (ws.z * wt_cur[:, None]).T @ ws.z + np.eye(ws.p) / cfg.theta_prior_var
    chol_p = np.linalg.cholesky(prec)
    pp = 1.0 / cfg.theta_prior_var
    e = ws.x - ws.z @ theta - offset
    cur_ll = _marginal_loglik(e, w, z_at, s_at)
    for _ in range(2):
        proposal = theta + np.linalg.solve(chol_p.T,
                                           rng.standard_normal(ws.p))
        e_prop = ws.x - ws.z @ proposal - offset
        prop_ll = _marginal_loglik(e_prop, w, z_at, s_at)
        log_ratio = (
            prop_ll - cur_ll
            - 0.5 * pp * float((proposal - cfg.theta_prior_mean) @
                               (proposal - cfg.theta_prior_mean))
            + 0.5 * pp * float((theta - cfg.theta_prior_mean) @
                               (theta - cfg.theta_prior_mean))
        )
        if np.log(rng.uniform()) < log_ratio:
            theta, e, cur_ll = proposal, e_prop, prop_ll
    state["theta"] = theta

    # --- labels and signs jointly (categorical over 2T cells) -------------
    with np.errstate(divide="ignore"):
        log_w = np.where(w > 0, np.log(np.maximum(w, 1e-300)), -np.inf)
    # cells [0, T) carry sign +1, [T, 2T) sign -1
    mu = np.concatenate([z_at, -z_at])
    sd = np.concatenate([s_at, s_at])
    lw = np.concatenate([log_w, log_w])
    u = (e[:, None] - mu[None, :]) / sd[None, :]
    cell_logp = lw[None, :] - 0.5 * u * u - np.log(sd)[None, :]
    flat = np.argmax(cell_logp + rng.gumbel(size=(G, 2 * T)), axis=1)
    labels = flat % T
    signs = np.where(flat < T, 1.0, -1.0)
    state["labels"], state["signs"] = labels, signs

    # --- stick weights ----------------------------------------------------
    counts = np.bincount(labels, minlength=T).astype(float)
    if T > 1:
        tails = G - np.cumsum(counts)
        v = rng.beta(1.0 + counts[:-1], spec.precision_alpha + tails[:-1])
        v = np.clip(v, 1e-12, 1.0 - 1e-12)
        w_new = np.empty(T)
        w_new[:-1] = v * np.cumprod(np.concatenate([[1.0], 1.0 - v[:-1]]))
        w_new[-1] = np.prod(1.0 - v)
        state["weights"] = w_new
    else:
        state["weights"] = np.ones(1)

    # --- atoms: exact base draw when empty, random-walk Metropolis else ---
    u_obs = signs * e  # u | label ~ N(z_k, s_k^2)
    su = np.bincount(labels, weights=u_obs, minlength=T)
    su2 = np.bincount(labels, weights=u_obs * u_obs, minlength=T)

    def atom_loglik(zc, sc):
        ll = -counts * (np.log(sc) + LOG_SQRT_2PI)
        ll -= (su2 - 2.0 * zc * su + counts * zc * zc) / (2.0 * sc * sc)
        return ll + spec.base_logpdf(zc, sc)

    accept_rate = 0.0
    if cfg.update_atoms:
        empty = counts == 0
        if empty.any():
            z_new, s_new = spec.sample_base(rng, int(empty.sum()))
            z_at[empty], s_at[empty] = z_new, s_new
        occupied = ~empty
        if occupied.any():
            if adapters is not None:
                sc_z, sc_s = adapters[0].scales, adapters[1].scales
            else:
                sc_z = np.full(T, cfg.atom_proposal_scale[0])
                sc_s = np.full(T, cfg.atom_proposal_scale[1])
            # Several Metropolis sub-steps per sweep: the conditional's
            # sufficient statistics are already in hand, so each extra
            # pass costs O(T) and speeds the atom-configuration mixing
            # that otherwise throttles theta.
            acc_count = np.zeros(T)
            for _ in range(ATOM_SUBSTEPS):
                z_prop = z_at + sc_z * rng.standard_normal(T)
                s_prop = s_at + sc_s * rng.standard_normal(T)
                inside = (
                    (np.abs(z_prop) <= spec.location_bound)
                    & (s_prop >= spec.scale_lo)
                    & (s_prop <= spec.scale_hi)
                )
                log_ratio = np.where(
                    inside, atom_loglik(np.where(inside, z_prop, z_at),
                                        np.where(inside, s_prop, s_at))
                    - atom_loglik(z_at, s_at), -np.inf,
                )
                accept = (np.log(rng.uniform(size=T)) < log_ratio) & occupied
                z_at[accept] = z_prop[accept]
                s_at[accept] = s_prop[accept]
                acc_count += accept
            acc_frac = acc_count / ATOM_SUBSTEPS
            accept_rate = float(acc_frac[occupied].mean())
            if adapters is not None:
                occ = occupied.astype(float)
                ind = acc_frac
                # Only adapt scales of occupied components.
                adapters[0].log_scales += (adapters[0].step + 1) ** -0.6 * occ * (
                    ind - adapters[0].target
                )
                adapters[1].log_scales += (adapters[1].step + 1) ** -0.6 * occ * (
                    ind - adapters[1].target
                )
                adapters[0].step += 1
                adapters[1].step += 1
                np.clip(adapters[0].log_scales, -8, 4, out=adapters[0].log_scales)
                np.clip(adapters[1].log_scales, -8, 4, out=adapters[1].log_scales)

    # --- theta (heteroscedastic Gaussian conjugate update) ----------------
    wt = 1.0 / (s_at[labels] ** 2)
    y_star = ws.x - signs * z_at[labels]
    if b is not None:
        y_star = y_star - b[ws.gidx]
    prec = (ws.z * wt[:, None]).T @ ws.z + np.eye(ws.p) / cfg.theta_prior_var
    rhs = ws.z.T @ (wt * y_star) + cfg.theta_prior_mean / cfg.theta_prior_var
    chol = np.linalg.cholesky(prec)
    theta = np.linalg.solve(prec, rhs) + np.linalg.solve(
        chol.T, rng.standard_normal(ws.p)
    )
    state["theta"] = theta

    # --- random intercepts and their variance -----------------------------
    if b is not None:
        d = ws.x - ws.z @ theta - signs * z_at[labels]
        prec_b = np.bincount(ws.gidx, weights=wt, minlength=ws.n_groups)
        prec_b = prec_b + 1.0 / state["sigma_b2"]
        mean_b = np.bincount(ws.gidx, weights=wt * d, minlength=ws.n_groups)
        mean_b = mean_b / prec_b
        b = mean_b + rng.standard_normal(ws.n_groups) / np.sqrt(prec_b)
        state["b"] = b
        if cfg.fixed_sigma_b2 is None:
            state["sigma_b2"] = sample_inverse_gamma(
                rng, cfg.ig_shape_b + 0.5 * ws.n_groups,
                cfg.ig_rate_b + 0.5 * float(b @ b),
            )
    return accept_rate


def generate_b2_data(state: dict, ws: _Workspace,
                     rng: np.random.Generator) -> np.ndarray:
    """Draw responses given the full augmented state (labels, signs, atoms,
    theta, intercepts); used by the joint-distribution validation."""
    mean = ws.z @ state["theta"] + state["signs"] * state["z_atoms"][state["labels"]]
    if state.get("b") is not None and ws.gidx is not None:
        mean = mean + state["b"][ws.gidx]
    return mean + state["s_atoms"][state["labels"]] * rng.standard_normal(ws.size)


def prior_b2_state(ws: _Workspace, rng: np.random.Generator) -> dict:
    """Draw the augmented parameter vector from its prior."""
    cfg, spec = ws.cfg, ws.spec
    T = spec.truncation_level
    if T > 1:
        v = rng.beta(1.0, spec.precision_alpha, size=T - 1)
        w = np.empty(T)
        w[:-1] = v * np.cumprod(np.concatenate([[1.0], 1.0 - v[:-1]]))
        w[-1] = np.prod(1.0 - v)
    else:
        w = np.ones(1)
    z_at, s_at = spec.sample_base(rng, T)
    labels = rng.choice(T, size=ws.size, p=w)
    signs = rng.choice([-1.0, 1.0], size=ws.size)
    theta = cfg.theta_prior_mean + np.sqrt(cfg.theta_prior_var) * \
        rng.standard_normal(ws.p)
    state = {
        "theta": theta, "weights": w, "z_atoms": z_at, "s_atoms": s_at,
        "labels": labels, "signs": signs,
    }
    if cfg.fixed_sigma_b2 is not None:
        state["sigma_b2"] = cfg.fixed_sigma_b2
    else:
        state["sigma_b2"] = sample_inverse_gamma(rng, cfg.ig_shape_b,
                                                 cfg.ig_rate_b)
    if ws.gidx is not None:
        state["b"] = np.sqrt(state["sigma_b2"]) * rng.standard_normal(ws.n_groups)
    return state


def _run(ws: _Workspace) -> PosteriorChain:
    cfg, spec = ws.cfg, ws.spec
    T = spec.truncation_level
    rng = np.random.default_rng(cfg.seed)
    state = _initial_state(ws, rng)

    adapters = None
    if cfg.adapt and cfg.update_atoms and min(cfg.atom_proposal_scale) > 0:
        adapters = (
            ScaleAdapter(np.full(T, cfg.atom_proposal_scale[0]),
                         cfg.target_accept),
            ScaleAdapter(np.full(T, cfg.atom_proposal_scale[1]),
                         cfg.target_accept),
        )

    kept = cfg.kept
    theta_draws = np.empty((kept, ws.p))
    sigma_b_draws = np.empty(kept)
    occupied_draws = np.empty(kept)
    w_draws = np.empty((kept, T))
    z_draws = np.empty((kept, T))
    s_draws = np.empty((kept, T))
    acc_sum, acc_count = 0.0, 0
    keep_idx = 0

    for it in range(cfg.iterations):
        active = adapters if it < cfg.burn_in else None
        rate = _sweep(state, ws, rng, active)
        if it >= cfg.burn_in:
            acc_sum += rate
            acc_count += 1
        if not np.all(np.isfinite(state["theta"])):
            raise NumericalFailureError(f"non-finite theta at iteration {it}")
        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            theta_draws[keep_idx] = state["theta"]
            sigma_b_draws[keep_idx] = state.get("sigma_b2", np.nan)
            occupied_draws[keep_idx] = float(
                np.unique(state["labels"]).size
            )
            w_draws[keep_idx] = state["weights"]
            z_draws[keep_idx] = state["z_atoms"]
            s_draws[keep_idx] = state["s_atoms"]
            keep_idx += 1

    theta_draws = theta_draws[:keep_idx]
    hyper = {"n_occupied": occupied_draws[:keep_idx]}
    if ws.gidx is not None:
        hyper["sigma_b2"] = sigma_b_draws[:keep_idx]
    return PosteriorChain(
        theta=theta_draws,
        hyper=hyper,
        acceptance={"atoms": acc_sum / max(acc_count, 1)},
        ess=chain_ess(theta_draws),
        seed=cfg.seed,
        config=cfg.echo(),
        extras={
            "dpm_weights": w_draws[:keep_idx],
            "dpm_locations": z_draws[:keep_idx],
            "dpm_scales": s_draws[:keep_idx],
        },
    )


def _workspace_mixed(data: MixedDataset, cfg: SamplerConfig) -> _Workspace:
    x, z = data.stacked_regression()
    gidx = np.repeat(np.arange(data.n), data.m)
    return _Workspace(x=x, z=z, gidx=gidx, n_groups=data.n,
                      spec=cfg.dpm or DpmSpec(), cfg=cfg)


def _workspace_regression(data: RegressionDataset,
                          cfg: SamplerConfig) -> _Workspace:
    return _Workspace(x=data.responses, z=data.covariates, gidx=None,
                      n_groups=0, spec=cfg.dpm or DpmSpec(), cfg=cfg)


def fit_b2_mixed(data: MixedDataset, cfg: SamplerConfig) -> PosteriorChain:
    """Symmetrized-DPM error density with Gaussian random intercepts."""
    return _run(_workspace_mixed(data, cfg))


def fit_b2_regression(data: RegressionDataset,
                      cfg: SamplerConfig) -> PosteriorChain:
    """Symmetrized-DPM error density for plain linear regression."""
    return _run(_workspace_regression(data, cfg))


def dpm_mixture_logpdf(x: np.ndarray, weights, locations, scales) -> np.ndarray:
    """Log density of the symmetrized mixture for given atom arrays."""
    x = np.atleast_1d(np.asarray(x, float))
    w = np.asarray(weights, float)
    mu = np.concatenate([locations, -np.asarray(locations, float)])
    sd = np.concatenate([scales, scales])
    with np.errstate(divide="ignore"):
        lw = np.concatenate([np.log(w / 2.0), np.log(w / 2.0)])
    u = (x[:, None] - mu[None, :]) / sd[None, :]
    comp = lw[None, :] - 0.5 * u * u - np.log(sd)[None, :] - LOG_SQRT_2PI
    m = comp.max(axis=1)
    return m + np.log(np.exp(comp - m[:, None]).sum(axis=1))


def dpm_posterior_predictive_pdf(chain: PosteriorChain, grid: np.ndarray,
                                 stride: int = 10) -> np.ndarray:
    """Average error-density over kept draws, evaluated on a grid."""
    w = chain.extras["dpm_weights"][::stride]
    z = chain.extras["dpm_locations"][::stride]
    s = chain.extras["dpm_scales"][::stride]
    acc = np.zeros(np.size(grid))
    for wk, zk, sk in zip(w, z, s):
        acc += np.exp(dpm_mixture_logpdf(grid, wk, zk, sk))
    return acc / len(w)
