"""Sampler configuration, stored chains, and chain diagnostics."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from ..exceptions import ConfigError
from ..priors import DpmSpec, SeriesSpec


@dataclass(frozen=True)
class SamplerConfig:
    """Shared MCMC settings.

    The inverse-gamma shape/rate pairs apply to sigma_eps^2 (B1 only) and
    sigma_b^2; fixed_sigma_* pins a variance instead of sampling it.
    Proposal scales are adapted by Robbins-Monro during burn-in only and
    frozen afterwards, preserving detailed balance for the kept draws.
    """

    iterations: int = 5000
    burn_in: int = 2000
    thin: int = 1
    seed: int = 0
    theta_prior_mean: float = 0.0
    theta_prior_var: float = 1e4
    ig_shape_eps: float = 0.01
    ig_rate_eps: float = 0.01
    ig_shape_b: float = 0.01
    ig_rate_b: float = 0.01
    fixed_sigma_eps2: float | None = None
    fixed_sigma_b2: float | None = None
    dpm: DpmSpec | None = None
    series: SeriesSpec | None = None
    atom_proposal_scale: tuple[float, float] = (0.6, 0.3)
    theta_proposal_scale: float = 0.1
    coef_proposal_scale: float = 0.5
    update_atoms: bool = True
    update_coefficients: bool = True
    adapt: bool = True
    target_accept: float = 0.35

    def __post_init__(self):
        if not (self.iterations > self.burn_in >= 0):
            raise ConfigError("need iterations > burn_in >= 0")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if self.theta_prior_var <= 0:
            raise ConfigError("theta_prior_var must be positive")
        if min(self.atom_proposal_scale) < 0 or self.theta_proposal_scale <= 0 \
                or self.coef_proposal_scale <= 0:
            raise ConfigError("proposal scales must be positive")

    @property
    def kept(self) -> int:
        return (self.iterations - self.burn_in) // self.thin

    def echo(self) -> dict[str, Any]:
        d = asdict(self)
        for key in ("dpm", "series"):
            if d[key] is not None:
                d[key] = {k: v for k, v in d[key].items()
                          if not callable(v) and v is not None}
        return d


@dataclass
class PosteriorChain:
    """Kept MCMC draws plus bookkeeping.

    theta has shape (draws, p); hyper maps names to (draws,) arrays or
    (draws, k) summaries; extras holds sampler-specific state such as DPM
    atom trajectories or the series data scale.
    """

    theta: np.ndarray
    hyper: dict[str, np.ndarray]
    acceptance: dict[str, float]
    ess: np.ndarray
    seed: int
    config: dict[str, Any] = field(default_factory=dict)
    extras: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("chain contains non-finite theta draws")

    @property
    def draws(self) -> int:
        return self.theta.shape[0]

    @property
    def p(self) -> int:
        return self.theta.shape[1]

    def posterior_mean(self) -> np.ndarray:
        return self.theta.mean(axis=0)

    def save(self, path_prefix: str) -> tuple[str, str]:
        """Write draws to <prefix>.csv and diagnostics to <prefix>.json."""
        csv_path, json_path = f"{path_prefix}.csv", f"{path_prefix}.json"
        names = [f"theta{j + 1}" for j in range(self.p)]
        hyper_cols = [k for k, v in self.hyper.items()
                      if np.ndim(v) == 1 and len(v) == self.draws]
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["draw"] + names + hyper_cols)
            for d in range(self.draws):
                row = [str(d)] + [f"{v:.17g}" for v in self.theta[d]]
                row += [f"{self.hyper[k][d]:.17g}" for k in hyper_cols]
                writer.writerow(row)
        sidecar = {
            "seed": self.seed,
            "acceptance": self.acceptance,
            "ess": np.asarray(self.ess).tolist(),
            "config": self.config,
        }
        with open(json_path, "w") as fh:
            json.dump(sidecar, fh, indent=2, default=str)
        return csv_path, json_path


def effective_sample_size(x: np.ndarray) -> float:
    """ESS via the autocorrelation sum with Geyer's initial positive
    sequence truncation."""
    x = np.asarray(x, float)
    n = x.size
    if n < 4:
        return float(n)
    centered = x - x.mean()
    var = centered @ centered
    if var == 0.0:
        return float(n)
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(centered, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real
    rho = acov / acov[0]
    tau = 1.0
    t = 1
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
        t += 2
    return float(n / tau)


def chain_ess(theta: np.ndarray) -> np.ndarray:
    return np.array([effective_sample_size(theta[:, j])
                     for j in range(theta.shape[1])])


class ScaleAdapter:
    """Robbins-Monro adaptation of log proposal scales toward a target
    acceptance rate; active only while enabled (burn-in)."""

    def __init__(self, initial_scales: np.ndarray, target: float):
        self.log_scales = np.log(np.atleast_1d(np.asarray(initial_scales, float)))
        self.target = target
        self.step = 0

    @property
    def scales(self) -> np.ndarray:
        return np.exp(self.log_scales)

    def update(self, accepted: np.ndarray) -> None:
        self.step += 1
        gamma = self.step ** -0.6
        self.log_scales += gamma * (np.asarray(accepted, float) - self.target)
        np.clip(self.log_scales, -8.0, 4.0, out=self.log_scales)


def sample_inverse_gamma(rng: np.random.Generator, shape: float,
                         rate: float) -> float:
    """One draw from InverseGamma(shape, rate) (density ~ x^{-a-1} e^{-b/x})."""
    return float(rate / rng.gamma(shape))
