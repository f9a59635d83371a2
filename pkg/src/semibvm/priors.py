"""Nonparametric priors on the symmetric error density.

Two constructions are provided:

* a symmetrized Dirichlet-process mixture of normals, represented by a
  truncated stick-breaking draw whose kernels are replaced by mirrored
  averages (z_k, sigma_k) -> (phi(x - z_k) + phi(x + z_k)) / 2, so that
  densities and scores stay in closed form;

* a symmetrized random Fourier-series density on (-1/2, 1/2) with
  coefficients a_j = j^(-alpha) c_j, |c_j| <= M and alpha > 3, so the
  exponent and its first two derivatives are uniformly bounded.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .densities import SymmetricDensity, symmetric_gaussian_mixture
from .quadrature import QuadratureScheme


@dataclass(frozen=True)
class DpmSpec:
    """Hyperparameters of the symmetrized DPM prior.

    The base measure lives on [-location_bound, location_bound] x
    [scale_lo, scale_hi]; by default it is uniform there.  base_sampler
    has signature (rng, size) -> (locations, scales) and
    base_log_density(z, sigma) evaluates the base density (needed by
    Metropolis atom updates; constants may be dropped only if uniform).
    """

    precision_alpha: float = 1.0
    location_bound: float = 4.0
    scale_lo: float = 0.2
    scale_hi: float = 3.0
    truncation_level: int = 30
    base_sampler: Callable | None = None
    base_log_density: Callable | None = None

    def __post_init__(self):
        if not self.precision_alpha > 0:
            raise ValueError("precision_alpha must be positive")
        if not (0 < self.scale_lo < self.scale_hi):
            raise ValueError("need 0 < scale_lo < scale_hi")
        if not self.location_bound > 0:
            raise ValueError("location_bound must be positive")
        if self.truncation_level < 1:
            raise ValueError("truncation_level must be >= 1")
        if self.truncation_level < 10:
            warnings.warn(
                f"truncation_level={self.truncation_level} < 10 risks gross "
                "stick-breaking truncation bias",
                UserWarning,
                stacklevel=2,
            )

    def sample_base(self, rng: np.random.Generator, size: int):
        if self.base_sampler is not None:
            z, s = self.base_sampler(rng, size)
            return np.asarray(z, float), np.asarray(s, float)
        z = rng.uniform(-self.location_bound, self.location_bound, size)
        s = rng.uniform(self.scale_lo, self.scale_hi, size)
        return z, s

    def base_logpdf(self, z, sigma):
        if self.base_log_density is not None:
            return np.asarray(self.base_log_density(z, sigma), float)
        area = 2.0 * self.location_bound * (self.scale_hi - self.scale_lo)
        inside = (
            (np.abs(z) <= self.location_bound)
            & (sigma >= self.scale_lo)
            & (sigma <= self.scale_hi)
        )
        return np.where(inside, -np.log(area), -np.inf)


@dataclass(frozen=True)
class DpmDraw:
    """Finite atom representation (weights sum to 1)."""

    weights: np.ndarray
    locations: np.ndarray
    scales: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, float)
        if not np.isclose(w.sum(), 1.0, atol=1e-10):
            raise ValueError("stick-breaking weights must sum to 1")
        if w.shape != np.shape(self.locations) or w.shape != np.shape(self.scales):
            raise ValueError("weights, locations, scales must share a shape")


def dpm_prior_draw(spec: DpmSpec, rng: np.random.Generator) -> DpmDraw:
    """Truncated stick-breaking draw: v_k ~ Beta(1, alpha), the last stick
    absorbs the remainder; atoms i.i.d. from the base measure."""
    T = spec.truncation_level
    if T == 1:
        w = np.ones(1)
    else:
        v = rng.beta(1.0, spec.precision_alpha, size=T - 1)
        w = np.empty(T)
        w[:-1] = v * np.cumprod(np.concatenate([[1.0], 1.0 - v[:-1]]))
        w[-1] = np.prod(1.0 - v)
    z, s = spec.sample_base(rng, T)
    return DpmDraw(weights=w, locations=z, scales=s)


def dpm_density(draw: DpmDraw, name: str = "") -> SymmetricDensity:
    """Symmetrized mixture density of a DPM draw, with analytic score."""
    return symmetric_gaussian_mixture(
        draw.locations, draw.scales, draw.weights, name=name or "dpm-draw"
    )


# ---------------------------------------------------------------------------
# Random series prior
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeriesSpec:
    """Random Fourier-series prior on log-densities over (-1/2, 1/2)."""

    decay_alpha: float = 3.5
    coefficient_bound: float = 5.0
    truncation: int = 25
    coefficient_sampler: Callable | None = None

    def __post_init__(self):
        if not self.decay_alpha > 3:
            raise ValueError("decay_alpha must exceed 3 for bounded derivatives")
        if not self.coefficient_bound > 0:
            raise ValueError("coefficient_bound must be positive")
        if self.truncation < 1:
            raise ValueError("truncation must be >= 1")

    def sample_coefficients(self, rng: np.random.Generator) -> np.ndarray:
        if self.coefficient_sampler is not None:
            c = np.asarray(self.coefficient_sampler(rng, self.truncation), float)
        else:
            c = rng.uniform(-self.coefficient_bound, self.coefficient_bound,
                            self.truncation)
        return c


@dataclass(frozen=True)
class SeriesDraw:
    """Raw coefficients c_j; the exponent uses a_j = j^(-alpha) c_j."""

    coefficients: np.ndarray
    decay_alpha: float = 3.5
    coefficient_bound: float = 5.0

    def __post_init__(self):
        c = np.asarray(self.coefficients, float)
        if np.any(np.abs(c) > self.coefficient_bound + 1e-12):
            raise ValueError("coefficients exceed the bound M")

    @property
    def amplitudes(self) -> np.ndarray:
        j = np.arange(1, np.size(self.coefficients) + 1, dtype=float)
        return np.asarray(self.coefficients, float) * j ** (-self.decay_alpha)


def series_prior_draw(spec: SeriesSpec, rng: np.random.Generator) -> SeriesDraw:
    return SeriesDraw(
        coefficients=spec.sample_coefficients(rng),
        decay_alpha=spec.decay_alpha,
        coefficient_bound=spec.coefficient_bound,
    )


def fourier_basis(t: np.ndarray, n_terms: int) -> np.ndarray:
    """Basis matrix B[i, j] = b_{j+1}(t_i) with b_1 = 1,
    b_{2j} = cos(2 pi j t), b_{2j+1} = sin(2 pi j t)."""
    t = np.atleast_1d(np.asarray(t, float))
    B = np.empty((t.size, n_terms))
    for idx in range(1, n_terms + 1):
        if idx == 1:
            B[:, 0] = 1.0
        elif idx % 2 == 0:
            j = idx // 2
            B[:, idx - 1] = np.cos(2.0 * np.pi * j * t)
        else:
            j = (idx - 1) // 2
            B[:, idx - 1] = np.sin(2.0 * np.pi * j * t)
    return B


def fourier_basis_deriv(t: np.ndarray, n_terms: int) -> np.ndarray:
    """Derivatives of the basis functions at t."""
    t = np.atleast_1d(np.asarray(t, float))
    D = np.empty((t.size, n_terms))
    for idx in range(1, n_terms + 1):
        if idx == 1:
            D[:, 0] = 0.0
        elif idx % 2 == 0:
            j = idx // 2
            D[:, idx - 1] = -2.0 * np.pi * j * np.sin(2.0 * np.pi * j * t)
        else:
            j = (idx - 1) // 2
            D[:, idx - 1] = 2.0 * np.pi * j * np.cos(2.0 * np.pi * j * t)
    return D


def log_normalizer(amplitudes: np.ndarray,
                   scheme: QuadratureScheme | None = None) -> float:
    """log of int_{-1/2}^{1/2} exp(w(t)) dt for w = sum a_j b_j."""
    scheme = scheme or QuadratureScheme(node_count=256)
    x, wts = scheme.interval_nodes(-0.5, 0.5)
    w = fourier_basis(x, amplitudes.size) @ amplitudes
    m = w.max()
    return float(m + np.log(wts @ np.exp(w - m)))


def series_density(draw: SeriesDraw,
                   scheme: QuadratureScheme | None = None) -> SymmetricDensity:
    """Symmetrized exponential-series density on (-1/2, 1/2).

    p_w(x) = exp(w(x)) / Z; the returned density is (p_w(x) + p_w(-x)) / 2
    with the score computed analytically from the basis derivatives.
    """
    a = draw.amplitudes
    n_terms = a.size
    log_z = log_normalizer(a, scheme)

    def exponent(x):
        return fourier_basis(x, n_terms) @ a

    def log_density(x):
        x = np.asarray(x, float)
        return np.logaddexp(exponent(x), exponent(-x)) - np.log(2.0) - log_z

    def score(x):
        x = np.atleast_1d(np.asarray(x, float))
        wp, wm = exponent(x), exponent(-x)
        dp = fourier_basis_deriv(x, n_terms) @ a
        dm = fourier_basis_deriv(-x, n_terms) @ a
        lam = 1.0 / (1.0 + np.exp(wm - wp))  # weight of the +x branch
        return -(lam * dp - (1.0 - lam) * dm)

    def sampler(rng, size):
        # Inverse-CDF on a dense grid; the density is smooth and bounded.
        grid = np.linspace(-0.5, 0.5, 4097)
        pdf = np.exp(log_density(grid))
        cdf = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) * 0.5
                                               * np.diff(grid))])
        cdf /= cdf[-1]
        u = rng.uniform(size=size)
        return np.interp(u, cdf, grid)

    return SymmetricDensity(
        support_halfwidth=0.5,
        log_density=log_density,
        score=score,
        sampler=sampler,
        name="series-draw",
    )
