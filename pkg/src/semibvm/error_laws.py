"""The five benchmark error laws E1-E5 with exact samplers.

E1  standard normal
E2  Student t with 2 degrees of freedom (infinite variance)
E3  uniform(-3, 3)
E4  symmetric normal mixture, means (0, 1.5, 2.5, 3.5), weights (0.1, 0.2, 0.15, 0.05)
E5  symmetric normal mixture, means (0, 1, 2, 4),       weights (0.05, 0.15, 0.1, 0.2)

All five are symmetric about 0.  E3 is kept for data generation only: its
log-density is flat on the interior, so its score is defined as 0 there
and it falls outside the continuously-differentiable class the smooth
machinery assumes.  E2 has infinite variance; mean-squared-error summaries
remain well defined because estimators are finite-sample statistics.
"""

from __future__ import annotations

import numpy as np

from .densities import (
    SymmetricDensity,
    standard_normal_density,
    symmetric_gaussian_mixture,
)

ERROR_LAW_TAGS = ("E1", "E2", "E3", "E4", "E5")

E4_MEANS = (0.0, 1.5, 2.5, 3.5)
E4_WEIGHTS = (0.1, 0.2, 0.15, 0.05)
E5_MEANS = (0.0, 1.0, 2.0, 4.0)
E5_WEIGHTS = (0.05, 0.15, 0.1, 0.2)


def mixture_parameters(tag: str) -> tuple[np.ndarray, np.ndarray]:
    """(means, component weights) for E4/E5; weights sum to 1/2 because each
    mean contributes a mirrored pair of kernels."""
    if tag == "E4":
        return np.array(E4_MEANS), np.array(E4_WEIGHTS)
    if tag == "E5":
        return np.array(E5_MEANS), np.array(E5_WEIGHTS)
    raise ValueError(f"{tag!r} is not a mixture law")


def _student_t2() -> SymmetricDensity:
    # density (1/(2*sqrt(2))) * (1 + x^2/2)^(-3/2); score 3x / (2 + x^2)
    log_coef = -np.log(2.0 * np.sqrt(2.0))

    return SymmetricDensity(
        support_halfwidth=np.inf,
        log_density=lambda x: log_coef - 1.5 * np.log1p(0.5 * x * x),
        score=lambda x: 3.0 * x / (2.0 + x * x),
        sampler=lambda rng, size: rng.standard_t(2, size=size),
        name="E2",
        # Heavy tails: the truncated mass beyond r is ~1/r^2, so the radius
        # is chosen for ~2.5e-5 normalization error rather than the 1e-12
        # rule used for Gaussian-type laws.
        quad_radius=200.0,
    )


def _uniform3() -> SymmetricDensity:
    log_d = -np.log(6.0)
    return SymmetricDensity(
        support_halfwidth=3.0,
        log_density=lambda x: np.full(np.shape(x), log_d),
        score=lambda x: np.zeros(np.shape(x)),
        sampler=lambda rng, size: rng.uniform(-3.0, 3.0, size=size),
        name="E3",
    )


def make_error_law(tag: str) -> SymmetricDensity:
    """Build one of the registered error laws from its tag."""
    if tag == "E1":
        d = standard_normal_density(1.0, name="E1")
    elif tag == "E2":
        d = _student_t2()
    elif tag == "E3":
        d = _uniform3()
    elif tag in ("E4", "E5"):
        means, weights = mixture_parameters(tag)
        d = symmetric_gaussian_mixture(
            means, np.ones_like(means), 2.0 * weights, name=tag
        )
    else:
        raise ValueError(f"unknown error law tag {tag!r}; expected E1..E5")
    return d


def point_mass_zero() -> SymmetricDensity:
    """Degenerate noiseless law; only the sampler is meaningful."""
    return SymmetricDensity(
        support_halfwidth=np.inf,
        log_density=lambda x: np.where(x == 0.0, np.inf, -np.inf),
        score=None,
        sampler=lambda rng, size: np.zeros(size),
        name="point-mass-0",
    )


def resolve_error_law(law) -> SymmetricDensity | None:
    """Accept a tag string, a SymmetricDensity, or None (noiseless)."""
    if law is None:
        return None
    if isinstance(law, str):
        return make_error_law(law)
    if isinstance(law, SymmetricDensity):
        return law
    raise TypeError(f"cannot interpret {law!r} as an error law")
