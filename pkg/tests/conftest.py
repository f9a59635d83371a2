"""Shared brute-force oracles for the test suite.

These deliberately avoid the package's quadrature path: dense-grid
trapezoid integration and finite differences only, so expected values are
computed independently of the code they check.
"""

import numpy as np


def dense_trapezoid(f, lo, hi, n=2_000_001):
    """Brute-force trapezoid integral on a dense uniform grid."""
    x = np.linspace(lo, hi, n)
    return float(np.trapezoid(f(x), x))


def brute_hellinger_sq(pdf_p, pdf_q, lo, hi, n=2_000_001):
    return dense_trapezoid(
        lambda x: (np.sqrt(pdf_p(x)) - np.sqrt(pdf_q(x))) ** 2, lo, hi, n
    )


def brute_kl(pdf_p, pdf_q, lo, hi, n=2_000_001):
    """(K, V) by dense-grid integration; integrand forced to 0 where p=0."""
    x = np.linspace(lo, hi, n)
    p = pdf_p(x)
    q = pdf_q(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_ratio = np.where(p > 0, np.log(p) - np.log(q), 0.0)
    k = float(np.trapezoid(p * log_ratio, x))
    v = float(np.trapezoid(p * (log_ratio - k) ** 2, x))
    return k, v


def central_difference(f, x, step=1e-6):
    return (f(x + step) - f(x - step)) / (2.0 * step)


def mc_standard_error(samples):
    samples = np.asarray(samples, float)
    return samples.std(ddof=1) / np.sqrt(samples.size)
