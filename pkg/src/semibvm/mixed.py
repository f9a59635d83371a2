"""Linear mixed-effect model with symmetric errors.

Groups i = 1..n each carry m responses X_ij = theta' Z_ij + b_i' W_ij +
eps_ij with i.i.d. symmetric errors and random effects b_i ~ G.  The group
density is psi(y | w) = int prod_j f(y_j - b' w_j) dG(b); its y-score is a
ratio of integrals computed on the same node set.  Random-effect
integration uses Gauss-Hermite (unbounded Gaussian G), Gauss-Legendre
(truncated G, q = 1), an exact sum (discrete G), or antithetic Monte Carlo
(q > 1).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .densities import SymmetricDensity
from .error_laws import resolve_error_law
from .exceptions import ImpreciseIntegrationError, OutOfSupportError
from .quadrature import gauss_hermite_standard_normal

PSI_REFINEMENT_TOL = 1e-4


@dataclass(frozen=True)
class RandomEffectLaw:
    """Law G of the random effect; symmetric about 0 by construction.

    kind is one of "gaussian" (sigma_b2, or cov for q > 1), "point-mass"
    (degenerate at 0), "truncated-gaussian" (cov plus support bound), and
    "symmetric-discrete" (atoms with probs; the atom set must be closed
    under negation).
    """

    kind: str = "gaussian"
    sigma_b2: float = 1.0
    cov: np.ndarray | None = None
    bound: float = np.inf
    atoms: np.ndarray | None = None
    probs: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in (
            "gaussian", "point-mass", "truncated-gaussian", "symmetric-discrete"
        ):
            raise ValueError(f"unknown random-effect kind {self.kind!r}")
        if self.kind == "gaussian" and self.cov is None and not self.sigma_b2 >= 0:
            raise ValueError("sigma_b2 must be nonnegative")
        if self.kind == "truncated-gaussian" and not self.bound > 0:
            raise ValueError("truncated-gaussian needs a positive bound")
        if self.kind == "symmetric-discrete":
            a = np.atleast_2d(np.asarray(self.atoms, float))
            p = np.asarray(self.probs, float)
            if not np.isclose(p.sum(), 1.0):
                raise ValueError("atom probabilities must sum to 1")
            # Symmetry: every atom's negation must occur with equal probability.
            for ai, pi in zip(a, p):
                match = np.isclose(a, -ai).all(axis=1)
                if not match.any() or not np.isclose(p[match].sum(), pi):
                    raise ValueError("discrete law is not symmetric about 0")
            object.__setattr__(self, "atoms", a)
            object.__setattr__(self, "probs", p)

    @property
    def dim(self) -> int:
        if self.kind == "symmetric-discrete":
            return self.atoms.shape[1]
        if self.cov is not None:
            return np.atleast_2d(self.cov).shape[0]
        return 1

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """(size, q) draws."""
        q = self.dim
        if self.kind == "point-mass":
            return np.zeros((size, q))
        if self.kind == "symmetric-discrete":
            idx = rng.choice(self.atoms.shape[0], size=size, p=self.probs)
            return self.atoms[idx]
        if self.cov is None:
            draws = np.sqrt(self.sigma_b2) * rng.standard_normal((size, 1))
        else:
            chol = np.linalg.cholesky(np.atleast_2d(self.cov))
            draws = rng.standard_normal((size, q)) @ chol.T
        if self.kind == "truncated-gaussian":
            out = np.empty((size, q))
            filled = 0
            while filled < size:
                cand = draws if filled == 0 else (
                    rng.standard_normal((size, q)) @ np.linalg.cholesky(
                        np.atleast_2d(self.cov if self.cov is not None
                                      else [[self.sigma_b2]])).T
                )
                keep = cand[np.all(np.abs(cand) <= self.bound, axis=1)]
                take = min(size - filled, keep.shape[0])
                out[filled:filled + take] = keep[:take]
                filled += take
            return out
        return draws


@dataclass(frozen=True)
class RandomEffectIntegrator:
    """Nodes b_k (K, q) and log-weights approximating int . dG(b)."""

    nodes: np.ndarray
    log_weights: np.ndarray
    refinable: bool = True

    @property
    def size(self) -> int:
        return self.nodes.shape[0]


def make_integrator(
    G: RandomEffectLaw,
    n_nodes: int = 96,
    mc_size: int = 512,
    rng: np.random.Generator | None = None,
) -> RandomEffectIntegrator:
    q = G.dim
    if G.kind == "point-mass":
        return RandomEffectIntegrator(np.zeros((1, q)), np.zeros(1),
                                      refinable=False)
    if G.kind == "symmetric-discrete":
        return RandomEffectIntegrator(G.atoms, np.log(G.probs), refinable=False)
    if G.kind == "gaussian" and q == 1:
        if G.sigma_b2 == 0.0:
            return RandomEffectIntegrator(np.zeros((1, 1)), np.zeros(1),
                                          refinable=False)
        x, w = gauss_hermite_standard_normal(n_nodes)
        nodes = (np.sqrt(G.sigma_b2) * x)[:, None]
        return RandomEffectIntegrator(nodes, np.log(w))
    if G.kind == "truncated-gaussian" and q == 1:
        var = float(G.sigma_b2 if G.cov is None else np.atleast_2d(G.cov)[0, 0])
        from scipy.stats import norm

        x = np.polynomial.legendre.leggauss(n_nodes)
        nodes = G.bound * x[0]
        glw = G.bound * x[1]
        sd = np.sqrt(var)
        mass = norm.cdf(G.bound / sd) - norm.cdf(-G.bound / sd)
        logw = np.log(glw) + norm.logpdf(nodes / sd) - np.log(sd) - np.log(mass)
        return RandomEffectIntegrator(nodes[:, None], logw)
    # q > 1 (or non-degenerate fallback): antithetic Monte Carlo.
    rng = rng or np.random.default_rng(0)
    half = G.sample(rng, mc_size // 2)
    nodes = np.concatenate([half, -half])
    logw = np.full(nodes.shape[0], -np.log(nodes.shape[0]))
    return RandomEffectIntegrator(nodes, logw)


def _refined(integrator: RandomEffectIntegrator, G: RandomEffectLaw,
             rng: np.random.Generator | None = None) -> RandomEffectIntegrator:
    return make_integrator(G, n_nodes=2 * integrator.size,
                           mc_size=2 * integrator.size, rng=rng)


def _group_log_terms(y: np.ndarray, w: np.ndarray, f: SymmetricDensity,
                     integ: RandomEffectIntegrator) -> np.ndarray:
    """log [weight_k * prod_j f(y_sj - b_k' w_j)] with y (S, m) batched.

    Returns (S, K).
    """
    shifts = integ.nodes @ w  # (K, m)
    resid = y[:, None, :] - shifts[None, :, :]  # (S, K, m)
    logf = f.logpdf(resid.ravel()).reshape(resid.shape)
    return integ.log_weights[None, :] + logf.sum(axis=2)


def psi_log_density_batch(
    y: np.ndarray,
    w: np.ndarray,
    f: SymmetricDensity,
    G: RandomEffectLaw,
    integrator: RandomEffectIntegrator | None = None,
) -> np.ndarray:
    """log psi(y_s | w) for a batch y of shape (S, m)."""
    integ = integrator or make_integrator(G)
    return logsumexp(_group_log_terms(np.atleast_2d(y), w, f, integ), axis=1)


def psi_log_density(
    y, w, f: SymmetricDensity, G: RandomEffectLaw,
    integrator: RandomEffectIntegrator | None = None,
    check: bool = False,
) -> float:
    """log psi(y | w) for one group; with check=True the integrator is
    refined once and relative disagreement above 1e-4 raises
    ImpreciseIntegrationError."""
    y = np.asarray(y, float).reshape(1, -1)
    integ = integrator or make_integrator(G)
    value = float(psi_log_density_batch(y, w, f, G, integ)[0])
    if check and integ.refinable:
        finer = float(psi_log_density_batch(y, w, f, G, _refined(integ, G))[0])
        if abs(finer - value) > PSI_REFINEMENT_TOL * max(1.0, abs(finer)):
            raise ImpreciseIntegrationError(
                f"psi integrator disagreement {abs(finer - value):.3e}"
            )
        value = finer
    return value


def psi_density(y, w, f, G, integrator=None, check: bool = False) -> float:
    return float(np.exp(psi_log_density(y, w, f, G, integrator, check)))


def psi_score_batch(
    y: np.ndarray,
    w: np.ndarray,
    f: SymmetricDensity,
    G: RandomEffectLaw,
    integrator: RandomEffectIntegrator | None = None,
) -> np.ndarray:
    """s(y_s | w) = -grad_y log psi = posterior expectation of the error
    scores s_f(y_j - b' w_j); batched over rows of y, returns (S, m)."""
    y = np.atleast_2d(np.asarray(y, float))
    integ = integrator or make_integrator(G)
    shifts = integ.nodes @ w
    resid = y[:, None, :] - shifts[None, :, :]
    logf = f.logpdf(resid.ravel()).reshape(resid.shape)
    log_terms = integ.log_weights[None, :] + logf.sum(axis=2)  # (S, K)
    log_post = log_terms - logsumexp(log_terms, axis=1, keepdims=True)
    post = np.exp(log_post)
    scores = f.score_at(resid.ravel()).reshape(resid.shape)
    return np.einsum("sk,skj->sj", post, scores)


def psi_score(y, w, f, G, integrator=None, check: bool = False) -> np.ndarray:
    y = np.asarray(y, float).reshape(1, -1)
    integ = integrator or make_integrator(G)
    value = psi_score_batch(y, w, f, G, integ)[0]
    if check and integ.refinable:
        finer = psi_score_batch(y, w, f, G, _refined(integ, G))[0]
        scale = np.maximum(1.0, np.abs(finer))
        if np.any(np.abs(finer - value) > PSI_REFINEMENT_TOL * scale):
            raise ImpreciseIntegrationError("psi score integrator disagreement")
        value = finer
    return value


@dataclass(frozen=True)
class MixedDataset:
    """Grouped responses with fixed (p x m) and random-effect (q x m)
    covariate blocks per group; equal group size m throughout."""

    responses: np.ndarray          # (n, m)
    fixed_covariates: np.ndarray   # (n, p, m)
    random_covariates: np.ndarray  # (n, q, m)
    theta_true: np.ndarray | None = None
    sigma_b2_true: float | None = None
    error_law: str | None = None

    def __post_init__(self):
        x = np.asarray(self.responses, float)
        z = np.asarray(self.fixed_covariates, float)
        w = np.asarray(self.random_covariates, float)
        if x.ndim != 2 or z.ndim != 3 or w.ndim != 3:
            raise ValueError("responses (n,m), Z (n,p,m), W (n,q,m) required")
        if z.shape[0] != x.shape[0] or z.shape[2] != x.shape[1]:
            raise ValueError("fixed covariate shape mismatch")
        if w.shape[0] != x.shape[0] or w.shape[2] != x.shape[1]:
            raise ValueError("random covariate shape mismatch")
        object.__setattr__(self, "responses", x)
        object.__setattr__(self, "fixed_covariates", z)
        object.__setattr__(self, "random_covariates", w)

    @property
    def n(self) -> int:
        return self.responses.shape[0]

    @property
    def m(self) -> int:
        return self.responses.shape[1]

    @property
    def p(self) -> int:
        return self.fixed_covariates.shape[1]

    @property
    def q(self) -> int:
        return self.random_covariates.shape[1]

    @property
    def design_matrix(self) -> np.ndarray:
        """Z_n = n^{-1} sum_i Z_i Z_i' (p x p)."""
        z = self.fixed_covariates
        return np.einsum("ipm,iqm->pq", z, z) / self.n

    @property
    def covariate_bound(self) -> float:
        zb = np.max(np.linalg.norm(self.fixed_covariates, axis=1))
        wb = np.max(np.linalg.norm(self.random_covariates, axis=1))
        return float(max(zb, wb))

    def residuals(self, theta) -> np.ndarray:
        """(n, m) array X_i - Z_i' theta."""
        return self.responses - np.einsum(
            "p,ipm->im", np.asarray(theta, float), self.fixed_covariates
        )

    def stacked_regression(self):
        """Flatten groups to an (n*m,) response and (n*m, p) design."""
        x = self.responses.ravel()
        z = np.transpose(self.fixed_covariates, (0, 2, 1)).reshape(-1, self.p)
        return x, z


def covariate_pattern_frequencies(data: MixedDataset,
                                  decimals: int = 10) -> dict[tuple, float]:
    """Relative frequency of each distinct random-effect covariate value
    W_ij (rounded); the finite-sample surrogate for the design-richness
    requirement that every pattern recurs at a positive rate."""
    cols = np.round(
        np.transpose(data.random_covariates, (0, 2, 1)).reshape(-1, data.q),
        decimals,
    )
    patterns, counts = np.unique(cols, axis=0, return_counts=True)
    total = cols.shape[0]
    return {tuple(row): c / total for row, c in zip(patterns, counts)}


def check_design_richness(data: MixedDataset, floor: float = 0.01) -> bool:
    """True when every observed covariate pattern has frequency >= floor."""
    freqs = covariate_pattern_frequencies(data)
    return all(f >= floor for f in freqs.values())


def generate_mixed(
    n: int,
    m: int,
    theta0: Sequence[float],
    sigma_b2: float,
    law,
    rng: np.random.Generator,
) -> MixedDataset:
    """Random-intercept data: W_ij = 1, b_i ~ N(0, sigma_b2), Bernoulli(1/2)
    fixed covariates coded +/-1, errors i.i.d. from law (None for
    noiseless)."""
    theta0 = np.asarray(theta0, float)
    p = theta0.size
    density = resolve_error_law(law)
    tag = law if isinstance(law, str) else getattr(density, "name", None)
    z = (2.0 * rng.integers(0, 2, size=(n, p, m)) - 1.0).astype(float)
    w = np.ones((n, 1, m))
    b = np.sqrt(sigma_b2) * rng.standard_normal(n) if sigma_b2 > 0 else np.zeros(n)
    eps = (
        density.sample(rng, n * m).reshape(n, m)
        if density is not None
        else np.zeros((n, m))
    )
    x = np.einsum("p,ipm->im", theta0, z) + b[:, None] + eps
    return MixedDataset(
        x, z, w, theta_true=theta0, sigma_b2_true=float(sigma_b2), error_law=tag
    )


def _group_batches(data: MixedDataset):
    """Indices of groups sharing a random-covariate block, so psi can be
    evaluated in one batched call per distinct W."""
    keys: dict[bytes, list[int]] = {}
    for i in range(data.n):
        keys.setdefault(data.random_covariates[i].tobytes(), []).append(i)
    return [(np.array(idx), data.random_covariates[idx[0]])
            for idx in keys.values()]


def loglik_mixed(
    data: MixedDataset,
    theta,
    f: SymmetricDensity,
    G: RandomEffectLaw,
    integrator: RandomEffectIntegrator | None = None,
) -> float:
    """sum_i log psi(X_i - Z_i' theta | W_i)."""
    integ = integrator or make_integrator(G)
    res = data.residuals(theta)
    if np.isfinite(f.support_halfwidth):
        reach = np.max(np.abs(integ.nodes @ data.random_covariates), initial=0.0)
        if np.any(np.abs(res) >= f.support_halfwidth + reach):
            raise OutOfSupportError("residual outside reachable error support")
    total = 0.0
    for idx, w in _group_batches(data):
        total += float(psi_log_density_batch(res[idx], w, f, G, integ).sum())
    return total


def score_mixed(
    data: MixedDataset,
    theta,
    f: SymmetricDensity,
    G: RandomEffectLaw,
    integrator: RandomEffectIntegrator | None = None,
) -> np.ndarray:
    """sum_i Z_i s(X_i - Z_i' theta | W_i), a p-vector."""
    integ = integrator or make_integrator(G)
    res = data.residuals(theta)
    s = np.empty_like(res)
    for idx, w in _group_batches(data):
        s[idx] = psi_score_batch(res[idx], w, f, G, integ)
    return np.einsum("ipm,im->p", data.fixed_covariates, s)


def write_mixed_csv(data: MixedDataset, path) -> None:
    """Columns group, j, x, z1..zp, w1..wq at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["group", "j", "x"]
            + [f"z{k + 1}" for k in range(data.p)]
            + [f"w{k + 1}" for k in range(data.q)]
        )
        for i in range(data.n):
            for j in range(data.m):
                row = [str(i), str(j), f"{data.responses[i, j]:.17g}"]
                row += [f"{v:.17g}" for v in data.fixed_covariates[i, :, j]]
                row += [f"{v:.17g}" for v in data.random_covariates[i, :, j]]
                writer.writerow(row)


def read_mixed_csv(path) -> MixedDataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        p = sum(1 for h in header if h.startswith("z"))
        q = sum(1 for h in header if h.startswith("w"))
        rows = list(reader)
    groups = sorted({int(r[0]) for r in rows})
    m = max(int(r[1]) for r in rows) + 1
    n = len(groups)
    x = np.zeros((n, m))
    z = np.zeros((n, p, m))
    w = np.zeros((n, q, m))
    remap = {g: i for i, g in enumerate(groups)}
    for r in rows:
        i, j = remap[int(r[0])], int(r[1])
        x[i, j] = float(r[2])
        z[i, :, j] = [float(v) for v in r[3:3 + p]]
        w[i, :, j] = [float(v) for v in r[3 + p:3 + p + q]]
    return MixedDataset(x, z, w)
