"""Acceptance gate: every criterion at its stated tolerance.

Each test prints one [PASS]/[FAIL] line.  The desk-scale reference study
(criterion 1) and the posterior-normality ladder (criterion 2) dominate
the runtime; both run once per session through module-scoped fixtures.
Set SEMIBVM_PAPER_SCALE=1 to also run the N=300 full-scale target check.
"""

import os
import time
import numpy as np
import pytest

import semibvm as sb
from conftest import mc_standard_error
from semibvm.densities import LOG_SQRT_2PI, Density
from semibvm.diagnostics import (
    ball_radius_h_grid,
    delta_n,
    fisher_regression,
    lan_remainder,
)
from semibvm.harness import ExperimentConfig, run_bvm_sweep, run_lan_sweep, run_table1
from semibvm.mixed import RandomEffectLaw, make_integrator, psi_log_density_batch
from semibvm.priors import DpmSpec, SeriesDraw, SeriesSpec, fourier_basis, log_normalizer
from semibvm.samplers.chain import effective_sample_size
from semibvm.samplers.dpm_gibbs import (
    _Workspace,
    _sweep,
    generate_b2_data,
    prior_b2_state,
)
from semibvm.samplers.gaussian_gibbs import b1_gibbs_refresh

THETA0 = np.array([-1.0, 1.0])
THREADS = max(1, min(4, os.cpu_count() or 1))


def report(criterion: str, ok: bool, detail: str) -> bool:
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
    return ok


# ---------------------------------------------------------------------------
# Criterion 1: reference simulation study at desk scale
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def desk_table():
    cfg = ExperimentConfig(
        scenario="table1",
        laws=("E1", "E2", "E4", "E5"),
        replications=100,
        estimators=("F", "B1", "B2"),
        threads=THREADS,
    )
    start = time.time()
    table = run_table1(cfg)
    table.config["elapsed_seconds"] = time.time() - start
    return table


def test_criterion_1a_e1_relative_efficiencies(desk_table):
    rel_f = desk_table.relative_efficiency("E1", "F")
    rel_b1 = desk_table.relative_efficiency("E1", "B1")
    ok = 0.85 <= rel_f <= 1.15 and 0.85 <= rel_b1 <= 1.15
    assert report("1a", ok,
                  f"E1 rel.eff F={rel_f:.3f} B1={rel_b1:.3f} (window [0.85, 1.15])")


def test_criterion_1b_e2_heavy_tail_gap(desk_table):
    rel_f = desk_table.relative_efficiency("E2", "F")
    mse_b2 = desk_table.mse("E2", "B2")
    ok = rel_f >= 2.0 and mse_b2 <= 0.15
    assert report("1b", ok,
                  f"E2 rel.eff F={rel_f:.2f} (>=2.0), B2 MSE={mse_b2:.4f} (<=0.15)")


def test_criterion_1c_mixture_efficiency(desk_table):
    rel_e4 = desk_table.relative_efficiency("E4", "F")
    rel_e5 = desk_table.relative_efficiency("E5", "F")
    ok = rel_e4 >= 1.0 and rel_e5 >= 1.0
    assert report("1c", ok,
                  f"rel.eff F on E4={rel_e4:.2f}, E5={rel_e5:.2f} (>=1.0)")


def test_criterion_1_budget(desk_table):
    # stated budget: 45 minutes on 8 workers; scale by actual worker count
    allowed = 45 * 60 * 8 / THREADS
    elapsed = desk_table.config["elapsed_seconds"]
    ok = elapsed <= allowed
    assert report("1-budget", ok,
                  f"desk study took {elapsed:.0f}s on {THREADS} workers "
                  f"(allowed {allowed:.0f}s)")


@pytest.mark.skipif(os.environ.get("SEMIBVM_PAPER_SCALE") != "1",
                    reason="full-scale study enabled via SEMIBVM_PAPER_SCALE=1")
def test_criterion_1_paper_scale_targets():
    cfg = ExperimentConfig(
        scenario="table1",
        laws=("E1", "E2", "E3", "E4", "E5"),
        replications=300,
        estimators=("F", "B1", "B2"),
        threads=THREADS,
        preset="paper",
    )
    table = run_table1(cfg)
    reference = {   # published values the full preset targets
        ("E1", "F"): 0.03, ("E1", "B1"): 0.03, ("E1", "B2"): 0.03,
        ("E2", "F"): 0.27, ("E2", "B1"): 0.26, ("E2", "B2"): 0.09,
        ("E3", "F"): 0.07, ("E3", "B1"): 0.07, ("E3", "B2"): 0.05,
        ("E4", "F"): 0.13, ("E4", "B1"): 0.12, ("E4", "B2"): 0.11,
        ("E5", "F"): 0.19, ("E5", "B1"): 0.19, ("E5", "B2"): 0.17,
    }
    worst = []
    ok = True
    for (law, est), target in reference.items():
        tol = 0.06 if law == "E2" else 0.03
        gap = abs(table.mse(law, est) - target)
        worst.append(f"{law}/{est}:{table.mse(law, est):.3f}(ref {target})")
        if gap > tol:
            ok = False
    assert report("1-paper", ok, "; ".join(worst))


# ---------------------------------------------------------------------------
# Criterion 2: posterior-vs-normal distance shrinks along the n-ladder
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def bvm_ladder():
    cfg = ExperimentConfig(
        scenario="bvm-sweep",
        laws=("E4",),
        estimators=("B2",),
        replications=20,
        n_ladder=(100, 400, 1600),
        threads=THREADS,
        sampler=sb.SamplerConfig(iterations=6000, burn_in=2000, thin=2),
    )
    start = time.time()
    reports = run_bvm_sweep(cfg)
    elapsed = time.time() - start
    return cfg, reports, elapsed


def test_criterion_2_bvm_convergence(bvm_ladder):
    cfg, reports, elapsed = bvm_ladder
    medians = []
    for n in cfg.n_ladder:
        ks = np.concatenate([r.ks_coordinates for r in reports if r.n == n])
        medians.append(float(np.median(ks)))
    decreasing = all(a > b for a, b in zip(medians, medians[1:]))
    ok = decreasing and medians[-1] < 0.1
    assert report(
        "2", ok,
        "median KS over n=(100,400,1600): "
        + ", ".join(f"{m:.4f}" for m in medians)
        + f" (strictly decreasing, final < 0.1); {elapsed:.0f}s",
    )


def test_criterion_2_budget(bvm_ladder):
    _, _, elapsed = bvm_ladder
    allowed = 30 * 60 * 8 / THREADS
    ok = elapsed <= allowed
    assert report("2-budget", ok,
                  f"BvM sweep took {elapsed:.0f}s on {THREADS} workers "
                  f"(allowed {allowed:.0f}s)")


# ---------------------------------------------------------------------------
# Criterion 3: LAN remainder
# ---------------------------------------------------------------------------


def test_criterion_3_gaussian_remainder_zero():
    phi = sb.standard_normal_density()
    rng = np.random.default_rng(31)
    worst = 0.0
    for n in (30, 200, 1000):
        data = sb.generate_regression(n, 2, THETA0, "E1", rng)
        info = fisher_regression(phi, phi, data.design_matrix)
        rem = lan_remainder(data, phi, THETA0, ball_radius_h_grid(2, 2.0),
                            info)
        worst = max(worst, float(np.max(np.abs(rem))))
    ok = worst < 1e-10
    assert report("3-gaussian", ok,
                  f"max |remainder| = {worst:.2e} (< 1e-10)")


def test_criterion_3_e4_remainder_shrinks():
    cfg = ExperimentConfig(
        scenario="lan-sweep", laws=("E4",), estimators=("B2",),
        replications=50, n_ladder=(100, 400, 1600), threads=THREADS,
        h_radius=2.0,
    )
    results = run_lan_sweep(cfg)
    medians = [float(np.median(results[n])) for n in cfg.n_ladder]
    ok = all(a > b for a, b in zip(medians, medians[1:]))
    assert report(
        "3-e4", ok,
        "median max|remainder| over n=(100,400,1600): "
        + ", ".join(f"{m:.4f}" for m in medians) + " (decreasing)",
    )


# ---------------------------------------------------------------------------
# Criterion 4: symmetrization inequalities on randomized pairs
# ---------------------------------------------------------------------------


def _random_shifted_gaussian(rng):
    mu = rng.uniform(-2.0, 2.0)
    s = rng.uniform(0.6, 1.8)
    return Density(
        support_halfwidth=np.inf,
        log_density=lambda x: -0.5 * ((x - mu) / s) ** 2 - np.log(s)
        - LOG_SQRT_2PI,
        score=lambda x: (x - mu) / s**2,
        quad_radius=abs(mu) + 10.0 * s,
    )


def _random_asymmetric_mixture(rng):
    mus = rng.uniform(-3.0, 3.0, size=2)
    w = rng.uniform(0.2, 0.8)
    s = rng.uniform(0.7, 1.5, size=2)

    def log_density(x):
        a = np.log(w) - 0.5 * ((x - mus[0]) / s[0]) ** 2 - np.log(s[0])
        b = np.log1p(-w) - 0.5 * ((x - mus[1]) / s[1]) ** 2 - np.log(s[1])
        return np.logaddexp(a, b) - LOG_SQRT_2PI

    return Density(support_halfwidth=np.inf, log_density=log_density,
                   quad_radius=float(np.max(np.abs(mus)) + 12.0))


def _random_series(rng):
    draw = SeriesDraw(rng.uniform(-4.0, 4.0, size=8), decay_alpha=3.5,
                      coefficient_bound=5.0)
    a = draw.amplitudes
    log_z = log_normalizer(a)
    return Density(
        support_halfwidth=0.5,
        log_density=lambda x: fourier_basis(x, a.size) @ a - log_z,
    )


def test_criterion_4_symmetrization_inequalities():
    rng = np.random.default_rng(41)
    makers = (_random_shifted_gaussian, _random_asymmetric_mixture,
              _random_series)
    worst = {"h": -np.inf, "k": -np.inf, "v": -np.inf}
    for i in range(100):
        maker = makers[i % 3]
        p, q = maker(rng), maker(rng)
        p_bar, q_bar = sb.symmetrize(p), sb.symmetrize(q)
        h_bar = np.sqrt(sb.hellinger_sq(p_bar, q_bar))
        h = np.sqrt(sb.hellinger_sq(p, q))
        worst["h"] = max(worst["h"], h_bar - np.sqrt(2.0) * h)
        k_bb, v_bb = sb.kl_mean_and_variation(p_bar, q_bar)
        k_bq, v_bq = sb.kl_mean_and_variation(p_bar, q)
        worst["k"] = max(worst["k"], k_bb - k_bq)
        worst["v"] = max(worst["v"], v_bb - 4.0 * (v_bq + k_bq**2))
    ok = all(v <= 1e-8 for v in worst.values())
    assert report(
        "4", ok,
        "worst slack over 100 pairs: "
        f"h: {worst['h']:.2e}, K: {worst['k']:.2e}, V: {worst['v']:.2e} "
        "(all <= 1e-8)",
    )


# ---------------------------------------------------------------------------
# Criterion 5: Fisher and score oracles
# ---------------------------------------------------------------------------


def test_criterion_5_fisher_and_scores():
    phi = sb.standard_normal_density()
    checks = []

    v1 = fisher_regression(phi, phi, np.eye(1)).v_eta
    checks.append(abs(v1 - 1.0) < 1e-8)

    ok_sigma = True
    for sigma in (0.5, 1.7, 3.0):
        d = sb.standard_normal_density(sigma)
        v = fisher_regression(d, d, np.eye(1)).v_eta
        ok_sigma &= abs(v - 1.0 / sigma**2) < 1e-8
    checks.append(ok_sigma)

    # score vs central differences across every density class
    rng = np.random.default_rng(51)
    densities = [sb.make_error_law(t) for t in ("E1", "E2", "E4", "E5")]
    densities.append(sb.dpm_density(sb.dpm_prior_draw(DpmSpec(), rng)))
    densities.append(sb.series_density(
        sb.series_prior_draw(SeriesSpec(), rng)))
    densities.append(sb.symmetrize(_random_shifted_gaussian(rng)))
    worst_rel = 0.0
    for d in densities:
        hw = min(d.support_halfwidth, 6.0)
        x = np.linspace(-0.9 * hw, 0.9 * hw, 101)
        step = 1e-6 * max(1.0, hw)
        fd = -(d.logpdf(x + step) - d.logpdf(x - step)) / (2 * step)
        rel = np.max(np.abs(d.score_at(x) - fd) / np.maximum(1.0, np.abs(fd)))
        worst_rel = max(worst_rel, float(rel))
    checks.append(worst_rel < 1e-6)

    # mixed-model psi and score against the closed-form Gaussian marginal
    from scipy import stats

    m = 5
    f = sb.standard_normal_density(0.9)
    g = RandomEffectLaw(kind="gaussian", sigma_b2=1.3)
    w = np.ones((1, m))
    cov = 0.81 * np.eye(m) + 1.3 * np.ones((m, m))
    rng2 = np.random.default_rng(52)
    worst_psi = worst_score = 0.0
    for _ in range(20):
        y = rng2.multivariate_normal(np.zeros(m), cov)
        lp = psi_log_density_batch(y[None, :], w, f, g)[0]
        worst_psi = max(worst_psi, abs(
            lp - stats.multivariate_normal.logpdf(y, np.zeros(m), cov)))
        from semibvm.mixed import psi_score_batch

        s = psi_score_batch(y[None, :], w, f, g)[0]
        worst_score = max(worst_score,
                          float(np.max(np.abs(s - np.linalg.solve(cov, y)))))
    checks.append(worst_psi < 1e-6 and worst_score < 1e-6)

    # Monte Carlo integrator path (q = 2 random effect) within 3 MC ses
    g2 = RandomEffectLaw(kind="gaussian",
                         cov=np.array([[0.5, 0.1], [0.1, 0.4]]))
    w2 = np.vstack([np.ones(3), np.linspace(-1, 1, 3)])
    cov2 = 0.81 * np.eye(3) + w2.T @ g2.cov @ w2
    y2 = np.array([0.4, -0.2, 0.9])
    values = []
    for k in range(8):
        integ = make_integrator(g2, mc_size=40_000,
                                rng=np.random.default_rng(500 + k))
        values.append(psi_log_density_batch(y2[None, :], w2, f, g2, integ)[0])
    target = stats.multivariate_normal.logpdf(y2, np.zeros(3), cov2)
    se = mc_standard_error(values)
    checks.append(abs(np.mean(values) - target) < 3 * se + 1e-9)

    ok = all(checks)
    assert report(
        "5", ok,
        f"v(phi)={v1:.10f}, worst score rel err={worst_rel:.2e}, "
        f"worst psi gap={worst_psi:.2e}, worst score gap={worst_score:.2e}, "
        f"MC psi gap={abs(np.mean(values) - target):.2e} (3se={3 * se:.2e})",
    )


# ---------------------------------------------------------------------------
# Criterion 6: efficient-centering identity
# ---------------------------------------------------------------------------


def test_criterion_6_delta_equals_scaled_ols():
    phi = sb.standard_normal_density()
    rng = np.random.default_rng(61)
    worst = 0.0
    for k in range(20):
        n = int(rng.integers(30, 300))
        p = int(rng.integers(1, 4))
        theta0 = rng.normal(size=p)
        data = sb.generate_regression(n, p, theta0, "E1", rng)
        info = fisher_regression(phi, phi, data.design_matrix)
        d = delta_n(data, theta0, phi, info)
        ident = np.sqrt(n) * (sb.ols(data) - theta0)
        worst = max(worst, float(np.max(np.abs(d - ident))))
    ok = worst < 1e-10
    assert report("6", ok,
                  f"max |Delta_n - sqrt(n)(OLS - theta0)| = {worst:.2e} "
                  "over 20 datasets (< 1e-10)")


# ---------------------------------------------------------------------------
# Criterion 7: sampler validation
# ---------------------------------------------------------------------------


def _geweke_compare(forward, successive, names):
    """4-MC-standard-error agreement of monitored moments."""
    lines, ok = [], True
    for j, name in enumerate(names):
        f = forward[:, j]
        s = successive[:, j]
        se_f = f.std(ddof=1) / np.sqrt(f.size)
        ess = max(effective_sample_size(s), 4.0)
        se_s = s.std(ddof=1) / np.sqrt(ess)
        gap = abs(f.mean() - s.mean())
        tol = 4.0 * np.hypot(se_f, se_s)
        ok &= gap <= tol
        lines.append(f"{name}: |gap|={gap:.4f} tol={tol:.4f}")
    return ok, "; ".join(lines)


def test_criterion_7_geweke_b1():
    # joint-distribution test of every B1 conditional
    n, m, p = 5, 3, 1
    rng = np.random.default_rng(71)
    z = (2.0 * rng.integers(0, 2, size=(n, p, m)) - 1.0).astype(float)
    w = np.ones((n, 1, m))
    cfg = sb.SamplerConfig(
        iterations=10, burn_in=1, theta_prior_var=1.0,
        ig_shape_eps=3.0, ig_rate_eps=3.0, ig_shape_b=3.0, ig_rate_b=3.0,
    )

    def prior_state(r):
        sigma_eps2 = 3.0 / r.gamma(3.0)
        sigma_b2 = 3.0 / r.gamma(3.0)
        theta = r.standard_normal(p)
        b = np.sqrt(sigma_b2) * r.standard_normal(n)
        return {"theta": theta, "b": b, "sigma_eps2": sigma_eps2,
                "sigma_b2": sigma_b2}

    def gen_data(state, r):
        eps = np.sqrt(state["sigma_eps2"]) * r.standard_normal((n, m))
        x = np.einsum("p,ipm->im", state["theta"], z) \
            + state["b"][:, None] + eps
        return sb.MixedDataset(x, z, w)

    def moments(state, data):
        return [state["theta"][0], state["theta"][0] ** 2,
                state["sigma_eps2"], state["sigma_b2"],
                float(data.responses.mean()),
                float((data.responses ** 2).mean())]

    n_fwd, n_sc = 40_000, 40_000
    forward = np.empty((n_fwd, 6))
    for k in range(n_fwd):
        st = prior_state(rng)
        forward[k] = moments(st, gen_data(st, rng))

    successive = np.empty((n_sc, 6))
    st = prior_state(rng)
    data = gen_data(st, rng)
    for k in range(n_sc):
        st = b1_gibbs_refresh(st, data, cfg, rng)
        data = gen_data(st, rng)
        successive[k] = moments(st, data)

    ok, detail = _geweke_compare(
        forward, successive,
        ["theta", "theta^2", "sigma_eps2", "sigma_b2", "mean X", "mean X^2"],
    )
    assert report("7-geweke-B1", ok, detail)


def test_criterion_7_geweke_b2():
    n, m, p = 4, 3, 1
    rng = np.random.default_rng(72)
    z_design = (2.0 * rng.integers(0, 2, size=(n * m, p)) - 1.0).astype(float)
    gidx = np.repeat(np.arange(n), m)
    spec = DpmSpec(precision_alpha=1.0, location_bound=2.0,
                   scale_lo=0.5, scale_hi=1.5, truncation_level=10)
    cfg = sb.SamplerConfig(
        iterations=10, burn_in=1, theta_prior_var=1.0,
        ig_shape_b=3.0, ig_rate_b=3.0, dpm=spec, adapt=False,
    )
    ws = _Workspace(x=np.zeros(n * m), z=z_design, gidx=gidx, n_groups=n,
                    spec=spec, cfg=cfg)

    def moments(state, x):
        return [state["theta"][0], state["theta"][0] ** 2,
                state["sigma_b2"], state["weights"][0],
                float(state["s_atoms"].mean()),
                float(np.mean(x)), float(np.mean(x**2))]

    names = ["theta", "theta^2", "sigma_b2", "w1", "mean sigma_atom",
             "mean X", "mean X^2"]

    n_draws = 40_000
    forward = np.empty((n_draws, len(names)))
    for k in range(n_draws):
        st = prior_b2_state(ws, rng)
        x = generate_b2_data(st, ws, rng)
        forward[k] = moments(st, x)

    successive = np.empty((n_draws, len(names)))
    st = prior_b2_state(ws, rng)
    ws.x = generate_b2_data(st, ws, rng)
    for k in range(n_draws):
        _sweep(st, ws, rng, None)
        ws.x = generate_b2_data(st, ws, rng)
        successive[k] = moments(st, ws.x)

    ok, detail = _geweke_compare(forward, successive, names)
    assert report("7-geweke-B2", ok, detail)


def test_criterion_7_bitwise_reproducibility():
    rng = np.random.default_rng(73)
    data = sb.generate_mixed(20, 5, THETA0, 1.0, "E4", rng)
    cfg = sb.SamplerConfig(iterations=1500, burn_in=500, seed=9)
    a = sb.fit_b2_mixed(data, cfg)
    b = sb.fit_b2_mixed(data, cfg)
    c = sb.fit_b1_mixed(data, cfg)
    d = sb.fit_b1_mixed(data, cfg)
    ok = (np.array_equal(a.theta, b.theta)
          and np.array_equal(c.theta, d.theta))
    assert report("7-determinism", ok,
                  "fixed-seed chains bitwise identical for B1 and B2")


def test_criterion_7_truncation_insensitivity():
    rng = np.random.default_rng(74)
    data = sb.generate_mixed(20, 5, THETA0, 1.0, "E4", rng)
    means, tols = [], []
    for T in (30, 60):
        cfg = sb.SamplerConfig(
            iterations=8000, burn_in=3000, seed=12,
            dpm=DpmSpec(truncation_level=T),
        )
        chain = sb.fit_b2_mixed(data, cfg)
        means.append(chain.posterior_mean())
        tols.append(chain.theta.std(axis=0) / np.sqrt(chain.ess))
    gap = np.abs(means[0] - means[1])
    tol = 4.0 * np.hypot(tols[0], tols[1])
    ok = bool(np.all(gap < tol))
    assert report(
        "7-truncation", ok,
        f"T=30 vs T=60 posterior-mean shift {gap.round(4)} "
        f"< MC tolerance {tol.round(4)}",
    )


# ---------------------------------------------------------------------------
# Criterion 8: frequentist baselines
# ---------------------------------------------------------------------------


def test_criterion_8_baseline_oracles():
    from scipy import optimize

    rng = np.random.default_rng(81)

    # GLS equality at injected variance components
    data = sb.generate_mixed(25, 5, THETA0, 1.0, "E1", rng)
    sigma_eps2, sigma_b2 = 1.3, 0.8
    lam = sigma_b2 / sigma_eps2
    v_inv = np.eye(5) - (lam / (1 + 5 * lam)) * np.ones((5, 5))
    a = np.zeros((2, 2))
    c = np.zeros(2)
    for i in range(data.n):
        zi = data.fixed_covariates[i]
        a += zi @ v_inv @ zi.T
        c += zi @ v_inv @ data.responses[i]
    closed_form = np.linalg.solve(a, c)
    gls_gap = float(np.max(np.abs(
        sb.gls_fixed_effects(data, sigma_eps2, sigma_b2) - closed_form)))

    # OLS against derivative-free SSE minimization
    reg = sb.generate_regression(60, 2, THETA0, "E4", rng)

    def sse(theta):
        r = reg.responses - reg.covariates @ theta
        return r @ r

    res = optimize.minimize(sse, np.zeros(2), method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-14,
                                     "maxiter": 20_000})
    ols_gap = float(np.max(np.abs(sb.ols(reg) - res.x)))

    ok = gls_gap < 1e-8 and ols_gap < 1e-6
    assert report("8", ok,
                  f"GLS gap={gls_gap:.2e} (<1e-8), "
                  f"OLS vs brute-force gap={ols_gap:.2e} (<1e-6)")
