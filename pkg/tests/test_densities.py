"""Divergence functionals, quadrature, and symmetrization."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_kl, central_difference

import semibvm as sb
from semibvm.densities import LOG_SQRT_2PI, Density
from semibvm.exceptions import DivergenceInfiniteError, ImpreciseIntegrationError
from semibvm.quadrature import QuadratureScheme

PHI = sb.standard_normal_density()


def shifted_normal(mu, sigma=1.0):
    return Density(
        support_halfwidth=np.inf,
        log_density=lambda x: -0.5 * ((x - mu) / sigma) ** 2
        - np.log(sigma) - LOG_SQRT_2PI,
        score=lambda x: (x - mu) / sigma**2,
        sampler=lambda rng, size: mu + sigma * rng.standard_normal(size),
        quad_radius=abs(mu) + 10.0 * sigma,
    )


def uniform_density(halfwidth):
    return sb.SymmetricDensity(
        support_halfwidth=halfwidth,
        log_density=lambda x: np.full(np.shape(x), -np.log(2.0 * halfwidth)),
        score=lambda x: np.zeros(np.shape(x)),
        sampler=lambda rng, size: rng.uniform(-halfwidth, halfwidth, size),
    )


class TestQuadrature:
    def test_trapezoid_weights_sum_to_interval_length(self):
        scheme = QuadratureScheme(kind="trapezoid", node_count=97)
        x, w = scheme.interval_nodes(-2.0, 5.0)
        assert w.min() > 0
        assert np.isclose(w.sum(), 7.0)

    def test_gauss_legendre_exact_for_polynomials(self):
        # n nodes are exact up to degree 2n-1 on the mapped interval
        scheme = QuadratureScheme(kind="gauss-legendre", node_count=4)
        x, w = scheme.interval_nodes(-1.0, 1.0)
        for degree in range(8):
            exact = (1 - (-1) ** (degree + 1)) / (degree + 1)
            assert np.isclose(w @ x**degree, exact, atol=1e-13)

    def test_gauss_legendre_weights_positive(self):
        x, w = QuadratureScheme(node_count=64).interval_nodes(0.0, 3.0)
        assert np.all(w > 0)

    def test_nonconvergence_signals_imprecise_integration(self):
        # A discontinuity off any breakpoint defeats node doubling.
        from semibvm.quadrature import integrate_adaptive

        with pytest.raises(ImpreciseIntegrationError):
            integrate_adaptive(
                lambda x: (x > 0.3141).astype(float),
                QuadratureScheme(node_count=16),
                halfwidth=1.0,
            )


class TestHellinger:
    def test_identical_densities(self):
        assert sb.hellinger_sq(PHI, PHI) == pytest.approx(0.0, abs=1e-12)

    def test_normal_vs_uniform_matches_brute_force(self):
        # dense-grid trapezoid, split at the uniform's support edges where
        # the integrand jumps
        def phi_pdf(x):
            return np.exp(-0.5 * x * x) / np.sqrt(2 * np.pi)

        from conftest import dense_trapezoid

        grid_oracle = (
            dense_trapezoid(phi_pdf, -10.0, -0.5)
            + dense_trapezoid(lambda x: (np.sqrt(phi_pdf(x)) - 1.0) ** 2,
                              -0.5, 0.5)
            + dense_trapezoid(phi_pdf, 0.5, 10.0)
        )
        value = sb.hellinger_sq(PHI, uniform_density(0.5))
        assert value == pytest.approx(grid_oracle, abs=1e-8)

    def test_gaussian_shift_closed_form(self):
        # h^2(N(0,1), N(y,1)) = 2(1 - exp(-y^2/8))
        value = sb.hellinger_sq(PHI, shifted_normal(1.0))
        assert value == pytest.approx(2.0 * (1.0 - np.exp(-1.0 / 8.0)),
                                      abs=1e-9)

    @given(st.floats(min_value=-3.0, max_value=3.0))
    @settings(max_examples=25, deadline=None)
    def test_gaussian_shift_closed_form_property(self, y):
        value = sb.hellinger_sq(PHI, shifted_normal(y))
        assert value == pytest.approx(2.0 * (1.0 - np.exp(-y * y / 8.0)),
                                      abs=1e-8)

    def test_range(self):
        # disjoint-ish supports push h^2 toward its maximum of 2
        far = shifted_normal(40.0, 0.05)
        assert 0.0 <= sb.hellinger_sq(PHI, far) <= 2.0 + 1e-9


class TestKlMeanAndVariation:
    def test_identical_densities(self):
        k, v = sb.kl_mean_and_variation(PHI, PHI)
        assert k == pytest.approx(0.0, abs=1e-12)
        assert v == pytest.approx(0.0, abs=1e-12)

    def test_gaussian_mean_shift(self):
        k, v = sb.kl_mean_and_variation(PHI, shifted_normal(1.0))
        assert k == pytest.approx(0.5, abs=1e-10)
        assert v == pytest.approx(1.0, abs=1e-9)

    def test_mixture_vs_normal_matches_brute_force(self):
        e4 = sb.make_error_law("E4")
        oracle = brute_kl(
            lambda x: np.exp(e4.logpdf(x)),
            lambda x: np.exp(-0.5 * x * x) / np.sqrt(2 * np.pi),
            -14.0, 14.0,
        )
        k, v = sb.kl_mean_and_variation(e4, PHI)
        assert k == pytest.approx(oracle[0], abs=1e-6)
        assert v == pytest.approx(oracle[1], abs=1e-6)

    def test_nonnegative(self):
        k, _ = sb.kl_mean_and_variation(sb.make_error_law("E5"), PHI)
        assert k >= 0.0

    def test_vanishing_q_signals_divergence_infinite(self):
        with pytest.raises(DivergenceInfiniteError):
            sb.kl_mean_and_variation(PHI, uniform_density(0.5))


class TestTotalVariation:
    def test_hellinger_dominates_quarter_tv_squared(self):
        rng = np.random.default_rng(42)
        for _ in range(12):
            p = shifted_normal(rng.uniform(-2, 2), rng.uniform(0.5, 2.0))
            q = shifted_normal(rng.uniform(-2, 2), rng.uniform(0.5, 2.0))
            h2 = sb.hellinger_sq(p, q)
            dv = sb.total_variation(p, q)
            assert h2 >= dv * dv / 4.0 - 1e-10


class TestSymmetrize:
    def test_symmetric_input_is_fixed_point(self):
        e4 = sb.make_error_law("E4")
        sym = sb.symmetrize(e4)
        x = np.linspace(-6, 6, 101)
        np.testing.assert_allclose(sym.logpdf(x), e4.logpdf(x), atol=1e-12)

    def test_shifted_gaussian_formula(self):
        # symmetrizing N(mu, s^2) gives (phi_s(x-mu) + phi_s(x+mu)) / 2
        mu, s = 1.3, 0.7
        sym = sb.symmetrize(shifted_normal(mu, s))
        x = np.linspace(-4, 4, 41)
        expected = 0.5 * (
            np.exp(-0.5 * ((x - mu) / s) ** 2)
            + np.exp(-0.5 * ((x + mu) / s) ** 2)
        ) / (s * np.sqrt(2 * np.pi))
        np.testing.assert_allclose(sym.pdf(x), expected, atol=1e-12)

    def test_symmetrized_density_contract(self):
        sym = sb.symmetrize(shifted_normal(0.8, 1.2))
        diag = sb.symmetry_diagnostics(sym)
        assert diag["normalization"] < 1e-9
        assert diag["symmetry"] < 1e-11
        assert diag["score_antisymmetry"] < 1e-9
        assert diag["score_vs_fd"] < 1e-6

    def test_sampler_symmetry(self):
        sym = sb.symmetrize(shifted_normal(2.0))
        draws = sym.sample(np.random.default_rng(0), 200_000)
        assert abs(draws.mean()) < 0.02

    def test_hellinger_contraction_on_random_pairs(self):
        # h(pbar, qbar) <= sqrt(2) h(p, q)
        rng = np.random.default_rng(7)
        for _ in range(25):
            p = shifted_normal(rng.uniform(-2, 2), rng.uniform(0.6, 1.6))
            q = shifted_normal(rng.uniform(-2, 2), rng.uniform(0.6, 1.6))
            h_bar = np.sqrt(sb.hellinger_sq(sb.symmetrize(p), sb.symmetrize(q)))
            h = np.sqrt(sb.hellinger_sq(p, q))
            assert h_bar <= np.sqrt(2.0) * h + 1e-8


class TestScoreConsistency:
    @pytest.mark.parametrize("tag", ["E1", "E2", "E4", "E5"])
    def test_score_matches_log_density_derivative(self, tag):
        law = sb.make_error_law(tag)
        x = np.linspace(-5, 5, 81)
        fd = -central_difference(law.logpdf, x)
        np.testing.assert_allclose(law.score_at(x), fd, atol=1e-7, rtol=1e-6)

    def test_second_order_accuracy_of_check(self):
        # the finite-difference comparison error shrinks like step^2
        law = sb.make_error_law("E4")
        x = np.linspace(-3, 3, 31)
        errs = []
        for step in (1e-2, 5e-3, 2.5e-3):
            fd = -(law.logpdf(x + step) - law.logpdf(x - step)) / (2 * step)
            errs.append(np.max(np.abs(fd - law.score_at(x))))
        assert errs[1] < errs[0] / 3.0
        assert errs[2] < errs[1] / 3.0
