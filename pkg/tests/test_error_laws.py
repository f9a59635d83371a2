"""The E1-E5 benchmark laws: densities, scores, samplers."""

import numpy as np
import pytest
from scipy import stats

from conftest import central_difference

import semibvm as sb
from semibvm.error_laws import mixture_parameters
from semibvm.quadrature import QuadratureScheme


def mixture_pdf_oracle(tag):
    """Direct evaluation of the mixture formula (independent of the
    package's mixture machinery)."""
    means, weights = mixture_parameters(tag)

    def pdf(x):
        x = np.asarray(x, float)[..., None]
        return np.sum(
            weights * (stats.norm.pdf(x - means) + stats.norm.pdf(x + means)),
            axis=-1,
        )

    return pdf


class TestDensityValues:
    def test_e1_at_zero(self):
        law = sb.make_error_law("E1")
        assert law.pdf(0.0) == pytest.approx(1.0 / np.sqrt(2 * np.pi),
                                             abs=1e-12)

    @pytest.mark.parametrize("tag", ["E4", "E5"])
    def test_mixture_matches_formula(self, tag):
        law = sb.make_error_law(tag)
        oracle = mixture_pdf_oracle(tag)
        x = np.linspace(-8, 8, 161)
        np.testing.assert_allclose(law.pdf(x), oracle(x), atol=1e-12)

    def test_e4_e5_at_zero(self):
        assert sb.make_error_law("E4").pdf(0.0) == pytest.approx(
            mixture_pdf_oracle("E4")(0.0), abs=1e-10
        )
        assert sb.make_error_law("E5").pdf(0.0) == pytest.approx(
            mixture_pdf_oracle("E5")(0.0), abs=1e-10
        )

    def test_e2_matches_scipy_t(self):
        law = sb.make_error_law("E2")
        x = np.linspace(-20, 20, 81)
        np.testing.assert_allclose(law.logpdf(x), stats.t(df=2).logpdf(x),
                                   atol=1e-12)

    def test_mixture_weights_integrate_to_one(self):
        for tag in ("E4", "E5"):
            _, weights = mixture_parameters(tag)
            assert 2.0 * weights.sum() == pytest.approx(1.0)

    def test_unknown_tag_rejected(self):
        with pytest.raises(ValueError):
            sb.make_error_law("E9")


class TestInvariants:
    @pytest.mark.parametrize("tag", ["E1", "E3", "E4", "E5"])
    def test_symmetric_density_contract(self, tag):
        diag = sb.symmetry_diagnostics(sb.make_error_law(tag))
        assert diag["normalization"] < 1e-9
        assert diag["symmetry"] < 1e-11
        if tag != "E3":
            assert diag["score_vs_fd"] < 1e-6

    def test_e2_contract_heavy_tail_tolerance(self):
        # truncation at the quadrature radius leaves ~2.5e-5 tail mass
        diag = sb.symmetry_diagnostics(
            sb.make_error_law("E2"), QuadratureScheme(node_count=4096)
        )
        assert diag["normalization"] < 1e-4
        assert diag["symmetry"] < 1e-11
        assert diag["score_vs_fd"] < 1e-6

    def test_e3_score_flat_interior(self):
        law = sb.make_error_law("E3")
        x = np.linspace(-2.9, 2.9, 21)
        np.testing.assert_array_equal(law.score_at(x), np.zeros_like(x))

    @pytest.mark.parametrize("tag", ["E1", "E2", "E4", "E5"])
    def test_scores_match_finite_difference(self, tag):
        law = sb.make_error_law(tag)
        x = np.linspace(-6, 6, 121)
        fd = -central_difference(law.logpdf, x)
        np.testing.assert_allclose(law.score_at(x), fd, atol=1e-7, rtol=1e-6)


class TestSamplers:
    def test_e1_sample_variance(self):
        draws = sb.make_error_law("E1").sample(np.random.default_rng(1), 100_000)
        assert draws.var() == pytest.approx(1.0, abs=0.02)

    def test_e3_sample_variance(self):
        draws = sb.make_error_law("E3").sample(np.random.default_rng(2), 100_000)
        assert draws.var() == pytest.approx(3.0, abs=0.06)

    @pytest.mark.parametrize("tag", ["E1", "E2", "E3", "E4", "E5"])
    def test_sample_symmetry(self, tag):
        # mirrored sample indistinguishable at alpha = 0.01
        draws = sb.make_error_law(tag).sample(np.random.default_rng(3), 100_000)
        stat = stats.ks_2samp(draws, -draws)
        assert stat.pvalue > 0.01

    def test_e4_ks_against_numeric_cdf(self):
        law = sb.make_error_law("E4")
        draws = law.sample(np.random.default_rng(4), 100_000)
        # CDF by numeric integration of the density on a dense grid
        grid = np.linspace(-14, 14, 200_001)
        pdf = law.pdf(grid)
        cdf = np.concatenate([[0.0], np.cumsum(
            0.5 * (pdf[1:] + pdf[:-1]) * np.diff(grid))])
        cdf /= cdf[-1]
        stat = stats.kstest(draws, lambda x: np.interp(x, grid, cdf))
        assert stat.statistic < 0.01

    @pytest.mark.parametrize("tag", ["E4", "E5"])
    def test_mixture_sampling_identity(self, tag):
        # draws binned against quadrature bin masses: chi^2 at alpha = 0.01
        law = sb.make_error_law(tag)
        draws = law.sample(np.random.default_rng(8), 100_000)
        edges = np.linspace(-8, 8, 41)
        observed, _ = np.histogram(draws, edges)
        grid = np.linspace(-14, 14, 400_001)
        pdf = law.pdf(grid)
        cdf = np.concatenate([[0.0], np.cumsum(
            0.5 * (pdf[1:] + pdf[:-1]) * np.diff(grid))])
        cdf /= cdf[-1]
        edge_cdf = np.interp(edges, grid, cdf)
        expected = draws.size * np.diff(edge_cdf)
        # fold the tails into the end bins
        expected[0] += draws.size * edge_cdf[0]
        expected[-1] += draws.size * (1 - edge_cdf[-1])
        observed[0] += np.sum(draws < edges[0])
        observed[-1] += np.sum(draws > edges[-1])
        chi2 = np.sum((observed - expected) ** 2 / expected)
        crit = stats.chi2(df=observed.size - 1).ppf(0.99)
        assert chi2 < crit

    def test_sample_mean_near_zero(self):
        for tag in ("E1", "E3", "E4", "E5"):
            draws = sb.make_error_law(tag).sample(np.random.default_rng(6),
                                                  100_000)
            assert abs(draws.mean()) < 4 * draws.std() / np.sqrt(draws.size)

    def test_point_mass_stub(self):
        stub = sb.point_mass_zero()
        np.testing.assert_array_equal(
            stub.sample(np.random.default_rng(0), 10), np.zeros(10)
        )
