import math

import numpy as np
import pytest
from scipy import integrate, special, stats

from src.core.distributions import (
    AmorosoParams,
    amoroso_cdf,
    amoroso_logpdf,
    amoroso_mean,
    amoroso_moment,
    amoroso_pdf,
    amoroso_ppf,
    amoroso_sample,
    draw_in_chunks,
    gamma_pdf,
    gamma_ratio_approx,
    gumbel_sample,
    make_rng,
    special_case_reduction,
    sub_seeds,
)
from src.core.errors import ConfigError, NumericalError

PARAM_SETS = [
    (1.0, 1.0, 1.0),
    (1.0, 2.0, 1.0),
    (1.0, 1.0, 2.0),
    (1.0, 1.0, -2.0),
    (1.0, 2.0, -1.5),
    (0.5, 10.0, -0.25),
]


class TestAmorosoDensity:
    """Densidad, función de distribución y cuantiles de Amoroso."""

    @pytest.mark.parametrize("k, m, n", PARAM_SETS)
    def test_density_integrates_to_one(self, k, m, n):
        p = AmorosoParams(k=k, m=m, n=n)
        edges = [0.0, *amoroso_ppf(p, [1e-3, 0.5, 0.999]), np.inf]
        total = sum(
            integrate.quad(lambda x: amoroso_pdf(p, x), a, b, epsabs=1e-12, epsrel=1e-10, limit=400)[0]
            for a, b in zip(edges[:-1], edges[1:])
        )
        assert total == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("m", [0.7, 1.0, 3.5])
    def test_reduces_to_gamma(self, m):
        p = AmorosoParams(k=2.0, m=m, n=1.0)
        x = np.linspace(0.1, 12.0, 40)
        np.testing.assert_allclose(amoroso_pdf(p, x), gamma_pdf(x, m, 2.0), rtol=1e-12)

    def test_weibull_matches_scipy(self):
        p = AmorosoParams(k=1.5, m=1.0, n=2.5)
        x = np.linspace(0.05, 4.0, 25)
        np.testing.assert_allclose(amoroso_pdf(p, x), stats.weibull_min.pdf(x, 2.5, scale=1.5), rtol=1e-12)

    def test_below_location_has_zero_density(self):
        p = AmorosoParams(k=1.0, m=2.0, n=1.0, l=1.0)
        assert amoroso_logpdf(p, 0.5) == -np.inf
        assert amoroso_pdf(p, np.array([0.0, 0.9])).tolist() == [0.0, 0.0]

    def test_value_at_location(self):
        assert amoroso_pdf(AmorosoParams(k=1.0, m=1.0, n=1.0), 0.0) == pytest.approx(1.0)
        assert amoroso_logpdf(AmorosoParams(k=1.0, m=0.5, n=1.0), 0.0) == np.inf

    @pytest.mark.parametrize("k, m, n", PARAM_SETS)
    def test_ppf_inverts_cdf(self, k, m, n):
        p = AmorosoParams(k=k, m=m, n=n)
        q = np.array([0.01, 0.25, 0.5, 0.75, 0.99])
        np.testing.assert_allclose(amoroso_cdf(p, amoroso_ppf(p, q)), q, rtol=1e-9)

    def test_cdf_matches_integrated_density(self):
        p = AmorosoParams(k=1.0, m=2.0, n=-1.5)
        partial, _ = integrate.quad(lambda x: amoroso_pdf(p, x), 0.0, 1.3, epsabs=1e-13)
        assert amoroso_cdf(p, 1.3) == pytest.approx(partial, abs=1e-9)


class TestAmorosoParams:

    @pytest.mark.parametrize("k, m, n", [(0.0, 1.0, 1.0), (1.0, -1.0, 1.0), (1.0, 1.0, 0.0), (math.nan, 1.0, 1.0)])
    def test_invalid(self, k, m, n):
        with pytest.raises(ConfigError):
            AmorosoParams(k=k, m=m, n=n)

    def test_from_dict_requires_fields(self):
        with pytest.raises(ConfigError):
            AmorosoParams.from_dict({'k': 1.0, 'm': 2.0})

    @pytest.mark.parametrize("data", [{'k': 'x', 'm': 2.0, 'n': 1.0}, {'k': 1.0, 'm': None, 'n': 1.0}, [1, 2, 3]])
    def test_from_dict_rejects_non_numeric(self, data):
        with pytest.raises(ConfigError):
            AmorosoParams.from_dict(data)

    def test_dict_and_scale(self):
        p = AmorosoParams.from_dict({'k': 1.0, 'm': 2.0, 'n': -1.0})
        assert p.to_dict() == {'k': 1.0, 'm': 2.0, 'n': -1.0, 'l': 0.0}
        assert p.with_scale(3.0).k == 3.0

    @pytest.mark.parametrize("m, n, expected", [
        (1.0, 1.0, 'exponential'),
        (2.5, 1.0, 'gamma'),
        (1.0, 3.0, 'weibull'),
        (1.0, -2.0, 'frechet'),
        (2.0, -2.0, None),
    ])
    def test_special_cases(self, m, n, expected):
        assert special_case_reduction(AmorosoParams(k=1.0, m=m, n=n)) == expected

    def test_shifted_location_is_not_classified(self):
        assert special_case_reduction(AmorosoParams(k=1.0, m=1.0, n=1.0, l=0.5)) is None


class TestMoments:

    def test_mean_formula(self):
        p = AmorosoParams(k=2.0, m=3.0, n=-1.0)
        assert amoroso_mean(p) == pytest.approx(2.0 * special.gamma(2.0) / special.gamma(3.0))

    def test_missing_moment(self):
        with pytest.raises(NumericalError):
            amoroso_moment(AmorosoParams(k=1.0, m=1.0, n=-1.0), 1.0)

    def test_moment_overflow(self):
        with pytest.raises(NumericalError):
            amoroso_moment(AmorosoParams(k=1e307, m=1000.0, n=0.5), 1.0)

    def test_location_shifts_mean(self):
        base = AmorosoParams(k=1.0, m=2.0, n=1.0)
        shifted = AmorosoParams(k=1.0, m=2.0, n=1.0, l=0.5)
        assert amoroso_mean(shifted) == pytest.approx(amoroso_mean(base) + 0.5)

    def test_sample_mean_within_four_standard_errors(self):
        p = AmorosoParams(k=1.0, m=10.0, n=-0.25)
        draws = amoroso_sample(p, 200_000, seed=42)
        se = math.sqrt(amoroso_moment(p, 2.0) - amoroso_mean(p) ** 2) / math.sqrt(draws.size)
        assert abs(draws.mean() - amoroso_mean(p)) < 4 * se
        assert np.all(draws > 0)

    def test_sample_follows_cdf(self):
        p = AmorosoParams(k=1.0, m=2.0, n=-0.5, l=0.0)
        draws = amoroso_sample(p, 100_000, seed=8)
        result = stats.kstest(draws, lambda x: amoroso_cdf(p, x))
        assert result.pvalue > 0.01

    def test_sample_requires_count(self):
        with pytest.raises(ConfigError):
            amoroso_sample(AmorosoParams(k=1.0, m=1.0, n=1.0), 0, seed=1)

    @pytest.mark.parametrize("m, s", [(50.0, -1.0), (50.0, 0.5), (200.0, -2.0)])
    def test_gamma_ratio_approx_large_m(self, m, s):
        exact, approx = gamma_ratio_approx(m, s)
        assert abs(approx / exact - 1.0) < 0.03

    def test_gamma_ratio_invalid(self):
        with pytest.raises(ConfigError):
            gamma_ratio_approx(1.0, -1.0)


class TestRandomness:
    """Semillas, bloques y muestreo Gumbel."""

    def test_sub_seeds_are_reproducible(self):
        a = [rng.random() for rng in sub_seeds(9, 3)]
        b = [rng.random() for rng in sub_seeds(9, 3)]
        assert a == b
        assert len(set(a)) == 3

    def test_chunking_is_deterministic(self):
        draw = lambda rng, size: rng.random(size)  # noqa: E731
        a = draw_in_chunks(5, 1000, draw, chunk_size=128)
        b = draw_in_chunks(5, 1000, draw, chunk_size=128)
        assert a.shape == (1000,)
        np.testing.assert_array_equal(a, b)

    def test_single_chunk_when_small(self):
        draw = lambda rng, size: rng.random(size)  # noqa: E731
        assert draw_in_chunks(5, 10, draw).shape == (10,)

    def test_gumbel_mean_is_euler_mascheroni(self):
        sample = gumbel_sample(make_rng(3), 1_000_000)
        se = math.pi / math.sqrt(6.0) / 1000.0
        assert abs(sample.mean() - np.euler_gamma) < 4 * se
