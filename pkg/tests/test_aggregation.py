import logging
import math

import numpy as np
import pytest
from scipy import integrate

from src.core.distributions import AmorosoParams, gamma_pdf
from src.core.errors import ConfigError, NumericalError
from src.core.preferences import NoiseSpec, PreferenceParams, good_characteristics
from src.models import aggregation
from src.models.aggregation import AggregateEconomy
from src.models.closed_form import ClosedFormEconomy

# (rho, alpha, xi_p, m, k)
REGIMES = [(2.0, 1.0, 0.0, 2.0, 1.0), (0.5, 1.0, 0.3, 3.0, 1.0)]


def build(rho, alpha, xi_p, m, k):
    econ = ClosedFormEconomy.from_params(PreferenceParams(rho=rho, alpha=alpha, xi_p=xi_p))
    return AggregateEconomy.from_params(econ, k=k, m=m)


class TestAggregateEconomy:
    """Acoplamiento n = (rho-1)/alpha y existencia de la media."""

    def test_coupling_is_enforced(self):
        econ = ClosedFormEconomy.from_params(PreferenceParams(rho=2.0, alpha=1.0))
        with pytest.raises(ConfigError):
            AggregateEconomy(econ=econ, exp_dist=AmorosoParams(k=1.0, m=2.0, n=0.5))

    def test_location_must_be_zero(self):
        econ = ClosedFormEconomy.from_params(PreferenceParams(rho=2.0, alpha=1.0))
        with pytest.raises(ConfigError):
            AggregateEconomy(econ=econ, exp_dist=AmorosoParams(k=1.0, m=2.0, n=1.0, l=0.1))

    def test_from_params_sets_shape(self):
        agg = build(0.5, 2.0, 0.0, 3.0, 1.5)
        assert agg.exp_dist.n == pytest.approx(-0.25)
        assert agg.k == 1.5
        assert agg.m == 3.0

    def test_mean_exists_boundary(self):
        assert build(0.5, 1.0, 0.0, 3.0, 1.0).mean_exists
        fat = build(0.5, 1.0, 0.0, 1.5, 1.0)
        assert not fat.mean_exists
        with pytest.raises(NumericalError):
            aggregation.mean_expenditure(fat)
        with pytest.raises(NumericalError):
            aggregation.aggregate_share_mean_form(fat, 1.0, 1.0, 1.0)

    def test_exact_share_still_defined_without_mean(self):
        fat = build(0.5, 1.0, 0.0, 1.5, 1.0)
        assert np.isfinite(aggregation.aggregate_share(fat, 1.0, 1.0, 1.0))

    @pytest.mark.parametrize("rho, m", [(2.0, 2.0), (0.5, 3.0)])
    def test_k_for_mean(self, rho, m):
        econ = ClosedFormEconomy.from_params(PreferenceParams(rho=rho, alpha=1.0))
        k = aggregation.k_for_mean(econ, m, 2.0)
        agg = AggregateEconomy.from_params(econ, k=k, m=m)
        assert aggregation.mean_expenditure(agg) == pytest.approx(2.0, rel=1e-12)

    def test_k_for_mean_without_mean(self):
        econ = ClosedFormEconomy.from_params(PreferenceParams(rho=0.5, alpha=1.0))
        with pytest.raises(NumericalError):
            aggregation.k_for_mean(econ, 1.5, 1.0)


class TestExactShare:
    """Forma cerrada de la participación agregada contra cuadratura e identidades."""

    def test_neutral_good(self):
        agg = build(2.0, 1.0, 0.0, 2.0, 1.0)
        # eps = 0: la participación es E[E_h^(rho-1)] = k^(rho-1) Gamma(m+alpha)/Gamma(m)
        assert aggregation.aggregate_share(agg, 0.0, 1.0, 1.0) == pytest.approx(2.0, rel=1e-14)

    @pytest.mark.parametrize("regime", REGIMES)
    @pytest.mark.parametrize("eps", [0.25, 1.0, 4.0])
    def test_matches_quadrature(self, regime, eps):
        agg = build(*regime)
        price = math.exp(regime[2] * eps)
        exact = aggregation.aggregate_share(agg, eps, 1.0, price)
        quad = aggregation.quadrature_aggregate_share(agg, eps, 1.0, price)
        assert quad == pytest.approx(exact, rel=1e-8)

    @pytest.mark.parametrize("regime", REGIMES)
    def test_mean_form_identity(self, regime):
        agg = build(*regime)
        eps = np.array([0.25, 0.5, 1.0, 2.0, 4.0])
        np.testing.assert_allclose(
            aggregation.aggregate_share_mean_form(agg, eps, 1.0, 1.0),
            aggregation.aggregate_share(agg, eps, 1.0, 1.0),
            rtol=1e-12,
        )

    @pytest.mark.parametrize("regime", REGIMES)
    def test_shares_add_up_over_goods(self, regime):
        rho, alpha, xi_p, _, _ = regime
        agg = build(*regime)

        def integrand(eps):
            return gamma_pdf(eps, alpha) * float(aggregation.aggregate_share(agg, eps, 1.0, math.exp(xi_p * eps)))

        total, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=400)
        assert total == pytest.approx(1.0, abs=1e-7)

    def test_shares_add_up_with_price_noise(self):
        pref = PreferenceParams(rho=2.0, alpha=1.0, xi_p=0.2, noise=NoiseSpec.degenerate(nu_p=0.5))
        agg = AggregateEconomy.from_params(ClosedFormEconomy.from_params(pref), k=1.0, m=2.0)

        def integrand(eps):
            omega, price = good_characteristics(pref, eps)
            return gamma_pdf(eps, 1.0) * float(aggregation.aggregate_share(agg, eps, omega, price))

        total, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=400)
        assert total == pytest.approx(1.0, abs=1e-7)
        assert good_characteristics(pref, 1.0)[1] == pytest.approx(math.exp(0.7))

    def test_expenditure_weighted_differs_from_canonical(self):
        agg = build(2.0, 1.0, 0.0, 2.0, 1.0)
        canonical = aggregation.aggregate_share(agg, 2.0, 1.0, 1.0)
        weighted = aggregation.expenditure_weighted_share(agg, 2.0, 1.0, 1.0)
        assert weighted > 0
        assert weighted != pytest.approx(canonical, rel=1e-3)


class TestApproximation:

    def test_exact_when_rho_is_two(self):
        agg = build(2.0, 1.0, 0.0, 50.0, 1.0)
        _, _, rel_dev = aggregation.approx_deviation(agg, np.array([0.5, 1.0, 2.0]), 1.0, 1.0)
        assert np.max(np.abs(rel_dev)) < 0.01

    def test_large_deviation_is_logged(self, caplog):
        agg = build(0.5, 2.0, 0.0, 50.0, 1.0)
        with caplog.at_level(logging.WARNING, logger='Aggregation'):
            _, _, rel_dev = aggregation.approx_deviation(agg, 1.0, 1.0, 1.0)
        assert abs(rel_dev) > 0.01
        assert any('aproximación' in r.getMessage() for r in caplog.records)

    def test_improves_with_m(self):
        small = build(0.5, 2.0, 0.0, 10.0, 1.0)
        large = build(0.5, 2.0, 0.0, 200.0, 1.0)
        dev_small = abs(aggregation.approx_deviation(small, 1.0, 1.0, 1.0)[2])
        dev_large = abs(aggregation.approx_deviation(large, 1.0, 1.0, 1.0)[2])
        assert dev_large < dev_small


class TestMonteCarlo:
    """Estimación por simulación de hogares."""

    @pytest.fixture
    def agg(self):
        return build(2.0, 1.0, 0.0, 2.0, 1.0)

    @pytest.mark.parametrize("eps", [0.5, 1.0, 2.0])
    def test_within_four_standard_errors(self, agg, eps):
        mean, se = aggregation.mc_aggregate_share(agg, eps, 1.0, 1.0, draws=1_000_000, seed=17)
        assert abs(mean - aggregation.aggregate_share(agg, eps, 1.0, 1.0)) < 4 * se

    def test_standard_error_shrinks(self, agg):
        _, se_small = aggregation.mc_aggregate_share(agg, 1.0, 1.0, 1.0, draws=20_000, seed=1)
        _, se_large = aggregation.mc_aggregate_share(agg, 1.0, 1.0, 1.0, draws=80_000, seed=2)
        assert se_large / se_small == pytest.approx(0.5, rel=0.1)

    def test_deterministic(self, agg):
        a = aggregation.mc_aggregate_share(agg, 1.0, 1.0, 1.0, draws=5000, seed=3)
        b = aggregation.mc_aggregate_share(agg, 1.0, 1.0, 1.0, draws=5000, seed=3)
        assert a == b

    def test_minimum_draws(self, agg):
        with pytest.raises(ConfigError):
            aggregation.mc_aggregate_share(agg, 1.0, 1.0, 1.0, draws=999, seed=0)

    def test_expenditure_weighted_estimator(self, agg):
        exact = aggregation.expenditure_weighted_share(agg, 1.0, 1.0, 1.0)
        simulated = aggregation.mc_expenditure_weighted_share(agg, 1.0, 1.0, 1.0, draws=400_000, seed=5)
        assert simulated == pytest.approx(exact, rel=1e-2)


class TestInequalityEffect:
    """Dispersión de gastos con la media fija."""

    @pytest.fixture
    def econ(self):
        return ClosedFormEconomy.from_params(PreferenceParams(rho=2.0, alpha=1.0))

    def test_mean_is_held_fixed(self, econ):
        for m in (2.0, 5.0, 20.0):
            agg = AggregateEconomy.from_params(econ, k=aggregation.k_for_mean(econ, m, 1.5), m=m)
            assert aggregation.mean_expenditure(agg) == pytest.approx(1.5, rel=1e-12)

    @pytest.mark.parametrize("eps", [0.5, 1.0, 2.0])
    def test_share_changes_with_m(self, econ, eps):
        shares = aggregation.shares_at_fixed_mean(econ, eps, 1.0, 1.0, 1.0, (2.0, 5.0, 20.0))
        assert np.all(np.abs(np.diff(shares)) / shares[:-1] > 1e-3)

    def test_closed_form_at_rho_two(self, econ):
        # rho = 2, alpha = 1: s_i = exp(eps Upsilon) E-bar / (1 + eps Psi E-bar / m)^(m+1)
        eps, m = 1.0, 4.0
        share = aggregation.shares_at_fixed_mean(econ, eps, 1.0, 1.0, 1.0, (m,))[0]
        expected = math.exp(eps * econ.upsilon) / (1.0 + eps * econ.psi / m) ** (m + 1.0)
        assert share == pytest.approx(expected, rel=1e-12)

    def test_neutral_good_unaffected(self, econ):
        shares = aggregation.shares_at_fixed_mean(econ, 0.0, 1.0, 1.0, 1.0, (2.0, 5.0, 20.0))
        np.testing.assert_allclose(shares, shares[0], rtol=1e-12)
