import math

import numpy as np
import pytest
from scipy import optimize

from src.core import oracle
from src.core.errors import ConfigError, NumericalError
from src.core.preferences import GoodsGrid, PreferenceParams, sample_goods_grid


class TestExpenditureFunction:
    """Función de gasto e inversión E -> U sobre grids pequeños con solución conocida."""

    @pytest.fixture
    def homothetic(self):
        return GoodsGrid.from_arrays([1.0, 1.0, 1.0], price=[1.0, 2.0, 4.0], omega=[1.0, 1.0, 2.0])

    @pytest.fixture
    def two_goods(self):
        return GoodsGrid.from_arrays([0.5, 1.5])

    @pytest.mark.parametrize("rho", [0.5, 2.0])
    def test_homothetic_expenditure_is_linear_in_utility(self, homothetic, rho):
        a = 1.0 - rho
        index = np.dot(homothetic.weight, (homothetic.price / homothetic.omega) ** a) ** (1.0 / a)
        assert oracle.expenditure_of_utility(homothetic, rho, 2.0) == pytest.approx(2.0 * index, rel=1e-13)
        assert oracle.utility_of_expenditure(homothetic, rho, 3.0) == pytest.approx(3.0 / index, rel=1e-12)

    def test_two_goods_closed_expression(self, two_goods):
        u, rho = 1.7, 0.5
        expected = (0.5 * (u ** 0.25 + u ** 0.75)) ** 2.0
        assert oracle.expenditure_of_utility(two_goods, rho, u) == pytest.approx(expected, rel=1e-13)

    @pytest.mark.parametrize("rho", [0.3, 0.5, 2.0, 5.0])
    @pytest.mark.parametrize("e", [0.01, 1.0, 250.0])
    def test_inversion_roundtrip(self, two_goods, rho, e):
        u = oracle.utility_of_expenditure(two_goods, rho, e)
        assert oracle.expenditure_of_utility(two_goods, rho, u) == pytest.approx(e, rel=1e-12)

    @pytest.mark.parametrize("e", [1.0, 2.0, 0.3])
    def test_three_goods_against_bisection(self, e):
        eps = np.array([0.0, 1.0, 2.0])
        grid = GoodsGrid.from_arrays(eps)

        def excess(log_u):
            return np.mean(np.exp(0.5 * eps * log_u)) ** 2.0 - e

        log_u = optimize.bisect(excess, -30.0, 30.0, xtol=1e-14, maxiter=500)
        assert oracle.utility_of_expenditure(grid, 0.5, e) == pytest.approx(math.exp(log_u), rel=1e-10)
        if e == 1.0:
            assert oracle.utility_of_expenditure(grid, 0.5, e) == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("rho", [0.5, 2.0])
    def test_expenditure_strictly_increasing_in_utility(self, rho):
        grid = sample_goods_grid(PreferenceParams(rho=rho, alpha=2.0, xi_p=0.3), 200, seed=4)
        expenditures = [oracle.expenditure_of_utility(grid, rho, u) for u in np.logspace(-3, 3, 61)]
        assert np.all(np.diff(expenditures) > 0)

    def test_utility_must_be_positive(self, two_goods):
        with pytest.raises(ConfigError):
            oracle.expenditure_of_utility(two_goods, 0.5, 0.0)

    def test_overflow_is_reported(self):
        grid = GoodsGrid.from_arrays([500.0])
        with pytest.raises(NumericalError):
            oracle.expenditure_of_utility(grid, 0.5, 1e300)

    def test_inversion_fails_without_utility_dependence(self):
        grid = GoodsGrid.from_arrays([0.0], price=[2.0])
        with pytest.raises(NumericalError):
            oracle.log_utility_of_expenditure(grid, 0.5, 3.0)


class TestDemand:
    """Demanda hicksiana, identidad presupuestaria y elasticidades por diferencias finitas."""

    @pytest.fixture
    def grid(self):
        params = PreferenceParams(rho=0.5, alpha=2.0, xi_p=0.3)
        return sample_goods_grid(params, 300, seed=11)

    @pytest.mark.parametrize("e", [0.25, 1.0, 4.0])
    def test_budget_identity(self, grid, e):
        point = oracle.demand(grid, 0.5, e)
        assert point.shares.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.dot(grid.weight, grid.price * point.quantities) == pytest.approx(e, rel=1e-10)
        np.testing.assert_allclose(point.shares, grid.weight * grid.price * point.quantities / e, rtol=1e-9)

    def test_eps_bar_is_share_weighted_mean(self, grid):
        point = oracle.demand(grid, 0.5, 2.0)
        assert point.eps_bar == pytest.approx(np.dot(point.shares, grid.epsilon), rel=1e-14)

    def test_extreme_epsilon_stays_finite(self):
        grid = GoodsGrid.from_arrays(np.linspace(0.0, 60.0, 40))
        point = oracle.demand(grid, 0.5, 1e3)
        assert np.all(np.isfinite(point.shares))
        assert point.shares.sum() == pytest.approx(1.0, abs=1e-12)

    def test_elasticity_of_homothetic_goods_is_one(self):
        grid = GoodsGrid.from_arrays([1.0, 1.0], price=[1.0, 3.0])
        eta = oracle.expenditure_elasticity_fd(grid, 2.0, 1.5)
        np.testing.assert_allclose(eta, 1.0, atol=1e-7)

    @pytest.mark.parametrize("e", [0.5, 2.0])
    def test_elasticity_matches_grid_formula(self, grid, e):
        rho = 0.5
        point = oracle.demand(grid, rho, e)
        eta = oracle.expenditure_elasticity_fd(grid, rho, e)
        np.testing.assert_allclose(eta, rho + (1.0 - rho) * grid.epsilon / point.eps_bar, atol=1e-6)
        assert np.dot(point.shares, eta) == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("step", [0.0, 1e-3, -1e-6])
    def test_rel_step_range(self, grid, step):
        with pytest.raises(ConfigError):
            oracle.expenditure_elasticity_fd(grid, 0.5, 1.0, rel_step=step)

    def test_price_index_and_marginal_utility(self, grid):
        e, h = 1.3, 1e-5
        point = oracle.demand(grid, 0.5, e)
        assert oracle.ideal_price_index_of_expenditure(grid, 0.5, e) == pytest.approx(e / point.utility, rel=1e-12)

        up = oracle.utility_of_expenditure(grid, 0.5, e * (1 + h))
        down = oracle.utility_of_expenditure(grid, 0.5, e * (1 - h))
        fd = (up - down) / (2 * h * e)
        assert oracle.marginal_utility_of_expenditure(grid, 0.5, e) == pytest.approx(fd, rel=1e-6)

    def test_log_expenditure_is_consistent(self, grid):
        log_u = oracle.log_utility_of_expenditure(grid, 0.5, 2.0)
        assert oracle.log_expenditure(grid, 0.5, log_u) == pytest.approx(math.log(2.0), abs=1e-12)
