"""
Oráculo de fuerza bruta del sistema nhCES implícito sobre un GoodsGrid finito.

Sobre un grid con pesos w_i:

    E(U)^(1-rho) = sum_i w_i (p_i U^eps_i / Omega_i)^(1-rho)
    C_i          = (p_i / E)^(-rho) (Omega_i U^(-eps_i))^(rho-1)
    s_i          = w_i p_i C_i / E

Todas las sumas se evalúan en espacio logarítmico (log-sum-exp con
desplazamiento por el máximo): eps_i * ln U supera 700 con facilidad en las
colas de la gamma. Estos valores son la referencia contra la que se
contrastan todas las fórmulas cerradas.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, NumericalError
from .numerics import expand_bracket, newton_bisection

logger = logging.getLogger('Oracle')

DEFAULT_REL_STEP = 1e-6
SHARE_TOL = 1e-9
MAX_LOG = math.log(np.finfo(float).max)


@dataclass(frozen=True, eq=False)
class DemandPoint:
    """Estado resuelto de un hogar: gasto, utilidad, participaciones, cantidades y eps-bar."""

    expenditure: float
    utility: float
    log_utility: float
    shares: np.ndarray
    quantities: np.ndarray
    eps_bar: float

    def __post_init__(self):
        total = float(np.sum(self.shares))
        if abs(total - 1.0) > SHARE_TOL:
            raise NumericalError(f"Las participaciones no suman 1 (suman {total:.12g})")


def _log_terms(grid, rho, log_u):
    """ln w_i + (1-rho) (ln p_i - ln Omega_i + eps_i ln U)."""
    return np.log(grid.weight) + (1.0 - rho) * (grid.log_price - grid.log_omega + grid.epsilon * log_u)


def log_expenditure(grid, rho, log_u):
    """
    ln E como función de ln U (ecuación del gasto total en espacio logarítmico).

    Args:
        grid (GoodsGrid): Grid de bienes.
        rho (float): Parámetro de sustitución.
        log_u (float): ln U.

    Returns:
        float: ln E.
    """
    return float(logsumexp(_log_terms(grid, rho, log_u)) / (1.0 - rho))


def _log_expenditure_and_eps_bar(grid, rho, log_u):
    terms = _log_terms(grid, rho, log_u)
    lse = logsumexp(terms)
    shares = np.exp(terms - lse)
    return float(lse / (1.0 - rho)), float(np.dot(shares, grid.epsilon)), shares


def expenditure_of_utility(grid, rho, u):
    """
    Gasto mínimo E necesario para alcanzar la utilidad ``u``.

    Args:
        grid (GoodsGrid): Grid de bienes.
        rho (float): Parámetro de sustitución.
        u (float): Utilidad (> 0).

    Returns:
        float: E > 0.

    Raises:
        NumericalError: Si E desborda.
    """
    if not u > 0:
        raise ConfigError(f"La utilidad debe ser > 0 (u={u})")
    log_e = log_expenditure(grid, rho, math.log(u))
    if not log_e < MAX_LOG:
        raise NumericalError(f"Desbordamiento del gasto: ln E = {log_e:.6g} para u = {u:.6g}")
    return math.exp(log_e)


def log_utility_of_expenditure(grid, rho, e):
    """
    Invierte la función de gasto: ln U tal que E(U) = e.

    Se busca un bracket en ln U duplicando el intervalo y se refina con
    Newton-bisección usando d ln E / d ln U = eps-bar.

    Args:
        grid (GoodsGrid): Grid de bienes.
        rho (float): Parámetro de sustitución.
        e (float): Gasto (> 0).

    Returns:
        float: ln U.

    Raises:
        NumericalError: Fallo de bracket en la inversión.
    """
    if not e > 0:
        raise ConfigError(f"El gasto debe ser > 0 (e={e})")
    log_e = math.log(e)

    def residual(x):
        return log_expenditure(grid, rho, x) - log_e

    def residual_and_slope(x):
        value, eps_bar, _ = _log_expenditure_and_eps_bar(grid, rho, x)
        return value - log_e, eps_bar

    lo, hi, _, _ = expand_bracket(residual, x0=0.0, width=1.0)
    log_u = newton_bisection(residual_and_slope, lo, hi)
    logger.debug(f"Inversión E -> U: e={e:.6g}, ln U={log_u:.12g}")
    return log_u


def utility_of_expenditure(grid, rho, e):
    """
    Utilidad U tal que ``expenditure_of_utility(grid, rho, U) == e``.

    Returns:
        float: U > 0.
    """
    log_u = log_utility_of_expenditure(grid, rho, e)
    if not log_u < MAX_LOG:
        raise NumericalError(f"La utilidad desborda: ln U = {log_u:.6g}")
    return math.exp(log_u)


def demand(grid, rho, e):
    """
    Demanda hicksiana en el nivel de gasto ``e``.

    Args:
        grid (GoodsGrid): Grid de bienes.
        rho (float): Parámetro de sustitución.
        e (float): Gasto total.

    Returns:
        DemandPoint: U, participaciones (ponderadas por el grid), cantidades y eps-bar.
    """
    log_u = log_utility_of_expenditure(grid, rho, e)
    _, eps_bar, shares = _log_expenditure_and_eps_bar(grid, rho, log_u)
    log_e = math.log(e)
    log_c = -rho * (grid.log_price - log_e) + (rho - 1.0) * (grid.log_omega - grid.epsilon * log_u)
    quantities = np.exp(log_c)

    budget = float(np.dot(grid.weight, grid.price * quantities))
    if abs(budget / e - 1.0) > SHARE_TOL:
        logger.warning(f"Identidad presupuestaria con desvío {budget / e - 1.0:.3e} en e={e:.6g}")

    utility = math.exp(log_u) if log_u < MAX_LOG else math.inf
    return DemandPoint(expenditure=e, utility=utility, log_utility=log_u,
                       shares=shares, quantities=quantities, eps_bar=eps_bar)


def expenditure_elasticity_fd(grid, rho, e, rel_step=DEFAULT_REL_STEP):
    """
    Elasticidades gasto eta_i = d ln C_i / d ln E por diferencia central.

    Args:
        grid (GoodsGrid): Grid de bienes.
        rho (float): Parámetro de sustitución.
        e (float): Gasto.
        rel_step (float): Paso relativo h, 0 < h < 1e-3.

    Returns:
        np.ndarray: eta_i por bien.
    """
    if not 0.0 < rel_step < 1e-3:
        raise ConfigError(f"rel_step debe estar en (0, 1e-3) (rel_step={rel_step})")
    up = demand(grid, rho, e * (1.0 + rel_step))
    down = demand(grid, rho, e * (1.0 - rel_step))
    return (np.log(up.quantities) - np.log(down.quantities)) / (2.0 * rel_step)


def marginal_utility_of_expenditure(grid, rho, e):
    """dU/dE = U / (E * eps-bar), es decir eps-bar^(-1) / P con P = E/U."""
    point = demand(grid, rho, e)
    return point.utility / (e * point.eps_bar)


def ideal_price_index_of_expenditure(grid, rho, e):
    """Índice de precios ideal P = E / U."""
    log_u = log_utility_of_expenditure(grid, rho, e)
    return math.exp(math.log(e) - log_u)
