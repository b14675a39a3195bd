"""
Mapeo cerrado gasto <-> utilidad con eps ~ Gamma(alpha, beta).

Con precios y gustos log-lineales en eps y M = E[(e^nu_p / e^nu_omega)^(1-rho)]:

    ln U = Upsilon/(1-rho) - Psi/(1-rho) * E^(-(1-rho)/alpha)
    Upsilon = 1/beta - (1-rho)(xi_p - xi_omega),    Psi = M^(1/alpha) / beta

De aquí salen eps-bar(E) = (alpha/Psi) E^((1-rho)/alpha), las elasticidades
gasto eta_i = rho + (1-rho) eps_i / eps-bar(E) y las participaciones por hogar.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..core.errors import ConfigError, NumericalError
from ..core import oracle
from ..core.preferences import PreferenceParams, compute_M, sample_goods_grid

logger = logging.getLogger('ClosedForm')

INVARIANCE_TOL = 1e-9


@dataclass(frozen=True)
class ClosedFormEconomy:
    """
    Economía con forma cerrada: parámetros, M, Upsilon y Psi.

    ``from_params`` es el constructor canónico (Upsilon y Psi exactos). El
    constructor directo solo valida positividad y finitud, lo que permite
    perturbar Upsilon en pruebas de sensibilidad.
    """

    params: PreferenceParams
    M: float
    upsilon: float
    psi: float

    def __post_init__(self):
        if not (math.isfinite(self.M) and self.M > 0):
            raise ConfigError(f"M debe ser finito y positivo (M={self.M})")
        if not (math.isfinite(self.psi) and self.psi > 0):
            raise ConfigError(f"Psi debe ser finito y positivo (Psi={self.psi})")
        if not math.isfinite(self.upsilon):
            raise ConfigError("Upsilon debe ser finito")

    @classmethod
    def from_params(cls, params):
        """
        Calcula M, Upsilon y Psi a partir de los parámetros profundos.

        Args:
            params (PreferenceParams): Parámetros de la economía.

        Returns:
            ClosedFormEconomy: Economía validada.
        """
        m_value = compute_M(params.noise, params.rho)
        upsilon = 1.0 / params.beta - (1.0 - params.rho) * (params.xi_p - params.xi_omega)
        psi = m_value ** (1.0 / params.alpha) / params.beta
        if not math.isfinite(psi):
            raise NumericalError(f"Psi no es finito (M={m_value:.6g}, alpha={params.alpha})")
        return cls(params=params, M=m_value, upsilon=upsilon, psi=psi)

    @property
    def rho(self):
        return self.params.rho

    @property
    def alpha(self):
        return self.params.alpha

    @property
    def beta(self):
        return self.params.beta

    @property
    def power(self):
        """Exponente (1 - rho) / alpha."""
        return (1.0 - self.params.rho) / self.params.alpha


def log_utility_of_expenditure(econ, e):
    """
    ln U en función del gasto.

    La condición de validez Upsilon - (1-rho) ln U > 0 se cumple por
    construcción: vale Psi * e^(-(1-rho)/alpha) > 0.

    Args:
        econ (ClosedFormEconomy): Economía.
        e (float): Gasto (> 0).

    Returns:
        float: ln U.
    """
    if not (math.isfinite(e) and e > 0):
        raise ConfigError(f"El gasto debe ser finito y > 0 (e={e})")
    a = 1.0 - econ.rho
    validity = econ.psi * e ** (-econ.power)
    if not validity > 0:
        raise NumericalError(f"Condición de validez violada en e={e:.6g}")
    return econ.upsilon / a - validity / a


def expenditure_of_log_utility(econ, ln_u):
    """
    Inversa del mapeo cerrado: E = [(Upsilon - (1-rho) ln U) / Psi]^(-alpha/(1-rho)).

    Args:
        econ (ClosedFormEconomy): Economía.
        ln_u (float): ln U.

    Returns:
        float: E.

    Raises:
        NumericalError: Si ln U está fuera del rango alcanzable.
    """
    a = 1.0 - econ.rho
    gap = econ.upsilon - a * ln_u
    if not gap > 0:
        raise NumericalError(
            f"Utilidad fuera del rango alcanzable: Upsilon - (1-rho) ln U = {gap:.6g} <= 0"
        )
    return (gap / econ.psi) ** (-econ.alpha / a)


def eps_bar(econ, e):
    """eps-bar(E) = (alpha / Psi) E^((1-rho)/alpha)."""
    return econ.alpha / econ.psi * e ** econ.power


def expenditure_elasticity(econ, eps_i, e):
    """
    Elasticidad gasto del bien i: eta_i = rho + (1-rho) eps_i / eps-bar(E).

    Acepta ``eps_i`` escalar o array.
    """
    return econ.rho + (1.0 - econ.rho) * np.asarray(eps_i, dtype=float) / eps_bar(econ, e)


def elasticity_sign_threshold(econ, eps_i):
    """
    Gasto E*_i a partir del cual la elasticidad del bien i se vuelve negativa.

    Para rho > 1 resuelve eta_i(E) = 0:
    E* = [((rho-1)/rho) (Psi/alpha) eps_i]^(alpha/(1-rho)). Para rho < 1 la
    elasticidad es siempre positiva y devuelve None.

    Args:
        econ (ClosedFormEconomy): Economía.
        eps_i (float): eps del bien (> 0).

    Returns:
        float | None: E* o None.
    """
    if not eps_i > 0:
        raise ConfigError(f"eps_i debe ser > 0 (eps_i={eps_i})")
    if econ.rho < 1:
        return None
    base = (econ.rho - 1.0) / econ.rho * econ.psi / econ.alpha * eps_i
    return base ** (econ.alpha / (1.0 - econ.rho))


def household_share(econ, eps_i, omega_i, p_i, e):
    """
    Densidad de participación en el gasto del bien i para un hogar con gasto e.

    s = exp(eps_i Upsilon) (Omega_i/p_i)^(rho-1) e^(rho-1) exp(-eps_i Psi e^((rho-1)/alpha)).
    Evaluada en logaritmos; acepta arrays.
    """
    eps_i = np.asarray(eps_i, dtype=float)
    r1 = econ.rho - 1.0
    log_s = (eps_i * econ.upsilon + r1 * (np.log(omega_i) - np.log(p_i)) + r1 * np.log(e)
             - eps_i * econ.psi * np.power(e, r1 / econ.alpha))
    return np.exp(log_s)


def household_shares(econ, grid, e):
    """Participaciones cerradas de todos los bienes de un grid (sin multiplicar por los pesos)."""
    return household_share(econ, grid.epsilon, grid.omega, grid.price, e)


def exponential_tilt(econ, e):
    """
    Inclinación (1-rho)(xi_p - xi_omega + ln U) del integrando gamma en el nivel de gasto e.

    Equivale a 1/beta - Psi e^(-(1-rho)/alpha); sirve para dimensionar los
    grids de cuadratura que se comparan contra la forma cerrada.
    """
    return 1.0 / econ.beta - econ.psi * e ** (-econ.power)


def mean_epsilon(econ):
    """Media incondicional de eps: alpha * beta."""
    return econ.alpha * econ.beta


def engel_curve(econ, eps_values, expenditures, omega=1.0, price=1.0):
    """
    Curvas de Engel cerradas: participación y elasticidad por (eps, E).

    Args:
        econ (ClosedFormEconomy): Economía.
        eps_values (iterable): Valores de eps.
        expenditures (iterable): Niveles de gasto.
        omega (float | array): Gusto de cada bien (escalar común o uno por eps).
        price (float | array): Precio de cada bien (escalar común o uno por eps).

    Returns:
        pandas.DataFrame: Columnas expenditure, epsilon, share, elasticity.
    """
    eps_values = np.asarray(eps_values, dtype=float).ravel()
    omega = np.broadcast_to(np.asarray(omega, dtype=float), eps_values.shape)
    price = np.broadcast_to(np.asarray(price, dtype=float), eps_values.shape)
    rows = []
    for e in expenditures:
        for eps, omega_i, p_i in zip(eps_values, omega, price):
            rows.append({
                'expenditure': e,
                'epsilon': eps,
                'share': float(household_share(econ, eps, omega_i, p_i, e)),
                'elasticity': float(expenditure_elasticity(econ, eps, e)),
            })
    return pd.DataFrame(rows)


def beta_invariance_check(params, scale_k, grid_seed, expenditures=(0.5, 2.0), n_goods=200):
    """
    Verifica que escalar beta por k (y xi por 1/k) no cambia cantidades ni participaciones.

    Los grids A y B usan las mismas extracciones gamma, de modo que
    eps_B = k eps_A y precios/gustos coinciden bien a bien.

    Args:
        params (PreferenceParams): Economía original.
        scale_k (float): Factor k > 0.
        grid_seed (int): Semilla común de los grids.
        expenditures (iterable): Niveles de gasto a contrastar.
        n_goods (int): Tamaño de los grids.

    Returns:
        dict: Desvíos máximos por nivel de gasto y bandera ``passed``.
    """
    if not scale_k > 0:
        raise ConfigError(f"scale_k debe ser > 0 (scale_k={scale_k})")
    scaled = params.scaled(scale_k)
    grid_a = sample_goods_grid(params, n_goods, grid_seed)
    grid_b = sample_goods_grid(scaled, n_goods, grid_seed)

    rows = []
    for e in expenditures:
        point_a = oracle.demand(grid_a, params.rho, e)
        point_b = oracle.demand(grid_b, scaled.rho, e)
        rows.append({
            'expenditure': e,
            'max_quantity_dev': float(np.max(np.abs(point_b.quantities / point_a.quantities - 1.0))),
            'max_share_dev': float(np.max(np.abs(point_b.shares / point_a.shares - 1.0))),
            'log_utility_a': point_a.log_utility,
            'log_utility_b': point_b.log_utility,
        })

    max_dev = max(max(r['max_quantity_dev'], r['max_share_dev']) for r in rows)
    passed = max_dev < INVARIANCE_TOL
    if passed:
        logger.info(f"Invariancia a beta (k={scale_k}): desvío máximo {max_dev:.3e}")
    else:
        logger.warning(f"Invariancia a beta FALLIDA (k={scale_k}): desvío máximo {max_dev:.3e}")
    return {'scale_k': scale_k, 'max_deviation': max_dev, 'passed': passed, 'by_expenditure': rows}
