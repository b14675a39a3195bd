"""
Microfundamento de elección discreta: cada hogar consume un solo bien.

Utilidad indirecta del bien i para un hogar con gasto E:

    V_i = ln Omega_i + (1 - eps_i) ln(E/p) - ln(p_i/p) + mu nu_i,   nu_i ~ Gumbel

Con mu = -1/(1-rho) y p el índice de precios ideal (p = E/U), las
probabilidades logit coinciden con las participaciones nhCES. Los pesos del
grid actúan como masas de réplica: entran en el argmax como mu ln w_i.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.special import logsumexp, softmax

from ..core import oracle
from ..core.distributions import draw_in_chunks, gumbel_sample
from ..core.errors import ConfigError

logger = logging.getLogger('Logit')

MAX_SHOCKS_PER_CHUNK = 1 << 21


@dataclass(frozen=True)
class LogitEconomy:
    """Población logit con gasto común ``expenditure`` e índice de precios ``price_index``."""

    goods: object
    rho: float
    expenditure: float
    price_index: float

    def __post_init__(self):
        if self.rho <= 0 or self.rho == 1:
            raise ConfigError(f"rho debe ser > 0 y distinto de 1 (rho={self.rho})")
        if not self.expenditure > 0:
            raise ConfigError(f"El gasto debe ser > 0 (E={self.expenditure})")
        if not self.price_index > 0:
            raise ConfigError(f"El índice de precios debe ser > 0 (p={self.price_index})")

    @property
    def mu(self):
        """Escala de los shocks, mu = -1/(1-rho)."""
        return -1.0 / (1.0 - self.rho)

    @classmethod
    def from_grid(cls, goods, rho, expenditure):
        """Resuelve U con el oráculo y fija p en el índice ideal."""
        log_u = oracle.log_utility_of_expenditure(goods, rho, expenditure)
        price_index = _ideal_price_index_log_u(goods, rho, log_u)
        return cls(goods=goods, rho=rho, expenditure=expenditure, price_index=price_index)


def _ideal_price_index_log_u(goods, rho, log_u):
    a = 1.0 - rho
    terms = (np.log(goods.weight)
             + a * (goods.log_price - goods.log_omega + (goods.epsilon - 1.0) * log_u))
    return math.exp(logsumexp(terms) / a)


def ideal_price_index(goods, rho, u):
    """
    Índice de precios ideal p = [sum_i w_i (p_i/Omega_i U^(eps_i-1))^(1-rho)]^(1/(1-rho)).

    Evaluado en logaritmos; coincide con E(U)/U.

    Args:
        goods (GoodsGrid): Grid de bienes.
        rho (float): Parámetro de sustitución.
        u (float): Utilidad (> 0).

    Returns:
        float: p.
    """
    if not u > 0:
        raise ConfigError(f"La utilidad debe ser > 0 (u={u})")
    return _ideal_price_index_log_u(goods, rho, math.log(u))


def _systematic_log_terms(econ):
    """(1/mu) (V_i sin shock) + ln w_i, es decir el logit ponderado por masa."""
    g = econ.goods
    inv_mu = econ.rho - 1.0
    log_real = math.log(econ.expenditure / econ.price_index)
    relative_price = g.log_price - g.log_omega - math.log(econ.price_index)
    return np.log(g.weight) + inv_mu * ((1.0 - g.epsilon) * log_real - relative_price)


def choice_probabilities(econ):
    """
    Probabilidades de elección analíticas, normalizadas para sumar 1.

    Returns:
        np.ndarray: Pr(i) por bien.
    """
    return softmax(_systematic_log_terms(econ))


def indexed_shares(econ):
    """
    Participaciones nhCES escritas con el índice p (sin normalizar):

        s_i = w_i (Omega_i^(-1) p_i/p)^(1-rho) (E/p)^((eps_i-1)(1-rho))

    Suman 1 cuando p es el índice ideal.
    """
    return np.exp(_systematic_log_terms(econ))


def households_per_chunk(n_goods):
    """Hogares por bloque para que cada bloque tenga como mucho ``MAX_SHOCKS_PER_CHUNK`` shocks Gumbel."""
    return max(1, MAX_SHOCKS_PER_CHUNK // max(1, int(n_goods)))


def simulate_choices(econ, households, seed):
    """
    Simula la elección de ``households`` hogares con shocks Gumbel y devuelve conteos por bien.

    Cada hogar elige argmax_i V_i con V_i sistemática más mu (ln w_i + nu_i).
    Los bloques usan sub-semillas y los conteos se suman en orden.

    Args:
        econ (LogitEconomy): Economía.
        households (int): Número de hogares (>= 1).
        seed (int): Semilla.

    Returns:
        np.ndarray: Conteos enteros por bien.

    Raises:
        ConfigError: Si rho <= 1 (mu <= 0).
    """
    if households < 1:
        raise ConfigError(f"households debe ser >= 1 (households={households})")
    if econ.rho <= 1:
        raise ConfigError("La simulación requiere el caso de sustitutos (mu > 0, rho > 1)")

    n_goods = econ.goods.n_goods
    # V_i / mu con la masa de réplica incluida
    scaled_systematic = _systematic_log_terms(econ)

    def draw(rng, size):
        shocks = gumbel_sample(rng, (size, n_goods))
        return np.argmax(scaled_systematic + shocks, axis=1)

    # Bloques de a lo sumo MAX_SHOCKS_PER_CHUNK shocks, sea cual sea el número de bienes
    chunk_size = households_per_chunk(n_goods)
    choices = draw_in_chunks(seed, households, draw, chunk_size=chunk_size)
    counts = np.bincount(choices, minlength=n_goods)
    logger.debug(f"Simulación logit: {households} hogares, {n_goods} bienes")
    return counts


def share_equivalence_report(econ, households=0, seed=0):
    """
    Tabla de equivalencia: probabilidad analítica, participación nhCES con p y participación del oráculo.

    Args:
        econ (LogitEconomy): Economía.
        households (int): Si > 0 y rho > 1, añade frecuencias simuladas.
        seed (int): Semilla de la simulación.

    Returns:
        dict: table (DataFrame), max_dev_analytic_indexed, max_dev_indexed_oracle.
    """
    analytic = choice_probabilities(econ)
    indexed = indexed_shares(econ)
    oracle_shares = oracle.demand(econ.goods, econ.rho, econ.expenditure).shares

    table = pd.DataFrame({
        'good': np.arange(econ.goods.n_goods),
        'epsilon': econ.goods.epsilon,
        'analytic_probability': analytic,
        'indexed_share': indexed,
        'oracle_share': oracle_shares,
    })
    if households > 0 and econ.rho > 1:
        counts = simulate_choices(econ, households, seed)
        freq = counts / households
        table['simulated_frequency'] = freq
        table['std_error'] = np.sqrt(analytic * (1.0 - analytic) / households)

    report = {
        'table': table,
        'max_dev_analytic_indexed': float(np.max(np.abs(analytic - indexed))),
        'max_dev_indexed_oracle': float(np.max(np.abs(indexed - oracle_shares))),
    }
    logger.info(f"Equivalencia logit: |Pr - s_p| = {report['max_dev_analytic_indexed']:.2e}, "
                f"|s_p - oráculo| = {report['max_dev_indexed_oracle']:.2e}")
    return report
