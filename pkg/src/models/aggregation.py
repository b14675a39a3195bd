"""
Participaciones agregadas con gastos de los hogares distribuidos Amoroso.

Con n = (rho-1)/alpha y l = 0, integrar la participación del hogar contra la
densidad de Amoroso tiene forma cerrada:

    s_i = exp(eps_i Upsilon) (Omega_i/p_i)^(rho-1) Gamma(m+alpha)/Gamma(m)
          * k^(rho-1) / [1 + eps_i Psi k^((rho-1)/alpha)]^(m+alpha)

Esta es la media no ponderada de s_ih entre hogares (la definición canónica).
La participación ponderada por gasto, sum s_ih E_h / sum E_h, se ofrece aparte
como diagnóstico.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from ..core.distributions import LOG_FLOAT_MAX, AmorosoParams, amoroso_mean, amoroso_sample
from ..core.errors import ConfigError, NumericalError
from .closed_form import household_share

logger = logging.getLogger('Aggregation')

COUPLING_RTOL = 1e-12
MIN_MC_DRAWS = 1000


@dataclass(frozen=True)
class AggregateEconomy:
    """Economía con forma cerrada más la distribución Amoroso de gastos (n = (rho-1)/alpha, l = 0)."""

    econ: object
    exp_dist: AmorosoParams

    def __post_init__(self):
        required_n = (self.econ.rho - 1.0) / self.econ.alpha
        if not math.isclose(self.exp_dist.n, required_n, rel_tol=COUPLING_RTOL, abs_tol=0.0):
            raise ConfigError(
                f"Se requiere n = (rho-1)/alpha = {required_n:.17g} (n={self.exp_dist.n:.17g})"
            )
        if self.exp_dist.l != 0:
            raise ConfigError(f"Se requiere l = 0 (l={self.exp_dist.l})")

    @classmethod
    def from_params(cls, econ, k, m):
        """Construye la economía fijando n = (rho-1)/alpha y l = 0."""
        return cls(econ=econ, exp_dist=AmorosoParams(k=k, m=m, n=(econ.rho - 1.0) / econ.alpha))

    @property
    def k(self):
        return self.exp_dist.k

    @property
    def m(self):
        return self.exp_dist.m

    @property
    def mean_exists(self):
        """La media existe si m + alpha/(rho-1) > 0."""
        return self.m + self.econ.alpha / (self.econ.rho - 1.0) > 0


def mean_expenditure(agg):
    """
    Gasto medio E_h-bar = k Gamma(m + alpha/(rho-1)) / Gamma(m).

    Raises:
        NumericalError: Si la media no existe.
    """
    if not agg.mean_exists:
        raise NumericalError(
            f"La media de gasto no existe: m + alpha/(rho-1) = "
            f"{agg.m + agg.econ.alpha / (agg.econ.rho - 1.0):.6g} <= 0"
        )
    return amoroso_mean(agg.exp_dist)


def k_for_mean(econ, m, mean):
    """Escala k que fija el gasto medio en ``mean`` para una forma m dada."""
    n = (econ.rho - 1.0) / econ.alpha
    shifted = m + 1.0 / n
    if shifted <= 0:
        raise NumericalError(f"La media no existe para m={m} (m + 1/n = {shifted:.6g})")
    log_ratio = special.gammaln(m) - special.gammaln(shifted)
    if not log_ratio < LOG_FLOAT_MAX:
        raise NumericalError(f"La escala k desborda para m={m} (ln Gamma(m)/Gamma(m + 1/n) = {log_ratio:.6g})")
    return mean * math.exp(log_ratio)


def shares_at_fixed_mean(econ, eps_i, omega_i, p_i, mean, m_values):
    """
    Participación agregada de un bien para varias formas m manteniendo el gasto medio en ``mean``.

    Con el primer momento fijo, m solo cambia la dispersión de los gastos; para
    rho > 1 y eps_i > 0 la participación responde a ese cambio.

    Args:
        econ (ClosedFormEconomy): Economía.
        eps_i, omega_i, p_i (float): Características del bien.
        mean (float): Gasto medio fijo.
        m_values (iterable): Formas m de la Amoroso.

    Returns:
        np.ndarray: Participación para cada m.
    """
    shares = []
    for m in m_values:
        agg = AggregateEconomy.from_params(econ, k=k_for_mean(econ, m, mean), m=m)
        shares.append(float(aggregate_share(agg, eps_i, omega_i, p_i)))
    return np.array(shares)


def _log_common(agg, eps_i, omega_i, p_i):
    """ln[exp(eps_i Upsilon) (Omega_i/p_i)^(rho-1)] y ln[1 + eps_i Psi k^((rho-1)/alpha)]."""
    econ = agg.econ
    eps_i = np.asarray(eps_i, dtype=float)
    log_a = eps_i * econ.upsilon + (econ.rho - 1.0) * (np.log(omega_i) - np.log(p_i))
    log_den = np.log1p(eps_i * econ.psi * agg.k ** ((econ.rho - 1.0) / econ.alpha))
    return log_a, log_den


def aggregate_share(agg, eps_i, omega_i, p_i):
    """
    Participación agregada exacta del bien i (media de s_ih entre hogares).

    Args:
        agg (AggregateEconomy): Economía agregada.
        eps_i, omega_i, p_i: Características del bien (escalares o arrays).

    Returns:
        float | np.ndarray: s_i.
    """
    econ = agg.econ
    m, alpha = agg.m, econ.alpha
    log_a, log_den = _log_common(agg, eps_i, omega_i, p_i)
    log_s = (log_a + special.gammaln(m + alpha) - special.gammaln(m)
             + (econ.rho - 1.0) * math.log(agg.k) - (m + alpha) * log_den)
    return np.exp(log_s)


def aggregate_share_mean_form(agg, eps_i, omega_i, p_i):
    """
    Participación agregada expresada con el gasto medio E_h-bar.

    Es una reordenación algebraica de ``aggregate_share``:
    Gamma(m+alpha)/Gamma(m + alpha/(rho-1)) k^(rho-2) E_h-bar / [...]^(m+alpha).
    """
    econ = agg.econ
    m, alpha = agg.m, econ.alpha
    mean_e = mean_expenditure(agg)
    log_a, log_den = _log_common(agg, eps_i, omega_i, p_i)
    log_s = (log_a + special.gammaln(m + alpha) - special.gammaln(m + alpha / (econ.rho - 1.0))
             + (econ.rho - 2.0) * math.log(agg.k) + math.log(mean_e) - (m + alpha) * log_den)
    return np.exp(log_s)


def aggregate_share_approx(agg, eps_i, omega_i, p_i):
    """
    Aproximación con Gamma(m + alpha/(rho-1))/Gamma(m) ~ m^(alpha/(rho-1)):

        s_i ~ exp(eps_i Upsilon) (Omega_i/p_i)^(rho-1) E_h-bar^(rho-1) / [...]^(m+alpha)

    Mejora cuando m >> alpha/(rho-1).
    """
    econ = agg.econ
    mean_e = mean_expenditure(agg)
    log_a, log_den = _log_common(agg, eps_i, omega_i, p_i)
    log_s = log_a + (econ.rho - 1.0) * math.log(mean_e) - (agg.m + econ.alpha) * log_den
    return np.exp(log_s)


def approx_deviation(agg, eps_i, omega_i, p_i):
    """
    Aproximación, valor exacto y desvío relativo (approx/exact - 1).

    Returns:
        tuple: (approx, exact, rel_dev)
    """
    approx = aggregate_share_approx(agg, eps_i, omega_i, p_i)
    exact = aggregate_share(agg, eps_i, omega_i, p_i)
    rel_dev = approx / exact - 1.0
    if np.max(np.abs(rel_dev)) > 0.01:
        logger.warning(f"La aproximación se desvía {np.max(np.abs(rel_dev)):.2%} del valor exacto (m={agg.m})")
    return approx, exact, rel_dev


def _integrate_over_households(agg, integrand_of_x):
    """
    Integra g(E_h) contra la densidad de Amoroso en la variable y = (E_h/k)^n ~ Gamma(m, 1).

    Con n < 0 esta variable evita truncar la cola pesada en E_h.
    """
    m, k, n = agg.m, agg.k, agg.exp_dist.n
    log_norm = -special.gammaln(m)

    def integrand(y):
        if y <= 0:
            return 0.0
        x = k * y ** (1.0 / n)
        return integrand_of_x(x) * math.exp(log_norm + (m - 1.0) * math.log(y) - y)

    # Partir en la moda para que quad vea la masa principal
    split = max(m - 1.0, 1.0)
    left, _ = integrate.quad(integrand, 0.0, split, epsabs=0.0, epsrel=1e-13, limit=400)
    right, _ = integrate.quad(integrand, split, np.inf, epsabs=0.0, epsrel=1e-13, limit=400)
    return left + right


def quadrature_aggregate_share(agg, eps_i, omega_i, p_i):
    """Oráculo determinista: integral numérica de la participación del hogar contra Amoroso."""
    econ = agg.econ
    return _integrate_over_households(
        agg, lambda x: float(household_share(econ, eps_i, omega_i, p_i, x)))


def expenditure_weighted_share(agg, eps_i, omega_i, p_i):
    """
    Diagnóstico: participación ponderada por gasto, E[s_ih E_h] / E[E_h].

    No es la participación canónica; se reporta separada de ``aggregate_share``.
    """
    econ = agg.econ
    numerator = _integrate_over_households(
        agg, lambda x: float(household_share(econ, eps_i, omega_i, p_i, x)) * x)
    return numerator / mean_expenditure(agg)


def mc_aggregate_share(agg, eps_i, omega_i, p_i, draws, seed):
    """
    Estimación Monte Carlo de la participación agregada y su error estándar.

    Args:
        agg (AggregateEconomy): Economía agregada.
        eps_i, omega_i, p_i (float): Características del bien.
        draws (int): Número de hogares simulados (>= 1000).
        seed (int): Semilla.

    Returns:
        tuple: (mean, std_error)
    """
    if draws < MIN_MC_DRAWS:
        raise ConfigError(f"Se requieren al menos {MIN_MC_DRAWS} extracciones (draws={draws})")
    expenditures = amoroso_sample(agg.exp_dist, draws, seed)
    shares = household_share(agg.econ, eps_i, omega_i, p_i, expenditures)
    mean = float(np.mean(shares))
    std_error = float(np.std(shares, ddof=1) / math.sqrt(draws))
    logger.debug(f"MC participación agregada: {mean:.10g} +/- {std_error:.3g} ({draws} hogares)")
    return mean, std_error


def mc_expenditure_weighted_share(agg, eps_i, omega_i, p_i, draws, seed):
    """Versión Monte Carlo de ``expenditure_weighted_share`` (estimador de razón)."""
    if draws < MIN_MC_DRAWS:
        raise ConfigError(f"Se requieren al menos {MIN_MC_DRAWS} extracciones (draws={draws})")
    expenditures = amoroso_sample(agg.exp_dist, draws, seed)
    shares = household_share(agg.econ, eps_i, omega_i, p_i, expenditures)
    return float(np.sum(shares * expenditures) / np.sum(expenditures))
