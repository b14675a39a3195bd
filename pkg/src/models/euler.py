"""
Ecuación de Euler intertemporal con utilidad de flujo CRRA sobre la utilidad nhCES.

Notación: ``discount`` es el factor de descuento intertemporal y ``beta`` la
escala de la gamma de eps (en la literatura ambos se escriben beta).

    | símbolo     | código        |
    |-------------|---------------|
    | beta (t)    | discount      |
    | beta (eps)  | econ.beta     |
    | theta       | theta         |
    | r_t         | rates[t]      |
    | Y_t, A_t    | income, assets|

Con P_t = 1 la condición se reduce a (E_{t+1}/E_t)^(theta+(1-rho)/alpha) = discount (1+r_t).
La tasa que entra en el paso t -> t+1 se trata como una única entrada ``r``.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import optimize, stats

from ..core.distributions import amoroso_cdf, amoroso_ppf, amoroso_sample
from ..core.errors import ConfigError, NumericalError
from .closed_form import eps_bar, log_utility_of_expenditure

logger = logging.getLogger('Euler')

RESIDUAL_TOL = 1e-10
SCALE_TOL = 1e-12
MAX_BRACKET_DOUBLINGS = 60
KS_LEVEL = 0.01
PANEL_QUANTILES = (0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99)
MODES = ('normalized', 'unnormalized')


@dataclass(frozen=True)
class EulerConfig:
    """
    Problema intertemporal: economía, curvatura CRRA, descuento y trayectoria de tasas.

    Args:
        econ (ClosedFormEconomy): Economía con forma cerrada.
        theta (float): Curvatura CRRA (>= 0).
        discount (float): Factor de descuento en (0, 1].
        rates (tuple): Tasas r_t.
        horizon (int): Número de pasos.
        income (tuple): Ingresos Y_t opcionales (por defecto ceros), solo para el diagnóstico de activos.
    """

    econ: object
    theta: float
    discount: float
    rates: tuple
    horizon: int
    income: tuple = field(default=())

    def __post_init__(self):
        if not 0.0 < self.discount <= 1.0:
            raise ConfigError(f"discount debe estar en (0, 1] (discount={self.discount})")
        if self.theta < 0:
            raise ConfigError(f"theta debe ser >= 0 (theta={self.theta})")
        if self.theta + self.econ.power < 0:
            raise ConfigError(
                f"Se requiere theta + (1-rho)/alpha >= 0 (vale {self.theta + self.econ.power:.6g})"
            )
        if self.horizon < 0:
            raise ConfigError(f"horizon debe ser >= 0 (horizon={self.horizon})")
        if len(self.rates) < self.horizon:
            raise ConfigError(f"Se requieren al menos {self.horizon} tasas (hay {len(self.rates)})")
        if any(r <= -1.0 for r in self.rates):
            raise ConfigError("Todas las tasas deben cumplir r > -1")
        if self.income and len(self.income) < self.horizon:
            raise ConfigError(f"Se requieren al menos {self.horizon} ingresos (hay {len(self.income)})")


@dataclass(frozen=True, eq=False)
class EulerPath:
    """Trayectoria resuelta: gastos, ln U, factores de crecimiento, residuos y activos."""

    expenditures: np.ndarray
    log_utilities: np.ndarray
    growth_factors: np.ndarray
    residuals: np.ndarray
    assets: np.ndarray
    mode: str = 'normalized'

    def __post_init__(self):
        if np.any(self.expenditures <= 0):
            raise NumericalError("La trayectoria contiene gastos no positivos")

    def to_frame(self):
        """DataFrame con columnas t, expenditure, log_utility, growth_factor, residual, assets."""
        horizon = len(self.expenditures)
        pad = np.append(self.growth_factors, np.nan)
        res = np.append(self.residuals, np.nan)
        return pd.DataFrame({
            't': np.arange(horizon),
            'expenditure': self.expenditures,
            'log_utility': self.log_utilities,
            'growth_factor': pad[:horizon],
            'residual': res[:horizon],
            'assets': self.assets,
        })


def normalized_exponent(cfg):
    """Exponente theta + (1-rho)/alpha de la ecuación de Euler normalizada."""
    return cfg.theta + cfg.econ.power


def growth_factor(cfg, r):
    """
    Factor común de crecimiento A = [discount (1+r)]^(1/(theta+(1-rho)/alpha)).

    Es la misma expresión que [discount (1+r)]^(alpha/(alpha theta + 1 - rho)).
    """
    exponent = normalized_exponent(cfg)
    if exponent == 0:
        raise NumericalError("Exponente de Euler degenerado: theta + (1-rho)/alpha = 0")
    return (cfg.discount * (1.0 + r)) ** (1.0 / exponent)


def euler_residual_general(cfg, e_t, e_next, r, p_t, p_next, epsbar_t, epsbar_next):
    """
    Residuo de la condición de Euler general.

    (E_{t+1}/E_t)^theta - discount (1+r) (epsbar_{t+1}/epsbar_t)^(-1) (P_{t+1}/P_t)^(theta-1)

    Returns:
        float: Cero en el óptimo.
    """
    return ((e_next / e_t) ** cfg.theta
            - cfg.discount * (1.0 + r) * (epsbar_t / epsbar_next) * (p_next / p_t) ** (cfg.theta - 1.0))


def euler_step_normalized(cfg, e_t, r):
    """
    Paso con P_t = 1: E_{t+1} = E_t [discount (1+r)]^(1/(theta+(1-rho)/alpha)).

    Acepta un array de gastos (un paso por hogar).

    Raises:
        NumericalError: Si el exponente es cero.
    """
    if np.any(np.asarray(e_t) <= 0):
        raise ConfigError("El gasto debe ser > 0")
    return e_t * growth_factor(cfg, r)


def _unnormalized_gap(cfg, e_t, r):
    """h(z) con z = ln(E_{t+1}/E_t); su raíz es el paso sin normalizar."""
    econ = cfg.econ
    x = econ.power
    coef = (1.0 - cfg.theta) * econ.psi / (1.0 - econ.rho)
    base = e_t ** (-x)
    log_d = math.log(cfg.discount * (1.0 + r))

    def gap(z):
        return (1.0 + x) * z - log_d - coef * (base - base * math.exp(-x * z))

    return gap


def euler_step_unnormalized(cfg, e_t, r):
    """
    Paso sin normalizar el índice de precios (P_t = E_t / U_t).

    Resuelve g^(1+x) = discount (1+r) exp[((1-theta) Psi/(1-rho)) (E_t^(-x) - E_{t+1}^(-x))]
    con x = (1-rho)/alpha y g = E_{t+1}/E_t, que es la condición general con
    U_t dado por el mapeo cerrado. Busca un cambio de signo alrededor de la
    solución con theta = 1 y refina con brentq.

    Args:
        cfg (EulerConfig): Problema.
        e_t (float): Gasto actual (> 0).
        r (float): Tasa del paso.

    Returns:
        float: E_{t+1}.

    Raises:
        NumericalError: Si no se encuentra un cambio de signo.
    """
    if not e_t > 0:
        raise ConfigError(f"El gasto debe ser > 0 (e_t={e_t})")
    gap = _unnormalized_gap(cfg, e_t, r)
    x = cfg.econ.power
    z0 = math.log(cfg.discount * (1.0 + r)) / (1.0 + x)

    f0 = gap(z0)
    if f0 == 0.0:
        return e_t * math.exp(z0)

    bracket = _sign_change_around(gap, z0, f0)
    if bracket is None:
        raise NumericalError(
            f"Fallo de bracket en el paso de Euler sin normalizar: e_t={e_t:.6g}, r={r}, "
            f"theta={cfg.theta}, h(z0)={f0:.6g}"
        )

    z = optimize.brentq(gap, *bracket, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return e_t * math.exp(z)


def _sign_change_around(gap, z0, f0):
    """Duplica un intervalo alrededor de z0 hasta encontrar un cambio de signo de ``gap``."""
    width = 1.0
    for _ in range(MAX_BRACKET_DOUBLINGS):
        for z in (z0 - width, z0 + width):
            try:
                fz = gap(z)
            except OverflowError:
                continue
            if fz * f0 < 0:
                return (min(z, z0), max(z, z0))
        width *= 2.0
    return None


def _step_residual(cfg, e_t, e_next, r, mode):
    econ = cfg.econ
    if mode == 'normalized':
        p_t = p_next = 1.0
    else:
        p_t = math.exp(math.log(e_t) - log_utility_of_expenditure(econ, e_t))
        p_next = math.exp(math.log(e_next) - log_utility_of_expenditure(econ, e_next))
    return euler_residual_general(cfg, e_t, e_next, r, p_t, p_next,
                                  eps_bar(econ, e_t), eps_bar(econ, e_next))


def solve_path(cfg, e0, mode='normalized'):
    """
    Itera la condición de Euler hacia adelante desde e0.

    Args:
        cfg (EulerConfig): Problema.
        e0 (float): Gasto inicial (> 0).
        mode (str): 'normalized' o 'unnormalized'.

    Returns:
        EulerPath: Trayectoria con horizon + 1 gastos.
    """
    if mode not in MODES:
        raise ConfigError(f"Modo de Euler desconocido: {mode}")
    if not e0 > 0:
        raise ConfigError(f"e0 debe ser > 0 (e0={e0})")

    step = euler_step_normalized if mode == 'normalized' else euler_step_unnormalized
    expenditures = [float(e0)]
    residuals = []
    for t in range(cfg.horizon):
        r = cfg.rates[t]
        e_next = step(cfg, expenditures[-1], r)
        residual = _step_residual(cfg, expenditures[-1], e_next, r, mode)
        if not abs(residual) < RESIDUAL_TOL:
            raise NumericalError(f"Residuo de Euler {residual:.3e} en t={t} ({mode})")
        expenditures.append(e_next)
        residuals.append(residual)

    expenditures = np.asarray(expenditures)
    log_utilities = np.array([log_utility_of_expenditure(cfg.econ, e) for e in expenditures])

    income = cfg.income or (0.0,) * cfg.horizon
    assets = [0.0]
    for t in range(cfg.horizon):
        assets.append((1.0 + cfg.rates[t]) * assets[-1] + income[t] - expenditures[t])

    logger.info(f"Trayectoria de Euler ({mode}): {cfg.horizon} pasos, "
                f"E_T={expenditures[-1]:.6g}, residuo máx {max(map(abs, residuals), default=0.0):.2e}")
    return EulerPath(expenditures=expenditures, log_utilities=log_utilities,
                     growth_factors=expenditures[1:] / expenditures[:-1],
                     residuals=np.asarray(residuals), assets=np.asarray(assets), mode=mode)


def evolve_panel(cfg, dist_t, r):
    """
    Distribución de gastos en t+1: Amoroso(l, A k, m, n) con A el factor común de crecimiento.

    Args:
        cfg (EulerConfig): Problema.
        dist_t (AmorosoParams): Distribución en t (l = 0).
        r (float): Tasa del paso.

    Returns:
        AmorosoParams: Distribución en t+1.
    """
    if dist_t.l != 0:
        raise ConfigError(f"La evolución del panel requiere l = 0 (l={dist_t.l})")
    econ = cfg.econ
    if not econ.alpha * cfg.theta + 1.0 - econ.rho > 0:
        raise ConfigError("La evolución del panel requiere alpha theta + 1 - rho > 0")
    return dist_t.with_scale(growth_factor(cfg, r) * dist_t.k)


def panel_evolution_check(cfg, dist_t, r, households, seed):
    """
    Simula hogares desde ``dist_t``, aplica el paso normalizado y contrasta con la predicción.

    Args:
        cfg (EulerConfig): Problema.
        dist_t (AmorosoParams): Distribución inicial.
        r (float): Tasa del paso.
        households (int): Número de hogares.
        seed (int): Semilla.

    Returns:
        dict: predicted, scale_factor, max_scale_deviation, ks_statistic,
            ks_pvalue, passed y quantiles (DataFrame).
    """
    predicted = evolve_panel(cfg, dist_t, r)
    scale = growth_factor(cfg, r)
    current = amoroso_sample(dist_t, households, seed)
    evolved = euler_step_normalized(cfg, current, r)
    max_dev = float(np.max(np.abs(evolved / current - scale)))

    ks = stats.kstest(evolved, lambda x: amoroso_cdf(predicted, x))
    probs = np.asarray(PANEL_QUANTILES)
    quantiles = pd.DataFrame({
        'quantile': probs,
        'predicted': amoroso_ppf(predicted, probs),
        'simulated': np.quantile(evolved, probs),
    })

    passed = bool(max_dev < SCALE_TOL and ks.pvalue > KS_LEVEL)
    logger.info(f"Evolución del panel: A={scale:.9g}, KS={ks.statistic:.4g} (p={ks.pvalue:.3g}), "
                f"desvío de escala {max_dev:.2e}")
    return {
        'predicted': predicted,
        'scale_factor': scale,
        'max_scale_deviation': max_dev,
        'ks_statistic': float(ks.statistic),
        'ks_pvalue': float(ks.pvalue),
        'passed': passed,
        'quantiles': quantiles,
    }
