"""
Parámetros de preferencias nhCES y generación de grids de bienes.

Una economía queda definida por rho (sustitución), la distribución
Gamma(alpha, beta) de los epsilon_i y la relación log-lineal

    ln p_i     = xi_p     * eps_i + nu_p
    ln Omega_i = xi_omega * eps_i + nu_omega

con ruido (nu_p, nu_omega) descrito por ``NoiseSpec``. Un ``GoodsGrid`` es la
discretización del continuo de bienes: cada bien lleva (eps, Omega, p, peso) y
los pesos suman 1 (representan di en las integrales).
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import special

from .distributions import gamma_pdf, gamma_quantile, make_rng
from .errors import ConfigError, NumericalError

logger = logging.getLogger('Preferences')

NOISE_VARIANTS = ('degenerate', 'independent_normal', 'empirical')
WEIGHT_TOL = 1e-12
QUADRATURE_TAIL = 1e-10
MIN_QUADRATURE_NODES = 16


@dataclass(frozen=True)
class NoiseSpec:
    """
    Distribución conjunta de (nu_p, nu_omega).

    Variantes:
        - 'degenerate': valores fijos nu_p, nu_omega.
        - 'independent_normal': nu_p ~ N(mu_p, sigma_p), nu_omega ~ N(mu_omega, sigma_omega).
        - 'empirical': pares (nu_p, nu_omega) remuestreados con reemplazo. Cualquier
          otra distribución conjunta entra por aquí.
    """

    variant: str = 'degenerate'
    nu_p: float = 0.0
    nu_omega: float = 0.0
    mu_p: float = 0.0
    sigma_p: float = 0.0
    mu_omega: float = 0.0
    sigma_omega: float = 0.0
    pairs: tuple = field(default=())

    def __post_init__(self):
        if self.variant not in NOISE_VARIANTS:
            raise ConfigError(f"Variante de ruido desconocida: {self.variant} (opciones: {NOISE_VARIANTS})")
        if self.sigma_p < 0 or self.sigma_omega < 0:
            raise ConfigError("Las desviaciones estándar del ruido deben ser >= 0")
        if self.variant == 'empirical':
            if len(self.pairs) == 0:
                raise ConfigError("El ruido empírico requiere al menos un par (nu_p, nu_omega)")
            try:
                pairs = tuple((float(a), float(b)) for a, b in self.pairs)
            except (TypeError, ValueError) as e:
                raise ConfigError("El ruido empírico requiere pares numéricos (nu_p, nu_omega)") from e
            object.__setattr__(self, 'pairs', pairs)

    @classmethod
    def degenerate(cls, nu_p=0.0, nu_omega=0.0):
        return cls('degenerate', nu_p=nu_p, nu_omega=nu_omega)

    @classmethod
    def independent_normal(cls, mu_p=0.0, sigma_p=1.0, mu_omega=0.0, sigma_omega=1.0):
        return cls('independent_normal', mu_p=mu_p, sigma_p=sigma_p,
                   mu_omega=mu_omega, sigma_omega=sigma_omega)

    @classmethod
    def empirical(cls, pairs):
        try:
            pairs = tuple(map(tuple, pairs))
        except TypeError as e:
            raise ConfigError('El ruido empírico requiere una lista de pares (nu_p, nu_omega)') from e
        return cls('empirical', pairs=pairs)

    @property
    def is_degenerate(self):
        return self.variant == 'degenerate'

    def location(self):
        """
        Ruido representativo (nu_p, nu_omega): el valor fijo, las medias normales o la media de los pares.

        Returns:
            tuple: (nu_p, nu_omega)
        """
        if self.variant == 'degenerate':
            return self.nu_p, self.nu_omega
        if self.variant == 'independent_normal':
            return self.mu_p, self.mu_omega
        nu_p, nu_omega = np.mean(np.asarray(self.pairs, dtype=float), axis=0)
        return float(nu_p), float(nu_omega)

    def draw(self, rng, size):
        """
        Extrae ``size`` pares (nu_p, nu_omega).

        Args:
            rng (np.random.Generator): Generador.
            size (int): Número de extracciones.

        Returns:
            tuple: (nu_p, nu_omega) como arrays de longitud ``size``.
        """
        if self.variant == 'degenerate':
            return np.full(size, self.nu_p), np.full(size, self.nu_omega)
        if self.variant == 'independent_normal':
            nu_p = rng.normal(self.mu_p, self.sigma_p, size)
            nu_omega = rng.normal(self.mu_omega, self.sigma_omega, size)
            return nu_p, nu_omega
        pairs = np.asarray(self.pairs, dtype=float)
        idx = rng.integers(0, len(pairs), size)
        return pairs[idx, 0], pairs[idx, 1]

    def to_dict(self):
        if self.variant == 'degenerate':
            return {'variant': self.variant, 'nu_p': self.nu_p, 'nu_omega': self.nu_omega}
        if self.variant == 'independent_normal':
            return {'variant': self.variant, 'mu_p': self.mu_p, 'sigma_p': self.sigma_p,
                    'mu_omega': self.mu_omega, 'sigma_omega': self.sigma_omega}
        return {'variant': self.variant, 'pairs': [list(p) for p in self.pairs]}

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        variant = data.pop('variant', 'degenerate')
        if variant == 'empirical':
            return cls.empirical(data.get('pairs', ()))
        allowed = {'nu_p', 'nu_omega'} if variant == 'degenerate' else \
            {'mu_p', 'sigma_p', 'mu_omega', 'sigma_omega'}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"Campos de ruido no válidos para '{variant}': {sorted(unknown)}")
        return cls(variant, **_floats(data, 'noise'))


@dataclass(frozen=True)
class PreferenceParams:
    """Parámetros profundos (rho, alpha, beta, xi_p, xi_omega, ruido) de una economía nhCES."""

    rho: float
    alpha: float
    beta: float = 1.0
    xi_p: float = 0.0
    xi_omega: float = 0.0
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        for name in ('rho', 'alpha', 'beta', 'xi_p', 'xi_omega'):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"El parámetro {name} debe ser finito")
        if self.rho <= 0 or self.rho == 1:
            raise ConfigError(f"Se requiere rho > 0 y rho != 1 (rho={self.rho})")
        if self.alpha <= 0:
            raise ConfigError(f"Se requiere alpha > 0 (alpha={self.alpha})")
        if self.beta <= 0:
            raise ConfigError(f"Se requiere beta > 0 (beta={self.beta})")

    def scaled(self, k):
        """
        Economía equivalente con epsilon escalado por k: (alpha, k*beta, xi_p/k, xi_omega/k).

        Args:
            k (float): Factor de escala > 0.

        Returns:
            PreferenceParams: Parámetros escalados.
        """
        if k <= 0:
            raise ConfigError(f"El factor de escala debe ser > 0 (k={k})")
        return PreferenceParams(rho=self.rho, alpha=self.alpha, beta=k * self.beta,
                                xi_p=self.xi_p / k, xi_omega=self.xi_omega / k, noise=self.noise)

    def to_dict(self):
        return {'rho': self.rho, 'alpha': self.alpha, 'beta': self.beta,
                'xi_p': self.xi_p, 'xi_omega': self.xi_omega}

    @classmethod
    def from_dict(cls, data, noise=None):
        data = dict(data or {})
        for required in ('rho', 'alpha'):
            if required not in data:
                raise ConfigError(f"Falta el parámetro de preferencias '{required}'")
        unknown = set(data) - {'rho', 'alpha', 'beta', 'xi_p', 'xi_omega'}
        if unknown:
            raise ConfigError(f"Parámetros de preferencias desconocidos: {sorted(unknown)}")
        return cls(noise=NoiseSpec.from_dict(noise), **_floats(data, 'preference'))


def _floats(data, where):
    """Convierte a float cada valor de ``data``; los valores no numéricos dan ConfigError."""
    converted = {}
    for key, value in data.items():
        if isinstance(value, bool):
            raise ConfigError(f"{where}.{key} debe ser numérico (valor={value!r})")
        try:
            converted[key] = float(value)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{where}.{key} debe ser numérico (valor={value!r})") from e
    return converted


@dataclass(frozen=True, eq=False)
class GoodsGrid:
    """Discretización del continuo de bienes: arrays eps, Omega, p y peso por bien."""

    epsilon: np.ndarray
    omega: np.ndarray
    price: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        arrays = {}
        for name in ('epsilon', 'omega', 'price', 'weight'):
            arr = np.array(getattr(self, name), dtype=float).ravel()
            arr.setflags(write=False)
            arrays[name] = arr
            object.__setattr__(self, name, arr)

        n = arrays['epsilon'].size
        if n == 0 or any(a.size != n for a in arrays.values()):
            raise ConfigError("GoodsGrid: los arrays deben ser no vacíos y de igual longitud")
        if not all(np.all(np.isfinite(a)) for a in arrays.values()):
            raise ConfigError("GoodsGrid: valores no finitos")
        if np.any(arrays['epsilon'] < 0):
            raise ConfigError("GoodsGrid: todos los epsilon deben ser >= 0")
        if np.any(arrays['omega'] <= 0) or np.any(arrays['price'] <= 0) or np.any(arrays['weight'] <= 0):
            raise ConfigError("GoodsGrid: Omega, precios y pesos deben ser estrictamente positivos")
        total = arrays['weight'].sum()
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ConfigError(f"GoodsGrid: los pesos deben sumar 1 (suman {total:.17g})")

    @classmethod
    def from_arrays(cls, epsilon, omega=None, price=None, weight=None):
        """
        Construye un grid normalizando los pesos. Omega, precios y pesos por defecto valen 1.

        Returns:
            GoodsGrid: Grid validado.
        """
        epsilon = np.asarray(epsilon, dtype=float).ravel()
        ones = np.ones_like(epsilon)
        omega = ones if omega is None else np.broadcast_to(np.asarray(omega, dtype=float), epsilon.shape)
        price = ones if price is None else np.broadcast_to(np.asarray(price, dtype=float), epsilon.shape)
        weight = ones if weight is None else np.broadcast_to(np.asarray(weight, dtype=float), epsilon.shape)
        return cls(epsilon, omega, price, weight / weight.sum())

    @property
    def n_goods(self):
        return self.epsilon.size

    @property
    def log_price(self):
        return np.log(self.price)

    @property
    def log_omega(self):
        return np.log(self.omega)

    def to_frame(self):
        """Devuelve el grid como DataFrame (una fila por bien)."""
        return pd.DataFrame({
            'good': np.arange(self.n_goods),
            'epsilon': self.epsilon,
            'price': self.price,
            'omega': self.omega,
            'weight': self.weight,
        })


def compute_M(noise, rho):
    """
    Constante distribucional M = E[(e^nu_p / e^nu_omega)^(1-rho)].

    Args:
        noise (NoiseSpec): Especificación del ruido.
        rho (float): Parámetro de sustitución.

    Returns:
        float: M > 0.

    Raises:
        NumericalError: Si M no es finito ("M diverge").
    """
    a = 1.0 - rho
    if noise.variant == 'degenerate':
        log_m = a * (noise.nu_p - noise.nu_omega)
    elif noise.variant == 'independent_normal':
        # Identidad del momento lognormal
        log_m = a * (noise.mu_p - noise.mu_omega) + 0.5 * a * a * (noise.sigma_p ** 2 + noise.sigma_omega ** 2)
    else:
        pairs = np.asarray(noise.pairs, dtype=float)
        log_terms = a * (pairs[:, 0] - pairs[:, 1])
        log_m = special.logsumexp(log_terms) - math.log(len(log_terms))

    try:
        m_value = math.exp(log_m)
    except OverflowError:
        m_value = math.inf
    if not math.isfinite(m_value) or m_value <= 0:
        raise NumericalError(f"M diverge (ln M = {log_m:.6g}, rho={rho}, ruido={noise.variant})")
    return m_value


def good_characteristics(params, epsilon, nu_p=None, nu_omega=None):
    """
    (Omega, p) de bienes con característica ``epsilon`` según la relación log-lineal.

    Sin ruido explícito se usa ``params.noise.location()``.

    Returns:
        tuple: (omega, price), escalares o arrays como ``epsilon``.
    """
    if nu_p is None or nu_omega is None:
        loc_p, loc_omega = params.noise.location()
        nu_p = loc_p if nu_p is None else nu_p
        nu_omega = loc_omega if nu_omega is None else nu_omega
    price = np.exp(params.xi_p * epsilon + nu_p)
    omega = np.exp(params.xi_omega * epsilon + nu_omega)
    return omega, price


def _build_grid(params, epsilon, nu_p, nu_omega, weight):
    omega, price = good_characteristics(params, epsilon, nu_p, nu_omega)
    return GoodsGrid(epsilon, omega, price, weight)


def sample_goods_grid(params, n_goods, seed):
    """
    Grid Monte Carlo: eps_i ~ Gamma(alpha, beta), ruido según ``params.noise``, pesos 1/n.

    Args:
        params (PreferenceParams): Parámetros de la economía.
        n_goods (int): Número de bienes (>= 1).
        seed (int): Semilla; misma semilla produce grids idénticos bit a bit.

    Returns:
        GoodsGrid: Grid muestreado.
    """
    if n_goods < 1:
        raise ConfigError(f"n_goods debe ser >= 1 (n_goods={n_goods})")
    rng = make_rng(seed)
    # Gamma(alpha, 1) escalada: con la misma semilla, beta' = k*beta da eps' = k*eps
    epsilon = rng.standard_gamma(params.alpha, n_goods) * params.beta
    nu_p, nu_omega = params.noise.draw(rng, n_goods)
    weight = np.full(n_goods, 1.0 / n_goods)
    weight /= weight.sum()
    logger.debug(f"Grid muestreado: {n_goods} bienes, semilla {seed}")
    return _build_grid(params, epsilon, nu_p, nu_omega, weight)


def quadrature_goods_grid(params, n_nodes, tail=QUADRATURE_TAIL, tilt=0.0):
    """
    Grid determinista de Gauss-Legendre sobre [0, Q] con pesos por la densidad gamma.

    Q es el cuantil 1 - tail de Gamma(alpha, beta). Con ``tilt`` != 0 el
    integrando relevante es exp(tilt * eps) * f(eps), una gamma de escala
    1/(1/beta - tilt); Q se amplía hasta cubrir también su cuantil 1 - tail.
    Los pesos se renormalizan para sumar exactamente 1.

    Args:
        params (PreferenceParams): Parámetros (el ruido debe ser degenerado).
        n_nodes (int): Número de nodos (>= 16).
        tail (float): Masa de cola truncada.
        tilt (float): Inclinación exponencial del integrando (< 1/beta).

    Returns:
        GoodsGrid: Grid de cuadratura.
    """
    if n_nodes < MIN_QUADRATURE_NODES:
        raise ConfigError(f"El grid de cuadratura requiere al menos {MIN_QUADRATURE_NODES} nodos")
    if not params.noise.is_degenerate:
        raise ConfigError("El grid de cuadratura requiere ruido degenerado")
    if not 0.0 < tail < 1.0:
        raise ConfigError(f"tail debe estar en (0, 1) (tail={tail})")

    rate = 1.0 / params.beta - tilt
    if rate <= 0:
        raise ConfigError(
            f"Integrando no integrable: inclinación {tilt:.6g} >= 1/beta = {1.0 / params.beta:.6g}"
        )
    upper = gamma_quantile(tail, params.alpha, params.beta)
    if tilt != 0.0:
        upper = max(upper, gamma_quantile(tail, params.alpha, 1.0 / rate))

    nodes, gl_weights = special.roots_legendre(n_nodes)
    epsilon = 0.5 * upper * (nodes + 1.0)
    weight = 0.5 * upper * gl_weights * gamma_pdf(epsilon, params.alpha, params.beta)
    # Nodos cuya densidad cae por debajo del menor double no aportan nada
    keep = weight > 0
    epsilon, weight = epsilon[keep], weight[keep]
    weight = weight / weight.sum()

    n = epsilon.size
    nu_p = np.full(n, params.noise.nu_p)
    nu_omega = np.full(n, params.noise.nu_omega)
    logger.debug(f"Grid de cuadratura: {n_nodes} nodos en [0, {upper:.6g}] (tilt={tilt:.4g})")
    return _build_grid(params, epsilon, nu_p, nu_omega, weight)
