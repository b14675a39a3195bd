"""
Maquinaria de distribuciones: gamma, Amoroso (gamma generalizada) y Gumbel.

La densidad de Amoroso con localización l, escala k > 0 y formas m > 0, n != 0 es

    f(x) = |n/k| / Gamma(m) * ((x-l)/k)^(m*n-1) * exp(-((x-l)/k)^n),   x >= l.

Casos particulares con l = 0: exponencial (m=1, n=1), gamma (n=1),
Weibull (m=1, n>0) y Fréchet (m=1, n<0). Los límites lognormal y Pareto
(n -> 0) no se implementan.

Generador aleatorio: PCG64 de numpy (``np.random.default_rng``). Las variables
gamma salen de ``Generator.standard_gamma`` (Marsaglia-Tsang por rechazo para
m >= 1, con el "boost" U^(1/m) para m < 1), de modo que los resultados son
reproducibles en una misma plataforma para una semilla dada. Los muestreos
grandes se parten en bloques de ``CHUNK_SIZE`` con sub-semillas derivadas de
``SeedSequence(seed).spawn``; los bloques se concatenan en orden de índice.
"""

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special, stats

from .errors import ConfigError, NumericalError

logger = logging.getLogger('Distributions')

CHUNK_SIZE = 1 << 18
LOG_FLOAT_MAX = math.log(np.finfo(float).max)


def make_rng(seed):
    """Crea un generador PCG64 determinista a partir de una semilla entera."""
    return np.random.default_rng(seed)


def sub_seeds(seed, count):
    """
    Deriva ``count`` generadores independientes de una semilla maestra.

    Args:
        seed (int): Semilla maestra.
        count (int): Número de sub-generadores.

    Returns:
        list: Generadores ``np.random.Generator`` en orden determinista.
    """
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.default_rng(child) for child in children]


def draw_in_chunks(seed, count, draw, chunk_size=CHUNK_SIZE):
    """
    Ejecuta ``draw(rng, size)`` por bloques con sub-semillas y concatena en orden.

    Args:
        seed (int): Semilla maestra.
        count (int): Número total de extracciones.
        draw (callable): (rng, size) -> np.ndarray con primera dimensión ``size``.
        chunk_size (int): Tamaño de bloque.

    Returns:
        np.ndarray: Resultado concatenado a lo largo del eje 0.
    """
    n_chunks = max(1, -(-count // chunk_size))
    rngs = sub_seeds(seed, n_chunks)
    sizes = [chunk_size] * (n_chunks - 1) + [count - chunk_size * (n_chunks - 1)]
    return np.concatenate([draw(rng, size) for rng, size in zip(rngs, sizes)], axis=0)


# Gamma

def gamma_pdf(x, alpha, beta=1.0):
    """Densidad Gamma(alpha, beta) con beta como parámetro de escala."""
    return stats.gamma.pdf(x, alpha, scale=beta)


def gamma_quantile(tail, alpha, beta=1.0):
    """Cuantil 1 - tail de Gamma(alpha, beta), calculado con la función de supervivencia inversa."""
    return float(stats.gamma.isf(tail, alpha, scale=beta))


def gumbel_sample(rng, size):
    """
    Extrae variables Gumbel estándar como -ln(-ln u), u ~ Uniforme(0, 1).

    Args:
        rng (np.random.Generator): Generador.
        size (int | tuple): Forma de la salida.

    Returns:
        np.ndarray: Muestras Gumbel estándar (media 0.5772...).
    """
    u = np.maximum(rng.random(size), np.finfo(float).tiny)
    return -np.log(-np.log(u))


# Amoroso

@dataclass(frozen=True)
class AmorosoParams:
    """Parámetros (l, k, m, n) de la distribución de Amoroso."""

    k: float
    m: float
    n: float
    l: float = 0.0

    def __post_init__(self):
        for name in ('l', 'k', 'm', 'n'):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"Amoroso: el parámetro {name} debe ser finito")
        if self.k <= 0:
            raise ConfigError(f"Amoroso: se requiere k > 0 (k={self.k})")
        if self.m <= 0:
            raise ConfigError(f"Amoroso: se requiere m > 0 (m={self.m})")
        if self.n == 0:
            raise ConfigError("Amoroso: se requiere n != 0")

    def with_scale(self, k):
        """Copia con escala ``k``."""
        return AmorosoParams(k=k, m=self.m, n=self.n, l=self.l)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(k=float(data['k']), m=float(data['m']), n=float(data['n']),
                       l=float(data.get('l', 0.0)))
        except ConfigError:
            raise
        except KeyError as e:
            raise ConfigError(f"Amoroso: falta el campo {e}") from e
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Amoroso: parámetros no numéricos ({data!r})") from e


def amoroso_logpdf(p, x):
    """
    Logaritmo de la densidad de Amoroso, evaluado en espacio logarítmico.

    Para x < l devuelve -inf (densidad 0). En x = l la densidad es finita
    solo si m*n >= 1; con m*n < 1 y n > 0 diverge y se devuelve +inf.

    Args:
        p (AmorosoParams): Parámetros.
        x (float | array): Puntos de evaluación.

    Returns:
        np.ndarray | float: log f(x).
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    z = np.atleast_1d((x - p.l) / p.k)
    mn = p.m * p.n
    log_norm = math.log(abs(p.n / p.k)) - special.gammaln(p.m)

    out = np.full(z.shape, -np.inf)
    pos = z > 0
    zp = z[pos]
    out[pos] = log_norm + (mn - 1.0) * np.log(zp) - zp ** p.n

    at_l = z == 0
    if np.any(at_l) and p.n > 0:
        if mn == 1.0:
            out[at_l] = log_norm
        elif mn < 1.0:
            out[at_l] = np.inf

    return float(out[0]) if scalar else out


def amoroso_pdf(p, x):
    """Densidad de Amoroso (ver ``amoroso_logpdf``)."""
    return np.exp(amoroso_logpdf(p, x))


def amoroso_cdf(p, x):
    """
    Función de distribución de Amoroso vía la gamma incompleta regularizada.

    Con y = ((x-l)/k)^n: F = P(m, y) si n > 0 y F = Q(m, y) si n < 0.
    """
    x = np.asarray(x, dtype=float)
    z = np.maximum((x - p.l) / p.k, 0.0)
    with np.errstate(divide='ignore'):
        y = z ** p.n
    cdf = special.gammainc(p.m, y) if p.n > 0 else special.gammaincc(p.m, y)
    cdf = np.where(x > p.l, cdf, 0.0)
    return cdf if cdf.ndim else float(cdf)


def amoroso_ppf(p, q):
    """Cuantiles de Amoroso (inversa de ``amoroso_cdf``)."""
    q = np.asarray(q, dtype=float)
    y = special.gammaincinv(p.m, q) if p.n > 0 else special.gammainccinv(p.m, q)
    x = p.l + p.k * y ** (1.0 / p.n)
    return x if x.ndim else float(x)


def amoroso_sample(p, count, seed):
    """
    Muestras de Amoroso: si X ~ Gamma(m, 1) entonces l + k X^(1/n) tiene densidad Amoroso.

    Args:
        p (AmorosoParams): Parámetros.
        count (int): Número de muestras (>= 1).
        seed (int): Semilla.

    Returns:
        np.ndarray: Muestras (todas > l).
    """
    if count < 1:
        raise ConfigError(f"amoroso_sample: count debe ser >= 1 (count={count})")

    def draw(rng, size):
        return p.l + p.k * rng.standard_gamma(p.m, size) ** (1.0 / p.n)

    return draw_in_chunks(seed, count, draw)


def amoroso_moment(p, order):
    """
    Momento bruto de (x - l): k^s Gamma(m + s/n) / Gamma(m).

    Args:
        p (AmorosoParams): Parámetros.
        order (float): Orden s del momento.

    Returns:
        float: E[(X - l)^s].

    Raises:
        NumericalError: Si m + s/n <= 0 (el momento no existe) o si desborda.
    """
    shifted = p.m + order / p.n
    if shifted <= 0:
        raise NumericalError(
            f"el momento no existe: m + s/n = {shifted:.6g} <= 0 (m={p.m}, n={p.n}, s={order})"
        )
    log_moment = order * math.log(p.k) + special.gammaln(shifted) - special.gammaln(p.m)
    if not log_moment < LOG_FLOAT_MAX:
        raise NumericalError(f"el momento de orden {order} desborda (ln momento = {log_moment:.6g})")
    return math.exp(log_moment)


def amoroso_mean(p):
    """Media l + E[X - l]."""
    return p.l + amoroso_moment(p, 1.0)


def special_case_reduction(p):
    """
    Identifica la distribución clásica a la que se reduce la Amoroso con l = 0.

    Returns:
        str | None: 'exponential', 'gamma', 'weibull', 'frechet' o None.
    """
    if p.l != 0:
        return None
    if p.n == 1:
        return 'exponential' if p.m == 1 else 'gamma'
    if p.m == 1:
        return 'weibull' if p.n > 0 else 'frechet'
    return None


def gamma_ratio_approx(m, s):
    """
    Cociente Gamma(m + s) / Gamma(m) exacto y su aproximación m^s.

    Args:
        m (float): > 0.
        s (float): con m + s > 0.

    Returns:
        tuple: (exact, approx)
    """
    if m <= 0 or m + s <= 0:
        raise ConfigError(f"gamma_ratio_approx requiere m > 0 y m + s > 0 (m={m}, s={s})")
    log_exact = special.gammaln(m + s) - special.gammaln(m)
    log_approx = s * math.log(m)
    if not max(log_exact, log_approx) < LOG_FLOAT_MAX:
        raise NumericalError(f"Gamma(m + s) / Gamma(m) desborda (m={m}, s={s})")
    exact, approx = math.exp(log_exact), math.exp(log_approx)
    return exact, approx
