"""Rutinas numéricas compartidas: búsqueda de bracket y Newton con bisección."""

import logging

import numpy as np

from .errors import NumericalError

logger = logging.getLogger('Numerics')

MAX_DOUBLINGS = 200


def expand_bracket(func, x0=0.0, width=1.0, max_doublings=MAX_DOUBLINGS):
    """
    Busca un intervalo [lo, hi] donde una función creciente cambia de signo.

    El intervalo se centra en ``x0`` y su semiancho se duplica hasta que
    ``func(lo) <= 0 <= func(hi)``.

    Args:
        func (callable): Función escalar monótona creciente.
        x0 (float): Centro inicial.
        width (float): Semiancho inicial.
        max_doublings (int): Número máximo de duplicaciones.

    Returns:
        tuple: (lo, hi, f_lo, f_hi)

    Raises:
        NumericalError: Si no se encuentra el bracket.
    """
    lo, hi = x0 - width, x0 + width
    f_lo, f_hi = func(lo), func(hi)
    for _ in range(max_doublings):
        if np.isfinite(f_lo) and np.isfinite(f_hi) and f_lo <= 0.0 <= f_hi:
            return lo, hi, f_lo, f_hi
        width *= 2.0
        if not (f_lo <= 0.0):
            lo = x0 - width
            f_lo = func(lo)
        if not (f_hi >= 0.0):
            hi = x0 + width
            f_hi = func(hi)
    raise NumericalError(
        f"fallo de bracket en la inversión: sin cambio de signo tras {max_doublings} duplicaciones "
        f"(lo={lo:.3g}, f(lo)={f_lo:.3g}, hi={hi:.3g}, f(hi)={f_hi:.3g})"
    )


def newton_bisection(func, lo, hi, ftol=1e-13, xtol=1e-15, maxit=200):
    """
    Raíz de una función creciente combinando Newton-Raphson y bisección.

    ``func`` devuelve ``(f, df)``. El paso de Newton se rechaza (y se bisecta)
    cuando sale del bracket o no reduce el intervalo lo suficiente.

    Args:
        func (callable): x -> (f, df), con f(lo) <= 0 <= f(hi).
        lo (float): Extremo inferior del bracket.
        hi (float): Extremo superior del bracket.
        ftol (float): Tolerancia absoluta sobre |f|.
        xtol (float): Tolerancia relativa sobre el ancho del bracket.
        maxit (int): Iteraciones máximas.

    Returns:
        float: La raíz.

    Raises:
        NumericalError: Si no converge en ``maxit`` iteraciones.
    """
    x = 0.5 * (lo + hi)
    dx_old = hi - lo
    dx = dx_old
    f, df = func(x)

    for it in range(maxit):
        if abs(f) <= ftol:
            break

        # Mantener el bracket
        if f < 0.0:
            lo = x
        else:
            hi = x

        newton_ok = df > 0.0 and np.isfinite(df)
        if newton_ok:
            x_new = x - f / df
            newton_ok = lo < x_new < hi and abs(2.0 * f) <= abs(dx_old * df)

        dx_old = dx
        if newton_ok:
            dx = f / df
            x = x_new
        else:
            dx = 0.5 * (hi - lo)
            x = lo + dx

        if hi - lo <= xtol * max(1.0, abs(x)):
            f, df = func(x)
            break
        f, df = func(x)
    else:
        if abs(f) > ftol:
            raise NumericalError(f"Newton-bisección sin converger en {maxit} iteraciones "
                                 f"(|f|={abs(f):.3e}, bracket=[{lo:.17g}, {hi:.17g}])")

    logger.debug(f"Newton-bisección: x={x:.17g}, f={f:.3e}, iteraciones={it + 1}")
    return x
