"""Excepciones del toolkit nhCES."""


class NhcesError(Exception):
    """Clase base para todos los errores del toolkit."""


class ConfigError(NhcesError, ValueError):
    """Parámetros o configuración inválidos (código de salida 2 en la CLI)."""


class NumericalError(NhcesError, ArithmeticError):
    """Fallo numérico: overflow, divergencia, bracket no encontrado, momento inexistente.

    Se traduce al código de salida 3 en la CLI.
    """
