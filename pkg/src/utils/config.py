"""
Carga y validación de la configuración JSON de nhces.

Cada sección se mezcla sobre sus valores por defecto con
``{**DEFAULTS[seccion], **(config.get(seccion) or {})}``.
"""

import copy
import dataclasses
import json
import logging
import os
from dataclasses import dataclass

from ..core.distributions import AmorosoParams
from ..core.errors import ConfigError
from ..core.preferences import PreferenceParams

logger = logging.getLogger('nhces')

DEFAULT_CONFIG_PATH = os.path.join('config', 'default.json')

DEFAULTS = {
    'preference': {'rho': 0.5, 'alpha': 2.0, 'beta': 1.0, 'xi_p': 0.3, 'xi_omega': 0.0},
    'noise': {'variant': 'degenerate', 'nu_p': 0.0, 'nu_omega': 0.0},
    'grid': {'mode': 'quadrature', 'size': 2000, 'tail': 1e-10},
    'amoroso': {'m': 10.0, 'mean': 1.0, 'k': None},
    'aggregate': {'epsilons': [0.25, 0.5, 1.0, 2.0, 4.0], 'draws': 1000000},
    'euler': {
        'theta': 2.0,
        'discount': 0.96,
        'rate': 0.05,
        'rates': None,
        'horizon': 20,
        'e0': 1.0,
        'mode': 'normalized',
        'households': 100000,
        'income': None,
    },
    'logit': {'rho': 2.0, 'n_goods': 5, 'expenditure': 1.0, 'households': 1000000},
    'fig': {
        'joint_goods': 2000,
        'amoroso_x_max': 4.0,
        'amoroso_points': 201,
        'amoroso_params': [
            {'k': 1.0, 'm': 1.0, 'n': 1.0},
            {'k': 1.0, 'm': 2.0, 'n': 1.0},
            {'k': 1.0, 'm': 1.0, 'n': 2.0},
            {'k': 1.0, 'm': 1.0, 'n': -2.0},
            {'k': 1.0, 'm': 2.0, 'n': -1.5},
        ],
    },
    'verify': {'upsilon_perturbation': 0.0, 'quadrature_nodes': 2000},
}

TOP_LEVEL_DEFAULTS = {
    'seed': 20240101,
    'output_dir': 'output',
    'expenditures': [0.5, 1.0, 2.0],
}

SECTIONS = tuple(DEFAULTS)
GRID_MODES = ('sample', 'quadrature')

# Tipo de cada campo numérico; 'floats' es una lista de float. Los campos marcados
# como opcionales admiten null.
FIELD_TYPES = {
    'grid': {'size': int, 'tail': float},
    'amoroso': {'m': float, 'mean': float, 'k': float},
    'aggregate': {'epsilons': 'floats', 'draws': int},
    'euler': {'theta': float, 'discount': float, 'rate': float, 'rates': 'floats', 'horizon': int,
              'e0': float, 'households': int, 'income': 'floats'},
    'logit': {'rho': float, 'n_goods': int, 'expenditure': float, 'households': int},
    'fig': {'joint_goods': int, 'amoroso_x_max': float, 'amoroso_points': int},
    'verify': {'upsilon_perturbation': float, 'quadrature_nodes': int},
}
OPTIONAL_FIELDS = {('amoroso', 'k'), ('amoroso', 'mean'), ('euler', 'rates'), ('euler', 'income')}


def coerce_value(value, kind, where):
    """
    Convierte un valor de configuración al tipo pedido.

    Args:
        value: Valor leído del JSON.
        kind: ``int``, ``float`` o ``'floats'``.
        where (str): Nombre del campo para el mensaje de error.

    Returns:
        int | float | list: Valor convertido.

    Raises:
        ConfigError: Si el valor no es convertible (texto, booleano, entero con decimales...).
    """
    if kind == 'floats':
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where} debe ser una lista de números (valor={value!r})")
        return [coerce_value(v, float, f"{where}[{i}]") for i, v in enumerate(value)]
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ConfigError(f"{where} debe ser numérico (valor={value!r})")
    try:
        number = float(value)
    except ValueError as e:
        raise ConfigError(f"{where} debe ser numérico (valor={value!r})") from e
    if kind is int:
        if not number.is_integer():
            raise ConfigError(f"{where} debe ser entero (valor={value!r})")
        return int(number)
    return number


def coerce_sections(raw):
    """Convierte en su lugar los campos numéricos de cada sección de ``raw``."""
    for name, fields in FIELD_TYPES.items():
        section = raw[name]
        for key, kind in fields.items():
            if key not in section:
                raise ConfigError(f"Falta el campo {name}.{key}")
            if section[key] is None and (name, key) in OPTIONAL_FIELDS:
                continue
            section[key] = coerce_value(section[key], kind, f"{name}.{key}")


@dataclass(frozen=True)
class RunConfig:
    """Configuración resuelta de una ejecución: secciones mezcladas más los parámetros validados."""

    raw: dict
    preference: PreferenceParams
    seed: int
    output_dir: str
    expenditures: tuple

    def section(self, name):
        """Copia de la sección ``name`` ya mezclada con los valores por defecto."""
        return copy.deepcopy(self.raw[name])

    @property
    def grid(self):
        return self.raw['grid']

    def amoroso_params(self, k):
        """Parámetros de Amoroso de la sección ``amoroso`` con la escala ``k`` ya resuelta."""
        section = self.raw['amoroso']
        return AmorosoParams(k=k, m=float(section['m']), n=(self.preference.rho - 1.0) / self.preference.alpha)

    def logit_preference(self):
        """Parámetros de preferencias con el rho de la sección ``logit``."""
        return dataclasses.replace(self.preference, rho=float(self.raw['logit']['rho']))

    def euler_rates(self):
        """Trayectoria de tasas: ``rates`` explícitas o ``rate`` constante durante ``horizon`` pasos."""
        section = self.raw['euler']
        if section.get('rates') is not None:
            return tuple(float(r) for r in section['rates'])
        return (float(section['rate']),) * int(section['horizon'])


def default_config():
    """Documento de configuración completo con todos los valores por defecto."""
    return {**copy.deepcopy(DEFAULTS), **copy.deepcopy(TOP_LEVEL_DEFAULTS)}


def merge_config(config):
    """
    Mezcla un documento de configuración sobre los valores por defecto.

    Args:
        config (dict): Documento leído del JSON (puede ser parcial).

    Returns:
        dict: Documento completo.

    Raises:
        ConfigError: Si hay secciones desconocidas o secciones que no son objetos.
    """
    config = dict(config or {})
    unknown = set(config) - set(SECTIONS) - set(TOP_LEVEL_DEFAULTS)
    if unknown:
        raise ConfigError(f"Secciones de configuración desconocidas: {sorted(unknown)}")

    merged = {}
    for name in SECTIONS:
        section = config.get(name)
        if section is not None and not isinstance(section, dict):
            raise ConfigError(f"La sección '{name}' debe ser un objeto JSON")
        if name == 'noise' and section:
            # Cada variante tiene sus propios campos: no se mezcla con el degenerado
            merged[name] = copy.deepcopy(section)
        else:
            merged[name] = {**copy.deepcopy(DEFAULTS[name]), **copy.deepcopy(section or {})}
    for key, value in TOP_LEVEL_DEFAULTS.items():
        merged[key] = copy.deepcopy(config.get(key, value))
    return merged


def load_config(config_path=None):
    """
    Carga la configuración desde un archivo JSON y la mezcla con los valores por defecto.

    Args:
        config_path (str): Ruta del JSON. ``None`` usa solo los valores por defecto.

    Returns:
        dict: Documento completo.
    """
    if config_path is None:
        return merge_config({})
    if not os.path.exists(config_path):
        raise ConfigError(f"Archivo de configuración no encontrado: {config_path}")
    try:
        with open(config_path, 'r') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"JSON inválido en {config_path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"La configuración de {config_path} debe ser un objeto JSON")
    logger.debug(f"Configuración cargada desde {config_path}")
    return merge_config(data)


def build_run_config(raw, seed=None, output_dir=None, expenditures=None):
    """
    Valida el documento y aplica las sobreescrituras de la línea de comandos.

    Args:
        raw (dict): Documento completo (ver ``merge_config``).
        seed (int): Semilla opcional.
        output_dir (str): Directorio de salida opcional.
        expenditures (list): Niveles de gasto opcionales.

    Returns:
        RunConfig: Configuración resuelta.
    """
    raw = copy.deepcopy(raw)
    if seed is not None:
        raw['seed'] = int(seed)
    if output_dir is not None:
        raw['output_dir'] = output_dir
    if expenditures is not None:
        raw['expenditures'] = [float(e) for e in expenditures]

    preference = PreferenceParams.from_dict(raw['preference'], noise=raw['noise'])
    coerce_sections(raw)

    exps = tuple(coerce_value(raw['expenditures'], 'floats', 'expenditures'))
    if not exps or any(not e > 0 for e in exps):
        raise ConfigError(f"Los niveles de gasto deben ser > 0 (expenditures={list(exps)})")
    if raw['grid'].get('mode') not in GRID_MODES:
        raise ConfigError(f"grid.mode debe ser uno de {GRID_MODES} (mode={raw['grid'].get('mode')})")
    if raw['grid']['size'] < 1:
        raise ConfigError("grid.size debe ser >= 1")
    if isinstance(raw['seed'], bool) or not isinstance(raw['seed'], int):
        raise ConfigError(f"seed debe ser entero (seed={raw['seed']!r})")

    return RunConfig(raw=raw, preference=preference, seed=raw['seed'],
                     output_dir=str(raw['output_dir']), expenditures=exps)


def dump_config(raw):
    """Serializa el documento de forma estable (claves ordenadas, indentación 2)."""
    return json.dumps(raw, sort_keys=True, indent=2) + '\n'
