#!/usr/bin/env python3
"""
Script principal del toolkit nhCES: resolución, agregación, Euler, logit,
datos de figuras y verificación.

Códigos de salida: 0 éxito, 1 verificación fallida, 2 error de configuración,
3 error numérico.
"""

import argparse
import logging
import os
import sys

import numpy as np
import pandas as pd

from src.core import oracle
from src.core.distributions import AmorosoParams, amoroso_pdf
from src.core.errors import ConfigError, NumericalError
from src.core.preferences import good_characteristics, quadrature_goods_grid, sample_goods_grid
from src.models import aggregation, closed_form, euler, logit
from src.utils.config import (
    DEFAULT_CONFIG_PATH,
    build_run_config,
    default_config,
    dump_config,
    load_config,
)
from src.utils.io_utils import write_csv, write_text
from src.utils.logging_utils import setup_logging
from src.verification.engine import VerificationEngine

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_ERROR = 3

ENGEL_EPS_MULTIPLES = (0.25, 0.5, 1.0, 2.0, 4.0)


def parse_expenditures(text):
    """Convierte '0.5,1,2' en [0.5, 1.0, 2.0]."""
    try:
        values = [float(v) for v in text.split(',') if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"Lista de gastos inválida: {text}") from e
    if not values:
        raise argparse.ArgumentTypeError("La lista de gastos está vacía")
    return values


# Constructores compartidos

def build_goods_grid(run_cfg, econ):
    """Grid de bienes según ``grid.mode``; en cuadratura se inclina para cubrir todos los gastos pedidos."""
    grid_cfg = run_cfg.grid
    size = int(grid_cfg['size'])
    if grid_cfg['mode'] == 'sample':
        return sample_goods_grid(run_cfg.preference, size, run_cfg.seed)
    tilt = max(closed_form.exponential_tilt(econ, e) for e in run_cfg.expenditures)
    return quadrature_goods_grid(run_cfg.preference, size, tail=float(grid_cfg['tail']), tilt=tilt)


def resolve_scale(run_cfg, econ):
    """Escala k de Amoroso: explícita o la que fija el gasto medio de la sección ``amoroso``."""
    section = run_cfg.section('amoroso')
    if section.get('k') is not None:
        return float(section['k'])
    if section.get('mean') is None:
        raise ConfigError("amoroso requiere 'k' o 'mean'")
    return aggregation.k_for_mean(econ, float(section['m']), float(section['mean']))


def build_euler_config(run_cfg, econ):
    section = run_cfg.section('euler')
    income = tuple(float(y) for y in section['income']) if section.get('income') else ()
    return euler.EulerConfig(econ=econ, theta=float(section['theta']),
                             discount=float(section['discount']), rates=run_cfg.euler_rates(),
                             horizon=int(section['horizon']), income=income)


# Subcomandos

def run_solve(run_cfg, out_dir):
    """
    Demanda por bien y mapeo gasto-utilidad en cada nivel de gasto.

    Args:
        run_cfg (RunConfig): Configuración.
        out_dir (str): Directorio de salida.

    Returns:
        list: Rutas de ``demand.csv``, ``mapping.csv`` y ``engel.csv``.
    """
    logger = logging.getLogger('nhces')
    pref = run_cfg.preference
    econ = closed_form.ClosedFormEconomy.from_params(pref)
    grid = build_goods_grid(run_cfg, econ)

    blocks, mapping = [], []
    for e in run_cfg.expenditures:
        point = oracle.demand(grid, pref.rho, e)
        block = grid.to_frame()
        block.insert(0, 'expenditure', e)
        block['share'] = point.shares
        block['quantity'] = point.quantities
        block['elasticity'] = closed_form.expenditure_elasticity(econ, grid.epsilon, e)
        block['elasticity_fd'] = oracle.expenditure_elasticity_fd(grid, pref.rho, e)
        blocks.append(block)

        ln_u_cf = closed_form.log_utility_of_expenditure(econ, e)
        mapping.append({
            'expenditure': e,
            'log_utility_closed_form': ln_u_cf,
            'log_utility_oracle': point.log_utility,
            'deviation': abs(ln_u_cf - point.log_utility),
            'eps_bar_closed_form': closed_form.eps_bar(econ, e),
            'eps_bar_oracle': point.eps_bar,
        })

    # Curvas de Engel cerradas para bienes alrededor de la media de eps
    eps_engel = closed_form.mean_epsilon(econ) * np.asarray(ENGEL_EPS_MULTIPLES)
    omega_engel, price_engel = good_characteristics(pref, eps_engel)
    engel = closed_form.engel_curve(econ, eps_engel, run_cfg.expenditures, omega_engel, price_engel)

    mapping_df = pd.DataFrame(mapping)
    logger.info(f"Mapeo gasto-utilidad: desvío máximo {mapping_df['deviation'].max():.3e} "
                f"({grid.n_goods} bienes, grid {run_cfg.grid['mode']})")
    return [
        write_csv(pd.concat(blocks, ignore_index=True), os.path.join(out_dir, 'demand.csv')),
        write_csv(mapping_df, os.path.join(out_dir, 'mapping.csv')),
        write_csv(engel, os.path.join(out_dir, 'engel.csv')),
    ]


def cmd_solve(run_cfg, args):
    run_solve(run_cfg, run_cfg.output_dir)
    return EXIT_OK


def cmd_aggregate(run_cfg, args):
    """Participaciones agregadas exacta, con media, aproximada, por cuadratura y Monte Carlo."""
    logger = logging.getLogger('nhces')
    pref = run_cfg.preference
    section = run_cfg.section('aggregate')
    econ = closed_form.ClosedFormEconomy.from_params(pref)
    agg = aggregation.AggregateEconomy(econ=econ, exp_dist=run_cfg.amoroso_params(resolve_scale(run_cfg, econ)))
    draws = int(section['draws'])
    if not agg.mean_exists:
        logger.warning("La media de gasto no existe: se omiten las columnas que dependen de ella")

    nu_p, nu_omega = pref.noise.location()
    if not pref.noise.is_degenerate:
        logger.info(f"Ruido '{pref.noise.variant}': cada bien usa el ruido medio "
                    f"(nu_p={nu_p:.6g}, nu_omega={nu_omega:.6g})")

    rows = []
    for i, eps in enumerate(section['epsilons']):
        omega, price = good_characteristics(pref, eps, nu_p, nu_omega)
        mc_mean, mc_se = aggregation.mc_aggregate_share(agg, eps, omega, price, draws, run_cfg.seed + i)
        row = {
            'epsilon': eps,
            'nu_p': nu_p,
            'nu_omega': nu_omega,
            'omega': omega,
            'price': price,
            'exact': float(aggregation.aggregate_share(agg, eps, omega, price)),
            'quadrature': aggregation.quadrature_aggregate_share(agg, eps, omega, price),
            'mc_mean': mc_mean,
            'mc_std_error': mc_se,
            'mean_form': np.nan,
            'approx': np.nan,
            'approx_rel_dev': np.nan,
            'expenditure_weighted': np.nan,
        }
        if agg.mean_exists:
            approx, _, rel_dev = aggregation.approx_deviation(agg, eps, omega, price)
            row.update({
                'mean_form': float(aggregation.aggregate_share_mean_form(agg, eps, omega, price)),
                'approx': float(approx),
                'approx_rel_dev': float(rel_dev),
                'expenditure_weighted': aggregation.expenditure_weighted_share(agg, eps, omega, price),
            })
        rows.append(row)

    write_csv(pd.DataFrame(rows), os.path.join(run_cfg.output_dir, 'aggregate.csv'))
    logger.info(f"Agregación: {len(rows)} bienes, Amoroso(k={agg.k:.6g}, m={agg.m}, n={agg.exp_dist.n:.6g})")
    return EXIT_OK


def cmd_euler(run_cfg, args):
    """Trayectoria de Euler y evolución de la distribución de gastos."""
    logger = logging.getLogger('nhces')
    section = run_cfg.section('euler')
    econ = closed_form.ClosedFormEconomy.from_params(run_cfg.preference)
    cfg = build_euler_config(run_cfg, econ)

    path = euler.solve_path(cfg, float(section['e0']), section['mode'])
    write_csv(path.to_frame(), os.path.join(run_cfg.output_dir, 'path.csv'))

    dist = run_cfg.amoroso_params(resolve_scale(run_cfg, econ))
    rate = cfg.rates[0] if cfg.rates else float(section['rate'])
    panel = euler.panel_evolution_check(cfg, dist, rate, int(section['households']), run_cfg.seed)
    table = panel['quantiles'].copy()
    table['scale_factor'] = panel['scale_factor']
    table['ks_statistic'] = panel['ks_statistic']
    table['ks_pvalue'] = panel['ks_pvalue']
    table['ks_passed'] = panel['ks_pvalue'] > euler.KS_LEVEL
    write_csv(table, os.path.join(run_cfg.output_dir, 'panel.csv'))

    if not panel['passed']:
        logger.warning("La evolución simulada del panel no coincide con la Amoroso predicha")
    return EXIT_OK


def cmd_logit(run_cfg, args):
    """Probabilidades logit, participaciones con el índice ideal, oráculo y frecuencias simuladas."""
    logger = logging.getLogger('nhces')
    section = run_cfg.section('logit')
    params = run_cfg.logit_preference()
    goods = sample_goods_grid(params, int(section['n_goods']), run_cfg.seed)
    econ = logit.LogitEconomy.from_grid(goods, params.rho, float(section['expenditure']))

    households = int(section['households']) if params.rho > 1 else 0
    if params.rho <= 1:
        logger.warning("rho <= 1: mu < 0, solo se reportan las probabilidades analíticas")
    report = logit.share_equivalence_report(econ, households=households, seed=run_cfg.seed)
    table = report['table']
    table.insert(2, 'price', goods.price)
    table.insert(3, 'omega', goods.omega)
    write_csv(table, os.path.join(run_cfg.output_dir, 'logit.csv'))
    return EXIT_OK


def cmd_fig(run_cfg, args):
    """Datos de figuras: dispersión (eps, ln p) o curvas de densidad de Amoroso."""
    logger = logging.getLogger('nhces')
    section = run_cfg.section('fig')
    if args.which == 'joint':
        grid = sample_goods_grid(run_cfg.preference, int(section['joint_goods']), run_cfg.seed)
        df = pd.DataFrame({
            'epsilon': grid.epsilon,
            'log_price': grid.log_price,
            'log_omega': grid.log_omega,
        })
        path = write_csv(df, os.path.join(run_cfg.output_dir, 'fig_joint.csv'))
    else:
        points = int(section['amoroso_points'])
        x_max = float(section['amoroso_x_max'])
        if points < 2 or not x_max > 0:
            raise ConfigError("fig.amoroso_points debe ser >= 2 y fig.amoroso_x_max > 0")
        x = np.linspace(x_max / points, x_max, points)
        df = pd.DataFrame({'x': x})
        if not isinstance(section['amoroso_params'], list):
            raise ConfigError("fig.amoroso_params debe ser una lista de objetos {k, m, n}")
        for entry in section['amoroso_params']:
            p = AmorosoParams.from_dict(entry)
            df[f"pdf_k{p.k:g}_m{p.m:g}_n{p.n:g}"] = amoroso_pdf(p, x)
        path = write_csv(df, os.path.join(run_cfg.output_dir, 'fig_amoroso.csv'))
    logger.info(f"Datos de figura '{args.which}' en {path}")
    return EXIT_OK


def cmd_verify(run_cfg, args):
    """Ejecuta la batería completa de invariantes; 0 si todo aprueba, 1 si algo falla."""
    engine = VerificationEngine(run_cfg, solve_runner=run_solve)
    passed = engine.run()
    print(engine.generate_text_report(), end='')
    return EXIT_OK if passed else EXIT_VERIFY_FAILED


def init_config(args):
    """Escribe el archivo de configuración por defecto."""
    logger = logging.getLogger('nhces')
    path = args.path or DEFAULT_CONFIG_PATH
    write_text(dump_config(default_config()), path)
    logger.info(f"Configuración por defecto escrita en {path}")
    return EXIT_OK


COMMANDS = {
    'solve': cmd_solve,
    'aggregate': cmd_aggregate,
    'euler': cmd_euler,
    'logit': cmd_logit,
    'fig': cmd_fig,
    'verify': cmd_verify,
}


def build_parser():
    parser = argparse.ArgumentParser(prog='nhces', description='Toolkit de demanda CES no homotética')
    subparsers = parser.add_subparsers(dest='command', help='Comando a ejecutar')

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('-c', '--config', help='Ruta al archivo de configuración JSON')
    common.add_argument('--seed', type=int, help='Semilla (sobrescribe la configuración)')
    common.add_argument('--out', help='Directorio de salida')
    common.add_argument('--expenditures', type=parse_expenditures,
                        help='Niveles de gasto separados por comas, p. ej. 0.5,1,2')
    common.add_argument('--dump-config', action='store_true',
                        help='Imprime la configuración resuelta y termina')
    common.add_argument('-v', '--verbose', action='store_true', help='Mensajes DEBUG en consola')
    common.add_argument('--log-dir', default='logs', help='Directorio de logs')

    subparsers.add_parser('solve', parents=[common], help='Demanda por bien y mapeo gasto-utilidad')
    subparsers.add_parser('aggregate', parents=[common], help='Participaciones agregadas')
    subparsers.add_parser('euler', parents=[common], help='Trayectoria de Euler y panel')
    subparsers.add_parser('logit', parents=[common], help='Equivalencia logit')
    fig_parser = subparsers.add_parser('fig', parents=[common], help='Datos de figuras')
    fig_parser.add_argument('which', choices=['joint', 'amoroso'], help='Figura a generar')
    subparsers.add_parser('verify', parents=[common], help='Batería de verificación')

    init_parser = subparsers.add_parser('init', help='Inicializar el archivo de configuración')
    init_parser.add_argument('--path', help=f'Destino (por defecto {DEFAULT_CONFIG_PATH})')
    init_parser.add_argument('--log-dir', default='logs', help='Directorio de logs')
    return parser


def main(argv=None):
    """Punto de entrada; devuelve el código de salida."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG_ERROR

    logger = setup_logging(log_dir=args.log_dir, verbose=getattr(args, 'verbose', False))

    try:
        if args.command == 'init':
            return init_config(args)

        raw = load_config(args.config)
        run_cfg = build_run_config(raw, seed=args.seed, output_dir=args.out,
                                   expenditures=args.expenditures)
        if args.dump_config:
            print(dump_config(run_cfg.raw), end='')
            return EXIT_OK

        os.makedirs(run_cfg.output_dir, exist_ok=True)
        logger.info(f"Ejecutando '{args.command}' (semilla {run_cfg.seed}, salida {run_cfg.output_dir})")
        return COMMANDS[args.command](run_cfg, args)
    except ConfigError as e:
        logger.error(f"Error de configuración: {e}")
        return EXIT_CONFIG_ERROR
    except NumericalError as e:
        logger.error(f"Error numérico: {e}")
        return EXIT_NUMERICAL_ERROR
    except ArithmeticError as e:
        # Desbordes de float y divisiones por cero fuera de los chequeos explícitos
        logger.error(f"Error numérico ({type(e).__name__}): {e}")
        return EXIT_NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
