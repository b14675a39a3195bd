import logging
import math
import os
import tempfile
import time

import numpy as np
import pandas as pd
from scipy import integrate

from ..core import oracle
from ..core.distributions import (
    AmorosoParams,
    amoroso_mean,
    amoroso_moment,
    amoroso_pdf,
    amoroso_sample,
    gamma_pdf,
    gumbel_sample,
    make_rng,
)
from ..core.errors import NhcesError
from ..core.preferences import PreferenceParams, quadrature_goods_grid, sample_goods_grid
from ..models import aggregation, closed_form, euler, logit
from ..utils.io_utils import file_sha256, write_csv, write_json, write_text

EULER_MASCHERONI = 0.5772156649015329

CRITERIA = {
    1: 'Mapeo cerrado gasto-utilidad',
    2: 'Elasticidades gasto',
    3: 'Invariancia a beta',
    4: 'Agregación con Amoroso',
    5: 'Ecuación de Euler',
    6: 'Logit y participaciones',
    7: 'Capa de distribuciones',
    8: 'Determinismo de extremo a extremo',
}


class VerificationEngine:
    """
    Ejecuta la batería de invariantes y genera los reportes de verificación.

    Cada comprobación añade filas (criterio, chequeo, valor, tolerancia,
    aprobado); al final se calculan métricas agregadas y se escriben
    ``verify.csv``, ``verify_metrics.json`` y ``verify_report.txt``.
    """

    def __init__(self, run_cfg, results_dir=None, solve_runner=None):
        """
        Args:
            run_cfg (RunConfig): Configuración resuelta.
            results_dir (str): Directorio de reportes (por defecto ``run_cfg.output_dir``).
            solve_runner (callable): (run_cfg, out_dir) -> lista de archivos; se usa en el
                chequeo de determinismo. ``None`` lo omite.
        """
        self.run_cfg = run_cfg
        self.results_dir = results_dir or run_cfg.output_dir
        self.solve_runner = solve_runner
        self.section = run_cfg.section('verify')
        self.seed = run_cfg.seed
        self.results = []
        self.metrics = {}
        self.logger = logging.getLogger('Verification')

    # Registro de resultados

    def _record(self, criterion, check, value, tolerance, passed=None):
        if passed is None:
            passed = bool(np.isfinite(value) and value <= tolerance)
        self.results.append({
            'criterion': criterion,
            'check': check,
            'value': float(value),
            'tolerance': float(tolerance),
            'passed': bool(passed),
        })
        level = logging.INFO if passed else logging.WARNING
        self.logger.log(level, f"[{criterion}] {check}: {value:.3e} (tol {tolerance:.1e}) "
                               f"{'OK' if passed else 'FALLO'}")

    def _guarded(self, criterion, name, check):
        """Ejecuta un grupo de chequeos; un error numérico o de configuración cuenta como fallo."""
        start = time.perf_counter()
        try:
            check()
        except NhcesError as e:
            self.logger.error(f"[{criterion}] {name}: {e}")
            self._record(criterion, f"{name} (error)", math.inf, 0.0, passed=False)
        self.logger.debug(f"[{criterion}] {name} en {time.perf_counter() - start:.2f} s")

    # Criterios

    def check_closed_form_mapping(self):
        """ln U cerrado contra el oráculo sobre grids de cuadratura de 2000 nodos."""
        nodes = int(self.section['quadrature_nodes'])
        perturbation = float(self.section['upsilon_perturbation'])
        expenditures = (0.25, 1.0, 4.0)
        worst = 0.0
        for rho in (0.5, 2.0):
            for alpha in (1.0, 2.0):
                for xi_gap in (0.0, 0.3):
                    params = PreferenceParams(rho=rho, alpha=alpha, xi_p=xi_gap)
                    exact = closed_form.ClosedFormEconomy.from_params(params)
                    econ = closed_form.ClosedFormEconomy(params=params, M=exact.M,
                                                         upsilon=exact.upsilon + perturbation,
                                                         psi=exact.psi)
                    tilt = max(closed_form.exponential_tilt(exact, e) for e in expenditures)
                    grid = quadrature_goods_grid(params, nodes, tilt=tilt)
                    for e in expenditures:
                        dev = abs(closed_form.log_utility_of_expenditure(econ, e)
                                  - oracle.log_utility_of_expenditure(grid, rho, e))
                        worst = max(worst, dev)
        self._record(1, 'max |ln U cerrado - ln U oráculo|', worst, 1e-6)

    def check_elasticities(self):
        """eta cerrada contra diferencias finitas y agregación de Engel."""
        params = self.run_cfg.preference
        econ = closed_form.ClosedFormEconomy.from_params(params)
        expenditures = (0.5, 1.0, 2.0)
        tilt = max(closed_form.exponential_tilt(econ, e) for e in expenditures)
        grid = quadrature_goods_grid(params, int(self.section['quadrature_nodes']), tilt=tilt)

        # 50 bienes repartidos en el cuerpo de la distribución de eps
        bulk = np.flatnonzero(grid.weight > 1e-12 * grid.weight.max())
        chosen = bulk[np.linspace(0, bulk.size - 1, 50).round().astype(int)]

        worst_eta, worst_engel = 0.0, 0.0
        for e in expenditures:
            eta_fd = oracle.expenditure_elasticity_fd(grid, params.rho, e)
            eta_cf = closed_form.expenditure_elasticity(econ, grid.epsilon[chosen], e)
            worst_eta = max(worst_eta, float(np.max(np.abs(eta_cf - eta_fd[chosen]))))
            shares = oracle.demand(grid, params.rho, e).shares
            worst_engel = max(worst_engel, abs(float(np.dot(shares, eta_fd)) - 1.0))
        self._record(2, 'max |eta cerrada - eta diferencias finitas|', worst_eta, 1e-5)
        self._record(2, '|sum s_i eta_i - 1|', worst_engel, 1e-6)

    def check_beta_invariance(self):
        result = closed_form.beta_invariance_check(self.run_cfg.preference, 3.0, self.seed)
        self._record(3, 'desvío relativo (eps, xi) vs (3 eps, xi/3)', result['max_deviation'],
                     closed_form.INVARIANCE_TOL)

    def check_aggregation(self):
        """Forma cerrada contra cuadratura y Monte Carlo, identidad de la forma media y aproximación."""
        eps_values = (0.5, 1.0, 2.0)
        draws = 1_000_000

        substitutes = closed_form.ClosedFormEconomy.from_params(PreferenceParams(rho=2.0, alpha=1.0))
        complements = closed_form.ClosedFormEconomy.from_params(PreferenceParams(rho=0.5, alpha=1.0))
        regimes = (
            aggregation.AggregateEconomy.from_params(substitutes, k=1.0, m=2.0),
            aggregation.AggregateEconomy.from_params(complements, k=1.0, m=3.0),
        )

        worst_quad, worst_identity = 0.0, 0.0
        for agg in regimes:
            for eps in eps_values:
                exact = float(aggregation.aggregate_share(agg, eps, 1.0, 1.0))
                quad = aggregation.quadrature_aggregate_share(agg, eps, 1.0, 1.0)
                mean_form = float(aggregation.aggregate_share_mean_form(agg, eps, 1.0, 1.0))
                worst_quad = max(worst_quad, abs(quad / exact - 1.0))
                worst_identity = max(worst_identity, abs(mean_form / exact - 1.0))
        self._record(4, 'Ec. exacta vs cuadratura (relativo)', worst_quad, 1e-8)
        self._record(4, 'forma exacta vs forma con media (relativo)', worst_identity, 1e-12)

        worst_z = 0.0
        for i, eps in enumerate(eps_values):
            exact = float(aggregation.aggregate_share(regimes[0], eps, 1.0, 1.0))
            mean, se = aggregation.mc_aggregate_share(regimes[0], eps, 1.0, 1.0, draws, self.seed + i)
            worst_z = max(worst_z, abs(mean - exact) / se)
        self._record(4, 'Monte Carlo (errores estándar)', worst_z, 4.0)

        anchored = aggregation.AggregateEconomy.from_params(substitutes, k=1.0, m=50.0)
        _, _, rel_dev = aggregation.approx_deviation(anchored, np.asarray(eps_values), 1.0, 1.0)
        self._record(4, 'aproximación con media, m=50 (relativo)', float(np.max(np.abs(rel_dev))), 0.01)

    def check_inequality_effect(self):
        """Misma media, distinta dispersión: la participación de bienes con eps > 0 cambia con m."""
        substitutes = closed_form.ClosedFormEconomy.from_params(PreferenceParams(rho=2.0, alpha=1.0))
        smallest_change = math.inf
        for eps in (0.5, 1.0, 2.0):
            narrow, wide = aggregation.shares_at_fixed_mean(substitutes, eps, 1.0, 1.0, 1.0, (20.0, 2.0))
            smallest_change = min(smallest_change, abs(wide / narrow - 1.0))
        self._record(4, 'cambio de s_i al variar m con media fija (relativo, mínimo)', smallest_change, 1e-3,
                     passed=bool(np.isfinite(smallest_change) and smallest_change > 1e-3))

    def check_euler(self):
        """Residuos de la trayectoria, factor 2^0.8, escala común y KS del panel."""
        econ = closed_form.ClosedFormEconomy.from_params(self.run_cfg.preference)
        section = self.run_cfg.section('euler')
        rates = self.run_cfg.euler_rates()
        cfg = euler.EulerConfig(econ=econ, theta=float(section['theta']),
                                discount=float(section['discount']), rates=rates,
                                horizon=int(section['horizon']))
        worst = 0.0
        for mode in euler.MODES:
            path = euler.solve_path(cfg, float(section['e0']), mode)
            if path.residuals.size:
                worst = max(worst, float(np.max(np.abs(path.residuals))))
        self._record(5, 'max |residuo de Euler|', worst, euler.RESIDUAL_TOL)

        anchor_econ = closed_form.ClosedFormEconomy.from_params(PreferenceParams(rho=0.5, alpha=2.0))
        anchor = euler.EulerConfig(econ=anchor_econ, theta=1.0, discount=1.0, rates=(1.0,), horizon=1)
        factor = euler.euler_step_normalized(anchor, 1.0, 1.0)
        self._record(5, '|factor de crecimiento - 1.741101|', abs(factor - 1.741101), 1e-6)

        panel = euler.panel_evolution_check(anchor, AmorosoParams(k=1.0, m=10.0, n=-0.25),
                                            1.0, 100_000, self.seed)
        self._record(5, 'max |E_{t+1}/E_t - A|', panel['max_scale_deviation'], euler.SCALE_TOL)
        self._record(5, 'KS p-valor (aprobado si > 0.01)', panel['ks_pvalue'], euler.KS_LEVEL,
                     passed=panel['ks_pvalue'] > euler.KS_LEVEL)

    def check_logit(self):
        """Probabilidades analíticas, participaciones y oráculo; simulación y media Gumbel."""
        section = self.run_cfg.section('logit')
        params = self.run_cfg.logit_preference()
        goods = sample_goods_grid(params, int(section['n_goods']), self.seed)
        econ = logit.LogitEconomy.from_grid(goods, params.rho, float(section['expenditure']))
        households = int(section['households'])

        report = logit.share_equivalence_report(econ, households=households, seed=self.seed)
        self._record(6, '|Pr analítica - participación con p|', report['max_dev_analytic_indexed'], 1e-10)
        self._record(6, '|participación con p - oráculo|', report['max_dev_indexed_oracle'], 1e-10)

        table = report['table']
        if 'simulated_frequency' in table:
            z = np.abs(table['simulated_frequency'] - table['analytic_probability']) / table['std_error']
            self._record(6, 'frecuencias simuladas (errores estándar)', float(z.max()), 4.0)

        draws = 1_000_000
        sample = gumbel_sample(make_rng(self.seed), draws)
        se = math.pi / math.sqrt(6.0) / math.sqrt(draws)
        self._record(6, 'media Gumbel (errores estándar)', abs(sample.mean() - EULER_MASCHERONI) / se, 4.0)

    def check_distributions(self):
        """Normalización de la densidad, reducción a la gamma y momentos contra muestras."""
        parameter_sets = (
            AmorosoParams(k=1.0, m=1.0, n=1.0),
            AmorosoParams(k=2.0, m=3.0, n=1.0),
            AmorosoParams(k=1.0, m=1.5, n=2.0),
            AmorosoParams(k=1.0, m=2.0, n=-1.0),
            AmorosoParams(k=0.5, m=3.0, n=-0.5),
            AmorosoParams(k=1.0, m=4.0, n=-2.0, l=1.0),
        )
        worst_norm = 0.0
        for p in parameter_sets:
            mode = p.l + p.k * max(p.m - 1.0 / p.n, 1e-3) ** (1.0 / p.n) if p.n > 0 else p.l + p.k
            left, _ = integrate.quad(lambda x: amoroso_pdf(p, x), p.l, mode, limit=400)
            right, _ = integrate.quad(lambda x: amoroso_pdf(p, x), mode, np.inf, limit=400)
            worst_norm = max(worst_norm, abs(left + right - 1.0))
        self._record(7, '|integral de la densidad - 1|', worst_norm, 1e-6)

        x = np.linspace(0.05, 10.0, 200)
        worst_gamma = 0.0
        for m, k in ((1.0, 1.0), (2.5, 0.7), (5.0, 2.0)):
            ref = gamma_pdf(x, m, k)
            worst_gamma = max(worst_gamma,
                              float(np.max(np.abs(amoroso_pdf(AmorosoParams(k=k, m=m, n=1.0), x) / ref - 1.0))))
        self._record(7, 'reducción n=1 a la gamma (relativo)', worst_gamma, 1e-12)

        p = AmorosoParams(k=1.0, m=4.0, n=2.0)
        draws = 1_000_000
        sample = amoroso_sample(p, draws, self.seed)
        sd = math.sqrt(amoroso_moment(p, 2.0) - amoroso_mean(p) ** 2)
        z = abs(sample.mean() - amoroso_mean(p)) / (sd / math.sqrt(draws))
        self._record(7, 'media muestral vs momento (errores estándar)', z, 4.0)

    def check_determinism(self):
        """Dos ejecuciones de ``solve`` con la misma semilla deben dar archivos idénticos."""
        if self.solve_runner is None:
            self.logger.warning("Chequeo de determinismo omitido: no hay ejecutor de solve")
            return
        digests = []
        for _ in range(2):
            with tempfile.TemporaryDirectory() as tmp:
                files = self.solve_runner(self.run_cfg, tmp)
                digests.append({os.path.basename(f): file_sha256(f) for f in files})
        mismatches = sum(1 for name in digests[0] if digests[0][name] != digests[1].get(name))
        self._record(8, 'archivos de solve con SHA-256 distinto', mismatches, 0.0,
                     passed=mismatches == 0 and bool(digests[0]))

    # Ejecución y reportes

    def run(self):
        """
        Ejecuta todos los criterios y genera los reportes.

        Returns:
            bool: True si todos los chequeos aprueban.
        """
        start = time.perf_counter()
        self._guarded(1, CRITERIA[1], self.check_closed_form_mapping)
        self._guarded(2, CRITERIA[2], self.check_elasticities)
        self._guarded(3, CRITERIA[3], self.check_beta_invariance)
        self._guarded(4, CRITERIA[4], self.check_aggregation)
        self._guarded(4, CRITERIA[4], self.check_inequality_effect)
        self._guarded(5, CRITERIA[5], self.check_euler)
        self._guarded(6, CRITERIA[6], self.check_logit)
        self._guarded(7, CRITERIA[7], self.check_distributions)
        self._guarded(8, CRITERIA[8], self.check_determinism)
        self.calculate_metrics()
        self.generate_reports()
        self.logger.info(f"Verificación completa en {time.perf_counter() - start:.1f} s")
        return self.metrics['all_passed']

    def results_frame(self):
        return pd.DataFrame(self.results, columns=['criterion', 'check', 'value', 'tolerance', 'passed'])

    def calculate_metrics(self):
        """Resume los resultados por criterio."""
        df = self.results_frame()
        by_criterion = {}
        for criterion, name in CRITERIA.items():
            rows = df[df['criterion'] == criterion]
            by_criterion[str(criterion)] = {
                'name': name,
                'checks': int(len(rows)),
                'passed': bool(rows['passed'].all()),
            }
        self.metrics = {
            'total_checks': int(len(df)),
            'passed_checks': int(df['passed'].sum()),
            'failed_checks': int((~df['passed']).sum()),
            'all_passed': bool(len(df) > 0 and df['passed'].all()),
            'seed': self.seed,
            'upsilon_perturbation': float(self.section['upsilon_perturbation']),
            'criteria': by_criterion,
        }
        return self.metrics

    def generate_reports(self):
        """Escribe verify.csv, verify_metrics.json y verify_report.txt en ``results_dir``."""
        os.makedirs(self.results_dir, exist_ok=True)
        write_csv(self.results_frame(), os.path.join(self.results_dir, 'verify.csv'))
        write_json(self.metrics, os.path.join(self.results_dir, 'verify_metrics.json'))
        write_text(self.generate_text_report(), os.path.join(self.results_dir, 'verify_report.txt'))
        self.logger.info(f"Reportes de verificación generados en {self.results_dir}")

    def generate_text_report(self):
        """Tabla de aprobado/fallo por criterio y por chequeo."""
        report = []
        report.append("=" * 72)
        report.append("VERIFICACIÓN nhCES")
        report.append("=" * 72)
        report.append(f"Semilla: {self.seed}")
        report.append(f"Chequeos: {self.metrics['passed_checks']}/{self.metrics['total_checks']} aprobados")
        report.append("")
        for key, info in self.metrics['criteria'].items():
            status = 'OMITIDO' if info['checks'] == 0 else ('OK' if info['passed'] else 'FALLO')
            report.append(f"{key}. {info['name']:<40} {status}")
            for row in self.results:
                if row['criterion'] == int(key):
                    mark = 'OK' if row['passed'] else 'FALLO'
                    report.append(f"     - {row['check']:<48} {row['value']:>11.3e}  "
                                  f"tol {row['tolerance']:.1e}  {mark}")
        report.append("")
        report.append("RESULTADO: " + ("TODOS LOS CRITERIOS APROBADOS" if self.metrics['all_passed']
                                       else "HAY CRITERIOS FALLIDOS"))
        return "\n".join(report) + "\n"
