"""
Django management command for exact kernels, saddle points and ratio reports
of random walks on A_r buildings.

Usage:
    python manage.py building_walk kernel --rank 2 --q 2 --n 6
    python manage.py building_walk ratio --regime interior --rank 2 --q 2 --n 16 24 32 40
    python manage.py building_walk ratio --regime green --rank 2 --q 2 --z 1/4 1/2
    python manage.py building_walk identities --rank 2 --n-max 6
    python manage.py building_walk saddle --rank 2 --delta 1/5 1/5
    python manage.py building_walk spectral --rank 2 --q 2
    python manage.py building_walk green --rank 1 --q 2 --lam 3 --z 1/2

Exit codes: 0 pass, 1 envelope or identity failure, 2 input error, 3 ceiling.
"""
import logging
import os
import numpy as np
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from walk_project.settings.config import HARNESS
from walks.services.estimates import EstimateService
from walks.services.exact_kernel import KernelCeilingError, KernelService, WalkSpec
from walks.services.ratio_report import (
    RatioService,
    exact_columns,
    kernel_rows,
    report_rows,
    to_csv,
    to_json,
    weight_columns,
)
from walks.services.root_system import RankParams
from walks.services.saddle import SaddleService
from walks.services.spectral import SpectralService
from walks.services.weight_laurent import IdentityCheck, IdentityError, IdentityService
from walks.utils import parse_fraction, parse_fractions, parse_weight

logger = logging.getLogger(__name__)

ACTIONS = ('kernel', 'ratio', 'identities', 'saddle', 'spectral', 'green')

DEFAULT_NS = {
    'interior': {1: [16, 24, 32, 40], 2: [16, 24, 32, 40], 3: [4, 6, 8, 12]},
    'boundary': {2: [8, 16, 24, 32, 40]},
    'tree': {1: [10, 20, 40, 80]},
}

# Relative Green z per rank
DEFAULT_GREEN_Z = {1: ['1/2', '9/10'], 2: ['1/4', '1/2']}


class Command(BaseCommand):
    help = 'Exact kernels, saddle points and ratio-envelope reports for walks on A_r buildings'

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest='action', required=True)
        for action in ACTIONS:
            sub = subparsers.add_parser(action)
            self._add_common(sub)
        subparsers.choices['kernel'].add_argument('--n', type=int, required=True, help='Step count')
        ratio = subparsers.choices['ratio']
        ratio.add_argument(
            '--regime',
            choices=['interior', 'boundary', 'green', 'green_critical', 'tree'],
            required=True,
        )
        ratio.add_argument('--n', type=int, nargs='+', help='Step counts (default per regime)')
        ratio.add_argument('--z', nargs='+', help='Green z values (default per rank)')
        ratio.add_argument('--absolute', action='store_true', help='Read --z as absolute values')
        ratio.add_argument('--lengths', type=int, nargs=2, metavar=('MIN', 'MAX'),
                           help='Range of |lambda| for the Green regimes')
        ratio.add_argument('--envelope', type=float, help='Override the spread envelope')
        ratio.add_argument('--config', help='key = value file overriding harness settings')
        subparsers.choices['identities'].add_argument('--n-max', type=int, default=4)
        saddle = subparsers.choices['saddle']
        saddle.add_argument('--delta', nargs='+', help='Target delta in fundamental coordinates')
        saddle.add_argument('--grid', type=int, help='Solve on the grid delta_i = k_i / GRID, |delta| < 1')
        green = subparsers.choices['green']
        green.add_argument('--lam', nargs='+', required=True, help='Dominant weight')
        green.add_argument('--z', nargs='+', required=True)
        green.add_argument('--absolute', action='store_true', help='Read --z as absolute values')
        green.add_argument('--rel-tol', type=float, default=1e-12)

    @staticmethod
    def _add_common(parser):
        parser.add_argument('--rank', type=int, required=True, help='Rank r of the root system')
        parser.add_argument('--q', type=int, default=2, help='Thickness of the building')
        parser.add_argument('--variant', nargs=2, metavar=('P1', 'P2'),
                            help='Isotropic rank-2 walk with one-step probabilities P1, P2')
        parser.add_argument('--format', choices=['csv', 'json'], default='csv')
        parser.add_argument('--output', help='Write to this file instead of stdout')

    def handle(self, *args, **options):
        action = options['action']
        try:
            walk = self._walk(options)
            failed = getattr(self, f'_{action}')(walk, options)
        except KernelCeilingError as exc:
            logger.warning(f'building_walk {action}: {exc}')
            raise CommandError(str(exc), returncode=3)
        except IdentityError as exc:
            logger.error(f'building_walk {action}: {exc}')
            raise CommandError(f'Identity failure: {exc}', returncode=1)
        except ArithmeticError as exc:
            logger.error(f'building_walk {action}: {exc}')
            raise CommandError(str(exc), returncode=1)
        except ValueError as exc:
            raise CommandError(str(exc), returncode=2)
        if failed:
            raise CommandError(failed, returncode=1)

    # helpers

    def _walk(self, options) -> WalkSpec:
        params = RankParams(options['rank'], options['q'])
        if options.get('variant'):
            p1, p2 = parse_fractions(options['variant'])
            return WalkSpec(params, 'isotropic2', p1, p2)
        return WalkSpec(params)

    def _emit(self, options, rows, summary=None):
        if options['format'] == 'json':
            text = to_json(rows, summary) + '\n'
        else:
            text = to_csv(rows)
        if options.get('output'):
            with open(options['output'], 'w', encoding='utf-8', newline='') as handle:
                handle.write(text)
            self.stdout.write(self.style.SUCCESS(f'Wrote {len(rows)} rows to {options["output"]}'))
        else:
            self.stdout.write(text, ending='')
        if summary is not None and options['format'] == 'csv':
            self.stderr.write(
                f"{summary['regime']}: {summary['points']} points, spread {summary['spread']:.4g} "
                f"(envelope {summary['envelope']:g})"
            )

    def _harness(self, options):
        harness = HARNESS
        path = options.get('config')
        if path is None and os.path.exists(settings.ENVELOPE_CONFIG_PATH):
            path = str(settings.ENVELOPE_CONFIG_PATH)
        if path:
            harness = harness.from_file(path)
        return harness

    # actions

    def _kernel(self, walk, options):
        table = KernelService.kernel_table(walk, options['n'])
        KernelService.mass_identity(walk, options['n'])
        self._emit(options, kernel_rows(table))
        return None

    def _ratio(self, walk, options):
        harness = self._harness(options)
        regime = options['regime']
        envelope = options.get('envelope')
        r = walk.params.r
        ns = options.get('n') or DEFAULT_NS.get(regime, {}).get(r)
        if regime in ('interior', 'boundary', 'tree') and not ns:
            raise ValueError(f'No default step counts for regime {regime} at rank {r}; pass --n')
        if regime == 'interior':
            report = RatioService.run_interior(walk, ns, harness, envelope)
        elif regime == 'boundary':
            report = RatioService.run_boundary(walk, ns, harness, envelope)
        elif regime == 'tree':
            report = RatioService.run_tree(walk, ns, harness, envelope)
        elif regime == 'green':
            zs = options.get('z') or DEFAULT_GREEN_Z.get(r)
            if not zs:
                raise ValueError(f'No default Green z values at rank {r}; pass --z')
            low, high = options.get('lengths') or (4, 24)
            report = RatioService.run_green(
                walk, parse_fractions(zs), harness, envelope,
                lengths=range(low, high + 1), relative=not options['absolute'],
            )
        else:
            low, high = options.get('lengths') or (4, 16)
            report = RatioService.run_green_critical(walk, harness, envelope, lengths=range(low, high + 1))
        summary = report.summary()
        self._emit(options, report_rows(report), summary)
        if not report.passed:
            return (
                f'{regime} envelope check failed: spread {report.spread:.4g} vs {report.envelope:g}, '
                f'drift ok={report.drift_ok}, slopes ok={report.slopes_ok}, '
                f'uncertified sums={report.uncertified}'
            )
        self.stderr.write(self.style.SUCCESS(f'{regime}: passed'))
        return None

    def _identities(self, walk, options):
        report = IdentityService.run_suite(walk.params.r, options['n_max'])
        checks = list(report.checks)
        checks.extend(SpectralService.identity_checks(walk.params))
        for n in range(options['n_max'] + 1):
            try:
                KernelService.mass_identity(walk, n)
                checks.append(IdentityCheck('mass of p^n', True, n))
            except IdentityError as exc:
                checks.append(IdentityCheck('mass of p^n', False, n, str(exc)))
        rows = [
            {'check': c.name, 'n': '' if c.n is None else c.n, 'passed': c.passed, 'detail': c.detail}
            for c in checks
        ]
        for n, constants in sorted(report.constants_by_n.items()):
            rows.append({
                'check': 'derivative constants',
                'n': n,
                'passed': True,
                'detail': ' '.join(str(c) for c in constants),
            })
        self._emit(options, rows)
        failed = [c for c in checks if not c.passed]
        if failed:
            return f'{len(failed)} identity checks failed; first: {failed[0].name} (n={failed[0].n})'
        return None

    def _saddle(self, walk, options):
        r = walk.params.r
        if options.get('delta'):
            deltas = [[float(v) for v in parse_fractions(options['delta'])]]
        elif options.get('grid'):
            size = options['grid']
            deltas = []

            def extend(prefix, budget):
                if len(prefix) == r:
                    if budget > 0:
                        deltas.append([k / size for k in prefix])
                    return
                for k in range(budget + 1):
                    extend(prefix + [k], budget - k)

            extend([], size)
        else:
            raise ValueError('saddle needs --delta or --grid')
        rows = []
        worst = 0.0
        for delta in deltas:
            solution = SaddleService.solve_saddle(delta, walk)
            worst = max(worst, solution.residual)
            eigen = float(np.linalg.eigvalsh(solution.hessian).min())
            row = {f'delta_{i + 1}': d for i, d in enumerate(delta)}
            row.update({f'y_{i + 1}': float(v) for i, v in enumerate(solution.y)})
            row.update({
                'phi': solution.phi,
                'residual': solution.residual,
                'hessian_min_eig': eigen,
                'iterations': solution.iterations,
            })
            rows.append(row)
        self._emit(options, rows)
        if worst > 1e-10:
            return f'Saddle residual {worst:.3g} exceeds 1e-10'
        return None

    def _spectral(self, walk, options):
        params = walk.params
        rho = KernelService.rho(params)
        radius = KernelService.spectral_radius(walk)
        closed = KernelService.spectral_radius_closed_form(params) if walk.is_simple_equivalent() else None
        rows = [
            {'quantity': 'rho', **exact_columns(rho)},
            {'quantity': 'rho_tilde', **exact_columns(radius)},
        ]
        if closed is not None:
            rows.append({'quantity': 'rho_tilde_closed_form', **exact_columns(closed)})
        self._emit(options, rows)
        if closed is not None and closed != radius:
            return f'Spectral radius {radius} differs from the closed form {closed}'
        return None

    def _green(self, walk, options):
        rs = walk.rs
        lam = rs.check_dominant(parse_weight(options['lam'], rs.r))
        rows = []
        for z in options['z']:
            z_exact = KernelService.resolve_z(walk, parse_fraction(z), not options['absolute'])
            value = KernelService.green_exact(walk, [lam], z_exact, rel_tol=options['rel_tol'])[lam]
            row = {
                'z': float(z_exact),
                **weight_columns(lam),
                **exact_columns(value.value),
                'terms': value.terms,
                'tail_bound': '' if value.tail_bound is None else value.tail_bound,
                'tail_estimate': value.tail_estimate,
                'certified': value.certified,
                'heuristic': value.heuristic,
            }
            if rs.r == 1:
                row['tree_closed_form'] = float(KernelService.green_tree_oracle(walk.params.q, lam[0], z_exact))
            if sum(lam) > 0:
                if value.heuristic:
                    row['shape'] = float(EstimateService.green_shape_critical(lam, walk))
                else:
                    row['shape'] = float(EstimateService.green_shape(lam, float(z_exact), walk))
            rows.append(row)
        self._emit(options, rows)
        return None
