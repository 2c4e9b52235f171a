import csv
import io
import json
import os
import re
import tempfile
from fractions import Fraction
from pathlib import Path

from django.conf import settings
from django.core.cache import cache
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from walk_project.settings import PRODUCTION_ENV

from .utils import parse_fraction, parse_fractions, parse_weight


class BuildingWalkCommandTestCase(SimpleTestCase):
    """Test the building_walk management command."""

    def setUp(self):
        cache.clear()

    def run_command(self, *args):
        out = io.StringIO()
        call_command('building_walk', *args, stdout=out, stderr=io.StringIO())
        return out.getvalue()

    def rows(self, *args):
        return list(csv.DictReader(io.StringIO(self.run_command(*args))))

    def test_kernel_table(self):
        """Test that the kernel action prints exact parts per radial position."""
        rows = self.rows('kernel', '--rank', '1', '--q', '2', '--n', '2')
        origin = next(row for row in rows if row['m_1'] == '0')
        self.assertEqual((origin['exact_num'], origin['exact_den']), ('1', '3'))
        self.assertEqual(len(rows), 3)

    def test_kernel_rank_two(self):
        """Test p^2(0, 0) = 1/14 in rank 2."""
        rows = self.rows('kernel', '--rank', '2', '--n', '2')
        origin = next(row for row in rows if row['m_1'] == '0' and row['m_2'] == '0')
        self.assertEqual((origin['exact_num'], origin['exact_den']), ('1', '14'))

    def test_isotropic_variant(self):
        """Test the weighted variant through --variant."""
        rows = self.rows('kernel', '--rank', '2', '--n', '1', '--variant', '1/21', '2/21')
        by_weight = {(row['m_1'], row['m_2']): row for row in rows}
        self.assertEqual(by_weight[('0', '1')]['exact_num'], '2')
        self.assertEqual(by_weight[('0', '1')]['exact_den'], '21')

    def test_spectral(self):
        """Test rho~ = 6/7 for rank 2 and q = 2."""
        rows = {row['quantity']: row for row in self.rows('spectral', '--rank', '2', '--q', '2')}
        self.assertEqual((rows['rho_tilde']['exact_num'], rows['rho_tilde']['exact_den']), ('6', '7'))
        self.assertIn('rho_tilde_closed_form', rows)

    def test_saddle(self):
        """Test the saddle action at delta = 0."""
        rows = self.rows('saddle', '--rank', '2', '--delta', '0', '0')
        self.assertAlmostEqual(float(rows[0]['y_1']), 0.0, places=10)
        self.assertLess(float(rows[0]['residual']), 1e-10)

    def test_saddle_grid(self):
        """Test that the grid covers every point with |delta| < 1."""
        rows = self.rows('saddle', '--rank', '2', '--grid', '4')
        self.assertEqual(len(rows), 10)

    def test_identities(self):
        """Test that the identity suite passes on the tree."""
        rows = self.rows('identities', '--rank', '1', '--n-max', '2')
        self.assertTrue(all(row['passed'] == 'True' for row in rows))
        self.assertTrue(any(row['check'] == 'derivative constants' for row in rows))

    def test_green_json(self):
        """Test the Green action against the tree closed form."""
        payload = json.loads(self.run_command('green', '--rank', '1', '--lam', '2', '--z', '1/2', '--format', 'json'))
        self.assertEqual(len(payload), 1)
        self.assertTrue(payload[0]['certified'])
        self.assertAlmostEqual(payload[0]['exact_float'] / payload[0]['tree_closed_form'], 1.0, places=9)

    def test_ratio_tree(self):
        """Test a tree ratio run with a loose envelope."""
        payload = json.loads(self.run_command(
            'ratio', '--regime', 'tree', '--rank', '1', '--n', '10', '20',
            '--envelope', '1e6', '--format', 'json',
        ))
        self.assertEqual(payload['summary']['regime'], 'tree')
        self.assertEqual(payload['summary']['points'], 13)
        self.assertTrue(payload['summary']['passed'])

    def test_output_file(self):
        """Test writing rows to a file."""
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'kernel.csv')
            self.run_command('kernel', '--rank', '1', '--n', '3', '--output', path)
            with open(path, encoding='utf-8') as handle:
                self.assertTrue(handle.readline().startswith('n,m_1,'))

    def test_envelope_failure_exit_code(self):
        """Test that a failed envelope exits with code 1."""
        with self.assertRaises(CommandError) as ctx:
            self.run_command('ratio', '--regime', 'tree', '--rank', '1', '--n', '10', '--envelope', '1')
        self.assertEqual(ctx.exception.returncode, 1)

    def test_ceiling_exit_code(self):
        """Test that step counts above the ceiling exit with code 3."""
        with self.assertRaises(CommandError) as ctx:
            self.run_command('kernel', '--rank', '3', '--n', '17')
        self.assertEqual(ctx.exception.returncode, 3)

    def test_input_error_exit_code(self):
        """Test that invalid input exits with code 2."""
        for args in (
            ('kernel', '--rank', '0', '--n', '2'),
            ('saddle', '--rank', '2'),
            ('saddle', '--rank', '2', '--delta', '3/4', '1/2'),
            ('green', '--rank', '1', '--lam', '1', '--z', '2'),
        ):
            with self.subTest(args=args):
                with self.assertRaises(CommandError) as ctx:
                    self.run_command(*args)
                self.assertEqual(ctx.exception.returncode, 2)

    def test_unknown_config_key(self):
        """Test that unknown keys in --config are input errors."""
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'bad.env')
            with open(path, 'w', encoding='utf-8') as handle:
                handle.write('BOGUS = 1\n')
            with self.assertRaises(CommandError) as ctx:
                self.run_command('ratio', '--regime', 'tree', '--rank', '1', '--n', '10', '--config', path)
            self.assertEqual(ctx.exception.returncode, 2)

    def test_missing_subcommand_argument(self):
        """Test that argparse errors surface as CommandError."""
        with self.assertRaises(CommandError):
            self.run_command('kernel', '--rank', '1')


class ParseUtilsTestCase(SimpleTestCase):
    """Test command-line value parsing."""

    def test_parse_fraction(self):
        """Test fractions, decimals and integers parse exactly."""
        self.assertEqual(parse_fraction('3/5'), Fraction(3, 5))
        self.assertEqual(parse_fraction('0.9'), Fraction(9, 10))
        self.assertEqual(parse_fractions(['1', '1/2']), [1, Fraction(1, 2)])
        with self.assertRaises(ValueError):
            parse_fraction('1/0')
        with self.assertRaises(ValueError):
            parse_fraction('half')

    def test_parse_weight(self):
        """Test weight coordinates are integers of the right length."""
        self.assertEqual(parse_weight(['2', '1'], 2), (2, 1))
        with self.assertRaises(ValueError):
            parse_weight(['2'], 2)
        with self.assertRaises(ValueError):
            parse_weight(['a', '1'], 2)


class SettingsSelectionTestCase(SimpleTestCase):
    """Test that the running guide matches the settings switch."""

    def test_documented_env_selects_production(self):
        """Test every DJANGO_ENV value in RUNNING.md is the one that selects prod."""
        text = (Path(settings.BASE_DIR) / 'RUNNING.md').read_text(encoding='utf-8')
        values = re.findall(r'DJANGO_ENV=(\w+)', text)
        self.assertTrue(values)
        self.assertEqual(set(values), {PRODUCTION_ENV})
