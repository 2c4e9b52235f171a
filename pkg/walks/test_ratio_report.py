import csv
import io
import json
from dataclasses import replace
from fractions import Fraction

from django.core.cache import cache
from django.test import SimpleTestCase

from .services.exact_kernel import KernelService, WalkSpec
from .services.ratio_report import RatioRecord, RatioReport, RatioService, kernel_rows, report_rows, to_csv, to_json
from .services.root_system import RankParams
from .services.scalars import QSqrt
from walk_project.settings.config import HARNESS


class RatioTestBase(SimpleTestCase):

    def setUp(self):
        cache.clear()
        self.tree = WalkSpec(RankParams(1, 2))
        self.plane = WalkSpec(RankParams(2, 2))


class InteriorRegimeTestCase(RatioTestBase):
    """Interior heat kernel ratios."""

    def test_structure(self):
        """Parity zeros are skipped, ratios are positive and drift is recorded."""
        report = RatioService.run_interior(self.tree, [4, 8], harnack=False)
        self.assertEqual(report.regime, 'interior')
        self.assertIn((4, (1,)), report.zero_points)
        self.assertTrue(report.shapes_positive)
        self.assertTrue(all(r.ratio > 0 for r in report.records))
        self.assertGreaterEqual(report.spread, 1.0)
        self.assertIn('lambda_1:4->8', report.drift)
        self.assertTrue(all(sum(r.lam) <= r.n - 1 for r in report.records))

    def test_small_n_skipped(self):
        """Step counts below the minimum are noted and skipped."""
        report = RatioService.run_interior(self.plane, [2, 4], harnack=True)
        self.assertEqual({r.n for r in report.records}, {4})
        self.assertTrue(any('skipped' in note for note in report.notes))
        self.assertGreater(report.harnack[4], 0)

    def test_envelope_override(self):
        """A tiny envelope fails the regime, a huge one passes the spread check."""
        report = RatioService.run_interior(self.plane, [4], envelope=1.0, harnack=False)
        self.assertFalse(report.passed)
        loose = replace(HARNESS, E_INT=1e9)
        report = RatioService.run_interior(self.plane, [4], harness=loose, harnack=False)
        self.assertEqual(report.envelope, 1e9)
        self.assertTrue(report.spread <= report.envelope)


class OtherRegimesTestCase(RatioTestBase):
    """Boundary, tree and Green regimes."""

    def test_boundary(self):
        """Boundary points satisfy n - |lambda| < K and max >= d."""
        report = RatioService.run_boundary(self.plane, [6])
        self.assertTrue(report.records)
        for record in report.records:
            d = record.n - sum(record.lam)
            self.assertLess(d, HARNESS.K_CFG)
            self.assertGreaterEqual(max(record.lam), d)
        with self.assertRaises(ValueError):
            RatioService.run_boundary(self.tree, [6])

    def test_tree(self):
        """Even k are compared and odd k recorded as zeros at n = 10."""
        report = RatioService.run_tree(self.tree, [10])
        self.assertEqual([r.lam for r in report.records], [(2,), (4,), (6,), (8,)])
        self.assertEqual(len(report.zero_points), 5)

    def test_empty_grid(self):
        """A grid without admissible points raises."""
        with self.assertRaises(ValueError):
            RatioService.run_tree(self.tree, [1])

    def test_green(self):
        """Green ratios along the lambda_1 ray with a fitted slope."""
        report = RatioService.run_green(self.tree, [Fraction(1, 2)], lengths=range(4, 9))
        self.assertEqual(len(report.records), 5)
        self.assertEqual(list(report.slopes), ['lambda_1@z=1/2'])
        fit, expected = report.slopes['lambda_1@z=1/2']
        self.assertLess(expected, 0)
        self.assertTrue(report.shapes_positive)

    def test_green_critical(self):
        """Critical sums carry the heuristic-tail note."""
        report = RatioService.run_green_critical(self.tree, lengths=range(4, 7))
        self.assertEqual(len(report.records), 3)
        self.assertTrue(any('heuristic' in note for note in report.notes))


class SerializationTestCase(RatioTestBase):
    """CSV and JSON rows."""

    def test_report_rows(self):
        """Rows carry the exact parts, the shape and the ratio."""
        report = RatioService.run_tree(self.tree, [10])
        rows = report_rows(report)
        self.assertEqual(list(rows[0])[:2], ['n', 'm_1'])
        parsed = list(csv.DictReader(io.StringIO(to_csv(rows))))
        self.assertEqual(len(parsed), 4)
        self.assertEqual(parsed[0]['m_1'], '2')
        payload = json.loads(to_json(rows, report.summary()))
        self.assertEqual(payload['summary']['regime'], 'tree')
        self.assertEqual(payload['summary']['points'], 4)

    def test_kernel_rows(self):
        """Radial masses in the kernel rows sum to one."""
        rows = kernel_rows(KernelService.kernel_table(self.plane, 3))
        self.assertAlmostEqual(sum(row['radial_float'] for row in rows), 1.0, places=12)
        self.assertEqual(to_csv([]), '')


class CalibratedEnvelopeTestCase(RatioTestBase):
    """The configured envelopes hold on the default q = 2 grids."""

    def test_interior_rank_two(self):
        """Simple walk, n in {16, 24, 32, 40}: spread within E_INT and the drift settles."""
        report = RatioService.run_interior(self.plane, [16, 24, 32, 40], harnack=False)
        self.assertLessEqual(report.spread, HARNESS.E_INT)
        self.assertTrue(report.drift)
        self.assertTrue(report.drift_ok, report.drift)
        self.assertTrue(report.passed)

    def test_isotropic_rank_two(self):
        """The weighted isotropic walk stays within E_INT on the drift-free grid n in {16, 24}."""
        walk = WalkSpec(RankParams(2, 2), 'isotropic2', Fraction(1, 21), Fraction(2, 21))
        report = RatioService.run_interior(walk, [16, 24], harnack=False)
        self.assertLessEqual(report.spread, HARNESS.E_INT)
        self.assertEqual(report.drift, {})

    def test_boundary_rank_two(self):
        """n in {8, ..., 40} on the layer n - |x| < K_CFG: spread within E_BDY."""
        report = RatioService.run_boundary(self.plane, [8, 16, 24, 32, 40])
        self.assertTrue(all(r.n - sum(r.lam) < HARNESS.K_CFG for r in report.records))
        self.assertLessEqual(report.spread, HARNESS.E_BDY)
        self.assertTrue(report.passed)

    def test_interior_rank_three(self):
        """Rank three keeps |x| <= n - K_CFG and skips drift pairs that leave the domain."""
        walk = WalkSpec(RankParams(3, 2))
        report = RatioService.run_interior(walk, [4, 6, 8, 12], harnack=False)
        self.assertTrue(all(sum(r.lam) <= r.n - HARNESS.K_CFG for r in report.records))
        self.assertIn('|lambda| <= n-4', report.grid)
        self.assertTrue(any('drift skipped' in note for note in report.notes))
        self.assertEqual(report.drift, {})
        self.assertLessEqual(report.spread, HARNESS.E_INT3)

    def test_interior_reach(self):
        """n - 1 up to rank two, n - K_CFG from rank three."""
        self.assertEqual(RatioService.interior_reach(2, 10), 9)
        self.assertEqual(RatioService.interior_reach(3, 10), 10 - HARNESS.K_CFG)


class GreenCertificationTestCase(RatioTestBase):
    """Green slopes and the certification gate."""

    def test_tree_slopes_and_certificates(self):
        """Tree sums over |lambda| in [4, 24] are certified and the fitted slopes match."""
        zs = [Fraction(1, 2), Fraction(9, 10)]
        report = RatioService.run_green(self.tree, zs, lengths=range(4, 25))
        self.assertEqual(report.uncertified, 0)
        self.assertTrue(report.certified_ok)
        self.assertEqual(sorted(report.slopes), ['lambda_1@z=1/2', 'lambda_1@z=9/10'])
        for key, (fit, expected) in report.slopes.items():
            with self.subTest(key=key):
                self.assertLess(expected, 0)
                self.assertLess(fit, 0)
        self.assertTrue(report.slopes_ok, report.slopes)

    def test_uncertified_record_fails(self):
        """One sum without a certified tail fails a report that requires certification."""
        record = RatioRecord(n=20, lam=(4,), exact=QSqrt(Fraction(1, 4)), shape=0.25, ratio=1.0,
                             z=0.5, certified=False)
        report = RatioReport(regime='green', rank=1, q=2, grid='test', envelope=64.0,
                             records=[record], requires_certification=True)
        self.assertEqual(report.uncertified, 1)
        self.assertFalse(report.certified_ok)
        self.assertFalse(report.passed)
        self.assertEqual(report.summary()['uncertified'], 1)
        report.requires_certification = False
        self.assertTrue(report.passed)

    def test_certified_flag_in_rows(self):
        """Green rows carry the certification flag."""
        report = RatioService.run_green(self.tree, [Fraction(1, 2)], lengths=range(4, 7))
        rows = report_rows(report)
        self.assertTrue(all(row['certified'] for row in rows))
