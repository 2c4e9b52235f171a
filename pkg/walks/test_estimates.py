from math import comb, log

import mpmath
from django.test import SimpleTestCase

from .services.estimates import EstimateService, EstimateValue
from .services.exact_kernel import KernelService, WalkSpec
from .services.root_system import RankParams
from .services.saddle import SaddleService
from .services.spectral import SpectralService


class EstimateTestBase(SimpleTestCase):

    def setUp(self):
        self.tree = WalkSpec(RankParams(1, 2))
        self.plane = WalkSpec(RankParams(2, 2))


class HeatShapeTestCase(EstimateTestBase):
    """Interior and boundary heat kernel shapes."""

    def test_positive(self):
        """Shapes are positive across an interior grid."""
        for lam in ((0, 0), (2, 1), (3, 3), (6, 0)):
            with self.subTest(lam=lam):
                self.assertGreater(float(EstimateService.heat_shape(8, lam, self.plane)), 0)

    def test_diagram_symmetry(self):
        """lambda and lambda* have the same shape."""
        a = EstimateService.heat_shape(10, (3, 1), self.plane)
        b = EstimateService.heat_shape(10, (1, 3), self.plane)
        self.assertAlmostEqual(float(a.log_value), float(b.log_value), places=8)

    def test_delta(self):
        """delta = (lambda + rho) / (n + r)."""
        self.assertEqual(list(EstimateService.heat_delta(8, (2, 1))), [0.3, 0.2])

    def test_outside_interior(self):
        """|lambda| >= n is outside the interior regime."""
        with self.assertRaises(ValueError):
            EstimateService.heat_shape(4, (2, 2), self.plane)

    def test_boundary_corner(self):
        """On the outer sphere the corner form is (rho/q)^n."""
        shape = EstimateService.boundary_shape_rank2(10, (10, 0), self.plane)
        self.assertTrue(shape.detail['corner'])
        self.assertAlmostEqual(float(shape.log_value), 10 * log(1 / 14), places=10)

    def test_boundary_binomial(self):
        """Away from the corner the shape is n^d (rho/q)^n C(n-d, max - d)."""
        shape = EstimateService.boundary_shape_rank2(10, (5, 4), self.plane)
        self.assertFalse(shape.detail['corner'])
        self.assertEqual(shape.detail['d'], 1)
        expected = log(10) + 10 * log(1 / 14) + log(comb(9, 4))
        self.assertAlmostEqual(float(shape.log_value), expected, places=10)

    def test_boundary_errors(self):
        """The boundary shape needs rank 2 and max(lambda) >= d."""
        with self.assertRaises(ValueError):
            EstimateService.boundary_shape_rank2(4, (2,), self.tree)
        with self.assertRaises(ValueError):
            EstimateService.boundary_shape_rank2(10, (2, 2), self.plane)

    def test_unknown_regime(self):
        """EstimateValue only accepts known regimes."""
        with self.assertRaises(ValueError):
            EstimateValue('lattice', mpmath.mpf(0))


class GreenShapeTestCase(EstimateTestBase):
    """Subcritical and critical Green shapes."""

    def test_tree_subcritical(self):
        """Rank one: |lambda|^-1 e^{-k y0} F0(k)."""
        z = 0.5 * SaddleService.critical_z(self.tree)
        shape = EstimateService.green_shape((3,), z, self.tree)
        y0 = shape.detail['decay_rate']
        expected = -log(3) - 3 * y0 + float(SpectralService.F0((3,), self.tree.params).log())
        self.assertAlmostEqual(float(shape.log_value), expected, places=10)

    def test_critical_exponent(self):
        """Rank two decays like |lambda|^-6 F0 at the critical value."""
        shape = EstimateService.green_shape_critical((2, 1), self.plane)
        f0 = float(SpectralService.F0((2, 1), self.plane.params))
        self.assertAlmostEqual(float(shape.value) * 3 ** 6 / f0, 1.0, places=10)

    def test_origin_excluded(self):
        """The diagonal lambda = 0 has no Green shape."""
        with self.assertRaises(ValueError):
            EstimateService.green_shape_critical((0, 0), self.plane)
        with self.assertRaises(ValueError):
            EstimateService.green_shape((0, 0), 0.5, self.plane)


class TreeShapeTestCase(EstimateTestBase):
    """Rank-one displays."""

    def test_phi_remark(self):
        """phi(delta) = log 2 - phi_remark(delta) on the tree."""
        for delta in (0.0, 0.25, 0.6, 0.9):
            with self.subTest(delta=delta):
                self.assertAlmostEqual(
                    SaddleService.phi([delta], self.tree),
                    log(2) - EstimateService.phi_remark(delta),
                    places=10,
                )
        with self.assertRaises(ValueError):
            EstimateService.phi_remark(1.0)

    def test_tree_shape(self):
        """The display is positive inside 0 < k < n and refuses the ends."""
        shape = EstimateService.tree_remark_shape(10, 4, self.tree.params)
        self.assertGreater(float(shape), 0)
        self.assertLess(float(shape), 1)
        for k in (0, 10):
            with self.subTest(k=k):
                with self.assertRaises(ValueError):
                    EstimateService.tree_remark_shape(10, k, self.tree)
        with self.assertRaises(ValueError):
            EstimateService.tree_remark_shape(10, 4, self.plane)

    def test_tree_shape_against_kernel(self):
        """Exact tree values stay within a bounded factor of the display."""
        walk = self.tree
        for n, k in ((20, 4), (40, 10), (40, 30)):
            with self.subTest(n=n, k=k):
                ratio = float(KernelService.pn_exact(walk, n, (k,))) / float(
                    EstimateService.tree_remark_shape(n, k, walk))
                self.assertGreater(ratio, 1 / 16)
                self.assertLess(ratio, 16)
