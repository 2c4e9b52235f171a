from fractions import Fraction

import mpmath
from django.core.cache import cache
from django.test import SimpleTestCase

from .services.exact_kernel import KernelService, WalkSpec
from .services.root_system import RankParams, RootSystem
from .services.scalars import q_half_power
from .services.spectral import SpectralPoint, SpectralService
from walk_project.settings.config import HARNESS


class SpectralTestBase(SimpleTestCase):

    def setUp(self):
        cache.clear()
        self.tree = RankParams(1, 2)
        self.plane = RankParams(2, 2)


class SphericalFunctionTestCase(SpectralTestBase):
    """c, b, Delta and the spherical functions P_lambda."""

    def test_identity_checks(self):
        """The c identity, P_0 = 1 and the orbit formula hold at random points."""
        for params in (self.tree, self.plane, RankParams(2, 3)):
            for check in SpectralService.identity_checks(params, samples=20):
                with self.subTest(params=params, check=check.name):
                    self.assertTrue(check.passed, check.detail)

    def test_symbol_at_origin(self):
        """The transition symbol at z = 0 is rho~."""
        value = SpectralService.symbol_at(WalkSpec(self.plane), SpectralPoint.real((0, 0, 0)))
        self.assertAlmostEqual(float(value.real), 6 / 7, places=12)

    def test_pole_raises(self):
        """c has a pole on the walls."""
        with self.assertRaises(ValueError):
            SpectralService.c_b_delta(SpectralPoint.real((0, 0)), self.tree)

    def test_rank_mismatch(self):
        """Points must live in the rank of the parameters."""
        with self.assertRaises(ValueError):
            SpectralService.c_b_delta(SpectralPoint.real((1, 0, -1)), self.tree)

    def test_from_coroot_coords(self):
        """alpha_1 in rank 2 has coordinates (1, -1, 0)."""
        point = SpectralPoint.from_coroot_coords((0, 0), (1, 0))
        self.assertEqual(point.s, (1, -1, 0))
        self.assertEqual(point.rank, 2)


class F0TestCase(SpectralTestBase):
    """The spherical value F0(lambda) = P_lambda(0)."""

    def test_origin(self):
        """F0(0) = 1."""
        for r in (1, 2, 3):
            with self.subTest(r=r):
                self.assertEqual(SpectralService.F0((0,) * r, RankParams(r, 2)), 1)

    def test_tree_closed_form(self):
        """Rank one matches q^(-k/2) (1 + k(q-1)/(q+1))."""
        for q in (2, 3):
            for k in range(7):
                with self.subTest(q=q, k=k):
                    self.assertEqual(SpectralService.F0((k,), RankParams(1, q)), SpectralService.tree_F0(q, k))

    def test_diagram_symmetry(self):
        """F0 is invariant under lambda -> lambda*."""
        self.assertEqual(SpectralService.F0((2, 1), self.plane), SpectralService.F0((1, 2), self.plane))

    def test_crosscheck(self):
        """Exact cancellation agrees with numerical extrapolation."""
        for lam in ((1, 0), (1, 1), (2, 1)):
            with self.subTest(lam=lam):
                value = SpectralService.F0(lam, self.plane, crosscheck=True)
                self.assertGreater(value, 0)

    def test_normalized_bracket(self):
        """The normalized value stays inside the configured bracket."""
        for lam in RootSystem.of_rank(2).dominant_weights(4):
            with self.subTest(lam=lam):
                value = SpectralService.f0_normalized(lam, self.plane)
                self.assertGreater(value, HARNESS.F0_BRACKET_LO)
                self.assertLess(value, HARNESS.F0_BRACKET_HI)

    def test_regular_direction(self):
        """Every positive root pairs positively and distinctly with V."""
        for r in (1, 2, 3):
            with self.subTest(r=r):
                rs = RootSystem.of_rank(r)
                v = SpectralService.regular_direction(rs)
                pairings = [v[a] - v[b] for a, b in rs.positive_root_pairs]
                self.assertEqual(sum(v), 0)
                self.assertTrue(all(p > 0 for p in pairings))
                self.assertEqual(len(set(pairings)), len(pairings))

    def test_cauchy_along_rho(self):
        """q_t^(1/2) F0(k rho) / pi(k rho) changes by at most 2% per step along the ray."""
        for r, start in ((1, 20), (2, 30)):
            params = RankParams(r, 2)
            rs = params.root_system
            values = []
            for k in range(start, start + 5):
                lam = (k,) * r
                scaled = SpectralService.F0(lam, params) * q_half_power(rs.q_exponent(lam), 2)
                values.append(float(scaled) / float(rs.pi(lam)))
            for k, (before, after) in enumerate(zip(values, values[1:]), start=start):
                with self.subTest(r=r, k=k):
                    self.assertLess(abs(after / before - 1), 0.02)


class QuadratureTestCase(SpectralTestBase):
    """Inversion integral against the exact kernel."""

    def test_plancherel_mass(self):
        """|W_0| / W_0(q^-1) = 4/3 on the tree with q = 2."""
        self.assertEqual(SpectralService.plancherel_mass(self.tree), Fraction(4, 3))

    def test_tree(self):
        """Rank-one quadrature reproduces the exact kernel."""
        walk = WalkSpec(self.tree)
        for n, k in ((4, 0), (10, 2), (7, 3)):
            with self.subTest(n=n, k=k):
                exact = float(KernelService.pn_exact(walk, n, (k,)))
                approx = float(SpectralService.quadrature_pn(walk, n, (k,)))
                self.assertAlmostEqual(approx / exact, 1.0, places=8)

    def test_rank_two(self):
        """Rank-two quadrature at n = 2."""
        walk = WalkSpec(self.plane)
        exact = float(KernelService.pn_exact(walk, 2, (1, 0)))
        approx = float(SpectralService.quadrature_pn(walk, 2, (1, 0)))
        self.assertAlmostEqual(approx / exact, 1.0, places=8)

    def test_coarse_grid_and_rank(self):
        """Too coarse grids and rank three are refused."""
        walk = WalkSpec(self.tree)
        with self.assertRaises(ValueError):
            SpectralService.quadrature_pn(walk, 4, (0,), grid=8)
        with self.assertRaises(ValueError):
            SpectralService.quadrature_pn(WalkSpec(RankParams(3, 2)), 1, (1, 0, 0))

    def test_parity_zero(self):
        """Unreachable positions integrate to zero."""
        value = SpectralService.quadrature_pn(WalkSpec(self.tree), 3, (0,))
        self.assertLess(abs(value), mpmath.mpf(10) ** -10)

    def test_rank_two_plancherel_form(self):
        """The default rank-two grid avoids the walls, so the Plancherel form runs and matches."""
        walk = WalkSpec(self.plane)
        for n, lam in ((2, (1, 1)), (3, (1, 0))):
            with self.subTest(n=n, lam=lam):
                exact = float(KernelService.pn_exact(walk, n, lam))
                density = SpectralService.quadrature_pn(walk, n, lam, form='plancherel')
                if n == 2:
                    self.assertEqual(SpectralService.quadrature_pn(walk, n, lam), density)
                self.assertAlmostEqual(float(density) / exact, 1.0, places=8)
                delta_b = SpectralService.quadrature_pn(walk, n, lam, form='delta_b')
                self.assertAlmostEqual(float(density) / float(delta_b), 1.0, places=8)

    def test_unknown_form(self):
        """Only the two integrand forms and auto are accepted."""
        with self.assertRaises(ValueError):
            SpectralService.quadrature_pn(WalkSpec(self.tree), 2, (0,), form='simpson')

    def test_rank_two_up_to_ten(self):
        """Rank-two quadrature matches the exact kernel to 1e-8 for n <= 10."""
        walk = WalkSpec(self.plane)
        tables = KernelService.kernel_tables(walk, range(1, 11))
        for n in range(1, 11):
            lam = (n // 2, (n - 1) // 3)
            with self.subTest(n=n, lam=lam):
                exact = float(tables[n].value(lam))
                approx = float(SpectralService.quadrature_pn(walk, n, lam, form='delta_b'))
                if exact > 0:
                    self.assertAlmostEqual(approx / exact, 1.0, places=8)
                else:
                    self.assertLess(abs(approx), 1e-10)

    def test_tree_up_to_twenty(self):
        """Rank-one quadrature matches the exact kernel for n <= 20."""
        walk = WalkSpec(self.tree)
        for n in range(1, 21):
            k = n % 2 + 2 * (n // 4)
            with self.subTest(n=n, k=k):
                exact = float(KernelService.pn_exact(walk, n, (k,)))
                approx = float(SpectralService.quadrature_pn(walk, n, (k,)))
                self.assertAlmostEqual(approx / exact, 1.0, places=8)
