from fractions import Fraction
from unittest import mock

from django.test import SimpleTestCase

from .services.root_system import RootSystem
from .services.weight_laurent import IdentityError, IdentityService, LaurentPoly


class LaurentPolyTestCase(SimpleTestCase):
    """Sparse Laurent polynomials over the weight lattice."""

    def test_h_poly_size(self):
        """h has 2^(r+1) - 2 terms, all with coefficient one."""
        for r, expected in ((1, 2), (2, 6), (3, 14)):
            with self.subTest(r=r):
                h = LaurentPoly.h_poly(RootSystem.of_rank(r))
                self.assertEqual(len(h), expected)
                self.assertEqual(h.total(), expected)

    def test_weighted_h_poly(self):
        """Orbit weights multiply each fundamental orbit."""
        rs = RootSystem.of_rank(2)
        h = LaurentPoly.h_poly(rs, (Fraction(1, 21), Fraction(2, 21)))
        self.assertEqual(h[(1, 0)], Fraction(1, 21))
        self.assertEqual(h[(0, 1)], Fraction(2, 21))
        self.assertEqual(h.total(), Fraction(3, 7))
        with self.assertRaises(ValueError):
            LaurentPoly.h_poly(rs, (1,))

    def test_square_of_tree_h(self):
        """(e + e^-1)^2 has constant term 2."""
        h = LaurentPoly.h_poly(RootSystem.of_rank(1))
        square = h ** 2
        self.assertEqual(square[(0,)], 2)
        self.assertEqual(square[(2,)], 1)
        self.assertEqual(square[(1,)], 0)

    def test_powers_match_pow(self):
        """The running power iterator agrees with repeated squaring."""
        h = LaurentPoly.h_poly(RootSystem.of_rank(2))
        for n, power in enumerate(h.powers(4)):
            with self.subTest(n=n):
                self.assertEqual(power, h ** n)

    def test_divide_exact(self):
        """Multiplying then dividing by Delta recovers h^2."""
        rs = RootSystem.of_rank(2)
        h = LaurentPoly.h_poly(rs)
        delta = LaurentPoly.weyl_denominator(rs)
        self.assertEqual((h ** 2 * delta).divide_exact(delta, rs), h ** 2)

    def test_divide_inexact_raises(self):
        """h is not divisible by the alternating Delta."""
        rs = RootSystem.of_rank(1)
        h = LaurentPoly.h_poly(rs)
        with self.assertRaises(IdentityError):
            h.divide_exact(LaurentPoly.weyl_denominator(rs), rs)

    def test_expand_in(self):
        """2 h^2 + 3 is expanded back into its coefficients."""
        rs = RootSystem.of_rank(2)
        h = LaurentPoly.h_poly(rs)
        value = (h ** 2).scale(2) + LaurentPoly.monomial((0, 0), 3)
        self.assertEqual(value.expand_in(h, rs), [3, 0, 2])


class IdentityServiceTestCase(SimpleTestCase):
    """Exact polynomial identities."""

    def test_product_and_denominator(self):
        """Both closed forms hold in ranks one to four."""
        for r in (1, 2, 3, 4):
            with self.subTest(r=r):
                rs = RootSystem.of_rank(r)
                self.assertTrue(IdentityService.product_identity(rs).passed)
                self.assertTrue(IdentityService.denominator_identity(rs).passed)

    def test_rank_two_derivative_identity(self):
        """The explicit rank-two identity holds for small n."""
        rs = RootSystem.of_rank(2)
        for n in range(7):
            with self.subTest(n=n):
                self.assertTrue(IdentityService.rank_two_derivative_identity(rs, n).passed)
        with self.assertRaises(ValueError):
            IdentityService.rank_two_derivative_identity(RootSystem.of_rank(1), 0)

    def test_derivative_constants(self):
        """c_1 = 1 on the tree; c_2 = 2 and c_3 = 1 in rank two, independent of n."""
        self.assertEqual(IdentityService.derivative_constants(RootSystem.of_rank(1), 3), [1])
        rs = RootSystem.of_rank(2)
        for n in range(3):
            with self.subTest(n=n):
                self.assertEqual(IdentityService.derivative_constants(rs, n), [2, 1])

    def test_run_suite(self):
        """The whole suite passes and records the constants per n."""
        report = IdentityService.run_suite(2, 2)
        self.assertTrue(report.passed, report.first_failure)
        self.assertEqual(sorted(report.constants_by_n), [0, 1, 2])

    def test_run_suite_checks_skew_symmetry(self):
        """run_suite records one skew-symmetry check per n."""
        report = IdentityService.run_suite(1, 3)
        skew = [c for c in report.checks if c.name.startswith("W_0-skew")]
        self.assertEqual([c.n for c in skew], [0, 1, 2, 3])
        self.assertTrue(all(c.passed for c in skew))


class SkewSymmetryTestCase(SimpleTestCase):
    """pi(d)[h^(n+N)] changes sign under odd Weyl elements."""

    def test_ranks_one_to_three(self):
        """The derivative of h^(n+N) is W_0-skew for small n."""
        for r, n_max in ((1, 6), (2, 4), (3, 1)):
            rs = RootSystem.of_rank(r)
            for n in range(n_max + 1):
                with self.subTest(r=r, n=n):
                    check = IdentityService.skew_symmetry(rs, n)
                    self.assertTrue(check.passed, check.detail)
                    self.assertEqual(check.n, n)

    def test_invariant_polynomial_fails(self):
        """A W_0-invariant polynomial in place of the derivative is reported as not skew."""
        rs = RootSystem.of_rank(2)
        with mock.patch.object(LaurentPoly, 'pi_derivative', lambda self, rs: self):
            with self.assertLogs('walks.services.weight_laurent', level='ERROR'):
                check = IdentityService.skew_symmetry(rs, 0)
        self.assertFalse(check.passed)
        self.assertIn("under", check.detail)
