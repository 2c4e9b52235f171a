from fractions import Fraction

from django.test import SimpleTestCase

from .services.scalars import QSqrt, ScalarQ, q_half_power


class QSqrtTestCase(SimpleTestCase):
    """Exact arithmetic in Q(sqrt(q))."""

    def test_conjugate_product_is_rational(self):
        """(1 + sqrt 2)(1 - sqrt 2) = -1."""
        a = QSqrt(1, 1, 2)
        self.assertEqual(a * a.conjugate(), -1)
        self.assertTrue((a * a.conjugate()).is_rational())

    def test_inverse(self):
        """x * x^-1 = 1."""
        a = QSqrt(Fraction(2, 3), Fraction(-5, 7), 3)
        self.assertEqual(a * a.inverse(), 1)
        self.assertEqual(a / a, 1)

    def test_division_by_zero(self):
        """Zero has no inverse."""
        with self.assertRaises(ZeroDivisionError):
            QSqrt(0, 0, 2).inverse()

    def test_sign_and_ordering(self):
        """Signs are exact even when the parts have opposite signs."""
        self.assertEqual(QSqrt(1, -1, 2).sign(), -1)
        self.assertEqual(QSqrt(-1, 1, 2).sign(), 1)
        self.assertLess(QSqrt.sqrt_q(2), Fraction(3, 2))
        self.assertGreater(QSqrt.sqrt_q(2), Fraction(7, 5))

    def test_perfect_square_folds(self):
        """sqrt(4) is stored as the rational 2."""
        value = QSqrt.sqrt_q(4)
        self.assertTrue(value.is_rational())
        self.assertEqual(value, 2)

    def test_float_and_parts(self):
        """Decimal rendering and the integer quadruple."""
        value = QSqrt(Fraction(1, 3), Fraction(1, 3), 2)
        self.assertAlmostEqual(float(value), (1 + 2 ** 0.5) / 3, places=14)
        self.assertEqual(value.parts(), (1, 3, 1, 3))
        self.assertEqual(QSqrt.from_parts(value.parts(), 2), value)

    def test_mixing_fields_is_rejected(self):
        """Scalars over different q do not combine."""
        with self.assertRaises(ValueError):
            QSqrt(1, 1, 2) + QSqrt(1, 1, 3)

    def test_q_half_power(self):
        """q^(3/2) and q^(-1) at q = 2."""
        self.assertEqual(q_half_power(3, 2), QSqrt(0, 2, 2))
        self.assertEqual(q_half_power(-2, 2), Fraction(1, 2))


class ScalarQTestCase(SimpleTestCase):
    """Laurent polynomials in u = q^(1/2)."""

    def test_exact_division(self):
        """(u^4 - 1) / (u^2 - 1) = u^2 + 1."""
        numerator = ScalarQ({4: 1, 0: -1})
        denominator = ScalarQ({2: 1, 0: -1})
        self.assertEqual(numerator / denominator, ScalarQ({2: 1, 0: 1}))

    def test_inexact_division_raises(self):
        """u^2 + 1 is not divisible by u - 1."""
        with self.assertRaises(ValueError):
            ScalarQ({2: 1, 0: 1}) / ScalarQ({1: 1, 0: -1})

    def test_evaluate(self):
        """q + 1 at q = 3 and u at q = 2."""
        self.assertEqual((ScalarQ.q_power(1) + 1).evaluate(3), 4)
        self.assertEqual(ScalarQ.u_power(1).evaluate(2), QSqrt.sqrt_q(2))

    def test_monomial_inverse(self):
        """Negative powers exist for monomials only."""
        self.assertEqual(ScalarQ.q_power(2) ** -1, ScalarQ.q_power(-2))
        with self.assertRaises(ValueError):
            ScalarQ({0: 1, 2: 1}) ** -1
