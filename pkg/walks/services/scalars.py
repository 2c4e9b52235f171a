"""
Exact scalars used throughout the kernel computations.

QSqrt is an element a + b*sqrt(q) of the quadratic field generated by the
square root of the building parameter. ScalarQ is a Laurent polynomial in the
formal variable u = q^(1/2) with rational coefficients; evaluating it at an
integer q lands in QSqrt.
"""
from __future__ import annotations

from fractions import Fraction
from math import isqrt
from numbers import Rational
from typing import Iterable, Mapping

import mpmath


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    raise TypeError(f"Expected an exact rational, got {type(value).__name__}")


def perfect_square_root(q: int) -> int | None:
    root = isqrt(q)
    return root if root * root == q else None


class QSqrt:
    """Exact element a + b*sqrt(q) with rational a, b."""

    __slots__ = ("a", "b", "q")

    def __init__(self, a=0, b=0, q: int = 2):
        a = _as_fraction(a)
        b = _as_fraction(b)
        root = perfect_square_root(q)
        if root is not None and b:
            a += b * root
            b = Fraction(0)
        self.a = a
        self.b = b
        self.q = q

    @classmethod
    def sqrt_q(cls, q: int) -> QSqrt:
        return cls(0, 1, q)

    def _coerce(self, other) -> QSqrt | None:
        if isinstance(other, QSqrt):
            if other.q != self.q:
                raise ValueError(f"Mixing sqrt({self.q}) and sqrt({other.q}) scalars")
            return other
        if isinstance(other, (int, Rational)):
            return QSqrt(other, 0, self.q)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return QSqrt(self.a + other.a, self.b + other.b, self.q)

    __radd__ = __add__

    def __neg__(self):
        return QSqrt(-self.a, -self.b, self.q)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return QSqrt(self.a - other.a, self.b - other.b, self.q)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other - self

    def __mul__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return QSqrt(
            self.a * other.a + self.q * self.b * other.b,
            self.a * other.b + self.b * other.a,
            self.q,
        )

    __rmul__ = __mul__

    def conjugate(self) -> QSqrt:
        return QSqrt(self.a, -self.b, self.q)

    def norm(self) -> Fraction:
        return self.a * self.a - self.q * self.b * self.b

    def inverse(self) -> QSqrt:
        if self.is_zero():
            raise ZeroDivisionError("QSqrt division by zero")
        n = self.norm()
        return QSqrt(self.a / n, -self.b / n, self.q)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other * self.inverse()

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int):
            return NotImplemented
        if exponent < 0:
            return self.inverse() ** (-exponent)
        result = QSqrt(1, 0, self.q)
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0

    def is_rational(self) -> bool:
        return self.b == 0

    def __bool__(self):
        return not self.is_zero()

    def sign(self) -> int:
        sa = (self.a > 0) - (self.a < 0)
        sb = (self.b > 0) - (self.b < 0)
        if sb == 0 or sa == sb:
            return sa or sb
        if sa == 0:
            return sb
        # opposite signs: compare a^2 with q b^2
        return sa if self.a * self.a > self.q * self.b * self.b else sb

    def __eq__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self.a == other.a and self.b == other.b

    def __hash__(self):
        if self.b == 0:
            return hash(self.a)
        return hash((self.a, self.b, self.q))

    def __lt__(self, other):
        return (self - other).sign() < 0

    def __le__(self, other):
        return (self - other).sign() <= 0

    def __gt__(self, other):
        return (self - other).sign() > 0

    def __ge__(self, other):
        return (self - other).sign() >= 0

    def to_mpf(self) -> mpmath.mpf:
        """High-precision value at the current mpmath working precision."""
        value = mpmath.mpf(self.a.numerator) / self.a.denominator
        if self.b:
            value += mpmath.mpf(self.b.numerator) / self.b.denominator * mpmath.sqrt(self.q)
        return value

    def __float__(self):
        with mpmath.workprec(256):
            return float(self.to_mpf())

    def log(self) -> mpmath.mpf:
        if self.sign() <= 0:
            raise ValueError("log of a non-positive scalar")
        return mpmath.log(self.to_mpf())

    def parts(self) -> tuple[int, int, int, int]:
        """(a_num, a_den, b_num, b_den) integer quadruple for serialization."""
        return (self.a.numerator, self.a.denominator, self.b.numerator, self.b.denominator)

    @classmethod
    def from_parts(cls, parts: Iterable[int], q: int) -> QSqrt:
        a_num, a_den, b_num, b_den = parts
        return cls(Fraction(a_num, a_den), Fraction(b_num, b_den), q)

    def __repr__(self):
        if self.b == 0:
            return f"QSqrt({self.a})"
        return f"QSqrt({self.a} + {self.b}*sqrt({self.q}))"

    def __str__(self):
        if self.b == 0:
            return str(self.a)
        if self.a == 0:
            return f"{self.b}*sqrt({self.q})"
        return f"{self.a} + {self.b}*sqrt({self.q})"


def q_half_power(exponent: int, q: int) -> QSqrt:
    """q^(exponent/2) as an exact QSqrt."""
    half, odd = divmod(exponent, 2)
    base = Fraction(q) ** half
    if odd:
        return QSqrt(0, base, q)
    return QSqrt(base, 0, q)


class ScalarQ:
    """Laurent polynomial in u = q^(1/2) with rational coefficients."""

    __slots__ = ("_coeffs",)

    def __init__(self, coeffs: Mapping[int, object] | None = None):
        clean = {}
        for exponent, value in (coeffs or {}).items():
            value = _as_fraction(value)
            if value:
                clean[int(exponent)] = value
        self._coeffs = clean

    @classmethod
    def constant(cls, value) -> ScalarQ:
        return cls({0: value})

    @classmethod
    def u_power(cls, exponent: int, coefficient=1) -> ScalarQ:
        return cls({exponent: coefficient})

    @classmethod
    def q_power(cls, exponent: int, coefficient=1) -> ScalarQ:
        return cls({2 * exponent: coefficient})

    @property
    def coefficients(self) -> dict[int, Fraction]:
        return dict(self._coeffs)

    def is_zero(self) -> bool:
        return not self._coeffs

    def _coerce(self, other) -> ScalarQ | None:
        if isinstance(other, ScalarQ):
            return other
        if isinstance(other, (int, Rational)):
            return ScalarQ.constant(other)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        merged = dict(self._coeffs)
        for exponent, value in other._coeffs.items():
            merged[exponent] = merged.get(exponent, 0) + value
        return ScalarQ(merged)

    __radd__ = __add__

    def __neg__(self):
        return ScalarQ({k: -v for k, v in self._coeffs.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other - self

    def __mul__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        product: dict[int, Fraction] = {}
        for e1, c1 in self._coeffs.items():
            for e2, c2 in other._coeffs.items():
                product[e1 + e2] = product.get(e1 + e2, 0) + c1 * c2
        return ScalarQ(product)

    __rmul__ = __mul__

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int):
            return NotImplemented
        if exponent < 0:
            if len(self._coeffs) != 1:
                raise ValueError("Only monomials have Laurent inverses")
            (e, c), = self._coeffs.items()
            return ScalarQ({e * exponent: c ** exponent})
        result = ScalarQ.constant(1)
        for _ in range(exponent):
            result = result * self
        return result

    def __truediv__(self, other):
        """Exact division; raises ValueError when the quotient is not a Laurent polynomial."""
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        if other.is_zero():
            raise ZeroDivisionError("ScalarQ division by zero")
        if self.is_zero():
            return ScalarQ()
        num_low = min(self._coeffs)
        den_low = min(other._coeffs)
        remainder = {e - num_low: c for e, c in self._coeffs.items()}
        divisor = {e - den_low: c for e, c in other._coeffs.items()}
        den_deg = max(divisor)
        lead = divisor[den_deg]
        quotient: dict[int, Fraction] = {}
        while remainder and max(remainder) >= den_deg:
            top = max(remainder)
            factor = remainder[top] / lead
            shift = top - den_deg
            quotient[shift] = factor
            for e, c in divisor.items():
                value = remainder.get(e + shift, 0) - factor * c
                if value:
                    remainder[e + shift] = value
                else:
                    remainder.pop(e + shift, None)
        if remainder:
            raise ValueError("ScalarQ division is not exact")
        return ScalarQ({e + num_low - den_low: c for e, c in quotient.items()})

    def evaluate(self, q: int) -> QSqrt:
        """Exact value at u = sqrt(q)."""
        total = QSqrt(0, 0, q)
        for exponent, value in self._coeffs.items():
            total = total + q_half_power(exponent, q) * value
        return total

    def evaluate_mp(self, q) -> mpmath.mpf:
        u = mpmath.sqrt(mpmath.mpf(q))
        return mpmath.fsum(mpmath.mpf(c.numerator) / c.denominator * u ** e
                           for e, c in self._coeffs.items())

    def __eq__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self._coeffs == other._coeffs

    def __hash__(self):
        return hash(frozenset(self._coeffs.items()))

    def __repr__(self):
        if not self._coeffs:
            return "ScalarQ(0)"
        terms = " + ".join(f"{c}*u^{e}" for e, c in sorted(self._coeffs.items(), reverse=True))
        return f"ScalarQ({terms})"
