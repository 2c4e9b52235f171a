"""
Laurent polynomials over the weight lattice and the exact identity suite.

A LaurentPoly maps weights (integer tuples in fundamental-weight coordinates)
to exact coefficients: ints, Fractions or QSqrt values. Products, powers and
the constant-coefficient operator pi(d) are computed exactly.
"""
from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Iterable, Iterator, Mapping, Sequence

from walk_project.settings.config import KERNEL

from .root_system import RootSystem, Weight

logger = logging.getLogger(__name__)

__all__ = [
    "IdentityCheck",
    "IdentityError",
    "IdentityReport",
    "IdentityService",
    "LaurentPoly",
]


class IdentityError(ArithmeticError):
    """An exact identity failed; carries the first offending weight."""

    def __init__(self, message: str, weight: Weight | None = None, difference=None):
        super().__init__(message)
        self.weight = weight
        self.difference = difference


def _add(mu: Weight, nu: Weight) -> Weight:
    return tuple(a + b for a, b in zip(mu, nu))


def _sub(mu: Weight, nu: Weight) -> Weight:
    return tuple(a - b for a, b in zip(mu, nu))


def exact_div(a, b):
    if isinstance(a, int) and isinstance(b, int):
        return Fraction(a, b)
    return a / b


class LaurentPoly:
    """Finitely supported map weight -> exact coefficient."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[Weight, object] | None = None):
        self._terms = {tuple(mu): c for mu, c in (terms or {}).items() if c}

    @classmethod
    def monomial(cls, mu: Sequence[int], coefficient=1) -> LaurentPoly:
        return cls({tuple(mu): coefficient})

    @classmethod
    def one(cls, rank: int) -> LaurentPoly:
        return cls.monomial((0,) * rank)

    @classmethod
    def _trusted(cls, terms: dict) -> LaurentPoly:
        poly = cls.__new__(cls)
        poly._terms = terms
        return poly

    # mapping protocol

    def __getitem__(self, mu: Sequence[int]):
        return self._terms.get(tuple(mu), 0)

    coeff = __getitem__

    def __contains__(self, mu) -> bool:
        return tuple(mu) in self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[Weight]:
        return iter(self._terms)

    def items(self):
        return self._terms.items()

    @property
    def support(self) -> set[Weight]:
        return set(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def total(self):
        """Sum of all coefficients (value at the origin of the torus)."""
        return sum(self._terms.values())

    # ring operations

    def __add__(self, other: LaurentPoly) -> LaurentPoly:
        merged = dict(self._terms)
        for mu, c in other._terms.items():
            value = merged.get(mu, 0) + c
            if value:
                merged[mu] = value
            else:
                merged.pop(mu, None)
        return LaurentPoly._trusted(merged)

    def __neg__(self) -> LaurentPoly:
        return LaurentPoly._trusted({mu: -c for mu, c in self._terms.items()})

    def __sub__(self, other: LaurentPoly) -> LaurentPoly:
        return self + (-other)

    def scale(self, factor) -> LaurentPoly:
        if not factor:
            return LaurentPoly()
        return LaurentPoly._trusted({mu: c * factor for mu, c in self._terms.items()})

    def shift(self, nu: Sequence[int]) -> LaurentPoly:
        nu = tuple(nu)
        return LaurentPoly._trusted({_add(mu, nu): c for mu, c in self._terms.items()})

    def __mul__(self, other):
        if not isinstance(other, LaurentPoly):
            return self.scale(other)
        small, large = (self, other) if len(self) <= len(other) else (other, self)
        product: dict[Weight, object] = {}
        for nu, d in small._terms.items():
            for mu, c in large._terms.items():
                key = _add(mu, nu)
                product[key] = product.get(key, 0) + c * d
        return LaurentPoly({mu: c for mu, c in product.items() if c})

    def __rmul__(self, other):
        return self.scale(other)

    def __pow__(self, n: int) -> LaurentPoly:
        return self.pow(n)

    def pow(self, n: int) -> LaurentPoly:
        if n < 0:
            raise ValueError("Negative powers of Laurent polynomials are not supported")
        rank = len(next(iter(self._terms))) if self._terms else 0
        result = LaurentPoly.one(rank)
        for _ in range(n):
            result = result * self
        return result

    def powers(self, n_max: int) -> Iterator[LaurentPoly]:
        """Yield f^0, f^1, ..., f^n_max by successive multiplication."""
        rank = len(next(iter(self._terms))) if self._terms else 0
        current = LaurentPoly.one(rank)
        yield current
        for _ in range(n_max):
            current = current * self
            yield current

    def map_coefficients(self, fn) -> LaurentPoly:
        return LaurentPoly({mu: fn(mu, c) for mu, c in self._terms.items()})

    def __eq__(self, other) -> bool:
        if not isinstance(other, LaurentPoly):
            return NotImplemented
        return self._terms == other._terms

    def __repr__(self) -> str:
        return f"LaurentPoly({len(self._terms)} terms)"

    def first_difference(self, other: LaurentPoly, rs: RootSystem):
        """Largest weight (lex order) where the two polynomials differ, or None."""
        diff = self - other
        if diff.is_zero():
            return None
        mu = max(diff.support, key=rs.to_partition)
        return mu, diff[mu]

    # lattice-specific constructions

    @staticmethod
    def h_poly(rs: RootSystem, weights: Sequence | None = None) -> LaurentPoly:
        """
        Sum over the fundamental orbits of e^mu.

        Args:
            rs: Root system
            weights: Optional per-orbit coefficients (p_1, ..., p_r); default all 1

        Returns:
            The step polynomial h (or its weighted variant)
        """
        if weights is not None and len(weights) != rs.r:
            raise ValueError(f"Expected {rs.r} orbit weights, got {len(weights)}")
        terms = {}
        for k in range(1, rs.r + 1):
            coefficient = 1 if weights is None else weights[k - 1]
            for mu in rs.weyl_orbit(k):
                terms[mu] = coefficient
        return LaurentPoly(terms)

    @staticmethod
    def weyl_denominator(rs: RootSystem) -> LaurentPoly:
        """Alternating sum over W_0 of det(w) e^{w rho}."""
        return LaurentPoly({rs.act(w, rs.rho): w.sign for w in rs.weyl_group})

    @staticmethod
    def weyl_denominator_product(rs: RootSystem) -> LaurentPoly:
        """e^{-rho} * prod over positive roots of (e^alpha - 1)."""
        result = LaurentPoly.monomial(tuple(-v for v in rs.rho))
        zero = (0,) * rs.r
        for alpha in rs.positive_roots_m:
            result = result * LaurentPoly({alpha: 1, zero: -1})
        return result

    def pi_derivative(self, rs: RootSystem, subset: Iterable[int] | None = None) -> LaurentPoly:
        """Apply prod_{alpha in subset} D_alpha: coefficient of mu times pi(mu)."""
        subset = None if subset is None else list(subset)
        return self.map_coefficients(lambda mu, c: c * rs.pi(mu, subset))

    def divide_exact(self, divisor: LaurentPoly, rs: RootSystem) -> LaurentPoly:
        """
        Exact quotient by leading-term elimination in lex order of partition form.

        Raises:
            IdentityError: if the division leaves a remainder
        """
        if divisor.is_zero():
            raise ZeroDivisionError("Division by the zero Laurent polynomial")
        order = rs.to_partition
        lead = max(divisor.support, key=order)
        lead_c = divisor[lead]
        remainder = dict(self._terms)
        heap = [(tuple(-v for v in order(mu)), mu) for mu in remainder]
        heapq.heapify(heap)
        queued = set(remainder)
        quotient: dict[Weight, object] = {}
        budget = len(remainder) * max(1, len(divisor)) + 16
        while heap:
            _, mu = heapq.heappop(heap)
            queued.discard(mu)
            c = remainder.get(mu)
            if not c:
                continue
            budget -= 1
            if budget < 0:
                raise IdentityError("Division does not terminate; not divisible", mu, c)
            factor = exact_div(c, lead_c)
            shift = _sub(mu, lead)
            quotient[shift] = quotient.get(shift, 0) + factor
            for nu, d in divisor._terms.items():
                key = _add(shift, nu)
                value = remainder.get(key, 0) - factor * d
                if value:
                    remainder[key] = value
                    if key not in queued:
                        heapq.heappush(heap, (tuple(-v for v in order(key)), key))
                        queued.add(key)
                else:
                    remainder.pop(key, None)
            if len(remainder) > KERNEL.MAX_SUPPORT_SIZE:
                raise IdentityError("Remainder exceeds the support guard", mu, c)
        return LaurentPoly(quotient)

    def expand_in(self, base: LaurentPoly, rs: RootSystem) -> list:
        """
        Coefficients d_j with self = sum_j d_j base^j.

        Raises:
            IdentityError: if self is not a polynomial in base
        """
        order = rs.to_partition
        rank = rs.r
        zero = (0,) * rank
        lead = max(base.support, key=order)
        lead_c = base[lead]
        remainder = self
        coefficients: dict[int, object] = {}
        powers = [LaurentPoly.one(rank)]
        while not remainder.is_zero():
            mu = max(remainder.support, key=order)
            if all(v == 0 for v in lead):
                raise IdentityError("Base has a constant leading term", mu)
            ratios = {exact_div(a, b) for a, b in zip(mu, lead) if b != 0}
            if len(ratios) != 1 or any(a != 0 for a, b in zip(mu, lead) if b == 0):
                raise IdentityError("Not a polynomial in the base", mu, remainder[mu])
            j = ratios.pop()
            if j != int(j) or j < 0 or (j == 0 and mu != zero):
                raise IdentityError("Not a polynomial in the base", mu, remainder[mu])
            j = int(j)
            while len(powers) <= j:
                powers.append(powers[-1] * base)
            d = exact_div(remainder[mu], lead_c ** j)
            coefficients[j] = d
            remainder = remainder - powers[j].scale(d)
        degree = max(coefficients, default=0)
        return [coefficients.get(j, 0) for j in range(degree + 1)]


@dataclass
class IdentityCheck:
    name: str
    passed: bool
    n: int | None = None
    detail: str = ""


@dataclass
class IdentityReport:
    rank: int
    n_max: int
    checks: list[IdentityCheck] = field(default_factory=list)
    constants_by_n: dict[int, list] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def first_failure(self) -> IdentityCheck | None:
        return next((c for c in self.checks if not c.passed), None)


class IdentityService:
    """Exact verification of the polynomial identities behind the kernel formulas."""

    @staticmethod
    def _compare(name: str, lhs: LaurentPoly, rhs: LaurentPoly, rs: RootSystem,
                 n: int | None = None) -> IdentityCheck:
        difference = lhs.first_difference(rhs, rs)
        if difference is None:
            return IdentityCheck(name, True, n)
        mu, value = difference
        logger.error(f"Identity '{name}' (n={n}) fails at weight {mu}: difference {value}")
        return IdentityCheck(name, False, n, f"first mismatch at {mu}: difference {value}")

    @staticmethod
    def _guard(rs: RootSystem, degree: int) -> None:
        estimate = (2 * degree + 1) ** rs.r
        if estimate > KERNEL.MAX_SUPPORT_SIZE:
            raise ValueError(
                f"Support of degree-{degree} powers (~{estimate} terms) exceeds "
                f"MAX_SUPPORT_SIZE={KERNEL.MAX_SUPPORT_SIZE}"
            )

    @staticmethod
    def product_identity(rs: RootSystem) -> IdentityCheck:
        """h + 2 equals the product of (1 + e^{lambda_i - lambda_{i-1}}), lambda_0 = lambda_{r+1} = 0."""
        zero = (0,) * rs.r
        fundamentals = [zero] + [rs.fundamental_weight(k) for k in range(1, rs.r + 1)] + [zero]
        product = LaurentPoly.one(rs.r)
        for i in range(1, rs.r + 2):
            step = _sub(fundamentals[i], fundamentals[i - 1])
            product = product * LaurentPoly({zero: 1, step: 1})
        lhs = LaurentPoly.h_poly(rs) + LaurentPoly.monomial(zero, 2)
        return IdentityService._compare("h+2 product form", lhs, product, rs)

    @staticmethod
    def denominator_identity(rs: RootSystem) -> IdentityCheck:
        return IdentityService._compare(
            "Weyl denominator alternating = product",
            LaurentPoly.weyl_denominator(rs),
            LaurentPoly.weyl_denominator_product(rs),
            rs,
        )

    @staticmethod
    def rank_two_derivative_identity(rs: RootSystem, n: int) -> IdentityCheck:
        """pi(d)[h^{n+3}] = (n+3)(n+2)(n+1)[((n+3)/(n+1)) h + 2] h^n Delta in rank 2."""
        if rs.r != 2:
            raise ValueError("The explicit derivative identity is stated for rank 2 only")
        IdentityService._guard(rs, n + 3)
        h = LaurentPoly.h_poly(rs)
        zero = (0, 0)
        lhs = (h ** (n + 3)).pi_derivative(rs)
        bracket = h.scale(Fraction(n + 3, n + 1)) + LaurentPoly.monomial(zero, 2)
        rhs = (bracket * (h ** n) * LaurentPoly.weyl_denominator(rs)).scale((n + 3) * (n + 2) * (n + 1))
        return IdentityService._compare("rank-2 derivative identity", lhs, rhs, rs, n)

    @staticmethod
    def skew_symmetry(rs: RootSystem, n: int) -> IdentityCheck:
        """pi(d)[h^{n+N}] is W_0-skew: its coefficient at w mu is det(w) times the one at mu."""
        name = "W_0-skew symmetry of pi(d)[h^(n+N)]"
        degree = n + rs.n_positive
        IdentityService._guard(rs, degree)
        target = (LaurentPoly.h_poly(rs) ** degree).pi_derivative(rs)
        for mu, c in target.items():
            for w in rs.weyl_group:
                moved = target[rs.act(w, mu)]
                if moved != w.sign * c:
                    logger.error(f"Skew symmetry fails (n={n}) at {mu} under {w.perm}: {moved} != {w.sign * c}")
                    return IdentityCheck(name, False, n, f"at {mu} under {w.perm}: {moved} != {w.sign * c}")
        return IdentityCheck(name, True, n)

    @staticmethod
    def derivative_constants(rs: RootSystem, n: int) -> list[Fraction]:
        """
        Constants c_r, ..., c_N of pi(d)[h^{n+N}] = (n+N)...(n+1) r_n(h) h^n Delta,
        r_n(h) = sum_k c_k (h+2)^{k-r} h^{N-k} / ((n+1)...(n+N-k)), N = |R^+|.

        Raises:
            IdentityError: if any step of the exact factorization fails
        """
        big_n = rs.n_positive
        r = rs.r
        IdentityService._guard(rs, n + big_n)
        h = LaurentPoly.h_poly(rs)
        target = (h ** (n + big_n)).pi_derivative(rs)
        falling = 1
        for i in range(1, big_n + 1):
            falling *= n + i
        quotient = target.divide_exact(LaurentPoly.weyl_denominator(rs), rs).scale(Fraction(1, falling))
        for _ in range(n):
            quotient = quotient.divide_exact(h, rs)
        d = quotient.expand_in(h, rs)
        if len(d) > big_n - r + 1:
            raise IdentityError(f"Quotient has degree {len(d) - 1} in h, expected {big_n - r}")
        d = d + [0] * (big_n - r + 1 - len(d))

        def partial_falling(k: int) -> int:
            value = 1
            for i in range(1, big_n - k + 1):
                value *= n + i
            return value

        constants: dict[int, Fraction] = {}
        for j in range(big_n - r + 1):
            k_new = big_n - j
            known = 0
            for k in range(k_new + 1, big_n + 1):
                i = j - (big_n - k)
                known += Fraction(constants[k], partial_falling(k)) * comb(k - r, i) * 2 ** (k - r - i)
            constants[k_new] = (Fraction(d[j]) - known) * partial_falling(k_new) / 2 ** (k_new - r)
        return [constants[k] for k in range(r, big_n + 1)]

    @staticmethod
    def run_suite(rank: int, n_max: int) -> IdentityReport:
        """
        Run every identity that applies to the rank.

        Args:
            rank: Root system rank
            n_max: Largest power index for the n-dependent identities

        Returns:
            IdentityReport with one IdentityCheck per identity and n
        """
        rs = RootSystem.of_rank(rank)
        report = IdentityReport(rank=rank, n_max=n_max)
        report.checks.append(IdentityService.product_identity(rs))
        report.checks.append(IdentityService.denominator_identity(rs))

        h = LaurentPoly.h_poly(rs)
        h0 = 2 ** (rank + 1) - 2
        for n, power in enumerate(h.powers(n_max)):
            invariant = all(power[rs.act(w, mu)] == c for mu, c in power.items() for w in rs.weyl_group)
            report.checks.append(IdentityCheck("W_0-invariance of h^n", invariant, n))
            mass_ok = power.total() == h0 ** n
            report.checks.append(IdentityCheck("mass of h^n", mass_ok, n,
                                               "" if mass_ok else f"total {power.total()} != {h0 ** n}"))

        for n in range(n_max + 1):
            report.checks.append(IdentityService.skew_symmetry(rs, n))

        if rank == 2:
            for n in range(n_max + 1):
                report.checks.append(IdentityService.rank_two_derivative_identity(rs, n))

        reference = None
        for n in range(n_max + 1):
            try:
                constants = IdentityService.derivative_constants(rs, n)
            except IdentityError as exc:
                logger.error(f"Derivative factorization failed for rank {rank}, n={n}: {exc}")
                report.checks.append(IdentityCheck("derivative factorization", False, n, str(exc)))
                continue
            report.constants_by_n[n] = constants
            if reference is None:
                reference = constants
            same = constants == reference
            report.checks.append(IdentityCheck(
                "derivative constants independent of n", same, n,
                "" if same else f"{constants} != {reference}",
            ))

        logger.info(
            f"Identity suite rank={rank} n_max={n_max}: "
            f"{sum(c.passed for c in report.checks)}/{len(report.checks)} passed"
        )
        return report
