"""
Exact transition probabilities and Green functions of nearest-neighbour walks
on A_r buildings.

The n-step kernel is obtained by coefficient extraction:

    p^n(0, x) = scale^n * q_{t_lam}^(-1/2)
                * sum_w det(w) sum_kappa q^(-|kappa|) coeff_{steps^n}(lam + rho - w rho + v(kappa))

where (scale, steps) is the transition symbol of the walk. The kappa sum is
applied one positive root at a time as the suffix recursion
T(mu) = f(mu) + q^(-1) T(mu + alpha); it is finite because every coefficient
vanishes above the highest point of the support.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil
from typing import Iterable, Mapping, Sequence

import mpmath
import numpy as np
from django.core.cache import cache

from walk_project.settings.config import KERNEL, NUMERIC

from .root_system import RankParams, RootSystem, Weight
from .scalars import QSqrt, ScalarQ, q_half_power
from .weight_laurent import IdentityError, LaurentPoly

logger = logging.getLogger(__name__)

# Fractions of the Green saddle shift tried for the tail majorant
TAIL_SHIFT_FRACTIONS = (0.0, 0.25, 0.5, 0.75, 0.875)


class KernelCeilingError(ValueError):
    """Requested step count is above the configured ceiling for the rank."""


@dataclass(frozen=True)
class WalkSpec:
    """
    Nearest-neighbour walk on the building.

    Attributes:
        params: Rank and thickness
        variant: 'simple' or 'isotropic2'
        p1: One-step probability to each neighbour in V_{lambda_1} (isotropic2 only)
        p2: One-step probability to each neighbour in V_{lambda_2} (isotropic2 only)
    """
    params: RankParams
    variant: str = "simple"
    p1: Fraction | None = None
    p2: Fraction | None = None

    def __post_init__(self):
        if self.variant == "simple":
            if self.p1 is not None or self.p2 is not None:
                raise ValueError("The simple walk takes no step weights")
            return
        if self.variant != "isotropic2":
            raise ValueError(f"Unknown walk variant '{self.variant}'")
        if self.params.r != 2:
            raise ValueError("The weighted isotropic variant is defined for rank 2 only")
        if self.p1 is None or self.p2 is None:
            raise ValueError("The isotropic variant needs both step probabilities")
        object.__setattr__(self, "p1", Fraction(self.p1))
        object.__setattr__(self, "p2", Fraction(self.p2))
        if self.p1 <= 0 or self.p2 <= 0:
            raise ValueError("Step probabilities must be positive")
        rs = self.params.root_system
        q = self.params.q
        mass = (self.p1 * rs.sphere_size((1, 0)).evaluate(q)
                + self.p2 * rs.sphere_size((0, 1)).evaluate(q))
        if mass != 1:
            raise ValueError(f"Step probabilities do not sum to one (p1 N1 + p2 N2 = {mass})")

    @property
    def rs(self) -> RootSystem:
        return self.params.root_system

    @property
    def cache_key(self) -> str:
        base = f"r{self.params.r}q{self.params.q}"
        if self.variant == "simple":
            return f"{base}:simple"
        return f"{base}:iso:{self.p1}:{self.p2}"

    def is_simple_equivalent(self) -> bool:
        if self.variant == "simple":
            return True
        one_step = KernelService.rho(self.params) / self.params.q
        return self.p1 == one_step and self.p2 == one_step

    def transition_symbol(self) -> tuple[QSqrt, LaurentPoly]:
        """
        Fourier transform of the walk as scale * steps.

        Returns:
            (scale, steps): (rho, h) for the simple walk,
            (q_{t_lambda_1}^(1/2), p1 h_1 + p2 h_2) for the isotropic variant
        """
        if self.variant == "simple":
            return KernelService.rho(self.params), LaurentPoly.h_poly(self.rs)
        q = self.params.q
        scale = q_half_power(self.rs.q_exponent((1, 0)), q)
        return scale, LaurentPoly.h_poly(self.rs, (self.p1, self.p2))


@dataclass
class KernelTable:
    """Exact p^n(0, x) for every dominant radial position of length <= n."""
    walk: WalkSpec
    n: int
    entries: dict[Weight, QSqrt] = field(default_factory=dict)

    def value(self, lam: Sequence[int]) -> QSqrt:
        return self.entries.get(tuple(lam), QSqrt(0, 0, self.walk.params.q))

    def positive_items(self) -> list[tuple[Weight, QSqrt]]:
        return [(lam, v) for lam, v in sorted(self.entries.items()) if v.sign() > 0]

    def radial(self) -> dict[Weight, QSqrt]:
        """Radial walk kernel p^n(0, x) * N_lambda."""
        rs = self.walk.rs
        q = self.walk.params.q
        return {lam: v * rs.sphere_size(lam).evaluate(q) for lam, v in sorted(self.entries.items())}


@dataclass
class GreenValue:
    """Truncated Green function with its tail certificate."""
    lam: Weight
    z: QSqrt
    value: QSqrt
    terms: int
    tail_bound: float | None
    tail_estimate: float
    certified: bool
    heuristic: bool

    @property
    def estimated_total(self) -> float:
        return float(self.value) + self.tail_estimate


class _CoefficientTransform:
    """Applies prod over positive roots of (1 - q^-1 e^{-alpha})^-1 coefficient-wise, lazily."""

    def __init__(self, rs: RootSystem, coefficients: Mapping[Weight, object], q: int):
        self.rs = rs
        self.coefficients = coefficients
        self.q_inv = Fraction(1, q)
        self.roots = rs.positive_roots_m
        self.max_height = max((rs.height(mu) for mu in coefficients), default=-1)
        self.memos: list[dict[Weight, object]] = [dict() for _ in self.roots]

    def _stage(self, j: int, mu: Weight):
        if j < 0:
            return self.coefficients.get(mu, 0)
        memo = self.memos[j]
        if mu in memo:
            return memo[mu]
        alpha = self.roots[j]
        height = self.rs.height
        chain = []
        nu = mu
        while nu not in memo and height(nu) <= self.max_height:
            chain.append(nu)
            nu = tuple(a + b for a, b in zip(nu, alpha))
        acc = memo.get(nu, 0)
        for nu in reversed(chain):
            acc = self._stage(j - 1, nu) + acc * self.q_inv
            memo[nu] = acc
        return memo.get(mu, 0)

    def __call__(self, mu: Weight):
        if self.rs.height(mu) > self.max_height:
            return 0
        return self._stage(len(self.roots) - 1, mu)


class KernelService:
    """Exact kernel computations."""

    @staticmethod
    def rho(params: RankParams) -> QSqrt:
        """rho = 1 / sum_i q_{t_lambda_i}^(-1/2) N_{lambda_i}."""
        rs = params.root_system
        total = ScalarQ()
        for k in range(1, rs.r + 1):
            lam = rs.fundamental_weight(k)
            total = total + ScalarQ.u_power(-rs.q_exponent(lam)) * rs.sphere_size(lam)
        return 1 / total.evaluate(params.q)

    @staticmethod
    def spectral_radius(walk: WalkSpec) -> QSqrt:
        scale, steps = walk.transition_symbol()
        return scale * steps.total()

    @staticmethod
    def spectral_radius_closed_form(params: RankParams) -> QSqrt | None:
        """Known closed forms of rho~ for the simple walk in ranks 1 to 3."""
        q = params.q
        sqrt_q = QSqrt.sqrt_q(q)
        if params.r == 1:
            return 2 * sqrt_q / (q + 1)
        if params.r == 2:
            return QSqrt(Fraction(3 * q, q * q + q + 1), 0, q)
        if params.r == 3:
            return 14 * q * q / ((1 + q * q) * ((q * q + q + 1) + 2 * sqrt_q * (q + 1)))
        return None

    @staticmethod
    def check_ceiling(walk: WalkSpec, n: int) -> None:
        if n < 0:
            raise ValueError(f"Step count must be >= 0, got {n}")
        ceiling = KERNEL.kernel_ceiling(walk.params.r)
        if n > ceiling:
            raise KernelCeilingError(
                f"n={n} exceeds the exact-kernel ceiling {ceiling} for rank {walk.params.r}"
            )

    @staticmethod
    def _extract(walk: WalkSpec, coefficients: Mapping[Weight, object],
                 lambdas: Iterable[Weight]) -> dict[Weight, object]:
        """sum_w det(w) T(lam + rho - w rho) for each lam (before scale and q_t factors)."""
        rs = walk.rs
        transform = _CoefficientTransform(rs, coefficients, walk.params.q)
        shifts = [(w.sign, tuple(a - b for a, b in zip(rs.rho, rs.act(w, rs.rho))))
                  for w in rs.weyl_group]
        out = {}
        for lam in lambdas:
            total = 0
            for sign, shift in shifts:
                value = transform(tuple(a + b for a, b in zip(lam, shift)))
                if value:
                    total = total + (value if sign > 0 else -value)
            out[lam] = total
        return out

    @staticmethod
    def _kernel_values(walk: WalkSpec, n: int, power: LaurentPoly,
                       lambdas: Iterable[Weight]) -> dict[Weight, QSqrt]:
        rs = walk.rs
        q = walk.params.q
        scale, _ = walk.transition_symbol()
        factor = scale ** n
        raw = KernelService._extract(walk, dict(power.items()), lambdas)
        return {lam: factor * q_half_power(-rs.q_exponent(lam), q) * value
                for lam, value in raw.items()}

    @staticmethod
    def kernel_table(walk: WalkSpec, n: int) -> KernelTable:
        """
        Exact table of p^n(0, x) over dominant lambda with length <= n.

        Args:
            walk: The walk
            n: Step count

        Returns:
            KernelTable (cached per walk and n)

        Raises:
            KernelCeilingError: if n is above the rank's ceiling
        """
        KernelService.check_ceiling(walk, n)
        key = f"kernel_table:{walk.cache_key}:{n}"
        cached = cache.get(key)
        if cached is not None:
            return cached
        _, steps = walk.transition_symbol()
        lambdas = walk.rs.dominant_weights(n)
        entries = KernelService._kernel_values(walk, n, steps.pow(n), lambdas)
        table = KernelTable(walk=walk, n=n, entries=entries)
        cache.set(key, table, KERNEL.TABLE_CACHE_TIMEOUT)
        logger.info(f"Kernel table built for {walk.cache_key} n={n}: {len(entries)} radial positions")
        return table

    @staticmethod
    def kernel_tables(walk: WalkSpec, ns: Iterable[int]) -> dict[int, KernelTable]:
        """Tables for several n, reusing successive powers of the step polynomial."""
        ns = sorted(set(ns))
        if not ns:
            return {}
        KernelService.check_ceiling(walk, ns[-1])
        wanted = set(ns)
        tables = {}
        missing = []
        for n in ns:
            cached = cache.get(f"kernel_table:{walk.cache_key}:{n}")
            if cached is not None:
                tables[n] = cached
            else:
                missing.append(n)
        if missing:
            _, steps = walk.transition_symbol()
            for n, power in enumerate(steps.powers(missing[-1])):
                if n in wanted and n not in tables:
                    entries = KernelService._kernel_values(walk, n, power, walk.rs.dominant_weights(n))
                    tables[n] = KernelTable(walk=walk, n=n, entries=entries)
                    cache.set(f"kernel_table:{walk.cache_key}:{n}", tables[n], KERNEL.TABLE_CACHE_TIMEOUT)
            logger.info(f"Kernel tables built for {walk.cache_key} n in {missing}")
        return tables

    @staticmethod
    def pn_exact(walk: WalkSpec, n: int, lam: Sequence[int]) -> QSqrt:
        """Exact p^n(0, x) for x with radial part lam; exact zero when unreachable."""
        lam = walk.rs.check_dominant(lam)
        if sum(lam) > n:
            return QSqrt(0, 0, walk.params.q)
        KernelService.check_ceiling(walk, n)
        cached = cache.get(f"kernel_table:{walk.cache_key}:{n}")
        if cached is not None:
            return cached.value(lam)
        _, steps = walk.transition_symbol()
        return KernelService._kernel_values(walk, n, steps.pow(n), [lam])[lam]

    @staticmethod
    def pn_tree_oracle(q: int, n: int, k: int) -> Fraction:
        """
        n-step probability to a fixed vertex at distance k on the (q+1)-regular tree.

        Distance-indexed dynamic program, divided by the sphere size.
        """
        if n < 0 or k < 0:
            raise ValueError("n and k must be non-negative")
        dist = {0: Fraction(1)}
        out_p = Fraction(q, q + 1)
        in_p = Fraction(1, q + 1)
        for _ in range(n):
            nxt: dict[int, Fraction] = {}
            for d, mass in dist.items():
                if d == 0:
                    nxt[1] = nxt.get(1, 0) + mass
                else:
                    nxt[d + 1] = nxt.get(d + 1, 0) + mass * out_p
                    nxt[d - 1] = nxt.get(d - 1, 0) + mass * in_p
            dist = nxt
        sphere = 1 if k == 0 else (q + 1) * q ** (k - 1)
        return dist.get(k, Fraction(0)) / sphere

    @staticmethod
    def mass_identity(walk: WalkSpec, n: int) -> QSqrt:
        """
        Check sum_lambda N_lambda p^n(0, x_lambda) = 1 exactly.

        Raises:
            IdentityError: with the defect when the sum differs from one
        """
        table = KernelService.kernel_table(walk, n)
        total = sum(table.radial().values(), QSqrt(0, 0, walk.params.q))
        if total != 1:
            logger.error(f"Mass identity fails for {walk.cache_key} n={n}: total {total}")
            raise IdentityError(f"Total mass at n={n} is {total}, not 1", difference=total - 1)
        return total

    @staticmethod
    def harnack_constant(walk: WalkSpec, n: int) -> QSqrt:
        """max over neighbouring radial positions of p^n(0, y) / p^{n+1}(0, x)."""
        tables = KernelService.kernel_tables(walk, [n, n + 1])
        now, later = tables[n], tables[n + 1]
        rs = walk.rs
        steps = rs.steps()
        best = QSqrt(0, 0, walk.params.q)
        for lam, denominator in later.entries.items():
            if denominator.sign() <= 0:
                continue
            for step in steps:
                neighbour = rs.dominant_representative(tuple(a + b for a, b in zip(lam, step)))
                numerator = now.value(neighbour)
                if numerator.sign() > 0:
                    ratio = numerator / denominator
                    if ratio > best:
                        best = ratio
        return best

    @staticmethod
    def resolve_z(walk: WalkSpec, z, relative: bool) -> QSqrt:
        """Exact z, either absolute or as a multiple of the critical value 1/rho~."""
        q = walk.params.q
        z = Fraction(z)
        if relative:
            return QSqrt(z, 0, q) / KernelService.spectral_radius(walk)
        return QSqrt(z, 0, q)

    @staticmethod
    def tail_certificates(walk: WalkSpec, lambdas: Iterable[Sequence[int]],
                          z: QSqrt) -> dict[Weight, list[tuple[mpmath.mpf, mpmath.mpf]]]:
        """
        Geometric majorants p^n(0, x) z^n <= C * L^n with L < 1, several per position.

        At a real shift s the spherical function is an eigenfunction of the
        transition operator with eigenvalue gamma(s) = scale * steps(s), so
        sum_lambda N_lambda p^n(0, x_lambda) P_lambda(s) = gamma(s)^n with positive
        terms and p^n(0, x) <= gamma(s)^n / (N_lambda P_lambda(s)). Both s and -w0 s
        are evaluated so the bound holds for either orientation of the sphere.
        The shifts are fractions of the Green saddle point plus a small regular offset.

        Returns:
            Mapping lambda -> list of (L, C); empty when no shift gives L < 1
        """
        from .saddle import SaddleService, cartan_matrix
        from .spectral import SpectralPoint, SpectralService

        rs = walk.rs
        params = walk.params
        zeros = [0.0] * rs.r
        offset = np.linalg.solve(cartan_matrix(rs.r), NUMERIC.GREEN_TAIL_OFFSET * 2.0 ** np.arange(rs.r))
        z_float = float(z)
        out: dict[Weight, list] = {}
        with mpmath.workprec(NUMERIC.WORKING_PRECISION_BITS):
            z_mp = z.to_mpf()
            for lam in lambdas:
                lam = rs.check_dominant(lam)
                s0 = np.zeros(rs.r)
                if sum(lam):
                    try:
                        s0 = SaddleService.green_saddle(lam, z_float, walk).s0.y
                    except (ValueError, ArithmeticError) as exc:
                        logger.warning(f"No Green saddle for lam={lam} at z={z_float:.6g}, shifting from 0: {exc}")
                size = rs.sphere_size(lam).evaluate_mp(params.q)
                pairs = []
                for fraction in TAIL_SHIFT_FRACTIONS:
                    y = fraction * s0 + offset
                    gamma = mpmath.mpf(0)
                    spherical = None
                    try:
                        for coords in (y, y[::-1]):
                            point = SpectralPoint.from_coroot_coords(zeros, [float(v) for v in coords])
                            gamma = max(gamma, SpectralService.symbol_at(walk, point).real)
                            value = SpectralService.macdonald_P(lam, point, params).real
                            spherical = value if spherical is None else min(spherical, value)
                    except ValueError:
                        continue
                    load = z_mp * gamma
                    if load < 1 and spherical > 0:
                        pairs.append((load, 1 / (size * spherical)))
                out[lam] = pairs
        return out

    @staticmethod
    def green_exact(walk: WalkSpec, lambdas: Iterable[Sequence[int]], z: QSqrt,
                    rel_tol: float = 1e-12) -> dict[Weight, GreenValue]:
        """
        Green function G(x, z) = sum_n p^n(0, x) z^n for several radial positions.

        Below the critical value terms are added until the majorant of the tail
        from tail_certificates drops below rel_tol times the partial sum at every
        position, or the Green ceiling is reached. At z = 1/rho~ the sum stops at
        the critical ceiling and the tail is estimated from polynomial decay and
        flagged heuristic.

        Args:
            walk: The walk
            lambdas: Dominant radial positions
            z: Exact z in (0, 1/rho~]
            rel_tol: Target relative size of the certified tail

        Returns:
            Mapping lambda -> GreenValue

        Raises:
            ValueError: if z is outside (0, 1/rho~]
            KernelCeilingError: if a position is longer than the ceiling
        """
        rs = walk.rs
        q = walk.params.q
        lambdas = [rs.check_dominant(lam) for lam in lambdas]
        if not lambdas:
            return {}
        if z.sign() <= 0:
            raise ValueError("z must be positive")
        radius = KernelService.spectral_radius(walk)
        load = radius * z
        if load > 1:
            raise ValueError(f"z={float(z):.6g} is above the critical value 1/rho~={float(1 / radius):.6g}")
        critical = load == 1
        ceiling = KERNEL.green_critical_ceiling(rs.r) if critical else KERNEL.green_ceiling(rs.r)
        if ceiling <= 0:
            raise KernelCeilingError(f"No Green ceiling configured for rank {rs.r}")
        longest = max(sum(lam) for lam in lambdas)
        if longest > ceiling:
            raise KernelCeilingError(f"|lambda|={longest} exceeds the Green ceiling {ceiling}")

        certificates = {} if critical else KernelService.tail_certificates(walk, lambdas, z)
        missing = [lam for lam, pairs in certificates.items() if not pairs]
        if missing:
            logger.warning(f"No tail majorant at z={float(z):.6g} for {missing}")
        q_factors = {lam: q_half_power(-rs.q_exponent(lam), q) for lam in lambdas}
        scale, steps = walk.transition_symbol()
        weight = scale * z
        weight = weight.a if weight.is_rational() else weight

        with mpmath.workprec(NUMERIC.WORKING_PRECISION_BITS):
            load_mp = load.to_mpf()
            z_mp = z.to_mpf()

            def tail_bound_at(lam: Weight, order: int):
                return min((c * x ** (order + 1) / (1 - x) for x, c in certificates.get(lam, [])),
                           default=None)

            def order_needed(lam: Weight, partial) -> int | None:
                if partial <= 0 or not certificates.get(lam):
                    return None
                return min(int(ceil(mpmath.log(rel_tol * partial * (1 - x) / c) / mpmath.log(x))) - 1
                           for x, c in certificates[lam])

            accumulated = LaurentPoly()
            power_last = power_prev = None
            factor = 1
            checkpoint = ceiling if critical else longest
            order = 0
            sums: dict[Weight, object] = {}
            for order, power in enumerate(steps.powers(ceiling)):
                accumulated = accumulated + power.scale(factor)
                factor = factor * weight
                power_prev, power_last = power_last, power
                if order < checkpoint:
                    continue
                sums = KernelService._extract(walk, dict(accumulated.items()), lambdas)
                if critical:
                    break
                targets = [order_needed(lam, (q_factors[lam] * sums[lam]).to_mpf()) for lam in lambdas]
                checkpoint = ceiling if None in targets else min(max(targets), ceiling)
                if checkpoint <= order:
                    break
            last = KernelService._extract(walk, dict(power_last.items()), lambdas)
            prev = KernelService._extract(walk, dict(power_prev.items()), lambdas) if power_prev else {}

            exponent = rs.n_positive + mpmath.mpf(rs.r) / 2
            results = {}
            for lam in lambdas:
                q_factor = q_factors[lam]
                value = q_factor * sums[lam]
                term_last = (q_factor * scale ** order * last[lam]).to_mpf() * z_mp ** order
                term_prev = ((q_factor * scale ** (order - 1) * prev[lam]).to_mpf() * z_mp ** (order - 1)
                             if prev else mpmath.mpf(0))
                recent = (term_last + term_prev) / 2
                if critical:
                    tail_bound = None
                    tail_estimate = recent * order / (exponent - 1)
                    certified = False
                else:
                    tail_bound = tail_bound_at(lam, order)
                    tail_estimate = recent * load_mp / (1 - load_mp)
                    certified = tail_bound is not None and bool(tail_bound <= rel_tol * value.to_mpf())
                results[lam] = GreenValue(
                    lam=lam,
                    z=z,
                    value=value,
                    terms=order,
                    tail_bound=None if tail_bound is None else float(tail_bound),
                    tail_estimate=float(tail_estimate),
                    certified=certified,
                    heuristic=critical,
                )
        uncertified = sum(1 for v in results.values() if not v.certified)
        if uncertified and not critical:
            logger.warning(
                f"Green sums for {walk.cache_key}: {uncertified} values without certified tail "
                f"at the ceiling {ceiling}"
            )
        logger.info(f"Green sums for {walk.cache_key}: {len(results)} positions, {order} terms")
        return results

    @staticmethod
    def green_tree_oracle(q: int, k: int, z) -> mpmath.mpf:
        """
        Closed form of the rank-one Green function at distance k.

        F(z) is the first-passage generating function to a neighbour; the
        return generating function from the origin is 1 / (1 - z F(z)).
        """
        with mpmath.workprec(NUMERIC.WORKING_PRECISION_BITS):
            if isinstance(z, QSqrt):
                z = z.to_mpf()
            elif isinstance(z, Fraction):
                z = mpmath.mpf(z.numerator) / z.denominator
            else:
                z = mpmath.mpf(z)
            discriminant = 1 - 4 * q * z ** 2 / (q + 1) ** 2
            # rounding at the critical value can leave a tiny negative
            if discriminant < -mpmath.mpf(2) ** (-NUMERIC.WORKING_PRECISION_BITS // 2):
                raise ValueError("z is above the critical value of the tree walk")
            discriminant = max(discriminant, 0)
            first_passage = (q + 1) * (1 - mpmath.sqrt(discriminant)) / (2 * q * z)
            return first_passage ** k / (1 - z * first_passage)
