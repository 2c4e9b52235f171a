"""
Spectral side of the kernel: c, b and the Weyl denominator on the complexified
Cartan subalgebra, Macdonald polynomials, the spherical value F_0 and a
quadrature evaluation of the inversion integral.

Points of the complexified space are stored by their r+1 coordinates in the
sum-zero hyperplane (see root_system), so <lam, z> = sum_a x_a z_a with x the
partition form of lam.
"""
from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import ceil, factorial, log, prod
from typing import Sequence

import mpmath

from walk_project.settings.config import NUMERIC

from .exact_kernel import WalkSpec
from .root_system import RankParams, RootSystem, Weight
from .scalars import QSqrt, q_half_power
from .weight_laurent import IdentityCheck, IdentityError

logger = logging.getLogger(__name__)

def _mp(value) -> mpmath.mpf:
    if isinstance(value, Fraction):
        return mpmath.mpf(value.numerator) / value.denominator
    return mpmath.mpf(value)


@dataclass(frozen=True)
class SpectralPoint:
    """z = i*theta + s, both given by coordinates in (r+1)-space."""
    theta: tuple
    s: tuple

    @classmethod
    def real(cls, s: Sequence) -> SpectralPoint:
        return cls(tuple(0 for _ in s), tuple(s))

    @classmethod
    def imaginary(cls, theta: Sequence) -> SpectralPoint:
        return cls(tuple(theta), tuple(0 for _ in theta))

    @classmethod
    def from_coroot_coords(cls, theta_y: Sequence, s_y: Sequence) -> SpectralPoint:
        """Point with theta = sum theta_y_i alpha_i and s = sum s_y_i alpha_i."""
        def expand(y):
            padded = [0, *y, 0]
            return tuple(padded[a + 1] - padded[a] for a in range(len(y) + 1))
        return cls(expand(theta_y), expand(s_y))

    @property
    def rank(self) -> int:
        return len(self.s) - 1

    def coords(self) -> list:
        z = [mpmath.mpc(_mp(s), _mp(t)) for t, s in zip(self.theta, self.s)]
        mean = mpmath.fsum(z) / len(z)
        return [v - mean for v in z]

    def act(self, perm: Sequence[int]) -> SpectralPoint:
        return SpectralPoint(tuple(self.theta[i] for i in perm), tuple(self.s[i] for i in perm))


class SpectralService:
    """Numeric evaluation of the spherical-transform objects."""

    @staticmethod
    def _root_exponentials(rs: RootSystem, z: Sequence) -> list:
        """e^{-<alpha, z>} for every positive root."""
        return [mpmath.exp(-(z[a] - z[b])) for a, b in rs.positive_root_pairs]

    @staticmethod
    def _pair(rs: RootSystem, lam: Sequence[int], z: Sequence):
        x = rs.to_partition(lam)
        return mpmath.fsum(xa * za for xa, za in zip(x, z))

    @staticmethod
    def _singular_tol():
        return mpmath.mpf(2) ** (-mpmath.mp.prec // 2)

    @staticmethod
    def c_b_delta(point: SpectralPoint, params: RankParams) -> tuple:
        """
        c(z), b(z) and Delta(z).

        Raises:
            ValueError: if z sits on a pole of c
        """
        rs = params.root_system
        if point.rank != rs.r:
            raise ValueError(f"Point has rank {point.rank}, expected {rs.r}")
        q_inv = mpmath.mpf(1) / params.q
        z = point.coords()
        exps = SpectralService._root_exponentials(rs, z)
        b = mpmath.mpc(1)
        c = mpmath.mpc(1)
        singular = False
        for e in exps:
            numerator = 1 - q_inv * e
            if abs(numerator) == 0:
                raise ArithmeticError("b is singular; impossible for q >= 2 on the closed chamber")
            b /= numerator
            if abs(1 - e) < SpectralService._singular_tol():
                singular = True
            else:
                c *= numerator / (1 - e)
        rho_pair = SpectralService._pair(rs, rs.rho, z)
        delta = mpmath.exp(rho_pair) * prod((1 - e for e in exps), start=mpmath.mpc(1))
        if singular:
            raise ValueError("c has a pole at this point")
        return c, b, delta

    @staticmethod
    def _c_values(params: RankParams, point: SpectralPoint):
        """(w, c(w z), w z) over the Weyl group; raises ValueError near a pole."""
        rs = params.root_system
        out = []
        for w in rs.weyl_group:
            moved = point.act(w.perm)
            c, _, _ = SpectralService.c_b_delta(moved, params)
            out.append((w, c, moved.coords()))
        return out

    @staticmethod
    def macdonald_P(lam: Sequence[int], point: SpectralPoint, params: RankParams):
        """
        Symmetrized c-weighted exponential sum.

        Args:
            lam: Dominant weight
            point: Regular spectral point
            params: Rank and thickness

        Returns:
            Complex value of P_lambda(z)

        Raises:
            ValueError: near a pole of c in the orbit of z
        """
        rs = params.root_system
        lam = rs.check_dominant(lam)
        total = mpmath.fsum(c * mpmath.exp(SpectralService._pair(rs, lam, z))
                            for _, c, z in SpectralService._c_values(params, point))
        prefactor = q_half_power(-rs.q_exponent(lam), params.q).to_mpf() / rs.poincare().evaluate_mp(params.q)
        return prefactor * total

    @staticmethod
    def orbit_formula_P(k: int, point: SpectralPoint, params: RankParams):
        """P_{lambda_k} as q_{t_lambda_k}^(1/2) / N_{lambda_k} times the orbit sum."""
        rs = params.root_system
        lam = rs.fundamental_weight(k)
        z = point.coords()
        orbit_sum = mpmath.fsum(mpmath.exp(SpectralService._pair(rs, mu, z)) for mu in rs.weyl_orbit(k))
        factor = q_half_power(rs.q_exponent(lam), params.q).to_mpf() / rs.sphere_size(lam).evaluate_mp(params.q)
        return factor * orbit_sum

    @staticmethod
    def symbol_at(walk: WalkSpec, point: SpectralPoint):
        """Transition symbol scale * steps(z)."""
        rs = walk.rs
        scale, steps = walk.transition_symbol()
        z = point.coords()
        total = mpmath.fsum(_mp(Fraction(c)) * mpmath.exp(SpectralService._pair(rs, mu, z))
                            for mu, c in steps.items())
        return scale.to_mpf() * total

    @staticmethod
    def regular_direction(rs: RootSystem) -> tuple[int, ...]:
        """
        Integer sum-zero vector V with <alpha_j, V> = (r+1)(r+2)^(j-1).

        All positive-root pairings are positive and pairwise distinct.
        """
        r = rs.r
        base = [sum((r + 2) ** b for b in range(a, r)) for a in range(r + 1)]
        total = sum(base)
        return tuple((r + 1) * v - total for v in base)

    @staticmethod
    @lru_cache(maxsize=None)
    def _f0_rational(r: int, q: int, lam: Weight) -> Fraction:
        """Limit at y = 1 of sum_w c(w t V) e^{<lam, w t V>}, y = e^t, as an exact rational."""
        rs = RootSystem.of_rank(r)
        v = SpectralService.regular_direction(rs)
        x = rs.to_partition(lam)
        q_inv = Fraction(1, q)
        pole_orders = [v[a] - v[b] for a, b in rs.positive_root_pairs]
        numerator: dict[int, Fraction] = {}
        for w in rs.weyl_group:
            wv = w.act(v)
            poly = {sum(xa * va for xa, va in zip(x, wv)): Fraction(1)}
            for a, b in rs.positive_root_pairs:
                k = wv[a] - wv[b]
                factor = {k: Fraction(1), 0: -q_inv} if k > 0 else {-k: q_inv, 0: Fraction(-1)}
                product: dict[int, Fraction] = {}
                for e1, c1 in poly.items():
                    for e2, c2 in factor.items():
                        product[e1 + e2] = product.get(e1 + e2, 0) + c1 * c2
                poly = product
            for e, c in poly.items():
                numerator[e] = numerator.get(e, 0) + c

        def taylor(i: int) -> Fraction:
            # i-th Taylor coefficient at y = 1; binom(j, i) for any integer j
            return sum((c * prod(j - t for t in range(i)) for j, c in numerator.items()),
                       Fraction(0)) / factorial(i)

        order = rs.n_positive
        for i in range(order):
            low = taylor(i)
            if low != 0:
                raise IdentityError(f"Pole of order {order - i} does not cancel in F0{lam}", lam, low)
        return taylor(order) / prod(pole_orders)

    @staticmethod
    def F0(lam: Sequence[int], params: RankParams, crosscheck: bool = False) -> QSqrt:
        """
        P_lambda(0) by exact pole cancellation along a regular direction.

        Args:
            lam: Dominant weight
            params: Rank and thickness
            crosscheck: Also extrapolate numerically and compare

        Returns:
            Exact value in Q(sqrt(q))

        Raises:
            IdentityError: if the exact and extrapolated values disagree
        """
        rs = params.root_system
        lam = rs.check_dominant(lam)
        q = params.q
        limit = SpectralService._f0_rational(rs.r, q, lam)
        value = q_half_power(-rs.q_exponent(lam), q) * (limit / rs.poincare().evaluate(q))
        if crosscheck:
            numeric = SpectralService.F0_numeric(lam, params)
            with mpmath.workprec(NUMERIC.WORKING_PRECISION_BITS):
                exact = value.to_mpf()
                error = abs(numeric - exact) / abs(exact)
            if error > NUMERIC.F0_CROSSCHECK_TOL:
                logger.error(f"F0{lam} exact {float(exact):.12g} vs extrapolated {float(numeric):.12g}")
                raise IdentityError(f"F0{lam}: exact and extrapolated values differ by {float(error):.3g}", lam)
        return value

    @staticmethod
    def F0_numeric(lam: Sequence[int], params: RankParams) -> mpmath.mpf:
        """Richardson extrapolation of P_lambda(t v) as t -> 0 along a normalized regular v."""
        rs = params.root_system
        lam = rs.check_dominant(lam)
        v = SpectralService.regular_direction(rs)
        spread = max(v[a] - v[b] for a, b in rs.positive_root_pairs)
        with mpmath.workprec(2 * NUMERIC.WORKING_PRECISION_BITS):
            direction = [mpmath.mpf(c) / spread for c in v]

            def along(t):
                return SpectralService.macdonald_P(lam, SpectralPoint.real([t * c for c in direction]), params).real

            value = mpmath.limit(along, 0, direction=mpmath.mpf(1) / 4)
        return +value

    @staticmethod
    def tree_F0(q: int, k: int) -> QSqrt:
        """Rank-one closed form q^(-k/2) (1 + k(q-1)/(q+1))."""
        if k < 0:
            raise ValueError("Distance must be non-negative")
        return q_half_power(-k, q) * (1 + Fraction(k * (q - 1), q + 1))

    @staticmethod
    def f0_normalized(lam: Sequence[int], params: RankParams) -> float:
        """q_{t_lambda}^(1/2) F0(lambda) / prod over positive roots of (1 + <alpha, lambda>)."""
        rs = params.root_system
        value = SpectralService.F0(lam, params) * q_half_power(rs.q_exponent(lam), params.q)
        return float(value) / prod(1 + p for p in rs.pairings(lam))

    @staticmethod
    def plancherel_mass(params: RankParams) -> Fraction:
        """Exact mean of |c(i theta)|^-2 over the torus, |W_0| / W_0(q^-1)."""
        rs = params.root_system
        return Fraction(len(rs.weyl_group)) / rs.poincare().evaluate(params.q).a

    @staticmethod
    def grid_size(walk: WalkSpec, n: int, lam: Sequence[int]) -> int:
        """Points per dimension keeping the aliasing error below the guard digits."""
        h0 = float(walk.transition_symbol()[1].total())
        digits = NUMERIC.QUADRATURE_GUARD_DIGITS
        margin = 2 * (n * log(max(h0, 1.0)) + digits * log(10)) / log(walk.params.q)
        return max(n + sum(lam) + ceil(margin) + 4, 4 * n, 8)

    @staticmethod
    def quadrature_pn(walk: WalkSpec, n: int, lam: Sequence[int], grid: int | None = None,
                      form: str = "auto") -> mpmath.mpf:
        """
        p^n(0, x) from the inversion integral, trapezoid rule on one cell of 2 pi Q.

        The grid is shifted by a third of a cell in every direction, which keeps
        each root pairing a third of a step away from the walls in ranks 1 and 2.

        Args:
            walk: The walk
            n: Step count
            lam: Dominant weight
            grid: Points per dimension; default from grid_size
            form: "plancherel" integrates gamma^n conj(P_lambda) against |c|^-2,
                "delta_b" integrates gamma^n e^{-i<lambda, theta>} against Delta b e^{-i<rho, theta>},
                "auto" uses the Plancherel form unless the grid touches a wall

        Returns:
            Approximate probability

        Raises:
            ValueError: if the grid is too coarse, the rank is above 2, the form is
                unknown or the Plancherel form is asked for on a wall
        """
        rs = walk.rs
        lam = rs.check_dominant(lam)
        if rs.r > 2:
            raise ValueError("Quadrature is limited to rank <= 2")
        if form not in ("auto", "plancherel", "delta_b"):
            raise ValueError(f"Unknown quadrature form '{form}'")
        required = SpectralService.grid_size(walk, n, lam)
        points = required if grid is None else grid
        if points < required:
            raise ValueError(f"Grid of {points} points per dimension is below the required {required}")
        params = walk.params
        scale, steps = walk.transition_symbol()
        step_terms = [(rs.to_partition(mu), Fraction(c)) for mu, c in steps.items()]

        with mpmath.workprec(NUMERIC.WORKING_PRECISION_BITS):
            offsets = [mpmath.mpf(1) / 3] * rs.r
            two_pi = 2 * mpmath.pi
            cells = []
            near_wall = False
            wall_tol = NUMERIC.QUADRATURE_WALL_TOL

            def walk_grid(prefix):
                if len(prefix) == rs.r:
                    padded = [0, *prefix, 0]
                    theta = tuple(two_pi * (padded[a + 1] - padded[a]) for a in range(rs.r + 1))
                    cells.append(theta)
                    return
                j = len(prefix)
                for k in range(points):
                    walk_grid(prefix + [(k + offsets[j]) / points])

            walk_grid([])
            for theta in cells:
                for a, b in rs.positive_root_pairs:
                    if abs(mpmath.sin((theta[a] - theta[b]) / 2)) < wall_tol:
                        near_wall = True
                        break
                if near_wall:
                    break
            if near_wall and form == "plancherel":
                raise ValueError("The grid touches a wall, where the Plancherel density form is singular")
            use_delta_b = form == "delta_b" or near_wall

            scale_mp = scale.to_mpf()
            x_lam = rs.to_partition(lam)
            q_inv = mpmath.mpf(1) / params.q
            numerator = []
            denominator = []
            for theta in cells:
                symbol = scale_mp * mpmath.fsum(
                    _mp(c) * mpmath.expj(mpmath.fsum(xa * ta for xa, ta in zip(x, theta)))
                    for x, c in step_terms
                )
                power = symbol ** n
                if use_delta_b:
                    # Delta * b * e^{-i<rho, theta>} = prod (1 - e^{-i alpha}) / (1 - q^-1 e^{-i alpha})
                    weight = mpmath.mpc(1)
                    for a, b in rs.positive_root_pairs:
                        e = mpmath.expj(-(theta[a] - theta[b]))
                        weight *= (1 - e) / (1 - q_inv * e)
                    shift = mpmath.expj(-mpmath.fsum(xa * ta for xa, ta in zip(x_lam, theta)))
                    numerator.append(power * shift * weight)
                    denominator.append(weight)
                else:
                    point = SpectralPoint.imaginary(theta)
                    density = mpmath.mpf(1)
                    for a, b in rs.positive_root_pairs:
                        e = mpmath.expj(-(theta[a] - theta[b]))
                        density *= abs(1 - e) ** 2 / abs(1 - q_inv * e) ** 2
                    p_lam = SpectralService.macdonald_P(lam, point, params)
                    numerator.append(power * mpmath.conj(p_lam) * density)
                    denominator.append(density)
            ratio = mpmath.fsum(numerator) / mpmath.fsum(denominator)
            if use_delta_b:
                ratio *= q_half_power(-rs.q_exponent(lam), params.q).to_mpf()
            if near_wall and form == "auto":
                logger.warning(f"Quadrature n={n} lam={lam}: grid touches a wall, using the Delta*b form")
        logger.info(
            f"Quadrature for {walk.cache_key} n={n} lam={lam} on {points}^{rs.r} points, "
            f"{'Delta*b' if use_delta_b else 'Plancherel'} form"
        )
        return +ratio.real

    @staticmethod
    def identity_checks(params: RankParams, samples: int = 100, seed: int = 0) -> list[IdentityCheck]:
        """
        Numeric checks of 1/c = Delta b e^{-<rho, z>}, of P_0 = 1 and of the
        orbit formula for P_{lambda_k}, at random regular points.
        """
        rs = params.root_system
        rng = random.Random(seed)
        checks = []
        worst = {"c identity": 0.0, "P_0 = 1": 0.0, "orbit formula": 0.0}
        with mpmath.workprec(NUMERIC.WORKING_PRECISION_BITS):
            for _ in range(samples):
                point = SpectralPoint(
                    tuple(rng.uniform(-3, 3) for _ in range(rs.r + 1)),
                    tuple(rng.uniform(-1, 1) for _ in range(rs.r + 1)),
                )
                c, b, delta = SpectralService.c_b_delta(point, params)
                rho_pair = SpectralService._pair(rs, rs.rho, point.coords())
                rhs = delta * b * mpmath.exp(-rho_pair)
                worst["c identity"] = max(worst["c identity"], float(abs(1 / c - rhs) / abs(1 / c)))
                p0 = SpectralService.macdonald_P((0,) * rs.r, point, params)
                worst["P_0 = 1"] = max(worst["P_0 = 1"], float(abs(p0 - 1)))
                for k in range(1, rs.r + 1):
                    lhs = SpectralService.macdonald_P(rs.fundamental_weight(k), point, params)
                    rhs = SpectralService.orbit_formula_P(k, point, params)
                    worst["orbit formula"] = max(worst["orbit formula"], float(abs(lhs - rhs) / abs(rhs)))
        for name, error in worst.items():
            passed = error <= 1e-12
            if not passed:
                logger.error(f"Spectral identity '{name}' fails for rank {rs.r}: max error {error:.3g}")
            checks.append(IdentityCheck(name, passed, None, f"max relative error {error:.3g}"))
        return checks
