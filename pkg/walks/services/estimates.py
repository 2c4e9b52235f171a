"""
Closed-form estimate shapes: the right-hand sides of the two-sided heat kernel
and Green function bounds, without their unspecified constants.

Values are carried as logarithms in mpmath so that long walks do not
underflow before the ratio against the exact kernel is taken.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import comb
from typing import Sequence

import mpmath
import numpy as np

from walk_project.settings.config import HARNESS, NUMERIC

from .exact_kernel import KernelService, WalkSpec
from .root_system import RankParams
from .saddle import SaddleService, _symbol_arrays
from .spectral import SpectralService

logger = logging.getLogger(__name__)

REGIMES = ("interior", "boundary", "tree", "green", "green_critical")


@dataclass
class EstimateValue:
    """A positive shape value with the inputs that produced it."""
    regime: str
    log_value: mpmath.mpf
    n: int | None = None
    lam: tuple | None = None
    z: float | None = None
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"Unknown regime '{self.regime}'")

    @property
    def value(self) -> mpmath.mpf:
        return mpmath.exp(self.log_value)

    def __float__(self):
        return float(self.value)


class EstimateService:
    """Shapes of the heat kernel and Green function estimates."""

    @staticmethod
    def heat_delta(n: int, lam: Sequence[int]) -> np.ndarray:
        """delta = (lambda + rho) / (n + r) in fundamental coordinates."""
        r = len(lam)
        return (np.asarray(lam, dtype=float) + 1) / (n + r)

    @staticmethod
    def heat_shape(n: int, lam: Sequence[int], walk: WalkSpec) -> EstimateValue:
        """
        n^-N scale^n e^{n phi(delta)} F0(lambda) / sqrt(n^r prod_alpha (1 - <alpha, delta>)).

        Args:
            n: Step count
            lam: Dominant weight with |lambda| <= n - 1
            walk: The walk

        Returns:
            EstimateValue in the interior regime

        Raises:
            ValueError: outside the interior domain
        """
        rs = walk.rs
        lam = rs.check_dominant(lam)
        if sum(lam) > n - 1:
            raise ValueError(f"|lambda|={sum(lam)} is outside the interior range for n={n}")
        delta = EstimateService.heat_delta(n, lam)
        gaps = [1 - delta[a:b].sum() for a, b in rs.positive_root_pairs]
        if min(gaps) <= 0:
            raise ValueError(f"delta={tuple(delta)} touches the boundary")
        solution = SaddleService.solve_saddle(delta, walk)
        _, _, log_scale = _symbol_arrays(walk)
        with mpmath.workprec(NUMERIC.WORKING_PRECISION_BITS):
            log_n = mpmath.log(n)
            log_value = (
                -rs.n_positive * log_n
                + n * (mpmath.mpf(log_scale) + solution.phi)
                + SpectralService.F0(lam, walk.params).log()
                - (rs.r * log_n + mpmath.fsum(mpmath.log(g) for g in gaps)) / 2
            )
        return EstimateValue("interior", log_value, n=n, lam=lam,
                             detail={"phi": solution.phi, "delta": tuple(float(d) for d in delta)})

    @staticmethod
    def boundary_shape_rank2(n: int, lam: Sequence[int], walk: WalkSpec,
                             corner_width: int | None = None) -> EstimateValue:
        """
        Rank-two shape near |x| = n: n^d (rho/q)^n C(n-d, max(x) - d), d = n - |x|.

        When n - max(x) <= corner_width the corner form n^{(n - max(x)) + d} (rho/q)^n is used.
        """
        if walk.params.r != 2:
            raise ValueError("The boundary shape is stated for rank 2")
        if not walk.is_simple_equivalent():
            raise ValueError("The boundary shape is stated for the simple walk")
        lam = walk.rs.check_dominant(lam)
        width = HARNESS.K_PRIME_CFG if corner_width is None else corner_width
        d = n - sum(lam)
        top = max(lam)
        if d < 0:
            raise ValueError(f"|lambda|={sum(lam)} exceeds n={n}")
        if top < d:
            raise ValueError(f"max coordinate {top} is below the boundary distance {d}")
        q = walk.params.q
        with mpmath.workprec(NUMERIC.WORKING_PRECISION_BITS):
            step = (KernelService.rho(walk.params) / q).log()
            corner = n - top <= width
            if corner:
                log_value = (n - top + d) * mpmath.log(n) + n * step
            else:
                log_value = d * mpmath.log(n) + n * step + mpmath.log(comb(n - d, top - d))
        return EstimateValue("boundary", log_value, n=n, lam=lam, detail={"d": d, "corner": corner})

    @staticmethod
    def green_shape(lam: Sequence[int], z: float, walk: WalkSpec) -> EstimateValue:
        """|lambda|^-(N + (r-1)/2) e^{-<lambda, s0>} F0(lambda) with s0 from the Green saddle."""
        rs = walk.rs
        lam = rs.check_dominant(lam)
        if sum(lam) == 0:
            raise ValueError("The Green shape excludes the diagonal lambda = 0")
        saddle = SaddleService.green_saddle(lam, z, walk)
        exponent = rs.n_positive + mpmath.mpf(rs.r - 1) / 2
        with mpmath.workprec(NUMERIC.WORKING_PRECISION_BITS):
            log_value = (
                -exponent * mpmath.log(sum(lam))
                - float(np.dot(lam, saddle.s0.y))
                + SpectralService.F0(lam, walk.params).log()
            )
        return EstimateValue("green", log_value, lam=lam, z=z,
                             detail={"t0": saddle.t0, "decay_rate": saddle.decay_rate})

    @staticmethod
    def green_shape_critical(lam: Sequence[int], walk: WalkSpec) -> EstimateValue:
        """|lambda|^-(2N + r - 2) F0(lambda) at z = 1/rho~."""
        rs = walk.rs
        lam = rs.check_dominant(lam)
        if sum(lam) == 0:
            raise ValueError("The Green shape excludes the diagonal lambda = 0")
        exponent = 2 * rs.n_positive + rs.r - 2
        with mpmath.workprec(NUMERIC.WORKING_PRECISION_BITS):
            log_value = -exponent * mpmath.log(sum(lam)) + SpectralService.F0(lam, walk.params).log()
        return EstimateValue("green_critical", log_value, lam=lam, z=SaddleService.critical_z(walk))

    @staticmethod
    def phi_remark(delta: float) -> float:
        """
        The alternate rank-one display 1/2 {(1+d) log(1+d) + (1-d) log(1-d)}.

        It relates to the saddle value by phi(d) = log 2 - phi_remark(d).
        """
        if not 0 <= delta < 1:
            raise ValueError("delta must lie in [0, 1)")
        return float(((1 + delta) * mpmath.log(1 + delta) + (1 - delta) * mpmath.log(1 - delta)) / 2)

    @staticmethod
    def tree_remark_shape(n: int, k: int, walk: WalkSpec | RankParams) -> EstimateValue:
        """k / (n sqrt(n - k)) rho^n e^{n phi(k/n)} q^(-k/2) on the tree, 0 < k < n."""
        walk = walk if isinstance(walk, WalkSpec) else WalkSpec(walk)
        if walk.params.r != 1:
            raise ValueError("The tree shape needs rank 1")
        if not 0 < k < n:
            raise ValueError(f"The tree shape needs 0 < k < n, got k={k}, n={n}")
        q = walk.params.q
        phi = SaddleService.phi([k / n], walk)
        with mpmath.workprec(NUMERIC.WORKING_PRECISION_BITS):
            log_value = (
                mpmath.log(k) - mpmath.log(n) - mpmath.log(n - k) / 2
                + n * (KernelService.rho(walk.params).log() + phi)
                - k * mpmath.log(q) / 2
            )
        return EstimateValue("tree", log_value, n=n, lam=(k,), detail={"phi": phi})
