"""
Convex saddle-point machinery for the heat kernel and Green function estimates.

Shifts s are parametrized by y_i = <lambda_i, s>, i.e. s = sum y_i alpha_i, and
targets delta by d_i = <delta, alpha_i>. With M the matrix of step weights in
fundamental coordinates and c their coefficients in the transition symbol,

    phi^delta(y) = log sum_mu c_mu e^{(M y)_mu} - d . y

is smooth and strictly convex; its gradient is M^T w - d and its Hessian the
covariance of M under the softmax weights w.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from math import log
from typing import Sequence

import numpy as np
from scipy import optimize
from scipy.special import logsumexp

from walk_project.settings.config import NUMERIC

from .exact_kernel import KernelService, WalkSpec
from .root_system import RankParams, RootSystem

logger = logging.getLogger(__name__)


@dataclass
class SaddleSolution:
    """
    Minimizer of phi^delta.

    Attributes:
        delta: Target in fundamental coordinates (delta_i = <delta, alpha_i>)
        y: Minimizer, y_i = <lambda_i, s>
        phi: Minimum value
        residual: Norm of grad log steps(s) - delta
        hessian: Hessian of phi^delta at the minimizer (y coordinates)
        iterations: Newton steps taken
    """
    delta: np.ndarray
    y: np.ndarray
    phi: float
    residual: float
    hessian: np.ndarray
    iterations: int

    @property
    def s_coroot(self) -> np.ndarray:
        """Coordinates of s in the simple-coroot basis."""
        return self.y

    def s_weight(self, rs: RootSystem) -> np.ndarray:
        """<alpha_j, s>: coordinates of s in the fundamental-weight basis."""
        return cartan_matrix(rs.r) @ self.y


@dataclass
class GreenSaddle:
    """Maximizer t0 of Psi and the shift s0 = s(lambda / t0)."""
    lam: tuple
    z: float
    t0: float
    tau0: float
    s0: SaddleSolution

    @property
    def direction(self) -> np.ndarray:
        lam = np.asarray(self.lam, dtype=float)
        return lam / lam.sum()

    @property
    def decay_rate(self) -> float:
        """<lambda / |lambda|, s0>."""
        return float(self.direction @ self.s0.y)


@lru_cache(maxsize=None)
def cartan_matrix(r: int) -> np.ndarray:
    c = 2 * np.eye(r)
    for i in range(r - 1):
        c[i, i + 1] = c[i + 1, i] = -1
    c.setflags(write=False)
    return c


@lru_cache(maxsize=None)
def _symbol_arrays(walk: WalkSpec) -> tuple[np.ndarray, np.ndarray, float]:
    """Step matrix M, log coefficients and log scale of the transition symbol."""
    scale, steps = walk.transition_symbol()
    items = sorted(steps.items())
    m = np.array([mu for mu, _ in items], dtype=float)
    log_c = np.array([log(float(c)) for _, c in items])
    m.setflags(write=False)
    log_c.setflags(write=False)
    return m, log_c, float(scale.log())


def _as_walk(source: WalkSpec | RankParams) -> WalkSpec:
    return source if isinstance(source, WalkSpec) else WalkSpec(source)


class SaddleService:
    """Newton solver for the saddle point and the functions built on it."""

    @staticmethod
    def _objective(y: np.ndarray, d: np.ndarray, m: np.ndarray, log_c: np.ndarray):
        exponents = m @ y + log_c
        value = logsumexp(exponents)
        w = np.exp(exponents - value)
        mean = m.T @ w
        centered = m - mean
        hessian = centered.T @ (centered * w[:, None])
        return value - d @ y, mean - d, hessian

    @staticmethod
    def check_delta(delta: Sequence[float], r: int) -> np.ndarray:
        d = np.asarray(delta, dtype=float)
        if d.shape != (r,):
            raise ValueError(f"delta needs {r} coordinates, got {d.shape}")
        if np.any(d < 0):
            raise ValueError(f"delta {tuple(d)} is outside the closed positive chamber")
        if d.sum() >= 1:
            raise ValueError(f"|delta| = {d.sum():.6g} must be < 1")
        return d

    @staticmethod
    def warm_start(d: np.ndarray) -> np.ndarray:
        """Boundary asymptotics e^{<lambda_{i+1} - lambda_i, s>} ~ 1 - (delta_1 + ... + delta_i)."""
        r = len(d)
        y = np.zeros(r)
        y[-1] = -log(1 - d.sum())
        for i in range(r - 2, -1, -1):
            y[i] = y[i + 1] - log(1 - d[: i + 1].sum())
        return y

    @staticmethod
    def _wall_average(y: np.ndarray, d: np.ndarray) -> np.ndarray:
        walls = [j for j in range(len(d)) if d[j] == 0]
        if not walls:
            return y
        cartan = cartan_matrix(len(d))
        y = y.copy()
        for _ in range(50):
            pairings = cartan @ y
            if max(abs(pairings[j]) for j in walls) < 1e-15:
                break
            for j in walls:
                y[j] -= 0.5 * (cartan @ y)[j]
        return y

    @staticmethod
    def solve_saddle(delta: Sequence[float], walk: WalkSpec | RankParams) -> SaddleSolution:
        """
        Minimize log steps(u) - <delta, u> by damped Newton.

        Args:
            delta: Target in fundamental coordinates
            walk: Walk (or rank parameters for the simple walk)

        Returns:
            SaddleSolution

        Raises:
            ValueError: if delta is outside the admissible region
            ArithmeticError: if Newton does not converge
        """
        walk = _as_walk(walk)
        r = walk.params.r
        d = SaddleService.check_delta(delta, r)
        m, log_c, _ = _symbol_arrays(walk)
        if 1 - d.sum() < NUMERIC.SADDLE_BOUNDARY_SWITCH:
            y = SaddleService.warm_start(d)
        else:
            y = np.zeros(r)
        value, grad, hessian = SaddleService._objective(y, d, m, log_c)
        iterations = 0
        while np.linalg.norm(grad) > NUMERIC.SADDLE_GRAD_TOL:
            if iterations >= NUMERIC.SADDLE_MAX_ITER:
                raise ArithmeticError(
                    f"Saddle solve for delta={tuple(d)} did not converge "
                    f"(gradient {np.linalg.norm(grad):.3g})"
                )
            try:
                step = np.linalg.solve(hessian, -grad)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(hessian, -grad, rcond=None)[0]
            slope = grad @ step
            t = 1.0
            while True:
                candidate = y + t * step
                new_value, new_grad, new_hessian = SaddleService._objective(candidate, d, m, log_c)
                if new_value <= value + 1e-4 * t * slope or t < 1e-12:
                    break
                t /= 2
            if np.array_equal(candidate, y):
                break
            y, value, grad, hessian = candidate, new_value, new_grad, new_hessian
            iterations += 1
        y = SaddleService._wall_average(y, d)
        value, grad, hessian = SaddleService._objective(y, d, m, log_c)
        return SaddleSolution(
            delta=d,
            y=y,
            phi=float(value),
            residual=float(np.linalg.norm(grad)),
            hessian=hessian,
            iterations=iterations,
        )

    @staticmethod
    def phi(delta: Sequence[float], walk: WalkSpec | RankParams) -> float:
        return SaddleService.solve_saddle(delta, walk).phi

    @staticmethod
    def Phi(delta: Sequence[float], z: float, walk: WalkSpec | RankParams) -> float:
        """phi(delta) + log(scale * z); gradient in delta is -s."""
        walk = _as_walk(walk)
        _, _, log_scale = _symbol_arrays(walk)
        return SaddleService.phi(delta, walk) + log_scale + log(z)

    @staticmethod
    def g_and_dg(y: Sequence[float], walk: WalkSpec | RankParams) -> tuple[np.ndarray, np.ndarray]:
        """
        g(s) = grad steps(s) / steps(s) in fundamental coordinates and its differential.

        Returns:
            (g, dg) with dg mapping y coordinates to fundamental coordinates
        """
        walk = _as_walk(walk)
        m, log_c, _ = _symbol_arrays(walk)
        y = np.asarray(y, dtype=float)
        _, grad, hessian = SaddleService._objective(y, np.zeros(len(y)), m, log_c)
        return grad, hessian

    @staticmethod
    def log_steps(y: Sequence[float], walk: WalkSpec | RankParams) -> float:
        walk = _as_walk(walk)
        m, log_c, _ = _symbol_arrays(walk)
        return float(logsumexp(m @ np.asarray(y, dtype=float) + log_c))

    @staticmethod
    def critical_z(walk: WalkSpec | RankParams) -> float:
        return 1 / float(KernelService.spectral_radius(_as_walk(walk)))

    @staticmethod
    def green_saddle(lam: Sequence[int], z: float, walk: WalkSpec | RankParams) -> GreenSaddle:
        """
        Maximizer of Psi(t) = t Phi(lambda / t).

        Psi'(t) = log steps(s_t) + log(scale z) increases from log(rho~ z) < 0
        to +infinity as |delta| goes from 0 to 1, so the root in tau = |delta|
        is bracketed and unique.

        Raises:
            ValueError: for lambda = 0 or z outside (0, 1/rho~)
        """
        walk = _as_walk(walk)
        rs = walk.rs
        lam = rs.check_dominant(lam)
        length = sum(lam)
        if length == 0:
            raise ValueError("The Green saddle needs lambda != 0")
        z_crit = SaddleService.critical_z(walk)
        if not 0 < z < z_crit:
            raise ValueError(f"z={z:.6g} must lie in (0, {z_crit:.6g})")
        _, _, log_scale = _symbol_arrays(walk)
        direction = np.asarray(lam, dtype=float) / length
        offset = log_scale + log(z)

        def target(tau: float) -> float:
            if tau == 0:
                return SaddleService.log_steps(np.zeros(rs.r), walk) + offset
            solution = SaddleService.solve_saddle(tau * direction, walk)
            return SaddleService.log_steps(solution.y, walk) + offset

        gap = 0.1
        while target(1 - gap) <= 0:
            gap /= 10
            if gap < 1e-14:
                raise ArithmeticError(f"No sign change for the Green saddle at z={z:.6g}")
        tau0 = optimize.brentq(target, 0.0, 1 - gap, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        s0 = SaddleService.solve_saddle(tau0 * direction, walk)
        logger.info(f"Green saddle lam={lam} z={z:.6g}: t0={length / tau0:.6g}, |s0|={np.linalg.norm(s0.y):.6g}")
        return GreenSaddle(lam=lam, z=z, t0=length / tau0, tau0=tau0, s0=s0)

    @staticmethod
    def psi(t: float, lam: Sequence[int], z: float, walk: WalkSpec | RankParams) -> float:
        delta = np.asarray(lam, dtype=float) / t
        return t * SaddleService.Phi(delta, z, walk)

    @staticmethod
    def psi_second(t: float, lam: Sequence[int], walk: WalkSpec | RankParams) -> float:
        """Psi''(t) = -<delta_t, dg^-1 delta_t> / t; negative wherever defined."""
        delta = np.asarray(lam, dtype=float) / t
        solution = SaddleService.solve_saddle(delta, walk)
        return float(-delta @ np.linalg.solve(solution.hessian, delta) / t)

    @staticmethod
    def curvature_form(delta: Sequence[float], theta: Sequence[float], walk: WalkSpec | RankParams) -> float:
        """
        Sum over i = 0..r of e^{<lambda_{i+1} - lambda_i, s>} <lambda_{i+1} - lambda_i, theta>^2
        with lambda_0 = lambda_{r+1} = 0 and theta in simple-coroot coordinates.
        """
        solution = SaddleService.solve_saddle(delta, walk)
        y = np.concatenate(([0.0], solution.y, [0.0]))
        th = np.concatenate(([0.0], np.asarray(theta, dtype=float), [0.0]))
        return float(np.sum(np.exp(np.diff(y)) * np.diff(th) ** 2))

    @staticmethod
    def boundary_ratios(solution: SaddleSolution) -> list[float]:
        """e^{<lambda_{i+1} - lambda_i, s>} / (1 - (delta_1 + ... + delta_i)) for i = 1..r."""
        y = np.concatenate((solution.y, [0.0]))
        partial = np.cumsum(solution.delta)
        return [float(np.exp(y[i + 1] - y[i]) / (1 - partial[i])) for i in range(len(solution.delta))]
