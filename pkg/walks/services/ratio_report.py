"""
Ratio-envelope harness: exact kernel or Green values against estimate shapes.

A regime passes when every shape is positive, the spread max(ratio)/min(ratio)
stays inside the configured envelope and the regime's extra checks hold
(log-ratio drift under doubling of n for the interior, fitted decay slope for
subcritical Green functions).
"""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath
import numpy as np

from walk_project.settings.config import HARNESS, HarnessConfig

from .estimates import EstimateService, EstimateValue
from .exact_kernel import KernelService, KernelTable, WalkSpec
from .root_system import Weight
from .scalars import QSqrt

logger = logging.getLogger(__name__)


@dataclass
class RatioRecord:
    """One grid point: exact value, shape and their ratio."""
    n: int
    lam: Weight
    exact: QSqrt
    shape: float
    ratio: float
    z: float | None = None
    exact_float: float | None = None
    certified: bool = True

    def __post_init__(self):
        if self.exact_float is None:
            self.exact_float = float(self.exact)


@dataclass
class RatioReport:
    """Summary of one harness run."""
    regime: str
    rank: int
    q: int
    grid: str
    envelope: float
    records: list[RatioRecord] = field(default_factory=list)
    zero_points: list[tuple[int, Weight]] = field(default_factory=list)
    drift: dict[str, float] = field(default_factory=dict)
    drift_limit: float | None = None
    slopes: dict[str, tuple[float, float]] = field(default_factory=dict)
    slope_tol: float | None = None
    harnack: dict[int, float] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    requires_certification: bool = False

    @property
    def min_ratio(self) -> float:
        return min(r.ratio for r in self.records)

    @property
    def max_ratio(self) -> float:
        return max(r.ratio for r in self.records)

    @property
    def spread(self) -> float:
        return self.max_ratio / self.min_ratio

    @property
    def shapes_positive(self) -> bool:
        return all(r.shape > 0 for r in self.records)

    @property
    def drift_ok(self) -> bool:
        return self.drift_limit is None or all(v <= self.drift_limit for v in self.drift.values())

    @property
    def slopes_ok(self) -> bool:
        if self.slope_tol is None:
            return True
        return all(abs(fit - expected) <= self.slope_tol * abs(expected)
                   for fit, expected in self.slopes.values())

    @property
    def uncertified(self) -> int:
        return sum(1 for r in self.records if not r.certified)

    @property
    def certified_ok(self) -> bool:
        return not self.requires_certification or self.uncertified == 0

    @property
    def passed(self) -> bool:
        return (self.shapes_positive and self.spread <= self.envelope and self.drift_ok
                and self.slopes_ok and self.certified_ok)

    def summary(self) -> dict:
        return {
            "regime": self.regime,
            "rank": self.rank,
            "q": self.q,
            "grid": self.grid,
            "points": len(self.records),
            "zero_points": len(self.zero_points),
            "min_ratio": self.min_ratio,
            "max_ratio": self.max_ratio,
            "spread": self.spread,
            "envelope": self.envelope,
            "drift": self.drift,
            "slopes": {k: {"fit": a, "expected": b} for k, (a, b) in self.slopes.items()},
            "harnack": self.harnack,
            "uncertified": self.uncertified,
            "notes": self.notes,
            "passed": self.passed,
        }


def exact_columns(value: QSqrt) -> dict:
    a_num, a_den, b_num, b_den = value.parts()
    return {
        "exact_num": a_num,
        "exact_den": a_den,
        "exact_sqrt_num": b_num,
        "exact_sqrt_den": b_den,
        "exact_float": float(value),
    }


def weight_columns(lam: Sequence[int]) -> dict:
    return {f"m_{i + 1}": v for i, v in enumerate(lam)}


def report_rows(report: RatioReport) -> list[dict]:
    rows = []
    for record in sorted(report.records, key=lambda r: (r.n, r.lam, r.z or 0)):
        row = {"n": record.n, **weight_columns(record.lam), **exact_columns(record.exact)}
        row["exact_float"] = record.exact_float
        row["shape"] = record.shape
        row["ratio"] = record.ratio
        if record.z is not None:
            row["z"] = record.z
            row["certified"] = record.certified
        rows.append(row)
    return rows


def kernel_rows(table: KernelTable) -> list[dict]:
    radial = table.radial()
    rows = []
    for lam, value in sorted(table.entries.items()):
        rows.append({
            "n": table.n,
            **weight_columns(lam),
            **exact_columns(value),
            "shape": "",
            "ratio": "",
            "radial_float": float(radial[lam]),
        })
    return rows


def to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(rows[0].keys()), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buffer.getvalue()


def to_json(rows: list[dict], summary: dict | None = None) -> str:
    if summary is None:
        return json.dumps(rows, indent=2)
    return json.dumps({"summary": summary, "records": rows}, indent=2)


class RatioService:
    """Runs the ratio harness per regime."""

    @staticmethod
    def _ratio(exact: QSqrt | float, shape: EstimateValue) -> tuple[float, float]:
        with mpmath.workprec(128):
            exact_mp = exact.to_mpf() if isinstance(exact, QSqrt) else mpmath.mpf(exact)
            return float(shape.value), float(exact_mp / shape.value)

    @staticmethod
    def _finish(report: RatioReport) -> RatioReport:
        if not report.records:
            raise ValueError(f"Empty admissible grid for regime '{report.regime}' ({report.grid})")
        if report.zero_points:
            logger.warning(f"{report.regime}: skipped {len(report.zero_points)} zero-probability points")
        logger.info(
            f"Ratio report {report.regime} r={report.rank} q={report.q}: {len(report.records)} points, "
            f"spread {report.spread:.4g} (envelope {report.envelope:g}), passed={report.passed}"
        )
        return report

    @staticmethod
    def drift_directions(r: int) -> dict[str, tuple[int, ...]]:
        lambda_1 = tuple(1 if i == 0 else 0 for i in range(r))
        if r == 1:
            return {"lambda_1": lambda_1}
        return {
            "lambda_1": lambda_1,
            "rho": (1,) * r,
            "mixed": (2, 1) + (0,) * (r - 2),
        }

    @staticmethod
    def interior_reach(r: int, n: int, harness: HarnessConfig = HARNESS) -> int:
        """Largest |lambda| of the interior domain: n - 1 up to rank 2, n - K_CFG above."""
        return n - 1 if r <= 2 else n - harness.K_CFG

    @staticmethod
    def _nearest(records: list[RatioRecord], target: np.ndarray) -> RatioRecord | None:
        best = None
        best_distance = None
        for record in records:
            distance = float(np.abs(np.asarray(record.lam) - target).sum())
            if best is None or distance < best_distance:
                best, best_distance = record, distance
        return best

    @staticmethod
    def run_interior(walk: WalkSpec, ns: Iterable[int], harness: HarnessConfig = HARNESS,
                     envelope: float | None = None, harnack: bool = True) -> RatioReport:
        """
        Exact p^n(0, x) against the interior shape on |lambda| <= interior_reach(r, n).

        The drift compares the ratio at |lambda| ~ n/2 with the ratio at 2n along
        fixed directions; pairs whose first target lies outside the domain are skipped.

        Args:
            walk: The walk
            ns: Step counts; those below MIN_INTERIOR_N are skipped
            harness: Harness parameters
            envelope: Spread limit; default from the harness config
            harnack: Also report the Harnack constant per n

        Returns:
            RatioReport
        """
        rs = walk.rs
        ns = sorted(set(ns))
        kept = [n for n in ns if n >= harness.MIN_INTERIOR_N]
        report = RatioReport(
            regime="interior",
            rank=rs.r,
            q=walk.params.q,
            grid=f"n in {kept}, |lambda| <= n-{1 if rs.r <= 2 else harness.K_CFG}",
            envelope=harness.envelope("interior", rs.r) if envelope is None else envelope,
            drift_limit=harness.DRIFT_LIMIT,
        )
        if len(kept) < len(ns):
            report.notes.append(f"skipped n < {harness.MIN_INTERIOR_N}: {[n for n in ns if n not in kept]}")
        tables = KernelService.kernel_tables(walk, kept)
        by_n: dict[int, list[RatioRecord]] = {}
        for n in kept:
            for lam, exact in sorted(tables[n].entries.items()):
                if sum(lam) > RatioService.interior_reach(rs.r, n, harness):
                    continue
                if exact.sign() <= 0:
                    report.zero_points.append((n, lam))
                    continue
                shape = EstimateService.heat_shape(n, lam, walk)
                shape_value, ratio = RatioService._ratio(exact, shape)
                record = RatioRecord(n=n, lam=lam, exact=exact, shape=shape_value, ratio=ratio)
                report.records.append(record)
                by_n.setdefault(n, []).append(record)

        outside = [n for n in kept if 2 * n in by_n and n // 2 > RatioService.interior_reach(rs.r, n, harness)]
        if outside:
            report.notes.append(f"drift skipped for n in {outside}: |lambda| = n/2 lies outside the domain")
        for name, u in RatioService.drift_directions(rs.r).items():
            u = np.asarray(u, dtype=float)
            for n in kept:
                if 2 * n not in by_n or n not in by_n or n in outside:
                    continue
                first = RatioService._nearest(by_n[n], n * u / (2 * u.sum()))
                second = RatioService._nearest(by_n[2 * n], 2 * n * u / (2 * u.sum()))
                if first and second:
                    report.drift[f"{name}:{n}->{2 * n}"] = abs(np.log(second.ratio) - np.log(first.ratio))
        if not report.drift:
            report.notes.append("no admissible (n, 2n) pairs in the grid; drift not checked")

        if harnack:
            for n in kept:
                try:
                    report.harnack[n] = float(KernelService.harnack_constant(walk, n))
                except ValueError as exc:
                    report.notes.append(f"Harnack constant at n={n} skipped: {exc}")
        return RatioService._finish(report)

    @staticmethod
    def run_boundary(walk: WalkSpec, ns: Iterable[int], harness: HarnessConfig = HARNESS,
                     envelope: float | None = None) -> RatioReport:
        """Exact p^n(0, x) against the rank-two boundary shape on the layer n - |x| < K_CFG."""
        if walk.params.r != 2:
            raise ValueError("The boundary regime needs rank 2")
        ns = sorted(set(ns))
        report = RatioReport(
            regime="boundary",
            rank=2,
            q=walk.params.q,
            grid=f"n in {ns}, n-|lambda| <= {harness.K_CFG - 1}",
            envelope=harness.envelope("boundary", 2) if envelope is None else envelope,
        )
        tables = KernelService.kernel_tables(walk, ns)
        corners = 0
        for n in ns:
            for lam, exact in sorted(tables[n].entries.items()):
                d = n - sum(lam)
                if d >= harness.K_CFG or max(lam) < d:
                    continue
                if exact.sign() <= 0:
                    report.zero_points.append((n, lam))
                    continue
                shape = EstimateService.boundary_shape_rank2(n, lam, walk, harness.K_PRIME_CFG)
                corners += shape.detail["corner"]
                shape_value, ratio = RatioService._ratio(exact, shape)
                report.records.append(RatioRecord(n=n, lam=lam, exact=exact, shape=shape_value, ratio=ratio))
        report.notes.append(f"corner form used at {corners} points")
        return RatioService._finish(report)

    @staticmethod
    def green_rays(r: int, lengths: Iterable[int]) -> dict[str, list[tuple[int, ...]]]:
        lengths = list(lengths)
        rays = {"lambda_1": [tuple(k if i == 0 else 0 for i in range(r)) for k in lengths]}
        if r > 1:
            rays["rho"] = [(k // r,) * r for k in lengths if k % r == 0]
        return rays

    @staticmethod
    def run_green(walk: WalkSpec, zs: Iterable, harness: HarnessConfig = HARNESS,
                  envelope: float | None = None, lengths: Iterable[int] = range(4, 25),
                  relative: bool = True, rel_tol: float = 1e-12) -> RatioReport:
        """
        Green sums against the subcritical shape along two rays.

        The fitted slope of log(G / (|lambda|^-(N+(r-1)/2) F0)) in |lambda| over the
        outer half of each ray is compared with -<lambda/|lambda|, s0>. Every sum
        must carry a certified tail for the report to pass.
        """
        rs = walk.rs
        zs = [Fraction(z) for z in zs]
        rays = RatioService.green_rays(rs.r, lengths)
        report = RatioReport(
            regime="green",
            rank=rs.r,
            q=walk.params.q,
            grid=f"z in {[str(z) for z in zs]}{' x 1/rho~' if relative else ''}, rays {list(rays)}, "
                 f"|lambda| in {list(lengths)}",
            envelope=harness.envelope("green", rs.r) if envelope is None else envelope,
            slope_tol=harness.GREEN_SLOPE_TOL,
            requires_certification=True,
        )
        lambdas = sorted({lam for ray in rays.values() for lam in ray})
        for z in zs:
            z_exact = KernelService.resolve_z(walk, z, relative)
            z_float = float(z_exact)
            values = KernelService.green_exact(walk, lambdas, z_exact, rel_tol=rel_tol)
            uncertified = [lam for lam, v in values.items() if not v.certified]
            if uncertified:
                report.notes.append(f"z={z}: {len(uncertified)} sums without certified tail at the Green ceiling")
            shapes = {}
            for lam in lambdas:
                shape = EstimateService.green_shape(lam, z_float, walk)
                shapes[lam] = shape
                shape_value, ratio = RatioService._ratio(values[lam].value, shape)
                report.records.append(RatioRecord(
                    n=values[lam].terms, lam=lam, exact=values[lam].value,
                    shape=shape_value, ratio=ratio, z=z_float, certified=values[lam].certified,
                ))
            for name, ray in rays.items():
                if len(ray) < 2:
                    continue
                if len(ray) >= 6:
                    ray = ray[len(ray) // 2:]
                xs = np.array([sum(lam) for lam in ray], dtype=float)
                with mpmath.workprec(128):
                    # log G minus the polynomial and F0 factors of the shape
                    ys = np.array([
                        float(mpmath.log(values[lam].value.to_mpf()) - shapes[lam].log_value)
                        - sum(lam) * shapes[lam].detail["decay_rate"]
                        for lam in ray
                    ])
                fit = float(np.polyfit(xs, ys, 1)[0])
                expected = -shapes[ray[0]].detail["decay_rate"]
                report.slopes[f"{name}@z={z}"] = (fit, expected)
        return RatioService._finish(report)

    @staticmethod
    def run_green_critical(walk: WalkSpec, harness: HarnessConfig = HARNESS,
                           envelope: float | None = None, lengths: Iterable[int] = range(4, 17)) -> RatioReport:
        """Truncated critical Green sums plus heuristic tail against the critical shape."""
        rs = walk.rs
        rays = RatioService.green_rays(rs.r, lengths)
        report = RatioReport(
            regime="green_critical",
            rank=rs.r,
            q=walk.params.q,
            grid=f"z = 1/rho~, rays {list(rays)}, |lambda| in {list(lengths)}",
            envelope=harness.envelope("green_critical", rs.r) if envelope is None else envelope,
        )
        lambdas = sorted({lam for ray in rays.values() for lam in ray})
        z_exact = KernelService.resolve_z(walk, 1, relative=True)
        values = KernelService.green_exact(walk, lambdas, z_exact)
        terms = next(iter(values.values())).terms
        report.notes.append(f"sums truncated at n <= {terms} with a heuristic polynomial tail")
        for lam in lambdas:
            shape = EstimateService.green_shape_critical(lam, walk)
            total = values[lam].estimated_total
            shape_value, ratio = RatioService._ratio(total, shape)
            report.records.append(RatioRecord(
                n=terms, lam=lam, exact=values[lam].value, shape=shape_value,
                ratio=ratio, z=float(z_exact), exact_float=total,
            ))
        return RatioService._finish(report)

    @staticmethod
    def run_tree(walk: WalkSpec, ns: Iterable[int], harness: HarnessConfig = HARNESS,
                 envelope: float | None = None) -> RatioReport:
        """Exact tree kernel against the rank-one display for 0 < k < n."""
        if walk.params.r != 1:
            raise ValueError("The tree regime needs rank 1")
        ns = sorted(set(ns))
        report = RatioReport(
            regime="tree",
            rank=1,
            q=walk.params.q,
            grid=f"n in {ns}, 0 < k < n",
            envelope=harness.envelope("tree", 1) if envelope is None else envelope,
        )
        tables = KernelService.kernel_tables(walk, ns)
        for n in ns:
            for (k,), exact in sorted(tables[n].entries.items()):
                if not 0 < k < n:
                    continue
                if exact.sign() <= 0:
                    report.zero_points.append((n, (k,)))
                    continue
                shape = EstimateService.tree_remark_shape(n, k, walk)
                shape_value, ratio = RatioService._ratio(exact, shape)
                report.records.append(RatioRecord(n=n, lam=(k,), exact=exact, shape=shape_value, ratio=ratio))
        return RatioService._finish(report)
