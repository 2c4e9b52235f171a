"""
Centralized configuration for the building-walk toolkit.

Complexity ceilings, numeric tolerances and harness envelopes are defined
here and can be overridden via environment variables. Per-run overrides of
the harness values come from a key = value file (see HarnessConfig.from_file).
"""
from dataclasses import dataclass, fields, replace
import os

from dotenv import dotenv_values


@dataclass(frozen=True)
class KernelConfig:
    """Resource ceilings for exact kernel and Green computations."""

    # Largest step count per rank for exact kernel tables
    KERNEL_CEILING_R1: int = int(os.getenv('KERNEL_CEILING_R1', '200'))
    KERNEL_CEILING_R2: int = int(os.getenv('KERNEL_CEILING_R2', '48'))
    KERNEL_CEILING_R3: int = int(os.getenv('KERNEL_CEILING_R3', '16'))
    KERNEL_CEILING_R4: int = int(os.getenv('KERNEL_CEILING_R4', '8'))

    # Largest truncation order of subcritical Green partial sums per rank
    GREEN_CEILING_R1: int = int(os.getenv('GREEN_CEILING_R1', '600'))
    GREEN_CEILING_R2: int = int(os.getenv('GREEN_CEILING_R2', '96'))
    GREEN_CEILING_R3: int = int(os.getenv('GREEN_CEILING_R3', '16'))

    # Truncation order of critical Green sums (heuristic tail) per rank
    GREEN_CRITICAL_R1: int = int(os.getenv('GREEN_CRITICAL_R1', '600'))
    GREEN_CRITICAL_R2: int = int(os.getenv('GREEN_CRITICAL_R2', '48'))
    GREEN_CRITICAL_R3: int = int(os.getenv('GREEN_CRITICAL_R3', '16'))

    # Identity suite refuses Laurent polynomials with more terms than this
    MAX_SUPPORT_SIZE: int = int(os.getenv('MAX_SUPPORT_SIZE', '400000'))

    # Kernel tables kept in the Django cache (seconds)
    TABLE_CACHE_TIMEOUT: int = int(os.getenv('TABLE_CACHE_TIMEOUT', '3600'))

    def kernel_ceiling(self, rank: int) -> int:
        return int(getattr(self, f'KERNEL_CEILING_R{rank}', 0))

    def green_ceiling(self, rank: int) -> int:
        return int(getattr(self, f'GREEN_CEILING_R{rank}', 0))

    def green_critical_ceiling(self, rank: int) -> int:
        return int(getattr(self, f'GREEN_CRITICAL_R{rank}', 0))


@dataclass(frozen=True)
class NumericConfig:
    """Working precision and solver tolerances."""

    # Binary precision for quadrature and limit extrapolation
    WORKING_PRECISION_BITS: int = int(os.getenv('WORKING_PRECISION_BITS', '128'))

    # Newton stops when the gradient norm drops below this
    SADDLE_GRAD_TOL: float = float(os.getenv('SADDLE_GRAD_TOL', '1e-12'))
    SADDLE_MAX_ITER: int = int(os.getenv('SADDLE_MAX_ITER', '200'))

    # Warm start from the boundary asymptotics when 1 - |delta| is below this
    SADDLE_BOUNDARY_SWITCH: float = float(os.getenv('SADDLE_BOUNDARY_SWITCH', '1e-6'))

    # Decimal digits of aliasing margin for the trapezoid grid
    QUADRATURE_GUARD_DIGITS: int = int(os.getenv('QUADRATURE_GUARD_DIGITS', '12'))

    # Grid points closer than this to a wall switch the integrand form
    QUADRATURE_WALL_TOL: float = float(os.getenv('QUADRATURE_WALL_TOL', '1e-6'))

    # Exact and extrapolated F0 must agree to this relative tolerance
    F0_CROSSCHECK_TOL: float = float(os.getenv('F0_CROSSCHECK_TOL', '1e-8'))

    # Regular offset added to the shifts of the Green tail majorant
    GREEN_TAIL_OFFSET: float = float(os.getenv('GREEN_TAIL_OFFSET', '1e-3'))


@dataclass(frozen=True)
class HarnessConfig:
    """Ratio-envelope harness parameters."""

    # Boundary-layer width for the interior regime
    K_CFG: int = int(os.getenv('K_CFG', '4'))

    # Corner width below which the corner variant of the boundary shape is used
    K_PRIME_CFG: int = int(os.getenv('K_PRIME_CFG', '2'))

    # Interior suites skip smaller step counts
    MIN_INTERIOR_N: int = int(os.getenv('MIN_INTERIOR_N', '4'))

    # Largest allowed log-ratio change when n doubles
    DRIFT_LIMIT: float = float(os.getenv('DRIFT_LIMIT', '1.0'))

    # Relative tolerance on the fitted Green decay slope
    GREEN_SLOPE_TOL: float = float(os.getenv('GREEN_SLOPE_TOL', '0.05'))

    # Envelopes on max/min ratio spread per regime; observed spreads on the
    # default q=2 grids are recorded in config/envelopes.env
    E_INT: float = float(os.getenv('E_INT', '128'))
    E_INT3: float = float(os.getenv('E_INT3', '4096'))
    E_BDY: float = float(os.getenv('E_BDY', '512'))
    E_GRN: float = float(os.getenv('E_GRN', '64'))
    E_GRC: float = float(os.getenv('E_GRC', '64'))
    E_TREE: float = float(os.getenv('E_TREE', '16'))

    # Bracket for q_t^(1/2) F0 / prod(1 + <alpha, lambda>)
    F0_BRACKET_LO: float = float(os.getenv('F0_BRACKET_LO', '0.001'))
    F0_BRACKET_HI: float = float(os.getenv('F0_BRACKET_HI', '10'))

    # Bracket for the boundary asymptotics of the saddle point
    SADDLE_BRACKET_LO: float = float(os.getenv('SADDLE_BRACKET_LO', '0.015625'))
    SADDLE_BRACKET_HI: float = float(os.getenv('SADDLE_BRACKET_HI', '64'))

    def envelope(self, regime: str, rank: int) -> float:
        if regime == 'interior':
            return self.E_INT3 if rank >= 3 else self.E_INT
        return {
            'boundary': self.E_BDY,
            'green': self.E_GRN,
            'green_critical': self.E_GRC,
            'tree': self.E_TREE,
        }[regime]

    def with_overrides(self, values: dict) -> 'HarnessConfig':
        """
        Return a copy with string overrides applied.

        Args:
            values: Mapping of field name to textual value

        Returns:
            New HarnessConfig

        Raises:
            ValueError: On unknown keys or unparsable values
        """
        known = {f.name: f.type for f in fields(self)}
        changes = {}
        for key, raw in values.items():
            name = key.strip().upper()
            if name not in known:
                raise ValueError(f"Unknown harness setting '{key}'")
            if raw is None:
                raise ValueError(f"Harness setting '{key}' has no value")
            caster = int if known[name] in (int, 'int') else float
            try:
                changes[name] = caster(raw)
            except ValueError as exc:
                raise ValueError(f"Invalid value for '{key}': {raw!r}") from exc
        return replace(self, **changes)

    def from_file(self, path: str) -> 'HarnessConfig':
        """Apply the key = value pairs of a config file."""
        if not os.path.exists(path):
            raise ValueError(f"Config file not found: {path}")
        return self.with_overrides(dotenv_values(path))


@dataclass(frozen=True)
class LogConfig:
    """Log file configuration."""

    # Directory for application logs
    LOG_DIR: str = os.getenv('LOG_DIR', 'logs')

    # Maximum log file size before rotation (10 MB)
    LOG_MAX_BYTES: int = int(os.getenv('LOG_MAX_BYTES', '10485760'))

    # Number of rotated log files to keep
    LOG_BACKUP_COUNT: int = int(os.getenv('LOG_BACKUP_COUNT', '5'))


# Singleton instances - import these from other modules
KERNEL = KernelConfig()
NUMERIC = NumericConfig()
HARNESS = HarnessConfig()
LOGS = LogConfig()
