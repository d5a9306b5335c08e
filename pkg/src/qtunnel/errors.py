"""Exception types and error/flag codes shared across the package."""

INVALID_GEOMETRY = "INVALID_GEOMETRY"
INVALID_GRID = "INVALID_GRID"
INVALID_COUPLING = "INVALID_COUPLING"
MISSING_EXCITED = "MISSING_EXCITED"
BAND_EDGE = "BAND_EDGE"
PHASE_UNRESOLVED = "PHASE_UNRESOLVED"
GRID_TOO_COARSE = "GRID_TOO_COARSE"
NO_PEAK = "NO_PEAK"
DENSITY_UNDERFLOW = "DENSITY_UNDERFLOW"
RATIO_TOO_LARGE = "RATIO_TOO_LARGE"
UNRELIABLE = "UNRELIABLE"


class QtunnelError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(QtunnelError):
    """Raised by config validation; collects every violation, not just the first.

    ``failures`` is a list of ``(code, message)`` pairs.
    """

    def __init__(self, failures):
        self.failures = list(failures)
        lines = "; ".join(f"{code}: {msg}" for code, msg in self.failures)
        super().__init__(f"invalid configuration ({lines})")

    @property
    def codes(self):
        return [code for code, _ in self.failures]


class MissingExcitedError(QtunnelError):
    """An equal-mix initial state was requested but only one bound state exists."""


class BandEdgeError(QtunnelError):
    """Continuum solve requested too close to k^2 = 2*U0 where the piecewise
    formula is removably singular; callers split quadrature panels there."""


class PhaseUnresolvedError(QtunnelError):
    """Oscillatory quadrature hit its node budget before converging."""


class GridTooCoarseError(QtunnelError):
    """Grid-solver spacing too coarse to resolve the well region."""


class NoPeakError(QtunnelError):
    """No arrival peak found: the density stays below threshold everywhere."""


class DensityUnderflowError(QtunnelError):
    """A polarization ratio was requested where the density has decayed below
    the underflow floor."""
