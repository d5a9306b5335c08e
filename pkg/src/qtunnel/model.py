"""Unit conventions, quench geometry, coupling parameters, and run configuration.

Units are hbar = m = 1 throughout: lengths in units of the well width a1,
energies in units of hbar^2/(m*a1^2), times in units of m*a1^2/hbar.
"""
from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import errors
from .errors import ConfigError


class Stage(enum.Enum):
    PRE_QUENCH = "pre"
    POST_QUENCH = "post"


class InitialState(enum.Enum):
    GROUND = "ground"
    EXCITED = "excited"
    EQUAL_MIX = "mix"


@dataclass(frozen=True)
class PotentialSpec:
    """Piecewise-constant potential on the half line, infinite wall at x <= 0.

    Pre-quench: U = 0 on (0, a1), U = U0 on (a1, inf) -- a step.
    Post-quench: U = 0 on (0, a1), U = U0 on (a1, a2), U = 0 on (a2, inf) -- a barrier.
    """

    a1: float
    a2: float
    U0: float
    stage: Stage

    @property
    def d(self) -> float:
        """Barrier width a2 - a1."""
        return self.a2 - self.a1

    @property
    def band_edge_k(self) -> float:
        """Wavenumber sqrt(2*U0) separating tunneling and propagating regimes."""
        return math.sqrt(2.0 * self.U0)

    def value(self, x):
        """Potential value at x > 0 (the x <= 0 wall is handled by boundary conditions)."""
        import numpy as np

        x = np.asarray(x, dtype=float)
        if self.stage is Stage.PRE_QUENCH:
            return np.where(x > self.a1, self.U0, 0.0)
        return np.where((x > self.a1) & (x < self.a2), self.U0, 0.0)


def pre_quench(a1: float, U0: float) -> PotentialSpec:
    return PotentialSpec(a1=a1, a2=math.inf, U0=U0, stage=Stage.PRE_QUENCH)


def post_quench(a1: float, d: float, U0: float) -> PotentialSpec:
    return PotentialSpec(a1=a1, a2=a1 + d, U0=U0, stage=Stage.POST_QUENCH)


@dataclass(frozen=True)
class SOCoupling:
    """Spin-orbit coupling strength via the precession half-length xi.

    The coupling momentum is p_so = 1/(2*xi); xi = inf means no coupling.
    """

    xi: float

    @property
    def p_so(self) -> float:
        return 0.0 if math.isinf(self.xi) else 1.0 / (2.0 * self.xi)


# Config file keys, in canonical order.
CONFIG_KEYS = (
    "a1", "d", "U0", "xi", "initial_state",
    "k_max", "dk", "x_max", "dx", "t_max", "dt", "X_obs",
)


@dataclass(frozen=True)
class SimulationConfig:
    """Run parameters shared by every module.

    Defaults reproduce the reference geometry: a1 = 1, d = 0.4, U0 = 16,
    xi = 0.5, observation point X = 10*pi.
    """

    a1: float = 1.0
    d: float = 0.4
    U0: float = 16.0
    xi: float = 0.5
    initial_state: InitialState = InitialState.GROUND
    k_max: float = 34.0
    dk: float = 0.1
    x_max: float = 10.0
    dx: float = 0.02
    t_max: float = 36.0
    dt: float = 0.05
    X_obs: float = 10.0 * math.pi
    k_tol: float = 1e-8  # adaptive k-grid interpolation tolerance (not a file key)

    @property
    def a2(self) -> float:
        return self.a1 + self.d

    @property
    def band_edge_k(self) -> float:
        return math.sqrt(2.0 * self.U0)

    @property
    def p_so(self) -> float:
        return self.so.p_so

    @property
    def so(self) -> SOCoupling:
        return SOCoupling(xi=self.xi)

    @property
    def pre(self) -> PotentialSpec:
        return pre_quench(self.a1, self.U0)

    @property
    def post(self) -> PotentialSpec:
        return post_quench(self.a1, self.d, self.U0)

    def with_overrides(self, **kwargs) -> "SimulationConfig":
        return replace(self, **kwargs)


def validate(config: SimulationConfig) -> SimulationConfig:
    """Check every invariant and return the config; raise ConfigError listing
    all violations otherwise.  Idempotent: validate(validate(c)) == validate(c).
    """
    failures = []
    if not config.a1 > 0:
        failures.append((errors.INVALID_GEOMETRY, f"a1 must be positive, got {config.a1}"))
    if not config.d > 0:
        failures.append((errors.INVALID_GEOMETRY,
                         f"barrier width d must be positive (a2 > a1), got d = {config.d}"))
    if not config.U0 > 0:
        failures.append((errors.INVALID_GEOMETRY, f"U0 must be positive, got {config.U0}"))
    if not config.xi > 0:
        failures.append((errors.INVALID_COUPLING, f"xi must be positive, got {config.xi}"))

    if config.U0 > 0 and not config.k_max > config.band_edge_k:
        failures.append((errors.INVALID_GRID,
                         f"k_max = {config.k_max} must exceed sqrt(2*U0) = {config.band_edge_k:.6g} "
                         "so both regimes are sampled"))
    for name in ("dk", "dx", "dt", "x_max", "t_max", "X_obs"):
        if not getattr(config, name) > 0:
            failures.append((errors.INVALID_GRID, f"{name} must be positive"))

    if config.initial_state in (InitialState.EXCITED, InitialState.EQUAL_MIX) and not failures:
        from .eigensolver import solve_bound_states

        n = len(solve_bound_states(config.pre))
        if n < 2:
            failures.append((errors.MISSING_EXCITED,
                             f"initial state {config.initial_state.value!r} needs two bound "
                             f"states but the step potential holds {n}"))

    if failures:
        raise ConfigError(failures)
    return config


def _parse_value(key: str, raw: str):
    if key == "initial_state":
        try:
            return InitialState(raw)
        except ValueError:
            raise ConfigError([(errors.INVALID_GRID,
                                f"initial_state must be one of "
                                f"{[s.value for s in InitialState]}, got {raw!r}")])
    try:
        return float(raw)
    except ValueError:
        raise ConfigError([(errors.INVALID_GRID, f"key {key!r}: not a number: {raw!r}")])


def parse_config(text: str) -> SimulationConfig:
    """Parse flat ``key = value`` lines; ``#`` starts a comment; unknown keys fail."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError([(errors.INVALID_GRID, f"line {lineno}: expected 'key = value'")])
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError([(errors.INVALID_GRID, f"line {lineno}: unknown key {key!r}")])
        if key in values:
            raise ConfigError([(errors.INVALID_GRID, f"line {lineno}: duplicate key {key!r}")])
        values[key] = _parse_value(key, raw)
    return SimulationConfig(**values)


def load_config(path) -> SimulationConfig:
    return parse_config(Path(path).read_text())


def dump_config(config: SimulationConfig) -> str:
    """Canonical text form (fixed key order, 16 significant digits)."""
    lines = []
    for key in CONFIG_KEYS:
        value = getattr(config, key)
        if isinstance(value, InitialState):
            lines.append(f"{key} = {value.value}")
        else:
            lines.append(f"{key} = {value:.16g}")
    return "\n".join(lines) + "\n"


def config_hash(config: SimulationConfig) -> str:
    return hashlib.sha256(dump_config(config).encode()).hexdigest()
