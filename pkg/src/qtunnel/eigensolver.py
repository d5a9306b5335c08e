"""Bound states of the step potential and delta-normalized continuum states,
transmission amplitudes, and group delays of the barrier potential."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import BandEdgeError
from .model import PotentialSpec, Stage

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)

# |k^2 - 2*U0| below this triggers BandEdgeError; quadrature panels are split
# at sqrt(2*U0) so integration never lands inside the guard.
BAND_EDGE_GUARD = 1e-9


class Regime(enum.Enum):
    TUNNELING = "tunneling"
    PROPAGATING = "propagating"


@dataclass(frozen=True)
class BoundState:
    """Bound level of the pre-quench step: sin(k x) in the well matched to a
    decaying exponential under the step.

    amp_well * sin(k x)                     for 0 <= x <= a1
    amp_tail * exp(-kappa (x - a1))         for x > a1
    """

    index: int
    k: float
    energy: float
    kappa: float
    amp_well: float
    amp_tail: float
    a1: float
    U0: float

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        inside = self.amp_well * np.sin(self.k * np.clip(x, 0.0, None))
        outside = self.amp_tail * np.exp(-self.kappa * np.clip(x - self.a1, 0.0, None))
        out = np.where(x <= self.a1, inside, outside)
        return np.where(x < 0.0, 0.0, out)

    def well_probability(self) -> float:
        """Integral of phi^2 over (0, a1), in closed form."""
        return self.amp_well ** 2 * (self.a1 / 2 - math.sin(2 * self.k * self.a1) / (4 * self.k))


def bound_eval(state: BoundState, x):
    """Wave-function amplitude at x (0 for x < 0 by the hard-wall convention)."""
    return state.eval(x)


def _matching(k: float, a1: float, U0: float) -> float:
    return k / math.tan(k * a1) + math.sqrt(max(2.0 * U0 - k * k, 0.0))


def solve_bound_states(pre: PotentialSpec) -> list[BoundState]:
    """All solutions of k*cot(k*a1) = -sqrt(2*U0 - k^2) on (0, sqrt(2*U0)),
    normalized over [0, inf) and ordered by energy.  Empty list if the step is
    too shallow to hold a level."""
    if pre.stage is not Stage.PRE_QUENCH:
        raise ValueError("solve_bound_states expects the pre-quench step potential")
    a1, U0 = pre.a1, pre.U0
    k_edge = math.sqrt(2.0 * U0)

    # The matching function is continuous and monotone between the cotangent
    # poles at k = n*pi/a1, so scan each branch in steps of pi/(4 a1) and
    # bisect every sign change to 1e-12.
    step = math.pi / (4.0 * a1)
    eps = 1e-11
    roots = []
    n = 0
    while True:
        lo = n * math.pi / a1 + eps
        hi = min((n + 1) * math.pi / a1 - eps, k_edge - eps)
        if lo >= k_edge - eps:
            break
        grid = np.linspace(lo, hi, max(2, int(math.ceil((hi - lo) / step)) + 1))
        values = [_matching(k, a1, U0) for k in grid]
        for ka, fa, kb, fb in zip(grid, values, grid[1:], values[1:]):
            if fa == 0.0:
                roots.append(ka)
                continue
            if fa * fb >= 0.0:
                continue
            blo, bhi, flo = ka, kb, fa
            while bhi - blo > 1e-12:
                mid = 0.5 * (blo + bhi)
                fm = _matching(mid, a1, U0)
                if flo * fm <= 0.0:
                    bhi = mid
                else:
                    blo, flo = mid, fm
            roots.append(0.5 * (blo + bhi))
        n += 1

    states = []
    for j, kj in enumerate(sorted(roots)):
        kappa = math.sqrt(2.0 * U0 - kj * kj)
        sin_a1 = math.sin(kj * a1)
        well = a1 / 2 - math.sin(2 * kj * a1) / (4 * kj)
        amp = 1.0 / math.sqrt(well + sin_a1 ** 2 / (2 * kappa))
        states.append(BoundState(index=j, k=kj, energy=0.5 * kj * kj, kappa=kappa,
                                 amp_well=amp, amp_tail=amp * sin_a1, a1=a1, U0=U0))
    return states


@dataclass(frozen=True)
class ContinuumState:
    """Delta-normalized eigenstate of the barrier potential at wavenumber k.

    C * sin(k x)                                          for 0 < x < a1
    D * exp(-gamma (x - a1)) + F * exp(+gamma (x - a1))   for a1 < x < a2
    sqrt(2/pi) * sin(k x + theta)                         for x > a2

    gamma = kappa_k = sqrt(2*U0 - k^2) in the tunneling regime and i*q with
    q = sqrt(k^2 - 2*U0) in the propagating one, where D and F become a
    conjugate pair (the wave function stays real).
    """

    k: float
    C: float
    D: complex
    F: complex
    theta: float
    regime: Regime
    a1: float
    a2: float
    U0: float

    @property
    def gamma(self) -> complex:
        kk = 2.0 * self.U0 - self.k ** 2
        return complex(math.sqrt(kk)) if kk > 0 else 1j * math.sqrt(-kk)

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        basis = ContinuumBasis.solve(
            PotentialSpec(self.a1, self.a2, self.U0, Stage.POST_QUENCH),
            np.array([self.k]))
        return basis.eval(x)[..., 0]


class ContinuumBasis:
    """Continuum states solved on an array of wavenumbers (struct of arrays)."""

    def __init__(self, post: PotentialSpec, k, C, Dm, Fp, gamma, theta, v1, d1):
        self.post = post
        self.k = k
        self.C = C
        self.Dm = Dm          # coefficient of exp(-gamma (x - a1))
        self.Fp = Fp          # coefficient of exp(+gamma (x - a1))
        self.gamma = gamma
        self.theta = theta
        self._v1 = v1         # well-solution value at a1 (scaled by C)
        self._d1 = d1         # well-solution derivative at a1 (scaled by C)

    @classmethod
    def solve(cls, post: PotentialSpec, k) -> "ContinuumBasis":
        """Propagate the wall-regular solution sin(k x) across the barrier and
        rescale so the outer asymptote is exactly sqrt(2/pi) sin(k x + theta)."""
        if post.stage is not Stage.POST_QUENCH:
            raise ValueError("continuum states belong to the post-quench barrier")
        k = np.atleast_1d(np.asarray(k, dtype=float))
        if np.any(k <= 0):
            raise ValueError("continuum wavenumbers must be positive")
        kk = 2.0 * post.U0 - k * k
        if np.any(np.abs(kk) < BAND_EDGE_GUARD):
            raise BandEdgeError(
                f"k too close to the band edge sqrt(2*U0) = {post.band_edge_k:.12g}; "
                "split quadrature panels there")

        a1, d = post.a1, post.d
        v1 = np.sin(k * a1)
        d1 = k * np.cos(k * a1)
        tun = kk > 0
        kap = np.sqrt(np.where(tun, kk, 1.0))
        q = np.sqrt(np.where(tun, 1.0, -kk))
        gamma = np.where(tun, kap, 1j * q)

        v2 = np.where(tun,
                      v1 * np.cosh(kap * d) + d1 * np.sinh(kap * d) / kap,
                      v1 * np.cos(q * d) + d1 * np.sin(q * d) / q)
        d2 = np.where(tun,
                      v1 * kap * np.sinh(kap * d) + d1 * np.cosh(kap * d),
                      -v1 * q * np.sin(q * d) + d1 * np.cos(q * d))

        R = np.hypot(v2, d2 / k)
        phase = np.arctan2(v2, d2 / k)
        theta = np.mod(phase - k * post.a2 + np.pi, 2.0 * np.pi) - np.pi
        C = SQRT_2_OVER_PI / R
        Dm = 0.5 * (v1 - d1 / gamma) * C
        Fp = 0.5 * (v1 + d1 / gamma) * C
        return cls(post, k, C, Dm, Fp, gamma, theta, C * v1, C * d1)

    @property
    def regime(self):
        return np.where(np.real(self.gamma) > 0, Regime.TUNNELING, Regime.PROPAGATING)

    def eval(self, x):
        """phi_k(x): shape (nx, nk) for array x, (nk,) for scalar x.

        Evaluated branch-wise by region so each (x, k) pair costs a single
        transcendental; this path dominates large field evaluations.
        """
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        k = self.k[None, :]
        out = np.empty((len(x), len(self.k)))

        m_well = x <= self.post.a1
        if np.any(m_well):
            xs = x[m_well, None]
            out[m_well] = self.C[None, :] * np.sin(k * np.clip(xs, 0.0, None))
            if np.any(x < 0.0):
                out[x < 0.0] = 0.0
        m_bar = (x > self.post.a1) & (x <= self.post.a2)
        if np.any(m_bar):
            y = x[m_bar, None] - self.post.a1
            out[m_bar] = np.real(self.Dm[None, :] * np.exp(-self.gamma[None, :] * y)
                                 + self.Fp[None, :] * np.exp(self.gamma[None, :] * y))
        m_out = x > self.post.a2
        if np.any(m_out):
            out[m_out] = SQRT_2_OVER_PI * np.sin(k * x[m_out, None] + self.theta[None, :])
        return out[0] if scalar else out

    def state(self, i: int) -> ContinuumState:
        regime = Regime.TUNNELING if np.real(self.gamma[i]) > 0 else Regime.PROPAGATING
        return ContinuumState(k=float(self.k[i]), C=float(self.C[i]),
                              D=complex(self.Dm[i]), F=complex(self.Fp[i]),
                              theta=float(self.theta[i]), regime=regime,
                              a1=self.post.a1, a2=self.post.a2, U0=self.post.U0)

    def dump_csv(self, path) -> None:
        """Debug dump; complex barrier amplitudes are split into re/im columns."""
        with open(path, "w") as fh:
            fh.write("k,C,D_re,D_im,F_re,F_im,theta,regime\n")
            for i in range(len(self.k)):
                regime = "tunneling" if np.real(self.gamma[i]) > 0 else "propagating"
                fh.write(f"{self.k[i]:.16g},{self.C[i]:.16g},"
                         f"{self.Dm[i].real:.16g},{np.imag(self.Dm[i]):.16g},"
                         f"{self.Fp[i].real:.16g},{np.imag(self.Fp[i]):.16g},"
                         f"{self.theta[i]:.16g},{regime}\n")


def solve_continuum(post: PotentialSpec, k: float) -> ContinuumState:
    """Single delta-normalized continuum state at wavenumber k > 0."""
    return ContinuumBasis.solve(post, float(k)).state(0)


def transmission(post: PotentialSpec, E: float) -> tuple[complex, float]:
    """Transmission amplitude t(E) and transparency |t|^2 of the bare barrier
    segment for a free incident particle (the wall at x = 0 is ignored).

    Convention: the transmitted wave is t * exp(i k (x - a2)), i.e. the phase
    is measured across the barrier, so d = 0 gives t = 1 exactly.
    """
    if E <= 0:
        raise ValueError("transmission needs E > 0")
    if E == post.U0:
        raise ValueError("transmission is undefined exactly at E = U0; offset E slightly")
    k = math.sqrt(2.0 * E)
    kk = complex(2.0 * post.U0 - k * k)
    gamma = np.sqrt(kk)  # i*q above the barrier
    gd = gamma * post.d
    eta = (gamma / k - k / gamma) / 2.0
    denom = np.cosh(gd) + 1j * eta * np.sinh(gd)
    t = 1.0 / denom
    return complex(t), float(abs(t) ** 2)


def group_delay(post: PotentialSpec, E: float) -> float:
    """d(arg t)/dE by centered differences with step halving until the value
    changes by less than 1e-6 relative (or an absolute floor for tiny delays)."""
    if E <= 0:
        raise ValueError("group_delay needs E > 0")
    if post.d == 0.0:
        return 0.0

    def phase(e: float) -> float:
        t, _ = transmission(post, e)
        return math.atan2(t.imag, t.real)

    h = 1e-3 * max(E, 1.0)
    prev = None
    for _ in range(40):
        lo, hi = E - h, E + h
        if lo <= 0:
            h *= 0.5
            continue
        dphi = phase(hi) - phase(lo)
        dphi = (dphi + math.pi) % (2.0 * math.pi) - math.pi
        val = dphi / (2.0 * h)
        if prev is not None and abs(val - prev) <= 1e-6 * max(abs(val), 1e-12) + 1e-14:
            return val
        prev = val
        h *= 0.5
    return prev
