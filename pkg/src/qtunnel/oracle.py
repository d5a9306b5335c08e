"""Independent grid-based time-domain solver of the two-component Schrodinger
equation with the spin-orbit term, used to cross-validate the spectral
pipeline.

The Hamiltonian k^2/2 + p_so sigma_x k + U(x) (the constant p_so^2/2 shift
cancels against the completed square) is discretized with centered differences
on [0, L] with hard walls at both ends, and advanced by the unitary
Crank-Nicolson step, a block-tridiagonal solve per step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.linalg import lapack

from .errors import DENSITY_UNDERFLOW, GridTooCoarseError
from .evolve import DENSITY_FLOOR, ObservableRecord, spin_densities
from .model import SimulationConfig, validate
from .spectral import initial_components

KL = KU = 3  # band widths of the interleaved two-component operator


@njit(cache=True)
def _block_factor(p_diag, B, C):
    """LU-style recurrence for the block-tridiagonal CN matrix with scalar
    diagonal blocks p_i*I and constant off-blocks B (sub) and C (super):
    D_i = p_i I - B inv(D_{i-1}) C.  Returns inv(D_i)."""
    n = p_diag.shape[0]
    invD = np.empty((n, 2, 2), dtype=np.complex128)
    d00 = p_diag[0]
    d01 = 0.0 + 0.0j
    d10 = 0.0 + 0.0j
    d11 = p_diag[0]
    for i in range(n):
        if i > 0:
            g00 = invD[i - 1, 0, 0]
            g01 = invD[i - 1, 0, 1]
            g10 = invD[i - 1, 1, 0]
            g11 = invD[i - 1, 1, 1]
            # T = inv(D_{i-1}) C
            t00 = g00 * C[0, 0] + g01 * C[1, 0]
            t01 = g00 * C[0, 1] + g01 * C[1, 1]
            t10 = g10 * C[0, 0] + g11 * C[1, 0]
            t11 = g10 * C[0, 1] + g11 * C[1, 1]
            # D_i = p_i I - B T
            d00 = p_diag[i] - (B[0, 0] * t00 + B[0, 1] * t10)
            d01 = -(B[0, 0] * t01 + B[0, 1] * t11)
            d10 = -(B[1, 0] * t00 + B[1, 1] * t10)
            d11 = p_diag[i] - (B[1, 0] * t01 + B[1, 1] * t11)
        det = d00 * d11 - d01 * d10
        invD[i, 0, 0] = d11 / det
        invD[i, 0, 1] = -d01 / det
        invD[i, 1, 0] = -d10 / det
        invD[i, 1, 1] = d00 / det
    return invD


@njit(cache=True, nogil=True)
def _block_steps(psi, nsteps, bp, BB, BC, invD, B, C):
    """Advance psi (n, 2) by nsteps Crank-Nicolson steps.

    RHS matrix has scalar diagonal blocks bp_i*I and constant off-blocks
    BB (sub) and BC (super); the LHS factorization is invD with off-blocks
    B (sub) and C (super).  Block entries are hoisted into locals so the
    compiler does not reload them against possible aliasing.
    """
    n = psi.shape[0]
    w = np.empty((n, 2), dtype=np.complex128)
    bc00, bc01, bc10, bc11 = BC[0, 0], BC[0, 1], BC[1, 0], BC[1, 1]
    bb00, bb01, bb10, bb11 = BB[0, 0], BB[0, 1], BB[1, 0], BB[1, 1]
    b00, b01, b10, b11 = B[0, 0], B[0, 1], B[1, 0], B[1, 1]
    c00, c01, c10, c11 = C[0, 0], C[0, 1], C[1, 0], C[1, 1]
    for _ in range(nsteps):
        # w = B_rhs @ psi
        p0 = psi[0, 0]
        p1 = psi[0, 1]
        w[0, 0] = bp[0] * p0 + bc00 * psi[1, 0] + bc01 * psi[1, 1]
        w[0, 1] = bp[0] * p1 + bc10 * psi[1, 0] + bc11 * psi[1, 1]
        for i in range(1, n - 1):
            q0 = psi[i, 0]
            q1 = psi[i, 1]
            r0 = psi[i + 1, 0]
            r1 = psi[i + 1, 1]
            w[i, 0] = bp[i] * q0 + bc00 * r0 + bc01 * r1 + bb00 * p0 + bb01 * p1
            w[i, 1] = bp[i] * q1 + bc10 * r0 + bc11 * r1 + bb10 * p0 + bb11 * p1
            p0 = q0
            p1 = q1
        w[n - 1, 0] = bp[n - 1] * psi[n - 1, 0] + bb00 * p0 + bb01 * p1
        w[n - 1, 1] = bp[n - 1] * psi[n - 1, 1] + bb10 * p0 + bb11 * p1
        # forward sweep: z_i = invD_i (w_i - B z_{i-1}), stored into w
        z0 = invD[0, 0, 0] * w[0, 0] + invD[0, 0, 1] * w[0, 1]
        z1 = invD[0, 1, 0] * w[0, 0] + invD[0, 1, 1] * w[0, 1]
        w[0, 0] = z0
        w[0, 1] = z1
        for i in range(1, n):
            u0 = w[i, 0] - (b00 * z0 + b01 * z1)
            u1 = w[i, 1] - (b10 * z0 + b11 * z1)
            z0 = invD[i, 0, 0] * u0 + invD[i, 0, 1] * u1
            z1 = invD[i, 1, 0] * u0 + invD[i, 1, 1] * u1
            if (z0.real * z0.real + z0.imag * z0.imag
                    + z1.real * z1.real + z1.imag * z1.imag) < 1e-280:
                z0 = 0.0 + 0.0j
                z1 = 0.0 + 0.0j
            w[i, 0] = z0
            w[i, 1] = z1
        # backward sweep: x_i = z_i - invD_i C x_{i+1}; amplitudes below
        # 1e-140 are flushed to zero so the quiet region never fills with
        # subnormals (which run orders of magnitude slower)
        x0 = w[n - 1, 0]
        x1 = w[n - 1, 1]
        psi[n - 1, 0] = x0
        psi[n - 1, 1] = x1
        for i in range(n - 2, -1, -1):
            e0 = c00 * x0 + c01 * x1
            e1 = c10 * x0 + c11 * x1
            x0 = w[i, 0] - (invD[i, 0, 0] * e0 + invD[i, 0, 1] * e1)
            x1 = w[i, 1] - (invD[i, 1, 0] * e0 + invD[i, 1, 1] * e1)
            if (x0.real * x0.real + x0.imag * x0.imag
                    + x1.real * x1.real + x1.imag * x1.imag) < 1e-280:
                x0 = 0.0 + 0.0j
                x1 = 0.0 + 0.0j
            psi[i, 0] = x0
            psi[i, 1] = x1
    return psi


@dataclass
class GridState:
    """Two-component wave function on interior nodes of [0, L]."""

    x: np.ndarray            # interior nodes, spacing h
    psi: np.ndarray          # complex, shape (2, nx)
    t: float
    h: float
    p_so: float
    potential: np.ndarray    # U at the nodes
    L: float

    def norm(self) -> float:
        return float(self.h * np.sum(np.abs(self.psi) ** 2))


def _potential_samples(config: SimulationConfig, x: np.ndarray) -> np.ndarray:
    """Post-quench barrier sampled on the grid; jump nodes take the half value
    to keep the discretization second order."""
    u = np.where((x > config.a1) & (x < config.a2), config.U0, 0.0)
    on_edge = np.isclose(x, config.a1) | np.isclose(x, config.a2)
    return np.where(on_edge, 0.5 * config.U0, u)


def make_grid(config: SimulationConfig, L: float, h: float) -> np.ndarray:
    n = int(round(L / h))
    return h * np.arange(1, n)  # interior nodes only; psi(0) = psi(L) = 0


def init_from_bound(config: SimulationConfig, L: float, h: float) -> GridState:
    """Sample the initial bound orbital with spin along +z on the grid."""
    config = validate(config)
    if h > config.a1 / 200.0:
        raise GridTooCoarseError(
            f"h = {h:g} exceeds a1/200 = {config.a1 / 200:g}")
    x = make_grid(config, L, h)
    components = initial_components(config)
    up = sum(w * bs.eval(x) for w, bs in components)
    psi = np.zeros((2, len(x)), dtype=complex)
    psi[0] = up
    state = GridState(x=x, psi=psi, t=0.0, h=h, p_so=config.p_so,
                      potential=_potential_samples(config, x), L=L)
    state.psi /= math.sqrt(state.norm())
    return state


def init_gaussian(L: float, h: float, x0: float, sigma: float, k0: float,
                  p_so: float = 0.0) -> GridState:
    """Free Gaussian packet (zero potential), for scheme self-tests."""
    n = int(round(L / h))
    x = h * np.arange(1, n)
    up = np.exp(-((x - x0) ** 2) / (4 * sigma ** 2) + 1j * k0 * x)
    psi = np.zeros((2, len(x)), dtype=complex)
    psi[0] = up
    state = GridState(x=x, psi=psi, t=0.0, h=h, p_so=p_so,
                      potential=np.zeros_like(x), L=L)
    state.psi /= math.sqrt(state.norm())
    return state


class CrankNicolson:
    """Unitary implicit stepper: (1 + i dt H/2) psi' = (1 - i dt H/2) psi.

    The spatial sites carry 2x2 spin blocks; the diagonal blocks are scalar
    (kinetic + potential) and the neighbor blocks couple the components
    through the sigma_x first-derivative term.  The block-tridiagonal LU
    recurrence is precomputed once per (grid, dt); method "banded" keeps a
    LAPACK general-band path for cross-validation.
    """

    def __init__(self, state: GridState, dt: float, method: str = "block"):
        self.dt = dt
        self.method = method
        h, p_so, u = state.h, state.p_so, state.potential
        nx = len(state.x)
        kin_diag = 1.0 / h ** 2
        kin_off = -0.5 / h ** 2
        so = -1j * p_so / (2.0 * h)
        h_sup = np.array([[kin_off, so], [so, kin_off]], dtype=complex)
        h_sub = h_sup.conj().T
        half = 0.5j * dt

        if method == "block":
            self._p_diag = 1.0 + half * (kin_diag + u)
            self._B = half * h_sub
            self._C = half * h_sup
            self._bp = 1.0 - half * (kin_diag + u)
            self._BB = -half * h_sub
            self._BC = -half * h_sup
            self._invD = _block_factor(self._p_diag.astype(complex),
                                       self._B, self._C)
        elif method == "banded":
            n = 2 * nx
            bands = {off: np.zeros(n, dtype=complex) for off in range(-KL, KU + 1)}
            idx_up = np.arange(0, n, 2)
            idx_dn = np.arange(1, n, 2)
            bands[0][idx_up] = kin_diag + u
            bands[0][idx_dn] = kin_diag + u
            bands[2][:n - 2] = kin_off                 # same component, next site
            bands[-2][2:] = kin_off                    # same component, previous site
            bands[3][idx_up[:-1]] = so                 # up_i <- dn_{i+1}
            bands[1][idx_dn[:-1]] = so                 # dn_i <- up_{i+1}
            bands[-1][idx_up[1:]] = np.conj(so)        # up_i <- dn_{i-1}
            bands[-3][idx_dn[1:]] = np.conj(so)        # dn_i <- up_{i-1}

            self._bands_B = {}
            ab = np.zeros((2 * KL + KU + 1, n), dtype=complex)
            for off, vals in bands.items():
                a_vals = half * vals
                b_vals = -half * vals
                if off == 0:
                    a_vals = a_vals + 1.0
                    b_vals = b_vals + 1.0
                rows = np.arange(max(0, -off), min(n, n - off))
                ab[KL + KU - off, rows + off] = a_vals[rows]
                self._bands_B[off] = b_vals
            lub, ipiv, info = lapack.zgbtrf(ab, KL, KU)
            if info != 0:
                raise RuntimeError(f"banded LU factorization failed (info={info})")
            self._lub = lub
            self._ipiv = ipiv
            self._n = n
        else:
            raise ValueError(f"unknown method {method!r}")

    def _apply_B_banded(self, vec: np.ndarray) -> np.ndarray:
        out = self._bands_B[0] * vec
        n = self._n
        for off in range(1, KU + 1):
            out[:n - off] += self._bands_B[off][:n - off] * vec[off:]
        for off in range(1, KL + 1):
            out[off:] += self._bands_B[-off][off:] * vec[:n - off]
        return out

    def step(self, state: GridState, nsteps: int = 1) -> GridState:
        if self.method == "block":
            psi = np.ascontiguousarray(state.psi.T)  # (n, 2)
            psi = _block_steps(psi, nsteps, self._bp, self._BB, self._BC,
                               self._invD, self._B, self._C)
            state.psi = psi.T
        else:
            vec = state.psi.T.ravel().copy()  # interleave: up0, dn0, up1, dn1, ...
            for _ in range(nsteps):
                rhs = self._apply_B_banded(vec)
                vec, info = lapack.zgbtrs(self._lub, KL, KU, rhs, self._ipiv)
                if info != 0:
                    raise RuntimeError(f"banded solve failed (info={info})")
            state.psi = vec.reshape(-1, 2).T
        state.t += nsteps * self.dt
        return state


def step(state: GridState, dt: float, nsteps: int = 1) -> GridState:
    """One-shot stepping helper (builds a fresh factorization; use
    CrankNicolson directly for long runs)."""
    return CrankNicolson(state, dt).step(state, nsteps)


def probe(state: GridState, x: float) -> ObservableRecord:
    """Observables at x via 4-point (cubic) interpolation of the components;
    shares the observable definitions with the spectral pipeline."""
    if x <= 0.0 or x >= state.L:
        return ObservableRecord(x=float(x), t=state.t, rho=0.0, sx=0.0, sy=0.0,
                                sz=0.0, py=math.nan, flags=(DENSITY_UNDERFLOW,))
    up = _interp_cubic(state.x, state.psi[0], x)
    dn = _interp_cubic(state.x, state.psi[1], x)
    rho, sx, sy, sz = spin_densities(up, dn)
    flags = ()
    py = math.nan
    if rho < DENSITY_FLOOR:
        flags = (DENSITY_UNDERFLOW,)
    else:
        py = sy / rho
    return ObservableRecord(x=float(x), t=state.t, rho=float(rho), sx=float(sx),
                            sy=float(sy), sz=float(sz), py=float(py), flags=flags)


def _interp_cubic(xg: np.ndarray, yg: np.ndarray, x: float):
    """Lagrange cubic through the 4 nodes around x (assumes uniform spacing)."""
    h = xg[1] - xg[0]
    i = int(np.clip(np.searchsorted(xg, x) - 1, 1, len(xg) - 3))
    xs = xg[i - 1:i + 3]
    ys = yg[i - 1:i + 3]
    val = 0.0 + 0.0j
    for a in range(4):
        w = 1.0
        for b in range(4):
            if a != b:
                w *= (x - xs[b]) / (xs[a] - xs[b])
        val += w * ys[a]
    return val


def interp_components(state: GridState, x: float):
    return (_interp_cubic(state.x, state.psi[0], x),
            _interp_cubic(state.x, state.psi[1], x))


def probe_table(state: GridState, xs):
    """Probes at several positions as a FieldTable (same CSV schema as the
    spectral pipeline's observable tables)."""
    from .evolve import FieldTable

    records = [probe(state, float(x)) for x in np.atleast_1d(xs)]
    return FieldTable(
        x=np.array([r.x for r in records]),
        t=np.array([r.t for r in records]),
        rho=np.array([r.rho for r in records]),
        sx=np.array([r.sx for r in records]),
        sy=np.array([r.sy for r in records]),
        sz=np.array([r.sz for r in records]),
        py=np.array([r.py for r in records]),
        flags=[";".join(r.flags) for r in records])


@dataclass
class ComparisonResult:
    ts: np.ndarray
    rho_spectral: np.ndarray
    sy_spectral: np.ndarray
    rho_coarse: np.ndarray
    rho_fine: np.ndarray
    rho_richardson: np.ndarray
    sy_richardson: np.ndarray
    h_coarse: float
    dt_coarse: float
    L: float

    @property
    def peak_rel_diff(self) -> float:
        """Relative rho difference near the main peak (within a factor 3 of it)."""
        mask = self.rho_spectral > np.max(self.rho_spectral) / 3.0
        return float(np.max(np.abs(self.rho_richardson[mask] - self.rho_spectral[mask])
                            / np.max(self.rho_spectral)))


def density_comparison(config: SimulationConfig, ts, X: float | None = None,
                       h: float | None = None, dt: float | None = None,
                       k_front: float | None = None, pad: float = 10.0,
                       sim=None) -> ComparisonResult:
    """Run the grid solver at (h, dt) and (h/2, dt/2), Richardson-combine, and
    compare rho(X, t) and sigma_y(X, t) against the spectral pipeline.

    The domain is enlarged so the fastest relevant spectral content (default
    front speed 3*sqrt(2*U0)) cannot reflect back to X within the run.
    """
    from .evolve import Simulation

    config = validate(config)
    X = config.X_obs if X is None else X
    ts = np.asarray(ts, dtype=float)
    t_end = float(np.max(ts))
    k_front = 3.0 * config.band_edge_k if k_front is None else k_front
    L = X + k_front * t_end + pad
    h = config.a1 / 200.0 if h is None else h
    dt = 1.2 * h if dt is None else dt

    # snap sample times onto the coarse step grid so both runs share them
    steps = np.maximum(1, np.round(ts / dt).astype(int))
    steps = np.unique(steps)
    ts = steps * dt

    def grid_series(hh, dd):
        state = init_from_bound(config, L, hh)
        stepper = CrankNicolson(state, dd)
        out_rho = np.empty(len(steps))
        out_sy = np.empty(len(steps))
        done = 0
        for j, target in enumerate(steps * int(round(dt / dd))):
            stepper.step(state, target - done)
            done = target
            up, dn = interp_components(state, X)
            rho, _, sy, _ = spin_densities(up, dn)
            out_rho[j] = rho
            out_sy[j] = sy
        return out_rho, out_sy

    rho_c, sy_c = grid_series(h, dt)
    rho_f, sy_f = grid_series(h / 2, dt / 2)
    rho_r = (4.0 * rho_f - rho_c) / 3.0
    sy_r = (4.0 * sy_f - sy_c) / 3.0

    sim = sim if sim is not None else Simulation(config)
    rho_s, sy_s = sim.far_field(ts, X)

    return ComparisonResult(ts=ts, rho_spectral=rho_s, sy_spectral=sy_s,
                            rho_coarse=rho_c, rho_fine=rho_f, rho_richardson=rho_r,
                            sy_richardson=sy_r, h_coarse=h, dt_coarse=dt, L=L)
