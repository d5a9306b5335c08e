"""Expansion of the gauged initial state over the barrier continuum.

All overlap integrals are evaluated in closed form: every factor of the
integrand (bound state, continuum state, spin-rotation trig factor) is a sum
of complex exponentials on each of the three intervals [0, a1], [a1, a2],
[a2, inf), so products reduce to integrals of (c0 + c1*x) * exp(mu*x) which
have elementary antiderivatives.  This removes tail-truncation error and is
exact for arbitrarily opaque barriers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .eigensolver import SQRT_2_OVER_PI, BoundState, ContinuumBasis, solve_bound_states
from .errors import MissingExcitedError
from .model import InitialState, PotentialSpec, SimulationConfig

# ---------------------------------------------------------------------------
# stable primitives: int_0^1 exp(z s) ds and int_0^1 s exp(z s) ds


def _e0(z):
    """(exp(z) - 1)/z with a series branch wide enough that the exact form
    never hits its eps/|z| cancellation."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-3
    zs = np.where(small, 1.0, z)
    series = 1.0 + z * (1 / 2 + z * (1 / 6 + z * (1 / 24 + z / 120)))
    return np.where(small, series, (np.exp(zs) - 1.0) / zs)


def _e1(z):
    """(exp(z)(z - 1) + 1)/z^2 with a series branch (eps/|z|^2 cancellation
    in the exact form is severe near zero)."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 2e-2
    zs = np.where(small, 1.0, z)
    exact = (np.exp(zs) * (zs - 1.0) + 1.0) / (zs * zs)
    series = 1 / 2 + z * (1 / 3 + z * (1 / 8 + z * (1 / 30 + z * (1 / 144 + z / 840))))
    return np.where(small, series, exact)


def _int_finite(coef, mu, length, w0, w1, x0):
    """sum_m coef_m * int_0^L (w0 + w1*(x0+y)) exp(mu_m y) dy."""
    z = mu * length
    i0 = length * _e0(z)
    i1 = length * length * _e1(z)
    return np.sum(coef * ((w0 + w1 * x0) * i0 + w1 * i1), axis=0)


def _int_tail(coef, mu, w0, w1, x0):
    """sum_m coef_m * int_0^inf (w0 + w1*(x0+y)) exp(mu_m y) dy for Re(mu) < 0."""
    i0 = -1.0 / mu
    i1 = 1.0 / (mu * mu)
    return np.sum(coef * ((w0 + w1 * x0) * i0 + w1 * i1), axis=0)


# ---------------------------------------------------------------------------
# overlap kernel


class OverlapKernel:
    """Closed-form overlaps of a (combination of) bound state(s) with the
    continuum basis, optionally weighted by the spin-rotation factors.

    components: [(weight, BoundState), ...]; the gauged initial state is
    sum_j w_j phi_j(x) * [cos(x/2xi), i sin(x/2xi)].
    xi = math.inf means no coupling (the sin channel vanishes identically).
    """

    def __init__(self, post: PotentialSpec, components, xi: float):
        self.post = post
        self.components = list(components)
        self.xi = float(xi)
        self._b = 0.0 if math.isinf(self.xi) else 1.0 / (2.0 * self.xi)

    def basis(self, k) -> ContinuumBasis:
        return ContinuumBasis.solve(self.post, k)

    # factor-term tables: list of (coefficient, exponent rate)
    def _factor_cos(self):
        b = self._b
        return ((0.5, 1j * b), (0.5, -1j * b))

    def _factor_sin(self):
        # sin(bx) = (e^{ibx} - e^{-ibx})/(2i)
        b = self._b
        return ((-0.5j, 1j * b), (0.5j, -1j * b))

    _FACTOR_ONE = ((1.0, 0.0),)

    def _integrate(self, basis: ContinuumBasis, factor, w0: float, w1: float):
        """sum_j w_j * int_0^inf (w0 + w1 x) factor(x) phi_j(x) phi_k(x) dx."""
        post = self.post
        a1, a2, d = post.a1, post.a2, post.d
        k = basis.k
        total = np.zeros(k.shape, dtype=complex)
        one = np.ones_like(k, dtype=complex)
        amp = SQRT_2_OVER_PI
        out_plus = amp / 2j * np.exp(1j * (k * a2 + basis.theta))
        out_minus = -amp / 2j * np.exp(-1j * (k * a2 + basis.theta))

        for weight, bs in self.components:
            tail_a2 = bs.amp_tail * math.exp(-bs.kappa * d)
            for cf, mf in factor:
                # [0, a1]: w*A sin(kj x) * C sin(k x)
                coefs, mus = [], []
                for cj, mj in ((bs.amp_well / 2j, 1j * bs.k),
                               (-bs.amp_well / 2j, -1j * bs.k)):
                    for ck, mk in ((basis.C / 2j, 1j * k), (-basis.C / 2j, -1j * k)):
                        coefs.append(weight * cf * cj * ck)
                        mus.append((mf + mj + mk) * one)
                total += _int_finite(np.array(coefs), np.array(mus), a1, w0, w1, 0.0)

                # [a1, a2]: w*B e^{-kappa y} * (Dm e^{-gamma y} + Fp e^{gamma y})
                phase_f = np.exp(mf * a1)
                coefs, mus = [], []
                for ck, mk in ((basis.Dm, -basis.gamma), (basis.Fp, basis.gamma)):
                    coefs.append(weight * cf * phase_f * bs.amp_tail * ck)
                    mus.append((mf - bs.kappa) * one + mk)
                total += _int_finite(np.array(coefs), np.array(mus), d, w0, w1, a1)

                # [a2, inf): w*B e^{-kappa d} e^{-kappa y} * sqrt(2/pi) sin(kx + theta)
                phase_f = np.exp(mf * a2)
                coefs, mus = [], []
                for ck, mk in ((out_plus, 1j * k), (out_minus, -1j * k)):
                    coefs.append(weight * cf * phase_f * tail_a2 * ck)
                    mus.append((mf - bs.kappa) * one + mk)
                total += _int_tail(np.array(coefs), np.array(mus), w0, w1, a2)
        return total

    def g1(self, k, basis: ContinuumBasis | None = None):
        """G_1(k) = int cos(x/2xi) phi_j phi_k dx (real)."""
        basis = basis or self.basis(k)
        return np.real(self._integrate(basis, self._factor_cos(), 1.0, 0.0))

    def gm1_over_i(self, k, basis: ContinuumBasis | None = None):
        """G_{-1}(k)/i = int sin(x/2xi) phi_j phi_k dx (real)."""
        if self._b == 0.0:
            return np.zeros(np.shape(k))
        basis = basis or self.basis(k)
        return np.real(self._integrate(basis, self._factor_sin(), 1.0, 0.0))

    def moment(self, k, basis: ContinuumBasis | None = None):
        """M(k) = int (x/2) phi_j phi_k dx (real), the xi -> inf limit of
        xi * G_{-1}/i."""
        basis = basis or self.basis(k)
        return np.real(self._integrate(basis, self._FACTOR_ONE, 0.0, 0.5))

    def g1_limit(self, k, basis: ContinuumBasis | None = None):
        """xi -> inf limit of G_1: the plain overlap int phi_j phi_k dx (real)."""
        basis = basis or self.basis(k)
        return np.real(self._integrate(basis, self._FACTOR_ONE, 1.0, 0.0))


def initial_components(config: SimulationConfig, states: list[BoundState] | None = None):
    """(weight, BoundState) pairs for the configured initial orbital state."""
    states = states if states is not None else solve_bound_states(config.pre)
    if not states:
        raise MissingExcitedError("the step potential holds no bound state")
    sel = config.initial_state
    if sel is InitialState.GROUND:
        return [(1.0, states[0])]
    if len(states) < 2:
        raise MissingExcitedError(
            f"initial state {sel.value!r} needs two bound states, found {len(states)}")
    if sel is InitialState.EXCITED:
        return [(1.0, states[1])]
    w = 1.0 / math.sqrt(2.0)
    return [(w, states[0]), (w, states[1])]


def gauged_initial(components, xi: float, x):
    """Components of the gauged initial spinor at x: (phi*cos(x/2xi),
    phi*sin(x/2xi)); the lower entry carries an implicit factor i."""
    x = np.asarray(x, dtype=float)
    phi = sum(w * bs.eval(x) for w, bs in components)
    if math.isinf(xi):
        return phi, np.zeros_like(phi)
    return phi * np.cos(x / (2.0 * xi)), phi * np.sin(x / (2.0 * xi))


# ---------------------------------------------------------------------------
# adaptive k grid


@dataclass
class SpectralAmplitudes:
    """Expansion coefficients sampled on an adaptively refined k grid.

    G1 and M are real; G_{-1} is purely imaginary and stored as gm1_over_i.
    ``panels`` are the refined panel boundaries (band edge always included);
    coefficient values between samples interpolate to within the refinement
    tolerance.  The kernel re-evaluates exactly wherever quadrature needs it.
    """

    k: np.ndarray
    G1: np.ndarray
    Gm1_over_i: np.ndarray
    M: np.ndarray
    panels: np.ndarray
    kernel: OverlapKernel
    xi: float
    initial_state: InitialState
    tol: float

    def parseval(self, order: int = 16, extend: bool = True,
                 tail_tol: float = 1e-10, k_stop: float = 4096.0) -> float:
        """int (G1^2 + |G_{-1}|^2) dk, panel-wise Gauss-Legendre with exact
        kernel evaluations; the algebraic coefficient tail beyond the sampled
        range is accumulated in octaves until it falls below tail_tol."""

        def band(panels):
            nodes, weights = panel_nodes(panels, np.full(len(panels) - 1, 4.0),
                                         nodes_per_cycle=8.0, order=order)
            basis = self.kernel.basis(nodes)
            g1 = self.kernel.g1(nodes, basis)
            gm = self.kernel.gm1_over_i(nodes, basis)
            return float(np.sum(weights * (g1 * g1 + gm * gm)))

        total = band(self.panels)
        k_lo = float(self.panels[-1])
        while extend and k_lo < k_stop:
            k_hi = 2.0 * k_lo
            extra = band(np.linspace(k_lo, k_hi, max(2, int((k_hi - k_lo) / 2.0) + 1)))
            total += extra
            if extra < tail_tol:
                break
            k_lo = k_hi
        return total

    def interp(self, k):
        """Linear interpolation of the sampled coefficients (diagnostics)."""
        return (np.interp(k, self.k, self.G1),
                np.interp(k, self.k, self.Gm1_over_i),
                np.interp(k, self.k, self.M))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("k,G1,Im_Gm1,M\n")
            for i in range(len(self.k)):
                fh.write(f"{self.k[i]:.16g},{self.G1[i]:.16g},"
                         f"{self.Gm1_over_i[i]:.16g},{self.M[i]:.16g}\n")


def _safe_k(k, edge: float):
    """Nudge sample points off k = 0 and off the band-edge guard zone."""
    k = np.maximum(np.asarray(k, dtype=float), 1e-9)
    near = np.abs(k - edge) < 2e-9
    if np.any(near):
        k = np.where(near, edge + np.where(k >= edge, 2e-9, -2e-9), k)
    return k


def _refine_panels(kernel: OverlapKernel, boundaries: np.ndarray, tol: float,
                   min_width: float = 1e-6, max_rounds: int = 40):
    """Bisect panels until cubic interpolation of each coefficient across the
    panel predicts the midpoint to within tol."""
    panels = list(zip(boundaries[:-1], boundaries[1:]))
    accepted = []
    for _ in range(max_rounds):
        if not panels:
            break
        lo = np.array([p[0] for p in panels])
        hi = np.array([p[1] for p in panels])
        # sample ends and interior quarter points, one vectorized kernel call
        offs = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
        ks = (lo[:, None] + offs[None, :] * (hi - lo)[:, None]).ravel()
        ks = _safe_k(ks, kernel.post.band_edge_k)
        basis = kernel.basis(ks)
        vals = np.stack([kernel.g1(ks, basis),
                         kernel.gm1_over_i(ks, basis),
                         kernel.moment(ks, basis)])  # (3, 5*npanels)
        vals = vals.reshape(3, len(panels), 5)
        # cubic through offsets {0, 1/4, 3/4, 1} evaluated at 1/2:
        # p(1/2) = (-f0 + 4 f1 + 4 f3 - f4) / 6
        pred = (-vals[:, :, 0] + 4 * vals[:, :, 1] + 4 * vals[:, :, 3] - vals[:, :, 4]) / 6.0
        err = np.max(np.abs(pred - vals[:, :, 2]), axis=0)
        split = (err > tol) & ((hi - lo) > 2 * min_width)
        for i, p in enumerate(panels):
            if not split[i]:
                accepted.append(p)
        panels = []
        for i, (plo, phi_) in enumerate(zip(lo, hi)):
            if split[i]:
                mid = 0.5 * (plo + phi_)
                panels.extend([(plo, mid), (mid, phi_)])
    accepted.extend(panels)
    edges = sorted({b for p in accepted for b in p})
    return np.array(edges)


def compute_coefficients(config: SimulationConfig,
                         states: list[BoundState] | None = None,
                         xi: float | None = None) -> SpectralAmplitudes:
    """Adaptively sampled G_1, G_{-1}/i and M for the configured initial state.

    The k grid starts uniform with spacing config.dk, always contains a panel
    boundary at the band edge sqrt(2*U0), and is bisected until cubic
    interpolation of every coefficient is accurate to config.k_tol.
    """
    xi = config.xi if xi is None else xi
    components = initial_components(config, states)
    kernel = OverlapKernel(config.post, components, xi)

    edge = config.band_edge_k
    base = np.linspace(0.0, config.k_max, max(2, int(round(config.k_max / config.dk)) + 1))
    boundaries = np.unique(np.concatenate([base, [edge]]))
    panels = _refine_panels(kernel, boundaries, config.k_tol)

    # sample each panel at its ends and midpoint for the stored table
    mids = 0.5 * (panels[:-1] + panels[1:])
    k = np.unique(_safe_k(np.concatenate([panels, mids]), edge))
    basis = kernel.basis(k)
    return SpectralAmplitudes(
        k=k, G1=kernel.g1(k, basis), Gm1_over_i=kernel.gm1_over_i(k, basis),
        M=kernel.moment(k, basis), panels=panels, kernel=kernel, xi=xi,
        initial_state=config.initial_state, tol=config.k_tol)


# ---------------------------------------------------------------------------
# panel-wise Gauss-Legendre nodes for oscillatory integrals over k


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss(order: int):
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def panel_nodes(panels: np.ndarray, rates: np.ndarray,
                nodes_per_cycle: float = 8.0, order: int = 16):
    """Composite Gauss-Legendre nodes resolving a local phase rate per panel.

    rates[i] bounds |d(phase)/dk| on panel i; each panel is subdivided so that
    every subpanel carries at least nodes_per_cycle nodes per 2*pi of phase.
    Returns (nodes, weights).
    """
    xg, wg = _gauss(order)
    nodes, weights = [], []
    for (lo, hi), rate in zip(zip(panels[:-1], panels[1:]), rates):
        width = hi - lo
        if width <= 0:
            continue
        cycles = rate * width / (2.0 * math.pi)
        nsub = max(1, int(math.ceil(cycles * nodes_per_cycle / order)))
        edges = np.linspace(lo, hi, nsub + 1)
        half = 0.5 * (edges[1:] - edges[:-1])
        mid = 0.5 * (edges[1:] + edges[:-1])
        nodes.append((mid[:, None] + half[:, None] * xg[None, :]).ravel())
        weights.append((half[:, None] * wg[None, :]).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


def count_panel_nodes(panels: np.ndarray, rates: np.ndarray,
                      nodes_per_cycle: float = 8.0, order: int = 16) -> int:
    total = 0
    for (lo, hi), rate in zip(zip(panels[:-1], panels[1:]), rates):
        width = hi - lo
        if width <= 0:
            continue
        cycles = rate * width / (2.0 * math.pi)
        total += order * max(1, int(math.ceil(cycles * nodes_per_cycle / order)))
    return total


def phase_rates(amps: SpectralAmplitudes, x_max: float, t_max: float) -> np.ndarray:
    """Per-panel bound on |d/dk (k x + theta(k) - k^2 t / 2)|."""
    panels = amps.panels
    k_hi = panels[1:]
    theta = amps.kernel.basis(_safe_k(panels, amps.kernel.post.band_edge_k)).theta
    dtheta = np.abs(np.diff(np.unwrap(theta)))
    width = np.maximum(np.diff(panels), 1e-300)
    return np.abs(x_max) + t_max * k_hi + dtheta / width


def reconstruct_t0(amps: SpectralAmplitudes, x, order: int = 16,
                   tail_tol: float = 2e-6, k_stop: float = 4096.0):
    """int G_sigma(k) phi_k(x) dk: reproduces the gauged initial state.

    The coefficients fall off only algebraically (k^-3, from the wall
    curvature and the potential step), so the sampled range is extended in
    octaves beyond k_max until the added contribution is below tail_tol;
    with no time phase this extension is cheap.  Returns (upper, lower/i)
    as real arrays over x.
    """
    kernel = amps.kernel
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x_max = float(np.max(np.abs(x)))

    def contribution(panels, rates):
        nodes, weights = panel_nodes(panels, rates, order=order)
        basis = kernel.basis(nodes)
        g1 = kernel.g1(nodes, basis)
        gm = kernel.gm1_over_i(nodes, basis)
        phi = basis.eval(x)  # (nx, nk)
        return phi @ (weights * g1), phi @ (weights * gm)

    up, dn = contribution(amps.panels, phase_rates(amps, x_max, 0.0))
    rate = x_max + kernel.post.a2 + 1.0  # basis and coefficient k-oscillation
    k_lo = float(amps.panels[-1])
    while k_lo < k_stop:
        k_hi = 2.0 * k_lo
        panels = np.linspace(k_lo, k_hi, max(2, int((k_hi - k_lo) / 2.0) + 1))
        du, dd = contribution(panels, np.full(len(panels) - 1, rate))
        up += du
        dn += dd
        if max(np.max(np.abs(du)), np.max(np.abs(dd))) < tail_tol:
            break
        k_lo = k_hi
    return up, dn
