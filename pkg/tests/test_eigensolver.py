import cmath
import math

import numpy as np
import pytest

from qtunnel.eigensolver import (SQRT_2_OVER_PI, ContinuumBasis, Regime,
                                 group_delay, solve_bound_states,
                                 solve_continuum, transmission)
from qtunnel.errors import BandEdgeError
from qtunnel.model import post_quench, pre_quench

# ---------------------------------------------------------------------------
# independent oracles


def bisection_oracle(a1, U0):
    """Roots of k cot(k a1) + sqrt(2 U0 - k^2) on (0, sqrt(2 U0)), by plain
    bisection on each cotangent branch (pure python)."""

    def f(k):
        return k / math.tan(k * a1) + math.sqrt(2 * U0 - k * k)

    edge = math.sqrt(2 * U0)
    roots = []
    n = 0
    while n * math.pi / a1 < edge:
        lo = n * math.pi / a1 + 1e-13
        hi = min((n + 1) * math.pi / a1 - 1e-13, edge - 1e-13)
        if lo < hi and f(lo) * f(hi) < 0:
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if f(lo) * f(mid) <= 0:
                    hi = mid
                else:
                    lo = mid
            roots.append(0.5 * (lo + hi))
        n += 1
    return roots


def continuum_linear_solve_oracle(a1, d, U0, k):
    """Direct 4x4 solve of the two-interface matching conditions with the well
    solution pinned to sin(k x); returns (C, theta) after delta-normalizing."""
    a2 = a1 + d
    kap = math.sqrt(2 * U0 - k * k)
    # unknowns: [D~, F~, Os, Oc] with barrier D~ e^{-kap(x-a1)} + F~ e^{+kap(x-a1)}
    # and outside Os sin(kx) + Oc cos(kx)
    A = np.array([
        [1.0, 1.0, 0.0, 0.0],
        [-kap, kap, 0.0, 0.0],
        [math.exp(-kap * d), math.exp(kap * d), -math.sin(k * a2), -math.cos(k * a2)],
        [-kap * math.exp(-kap * d), kap * math.exp(kap * d),
         -k * math.cos(k * a2), k * math.sin(k * a2)],
    ])
    b = np.array([math.sin(k * a1), k * math.cos(k * a1), 0.0, 0.0])
    _, _, o_s, o_c = np.linalg.solve(A, b)
    amp = math.hypot(o_s, o_c)
    theta = math.atan2(o_c, o_s)
    return SQRT_2_OVER_PI / amp, theta


def transfer_matrix_transmission(U0, d, E):
    """Plane-wave transfer matrix across one rectangular barrier; returns the
    complex transmission amplitude in the barrier-local convention
    (transmitted wave t * exp(i k (x - d))).

    interface(k1, k2) maps the (A, B) amplitudes of A e^{i k2 x} + B e^{-i k2 x}
    just right of a step onto the amplitudes just left of it; the diagonal
    factor rebases the barrier segment onto its right edge.
    """
    k = cmath.sqrt(2 * E)
    q = cmath.sqrt(2 * (E - U0))

    def interface(k1, k2):
        return 0.5 * np.array([[1 + k2 / k1, 1 - k2 / k1],
                               [1 - k2 / k1, 1 + k2 / k1]], dtype=complex)

    rebase = np.array([[cmath.exp(-1j * q * d), 0], [0, cmath.exp(1j * q * d)]],
                      dtype=complex)
    M = interface(k, q) @ rebase @ interface(q, k)
    # wave on the left: [incident, reflected] = M @ [transmitted, 0]
    return 1.0 / M[0, 0]


# ---------------------------------------------------------------------------
# bound states


def test_two_bound_states_match_oracle(config):
    states = solve_bound_states(config.pre)
    oracle = bisection_oracle(1.0, 16.0)
    assert len(states) == 2 and len(oracle) == 2
    for st, ko in zip(states, oracle):
        assert st.k == pytest.approx(ko, abs=1e-10)
    assert states[0].k == pytest.approx(2.653, abs=5e-4)
    assert states[1].k == pytest.approx(5.14, abs=5e-3)
    assert states[0].energy < states[1].energy


def test_infinite_well_limit():
    states = solve_bound_states(pre_quench(1.0, 1e6))
    assert abs(states[0].k - math.pi) < 1e-2


def test_shallow_step_has_no_bound_state():
    # sqrt(2 U0) < pi/2 leaves no root
    assert solve_bound_states(pre_quench(1.0, 1.0)) == []


def test_bound_eval_wall_and_continuity(config):
    st = solve_bound_states(config.pre)[0]
    assert st.eval(0.0) == 0.0
    assert st.eval(-1.0) == 0.0
    left = st.eval(st.a1 - 1e-12)
    right = st.eval(st.a1 + 1e-12)
    assert abs(left - right) < 1e-10
    # derivative continuity (finite differences straddling a1)
    h = 1e-6
    dl = (st.eval(st.a1) - st.eval(st.a1 - h)) / h
    dr = (st.eval(st.a1 + h) - st.eval(st.a1)) / h
    assert abs(dl - dr) < 1e-4 * abs(dl)


def test_bound_normalization_and_orthogonality(config):
    states = solve_bound_states(config.pre)
    x = np.linspace(0.0, 12.0, 400001)
    for st in states:
        norm = np.trapezoid(st.eval(x) ** 2, x)
        assert abs(norm - 1.0) < 1e-8
    cross = np.trapezoid(states[0].eval(x) * states[1].eval(x), x)
    assert abs(cross) < 1e-8


def test_well_probability_closed_form(config):
    st = solve_bound_states(config.pre)[0]
    x = np.linspace(0.0, 1.0, 200001)
    assert st.well_probability() == pytest.approx(
        float(np.trapezoid(st.eval(x) ** 2, x)), abs=1e-9)
    assert st.well_probability() < 1.0


# ---------------------------------------------------------------------------
# continuum states


def test_degenerate_barrier_is_free_eigenstate():
    post = post_quench(1.0, 1e-13, 16.0)
    for k in (0.8, 2.7, 4.9):
        st = solve_continuum(post, k)
        assert st.C == pytest.approx(SQRT_2_OVER_PI, rel=1e-9)
        assert min(st.theta % math.pi, math.pi - st.theta % math.pi) < 1e-9


def test_propagating_regime(config):
    st = solve_continuum(config.post, 6.0)
    assert st.regime is Regime.PROPAGATING
    assert st.gamma == pytest.approx(2j)  # q = sqrt(36 - 32)


def test_continuum_matches_linear_solve_oracle(config):
    k = 2.0
    st = solve_continuum(config.post, k)
    c_o, th_o = continuum_linear_solve_oracle(1.0, 0.4, 16.0, k)
    assert st.C == pytest.approx(c_o, rel=1e-10)
    assert st.theta == pytest.approx(th_o, abs=1e-10)


def _matching_residuals(basis, x0):
    eps = 1e-7
    phi = basis.eval(np.array([x0 - eps, x0 + eps]))
    dval = np.abs(phi[1] - phi[0])
    scale = np.maximum(np.abs(phi[0]), SQRT_2_OVER_PI)
    return dval / scale


def test_matching_residuals_random_k(config, rng):
    k = rng.uniform(0.05, config.k_max, size=1000)
    edge = config.band_edge_k
    k = k[np.abs(k - edge) > 1e-3]
    basis = ContinuumBasis.solve(config.post, k)
    for x0 in (config.a1, config.a2):
        res = _matching_residuals(basis, x0)
        # value continuity to ~derivative*eps: bound well below 1e-10/eps scale
        assert np.max(res) < 1e-5  # 1e-7 step times O(k) derivative
    # exact continuity at the interfaces evaluated directly
    phi_left = basis.eval(np.array([config.a1]))[0]
    phi_right = np.real(basis.Dm + basis.Fp)
    assert np.max(np.abs(phi_left - phi_right)) < 1e-10


def test_derivative_matching_residuals(config, rng):
    # derivative continuity at both interfaces via centered differences
    k = rng.uniform(0.3, config.k_max, size=200)
    k = k[np.abs(k - config.band_edge_k) > 1e-2]
    basis = ContinuumBasis.solve(config.post, k)
    h = 1e-6
    for x0 in (config.a1, config.a2):
        phi = basis.eval(np.array([x0 - h, x0 + h, x0 - 2 * h, x0 + 2 * h]))
        d_in = (phi[1] - phi[0]) / (2 * h)
        d_out = (phi[3] - phi[2]) / (4 * h)
        assert np.max(np.abs(d_in - d_out) / np.maximum(np.abs(d_in), 1.0)) < 1e-3


def test_phase_shift_limits(config):
    # theta -> 0 (mod pi) as k -> infinity
    st = solve_continuum(config.post, 5000.0)
    assert min(st.theta % math.pi, math.pi - st.theta % math.pi) < 1e-2


def test_band_edge_guard(config):
    edge = config.band_edge_k
    with pytest.raises(BandEdgeError):
        solve_continuum(config.post, edge)
    with pytest.raises(BandEdgeError):
        solve_continuum(config.post, edge + 1e-11)
    # just outside the guard solves fine
    solve_continuum(config.post, edge + 1e-4)


def test_delta_normalization_amplitude(config, rng):
    k = rng.uniform(0.2, config.k_max, size=50)
    k = k[np.abs(k - config.band_edge_k) > 1e-2]
    basis = ContinuumBasis.solve(config.post, k)
    x = np.linspace(config.a2 + 0.01, config.a2 + 3.0, 2001)
    phi = basis.eval(x)
    expected = SQRT_2_OVER_PI * np.sin(np.outer(x, k) + basis.theta[None, :])
    assert np.max(np.abs(phi - expected)) < 1e-12


# ---------------------------------------------------------------------------
# transmission and group delay


def test_transmission_limits(config):
    _, t_open = transmission(post_quench(1.0, 0.0, 16.0), 3.0)
    assert t_open == pytest.approx(1.0)
    _, t_opaque = transmission(config.post, 1e-8)
    assert t_opaque < 1e-6
    t2, T2 = transmission(config.post, 3.0)
    assert 0.0 < T2 <= 1.0 and T2 == pytest.approx(abs(t2) ** 2)
    with pytest.raises(ValueError):
        transmission(config.post, 16.0)


def test_transmission_against_transfer_matrix(config):
    e0 = solve_bound_states(config.pre)[0].energy
    for E in (e0, 1.0, 10.0, 20.0, 40.0):
        t_pkg, T_pkg = transmission(config.post, E)
        t_ref = transfer_matrix_transmission(16.0, 0.4, E)
        assert abs(t_pkg - t_ref) < 1e-12
        assert abs(T_pkg - abs(t_ref) ** 2) < 1e-12


def test_group_delay_zero_width():
    assert group_delay(post_quench(1.0, 0.0, 16.0), 3.0) == 0.0


def test_group_delay_saturates_with_thickness(config):
    e0 = solve_bound_states(config.pre)[0].energy
    tau_07 = group_delay(post_quench(1.0, 0.7, 16.0), e0)
    tau_08 = group_delay(post_quench(1.0, 0.8, 16.0), e0)
    assert abs(tau_08 - tau_07) < 0.05 * abs(tau_08)


def test_group_delay_continuous_across_barrier_top(config):
    eps = 1e-4 * config.U0
    below = group_delay(config.post, config.U0 - eps)
    above = group_delay(config.post, config.U0 + eps)
    assert abs(above - below) < 1e-3 * max(abs(below), 1e-3)
