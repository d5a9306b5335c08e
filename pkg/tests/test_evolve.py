import math

import numpy as np
import pytest

from qtunnel.errors import PhaseUnresolvedError
from qtunnel.evolve import (DENSITY_FLOOR, Frame, ObservableRecord, Propagator,
                            Simulation, SpinorSample, evolve_gauged,
                            lab_components, observables, spin_densities, to_lab,
                            window_totals)
from qtunnel.model import InitialState, SimulationConfig, validate
from qtunnel.spectral import gauged_initial, initial_components, reconstruct_t0


def test_t0_equals_reconstruction(config, amplitudes):
    x = np.array([0.3, 0.9, 1.2, 2.5, 5.0])
    prop = Propagator(amplitudes)
    up, dn = prop.components(x, [0.0])
    # identity case against reconstruction restricted to the same k range
    up_r, dn_r = reconstruct_t0(amplitudes, x, k_stop=0.0)
    assert np.max(np.abs(up[:, 0] - up_r)) < 1e-8
    assert np.max(np.abs(dn[:, 0] - 1j * dn_r)) < 1e-8
    # and against the tail-extended reconstruction within the truncation budget
    up_e, dn_e = reconstruct_t0(amplitudes, x)
    assert np.max(np.abs(up[:, 0] - up_e)) < 2e-3
    assert np.max(np.abs(dn[:, 0] - 1j * dn_e)) < 2e-3


def test_hard_wall_vanishes(amplitudes):
    sample = evolve_gauged(amplitudes, 0.0, 3.7)
    assert sample.up == 0.0 and sample.down == 0.0


def test_lab_transform_identities(amplitudes, rng):
    sample = evolve_gauged(amplitudes, 2.2, 1.5)
    # x = 0: rotation is the identity
    s0 = SpinorSample(x=0.0, t=1.0, frame=Frame.GAUGED, up=0.3 + 0.1j, down=0.2j)
    lab0 = to_lab(s0, xi=0.5)
    assert lab0.up == s0.up and lab0.down == s0.down
    # xi -> inf: no coupling
    lab_inf = to_lab(sample, xi=math.inf)
    assert lab_inf.up == sample.up and lab_inf.down == sample.down
    # unitarity
    lab = to_lab(sample, xi=0.5)
    assert lab.norm2 == pytest.approx(sample.norm2, rel=1e-14)
    assert lab.frame is Frame.LAB


def test_observables_z_polarized():
    s = SpinorSample(x=1.0, t=0.0, frame=Frame.LAB, up=0.6 + 0.2j, down=0.0)
    rec = observables(s)
    assert rec.sz == pytest.approx(rec.rho)
    assert rec.sx == 0.0 and rec.sy == 0.0
    assert rec.py == pytest.approx(0.0)


def test_observables_requires_lab_frame(amplitudes):
    sample = evolve_gauged(amplitudes, 1.0, 0.5)
    with pytest.raises(ValueError):
        observables(sample)


def test_purity_identity(rng):
    ups = rng.standard_normal(1000) + 1j * rng.standard_normal(1000)
    dns = rng.standard_normal(1000) + 1j * rng.standard_normal(1000)
    rho, sx, sy, sz = spin_densities(ups, dns)
    assert np.max(np.abs(sx ** 2 + sy ** 2 + sz ** 2 - rho ** 2) / rho ** 2) < 1e-12


def test_density_underflow_flag():
    s = SpinorSample(x=1.0, t=0.0, frame=Frame.LAB, up=1e-8, down=0.0)
    rec = observables(s)
    assert "DENSITY_UNDERFLOW" in rec.flags
    assert math.isnan(rec.py)


def test_gauge_invariant_density_and_sx(amplitudes, rng):
    xs = rng.uniform(0.1, 8.0, size=12)
    ts = rng.uniform(0.0, 6.0, size=5)
    prop = Propagator(amplitudes)
    up_g, dn_g = prop.components(xs, ts)
    up_l, dn_l = lab_components(up_g, dn_g, xs[:, None], 0.5)
    rho_g, sx_g, _, _ = spin_densities(up_g, dn_g)
    rho_l, sx_l, _, _ = spin_densities(up_l, dn_l)
    assert np.max(np.abs(rho_g - rho_l)) < 1e-14 * np.max(rho_g) + 1e-300
    assert np.max(np.abs(sx_g - sx_l)) < 1e-13 * np.max(np.abs(sx_g)) + 1e-300


def test_early_exit_spin_negative(ground_sim):
    ts = np.linspace(0.2, 3.0, 57)
    sy = ground_sim.sigma_y_exit(ts)
    assert sy.min() < -1e-3


def test_survival_initial_value(config, ground_sim):
    s0 = ground_sim.survival(0.0)
    st = ground_sim.bound_states[0]
    # truncation at k_max leaves a few-1e-6 residue in the t = 0 density
    assert s0 == pytest.approx(st.well_probability(), abs=1e-5)
    assert s0 < 1.0


def test_lifetimes_ordered(ground_sim, excited_sim):
    tau_g = ground_sim.lifetime()
    tau_e = excited_sim.lifetime()
    assert tau_e < tau_g
    s = ground_sim.survival(tau_g)
    assert s == pytest.approx(ground_sim.survival(0.0) / math.e, rel=1e-3)


def test_well_polarization_starts_at_zero(ground_sim):
    assert abs(ground_sim.well_polarization(0.0)) < 1e-4


def test_mix_polarization_oscillation(mix_sim):
    ts = np.linspace(0.01, 3.0, 300)
    py = mix_sim.well_polarization(ts)
    ext = [ts[j] for j in range(1, len(ts) - 1)
           if (py[j] - py[j - 1]) * (py[j + 1] - py[j]) < 0]
    spacing = float(np.mean(np.diff(ext)))
    states = mix_sim.bound_states
    half_period = math.pi / (states[1].energy - states[0].energy)
    assert spacing == pytest.approx(half_period, rel=0.15)


def test_field_snapshot_structure(ground_sim):
    xs = np.array([0.0, 0.5, 1.0])
    ts = np.array([0.0, 1.0])
    table = ground_sim.field_snapshot(xs, ts)
    # ordering by (t, x)
    assert np.all(np.diff(table.t) >= 0)
    assert list(table.x[:3]) == [0.0, 0.5, 1.0]
    # wall rows vanish identically
    wall = table.x == 0.0
    assert np.all(table.rho[wall] == 0.0) and np.all(table.sy[wall] == 0.0)
    assert table.CSV_HEADER == "x,t,rho,sx,sy,sz,py,flags"


def test_snapshot_csv_format(tmp_path, ground_sim):
    table = ground_sim.field_snapshot(np.array([0.0, 0.7]), np.array([0.0, 0.5]))
    path = tmp_path / "snap.csv"
    table.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,t,rho,sx,sy,sz,py,flags"
    assert len(lines) == 1 + 4
    assert "," in lines[1]


def test_zero_coupling_spin_stays_z():
    cfg = validate(SimulationConfig(xi=math.inf))
    sim = Simulation(cfg)
    xs = np.array([0.4, 1.1, 3.0])
    ts = np.array([0.0, 2.0, 5.0])
    up, dn = sim.lab_components(xs, ts)
    _, sx, sy, _ = spin_densities(up, dn)
    assert np.max(np.abs(sy)) == 0.0 and np.max(np.abs(sx)) == 0.0


def test_sigma_x_total_conserved_window(amplitudes):
    norms, sigmas = window_totals(amplitudes, [0.0, 10.0])
    assert abs(sigmas[1] - sigmas[0]) < 1e-6
    assert abs(norms[0] - 1.0) < 1e-5 and abs(norms[1] - 1.0) < 1e-5


def test_doubling_nodes_stable(config, amplitudes):
    prop = Propagator(amplitudes)
    ts = np.array([5.0, 12.0, 20.0])
    up1, dn1 = prop._components_at(np.array([config.X_obs]), ts, 8.0)
    up2, dn2 = prop._components_at(np.array([config.X_obs]), ts, 16.0)
    scale = max(np.max(np.abs(up2)), np.max(np.abs(dn2)))
    assert np.max(np.abs(up1 - up2)) < 1e-6 * scale
    assert np.max(np.abs(dn1 - dn2)) < 1e-6 * scale


def test_node_cap_raises(amplitudes):
    prop = Propagator(amplitudes, node_cap=1000)
    with pytest.raises(PhaseUnresolvedError):
        prop.components(np.array([30.0]), np.array([30.0]))


def test_negative_time_rejected(amplitudes):
    with pytest.raises(ValueError):
        evolve_gauged(amplitudes, 1.0, -0.1)


def test_observable_record_fields(ground_sim):
    rec = observables(to_lab(evolve_gauged(ground_sim.amplitudes, 1.4, 2.0), 0.5))
    assert isinstance(rec, ObservableRecord)
    assert rec.rho > 0
    assert rec.sx ** 2 + rec.sy ** 2 + rec.sz ** 2 == pytest.approx(rec.rho ** 2, rel=1e-10)
