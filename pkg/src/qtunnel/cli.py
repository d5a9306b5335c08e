"""Command-line entry point: wires configs to runs and emits CSV artifacts
plus a run manifest.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.  All
diagnostics go to stderr; data goes to files and stdout only.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, analysis, errors, oracle
from .eigensolver import group_delay, solve_bound_states, transmission
from .evolve import Simulation
from .model import (InitialState, SimulationConfig, config_hash, dump_config,
                    load_config, validate)

FMT = "{:.16g}"


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return FMT.format(float(value))


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(cell if isinstance(cell, str) else _fmt(cell)
                              for cell in row) + "\n")


def max_workers() -> int:
    raw = os.environ.get("QTUNNEL_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


class Manifest:
    def __init__(self, outdir: Path, subcommand: str, config: SimulationConfig,
                 config_path: str | None):
        self.path = outdir / "manifest.json"
        self.started = time.monotonic()
        self.payload = {
            "subcommand": subcommand,
            "config_path": config_path or "(defaults)",
            "output_directory": str(outdir),
            "tool_version": __version__,
            "config_hash": config_hash(config),
            "duration_s": None,
            "status": "incomplete",
        }
        self._write()

    def _write(self) -> None:
        self.path.write_text(json.dumps(self.payload, indent=2, sort_keys=True) + "\n")

    def complete(self) -> None:
        self.payload["duration_s"] = round(time.monotonic() - self.started, 3)
        self.payload["status"] = "complete"
        self._write()


def _short_time_grid(config: SimulationConfig):
    t_hi = min(config.t_max, 20.0)
    return np.arange(0.0, t_hi + 0.5 * config.dt, config.dt)


def cmd_bound_states(config: SimulationConfig, outdir: Path, args) -> None:
    states = solve_bound_states(config.pre)
    rows = []
    for st in states:
        sim = Simulation(config.with_overrides(
            initial_state=InitialState.GROUND if st.index == 0 else InitialState.EXCITED))
        tau = sim.lifetime()
        rows.append((st.index, st.k, st.energy, st.kappa, tau))
        print(f"j={st.index} k={_fmt(st.k)} E={_fmt(st.energy)} lifetime={_fmt(tau)}")
    write_csv(outdir / "bound_states.csv", ["j", "k", "E", "kappa", "lifetime"], rows)


def cmd_short_time(config: SimulationConfig, outdir: Path, args) -> None:
    ts = _short_time_grid(config)
    xi_pair = (config.xi, 2.0 * config.xi)

    exit_cols, py_cols, py_headers = {}, [], []
    for state in (InitialState.GROUND, InitialState.EXCITED, InitialState.EQUAL_MIX):
        sim = Simulation(config.with_overrides(initial_state=state))
        exit_cols[state.value] = sim.sigma_y_exit(ts)
        for xi in xi_pair:
            sim_xi = sim if xi == config.xi else Simulation(
                config.with_overrides(initial_state=state, xi=xi))
            py_cols.append(sim_xi.well_polarization(ts))
            py_headers.append(f"{state.value}_xi{xi:g}")

    write_csv(outdir / "sigma_y_exit.csv", ["t", "ground", "excited", "mix"],
              zip(ts, exit_cols["ground"], exit_cols["excited"], exit_cols["mix"]))
    write_csv(outdir / "well_polarization.csv", ["t"] + py_headers,
              zip(ts, *py_cols))

    sim = Simulation(config)
    xs = np.arange(config.dx, config.a1 + 0.5 * config.dx, config.dx)
    ts_map = np.arange(0.0, min(config.t_max, 8.0) + 0.5 * config.dt, 2 * config.dt)
    table = sim.field_snapshot(xs, ts_map)
    write_csv(outdir / "well_spin_field.csv", ["x", "t", "sy"],
              zip(table.x, table.t, table.sy))


def cmd_far_field(config: SimulationConfig, outdir: Path, args) -> None:
    ts = np.arange(config.dt, config.t_max + 0.5 * config.dt, config.dt)
    X = config.X_obs

    sim = Simulation(config)
    rho, sy = sim.far_field(ts, X)
    rho_b, _ = Simulation(config.with_overrides(xi=2.0 * config.xi)).far_field(ts, X)
    rho_u, _ = Simulation(config.with_overrides(U0=config.U0 / 2.0)).far_field(ts, X)

    write_csv(outdir / "farfield_density.csv",
              ["t", "rho", f"rho_xi{2 * config.xi:g}", f"rho_U{config.U0 / 2:g}"],
              zip(ts, rho, rho_b, rho_u))
    write_csv(outdir / "farfield_spin.csv", ["t", "sy"], zip(ts, sy))

    table = sim.field_snapshot(np.array([X]), ts)
    table.to_csv(outdir / "observables.csv")

    report = analysis.peak_report(sim, X, ts)
    write_csv(outdir / "peaks.csv", ["X", "t_main", "n_post", "precursor_opposite"],
              [(report.X, report.t_main, report.post_peak_extrema,
                report.precursor_sign_opposite)])


def cmd_tunneling_length(config: SimulationConfig, outdir: Path, args) -> None:
    states = solve_bound_states(config.pre)
    k0 = states[0].k
    e0 = states[0].energy
    gd = group_delay(config.post, e0)

    rows = []
    result = analysis.tunneling_length(config, method=analysis.MOMENT_LIMIT, states=states)
    rows.append((result.method, "inf", result.delta_x, result.spread, result.rel_spread,
                 analysis.delta_t(result, k0), gd, ";".join(result.flags)))
    for xi in (10.0, 20.0):
        result = analysis.tunneling_length(config, method=analysis.FINITE_XI, xi=xi,
                                           states=states)
        rows.append((result.method, _fmt(xi), result.delta_x, result.spread,
                     result.rel_spread, analysis.delta_t(result, k0), gd,
                     ";".join(result.flags)))
    write_csv(outdir / "delta_x.csv",
              ["method", "xi", "delta_x", "spread", "rel_spread",
               "delta_t", "group_delay_E0", "flags"], rows)
    for row in rows:
        print(f"method={row[0]} xi={row[1]} delta_x={_fmt(row[2])} "
              f"delta_t={_fmt(row[5])} group_delay={_fmt(row[6])}")


def cmd_scan(config: SimulationConfig, outdir: Path, args) -> None:
    rows = analysis.transparency_scan(config, max_workers=max_workers())
    write_csv(outdir / "scan.csv",
              ["U0", "d", "transparency", "delta_x", "spread", "flags"],
              [(r.U0, r.d, r.transparency, r.delta_x, r.spread, ";".join(r.flags))
               for r in rows])


def cmd_oracle_check(config: SimulationConfig, outdir: Path, args) -> None:
    states = solve_bound_states(config.pre)
    k0 = states[0].k
    t_arrival = config.X_obs / k0
    ts = np.arange(0.7 * t_arrival, 1.45 * t_arrival, 0.1)
    result = oracle.density_comparison(config, ts)
    write_csv(outdir / "oracle_check.csv",
              ["t", "rho_spectral", "rho_coarse", "rho_fine", "rho_richardson",
               "sy_spectral", "sy_richardson"],
              zip(result.ts, result.rho_spectral, result.rho_coarse, result.rho_fine,
                  result.rho_richardson, result.sy_spectral, result.sy_richardson))
    print(f"peak_rel_diff={_fmt(result.peak_rel_diff)}")


COMMANDS = {
    "bound-states": cmd_bound_states,
    "short-time": cmd_short_time,
    "far-field": cmd_far_field,
    "tunneling-length": cmd_tunneling_length,
    "scan": cmd_scan,
    "oracle-check": cmd_oracle_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qtunnel",
        description="Tunneling decay of a spin-orbit-coupled particle after a "
                    "potential quench: spectral simulation and reports.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="key = value config file")
        p.add_argument("--out", type=str, default="out", help="output directory")
        p.add_argument("--xi", type=float, default=None, help="override precession half-length")
        p.add_argument("--initial", type=str, default=None,
                       choices=[s.value for s in InitialState], help="override initial state")
        p.add_argument("--X", type=float, default=None, help="override observation point")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config) if args.config else SimulationConfig()
        overrides = {}
        if args.xi is not None:
            overrides["xi"] = args.xi
        if args.initial is not None:
            overrides["initial_state"] = InitialState(args.initial)
        if args.X is not None:
            overrides["X_obs"] = args.X
        if overrides:
            config = config.with_overrides(**overrides)
        config = validate(config)
    except (errors.ConfigError, OSError) as exc:
        print(f"qtunnel: configuration error: {exc}", file=sys.stderr)
        return 2

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(outdir, args.subcommand, config, args.config)
    try:
        COMMANDS[args.subcommand](config, outdir, args)
    except (errors.PhaseUnresolvedError, errors.NoPeakError,
            errors.DensityUnderflowError, errors.BandEdgeError,
            FloatingPointError, RuntimeError) as exc:
        print(f"qtunnel: numerical failure: {exc}", file=sys.stderr)
        return 3
    except errors.ConfigError as exc:
        print(f"qtunnel: configuration error: {exc}", file=sys.stderr)
        return 2
    manifest.complete()
    return 0


if __name__ == "__main__":
    sys.exit(main())
