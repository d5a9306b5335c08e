"""CSV loading and matplotlib rendering for the figure recipes."""
from __future__ import annotations

import csv
import fnmatch
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .recipes import RECIPES, FigureRecipe

# deterministic PDF output across reruns
PDF_METADATA = {"CreationDate": None}


class MissingColumnError(KeyError):
    """A required CSV column (or column pattern) is absent."""


class EmptySeriesError(ValueError):
    """A required series holds no rows or no finite values."""


class Table:
    """A small columnar CSV view with pattern-based column access."""

    def __init__(self, path: Path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                self.header = next(reader)
            except StopIteration:
                raise EmptySeriesError(f"{path.name}: empty file")
            rows = list(reader)
        self.path = path
        self.columns = {}
        for j, name in enumerate(self.header):
            values = []
            for row in rows:
                try:
                    values.append(float(row[j]))
                except (ValueError, IndexError):
                    values.append(math.nan)
            self.columns[name] = np.array(values)

    def require(self, patterns) -> None:
        for pattern in patterns:
            names = fnmatch.filter(self.header, pattern)
            if not names:
                raise MissingColumnError(
                    f"{self.path.name}: no column matches {pattern!r} "
                    f"(have {self.header})")
            for name in names:
                col = self.columns[name]
                if col.size == 0 or not np.any(np.isfinite(col)):
                    raise EmptySeriesError(f"{self.path.name}: column {name!r} is empty")

    def matching(self, pattern):
        return [(name, self.columns[name]) for name in fnmatch.filter(self.header, pattern)]

    def __getitem__(self, name):
        if name not in self.columns:
            raise MissingColumnError(f"{self.path.name}: no column {name!r}")
        return self.columns[name]


def _load_inputs(recipe: FigureRecipe, in_dir: Path) -> dict[str, Table]:
    tables = {}
    for filename, patterns in recipe.inputs.items():
        table = Table(in_dir / filename)
        table.require(patterns)
        tables[filename] = table
    return tables


# ---------------------------------------------------------------------------
# builders: each draws onto a figure and returns the number of data series


def build_exit_spin(tables, fig):
    t = tables["sigma_y_exit.csv"]
    ax = fig.subplots()
    styles = {"ground": "-", "excited": "--", "mix": "-."}
    for name, style in styles.items():
        ax.plot(t["t"], t[name], style, label=name)
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\sigma_y(a_2, t)$")
    ax.axhline(0.0, color="0.8", lw=0.6, zorder=0)
    ax.legend(frameon=False)
    return 3


def build_well_polarization(tables, fig):
    t = tables["well_polarization.csv"]
    axes = fig.subplots(3, 1, sharex=True)
    count = 0
    for ax, state in zip(axes, ("ground", "excited", "mix")):
        for (name, col), style in zip(sorted(t.matching(f"{state}_xi*")), ("-", "--")):
            ax.plot(t["t"], col, style, label=name.split("_", 1)[1])
            count += 1
        ax.set_ylabel(rf"$p_y^{{[w]}}$ ({state})")
        ax.legend(frameon=False, fontsize=8)
    axes[-1].set_xlabel("t")
    return count


def build_well_spin_map(tables, fig):
    t = tables["well_spin_field.csv"]
    xs = np.unique(t["x"])
    ts = np.unique(t["t"])
    grid = t["sy"].reshape(len(ts), len(xs))
    ax = fig.subplots()
    scale = np.max(np.abs(grid)) or 1.0
    mesh = ax.pcolormesh(ts, xs, grid.T, cmap="RdBu_r", vmin=-scale, vmax=scale,
                         shading="nearest")
    fig.colorbar(mesh, ax=ax, label=r"$\sigma_y(x, t)$")
    ax.set_xlabel("t")
    ax.set_ylabel("x")
    return 1


def build_arrival_density(tables, fig):
    t = tables["farfield_density.csv"]
    (ax_a, ax_b) = fig.subplots(2, 1, sharex=True)
    xi_name, xi_col = t.matching("rho_xi*")[0]
    u_name, u_col = t.matching("rho_U*")[0]

    ax_a.plot(t["t"], t["rho"], "-", label="reference")
    ax_a.plot(t["t"], xi_col, "--", label=xi_name.replace("rho_", ""))
    ax_a.set_ylabel(r"$\rho(X, t)$")
    ax_a.legend(frameon=False, fontsize=8)

    ax_b.plot(t["t"], t["rho"], "-", label="reference")
    ax_b.plot(t["t"], u_col, "-.", label=u_name.replace("rho_", ""))
    ax_b.set_ylabel(r"$\rho(X, t)$")
    ax_b.set_xlabel("t")
    ax_b.legend(frameon=False, fontsize=8)

    # precursor insets on a shorter time scale
    i_peak = int(np.nanargmax(t["rho"]))
    t_peak = t["t"][i_peak]
    for ax, col in ((ax_a, xi_col), (ax_b, u_col)):
        inset = ax.inset_axes([0.08, 0.45, 0.38, 0.5])
        window = t["t"] < 0.75 * t_peak
        inset.plot(t["t"][window], t["rho"][window], "-", lw=0.8)
        inset.plot(t["t"][window], col[window], "--", lw=0.8)
        inset.tick_params(labelsize=6)
    return 4


def build_arrival_spin(tables, fig):
    t = tables["farfield_spin.csv"]
    ax = fig.subplots()
    ax.plot(t["t"], t["sy"], "-")
    ax.axhline(0.0, color="0.8", lw=0.6, zorder=0)
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\sigma_y(X, t)$")
    i_ext = int(np.nanargmax(np.abs(t["sy"])))
    inset = ax.inset_axes([0.08, 0.6, 0.38, 0.35])
    window = t["t"] < 0.75 * t["t"][i_ext]
    inset.plot(t["t"][window], t["sy"][window], "-", lw=0.8)
    inset.tick_params(labelsize=6)
    return 1


def build_length_scan(tables, fig):
    t = tables["scan.csv"]
    U0, d = t["U0"], t["d"]
    # two families: constant-U0 width scan and constant-d height scan
    u_ref = U0[np.argmax([np.sum(U0 == u) for u in U0])]
    d_ref = d[np.argmax([np.sum(d == w) for w in d])]
    fam_d = U0 == u_ref
    fam_u = d == d_ref
    ax = fig.subplots()
    ax.semilogx(t["transparency"][fam_d], t["delta_x"][fam_d], "o",
                label=f"U0 = {u_ref:g}, d varies")
    ax.semilogx(t["transparency"][fam_u], t["delta_x"][fam_u], "s", mfc="none",
                label=f"d = {d_ref:g}, U0 varies")
    ax.set_xlabel("barrier transparency")
    ax.set_ylabel(r"$\delta x$")
    ax.legend(frameon=False, fontsize=8)
    return 2


BUILDERS = {
    "build_exit_spin": build_exit_spin,
    "build_well_polarization": build_well_polarization,
    "build_well_spin_map": build_well_spin_map,
    "build_arrival_density": build_arrival_density,
    "build_arrival_spin": build_arrival_spin,
    "build_length_scan": build_length_scan,
}


def render(recipe: FigureRecipe, in_dir, out_path) -> Path:
    """Render one figure to a vector file; never mutates the input CSVs."""
    in_dir = Path(in_dir)
    out_path = Path(out_path)
    tables = _load_inputs(recipe, in_dir)
    fig = plt.figure(figsize=(5.2, 4.0))
    try:
        fig.suptitle(recipe.title, fontsize=10)
        n_series = BUILDERS[recipe.builder](tables, fig)
        if n_series != recipe.expected_series:
            raise EmptySeriesError(
                f"figure {recipe.fig_id}: drew {n_series} series, "
                f"expected {recipe.expected_series}")
        fig.savefig(out_path, format="pdf", metadata=PDF_METADATA)
    finally:
        plt.close(fig)
    return out_path


def render_all(in_dir, out_dir) -> list[Path]:
    """Render every recipe; returns the written paths (fig2.pdf ... fig7.pdf)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return [render(recipe, in_dir, out_dir / f"fig{recipe.fig_id}.pdf")
            for recipe in RECIPES]
