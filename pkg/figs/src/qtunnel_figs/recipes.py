"""Figure recipes: which CSVs feed each figure and what it must contain.

Column requirements may be fnmatch patterns (e.g. ``*_xi*``) where the
producing run encodes parameter values into header names.
"""
from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class FigureRecipe:
    fig_id: int
    name: str
    inputs: dict[str, tuple[str, ...]]  # csv filename -> required column patterns
    expected_series: int
    builder: str
    title: str


RECIPES: tuple[FigureRecipe, ...] = (
    FigureRecipe(
        fig_id=2, name="exit_spin",
        inputs={"sigma_y_exit.csv": ("t", "ground", "excited", "mix")},
        expected_series=3, builder="build_exit_spin",
        title="Spin density at the barrier exit for three initial states"),
    FigureRecipe(
        fig_id=3, name="well_polarization",
        inputs={"well_polarization.csv": ("t", "ground_xi*", "excited_xi*", "mix_xi*")},
        expected_series=6, builder="build_well_polarization",
        title="Well-integrated y polarization, two coupling strengths"),
    FigureRecipe(
        fig_id=4, name="well_spin_map",
        inputs={"well_spin_field.csv": ("x", "t", "sy")},
        expected_series=1, builder="build_well_spin_map",
        title="Spin density map inside the well"),
    FigureRecipe(
        fig_id=5, name="arrival_density",
        inputs={"farfield_density.csv": ("t", "rho", "rho_xi*", "rho_U*")},
        expected_series=4, builder="build_arrival_density",
        title="Arrival density at the observation point"),
    FigureRecipe(
        fig_id=6, name="arrival_spin",
        inputs={"farfield_spin.csv": ("t", "sy")},
        expected_series=1, builder="build_arrival_spin",
        title="Spin density at the observation point"),
    FigureRecipe(
        fig_id=7, name="length_scan",
        inputs={"scan.csv": ("U0", "d", "transparency", "delta_x")},
        expected_series=2, builder="build_length_scan",
        title="Tunneling length vs barrier transparency"),
)
