"""Rendering of the report figures from qtunnel CSV artifacts.

Figures are regression artifacts, not analysis: no data transformation beyond
axis scaling happens here.
"""

__version__ = "0.1.0"

from .recipes import RECIPES, FigureRecipe
from .render import EmptySeriesError, MissingColumnError, render, render_all

__all__ = ["RECIPES", "FigureRecipe", "EmptySeriesError", "MissingColumnError",
           "render", "render_all"]
