"""Figure pipeline for BD-RIS sweep artifacts."""

from .pipeline import (MissingColumn, PlotSpec, check, check_convergence,
                       check_gain_ordering, render)

__version__ = "0.1.0"

__all__ = ["MissingColumn", "PlotSpec", "check", "check_convergence",
           "check_gain_ordering", "render"]
