"""Numerics for the quadratic family: Green functions, certified parameter
roots, lifted tangent dynamics and discrete tangency measures."""

from bifcurrent.dynamics import (GreenValue, JetValue, Membership, Overflow, State,
                                 green, green_param, in_filled_julia, in_mandelbrot,
                                 iterate, jet_iterate)
from bifcurrent.lifted import (DegenerateDirection, TangentChartPoint, lift_iterate,
                               vertical_tangencies)
from bifcurrent.measures import AtomCloud, GridField, GridMeasure, GridSpec
from bifcurrent.roots import (DEFAULT_LINE, LineParams, RootSet, SolveOptions, Uncertified,
                              inverse_orbit_tree, qk_eval, sample_brolin, solve_qk_eq)

__version__ = "0.1.0"

__all__ = [
    "AtomCloud", "DegenerateDirection", "GreenValue", "GridField", "GridMeasure", "GridSpec", "JetValue",
    "LineParams", "Membership", "Overflow", "DEFAULT_LINE", "RootSet", "SolveOptions",
    "State", "TangentChartPoint", "Uncertified", "green", "green_param", "in_filled_julia", "in_mandelbrot",
    "inverse_orbit_tree", "iterate", "jet_iterate", "lift_iterate", "qk_eval", "sample_brolin",
    "solve_qk_eq", "vertical_tangencies",
]
