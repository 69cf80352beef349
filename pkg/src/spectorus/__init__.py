"""Numerical toolkit for transfer-operator spectra of piecewise expanding
torus maps: discontinuity-curve propagation, jump functionals, growth-rate
bounds on the essential spectral radius, and an Ulam-matrix cross-check."""

from .maps import (
    AffineSkewMap,
    CocycleMap,
    DoublingMap,
    IdentityMap,
    OneDPiecewiseMap,
    SlitMap,
    Weight,
    make_map,
    make_weight,
)
from .orbit import CurveOrbit, PropagateOptions, compute_alpha, curve_jacobian, propagate, transport_normal
from .torus import PolyCurve, Segment, curve_length, min_distance, refine, torus_distance, wrap

__all__ = [
    "AffineSkewMap",
    "CocycleMap",
    "CurveOrbit",
    "DoublingMap",
    "IdentityMap",
    "OneDPiecewiseMap",
    "PolyCurve",
    "PropagateOptions",
    "Segment",
    "SlitMap",
    "Weight",
    "compute_alpha",
    "curve_jacobian",
    "curve_length",
    "make_map",
    "make_weight",
    "min_distance",
    "propagate",
    "refine",
    "torus_distance",
    "transport_normal",
    "wrap",
]

__version__ = "0.1.0"
