"""One-dimensional shallow-water wave modelling laboratory."""

from .core import (
    Bathymetry,
    Boundary,
    EnstrophyState,
    FieldKind,
    Grid1D,
    HydroState,
    IKState,
    MultiLayerState,
    ScalarState,
    ShallowWaveError,
    SimulationParams,
)

__version__ = "0.1.0"
