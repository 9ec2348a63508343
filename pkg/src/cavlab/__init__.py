"""Explicit incompressible cavitation maps in the plane, their energies, and lower-bound tools."""

from .cavmap import PiecewiseCavityMap, RadialCavityMap
from .dacmoser import TransitionMap, TransitionSpec, make_spec, solve_transition
from .errors import ConfigurationError, DegenerateConfigurationError, DomainError, NumericalError, SingularityError
from .twoball import TwoBallGeometry, solve_geometry

__all__ = [
    "ConfigurationError",
    "DegenerateConfigurationError",
    "DomainError",
    "NumericalError",
    "PiecewiseCavityMap",
    "RadialCavityMap",
    "SingularityError",
    "TransitionMap",
    "TransitionSpec",
    "TwoBallGeometry",
    "make_spec",
    "solve_geometry",
    "solve_transition",
]

__version__ = "0.1.0"
