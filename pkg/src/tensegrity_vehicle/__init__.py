"""Collision stress analysis and ground re-orientation planning for
icosahedron-tensegrity aerial vehicles."""

__version__ = "0.1.0"

from . import dynamics, model, montecarlo, reorient, stress
from .exceptions import TensegrityError

__all__ = ["dynamics", "model", "montecarlo", "reorient", "stress",
           "TensegrityError", "__version__"]
