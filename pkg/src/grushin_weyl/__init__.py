"""Numerics for the α-Grushin half-plane: distances, ball volumes, spectra, heat traces and Weyl laws."""

__version__ = "0.1.0"

from .errors import GrushinError  # noqa: E402
from .geometry import GrushinParams, Point, validate_params  # noqa: E402

__all__ = ["GrushinError", "GrushinParams", "Point", "validate_params", "__version__"]
