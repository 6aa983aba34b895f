"""Driven quantum dot coupled to a resonant mode: trajectory and grid engines."""

__version__ = "0.1.0"

from .model import ModelParams, PhasePoint, UnitScale, validate_params  # noqa: E402
from .analysis import TimeSeries  # noqa: E402

__all__ = ["ModelParams", "PhasePoint", "UnitScale", "validate_params", "TimeSeries", "__version__"]
