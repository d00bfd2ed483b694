"""Numerical laboratory for growing modes of the Keller-Segel chemotaxis model."""

from .dispersion import SpectrumSummary, eigenpair, spectrum_summary
from .model import ModelParams, critical_wavenumber_squared, steady_state, validate
from .spectral import GridField, SpectralField

__all__ = [
    "GridField",
    "ModelParams",
    "SpectralField",
    "SpectrumSummary",
    "critical_wavenumber_squared",
    "eigenpair",
    "spectrum_summary",
    "steady_state",
    "validate",
]
