"""Pseudospectral Navier-Stokes on the periodic box with Littlewood-Paley and Besov diagnostics."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BlowUpError,
    ConfigError,
    ConfigurationError,
    DegenerateInputError,
    InvalidProfileError,
    LPNSEError,
    ParameterError,
    StepRejectedError,
    SymmetryError,
)
from .littlewood_paley import DyadicPartition, build_partition  # noqa: E402
from .norms import BesovParams, NormReport, besov_norm, check_interpolation, lp_norm, sobolev_norm  # noqa: E402
from .solver import SolverConfig, simulate  # noqa: E402
from .spectral import Grid, PhysicalField, SpectralField, SpectralVectorField  # noqa: E402

__all__ = [
    "BesovParams",
    "BlowUpError",
    "ConfigError",
    "ConfigurationError",
    "DegenerateInputError",
    "DyadicPartition",
    "Grid",
    "InvalidProfileError",
    "LPNSEError",
    "NormReport",
    "ParameterError",
    "PhysicalField",
    "SolverConfig",
    "SpectralField",
    "SpectralVectorField",
    "StepRejectedError",
    "SymmetryError",
    "besov_norm",
    "build_partition",
    "check_interpolation",
    "lp_norm",
    "simulate",
    "sobolev_norm",
]
