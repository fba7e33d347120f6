"""Directional maximal operators over lacunary slope sets on periodic grids."""

from .directions import (LacunaryCertificate, SlopeSet, build_n_lacunary, certify_log_order,
                         equispaced_slopes, geometric_slopes, is_one_lacunary,
                         verify_certificate)
from .gridops import (GridFunction, Sector, SlopeInterval, directional_max, gamma_apply,
                      parallelogram_max, sector_double, sector_project, strong_max)
from .kernels import KernelParams, SymbolProfile, fejer, psi, psi_hat, window_phi, window_phi_hat

__version__ = "0.1.0"

__all__ = [
    "LacunaryCertificate", "SlopeSet", "build_n_lacunary", "certify_log_order",
    "equispaced_slopes", "geometric_slopes", "is_one_lacunary", "verify_certificate",
    "GridFunction", "Sector", "SlopeInterval", "directional_max", "gamma_apply",
    "parallelogram_max", "sector_double", "sector_project", "strong_max",
    "KernelParams", "SymbolProfile", "fejer", "psi", "psi_hat", "window_phi", "window_phi_hat",
]
