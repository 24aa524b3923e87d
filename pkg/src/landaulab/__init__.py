"""Numerical checks of semiclassical spectral asymptotics for magnetic Laplacians on line bundles."""

from .discretize import DiscreteOperator, assemble_sphere, assemble_torus, export_matrix_market, matvec
from .estimators import ChebyshevFilter, LowEnergySpectrum, SpectralProjector
from .exceptions import *  # noqa: F401,F403
from .geometry import Sphere, SphereGrid, Torus, TorusGrid, chern_flux, distance, field_geometry
from .prequantum import build_gauge, gauge_transform, holonomy
from .projector import (
    SmoothCutoff,
    assemble_projector,
    diagonal_density,
    gaussian_fit,
    phase_linearization,
    scaling_collapse,
    smoothed_filter,
)
from .spectral import detect_clusters, drift_scan, lowest_eigenpairs, solve
from .symbol_model import gap_constants, predict, predicted_cluster_energies, predicted_dimension

__version__ = "0.1.0"
