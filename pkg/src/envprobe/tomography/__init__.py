"""Hamiltonian identification from the reduced dynamics of S and the ancillas."""
from .basis import HermitianBasis, build_basis, gell_mann
from .equivalence import EquivalenceConfig, verify_equivalence
from .linsys import (
    ReconstructionResult,
    SolveError,
    SolveResult,
    affine_distance,
    assemble_system,
    canonical_solution,
    operator_coefficients,
    reconstruct,
    solve_system,
)
from .pipeline import (
    IdentifyResult,
    TomographyConfig,
    effective_operator,
    identify,
    identify_from_sampler,
    reconstructed_state,
    true_coefficients,
)
from .spectral import (
    SpectralData,
    SpectralError,
    cluster_values,
    derivative_spectrum_probe,
    extract_spectrum_exact,
    extract_spectrum_pencil,
    frequency_range,
    sample_matrices,
    sample_rho_SA,
)
from .stationarize import StationarizeError, StationarizeResult, commutant_projection, stationarize
