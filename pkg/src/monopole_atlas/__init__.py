"""Synthetic magnetic-field textures of an interacting spin pair.

Library for computing the geometric (Berry-curvature) magnetic field of
two coupled spin-1/2 particles in an external field, locating the
band degeneracies that act as magnetic monopoles in parameter space,
and extracting their quantized charges via Gauss' law.
"""

from .spinops import (
    Coupling,
    FieldPoint,
    SpinSystem,
    build_hamiltonian,
    build_spin_system,
    interaction_matrix,
)
from .eigen import (
    NonHermitianError,
    Spectrum,
    SpinMatrixElements,
    decompose,
    matrix_elements,
    singlet_triplet_basis,
    spectrum_at,
)
from .berry import (
    FieldSample,
    NearDegeneracy,
    coulomb_field,
    current_density,
    divergence,
    field_sum,
    fields_at,
    monopolar_residual,
    synthetic_field,
)
from .charges import (
    CHARACTER_BAND_ORDER,
    REFERENCE_BAND_TOTALS,
    ChargeCensus,
    DegeneracyOnSurface,
    MethodDisagreement,
    MonopoleRecord,
    PlaquettePhaseOverflow,
    Region,
    charge_census,
    flux_charge,
    lattice_charge,
    locate_degeneracies,
    quantize,
)

__version__ = "0.1.0"

__all__ = [
    "CHARACTER_BAND_ORDER",
    "ChargeCensus",
    "Coupling",
    "DegeneracyOnSurface",
    "FieldPoint",
    "FieldSample",
    "MethodDisagreement",
    "MonopoleRecord",
    "NearDegeneracy",
    "NonHermitianError",
    "PlaquettePhaseOverflow",
    "REFERENCE_BAND_TOTALS",
    "Region",
    "SpinMatrixElements",
    "SpinSystem",
    "Spectrum",
    "build_hamiltonian",
    "build_spin_system",
    "charge_census",
    "coulomb_field",
    "current_density",
    "decompose",
    "divergence",
    "field_sum",
    "fields_at",
    "flux_charge",
    "interaction_matrix",
    "lattice_charge",
    "locate_degeneracies",
    "matrix_elements",
    "monopolar_residual",
    "quantize",
    "singlet_triplet_basis",
    "spectrum_at",
    "synthetic_field",
]
