"""2D tensor strain tomography.

Reconstructs the divergence-free part of a residual elastic strain field
from longitudinal ray transform data by tensor filtered back projection,
then recovers the full strain either pointwise through Hooke's law or by
solving the potential-part boundary value problem with finite elements.
"""

__version__ = "0.1.0"

from .fields import (
    Grid2,
    Mask2,
    ReconReport,
    ScalarField2,
    TensorField2,
    exterior_ratio,
    mask_from_polygon,
    mask_from_support,
    per_component_max_error,
    polygon_area,
    read_field,
    read_polygon_csv,
    rel_rms_error,
    write_field,
    write_field_csv,
    write_polygon_csv,
)
from .phantoms import (
    AirySpec,
    ElasticConstants,
    add_hydrostatic,
    airy_potential,
    airy_solenoidal,
    airy_strain,
    axisym_phantom,
    default_grid,
    strain_from_airy,
)
from .lrt import (
    KIND_AVERAGE,
    KIND_LRT,
    KIND_SCALAR,
    Sinogram,
    angle_quadrature_weights,
    average_to_lrt,
    chord_lengths,
    fbp_scalar,
    lrt_forward,
    radon_forward,
    read_sinogram,
    read_sinogram_csv,
    sharafutdinov_inverse,
    tensor_fbp,
    trace_fbp,
    with_noise,
    write_sinogram,
    write_sinogram_csv,
)
from .spectral import (
    SpectralPlan,
    airy_from_stress,
    biharmonic_residual,
    divergence,
    fft_derivative,
    saint_venant,
)
from .elasticity import (
    FemSolution,
    TriMesh,
    body_force,
    build_mesh,
    fem_solve,
    helmholtz_check,
    hooke_recover,
    reconstruct_fem,
    sym_gradient,
)
