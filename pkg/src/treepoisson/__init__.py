"""Green functions, Poisson kernels, boundary measures and Plancherel expansions
for Schrodinger operators on trees."""
__version__ = "0.1.0"

from .kernels import BACKEND
from .tree import (
    Cylinder, DirectedEdge, HomogeneousTail, ModelError, RayAddress, TreeModel,
    arc_between, confluence, cylinder_partition, format_address, load_model,
    parse_address, read_model, regular_ball,
)
from .green import (
    IdentityReport, PoleError, SpectralParameter, ZetaField, compute_zeta_batch,
    compute_zeta_field, green_matrix, green_pair, green_restricted, identity_suite,
    psi, zeta_homogeneous,
)
from .poisson import (
    LimitReport, PoissonEvaluation, PoissonTable, eigen_check, poisson_eval,
    poisson_limit_check, poisson_step,
)
from .measure import (
    CylinderMeasure, SpectralBoundary, eigen_residual, nu_E_cylinder,
    nu_from_eigenfunction, psi_via_boundary, reconstruct, spectral_measure,
)
from .fourier import (
    CheckReport, EnergyWindow, KernelReport, TestFunction, apply_function,
    fourier_coeff, hs_norm_check, integrate, kernel_entry, kernel_report,
    plancherel_check, trace_by_kernel, trace_functional,
)
from .oracle import (
    DenseTruncation, closed_walks, dense_function_entry, dense_function_matrix,
    dense_resolvent, dense_resolvent_entry, effective_core_resolvent,
    finite_truncation, restricted_dense_resolvent, truncate,
)
