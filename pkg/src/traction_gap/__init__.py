"""Load compatibility, rotation kernels, and energy-gap certification for
pure-traction elasticity on cylinder and ball presets."""

__version__ = "0.1.0"

from ._kernels import active_backend
from .energy import (
    density,
    density_gradient,
    quadratic_form,
    quadratic_form_incompressible,
    taylor_residual,
)
from .galerkin import (
    GalerkinSpace,
    SolveResult,
    SolverError,
    StiffnessSystem,
    assemble,
    build_space,
    solve_quadratic,
    strain,
)
from .geometry import Domain, QuadratureRule, integrate_scalar, surface_quadrature, volume_quadrature
from .limits import (
    ExplicitSolution,
    GapReport,
    explicit_minimizers,
    gap_report,
    incompressible_linear_bounds,
    min_limit,
    min_linear,
    nonuniqueness_check,
    rotated_no_gap_check,
    verify_explicit,
)
from .loads import (
    KernelReport,
    LoadSpec,
    RigidPart,
    body_force,
    compatibility_report,
    default_rules,
    load_functional,
    reversed_compatibility_witness,
    rigid_projection,
    rotate_loads,
)
from .profiles import (
    axial_displacement_profile,
    radial_displacement_profile,
    radial_ode_residual,
)
from .rotations import (
    AxisAngle,
    SkewParams,
    coercivity_profile,
    exp_so3,
    nearest_rotation,
    rodrigues,
    rotation_about_z,
    skew_matrix,
)
from .scaled import (
    ConvergenceRow,
    DeformationAnsatz,
    best_fit_rotation,
    convergence_study,
    minimize_scaled,
    nonlinear_context,
    scaled_energy,
)

__all__ = [name for name in dir() if not name.startswith("_")]
