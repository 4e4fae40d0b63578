"""Meshless Galerkin solver for elliptic PDEs on the unit sphere.

Surface-spline Lagrange bases, kernel quadrature, stiffness assembly and
the experiment harness that reproduces the convergence studies.
"""

from .errors import (
    DegenerateGeometryError,
    DuplicatePointError,
    FootprintError,
    InvalidArgumentError,
    NotPositiveDefiniteError,
    PointDataError,
    PointFormatError,
    SphgError,
)
from .galerkin import (
    GalerkinSolution,
    PDEProblem,
    StiffnessMatrix,
    assemble,
    assemble_rhs,
    assemble_stiffness,
    condition_number,
    evaluate_solution,
    export_matrix,
    solve,
    truncate,
)
from .geometry import (
    PointSet,
    PointSetMetrics,
    ball_query,
    compute_metrics,
    fibonacci_nodes,
    geodesic_distance,
    icosahedral_nodes,
    load_points,
    save_points,
)
from .harmonics import HarmonicBasis, harmonic_index, harmonic_moment
from .harness import (
    ConvergenceRecord,
    ExperimentConfig,
    RuleCache,
    builtin_problem,
    evaluation_rule,
    fit_rate,
    relative_l2_error,
    sweep_centers,
    sweep_interpolation,
    sweep_quadrature,
)
from .kernels import SurfaceSplineKernel, kernel_deriv, kernel_eval, kernel_moment, kernel_surface_gradient
from .lagrange import LagrangeBasis, build_global_basis, build_local_basis, interpolate
from .quadrature import QuadratureRule, apply, compute_weights, gauss_product_rule, reference_rule

__version__ = "0.1.0"
