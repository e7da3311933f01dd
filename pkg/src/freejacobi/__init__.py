"""Numerics toolkit for the free Jacobi process.

Stationary spectral laws in closed form, the nonlinear moment hierarchy, the
Cauchy-transform evolution equation, and finite-dimensional random-matrix
Monte Carlo converging to the free limit.
"""

__version__ = "0.1.0"

from .errors import (
    BranchError,
    DomainError,
    EvaluationError,
    FreeJacobiError,
    IntegrationError,
    SimulationError,
    TailCertificationError,
)
from .measures import (
    InversionResult,
    SpectralMeasure,
    cauchy_of_measure,
    moments_of_measure,
    quadrature,
    stieltjes_inversion,
)
from .stationary import (
    JacobiParams,
    arcsine_moments_exact,
    compressed_k_transform,
    compressed_r_transform,
    hyp2f1,
    log_potential_integral,
    projection_r_transform,
    stationary_atoms,
    stationary_cauchy,
    stationary_density,
    stationary_log_potentials,
    stationary_measure,
    stationary_moment,
    stationary_moments,
    support_edges,
)
from .moments import (
    MomentState,
    MomentTrajectory,
    catalan_identity_check,
    chebyshev_functional,
    integrate_moments,
    log_functional,
    log_identity_residual,
    m1_exact,
    moment_rhs,
    resolvent_functional,
)
from .cauchy import (
    ContourSample,
    G_from_h,
    cauchy_from_moments,
    h_from_G,
    make_contour,
    pde_rhs,
    solve_pde,
)
from .matsim import (
    MatrixJacobiConfig,
    TrajectoryRecord,
    corner_jacobi,
    hermitian_increment,
    martingale_diagnostic,
    sample_haar_unitary,
    simulate_direct_sde,
    simulate_trajectory,
    unitary_bm_step,
)
