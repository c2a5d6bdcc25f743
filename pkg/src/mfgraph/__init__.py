"""Mean field games on graphs induced by reversible Markov chains.

The toolkit covers the whole pipeline: weighted-graph calculus from a
reversible chain, nonlinear edge activations, gradient-flow forms of the
forward equation, discrete transport distances, potential and general game
solvers, two-state closed forms, and master-equation values by
characteristics.
"""

from .activation import (
    Activation,
    DissipationPsiStar,
    GeneratorPhi,
    builtin,
    dtheta_dp,
    from_phi,
    from_phi_psi,
    theta_edge,
)
from .flows import (
    FlowTrajectory,
    flux_form_check,
    integrate_forward,
    integrate_generalized,
    integrate_onsager,
    onsager_matrix,
    phi_divergence,
)
from .graph import (
    EdgeField,
    MarkovGraph,
    build_from_q,
    build_from_weights,
    divergence,
    laplacian_apply,
    laplacian_matrix,
    spectral_gap,
    weighted_gradient,
)
from .lagrangian import LagrangianPair, legendre_residual, make_custom, make_power
from .master import (
    MasterField,
    master_pde_residual,
    mixed_value,
    reduced_master_grid,
    semigroup_check,
    u_at,
)
from .mfg import (
    MFGProblem,
    MFGSolution,
    euler_lagrange_residual,
    hamiltonian_value,
    hje_residual,
    homogeneous_value,
    lasry_lions_monotonicity,
    solve_mfg_fixedpoint,
    solve_potential_convex,
    value_function,
    value_of_trajectory,
)
from .twopoint import (
    GameSolution,
    PlanningSolution,
    ReducedTrajectory,
    TwoPointProblem,
    integrate_reduced,
    lift_to_solution,
    reduce,
    reduced_hamiltonian,
    solve_planning,
    solve_potential_game,
    wasserstein_alpha,
)

__version__ = "0.1.0"
