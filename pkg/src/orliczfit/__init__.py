"""Best Phi-approximation on bounded intervals.

Convex modulars built from nondecreasing generators, finite-dimensional
approximation classes on quadrature grids, a nonsmooth solver with an
exhaustive oracle, optimality certificates from one-sided directional
derivatives, and empirical uniqueness experiments.
"""

from .phi import (
    AffineSegment,
    Generator,
    PhiFunction,
    Piece,
    delta2_ratio,
    find_affine_segments,
    make_linear_then_convex_phi,
    make_power_phi,
    make_staircase_phi,
)
from .grids import (
    Grid,
    GridFunction,
    GridMismatchError,
    NodeSet,
    equality_set,
    make_uniform_grid,
    measure,
    modular,
)
from .subspaces import (
    ProbeVerdict,
    ProbeWitness,
    StructureReport,
    Subspace,
    count_sign_changes,
    evaluate,
    make_hat_subspace,
    make_monomial_subspace,
    make_subspace,
    one_space_witness,
    subspace_from_csv,
    tchebycheff_probe,
)
from .solver import (
    BestApproxSolution,
    NonFiniteObjectiveError,
    SolverConfig,
    brute_force_oracle,
    refine_solution,
    solve,
    solve_all_starts,
)
from .certificates import (
    Certificate,
    DirectionCheck,
    DirectionalDerivative,
    check_characterization,
    check_smooth_characterization,
    directional_derivative,
    is_gamma_set,
    sign_consistency,
)
from .uniqueness import (
    NonUniqWitness,
    SolutionCluster,
    UniquenessReport,
    UniquenessVerdict,
    WitnessPreconditionError,
    build_nonuniq_witness,
    condition_b_check,
    jump_phi_uniqueness_suite,
    random_smooth_function,
    residual_sign_changes,
    uniqueness_probe,
)

__version__ = "0.1.0"
