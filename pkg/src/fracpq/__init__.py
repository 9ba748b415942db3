"""fracpq: a numerical laboratory for the 1-D fractional (p,q)-Laplacian.

The package builds the operator (-Delta)_p^{s1} + (-Delta)_q^{s2} on an
interval by singular-kernel collocation, solves regular and singular
Dirichlet problems by convex energy minimization with an epsilon-regularized
monotone path, and measures boundary-growth exponents, Hoelder quotients,
and maximum/comparison-principle predictions on the computed solutions.
"""

from .geometry import (
    BarrierSpec,
    Grid,
    GridFunction,
    barrier_function,
    build_grid,
    default_band_width,
    distance,
    extended_distance,
    tent_cutoff,
)
from .operators import (
    OperatorParams,
    TailSpec,
    WeakResidual,
    eval_pointwise,
    farfield_weight,
    gagliardo_seminorm,
    residual,
    signed_power,
    tail,
    weak_form,
)
from .solver import (
    RegularizedWeight,
    SingularParams,
    SolveReport,
    energy,
    regularized_weight,
    solve_constant_rhs,
    solve_dirichlet,
    solve_singular_eps,
    solve_singular_limit,
)
from .estimators import (
    ExponentFit,
    HolderEstimate,
    default_fit_window,
    fit_boundary_exponent,
    holder_quotient,
    hopf_quotient,
    second_diff_quotient,
)
from .principles import (
    BarrierCheckReport,
    PrincipleVerdict,
    halfline_l1_quadrature,
    halfline_l1_reference,
    verify_barrier_q_bounded,
    verify_barrier_super,
    verify_caccioppoli,
    verify_singular_scp,
    verify_strong_comparison,
    verify_strong_max,
    verify_weak_comparison,
)
from .config import ConfigError, ExperimentConfig, config_hash, load_config
from .experiments import RunResult, run, sweep

__version__ = "0.1.0"
