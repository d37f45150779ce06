"""Social-optimum solver for discrete-time, finite-state mean field games."""

__version__ = "0.1.0"

from socialmfg.core import (
    CostVector,
    Distribution,
    HorizonSolution,
    ProblemInstance,
    StationarySolution,
    StrategyMatrix,
    individual_costs,
    push_forward,
    social_cost,
)
from socialmfg.cost_models import (
    MODELS,
    ConstantCost,
    CostModel,
    Example1Cost,
    Example1Params,
    Example1VariantCost,
    Example2Cost,
    Example2VariantCost,
    ZeroCost,
    example1_cost,
    example1_variant_cost,
    example2_closed_form,
    example2_cost,
    example2_variant_cost,
    make_model,
)
from socialmfg.errors import (
    ConvergenceError,
    InvalidInputError,
    NumericDomainError,
    SocialMFGError,
    UnsupportedSizeError,
)
from socialmfg.horizon import (
    HorizonSolverConfig,
    backward_pass,
    forward_pass,
    residual_p1,
    solve_p1,
    solve_p1_multistart,
)
from socialmfg.simplex_opt import (
    InnerSolverConfig,
    KKTReport,
    StageResult,
    gamma_operator,
    kkt_residuals,
    optimal_social_cost,
    project_row_to_simplex,
    solve_stage,
    stage_gradient,
    theta_operator,
)
from socialmfg.stationary import (
    StationaryConfig,
    critical_value,
    quotient_norm,
    relative_value_iteration,
    solve_stationary,
    solve_stationary_multistart,
    stationary_residuals,
)
from socialmfg.verification import GridOracleConfig, ProbeResult, grid_oracle_min, run_probes
