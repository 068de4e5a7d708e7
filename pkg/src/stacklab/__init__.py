"""Solver, verifier and sweep harness for LQG Stackelberg incentive-design games."""

from .errors import (
    ContractViolation,
    DegenerateGainError,
    DegenerateGameError,
    InvalidSpecError,
    SingularProblemError,
    StacklabError,
    UnsupportedParameterizationError,
)
from .gaussian import (
    Layout,
    ResidualForm,
    SourceVector,
    Stationarity,
    conditional_mean_coeff,
    expected_cost,
    solve_linear_policies,
    stationarity_residual,
)
from .major import (
    MajHatSolution,
    MajSolution,
    ZeroLossSolution,
    maj_gain,
    maj_leader_major_optimal,
    maj_leader_optimal,
    maj_limits,
    maj_loss,
    maj_minor_response,
    zero_loss_plan,
    zero_loss_solve,
)
from .model import (
    Action,
    Channel,
    EquilibriumSolution,
    Game,
    IncentivePolicy,
    LinearPolicy,
    MajGameSpec,
    PnGameSpec,
    QuadraticCostSpec,
    Role,
    build_maj_costs,
    build_pn_costs,
    build_zero_loss_costs,
)
from .pn import PnSolution, pn_divergence_report, pn_gain, pn_leader_optimal, pn_limits
from .verify import (
    CertificationReport,
    MonteCarloConfig,
    best_response_improvement,
    certify_incentive,
    mc_expected_cost,
)

__version__ = "0.1.0"
