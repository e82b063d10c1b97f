"""Work statistics of catalytic quantum channels under the two-point measurement."""

from .channels import (
    ChannelReport,
    DilatedChannel,
    JointUnitary,
    apply_channel,
    catalyst_fixed_point,
    classify_channel,
    make_fully_thermalizing,
    make_random_unitary_channel,
    make_unitary_channel,
    verify_catalytic,
)
from .constructions import (
    BlockPlan,
    BoundReport,
    Canonical,
    ExpDos,
    IidSpins,
    Microcanonical,
    build_block_catalytic,
    build_toy_channel,
    jarzynski_bound,
    make_gp_mix,
    min_entropy_audit,
    nmw_tail_curve,
    plan_blocks,
    synthetic_spectrum,
)
from .estimators import CatalyticChannelTransformer
from .exceptions import (
    BudgetExceededError,
    ConvergenceError,
    DimensionMismatchError,
    DomainError,
    NotCatalyticError,
    PlanError,
)
from .multiagent import JointWorkRecord, ProtocolConfig, analyze_joint, run_exact, run_monte_carlo
from .qcore import (
    ClassicalState,
    DensityOperator,
    EnergyWindow,
    PermutationMap,
    Spectrum,
    gibbs_state,
    microcanonical_state,
    partial_trace,
    state_functionals,
    trace_distance,
)
from .tpm import (
    WorkDistribution,
    exponential_work_average,
    joint_outcome_distribution,
    work_distribution,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelReport",
    "DilatedChannel",
    "JointUnitary",
    "apply_channel",
    "catalyst_fixed_point",
    "classify_channel",
    "make_fully_thermalizing",
    "make_random_unitary_channel",
    "make_unitary_channel",
    "verify_catalytic",
    "BlockPlan",
    "BoundReport",
    "Canonical",
    "ExpDos",
    "IidSpins",
    "Microcanonical",
    "build_block_catalytic",
    "build_toy_channel",
    "jarzynski_bound",
    "make_gp_mix",
    "min_entropy_audit",
    "nmw_tail_curve",
    "plan_blocks",
    "synthetic_spectrum",
    "CatalyticChannelTransformer",
    "BudgetExceededError",
    "ConvergenceError",
    "DimensionMismatchError",
    "DomainError",
    "NotCatalyticError",
    "PlanError",
    "JointWorkRecord",
    "ProtocolConfig",
    "analyze_joint",
    "run_exact",
    "run_monte_carlo",
    "ClassicalState",
    "DensityOperator",
    "EnergyWindow",
    "PermutationMap",
    "Spectrum",
    "gibbs_state",
    "microcanonical_state",
    "partial_trace",
    "state_functionals",
    "trace_distance",
    "WorkDistribution",
    "exponential_work_average",
    "joint_outcome_distribution",
    "work_distribution",
]
