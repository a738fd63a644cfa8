"""Online selection of the splitting layer for early-exit edge/cloud co-inference."""

from .bandit import PolicyKind, UcbState, run_policy, ucb_select, ucb_update
from .model import (
    DEFAULT_EXITS,
    ContractError,
    CostParams,
    ExitProfile,
    RunReport,
    SampleRecord,
    SplitSimError,
    StepOutcome,
    Trace,
    ValidationError,
    raw_cost_final_layer,
    reward,
)
from .oracle import OracleResult, per_arm_means, pseudo_regret
from .tracegen import GeneratorConfig, drift_trace, generate_trace
from .traceio import read_trace, write_report, write_trace

__all__ = [
    "DEFAULT_EXITS",
    "ContractError",
    "CostParams",
    "ExitProfile",
    "GeneratorConfig",
    "OracleResult",
    "PolicyKind",
    "RunReport",
    "SampleRecord",
    "SplitSimError",
    "StepOutcome",
    "Trace",
    "UcbState",
    "ValidationError",
    "drift_trace",
    "generate_trace",
    "per_arm_means",
    "pseudo_regret",
    "raw_cost_final_layer",
    "read_trace",
    "reward",
    "run_policy",
    "ucb_select",
    "ucb_update",
    "write_report",
    "write_trace",
]
