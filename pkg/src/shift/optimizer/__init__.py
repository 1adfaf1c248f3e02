from shift.optimizer.cost import (
    PLAIN,
    SUCCESSIVE_HALVING,
    CostModelParams,
    calibrate_e_proxy,
    choose_plan,
    cost_with_sh,
    cost_without_sh,
)
from shift.optimizer.sh import (
    SHConfig,
    SHRound,
    SHState,
    minimal_budget,
    minimal_chunk,
    pulls_per_round,
    round_sizes,
    successive_halving,
)

__all__ = [
    "PLAIN",
    "SUCCESSIVE_HALVING",
    "CostModelParams",
    "SHConfig",
    "SHRound",
    "SHState",
    "calibrate_e_proxy",
    "choose_plan",
    "cost_with_sh",
    "cost_without_sh",
    "minimal_budget",
    "minimal_chunk",
    "pulls_per_round",
    "round_sizes",
    "successive_halving",
]
